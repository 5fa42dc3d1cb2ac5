"""Shared text helpers: tokenization, stopwords, content words, sentences.

Every deterministic mock rule and every lexical metric goes through these
functions, so tokenization behavior is defined exactly once.
"""

from __future__ import annotations

import re
from collections import Counter

_TOKEN_RE = re.compile(r"[a-z0-9]+")

# Function words plus common conversational verbs. Kept deliberately small
# and frozen: the mock tagger/validator rules and their test oracles depend
# on this exact set.
STOPWORDS = frozenset(
    """
    a about above after again all am an and any are as ask asked at be because
    been before being below between both but by call can could did do does
    doing down during each else few for from further had has have having he
    her here hers herself him himself his how i if in into is it its itself
    just know let like may me might more most my myself need no nor not now of
    off on once only or other our ours ourselves out over own per said same
    say says shall she should so some such tell than that the their theirs
    them themselves then there these they think this those through to told too
    under until up very want wanted was we were what when where which while
    who whom why will with would you your yours yourself yourselves
    """.split()
)


def tokenize(text: str) -> list[str]:
    """Lowercase alphanumeric word tokens, in order."""
    return _TOKEN_RE.findall(text.lower())


def content_words(text: str) -> list[str]:
    """Tokens minus stopwords, original order, duplicates kept."""
    return [t for t in tokenize(text) if t not in STOPWORDS]


def ranked_content_words(text: str, limit: int = 8) -> list[str]:
    """Unique content words ordered by frequency, then first occurrence.

    This is the mock tagger rule; the retrieval tag expansion and summary
    topics are built on it.
    """
    words = content_words(text)
    counts = Counter(words)
    first_seen: dict[str, int] = {}
    for i, w in enumerate(words):
        first_seen.setdefault(w, i)
    ranked = sorted(counts, key=lambda w: (-counts[w], first_seen[w]))
    return ranked[:limit]


def coverage(needles: list[str], haystack: str) -> float:
    """Fraction of `needles` present as tokens of `haystack`. 1.0 if none."""
    if not needles:
        return 1.0
    have = set(tokenize(haystack))
    return sum(1 for n in needles if n in have) / len(needles)


def first_sentence(text: str) -> str:
    for part in re.split(r"[.!?]", text):
        part = part.strip()
        if part:
            return part
    return text.strip()


def contains_any_token(text: str, tokens: frozenset[str] | set[str]) -> bool:
    return any(t in tokens for t in tokenize(text))
