"""Tag-expanded similarity retrieval over the long-term store, one-hop
related-link broadening, and evidence formatting for the agent pipeline."""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timezone

from .gateway import AgentRequest, EmbeddingVector
from .memory import MemoryStore, Summary, Turn, render_dialogue
from .profile import UserProfile
from .vectors import dot


@dataclass
class ExpandedQuery:
    raw: str
    tags: list[str]
    expanded_text: str
    embedding: EmbeddingVector


@dataclass
class Hit:
    memory_id: int
    score: float
    provenance: str  # "direct" | "related"

    def to_dict(self) -> dict:
        return {"memory_id": self.memory_id, "score": self.score, "provenance": self.provenance}


@dataclass
class RetrievalResult:
    hits: list[Hit]
    k_direct: int
    k_total: int

    @classmethod
    def empty(cls, k_direct: int = 5, k_total: int = 15) -> "RetrievalResult":
        return cls(hits=[], k_direct=k_direct, k_total=k_total)


@dataclass
class EvidenceBundle:
    """Ordered, source-labeled text segments handed to validator/responder."""

    segments: dict[str, str]
    ltm_ids: list[int] = field(default_factory=list)

    def nonempty_segments(self) -> dict[str, str]:
        return {k: v for k, v in self.segments.items() if v.strip()}

    def flattened(self) -> str:
        return "\n".join(f"[{k}]\n{v}" for k, v in self.nonempty_segments().items())


def expand_query(raw: str, gateway) -> ExpandedQuery:
    if not raw or not raw.strip():
        raise ValueError("query empty")
    response = gateway.generate(AgentRequest(role="tagger", inputs={"query": raw}))
    tags = response.structured["tags"]
    expanded = raw + " " + " ".join(tags)
    return ExpandedQuery(raw=raw, tags=tags, expanded_text=expanded, embedding=gateway.embed(expanded))


def retrieve(
    q: ExpandedQuery,
    store: MemoryStore,
    k_direct: int = 5,
    k_total: int = 15,
    tag_overlap_bonus: float = 0.0,
) -> RetrievalResult:
    """Top-k cosine retrieval plus one hop over each direct hit's links.

    Direct hits rank by cosine (descending; ties prefer newer records);
    related hits are re-scored against the query and fill the remainder up
    to k_total. A record never appears twice, direct provenance wins.
    """
    if k_direct < 1 or k_total < k_direct:
        raise ValueError("need k_direct >= 1 and k_total >= k_direct")
    if len(store) == 0:
        return RetrievalResult.empty(k_direct, k_total)  # cold start

    qv = q.embedding.values
    scored: list[tuple[float, int, int]] = []
    for record in store.records():
        score = dot(qv, record.embedding.values)
        if tag_overlap_bonus > 0.0 and q.tags:
            overlap = len(set(q.tags) & set(record.tags)) / len(q.tags)
            score = min(1.0, score + tag_overlap_bonus * overlap)
        scored.append((score, record.timestamp, record.memory_id))
    scored.sort(reverse=True)

    direct = scored[:k_direct]
    direct_ids = {mid for _, _, mid in direct}
    hits = [Hit(memory_id=mid, score=score, provenance="direct") for score, _, mid in direct]

    related_scores: dict[int, float] = {}
    for _, _, mid in direct:
        for rid in store.ltm[mid].related:
            if rid in direct_ids or rid in related_scores:
                continue
            related_scores[rid] = dot(qv, store.ltm[rid].embedding.values)
    ordered_related = sorted(
        related_scores.items(),
        key=lambda kv: (-kv[1], -store.ltm[kv[0]].timestamp, -kv[0]),
    )
    for rid, score in ordered_related:
        if len(hits) >= k_total:
            break
        hits.append(Hit(memory_id=rid, score=score, provenance="related"))
    return RetrievalResult(hits=hits, k_direct=k_direct, k_total=k_total)


# ---------------------------------------------------------------------------
# Evidence formatting


def _iso(ts_ms: int) -> str:
    return datetime.fromtimestamp(ts_ms / 1000.0, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _fit_drop_oldest(items: list[tuple[int, str]], budget: int) -> list[int]:
    """Indices of entries that fit within a character budget, dropping the
    oldest-timestamped entries first. Surviving indices keep input order."""
    total = sum(len(text) + 1 for _, text in items)
    by_age = sorted(range(len(items)), key=lambda i: (items[i][0], i))
    cut = 0
    while total > budget and cut < len(by_age):
        total -= len(items[by_age[cut]][1]) + 1
        cut += 1
    dropped = set(by_age[:cut])
    return [i for i in range(len(items)) if i not in dropped]


def _render_fitted(items: list[tuple[int, str]], budget: int) -> tuple[str, list[int]]:
    kept = _fit_drop_oldest(items, budget)
    text = "\n".join(items[i][1] for i in kept)
    if len(text) > budget:  # single oversized entry
        text = text[:budget]
    return text, kept


def format_evidence(
    result: RetrievalResult,
    store: MemoryStore,
    summaries: list[Summary],
    stm: list[Turn],
    profile: UserProfile | None,
    config,
) -> EvidenceBundle:
    """Assemble the named evidence segments with per-source char budgets."""
    ltm_items = []
    for hit in result.hits:
        record = store.ltm[hit.memory_id]
        ltm_items.append((record.timestamp, f"[{_iso(record.timestamp)}] ({hit.score:.3f}) {record.text}"))
    ltm_text, kept = _render_fitted(ltm_items, config.budget_ltm_chars)

    summary_items = [
        (s.created_at, f"turns {s.covers_turns[0]}-{s.covers_turns[1]} [{', '.join(s.topics)}]: {s.text}")
        for s in summaries
    ]
    summaries_text, _ = _render_fitted(summary_items, config.budget_summaries_chars)

    stm_items = [(t.timestamp, f"{t.speaker}: {t.text}") for t in stm]
    stm_text, _ = _render_fitted(stm_items, config.budget_stm_chars)

    profile_text = ""
    if profile is not None:
        profile_text = profile.render()[: config.budget_profile_chars]

    return EvidenceBundle(
        segments={
            "ltm": ltm_text,
            "summaries": summaries_text,
            "stm": stm_text,
            "profile": profile_text,
        },
        ltm_ids=[result.hits[i].memory_id for i in kept],
    )


def render_stm(turns: list[Turn]) -> str:
    return render_dialogue(turns)
