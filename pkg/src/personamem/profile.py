"""Implicit user profile: six fixed categories of short declarative facts,
proposed by the profile-updater role after each exchange and merged
non-destructively."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import SchemaViolation, StaleDelta

PROFILE_CATEGORIES = (
    "demographics",
    "preferences",
    "interests",
    "personality_traits",
    "goals",
    "conversational_style",
)

PROFILE_SCHEMA_VERSION = 1

MAX_FACT_CHARS = 160


@dataclass
class ProfileFact:
    text: str
    first_seen: int
    last_confirmed: int
    source_turns: tuple[int, int] | None = None

    def to_dict(self) -> dict:
        return {
            "text": self.text,
            "first_seen": self.first_seen,
            "last_confirmed": self.last_confirmed,
            "source_turns": list(self.source_turns) if self.source_turns else None,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ProfileFact":
        src = data.get("source_turns")
        return cls(
            text=data["text"],
            first_seen=data["first_seen"],
            last_confirmed=data["last_confirmed"],
            source_turns=tuple(src) if src else None,
        )


@dataclass
class UserProfile:
    categories: dict[str, list[ProfileFact]]
    version: int = 0
    updated_at: int = 0

    def to_dict(self) -> dict:
        return {
            "schema_version": PROFILE_SCHEMA_VERSION,
            "version": self.version,
            "updated_at": self.updated_at,
            "categories": {
                cat: [f.to_dict() for f in self.categories[cat]] for cat in PROFILE_CATEGORIES
            },
        }

    @classmethod
    def from_dict(cls, data: dict) -> "UserProfile":
        cats = data["categories"]
        if set(cats) != set(PROFILE_CATEGORIES):
            raise SchemaViolation("profile category key set does not match schema")
        return cls(
            categories={cat: [ProfileFact.from_dict(f) for f in cats[cat]] for cat in PROFILE_CATEGORIES},
            version=data["version"],
            updated_at=data["updated_at"],
        )

    def fact_count(self) -> int:
        return sum(len(v) for v in self.categories.values())

    def filled_categories(self) -> dict[str, list[str]]:
        return {
            cat: [f.text for f in facts]
            for cat, facts in self.categories.items()
            if facts
        }

    def render(self) -> str:
        """Compact text rendering of filled categories only."""
        lines = [f"{cat}: {'; '.join(texts)}" for cat, texts in self.filled_categories().items()]
        return "\n".join(lines)

    def has_fact(self, text: str) -> bool:
        lowered = text.strip().lower()
        return any(f.text.lower() == lowered for facts in self.categories.values() for f in facts)


@dataclass
class ProfileDelta:
    additions: dict[str, list[str]] = field(default_factory=dict)
    refinements: list[tuple[str, str, str]] = field(default_factory=list)
    base_version: int = 0
    source_turns: tuple[int, int] | None = None

    def is_empty(self) -> bool:
        return not self.additions and not self.refinements


def profile_to_json_bytes(profile: UserProfile) -> bytes:
    """Canonical serialization; used for persistence and the golden schema fence."""
    return (json.dumps(profile.to_dict(), ensure_ascii=False, indent=2) + "\n").encode("utf-8")


def init_profile() -> UserProfile:
    return UserProfile(categories={cat: [] for cat in PROFILE_CATEGORIES}, version=0, updated_at=0)


def _validate_delta(profile: UserProfile, delta: ProfileDelta) -> None:
    for cat, texts in delta.additions.items():
        if cat not in PROFILE_CATEGORIES:
            raise SchemaViolation(f"unknown category: {cat!r}")
        for text in texts:
            if not text.strip():
                raise SchemaViolation("empty fact text")
            if len(text) > MAX_FACT_CHARS:
                raise SchemaViolation("fact text exceeds 160 chars")
    for cat, old, new in delta.refinements:
        if cat not in PROFILE_CATEGORIES:
            raise SchemaViolation(f"unknown category: {cat!r}")
        if not any(f.text == old for f in profile.categories[cat]):
            raise SchemaViolation(f"refinement target not in profile: {old!r}")
        if not new.strip():
            raise SchemaViolation("refinement replacement empty")


def propose_delta(profile: UserProfile, recent_exchange, gateway) -> ProfileDelta:
    """Ask the profile-updater role for a delta over the latest exchange.

    The returned delta always validates: proposed additions that already
    exist in the profile (case-insensitive) are dropped here.
    """
    if not recent_exchange or recent_exchange[-1].speaker != "assistant":
        raise ValueError("exchange must end with an assistant turn")
    from .gateway import AgentRequest  # local import avoids a module cycle

    dialogue = "\n".join(f"{t.speaker}: {t.text}" for t in recent_exchange)
    inputs = {"exchange": dialogue}
    rendered = profile.render()
    if rendered:
        inputs["profile"] = rendered
    response = gateway.generate(AgentRequest(role="profile_updater", inputs=inputs))
    payload = response.structured or {"additions": {}, "refinements": []}

    additions: dict[str, list[str]] = {}
    seen: set[str] = set()
    for cat, texts in payload["additions"].items():
        kept = []
        for text in texts:
            key = text.strip().lower()
            if key in seen or profile.has_fact(text):
                continue
            seen.add(key)
            kept.append(text.strip())
        if kept:
            additions[cat] = kept
    refinements = [tuple(r) for r in payload["refinements"]]
    delta = ProfileDelta(
        additions=additions,
        refinements=refinements,
        base_version=profile.version,
        source_turns=(recent_exchange[0].turn_id, recent_exchange[-1].turn_id),
    )
    _validate_delta(profile, delta)
    return delta


def apply_delta(profile: UserProfile, delta: ProfileDelta, now_ms: int) -> UserProfile:
    """Non-destructive merge. Empty delta is a no-op (version unchanged).

    Copy-on-write: the input profile (and any snapshot of it) is never
    mutated; untouched facts are shared between versions.
    """
    if delta.is_empty():
        return profile
    if delta.base_version != profile.version:
        raise StaleDelta(f"delta built on version {delta.base_version}, profile at {profile.version}")
    _validate_delta(profile, delta)

    merged = UserProfile(
        categories={cat: list(facts) for cat, facts in profile.categories.items()},
        version=profile.version + 1,
        updated_at=now_ms,
    )
    for cat, old, new in delta.refinements:
        facts = merged.categories[cat]
        for i, fact in enumerate(facts):
            if fact.text == old:
                facts[i] = ProfileFact(
                    text=new,
                    first_seen=fact.first_seen,
                    last_confirmed=now_ms,
                    source_turns=fact.source_turns,
                )
                break
    for cat, texts in delta.additions.items():
        facts = merged.categories[cat]
        for text in texts:
            idx = next((i for i, f in enumerate(facts) if f.text.lower() == text.lower()), None)
            if idx is not None:
                prior = facts[idx]
                facts[idx] = ProfileFact(
                    text=prior.text,
                    first_seen=prior.first_seen,
                    last_confirmed=max(prior.last_confirmed, now_ms),
                    source_turns=prior.source_turns,
                )
                continue
            facts.append(
                ProfileFact(
                    text=text,
                    first_seen=now_ms,
                    last_confirmed=now_ms,
                    source_turns=delta.source_turns,
                )
            )
    return merged
