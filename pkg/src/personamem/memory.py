"""Three-layer conversational memory for one user.

Short-term window (verbatim turns, pair-aligned eviction), topic summaries
of evicted spans, and the long-term store of concise embedded records with a
top-5 related-record graph that is refreshed on every insert.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import DuplicateId, OutOfOrderTurn
from .gateway import AgentRequest, EmbeddingVector
from .vectors import dot, l2_norm

MAX_RELATED = 5


@dataclass
class Turn:
    turn_id: int
    speaker: str  # "user" | "assistant"
    text: str
    timestamp: int  # UTC ms

    def to_dict(self) -> dict:
        return {
            "turn_id": self.turn_id,
            "speaker": self.speaker,
            "text": self.text,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Turn":
        return cls(**data)


@dataclass
class Summary:
    summary_id: int
    covers_turns: tuple[int, int]
    topics: list[str]
    text: str
    created_at: int

    def to_dict(self) -> dict:
        return {
            "summary_id": self.summary_id,
            "covers_turns": list(self.covers_turns),
            "topics": self.topics,
            "text": self.text,
            "created_at": self.created_at,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Summary":
        return cls(
            summary_id=data["summary_id"],
            covers_turns=tuple(data["covers_turns"]),
            topics=data["topics"],
            text=data["text"],
            created_at=data["created_at"],
        )


@dataclass
class MemoryRecord:
    memory_id: int
    text: str
    embedding: EmbeddingVector
    tags: list[str]
    timestamp: int
    related: list[int] = field(default_factory=list)
    source_turns: tuple[int, int] | None = None

    def to_dict(self) -> dict:
        return {
            "memory_id": self.memory_id,
            "text": self.text,
            "embedding": self.embedding.values,
            "tags": self.tags,
            "timestamp": self.timestamp,
            "related": list(self.related),
            "source_turns": list(self.source_turns) if self.source_turns else None,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MemoryRecord":
        src = data.get("source_turns")
        values = [float(v) for v in data["embedding"]]
        # values were stored unit-normalized; re-normalizing would disturb
        # the float bits and break exact round-trip equality
        return cls(
            memory_id=data["memory_id"],
            text=data["text"],
            embedding=EmbeddingVector(values=values, norm=l2_norm(values)),
            tags=data["tags"],
            timestamp=data["timestamp"],
            related=list(data["related"]),
            source_turns=tuple(src) if src else None,
        )


@dataclass
class LinkUpdateReport:
    inserted_id: int
    updated: list[int] = field(default_factory=list)


def render_dialogue(turns: list[Turn]) -> str:
    return "\n".join(f"{t.speaker}: {t.text}" for t in turns)


def _is_exchange(turns: list[Turn]) -> bool:
    if not turns or len(turns) % 2 != 0:
        return False
    return all(
        a.speaker == "user" and b.speaker == "assistant"
        for a, b in zip(turns[::2], turns[1::2])
    )


class MemoryStore:
    """All memory layers for a single user. Single-writer by contract."""

    def __init__(
        self,
        capacity: int = 12,
        memory_max_chars: int = 400,
    ):
        self.capacity = capacity
        self.memory_max_chars = memory_max_chars
        self.stm: list[Turn] = []
        self.summaries: list[Summary] = []
        self.ltm: dict[int, MemoryRecord] = {}
        self.last_turn_id = 0
        self.last_timestamp = 0
        self.last_speaker: str | None = None
        self.next_memory_id = 1
        self.next_summary_id = 1
        # persistence bookkeeping: records touched since the last persist
        self.dirty_memory_ids: set[int] = set()
        self.persisted_summary_count = 0

    # -- short-term window ------------------------------------------------

    def append_turn(self, turn: Turn) -> list[Turn]:
        """Append one turn; return any turns evicted to stay within capacity.

        Eviction removes whole user/assistant exchanges, oldest first.
        """
        if turn.turn_id <= self.last_turn_id:
            raise OutOfOrderTurn(f"turn_id {turn.turn_id} not after {self.last_turn_id}")
        if turn.speaker not in ("user", "assistant"):
            raise ValueError(f"bad speaker: {turn.speaker!r}")
        if not turn.text.strip():
            raise ValueError("turn text empty")
        if self.last_speaker is not None and turn.speaker == self.last_speaker:
            raise OutOfOrderTurn(f"consecutive {turn.speaker!r} turns break alternation")
        if turn.timestamp < self.last_timestamp:
            raise OutOfOrderTurn("timestamp went backwards")

        self.stm.append(turn)
        self.last_turn_id = turn.turn_id
        self.last_timestamp = turn.timestamp
        self.last_speaker = turn.speaker

        evicted: list[Turn] = []
        while len(self.stm) > self.capacity:
            take = 2 if len(self.stm) >= 2 and self.stm[0].speaker == "user" else 1
            evicted.extend(self.stm[:take])
            del self.stm[:take]
        return evicted

    def stm_digest(self, max_turns: int = 6) -> str:
        return render_dialogue(self.stm[-max_turns:])

    # -- summaries ---------------------------------------------------------

    def summarize_evicted(self, evicted: list[Turn], gateway) -> Summary:
        if not _is_exchange(evicted):
            raise ValueError("evicted turns must be non-empty, pair-aligned exchanges")
        response = gateway.generate(
            AgentRequest(role="summarizer", inputs={"dialogue": render_dialogue(evicted)})
        )
        payload = response.structured
        covers = (evicted[0].turn_id, evicted[-1].turn_id)
        if self.summaries and covers[0] <= self.summaries[-1].covers_turns[1]:
            raise ValueError("summary range overlaps previous summary")
        summary = Summary(
            summary_id=self.next_summary_id,
            covers_turns=covers,
            topics=payload["topics"],
            text=payload["text"],
            created_at=evicted[-1].timestamp,
        )
        self.next_summary_id += 1
        self.summaries.append(summary)
        return summary

    # -- long-term records ---------------------------------------------------

    def synthesize_memory(self, window: list[Turn], gateway) -> MemoryRecord:
        """Condense a completed exchange into an unlinked record."""
        if not window or window[-1].speaker != "assistant":
            raise ValueError("window must end with an assistant turn")
        dialogue = render_dialogue(window)
        response = gateway.generate(
            AgentRequest(
                role="memory_synthesizer",
                inputs={"dialogue": dialogue},
                params={"max_output_chars": self.memory_max_chars},
            )
        )
        text = response.text.strip()[: self.memory_max_chars] or dialogue[: self.memory_max_chars]
        tag_response = gateway.generate(AgentRequest(role="tagger", inputs={"text": text}))
        tags = tag_response.structured["tags"] or ["general"]
        record = MemoryRecord(
            memory_id=self._alloc_memory_id(),
            text=text,
            embedding=gateway.embed(text),
            tags=tags,
            timestamp=window[-1].timestamp,
            related=[],
            source_turns=(window[0].turn_id, window[-1].turn_id),
        )
        return record

    def new_record(self, text: str, tags: list[str], timestamp: int, gateway) -> MemoryRecord:
        """Unlinked record straight from text (baseline mode, fixtures)."""
        return MemoryRecord(
            memory_id=self._alloc_memory_id(),
            text=text,
            embedding=gateway.embed(text),
            tags=tags or ["general"],
            timestamp=timestamp,
            related=[],
        )

    def _alloc_memory_id(self) -> int:
        mid = self.next_memory_id
        self.next_memory_id += 1
        return mid

    def _link_key(self, owner: MemoryRecord, other: MemoryRecord) -> tuple[float, int, int]:
        """Ordering key for owner's related list: similarity desc, then newer
        timestamp, then newer id. Tuple compares lexicographically."""
        return (dot(owner.embedding.values, other.embedding.values), other.timestamp, other.memory_id)

    def insert_memory(self, record: MemoryRecord) -> LinkUpdateReport:
        """Add a record: compute its top-5 links, then offer it as a candidate
        link to every existing record (displacing their weakest if beaten)."""
        if record.memory_id in self.ltm:
            raise DuplicateId(f"memory_id {record.memory_id} already stored")
        if record.related:
            raise ValueError("record must arrive unlinked")

        report = LinkUpdateReport(inserted_id=record.memory_id)
        scored: list[tuple[tuple[float, int, int], int]] = []
        for other in self.ltm.values():
            similarity = dot(record.embedding.values, other.embedding.values)
            scored.append(((similarity, other.timestamp, other.memory_id), other.memory_id))
            if self._offer_link(other, record, similarity):
                report.updated.append(other.memory_id)
        scored.sort(reverse=True)
        record.related = [mid for _, mid in scored[:MAX_RELATED]]

        self.ltm[record.memory_id] = record
        self.dirty_memory_ids.add(record.memory_id)
        self.dirty_memory_ids.update(report.updated)
        return report

    def _offer_link(self, owner: MemoryRecord, candidate: MemoryRecord, similarity: float) -> bool:
        key = (similarity, candidate.timestamp, candidate.memory_id)
        if len(owner.related) >= MAX_RELATED:
            weakest = self._link_key(owner, self.ltm[owner.related[-1]])
            if key <= weakest:
                return False
        position = len(owner.related)
        for i, mid in enumerate(owner.related):
            if key > self._link_key(owner, self.ltm[mid]):
                position = i
                break
        owner.related.insert(position, candidate.memory_id)
        del owner.related[MAX_RELATED:]
        return True

    def records(self) -> list[MemoryRecord]:
        return list(self.ltm.values())

    def __len__(self) -> int:
        return len(self.ltm)

    # -- state snapshot ------------------------------------------------------

    def snapshot(self) -> dict:
        return {
            "capacity": self.capacity,
            "memory_max_chars": self.memory_max_chars,
            "stm": [t.to_dict() for t in self.stm],
            "summaries": [s.to_dict() for s in self.summaries],
            "ltm": [self.ltm[mid].to_dict() for mid in sorted(self.ltm)],
            "last_turn_id": self.last_turn_id,
            "last_timestamp": self.last_timestamp,
            "last_speaker": self.last_speaker,
            "next_memory_id": self.next_memory_id,
            "next_summary_id": self.next_summary_id,
        }

    @classmethod
    def from_snapshot(cls, data: dict) -> "MemoryStore":
        store = cls(capacity=data["capacity"], memory_max_chars=data["memory_max_chars"])
        store.stm = [Turn.from_dict(t) for t in data["stm"]]
        store.summaries = [Summary.from_dict(s) for s in data["summaries"]]
        for rec in data["ltm"]:
            record = MemoryRecord.from_dict(rec)
            store.ltm[record.memory_id] = record
        store.last_turn_id = data["last_turn_id"]
        store.last_timestamp = data["last_timestamp"]
        store.last_speaker = data["last_speaker"]
        store.next_memory_id = data["next_memory_id"]
        store.next_summary_id = data["next_summary_id"]
        store.persisted_summary_count = len(store.summaries)
        return store
