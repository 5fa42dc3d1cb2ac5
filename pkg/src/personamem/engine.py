"""Per-user session management around the pipeline: locking, state loading,
batch persistence, trace export, and read-only inspection."""

from __future__ import annotations

import logging
import threading
import time
from dataclasses import dataclass

from .config import EngineConfig
from .errors import PersonamemError, SessionBusy
from .gateway import CallRecorder, build_gateway
from .pipeline import AgentTrace, CannedWebSearch, absorb_exchange, execute_turn
from .profile import UserProfile
from .retrieval import expand_query, retrieve
from .storage import UserState, UserStorage

logger = logging.getLogger(__name__)


def tick_clock(start_ms: int = 1_700_000_000_000, step_ms: int = 1000):
    """Deterministic clock for tests, golden transcripts, and demos."""
    state = {"now": start_ms - step_ms}

    def _clock() -> int:
        state["now"] += step_ms
        return state["now"]

    return _clock


@dataclass
class TurnResult:
    reply: str
    trace_id: str
    trace: AgentTrace
    error: str | None = None  # exception class name when the turn failed


class Engine:
    """One engine per storage root; shared by the HTTP server and the CLI."""

    def __init__(self, config: EngineConfig, gateway=None, web=None, clock=None):
        self.config = config
        self.gateway = gateway if gateway is not None else build_gateway(config)
        self.web = web if web is not None else CannedWebSearch()
        self.storage = UserStorage(config.storage_path)
        self.clock = clock or (lambda: int(time.time() * 1000))
        self._sessions: dict[str, UserState] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    def _lock_for(self, user_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(user_id, threading.Lock())

    def _state(self, user_id: str, cache: bool = True) -> UserState:
        if user_id in self._sessions:
            return self._sessions[user_id]
        state = self.storage.load(
            user_id,
            capacity=self.config.stm_capacity,
            memory_max_chars=self.config.memory_max_chars,
        )
        if cache:
            self._sessions[user_id] = state
        return state

    # -- chat -----------------------------------------------------------------

    def run_turn(self, user_id: str, query: str, blocking: bool = True) -> TurnResult:
        lock = self._lock_for(user_id)
        if not lock.acquire(blocking=blocking):
            raise SessionBusy(f"a turn is already in flight for {user_id!r}")
        try:
            state = self._state(user_id)
            trace_id = f"{user_id}-t{state.store.last_turn_id + 1:06d}"
            recorder = CallRecorder(self.gateway, self.config.call_budget)
            try:
                response, trace = execute_turn(
                    user_id, query, state, self.config, recorder, self.web, self.clock, trace_id
                )
            except PersonamemError as exc:
                # discard partially mutated in-memory state; disk is untouched
                self._sessions.pop(user_id, None)
                logger.warning("turn failed for %s: %s", user_id, exc)
                trace = AgentTrace(
                    trace_id=trace_id,
                    user_id=user_id,
                    query=query,
                    config_flags={"mode": self.config.pipeline_mode},
                    response=f"error: {exc}",
                    warnings=[f"turn failed: {type(exc).__name__}: {exc}"],
                )
                self.storage.write_trace(user_id, trace_id, trace.to_dict())
                return TurnResult(
                    reply=trace.response, trace_id=trace_id, trace=trace, error=type(exc).__name__
                )
            self.storage.persist(user_id, state)
            self.storage.write_trace(user_id, trace_id, trace.to_dict())
            return TurnResult(reply=response, trace_id=trace_id, trace=trace)
        finally:
            lock.release()

    def ingest_exchange(self, user_id: str, user_text: str, assistant_text: str) -> None:
        """Absorb a scripted exchange through the normal post-exchange path
        (memories, profile, summaries) without generating a response."""
        lock = self._lock_for(user_id)
        with lock:
            state = self._state(user_id)
            recorder = CallRecorder(self.gateway, self.config.call_budget)
            try:
                absorb_exchange(state, user_text, assistant_text, self.config, recorder, self.clock)
            except PersonamemError:
                self._sessions.pop(user_id, None)
                raise
            self.storage.persist(user_id, state)

    # -- read-only inspection ---------------------------------------------------

    def get_profile(self, user_id: str) -> UserProfile:
        return self._state(user_id, cache=False).profile

    def get_summaries(self, user_id: str) -> list[dict]:
        state = self._state(user_id, cache=False)
        return [s.to_dict() for s in state.store.summaries]

    def inspect_memories(
        self, user_id: str, probe: str | None = None, k: int = 10, offset: int = 0
    ) -> dict:
        if k < 1 or k > 100:
            raise ValueError("k must be in [1, 100]")
        state = self._state(user_id, cache=False)
        store = state.store
        if probe:
            expanded = expand_query(probe, self.gateway)
            result = retrieve(
                expanded,
                store,
                k_direct=k,
                k_total=k,
                tag_overlap_bonus=self.config.tag_overlap_bonus,
            )
            records = []
            for hit in result.hits:
                entry = store.ltm[hit.memory_id].to_dict()
                entry.pop("embedding")
                entry["score"] = hit.score
                entry["provenance"] = hit.provenance
                records.append(entry)
            return {"probe": probe, "tags": expanded.tags, "records": records, "total": len(store)}
        ordered = sorted(store.ltm.values(), key=lambda r: -r.memory_id)
        page = ordered[offset : offset + k]
        records = []
        for record in page:
            entry = record.to_dict()
            entry.pop("embedding")
            records.append(entry)
        return {"probe": None, "records": records, "total": len(store), "offset": offset}

    def get_trace(self, user_id: str, trace_id: str) -> dict | None:
        return self.storage.read_trace(user_id, trace_id)

    def user_exists(self, user_id: str) -> bool:
        return self.storage.user_exists(user_id)
