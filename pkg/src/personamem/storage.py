"""Durable per-user state with batch-atomic commits.

Layout per user (all UTF-8):

    users/<id>/memories.jsonl    append-only record upserts (last line per id wins)
    users/<id>/summaries.jsonl   append-only
    users/<id>/stm.json          short-term window + id counters
    users/<id>/profile.json      user profile
    users/<id>/manifest.json     commit point: lengths + sha256 of the above
    users/<id>/traces/<tid>.json per-turn agent traces (auxiliary, post-commit)

Commit protocol: JSONL appends land first but stay invisible until the
manifest records their new lengths; rewritten files are staged as `.new` and
swapped after the manifest rename. The loader verifies checksums, reads
JSONL only up to the committed length, and rolls forward from `.new` staging
when a crash landed between manifest commit and swap. Any crash therefore
yields exactly the pre-batch or post-batch state.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
from dataclasses import dataclass
from pathlib import Path

from .errors import StorageCorrupt, StorageUnavailable
from .memory import MemoryRecord, MemoryStore, Summary, Turn
from .profile import UserProfile, init_profile, profile_to_json_bytes

SCHEMA_VERSION = 1

USER_ID_RE = re.compile(r"^[a-z0-9_-]{1,64}$")

JSONL_FILES = ("memories.jsonl", "summaries.jsonl")
SNAPSHOT_FILES = ("stm.json", "profile.json")

# Ordered crash-injection points, exercised by the durability tests.
CRASH_POINTS = (
    "after_appends",
    "after_new_files",
    "after_manifest_commit",
    "after_stm_swap",
    "after_profile_swap",
)


@dataclass
class UserState:
    store: MemoryStore
    profile: UserProfile


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _fsync_path(path: Path) -> None:
    fd = os.open(path, os.O_RDONLY)
    try:
        os.fsync(fd)
    finally:
        os.close(fd)


def _write_file(path: Path, data: bytes) -> None:
    with open(path, "wb") as f:
        f.write(data)
        f.flush()
        os.fsync(f.fileno())


def _stm_snapshot_bytes(store: MemoryStore) -> bytes:
    payload = {
        "schema_version": SCHEMA_VERSION,
        "capacity": store.capacity,
        "memory_max_chars": store.memory_max_chars,
        "stm": [t.to_dict() for t in store.stm],
        "last_turn_id": store.last_turn_id,
        "last_timestamp": store.last_timestamp,
        "last_speaker": store.last_speaker,
        "next_memory_id": store.next_memory_id,
        "next_summary_id": store.next_summary_id,
    }
    return (json.dumps(payload, ensure_ascii=False, indent=2) + "\n").encode("utf-8")


class UserStorage:
    """Reads and writes per-user state under a single storage root."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.crash_hook = None  # test seam: callable(point_name)

    def _crash(self, point: str) -> None:
        if self.crash_hook is not None:
            self.crash_hook(point)

    def user_dir(self, user_id: str) -> Path:
        if not USER_ID_RE.match(user_id):
            raise ValueError(f"invalid user_id: {user_id!r}")
        return self.root / "users" / user_id

    def user_exists(self, user_id: str) -> bool:
        return (self.user_dir(user_id) / "manifest.json").exists()

    # -- load ---------------------------------------------------------------

    def load(self, user_id: str, capacity: int = 12, memory_max_chars: int = 400) -> UserState:
        """Read-only load; unknown users get a fresh empty state."""
        directory = self.user_dir(user_id)
        manifest_path = directory / "manifest.json"
        if not manifest_path.exists():
            return UserState(
                store=MemoryStore(capacity=capacity, memory_max_chars=memory_max_chars),
                profile=init_profile(),
            )
        try:
            manifest = json.loads(manifest_path.read_bytes())
        except (OSError, json.JSONDecodeError) as exc:
            raise StorageCorrupt(f"manifest unreadable: {exc}") from exc
        if manifest.get("schema_version") != SCHEMA_VERSION:
            raise StorageCorrupt(f"unsupported schema version {manifest.get('schema_version')}")
        files = manifest["files"]

        committed: dict[str, bytes] = {}
        for name in JSONL_FILES:
            entry = files[name]
            path = directory / name
            data = path.read_bytes() if path.exists() else b""
            if len(data) < entry["length"]:
                raise StorageCorrupt(f"{name} shorter than committed length")
            data = data[: entry["length"]]
            if _sha256(data) != entry["sha256"]:
                raise StorageCorrupt(f"{name} checksum mismatch")
            committed[name] = data

        for name in SNAPSHOT_FILES:
            entry = files[name]
            path = directory / name
            data = path.read_bytes() if path.exists() else b""
            if _sha256(data) != entry["sha256"]:
                staged = directory / (name + ".new")
                if staged.exists():
                    data = staged.read_bytes()
                if _sha256(data) != entry["sha256"]:
                    raise StorageCorrupt(f"{name} checksum mismatch")
            committed[name] = data

        return UserState(
            store=self._build_store(committed),
            profile=UserProfile.from_dict(json.loads(committed["profile.json"])),
        )

    def _build_store(self, committed: dict[str, bytes]) -> MemoryStore:
        stm_state = json.loads(committed["stm.json"])
        store = MemoryStore(
            capacity=stm_state["capacity"],
            memory_max_chars=stm_state["memory_max_chars"],
        )
        store.stm = [Turn.from_dict(t) for t in stm_state["stm"]]
        store.last_turn_id = stm_state["last_turn_id"]
        store.last_timestamp = stm_state["last_timestamp"]
        store.last_speaker = stm_state["last_speaker"]
        store.next_memory_id = stm_state["next_memory_id"]
        store.next_summary_id = stm_state["next_summary_id"]

        for line in committed["memories.jsonl"].decode("utf-8").splitlines():
            if not line.strip():
                continue
            record = MemoryRecord.from_dict(json.loads(line))
            store.ltm[record.memory_id] = record  # upsert: last line wins
        for line in committed["summaries.jsonl"].decode("utf-8").splitlines():
            if not line.strip():
                continue
            store.summaries.append(Summary.from_dict(json.loads(line)))
        store.persisted_summary_count = len(store.summaries)

        for record in store.ltm.values():
            for mid in record.related:
                if mid not in store.ltm or mid == record.memory_id:
                    raise StorageCorrupt(f"record {record.memory_id} has dangling link {mid}")
        return store

    # -- persist ------------------------------------------------------------

    def persist(self, user_id: str, state: UserState) -> None:
        directory = self.user_dir(user_id)
        try:
            directory.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise StorageUnavailable(str(exc)) from exc

        manifest_path = directory / "manifest.json"
        old_manifest = None
        if manifest_path.exists():
            old_manifest = json.loads(manifest_path.read_bytes())

        try:
            self._persist_batch(directory, manifest_path, old_manifest, state)
        except OSError as exc:
            raise StorageUnavailable(str(exc)) from exc

        state.store.dirty_memory_ids.clear()
        state.store.persisted_summary_count = len(state.store.summaries)

    def _persist_batch(self, directory: Path, manifest_path: Path, old_manifest, state: UserState) -> None:
        store = state.store

        # repair: drop uncommitted trailing bytes from an interrupted batch
        for name in JSONL_FILES:
            path = directory / name
            committed_len = 0
            if old_manifest is not None:
                committed_len = old_manifest["files"][name]["length"]
            if path.exists() and path.stat().st_size > committed_len:
                with open(path, "r+b") as f:
                    f.truncate(committed_len)

        memories_path = directory / "memories.jsonl"
        with open(memories_path, "ab") as f:
            for mid in sorted(store.dirty_memory_ids):
                line = json.dumps(store.ltm[mid].to_dict(), ensure_ascii=False) + "\n"
                f.write(line.encode("utf-8"))
            f.flush()
            os.fsync(f.fileno())

        summaries_path = directory / "summaries.jsonl"
        with open(summaries_path, "ab") as f:
            for summary in store.summaries[store.persisted_summary_count :]:
                line = json.dumps(summary.to_dict(), ensure_ascii=False) + "\n"
                f.write(line.encode("utf-8"))
            f.flush()
            os.fsync(f.fileno())
        self._crash("after_appends")

        stm_bytes = _stm_snapshot_bytes(store)
        profile_bytes = profile_to_json_bytes(state.profile)
        _write_file(directory / "stm.json.new", stm_bytes)
        _write_file(directory / "profile.json.new", profile_bytes)
        self._crash("after_new_files")

        manifest = {
            "schema_version": SCHEMA_VERSION,
            "generation": (old_manifest["generation"] + 1) if old_manifest else 1,
            "files": {
                "memories.jsonl": {
                    "length": memories_path.stat().st_size,
                    "sha256": _sha256(memories_path.read_bytes()),
                },
                "summaries.jsonl": {
                    "length": summaries_path.stat().st_size,
                    "sha256": _sha256(summaries_path.read_bytes()),
                },
                "stm.json": {"length": len(stm_bytes), "sha256": _sha256(stm_bytes)},
                "profile.json": {"length": len(profile_bytes), "sha256": _sha256(profile_bytes)},
            },
        }
        manifest_tmp = directory / "manifest.json.tmp"
        _write_file(manifest_tmp, (json.dumps(manifest, indent=2) + "\n").encode("utf-8"))
        os.replace(manifest_tmp, manifest_path)
        _fsync_path(directory)
        self._crash("after_manifest_commit")

        os.replace(directory / "stm.json.new", directory / "stm.json")
        self._crash("after_stm_swap")
        os.replace(directory / "profile.json.new", directory / "profile.json")
        _fsync_path(directory)
        self._crash("after_profile_swap")

    # -- traces ---------------------------------------------------------------

    def write_trace(self, user_id: str, trace_id: str, payload: dict) -> None:
        traces_dir = self.user_dir(user_id) / "traces"
        traces_dir.mkdir(parents=True, exist_ok=True)
        data = (json.dumps(payload, ensure_ascii=False, indent=2) + "\n").encode("utf-8")
        tmp = traces_dir / f"{trace_id}.json.tmp"
        _write_file(tmp, data)
        os.replace(tmp, traces_dir / f"{trace_id}.json")

    def read_trace(self, user_id: str, trace_id: str) -> dict | None:
        if not re.match(r"^[a-zA-Z0-9_-]{1,128}$", trace_id):
            return None
        path = self.user_dir(user_id) / "traces" / f"{trace_id}.json"
        if not path.exists():
            return None
        return json.loads(path.read_text(encoding="utf-8"))

    def list_users(self) -> list[str]:
        users_dir = self.root / "users"
        if not users_dir.exists():
            return []
        return sorted(p.name for p in users_dir.iterdir() if p.is_dir())
