from __future__ import annotations

import json

import pytest

from personamem import MemoryStore, ProfileDelta, Turn, UserState, UserStorage, apply_delta, init_profile
from personamem.errors import StorageCorrupt
from personamem.storage import CRASH_POINTS


class CrashInjected(Exception):
    pass


def _state_fingerprint(state: UserState) -> dict:
    return {"store": state.store.snapshot(), "profile": state.profile.to_dict()}


def _populate(gateway, n_records=5, n_exchanges=2) -> UserState:
    store = MemoryStore(capacity=12)
    tid = 1
    for i in range(n_exchanges):
        store.append_turn(Turn(tid, "user", f"hiking question {i}", tid * 1000))
        tid += 1
        store.append_turn(Turn(tid, "assistant", f"answer {i}", tid * 1000))
        tid += 1
    texts = ["alpine hiking", "jazz piano", "dog training", "tax law", "rose garden", "chess opening"]
    for i in range(n_records):
        record = store.new_record(texts[i % len(texts)] + f" {i}", ["t"], 100_000 + i, gateway)
        store.insert_memory(record)
    profile = apply_delta(
        init_profile(),
        ProfileDelta(additions={"interests": ["hiking"]}, base_version=0),
        now_ms=50_000,
    )
    return UserState(store=store, profile=profile)


def test_round_trip_50_records(tmp_path, gateway):
    storage = UserStorage(tmp_path)
    state = _populate(gateway, n_records=50)
    storage.persist("u1", state)
    loaded = storage.load("u1")
    assert _state_fingerprint(loaded) == _state_fingerprint(state)


def test_unknown_user_loads_fresh(tmp_path):
    storage = UserStorage(tmp_path)
    state = storage.load("nobody")
    assert len(state.store) == 0
    assert state.store.stm == []
    assert state.profile.fact_count() == 0


def test_incremental_persist_upserts_link_changes(tmp_path, gateway):
    storage = UserStorage(tmp_path)
    state = _populate(gateway, n_records=1)
    storage.persist("u1", state)
    first_id = next(iter(state.store.ltm))

    record = state.store.new_record("alpine hiking partner", ["t"], 200_000, gateway)
    state.store.insert_memory(record)
    storage.persist("u1", state)

    loaded = storage.load("u1")
    assert record.memory_id in loaded.store.ltm[first_id].related
    assert _state_fingerprint(loaded) == _state_fingerprint(state)


def test_truncated_memories_file_is_corrupt(tmp_path, gateway):
    storage = UserStorage(tmp_path)
    state = _populate(gateway)
    storage.persist("u1", state)
    path = tmp_path / "users" / "u1" / "memories.jsonl"
    data = path.read_bytes()
    path.write_bytes(data[: len(data) // 2])
    with pytest.raises(StorageCorrupt):
        storage.load("u1")


def test_bitflip_is_corrupt(tmp_path, gateway):
    storage = UserStorage(tmp_path)
    state = _populate(gateway)
    storage.persist("u1", state)
    path = tmp_path / "users" / "u1" / "stm.json"
    data = bytearray(path.read_bytes())
    data[10] ^= 0xFF
    path.write_bytes(bytes(data))
    # .new staging is gone after a clean commit, so no roll-forward applies
    with pytest.raises(StorageCorrupt):
        storage.load("u1")


def test_invalid_user_id_rejected(tmp_path):
    storage = UserStorage(tmp_path)
    with pytest.raises(ValueError):
        storage.load("A/B")


def test_trace_write_read(tmp_path):
    storage = UserStorage(tmp_path)
    storage.write_trace("u1", "u1-t000001", {"query": "hi"})
    assert storage.read_trace("u1", "u1-t000001") == {"query": "hi"}
    assert storage.read_trace("u1", "missing") is None
    assert storage.read_trace("u1", "../../etc/passwd") is None


@pytest.mark.parametrize("point", CRASH_POINTS)
def test_crash_point_yields_pre_or_post_state(tmp_path, gateway, point):
    storage = UserStorage(tmp_path)
    state = _populate(gateway, n_records=3)
    storage.persist("u1", state)
    pre = _state_fingerprint(storage.load("u1"))

    record = state.store.new_record("storm chess night", ["t"], 300_000, gateway)
    state.store.insert_memory(record)
    state.profile = apply_delta(
        state.profile,
        ProfileDelta(additions={"goals": ["visit the alps"]}, base_version=state.profile.version),
        now_ms=300_000,
    )
    post = _state_fingerprint(state)

    def crash(name):
        if name == point:
            raise CrashInjected(name)

    storage.crash_hook = crash
    with pytest.raises(CrashInjected):
        storage.persist("u1", state)
    storage.crash_hook = None

    recovered = _state_fingerprint(storage.load("u1"))
    assert recovered in (pre, post), f"mixed state after crash at {point}"
    if point in ("after_appends", "after_new_files"):
        assert recovered == pre
    else:
        assert recovered == post


def test_interrupted_batch_then_clean_persist(tmp_path, gateway):
    """Uncommitted appends from a crashed batch are repaired on the next one."""
    storage = UserStorage(tmp_path)
    state = _populate(gateway, n_records=2)
    storage.persist("u1", state)

    record = state.store.new_record("rose garden walk", ["t"], 400_000, gateway)
    state.store.insert_memory(record)

    def crash(name):
        if name == "after_appends":
            raise CrashInjected(name)

    storage.crash_hook = crash
    with pytest.raises(CrashInjected):
        storage.persist("u1", state)
    storage.crash_hook = None

    storage.persist("u1", state)  # retry after restart
    loaded = storage.load("u1")
    assert _state_fingerprint(loaded) == _state_fingerprint(state)
    # the memories file carries no duplicate committed ids beyond upserts
    lines = (tmp_path / "users" / "u1" / "memories.jsonl").read_text().splitlines()
    parsed = [json.loads(line) for line in lines if line.strip()]
    assert {p["memory_id"] for p in parsed} == set(state.store.ltm)


def test_load_is_read_only(tmp_path, gateway):
    storage = UserStorage(tmp_path)
    state = _populate(gateway)
    storage.persist("u1", state)
    user_dir = tmp_path / "users" / "u1"
    before = {p.name: p.read_bytes() for p in user_dir.iterdir() if p.is_file()}
    storage.load("u1")
    storage.load("u1")
    after = {p.name: p.read_bytes() for p in user_dir.iterdir() if p.is_file()}
    assert before == after
