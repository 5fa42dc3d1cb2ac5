"""Dataset adapters: normalize benchmark corpora into EvalItems.

Each item carries a multi-session conversation (user/assistant exchanges),
one question, and a reference answer. Two-speaker human dialogues are mapped
onto the user/assistant axes by first appearance, consecutive same-speaker
turns are merged, and dangling turns at session edges are dropped so every
session ingests as clean exchanges. See docs/datasets.md for the layouts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import FormatError

ADAPTERS = ("gvd", "locomo", "longmemeval", "generic_jsonl")


@dataclass
class EvalItem:
    item_id: str
    conversation: list[list[dict]]  # sessions of {"speaker", "text"}
    question: str
    reference_answer: str
    evidence_spans: list[tuple[int, int]] | None = None
    category: str | None = None

    def exchanges(self) -> list[list[tuple[str, str]]]:
        """Per-session (user_text, assistant_text) pairs."""
        out = []
        for session in self.conversation:
            pairs = []
            for a, b in zip(session[::2], session[1::2]):
                pairs.append((a["text"], b["text"]))
            out.append(pairs)
        return out


def _normalize_session(turns: list[dict], speaker_key: str, text_key: str) -> list[dict]:
    """Map raw speakers to user/assistant, merge consecutive same-speaker
    turns, drop a leading assistant turn and a trailing unanswered user turn."""
    roles: dict[str, str] = {}
    merged: list[dict] = []
    for turn in turns:
        raw_speaker = str(turn[speaker_key])
        text = str(turn[text_key]).strip()
        if not text:
            continue
        if raw_speaker in ("user", "assistant"):
            speaker = raw_speaker
        else:
            if raw_speaker not in roles:
                roles[raw_speaker] = "user" if len(roles) == 0 else "assistant"
            speaker = roles[raw_speaker]
        if merged and merged[-1]["speaker"] == speaker:
            merged[-1]["text"] += " " + text
        else:
            merged.append({"speaker": speaker, "text": text})
    if merged and merged[0]["speaker"] == "assistant":
        merged = merged[1:]
    if merged and merged[-1]["speaker"] == "user":
        merged = merged[:-1]
    return merged


def _require(obj: dict, field_name: str, where: str):
    if field_name not in obj or obj[field_name] in (None, ""):
        raise FormatError(f"{where}: missing field {field_name!r}")
    return obj[field_name]


def _load_generic_jsonl(path: Path) -> list[EvalItem]:
    items = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        where = f"{path.name} line {lineno}"
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{where}: invalid JSON ({exc})") from exc
        conversation = _require(obj, "conversation", where)
        if not isinstance(conversation, list) or not all(isinstance(s, list) for s in conversation):
            raise FormatError(f"{where}: conversation must be a list of sessions")
        sessions = [_normalize_session(s, "speaker", "text") for s in conversation]
        spans = obj.get("evidence_spans")
        items.append(
            EvalItem(
                item_id=str(_require(obj, "item_id", where)),
                conversation=sessions,
                question=str(_require(obj, "question", where)),
                reference_answer=str(_require(obj, "reference_answer", where)),
                evidence_spans=[tuple(s) for s in spans] if spans else None,
                category=obj.get("category"),
            )
        )
    return items


def _load_gvd(path: Path) -> list[EvalItem]:
    data = json.loads(path.read_text(encoding="utf-8"))
    items = []
    for user in _require(data, "users", path.name):
        user_id = _require(user, "user_id", path.name)
        sessions = [
            _normalize_session(_require(s, "turns", f"{path.name} user {user_id}"), "speaker", "text")
            for s in _require(user, "sessions", f"{path.name} user {user_id}")
        ]
        for i, q in enumerate(user.get("questions", [])):
            where = f"{path.name} user {user_id} question {i}"
            items.append(
                EvalItem(
                    item_id=f"{user_id}-q{i:03d}",
                    conversation=sessions,
                    question=str(_require(q, "question", where)),
                    reference_answer=str(_require(q, "answer", where)),
                    category=q.get("category"),
                )
            )
    return items


def _load_locomo(path: Path) -> list[EvalItem]:
    data = json.loads(path.read_text(encoding="utf-8"))
    items = []
    for sample in _require(data, "samples", path.name):
        sample_id = _require(sample, "sample_id", path.name)
        conv = _require(sample, "conversation", f"{path.name} sample {sample_id}")
        session_keys = sorted(
            (k for k in conv if k.startswith("session_")),
            key=lambda k: int(k.split("_", 1)[1]),
        )
        sessions = [_normalize_session(conv[k], "speaker", "text") for k in session_keys]
        for i, qa in enumerate(_require(sample, "qa", f"{path.name} sample {sample_id}")):
            where = f"{path.name} sample {sample_id} qa {i}"
            items.append(
                EvalItem(
                    item_id=f"{sample_id}-q{i:03d}",
                    conversation=sessions,
                    question=str(_require(qa, "question", where)),
                    reference_answer=str(_require(qa, "answer", where)),
                    category=qa.get("category"),
                )
            )
    return items


def _load_longmemeval(path: Path) -> list[EvalItem]:
    data = json.loads(path.read_text(encoding="utf-8"))
    if not isinstance(data, list):
        raise FormatError(f"{path.name}: expected a top-level list of questions")
    items = []
    for i, entry in enumerate(data):
        where = f"{path.name} entry {i}"
        sessions = [
            _normalize_session(session, "role", "content")
            for session in _require(entry, "haystack_sessions", where)
        ]
        items.append(
            EvalItem(
                item_id=str(_require(entry, "question_id", where)),
                conversation=sessions,
                question=str(_require(entry, "question", where)),
                reference_answer=str(_require(entry, "answer", where)),
                category=entry.get("question_type"),
            )
        )
    return items


def load_dataset(path: str | Path, adapter: str) -> list[EvalItem]:
    path = Path(path)
    if not path.exists():
        raise FormatError(f"dataset file not found: {path}")
    if adapter == "generic_jsonl":
        return _load_generic_jsonl(path)
    if adapter == "gvd":
        return _load_gvd(path)
    if adapter == "locomo":
        return _load_locomo(path)
    if adapter == "longmemeval":
        return _load_longmemeval(path)
    raise ValueError(f"unknown adapter {adapter!r}; expected one of {ADAPTERS}")
