"""Generation/embedding gateway: one seam, two backends.

`MockGateway` is a pure function of the request — every role has a small
deterministic rule so the whole engine is testable offline and transcripts
replay byte-identically. `HttpGateway` speaks a chat-completions-style HTTP
contract with prompts rendered from the on-disk template catalog.
"""

from __future__ import annotations

import hashlib
import json
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from .errors import (
    BackendUnavailable,
    BudgetExceeded,
    DuplicateFixture,
    EmptyInput,
    SchemaViolation,
)
from .profile import PROFILE_CATEGORIES
from .textutil import (
    STOPWORDS,
    content_words,
    coverage,
    first_sentence,
    ranked_content_words,
    tokenize,
)
from .vectors import l2_norm, normalize

ROLES = (
    "coordinator",
    "operator_select",
    "memory_synthesizer",
    "tagger",
    "summarizer",
    "profile_updater",
    "validator",
    "responder",
    "judge",
)

# Roles whose output must carry a machine-readable payload.
STRUCTURED_ROLES = (
    "coordinator",
    "operator_select",
    "tagger",
    "summarizer",
    "profile_updater",
    "validator",
    "judge",
)

TOOLS = ("ltm_search", "stm_read", "summaries_read", "profile_read", "web_search")

ALLOWED_PARAMS = ("max_output_chars", "label_set")

# Routing cues: bare tokens checked against the tokenized query, plus one
# two-word phrase checked as a substring.
PERSONAL_TOKENS = frozenset({"my", "we", "again", "remember"})
PERSONAL_PHRASES = ("last time",)
NEWS_TOKENS = frozenset({"news", "today", "latest", "weather"})

VALIDATOR_COVERAGE_THRESHOLD = 0.6

_FENCED_RE = re.compile(r"```(?:json)?\s*(\{.*?\})\s*```", re.DOTALL)


@dataclass
class AgentRequest:
    """One call to a generation role: named text segments plus scalar params."""

    role: str
    inputs: dict[str, str]
    params: dict = field(default_factory=dict)

    def validate(self) -> None:
        if self.role not in ROLES:
            raise ValueError(f"unknown role: {self.role!r}")
        for name, value in self.inputs.items():
            if not isinstance(name, str) or not name:
                raise ValueError("segment names must be non-empty strings")
            if not isinstance(value, str) or not value.strip():
                raise ValueError(f"segment {name!r} is empty")
        for key in self.params:
            if key not in ALLOWED_PARAMS:
                raise ValueError(f"unknown param: {key!r}")


@dataclass
class AgentResponse:
    text: str
    structured: dict | None
    backend_id: str
    latency_ms: int = 0


@dataclass
class EmbeddingVector:
    values: list[float]
    norm: float

    @classmethod
    def of(cls, raw: list[float]) -> "EmbeddingVector":
        unit = normalize(raw)
        return cls(values=unit, norm=l2_norm(unit))

    def __len__(self) -> int:
        return len(self.values)


def input_digest(inputs: dict[str, str]) -> str:
    """Canonical digest of a request's named segments (order-sensitive)."""
    payload = json.dumps(list(inputs.items()), ensure_ascii=False)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def has_personal_reference(text: str) -> bool:
    lowered = text.lower()
    if any(p in lowered for p in PERSONAL_PHRASES):
        return True
    return any(t in PERSONAL_TOKENS for t in tokenize(text))


# ---------------------------------------------------------------------------
# Structured-output parsing and per-role validation


def parse_structured_text(text: str) -> dict:
    """Extract a JSON object from raw model text (fenced block or braces)."""
    candidates = [text.strip()]
    m = _FENCED_RE.search(text)
    if m:
        candidates.append(m.group(1))
    start, end = text.find("{"), text.rfind("}")
    if start != -1 and end > start:
        candidates.append(text[start : end + 1])
    for cand in candidates:
        try:
            obj = json.loads(cand)
        except (json.JSONDecodeError, ValueError):
            continue
        if isinstance(obj, dict):
            return obj
    raise SchemaViolation("no JSON object found in output")


def _clean_tag_list(raw, limit: int) -> list[str]:
    if not isinstance(raw, list) or not all(isinstance(t, str) for t in raw):
        raise SchemaViolation("expected a list of strings")
    out: list[str] = []
    for tag in raw:
        tag = tag.strip().lower()
        if tag and tag not in out:
            out.append(tag)
    return out[:limit]


def validate_structured(role: str, payload: dict) -> dict:
    """Coerce a parsed payload into the role's schema or raise SchemaViolation."""
    try:
        if role == "coordinator":
            route = payload["route"]
            if route not in ("direct", "retrieve"):
                raise SchemaViolation(f"bad route: {route!r}")
            return {"route": route, "reason": str(payload.get("reason", ""))}

        if role == "operator_select":
            plan = payload["plan"]
            if not isinstance(plan, list):
                raise SchemaViolation("plan must be a list")
            seen: list[str] = []
            for tool in plan:
                if tool not in TOOLS:
                    raise SchemaViolation(f"unknown tool: {tool!r}")
                if tool not in seen:
                    seen.append(tool)
            return {"plan": seen}

        if role == "tagger":
            return {"tags": _clean_tag_list(payload["tags"], limit=8)}

        if role == "summarizer":
            text = payload["text"]
            if not isinstance(text, str) or not text.strip():
                raise SchemaViolation("summary text empty")
            topics = _clean_tag_list(payload["topics"], limit=6)
            return {"text": text.strip(), "topics": topics or ["general"]}

        if role == "profile_updater":
            additions = payload.get("additions", {})
            refinements = payload.get("refinements", [])
            if not isinstance(additions, dict) or not isinstance(refinements, list):
                raise SchemaViolation("bad delta shape")
            clean_adds: dict[str, list[str]] = {}
            for cat, facts in additions.items():
                if cat not in PROFILE_CATEGORIES:
                    raise SchemaViolation(f"unknown category: {cat!r}")
                if not isinstance(facts, list) or not all(isinstance(f, str) for f in facts):
                    raise SchemaViolation("facts must be strings")
                texts = [f.strip()[:160] for f in facts if f.strip()]
                if texts:
                    clean_adds[cat] = texts
            clean_refs: list[tuple[str, str, str]] = []
            for ref in refinements:
                if not isinstance(ref, (list, tuple)) or len(ref) != 3:
                    raise SchemaViolation("refinement must be [category, old, new]")
                cat, old, new = ref
                if cat not in PROFILE_CATEGORIES:
                    raise SchemaViolation(f"unknown category: {cat!r}")
                if not (isinstance(old, str) and old.strip() and isinstance(new, str) and new.strip()):
                    raise SchemaViolation("refinement texts must be non-empty")
                clean_refs.append((cat, old.strip(), new.strip()[:160]))
            return {"additions": clean_adds, "refinements": clean_refs}

        if role == "validator":
            verdict = payload["verdict"]
            if verdict not in ("sufficient", "insufficient"):
                raise SchemaViolation(f"bad verdict: {verdict!r}")
            missing = payload.get("missing", [])
            if not isinstance(missing, list) or not all(isinstance(m, str) for m in missing):
                raise SchemaViolation("missing must be a list of strings")
            missing = [m.strip() for m in missing if m.strip()]
            if verdict == "sufficient":
                missing = []
            elif not missing:
                raise SchemaViolation("insufficient verdict requires instructions")
            return {"verdict": verdict, "missing": missing}

        if role == "judge":
            def _label(key: str, allowed: tuple[float, ...]) -> float:
                value = payload[key]
                if isinstance(value, bool) or not isinstance(value, (int, float)):
                    raise SchemaViolation(f"{key} must be numeric")
                value = float(value)
                if value not in allowed:
                    raise SchemaViolation(f"{key}={value} outside {allowed}")
                return value

            return {
                "retrieval_accuracy": _label("retrieval_accuracy", (0.0, 1.0)),
                "response_correctness": _label("response_correctness", (0.0, 0.5, 1.0)),
                "contextual_coherence": _label("contextual_coherence", (0.0, 0.5, 1.0)),
            }
    except SchemaViolation:
        raise
    except (KeyError, TypeError) as exc:
        raise SchemaViolation(f"{role} payload missing/invalid field: {exc}") from exc
    raise ValueError(f"role {role!r} has no structured schema")


# ---------------------------------------------------------------------------
# Mock backend


def mock_embed_values(text: str, dim: int) -> list[float]:
    """Hashed bag-of-words: stable md5 bucket per token, count, L2-normalize."""
    tokens = tokenize(text)
    if not tokens:
        raise EmptyInput(f"no tokenizable content in {text!r}")
    counts = [0.0] * dim
    for token in tokens:
        bucket = int.from_bytes(hashlib.md5(token.encode("utf-8")).digest()[:8], "big") % dim
        counts[bucket] += 1.0
    return normalize(counts)


def _user_lines(dialogue: str) -> list[str]:
    out = []
    for line in dialogue.splitlines():
        if line.startswith("user: "):
            out.append(line[len("user: ") :].strip())
    return out


_NAME_RE = re.compile(r"\b(?:my name is|call me)\s+([a-z][a-z'-]*)")
_LOVE_RE = re.compile(r"\bi love\s+([^,.!?]+?)(?=\s+(?:and|but)\b|[,.!?]|$)")
_PREFER_RE = re.compile(r"\bi prefer\s+([^,.!?]+?)(?=\s+(?:and|but)\b|[,.!?]|$)")


def _mock_rule(role: str, inputs: dict[str, str], params: dict) -> str:
    """Built-in deterministic per-role behavior. Returns raw response text."""
    if role == "tagger":
        text = " ".join(inputs.values())
        return json.dumps({"tags": ranked_content_words(text, limit=8)})

    if role == "coordinator":
        query = inputs.get("query", "")
        if has_personal_reference(query):
            decision, reason = "retrieve", "personal reference in query"
        elif "stm" in inputs:
            decision, reason = "retrieve", "ongoing conversational context"
        else:
            decision, reason = "direct", "no memory cues"
        return json.dumps({"route": decision, "reason": reason})

    if role == "operator_select":
        query = inputs.get("query", "")
        plan = []
        if has_personal_reference(query) or "instructions" in inputs:
            plan.append("ltm_search")
        plan.append("stm_read")
        if any(t in NEWS_TOKENS for t in tokenize(query)):
            plan.append("web_search")
        return json.dumps({"plan": plan})

    if role == "memory_synthesizer":
        limit = int(params.get("max_output_chars", 400))
        text = "; ".join(_user_lines(inputs.get("dialogue", ""))).strip()
        return (text or inputs.get("dialogue", "").strip())[:limit]

    if role == "summarizer":
        users = _user_lines(inputs.get("dialogue", ""))
        text = "; ".join(first_sentence(u) for u in users) or "empty exchange"
        topics = ranked_content_words(" ".join(users), limit=6) or ["general"]
        return json.dumps({"text": text, "topics": topics})

    if role == "profile_updater":
        additions: dict[str, list[str]] = {}

        def _add(cat: str, fact: str) -> None:
            bucket = additions.setdefault(cat, [])
            if fact not in bucket:
                bucket.append(fact)

        for line in _user_lines(inputs.get("exchange", "")):
            lowered = line.lower()
            m = _NAME_RE.search(lowered)
            if m:
                _add("demographics", f"Name: {m.group(1).capitalize()}")
            m = _LOVE_RE.search(lowered)
            if m:
                _add("interests", m.group(1).strip())
            m = _PREFER_RE.search(lowered)
            if m:
                _add("preferences", m.group(1).strip())
        return json.dumps({"additions": additions, "refinements": []})

    if role == "validator":
        query = inputs.get("query", "")
        evidence = inputs.get("evidence", "")
        needles = content_words(query)
        if coverage(needles, evidence) >= VALIDATOR_COVERAGE_THRESHOLD:
            return json.dumps({"verdict": "sufficient", "missing": []})
        instruction = "search long-term memory for " + " ".join(needles or ["context"])
        return json.dumps({"verdict": "insufficient", "missing": [instruction]})

    if role == "responder":
        query = inputs.get("query", "")
        names = [k for k in inputs if k != "query"]
        text = f"Based on {', '.join(names) or 'nothing'}: {query}"
        if "ltm" in inputs:
            text += f" | memory: {inputs['ltm'][:160]}"
        return text

    if role == "judge":
        reference = content_words(inputs.get("reference", ""))
        evidence = inputs.get("evidence", "")
        response = inputs.get("response", "")
        ra = 1.0 if evidence and coverage(reference, evidence) >= 0.5 else 0.0
        rc_cov = coverage(reference, response) if response else 0.0
        rc = 1.0 if rc_cov >= 0.8 else 0.5 if rc_cov >= 0.4 else 0.0
        n_tokens = len(tokenize(response))
        cc = 1.0 if n_tokens >= 3 else 0.5 if n_tokens >= 1 else 0.0
        return json.dumps(
            {
                "retrieval_accuracy": ra,
                "response_correctness": rc,
                "contextual_coherence": cc,
            }
        )

    raise ValueError(f"no mock rule for role {role!r}")


class MockGateway:
    """Deterministic offline backend.

    Response resolution order: exact fixture (role + input digest), then a
    per-role rule override supplied at construction, then the built-in rule.
    Instances are immutable after test setup; `register_fixture` is the only
    mutation and is lock-guarded.
    """

    backend_id = "mock"

    def __init__(self, dim: int = 256, rule_overrides: dict | None = None):
        self.dim = dim
        self._overrides = dict(rule_overrides or {})
        self._fixtures: dict[tuple[str, str], str] = {}
        self._fixture_lock = threading.Lock()

    def register_fixture(self, role: str, match_key: str, response_text: str) -> None:
        if role not in ROLES:
            raise ValueError(f"unknown role: {role!r}")
        with self._fixture_lock:
            key = (role, match_key)
            if key in self._fixtures:
                raise DuplicateFixture(f"fixture already registered for {key}")
            self._fixtures[key] = response_text

    def _raw_text(self, request: AgentRequest) -> str:
        fixture = self._fixtures.get((request.role, input_digest(request.inputs)))
        if fixture is not None:
            return fixture
        override = self._overrides.get(request.role)
        if override is not None:
            return override(request.inputs, request.params)
        return _mock_rule(request.role, request.inputs, request.params)

    def generate(self, request: AgentRequest) -> AgentResponse:
        request.validate()
        text = self._raw_text(request)
        structured = None
        if request.role in STRUCTURED_ROLES:
            try:
                structured = validate_structured(request.role, parse_structured_text(text))
            except SchemaViolation:
                # One reprompt; the mock is pure, so a second attempt only
                # succeeds when a fixture was meant to test the retry path.
                text = self._raw_text(request)
                structured = validate_structured(request.role, parse_structured_text(text))
        return AgentResponse(text=text, structured=structured, backend_id=self.backend_id)

    def embed(self, text: str) -> EmbeddingVector:
        if not text or not text.strip():
            raise EmptyInput("text to embed is empty")
        values = mock_embed_values(text, self.dim)
        return EmbeddingVector(values=values, norm=l2_norm(values))


# ---------------------------------------------------------------------------
# Live backend

_PROMPTS_DIR = Path(__file__).parent / "prompts"
_REPROMPT = "\n\nYour previous output was not valid JSON. Return ONLY a valid JSON object matching the requested schema."


class HttpGateway:
    """Chat-completions-style HTTP backend with an on-disk prompt catalog."""

    def __init__(self, live_config, prompts_dir: str | Path | None = None, transport=None):
        import httpx

        self.config = live_config
        self.backend_id = f"http:{live_config.model}"
        self.prompts_dir = Path(prompts_dir) if prompts_dir else _PROMPTS_DIR
        self._client = httpx.Client(
            base_url=live_config.base_url,
            headers={"Authorization": f"Bearer {live_config.api_key}"},
            timeout=live_config.timeout_ms / 1000.0,
            transport=transport,
        )

    def render_prompt(self, request: AgentRequest) -> str:
        template_path = self.prompts_dir / f"{request.role}.txt"
        template = template_path.read_text(encoding="utf-8")
        rendered = template
        for name, value in request.inputs.items():
            rendered = rendered.replace("{{" + name + "}}", value)
        rendered = re.sub(r"\{\{[a-z_]+\}\}", "", rendered)
        return rendered

    def _complete(self, prompt: str) -> tuple[str, int]:
        import httpx

        started = time.monotonic()
        try:
            resp = self._client.post(
                "/chat/completions",
                json={
                    "model": self.config.model,
                    "messages": [{"role": "user", "content": prompt}],
                    "temperature": 0,
                },
            )
            resp.raise_for_status()
            body = resp.json()
            text = body["choices"][0]["message"]["content"]
        except (httpx.HTTPError, KeyError, IndexError, ValueError) as exc:
            raise BackendUnavailable(str(exc)) from exc
        return text, int((time.monotonic() - started) * 1000)

    def generate(self, request: AgentRequest) -> AgentResponse:
        request.validate()
        prompt = self.render_prompt(request)
        text, latency = self._complete(prompt)
        structured = None
        if request.role in STRUCTURED_ROLES:
            try:
                structured = validate_structured(request.role, parse_structured_text(text))
            except SchemaViolation:
                text, extra = self._complete(prompt + _REPROMPT)
                latency += extra
                structured = validate_structured(request.role, parse_structured_text(text))
        return AgentResponse(text=text, structured=structured, backend_id=self.backend_id, latency_ms=latency)

    def embed(self, text: str) -> EmbeddingVector:
        import httpx

        if not text or not text.strip():
            raise EmptyInput("text to embed is empty")
        try:
            resp = self._client.post(
                "/embeddings",
                json={"model": self.config.embedding_model, "input": [text]},
            )
            resp.raise_for_status()
            values = resp.json()["data"][0]["embedding"]
        except (httpx.HTTPError, KeyError, IndexError, ValueError) as exc:
            raise BackendUnavailable(str(exc)) from exc
        return EmbeddingVector.of([float(v) for v in values])


# ---------------------------------------------------------------------------
# Per-turn call accounting


@dataclass
class GatewayCall:
    role: str
    inputs: dict[str, str]
    params: dict
    response_text: str


class CallRecorder:
    """Wraps a gateway for one turn: records every generate call and enforces
    the per-turn budget. The underlying gateway stays shared and immutable."""

    def __init__(self, gateway, budget: int):
        self._gateway = gateway
        self._budget = budget
        self.calls: list[GatewayCall] = []
        self.embed_count = 0

    @property
    def backend_id(self) -> str:
        return self._gateway.backend_id

    def generate(self, request: AgentRequest) -> AgentResponse:
        if len(self.calls) >= self._budget:
            raise BudgetExceeded(f"per-turn budget of {self._budget} generate calls hit")
        response = self._gateway.generate(request)
        self.calls.append(
            GatewayCall(
                role=request.role,
                inputs=dict(request.inputs),
                params=dict(request.params),
                response_text=response.text,
            )
        )
        return response

    def embed(self, text: str) -> EmbeddingVector:
        self.embed_count += 1
        return self._gateway.embed(text)

    def count(self, role: str) -> int:
        return sum(1 for call in self.calls if call.role == role)


def build_gateway(config):
    """Gateway factory from an EngineConfig."""
    if config.gateway == "mock":
        return MockGateway(dim=config.embedding_dim)
    if config.gateway == "live":
        return HttpGateway(config.live)
    raise ValueError(f"unknown gateway mode: {config.gateway!r}")
