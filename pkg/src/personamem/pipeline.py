"""The four-agent workflow over one user query.

Coordinator routes, Operator plans and executes retrieval tools,
Self-Validator gates evidence quality inside a bounded refinement loop, and
the Response Generator produces the reply styled by the user profile.
Ablation flags remove individual agents; `rag_baseline` mode replaces the
whole workflow with flat similarity retrieval plus web search.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

from .config import EngineConfig
from .errors import SchemaViolation, ToolFailure
from .gateway import TOOLS, AgentRequest, CallRecorder
from .memory import MemoryStore, Turn, render_dialogue
from .profile import UserProfile, apply_delta, propose_delta
from .retrieval import (
    EvidenceBundle,
    ExpandedQuery,
    RetrievalResult,
    expand_query,
    format_evidence,
    retrieve,
)
from .storage import UserState


@dataclass
class RouteDecision:
    route: str  # "direct" | "retrieve"
    reason: str

    def to_dict(self) -> dict:
        return {"route": self.route, "reason": self.reason}


@dataclass
class ToolCall:
    tool: str
    args: dict
    result_digest: str
    duration_ms: int

    def to_dict(self) -> dict:
        return {
            "tool": self.tool,
            "args": self.args,
            "result_digest": self.result_digest,
            "duration_ms": self.duration_ms,
        }


@dataclass
class ValidatorVerdict:
    verdict: str  # "sufficient" | "insufficient"
    missing: list[str]
    round: int

    def to_dict(self) -> dict:
        return {"verdict": self.verdict, "missing": self.missing, "round": self.round}


@dataclass
class AgentTrace:
    trace_id: str
    user_id: str
    query: str
    config_flags: dict
    route: RouteDecision | None = None
    tool_calls: list[ToolCall] = field(default_factory=list)
    verdicts: list[ValidatorVerdict] = field(default_factory=list)
    evidence: dict | None = None
    response: str = ""
    warnings: list[str] = field(default_factory=list)
    gateway_calls: list[dict] = field(default_factory=list)
    timings: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "trace_id": self.trace_id,
            "user_id": self.user_id,
            "query": self.query,
            "config_flags": self.config_flags,
            "route": self.route.to_dict() if self.route else None,
            "tool_calls": [t.to_dict() for t in self.tool_calls],
            "verdicts": [v.to_dict() for v in self.verdicts],
            "evidence": self.evidence,
            "response": self.response,
            "warnings": self.warnings,
            "gateway_calls": self.gateway_calls,
            "timings": self.timings,
        }


# ---------------------------------------------------------------------------
# Web search tool


class CannedWebSearch:
    """Deterministic web tool for offline runs; exact fixtures, stable fallback."""

    def __init__(self, fixtures: dict[str, str] | None = None):
        self.fixtures = dict(fixtures or {})

    def search(self, query: str) -> str:
        if query in self.fixtures:
            return self.fixtures[query]
        return f"web: no fresh results for '{query}'"


class HttpWebSearch:
    """Generic GET-based search API for live mode."""

    def __init__(self, endpoint: str, timeout_s: float = 10.0):
        self.endpoint = endpoint
        self.timeout_s = timeout_s

    def search(self, query: str) -> str:
        import httpx

        try:
            resp = httpx.get(self.endpoint, params={"q": query}, timeout=self.timeout_s)
            resp.raise_for_status()
        except httpx.HTTPError as exc:
            raise ToolFailure(f"web search failed: {exc}") from exc
        return resp.text[:2000]


def _digest16(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


# ---------------------------------------------------------------------------
# Agent operations


def coordinate(query: str, stm_digest: str, gateway, ablate: bool = False) -> RouteDecision:
    """Route the query; ablated or schema-broken coordinators fall back to
    retrieval (the safe default)."""
    if ablate:
        return RouteDecision(route="retrieve", reason="forced: coordinator ablated")
    inputs = {"query": query}
    if stm_digest.strip():
        inputs["stm"] = stm_digest
    try:
        response = gateway.generate(AgentRequest(role="coordinator", inputs=inputs))
    except SchemaViolation as exc:
        return RouteDecision(route="retrieve", reason=f"fail-open: {exc}")
    payload = response.structured
    return RouteDecision(route=payload["route"], reason=payload["reason"])


def operate(
    query: str,
    store: MemoryStore,
    profile: UserProfile | None,
    gateway,
    instructions: list[str],
    config: EngineConfig,
    web=None,
    clock=None,
) -> tuple[EvidenceBundle, list[ToolCall], list[str]]:
    """Ask the operator role for a tool plan, execute it in order, and
    assemble the evidence bundle. Tool failures degrade, never abort."""
    clock = clock or (lambda: 0)
    inputs = {"query": query}
    digest = store.stm_digest(config.stm_digest_turns)
    if digest.strip():
        inputs["stm"] = digest
    if instructions:
        inputs["instructions"] = "\n".join(instructions)
    plan = gateway.generate(AgentRequest(role="operator_select", inputs=inputs)).structured["plan"]
    if config.ablate_user_profile:
        plan = [t for t in plan if t != "profile_read"]
    return _run_tools(plan, query, store, profile, gateway, config, web, clock)


def _run_tools(
    plan: list[str],
    query: str,
    store: MemoryStore,
    profile: UserProfile | None,
    gateway,
    config: EngineConfig,
    web,
    clock,
    query_embedding=None,
) -> tuple[EvidenceBundle, list[ToolCall], list[str]]:
    tool_calls: list[ToolCall] = []
    warnings: list[str] = []
    result = RetrievalResult.empty(config.k_direct, config.k_total)
    summaries: list = []
    stm: list[Turn] = []
    read_profile: UserProfile | None = None
    web_text = ""

    for tool in plan:
        if tool not in TOOLS:
            raise ValueError(f"unknown tool in plan: {tool!r}")
        started = clock()
        args: dict = {"query": query}
        if tool == "ltm_search":
            if query_embedding is not None:
                expanded = ExpandedQuery(
                    raw=query, tags=[], expanded_text=query, embedding=query_embedding
                )
            else:
                expanded = expand_query(query, gateway)
            result = retrieve(
                expanded,
                store,
                k_direct=config.k_direct,
                k_total=config.k_total,
                tag_overlap_bonus=config.tag_overlap_bonus,
            )
            args["tags"] = expanded.tags
            rendered = " ".join(f"{h.memory_id}:{h.score:.3f}" for h in result.hits)
        elif tool == "stm_read":
            stm = list(store.stm)
            rendered = render_dialogue(stm)
        elif tool == "summaries_read":
            summaries = list(store.summaries)
            rendered = " | ".join(s.text for s in summaries)
        elif tool == "profile_read":
            read_profile = profile
            rendered = profile.render() if profile else ""
        else:  # web_search
            try:
                web_text = web.search(query) if web else ""
                rendered = web_text
            except ToolFailure as exc:
                warnings.append(f"web_search failed: {exc}")
                rendered = ""
        tool_calls.append(
            ToolCall(tool=tool, args=args, result_digest=_digest16(rendered), duration_ms=clock() - started)
        )

    bundle = format_evidence(result, store, summaries, stm, read_profile, config)
    if web_text:
        bundle.segments["web"] = web_text[: config.budget_web_chars]
    return bundle, tool_calls, warnings


def validate(
    query: str,
    evidence: EvidenceBundle,
    gateway,
    round: int,
    max_rounds: int = 2,
    ablate: bool = False,
    warnings: list[str] | None = None,
) -> ValidatorVerdict:
    """Judge evidence sufficiency. The final round is always forced
    sufficient so the refinement loop terminates."""
    if ablate:
        return ValidatorVerdict(verdict="sufficient", missing=[], round=round)
    inputs = {"query": query}
    flattened = evidence.flattened()
    if flattened.strip():
        inputs["evidence"] = flattened
    try:
        payload = gateway.generate(AgentRequest(role="validator", inputs=inputs)).structured
    except SchemaViolation as exc:
        if warnings is not None:
            warnings.append(f"validator fail-open: {exc}")
        return ValidatorVerdict(verdict="sufficient", missing=[], round=round)
    verdict = ValidatorVerdict(verdict=payload["verdict"], missing=payload["missing"], round=round)
    if verdict.verdict == "insufficient" and round >= max_rounds:
        if warnings is not None:
            warnings.append(f"refinement bound reached at round {round}; verdict forced sufficient")
        return ValidatorVerdict(verdict="sufficient", missing=[], round=round)
    return verdict


def respond(
    query: str,
    evidence: EvidenceBundle | None,
    profile: UserProfile | None,
    gateway,
    ablate_profile: bool = False,
) -> str:
    inputs = {"query": query}
    if evidence is not None:
        inputs.update(evidence.nonempty_segments())
    if ablate_profile:
        inputs.pop("profile", None)
    elif profile is not None:
        rendered = profile.render()
        if rendered:
            inputs["profile"] = rendered
    response = gateway.generate(AgentRequest(role="responder", inputs=inputs))
    text = response.text.strip()
    if not text:
        raise SchemaViolation("responder produced empty text")
    return text


# ---------------------------------------------------------------------------
# Full turn

BASELINE_PLAN = ("ltm_search", "stm_read", "web_search")


def execute_turn(
    user_id: str,
    query: str,
    state: UserState,
    config: EngineConfig,
    recorder: CallRecorder,
    web,
    clock,
    trace_id: str,
) -> tuple[str, AgentTrace]:
    """Run the pipeline for one query, then the post-exchange jobs (append
    turns, synthesize+insert memory, profile delta, summarize evictions).
    Persistence is the caller's batch."""
    if not query or not query.strip():
        raise ValueError("query empty")
    started = clock()
    store, profile = state.store, state.profile
    trace = AgentTrace(
        trace_id=trace_id,
        user_id=user_id,
        query=query,
        config_flags={"mode": config.pipeline_mode, **{f"ablate_{k}": v for k, v in config.ablation_flags().items()}},
    )

    bundle: EvidenceBundle | None = None
    if config.pipeline_mode == "rag_baseline":
        trace.route = RouteDecision(route="retrieve", reason="rag baseline: fixed retrieval")
        bundle, tool_calls, warnings = _run_tools(
            list(BASELINE_PLAN),
            query,
            store,
            None,
            recorder,
            config,
            web,
            clock,
            query_embedding=recorder.embed(query),
        )
        trace.tool_calls = tool_calls
        trace.warnings.extend(warnings)
        response = respond(query, bundle, None, recorder, ablate_profile=True)
    else:
        route = coordinate(
            query,
            store.stm_digest(config.stm_digest_turns),
            recorder,
            ablate=config.ablate_coordinator,
        )
        trace.route = route
        if route.reason.startswith("fail-open"):
            trace.warnings.append(route.reason)

        if route.route == "direct":
            digest = store.stm_digest(config.stm_digest_turns)
            if digest.strip():
                bundle = EvidenceBundle(segments={"stm": digest})
            response = respond(query, bundle, profile, recorder, ablate_profile=config.ablate_user_profile)
        else:
            instructions: list[str] = []
            for round_no in range(1, config.max_refinement_rounds + 1):
                bundle, tool_calls, warnings = operate(
                    query, store, profile, recorder, instructions, config, web, clock
                )
                trace.tool_calls.extend(tool_calls)
                trace.warnings.extend(warnings)
                verdict = validate(
                    query,
                    bundle,
                    recorder,
                    round_no,
                    max_rounds=config.max_refinement_rounds,
                    ablate=config.ablate_self_validator,
                    warnings=trace.warnings,
                )
                trace.verdicts.append(verdict)
                if verdict.verdict == "sufficient":
                    break
                instructions = verdict.missing
            response = respond(query, bundle, profile, recorder, ablate_profile=config.ablate_user_profile)

    trace.response = response
    if bundle is not None:
        trace.evidence = {"segments": bundle.segments, "ltm_ids": bundle.ltm_ids}

    absorb_exchange(state, query, response, config, recorder, clock)

    trace.gateway_calls = [
        {"role": c.role, "inputs": c.inputs, "params": c.params, "response_text": c.response_text}
        for c in recorder.calls
    ]
    trace.timings = {"total_ms": clock() - started}
    return response, trace


def absorb_exchange(
    state: UserState,
    user_text: str,
    assistant_text: str,
    config: EngineConfig,
    recorder: CallRecorder,
    clock,
) -> None:
    """Post-exchange jobs, in order: append turns, synthesize+insert memory,
    propose/apply profile delta, summarize any evicted turns. Runs after
    every exchange regardless of route; the caller persists the batch."""
    store = state.store
    user_turn = Turn(turn_id=store.last_turn_id + 1, speaker="user", text=user_text, timestamp=clock())
    evicted = store.append_turn(user_turn)
    assistant_turn = Turn(
        turn_id=store.last_turn_id + 1, speaker="assistant", text=assistant_text, timestamp=clock()
    )
    evicted += store.append_turn(assistant_turn)
    exchange = [user_turn, assistant_turn]

    if config.pipeline_mode == "rag_baseline":
        # baseline keeps full history as verbatim records; no summaries/profile
        record = store.new_record(render_dialogue(exchange), ["raw"], assistant_turn.timestamp, recorder)
        store.insert_memory(record)
    else:
        record = store.synthesize_memory(exchange, recorder)
        store.insert_memory(record)
        if not config.ablate_user_profile:
            delta = propose_delta(state.profile, exchange, recorder)
            state.profile = apply_delta(state.profile, delta, now_ms=assistant_turn.timestamp)
        if evicted:
            store.summarize_evicted(evicted, recorder)
