"""Fact-checking evaluation runs: ingest each item's conversation through the
normal memory path, ask the question through the full pipeline, judge the
result, and aggregate per-metric percentages."""

from __future__ import annotations

import json
import re
import tempfile
from dataclasses import dataclass, field, replace
from pathlib import Path

from ..config import EngineConfig
from ..engine import Engine
from ..errors import PersonamemError
from ..gateway import AgentRequest
from .datasets import EvalItem
from .metrics import rouge1_f, token_sim_f

JUDGE_METRICS = ("retrieval_accuracy", "response_correctness", "contextual_coherence")
ALL_METRICS = JUDGE_METRICS + ("rouge1_f", "token_sim_f")


@dataclass
class ItemRow:
    item_id: str
    labels: dict
    rouge1_f: float
    token_sim_f: float
    response: str
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "item_id": self.item_id,
            "labels": self.labels,
            "rouge1_f": self.rouge1_f,
            "token_sim_f": self.token_sim_f,
            "response": self.response,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ItemRow":
        return cls(**data)


@dataclass
class MetricReport:
    dataset_id: str
    config_descriptor: dict
    rows: list[ItemRow] = field(default_factory=list)
    aggregates: dict = field(default_factory=dict)
    error_count: int = 0

    def to_dict(self) -> dict:
        return {
            "dataset_id": self.dataset_id,
            "config_descriptor": self.config_descriptor,
            "rows": [r.to_dict() for r in self.rows],
            "aggregates": self.aggregates,
            "error_count": self.error_count,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MetricReport":
        return cls(
            dataset_id=data["dataset_id"],
            config_descriptor=data["config_descriptor"],
            rows=[ItemRow.from_dict(r) for r in data["rows"]],
            aggregates=data["aggregates"],
            error_count=data["error_count"],
        )

    def config_label(self) -> str:
        mode = self.config_descriptor.get("pipeline", "agentic")
        ablated = [k for k, v in self.config_descriptor.get("ablations", {}).items() if v]
        if ablated:
            return f"{mode} w/o {', '.join(ablated)}"
        return mode


def _aggregate(rows: list[ItemRow]) -> dict:
    clean = [r for r in rows if r.error is None]
    aggregates = {}
    for metric in JUDGE_METRICS:
        values = [r.labels[metric] for r in clean]
        aggregates[metric] = 100.0 * sum(values) / len(values) if values else 0.0
    for metric in ("rouge1_f", "token_sim_f"):
        values = [getattr(r, metric) for r in clean]
        aggregates[metric] = 100.0 * sum(values) / len(values) if values else 0.0
    return aggregates


def _safe_user_id(item_id: str) -> str:
    cleaned = re.sub(r"[^a-z0-9_-]", "-", item_id.lower())[:56]
    return f"eval-{cleaned}" if cleaned else "eval-item"


def run_eval(
    items: list[EvalItem],
    pipeline_config: EngineConfig,
    gateway,
    judge_gateway,
    dataset_id: str = "dataset",
    web=None,
    clock_factory=None,
    storage_root: str | Path | None = None,
) -> MetricReport:
    """Evaluate every item with an isolated per-item user store.

    Per-item failures become error rows (excluded from aggregates, counted),
    never silent drops.
    """
    descriptor = {
        "pipeline": pipeline_config.pipeline_mode,
        "ablations": pipeline_config.ablation_flags(),
        "backend": getattr(gateway, "backend_id", "unknown"),
        "judge_backend": getattr(judge_gateway, "backend_id", "unknown"),
    }
    report = MetricReport(dataset_id=dataset_id, config_descriptor=descriptor)

    workdir_ctx = None
    if storage_root is None:
        workdir_ctx = tempfile.TemporaryDirectory(prefix="personamem-eval-")
        storage_root = workdir_ctx.name
    try:
        for item in sorted(items, key=lambda i: i.item_id):
            row = _eval_item(item, pipeline_config, gateway, judge_gateway, Path(storage_root), web, clock_factory)
            report.rows.append(row)
    finally:
        if workdir_ctx is not None:
            workdir_ctx.cleanup()

    report.aggregates = _aggregate(report.rows)
    report.error_count = sum(1 for r in report.rows if r.error is not None)
    return report


def _eval_item(
    item: EvalItem,
    pipeline_config: EngineConfig,
    gateway,
    judge_gateway,
    storage_root: Path,
    web,
    clock_factory,
) -> ItemRow:
    try:
        config = replace(pipeline_config, storage_root=str(storage_root / item.item_id))
        clock = clock_factory() if clock_factory else None
        engine = Engine(config, gateway=gateway, web=web, clock=clock)
        user_id = _safe_user_id(item.item_id)

        for session in item.exchanges():
            for user_text, assistant_text in session:
                engine.ingest_exchange(user_id, user_text, assistant_text)

        result = engine.run_turn(user_id, item.question)
        if result.error is not None:
            raise PersonamemError(f"turn failed: {result.reply}")

        evidence_text = ""
        if result.trace.evidence:
            segments = result.trace.evidence.get("segments", {})
            evidence_text = "\n".join(f"[{k}]\n{v}" for k, v in segments.items() if v.strip())

        judge_inputs = {
            "question": item.question,
            "reference": item.reference_answer,
            "response": result.reply,
        }
        if evidence_text.strip():
            judge_inputs["evidence"] = evidence_text
        labels = judge_gateway.generate(
            AgentRequest(role="judge", inputs=judge_inputs, params={"label_set": "default"})
        ).structured

        return ItemRow(
            item_id=item.item_id,
            labels=labels,
            rouge1_f=rouge1_f(result.reply, item.reference_answer),
            token_sim_f=token_sim_f(result.reply, item.reference_answer, gateway.embed),
            response=result.reply,
        )
    except PersonamemError as exc:
        return ItemRow(
            item_id=item.item_id,
            labels={},
            rouge1_f=0.0,
            token_sim_f=0.0,
            response="",
            error=f"{type(exc).__name__}: {exc}",
        )


# ---------------------------------------------------------------------------
# Rendering


def render_report(reports: list[MetricReport]) -> str:
    """Plain-text table: one row per configuration, five metric columns,
    best value per column flagged with '*'."""
    headers = ["configuration"] + list(ALL_METRICS)
    table_rows = []
    best = {m: max(r.aggregates.get(m, 0.0) for r in reports) for m in ALL_METRICS}
    for r in reports:
        cells = [r.config_label()]
        for metric in ALL_METRICS:
            value = r.aggregates.get(metric, 0.0)
            flag = "*" if value == best[metric] else ""
            cells.append(f"{value:.1f}{flag}")
        table_rows.append(cells)

    widths = [max(len(row[i]) for row in [headers] + table_rows) for i in range(len(headers))]
    lines = [
        "  ".join(h.ljust(widths[i]) for i, h in enumerate(headers)),
        "  ".join("-" * w for w in widths),
    ]
    for row in table_rows:
        lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)))
    return "\n".join(lines)


def save_reports(reports: list[MetricReport], path: str | Path) -> None:
    payload = {"reports": [r.to_dict() for r in reports]}
    Path(path).write_text(json.dumps(payload, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")


def load_reports(path: str | Path) -> list[MetricReport]:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    return [MetricReport.from_dict(r) for r in payload["reports"]]
