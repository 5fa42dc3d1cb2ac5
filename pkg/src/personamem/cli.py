"""Operator CLI: chat REPL, store inspector, server, and eval runner.

Exit codes: 0 ok, 2 validation error, 3 backend unavailable, 4 storage error.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .config import EngineConfig
from .engine import Engine, tick_clock
from .errors import (
    BackendUnavailable,
    FormatError,
    PersonamemError,
    RaggedMatrix,
    StorageCorrupt,
    StorageUnavailable,
)
from .eval import load_dataset, percent_agreement, render_report, run_eval, save_reports
from .gateway import build_gateway

EXIT_VALIDATION = 2
EXIT_BACKEND = 3
EXIT_STORAGE = 4


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _build_config(config_path, storage_root, gateway, pipeline, ablate) -> EngineConfig:
    try:
        cfg = EngineConfig.load(config_path) if config_path else EngineConfig()
        if storage_root:
            cfg.storage_root = storage_root
        if gateway:
            cfg.gateway = gateway
        if pipeline:
            cfg.pipeline_mode = pipeline
        for flag in ablate or ():
            setattr(cfg, f"ablate_{flag}", True)
        EngineConfig.__post_init__(cfg)
        return cfg
    except (ValueError, json.JSONDecodeError, OSError) as exc:
        _fail(EXIT_VALIDATION, f"bad config: {exc}")


def _build_engine(cfg: EngineConfig, fixed_clock: int | None) -> Engine:
    clock = tick_clock(fixed_clock) if fixed_clock is not None else None
    try:
        return Engine(cfg, clock=clock)
    except (StorageUnavailable, OSError) as exc:
        _fail(EXIT_STORAGE, str(exc))


@click.group()
def main() -> None:
    """Personalized long-term conversation engine."""


_shared_options = [
    click.option("--config", "config_path", type=click.Path(exists=True), default=None, help="JSON config file."),
    click.option("--storage-root", default=None, help="State directory (default ./data)."),
    click.option("--gateway", type=click.Choice(["mock", "live"]), default=None),
    click.option(
        "--fixed-clock",
        type=int,
        default=None,
        help="Start ms for a deterministic tick clock (reproducible transcripts).",
    ),
]


def shared_options(fn):
    for opt in reversed(_shared_options):
        fn = opt(fn)
    return fn


@main.command()
@shared_options
@click.option("--user", "user_id", required=True)
@click.option("--show-trace", is_flag=True, default=False)
def chat(config_path, storage_root, gateway, fixed_clock, user_id, show_trace) -> None:
    """Interactive REPL; empty line or /quit exits."""
    cfg = _build_config(config_path, storage_root, gateway, None, None)
    engine = _build_engine(cfg, fixed_clock)
    click.echo(f"personamem chat (user: {user_id}, backend: {engine.gateway.backend_id})")
    while True:
        try:
            line = click.prompt("you", prompt_suffix="> ", default="", show_default=False)
        except (click.Abort, EOFError):
            break
        line = line.strip()
        if not line or line == "/quit":
            break
        try:
            result = engine.run_turn(user_id, line)
        except BackendUnavailable as exc:
            _fail(EXIT_BACKEND, str(exc))
        except (StorageCorrupt, StorageUnavailable) as exc:
            _fail(EXIT_STORAGE, str(exc))
        click.echo(f"bot> {result.reply}")
        if show_trace:
            trace = result.trace
            route = trace.route.route if trace.route else "-"
            tools = ",".join(t.tool for t in trace.tool_calls) or "-"
            click.echo(
                f"trace> id={result.trace_id} route={route} tools=[{tools}] "
                f"validator_rounds={len(trace.verdicts)}"
            )
    click.echo("bye")


@main.command()
@shared_options
@click.option("--user", "user_id", required=True)
@click.option("--probe", default=None, help="Read-only retrieval probe query.")
@click.option("-k", "top_k", type=int, default=10)
def inspect(config_path, storage_root, gateway, fixed_clock, user_id, probe, top_k) -> None:
    """Render memories (optionally probe-ranked), link ids, and the profile."""
    cfg = _build_config(config_path, storage_root, gateway, None, None)
    engine = _build_engine(cfg, fixed_clock)
    try:
        view = engine.inspect_memories(user_id, probe=probe, k=top_k)
    except ValueError as exc:
        _fail(EXIT_VALIDATION, str(exc))
    except StorageCorrupt as exc:
        _fail(EXIT_STORAGE, str(exc))

    if not view["records"]:
        click.echo("no memories")
    else:
        if probe:
            click.echo(f"probe: {probe} (tags: {', '.join(view['tags']) or '-'})")
        for record in view["records"]:
            score = f" score={record['score']:.3f}" if "score" in record else ""
            related = ",".join(str(r) for r in record["related"]) or "-"
            click.echo(f"#{record['memory_id']}{score} [{' '.join(record['tags'])}] related=({related}) {record['text']}")

    profile = engine.get_profile(user_id)
    click.echo("profile:")
    for category, facts in profile.categories.items():
        rendered = "; ".join(f.text for f in facts) or "-"
        click.echo(f"  {category}: {rendered}")


@main.command()
@shared_options
@click.option("--host", default=None, help="Override the configured bind host.")
@click.option("--port", type=int, default=None, help="Override the configured port.")
@click.option("--static-dir", default=None, help="Directory of built UI assets to serve at /ui.")
def serve(config_path, storage_root, gateway, fixed_clock, host, port, static_dir) -> None:
    """Run the HTTP service."""
    import uvicorn

    from .server import create_app

    cfg = _build_config(config_path, storage_root, gateway, None, None)
    engine = _build_engine(cfg, fixed_clock)
    uvicorn.run(
        create_app(engine, static_dir=static_dir),
        host=host or cfg.server_host,
        port=port or cfg.server_port,
        log_level="info",
    )


@main.group(name="eval")
def eval_group() -> None:
    """Evaluation harness."""


@eval_group.command(name="run")
@shared_options
@click.option("--dataset", "dataset_path", required=True, type=click.Path(exists=True))
@click.option("--adapter", required=True, type=click.Choice(["gvd", "locomo", "longmemeval", "generic_jsonl"]))
@click.option("--pipeline", type=click.Choice(["agentic", "rag_baseline"]), default="agentic")
@click.option(
    "--ablate",
    multiple=True,
    type=click.Choice(["coordinator", "self_validator", "user_profile"]),
)
@click.option("--judge", type=click.Choice(["mock", "live"]), default="mock")
@click.option("--out", "out_path", required=True, type=click.Path())
def eval_run(
    config_path, storage_root, gateway, fixed_clock, dataset_path, adapter, pipeline, ablate, judge, out_path
) -> None:
    """Evaluate a dataset against a pipeline configuration."""
    cfg = _build_config(config_path, storage_root, gateway, pipeline, ablate)
    try:
        items = load_dataset(dataset_path, adapter)
    except FormatError as exc:
        _fail(EXIT_VALIDATION, str(exc))

    try:
        pipeline_gateway = build_gateway(cfg)
        judge_cfg = EngineConfig(gateway=judge, live=cfg.live, embedding_dim=cfg.embedding_dim)
        judge_gateway = build_gateway(judge_cfg)
        clock_factory = (lambda: tick_clock(fixed_clock)) if fixed_clock is not None else None
        report = run_eval(
            items,
            cfg,
            pipeline_gateway,
            judge_gateway,
            dataset_id=Path(dataset_path).stem,
            clock_factory=clock_factory,
        )
    except BackendUnavailable as exc:
        _fail(EXIT_BACKEND, str(exc))
    except (StorageCorrupt, StorageUnavailable) as exc:
        _fail(EXIT_STORAGE, str(exc))
    except PersonamemError as exc:
        _fail(EXIT_VALIDATION, str(exc))

    save_reports([report], out_path)
    click.echo(render_report([report]))
    click.echo(f"report written to {out_path} ({report.error_count} item errors)")


@eval_group.command(name="agreement")
@click.option("--labels", "labels_path", required=True, type=click.Path(exists=True))
def eval_agreement(labels_path) -> None:
    """Percent agreement from a JSON file: {"labels": [[rater labels per item]]}."""
    try:
        payload = json.loads(Path(labels_path).read_text(encoding="utf-8"))
        result = percent_agreement(payload["labels"])
    except (json.JSONDecodeError, KeyError, ValueError, RaggedMatrix) as exc:
        _fail(EXIT_VALIDATION, str(exc))
    click.echo(f"all-rater agreement: {result.all_raters:.4f}")
    click.echo(f"pairwise mean agreement: {result.pairwise_mean:.4f}")


if __name__ == "__main__":
    main()
