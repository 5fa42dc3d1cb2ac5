"""Regenerate the golden files under tests/golden/.

Run from the repository root after an intentional behavior change:

    python3 tests/make_goldens.py

Review diffs by hand before committing; goldens are the regression fence for
mock determinism.
"""

from __future__ import annotations

import json
import shutil
import tempfile
from pathlib import Path

from click.testing import CliRunner

from personamem import Engine, EngineConfig, MockGateway, tick_clock
from personamem.cli import main as cli_main
from personamem.profile import init_profile, profile_to_json_bytes

GOLDEN = Path(__file__).parent / "golden"
FIXTURES = Path(__file__).parent / "fixtures"

DAY1_CLOCK = 1_700_000_000_000
DAY2_CLOCK = 1_700_100_000_000


def write_embed_golden() -> None:
    gateway = MockGateway()
    corpus = ["alpine hiking gear", "I have a dog named Rex", "the quick brown fox 42"]
    golden = {}
    for text in corpus:
        values = gateway.embed(text).values
        golden[text] = {str(i): v for i, v in enumerate(values) if v != 0.0}
    (GOLDEN / "mock_embed.json").write_text(
        json.dumps(golden, ensure_ascii=False, indent=2), encoding="utf-8"
    )


def write_profile_golden() -> None:
    (GOLDEN / "init_profile.json").write_bytes(profile_to_json_bytes(init_profile()))


def run_two_session_scenario(root: Path) -> Path:
    """The recall scenario: day-1 fact, day-2 question. Returns the day-2 trace path."""
    config = EngineConfig(storage_root=str(root))
    day1 = Engine(config, clock=tick_clock(DAY1_CLOCK))
    day1.run_turn("u1", "Hello there!")
    day1.run_turn("u1", "I have a dog named Rex")
    day2 = Engine(EngineConfig(storage_root=str(root)), clock=tick_clock(DAY2_CLOCK))
    result = day2.run_turn("u1", "What did I tell you about my dog?")
    return root / "users" / "u1" / "traces" / f"{result.trace_id}.json"


def write_trace_golden() -> None:
    with tempfile.TemporaryDirectory() as tmp:
        trace_path = run_two_session_scenario(Path(tmp) / "data")
        shutil.copyfile(trace_path, GOLDEN / "two_session_trace.json")


REPL_INPUT = "Hello there!\nI have a dog named Rex\nWhat did I tell you about my dog?\n\n"


def run_repl_transcript(root: Path) -> str:
    runner = CliRunner()
    result = runner.invoke(
        cli_main,
        [
            "chat",
            "--user",
            "u1",
            "--storage-root",
            str(root),
            "--fixed-clock",
            str(DAY1_CLOCK),
            "--show-trace",
        ],
        input=REPL_INPUT,
        catch_exceptions=False,
    )
    assert result.exit_code == 0, result.output
    return result.output


def write_repl_golden() -> None:
    with tempfile.TemporaryDirectory() as tmp:
        (GOLDEN / "repl_transcript.txt").write_text(
            run_repl_transcript(Path(tmp) / "data"), encoding="utf-8"
        )


def run_eval_cli(out_path: Path) -> str:
    runner = CliRunner()
    result = runner.invoke(
        cli_main,
        [
            "eval",
            "run",
            "--dataset",
            str(FIXTURES / "planted_10.jsonl"),
            "--adapter",
            "generic_jsonl",
            "--pipeline",
            "agentic",
            "--fixed-clock",
            str(DAY1_CLOCK),
            "--out",
            str(out_path),
        ],
        catch_exceptions=False,
    )
    assert result.exit_code == 0, result.output
    return result.output


def write_eval_golden() -> None:
    with tempfile.TemporaryDirectory() as tmp:
        out = Path(tmp) / "report.json"
        run_eval_cli(out)
        shutil.copyfile(out, GOLDEN / "eval_report.json")


if __name__ == "__main__":
    GOLDEN.mkdir(exist_ok=True)
    write_embed_golden()
    write_profile_golden()
    write_trace_golden()
    write_repl_golden()
    write_eval_golden()
    print("goldens regenerated under", GOLDEN)
