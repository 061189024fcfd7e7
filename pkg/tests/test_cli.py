"""Tests for the ``sops-workbench`` command line."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import pytest

from sops_workbench import cli


def _ensure(condition: bool, message: str) -> None:
    """Raise ``AssertionError`` with ``message`` when ``condition`` is ``False``."""

    if not condition:
        raise AssertionError(message)


def _write_config(tmp_path: Path) -> Path:
    path = tmp_path / "run.ini"
    path.write_text(
        "\n".join(
            [
                "[run]",
                "L = 10",
                "n = 6",
                "q = 2",
                "lambda = 4.0",
                "gamma = 2.0",
                "steps = 1000",
                "sample_interval = 250",
                "seed = 3",
                "[outputs]",
                f"metrics_csv = {tmp_path / 'out' / 'metrics.csv'}",
                f"snapshot_json = {tmp_path / 'out' / 'final.json'}",
            ]
        )
        + "\n",
        encoding="utf-8",
    )
    return path


def test_run_then_verify_and_render(
    tmp_path: Path, capsys: pytest.CaptureFixture[str]
) -> None:
    """A configured run writes artifacts that verify and render."""

    config = _write_config(tmp_path)
    _ensure(cli.main(["run", str(config)]) == cli.EXIT_OK, "run should succeed")
    summary = json.loads(capsys.readouterr().out)
    _ensure(summary["samples"] == 5 and summary["steps"] == 1000, f"{summary}")

    metrics = tmp_path / "out" / "metrics.csv"
    snapshot = tmp_path / "out" / "final.json"
    code = cli.main(["verify", "--metrics", str(metrics), "--snapshot", str(snapshot)])
    _ensure(code == cli.EXIT_OK, "the pair should verify")
    _ensure(json.loads(capsys.readouterr().out)["problems"] == [], "no problems")

    svg = tmp_path / "final.svg"
    code = cli.main(["render", str(snapshot), "-o", str(svg)])
    _ensure(code == cli.EXIT_OK, "render should succeed")
    _ensure(svg.read_text(encoding="utf-8").count("<circle") == 6, "six particles")


def test_set_overrides_change_the_run(
    tmp_path: Path, capsys: pytest.CaptureFixture[str]
) -> None:
    """``--set`` beats the file."""

    config = _write_config(tmp_path)
    code = cli.main(["run", str(config), "--set", "steps=0"])
    _ensure(code == cli.EXIT_OK, "run should succeed")
    _ensure(json.loads(capsys.readouterr().out)["samples"] == 1, "one sample")


def test_invalid_configuration_exits_with_one(
    tmp_path: Path, capsys: pytest.CaptureFixture[str]
) -> None:
    """Validation failures name the field and exit with code 1."""

    config = _write_config(tmp_path)
    code = cli.main(["run", str(config), "--set", "lambda=-2"])
    _ensure(code == cli.EXIT_INVALID, f"unexpected exit code {code}")
    _ensure("lambda" in capsys.readouterr().err, "field is reported")


def test_missing_file_exits_with_two(
    tmp_path: Path, capsys: pytest.CaptureFixture[str]
) -> None:
    """Unreadable inputs are I/O failures."""

    code = cli.main(["render", str(tmp_path / "missing.json")])
    _ensure(code == cli.EXIT_FAILURE, f"unexpected exit code {code}")
    _ensure("error" in capsys.readouterr().err, "the failure is reported")


def test_mismatched_pair_exits_with_three(
    tmp_path: Path, capsys: pytest.CaptureFixture[str]
) -> None:
    """Artifacts from different runs fail verification."""

    config = _write_config(tmp_path)
    cli.main(["run", str(config)])
    first = tmp_path / "first.csv"
    (tmp_path / "out" / "metrics.csv").rename(first)
    cli.main(["run", str(config), "--set", "seed=4"])
    capsys.readouterr()
    snapshot = tmp_path / "out" / "final.json"
    code = cli.main(["verify", "--metrics", str(first), "--snapshot", str(snapshot)])
    _ensure(code == cli.EXIT_CHECK_FAILED, f"unexpected exit code {code}")


def test_verify_theory_reports(capsys: pytest.CaptureFixture[str]) -> None:
    """The theory report lists every check with a pass flag."""

    code = cli.main(["verify", "-q", "2", "--isoperimetric-max", "500"])
    reports = json.loads(capsys.readouterr().out)
    _ensure(code == cli.EXIT_OK, "theory checks should pass")
    _ensure(all(report["pass"] for report in reports), "every check passes")
    names = [report["check_name"] for report in reports]
    _ensure(names[:2] == ["kp_holds_at_threshold", "kp_fails_below_threshold"], "order")


def test_verify_requires_both_artifacts(tmp_path: Path) -> None:
    """``--metrics`` without ``--snapshot`` is invalid input."""

    code = cli.main(["verify", "--metrics", str(tmp_path / "m.csv")])
    _ensure(code == cli.EXIT_INVALID, f"unexpected exit code {code}")


def test_oracle_command(capsys: pytest.CaptureFixture[str]) -> None:
    """The oracle subcommand reports exact and empirical checks."""

    code = cli.main(["oracle", "-L", "3", "-n", "1", "--steps", "0"])
    reports = json.loads(capsys.readouterr().out)
    _ensure(code == cli.EXIT_OK, "oracle checks should pass")
    _ensure(reports[0]["inputs"]["states"] == 18, "eighteen states")


def test_oracle_budget_is_invalid_input() -> None:
    """Oversized oracle requests exit with code 1."""

    code = cli.main(["oracle", "-L", "8", "-n", "6", "-q", "4", "--steps", "0"])
    _ensure(code == cli.EXIT_INVALID, f"unexpected exit code {code}")


def test_unknown_log_level_is_rejected() -> None:
    """Argument errors exit through argparse."""

    with pytest.raises(SystemExit):
        cli.main(["--log-level", "chatty", "verify"])


def test_environment_log_level_is_validated(
    sops_env: Any, capsys: pytest.CaptureFixture[str]
) -> None:
    """A bad ``SOPS_LOG_LEVEL`` is reported like a bad flag."""

    sops_env(SOPS_LOG_LEVEL="chatty")
    with pytest.raises(SystemExit):
        cli.main(["verify", "-q", "2", "--isoperimetric-max", "10"])
    _ensure("unknown log level" in capsys.readouterr().err, "level is named")
