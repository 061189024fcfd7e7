"""Command line entry point for the sops-workbench package.

Exit codes: ``0`` on success, ``1`` for invalid configuration or inputs,
``2`` for I/O and unexpected failures, ``3`` when a verification check fails.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections.abc import Callable, Sequence
from pathlib import Path

from . import __version__
from .config import ConfigError, load_run_config, load_sweep_config, log_level
from .configuration import ConfigurationError, Model, Setting, read_snapshot
from .harness import (
    CheckReport,
    oracle_checks,
    run_experiment,
    sweep,
    theory_checks,
    verify_pair,
)
from .polymers import EnumerationBudgetError
from .render import render_svg
from .theory import DomainError

LOGGER = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_FAILURE = 2
EXIT_CHECK_FAILED = 3

_INVALID_INPUT = (ConfigError, ConfigurationError, DomainError, EnumerationBudgetError)


def _emit(payload: object) -> None:
    print(json.dumps(payload, indent=2, sort_keys=True))


def _emit_reports(reports: Sequence[CheckReport]) -> int:
    _emit([report.as_dict() for report in reports])
    failed = [report.check_name for report in reports if not report.passed]
    if failed:
        LOGGER.error("failed checks: %s", ", ".join(failed))
        return EXIT_CHECK_FAILED
    return EXIT_OK


def _command_run(args: argparse.Namespace) -> int:
    config = load_run_config(args.config, overrides=args.overrides)
    outcome = run_experiment(config)
    _emit(
        {
            "config_hash": config.hash,
            "steps": outcome.result.steps,
            "acceptance_rate": outcome.result.acceptance_rate,
            "samples": len(outcome.rows),
            "votes": outcome.votes,
        }
    )
    return EXIT_OK


def _command_sweep(args: argparse.Namespace) -> int:
    config = load_sweep_config(args.config, overrides=args.overrides)
    results, summaries = sweep(config)
    _emit(
        {
            "replicas": len(results),
            "failures": sum(result.failed for result in results),
            "cells": [
                dict(zip(("lambda", "gamma", "replicas", "failures"), row[:4]))
                for row in (summary.as_csv() for summary in summaries)
            ],
        }
    )
    return EXIT_OK


def _command_oracle(args: argparse.Namespace) -> int:
    reports = oracle_checks(
        Setting(args.setting),
        Model(args.model),
        args.side,
        args.n,
        args.q,
        args.lam,
        args.gamma,
        steps=args.steps,
        seed=args.seed,
        tolerance=args.tolerance,
    )
    return _emit_reports(reports)


def _command_verify(args: argparse.Namespace) -> int:
    if args.metrics is not None or args.snapshot is not None:
        if args.metrics is None or args.snapshot is None:
            raise ConfigError("verify", "--metrics and --snapshot go together")
        problems = verify_pair(args.metrics, args.snapshot)
        _emit({"metrics": str(args.metrics), "problems": problems})
        return EXIT_CHECK_FAILED if problems else EXIT_OK
    reports = theory_checks(
        args.q,
        enumerate_up_to=args.max_m,
        isoperimetric_up_to=args.isoperimetric_max,
    )
    return _emit_reports(reports)


def _command_render(args: argparse.Namespace) -> int:
    snapshot = read_snapshot(args.snapshot)
    svg = render_svg(snapshot, scale=args.scale)
    if args.output is None:
        sys.stdout.write(svg)
    else:
        args.output.parent.mkdir(parents=True, exist_ok=True)
        args.output.write_text(svg, encoding="utf-8", newline="\n")
        print(f"Rendered {snapshot.configuration.n} particles to {args.output}")
    return EXIT_OK


def _add_config_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("config", type=Path, nargs="?", help="INI configuration")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="Override one configuration value (repeatable).",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sops-workbench",
        description="Simulate and analyse self-organizing particle systems.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument(
        "--log-level",
        default=None,
        help="Logging level; defaults to SOPS_LOG_LEVEL or WARNING.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    run_parser = commands.add_parser("run", help="Execute one configured run.")
    _add_config_arguments(run_parser)
    run_parser.set_defaults(handler=_command_run)

    sweep_parser = commands.add_parser("sweep", help="Run a replica grid.")
    _add_config_arguments(sweep_parser)
    sweep_parser.set_defaults(handler=_command_sweep)

    oracle_parser = commands.add_parser(
        "oracle", help="Compare a tiny chain with its exact stationary law."
    )
    oracle_parser.add_argument(
        "--setting", choices=[s.value for s in Setting], default="general"
    )
    oracle_parser.add_argument(
        "--model", choices=[m.value for m in Model], default="potts"
    )
    oracle_parser.add_argument("-L", dest="side", type=int, default=3)
    oracle_parser.add_argument("-n", type=int, default=2)
    oracle_parser.add_argument("-q", type=int, default=2)
    oracle_parser.add_argument("--lambda", dest="lam", type=float, default=2.0)
    oracle_parser.add_argument("--gamma", type=float, default=1.0)
    oracle_parser.add_argument("--steps", type=int, default=200_000)
    oracle_parser.add_argument("--seed", type=int, default=0)
    oracle_parser.add_argument("--tolerance", type=float, default=0.02)
    oracle_parser.set_defaults(handler=_command_oracle)

    verify_parser = commands.add_parser(
        "verify", help="Check theory constants or a metrics/snapshot pair."
    )
    verify_parser.add_argument("--metrics", type=Path)
    verify_parser.add_argument("--snapshot", type=Path)
    verify_parser.add_argument(
        "-q", type=int, nargs="+", default=[2, 3, 4, 5], help="Orientation counts."
    )
    verify_parser.add_argument(
        "--max-m",
        type=int,
        default=0,
        help="Enumerate polymer counts up to this size (0 skips enumeration).",
    )
    verify_parser.add_argument("--isoperimetric-max", type=int, default=10**6)
    verify_parser.set_defaults(handler=_command_verify)

    render_parser = commands.add_parser("render", help="Render a snapshot as SVG.")
    render_parser.add_argument("snapshot", type=Path)
    render_parser.add_argument("-o", "--output", type=Path)
    render_parser.add_argument("--scale", type=float, default=20.0)
    render_parser.set_defaults(handler=_command_render)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    """Entry point for the ``sops-workbench`` console script."""

    parser = build_parser()
    args = parser.parse_args(argv)
    level = (args.log_level or log_level()).upper()
    if not isinstance(logging.getLevelName(level), int):
        parser.error(f"unknown log level {args.log_level!r}")
        return EXIT_INVALID  # pragma: no cover - parser.error exits
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")

    handler: Callable[[argparse.Namespace], int] = args.handler
    try:
        return handler(args)
    except _INVALID_INPUT as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except Exception:
        LOGGER.exception("%s failed", args.command)
        return EXIT_FAILURE


if __name__ == "__main__":  # pragma: no cover - CLI entry point
    sys.exit(main())
