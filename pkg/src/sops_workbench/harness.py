"""Experiment orchestration: single runs, replica sweeps and artifact checks.

A run streams one metrics row per sample point to CSV, writes the final
snapshot and optionally an SVG.  Every artifact carries the configuration
hash so :func:`verify_pair` can reject a metrics file and snapshot that do
not belong together.  Classifier verdicts use the final tenth of the samples
and a majority vote, an empirical stand-in for stationarity.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from collections.abc import Callable, Iterable, Iterator, Sequence
from concurrent.futures import ProcessPoolExecutor
from contextlib import ExitStack
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import IO, Any

from . import __version__, oracle, theory
from .config import Initial, RunConfig, SweepConfig
from .configuration import (
    Configuration,
    Model,
    Setting,
    boundary_stats,
    read_snapshot,
    to_snapshot,
    write_snapshot,
)
from .dynamics import (
    RNG_IDENTITY,
    RunResult,
    make_rng,
    replica_seeds,
    run,
    sample_steps,
)
from .lattice import get_geometry
from .observables import (
    aggregation_region,
    alignment_report,
    is_aggregated_aligned,
    is_aligned,
    is_alpha_compressed,
    is_beta_expanded,
    is_eps_nonaligned,
    p_min_exact,
)
from .polymers import MAX_ENUMERATED_SIZE, enumerate_polymers
from .render import render_svg

__all__ = [
    "CLASSIFIER_COLUMNS",
    "METRIC_COLUMNS",
    "WINDOW_FRACTION",
    "CellSummary",
    "CheckReport",
    "MetricsRow",
    "ReplicaResult",
    "RunOutcome",
    "aggregate",
    "initial_configuration",
    "measure",
    "oracle_checks",
    "read_metrics",
    "run_metadata",
    "run_experiment",
    "sweep",
    "theory_checks",
    "verify_pair",
    "window_size",
    "window_votes",
    "write_summary",
]

LOGGER = logging.getLogger(__name__)

METRIC_COLUMNS = (
    "step",
    "n",
    "a",
    "h",
    "d_sum",
    "perimeter",
    "rho_p",
    "dominant",
    "aligned(delta)",
    "nonaligned(eps)",
    "compressed(alpha)",
    "expanded(beta)",
    "aggregated(alpha,delta)",
    "bridge_I_len",
    "bridge_B_len",
)
CLASSIFIER_COLUMNS = (
    "aligned(delta)",
    "nonaligned(eps)",
    "compressed(alpha)",
    "expanded(beta)",
    "aggregated(alpha,delta)",
)
WINDOW_FRACTION = 0.1
METADATA_PREFIX = "# metadata: "
WINDOW_LABEL = "final 10% of samples, majority vote"


@dataclass(frozen=True)
class MetricsRow:
    """One sampled row; ``None`` marks a metric that does not apply."""

    step: int
    n: int
    a: int
    h: int
    d_sum: float | None
    perimeter: int | None
    rho_p: float
    dominant: int
    aligned: bool
    nonaligned: bool
    compressed: bool | None
    expanded: bool | None
    aggregated: bool | None
    bridge_i_len: int | None
    bridge_b_len: int | None

    def classifiers(self) -> dict[str, bool | None]:
        return dict(
            zip(
                CLASSIFIER_COLUMNS,
                (
                    self.aligned,
                    self.nonaligned,
                    self.compressed,
                    self.expanded,
                    self.aggregated,
                ),
            )
        )

    def as_csv(self) -> list[str]:
        return [_cell(value) for value in asdict(self).values()]


def _cell(value: object) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def measure(
    sigma: Configuration,
    step: int,
    config: RunConfig,
    *,
    with_aggregation: bool = True,
) -> MetricsRow:
    """Compute every metric column for ``sigma`` under the run's thresholds.

    The aggregation and bridge columns need a full bridge construction; with
    ``with_aggregation=False`` they are left empty.
    """

    connected = sigma.setting is Setting.CONNECTED
    stats = boundary_stats(sigma, with_perimeter=connected)
    report = alignment_report(sigma)
    thresholds = config.classifiers
    aggregated: bool | None = None
    bridge_i: int | None = None
    bridge_b: int | None = None
    if not connected and with_aggregation:
        region = aggregation_region(sigma, thresholds.delta)
        aggregated = is_aggregated_aligned(region, thresholds.alpha, thresholds.delta)
        bridge_i = region.bridges.n_contour_edges
        bridge_b = region.bridges.n_bridges
    return MetricsRow(
        step=step,
        n=sigma.n,
        a=stats.a,
        h=stats.h,
        d_sum=stats.d_sum if config.model is Model.CLOCK else None,
        perimeter=stats.p,
        rho_p=report.rho_p,
        dominant=report.dominant,
        aligned=is_aligned(sigma, thresholds.delta),
        nonaligned=is_eps_nonaligned(sigma, thresholds.eps),
        compressed=is_alpha_compressed(sigma, thresholds.alpha) if connected else None,
        expanded=is_beta_expanded(sigma, thresholds.beta) if connected else None,
        aggregated=aggregated,
        bridge_i_len=bridge_i,
        bridge_b_len=bridge_b,
    )


def initial_configuration(config: RunConfig) -> Configuration:
    """Starting configuration; random choices use a stream spawned from the seed."""

    g = get_geometry(config.side)
    rng = make_rng(replica_seeds(config.seed, 1)[0])
    if config.initial is Initial.SNAPSHOT:
        if config.snapshot is None:
            raise ValueError("initial = snapshot needs a snapshot path")
        return read_snapshot(config.snapshot).configuration
    if config.initial is Initial.UNIFORM_RANDOM:
        return Configuration.uniform_random(
            g,
            config.n,
            rng,
            q=config.q,
            random_orientations=config.random_orientations,
        )
    orientations = (
        [int(v) for v in rng.integers(0, config.q, size=config.n)]
        if config.random_orientations
        else None
    )
    if config.initial is Initial.LINE:
        return Configuration.line(
            g, config.n, orientations, q=config.q, setting=config.setting
        )
    return Configuration.spiral(
        g, config.n, orientations, q=config.q, setting=config.setting
    )


def run_metadata(config: RunConfig) -> dict[str, Any]:
    return {
        "config_hash": config.hash,
        "config": config.canonical(),
        "rng": RNG_IDENTITY,
        "version": __version__,
        "classifier_window": WINDOW_LABEL,
    }


def window_size(samples: int) -> int:
    """Number of trailing samples that vote."""

    return max(1, math.ceil(WINDOW_FRACTION * samples))


def window_votes(rows: Sequence[MetricsRow]) -> dict[str, bool | None]:
    """Majority verdict of each classifier over the final tenth of the rows."""

    if not rows:
        return {name: None for name in CLASSIFIER_COLUMNS}
    window = rows[-window_size(len(rows)) :]
    votes: dict[str, bool | None] = {}
    for name in CLASSIFIER_COLUMNS:
        values = [row.classifiers()[name] for row in window]
        known = [v for v in values if v is not None]
        votes[name] = None if not known else 2 * sum(known) > len(known)
    return votes


@dataclass(frozen=True)
class RunOutcome:
    config: RunConfig
    result: RunResult
    rows: list[MetricsRow]
    votes: dict[str, bool | None]
    snapshot: dict[str, Any]


def _open_csv(path: Path, stack: ExitStack) -> IO[str]:
    path.parent.mkdir(parents=True, exist_ok=True)
    return stack.enter_context(path.open("w", encoding="utf-8", newline=""))


def run_experiment(config: RunConfig) -> RunOutcome:
    """Execute one configured run and write its artifacts.

    Args:
        config: Validated run configuration.

    Returns:
        The run result, every sampled row, the window votes and the final
        snapshot payload.

    Raises:
        OSError: If an output file cannot be written.
    """

    sigma = initial_configuration(config)
    metadata = run_metadata(config)
    rows: list[MetricsRow] = []
    samples = len(sample_steps(config.steps, config.sample_interval))
    voting_from = samples - window_size(samples)
    with ExitStack() as stack:
        writer: Any = None
        if config.outputs.metrics_csv is not None:
            handle = _open_csv(config.outputs.metrics_csv, stack)
            handle.write(METADATA_PREFIX + json.dumps(metadata, sort_keys=True) + "\n")
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(METRIC_COLUMNS)

        def observe(step: int, state: Configuration) -> None:
            row = measure(
                state, step, config, with_aggregation=len(rows) >= voting_from
            )
            rows.append(row)
            if writer is not None:
                writer.writerow(row.as_csv())

        result = run(
            sigma,
            config.chain_params,
            config.steps,
            [observe],
            sample_interval=config.sample_interval,
        )
    snapshot = to_snapshot(
        sigma,
        model=config.model,
        step=config.steps,
        seed=config.seed,
        metadata=metadata,
    )
    if config.outputs.snapshot_json is not None:
        write_snapshot(config.outputs.snapshot_json, snapshot)
    if config.outputs.render_svg is not None:
        path = config.outputs.render_svg
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(render_svg(snapshot), encoding="utf-8", newline="\n")
    return RunOutcome(config, result, rows, window_votes(rows), snapshot)


# Sweeps ---------------------------------------------------------------------


@dataclass(frozen=True)
class ReplicaResult:
    lam: float
    gamma: float | None
    seed: int
    votes: dict[str, bool | None]
    acceptance_rate: float | None = None
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None


def _run_replica(config: RunConfig) -> ReplicaResult:
    try:
        outcome = run_experiment(config)
    except Exception as exc:
        LOGGER.exception("replica lambda=%g seed=%d failed", config.lam, config.seed)
        return ReplicaResult(
            config.lam,
            config.gamma,
            config.seed,
            {name: None for name in CLASSIFIER_COLUMNS},
            error=f"{type(exc).__name__}: {exc}",
        )
    return ReplicaResult(
        config.lam,
        config.gamma,
        config.seed,
        outcome.votes,
        acceptance_rate=outcome.result.acceptance_rate,
    )


@dataclass(frozen=True)
class CellSummary:
    """Fraction of a cell's replicas whose window satisfies each classifier."""

    lam: float
    gamma: float | None
    replicas: int
    failures: int
    fractions: dict[str, float | None]

    def as_csv(self) -> list[str]:
        head = [_cell(self.lam), _cell(self.gamma), str(self.replicas)]
        tail = [_cell(self.fractions[name]) for name in CLASSIFIER_COLUMNS]
        return [*head, str(self.failures), *tail]


def aggregate(results: Iterable[ReplicaResult]) -> list[CellSummary]:
    """Fold replica results into per-cell summaries; input order is irrelevant."""

    cells: dict[tuple[float, float | None], list[ReplicaResult]] = {}
    for result in results:
        cells.setdefault((result.lam, result.gamma), []).append(result)
    summaries: list[CellSummary] = []
    for (lam, gamma), members in sorted(
        cells.items(), key=lambda item: (item[0][0], _sort_gamma(item[0][1]))
    ):
        members.sort(key=lambda r: r.seed)
        fractions: dict[str, float | None] = {}
        for name in CLASSIFIER_COLUMNS:
            known = [r.votes[name] for r in members if r.votes[name] is not None]
            fractions[name] = sum(map(bool, known)) / len(known) if known else None
        summaries.append(
            CellSummary(
                lam,
                gamma,
                replicas=len(members),
                failures=sum(r.failed for r in members),
                fractions=fractions,
            )
        )
    return summaries


def _sort_gamma(gamma: float | None) -> float:
    return -math.inf if gamma is None else gamma


def _execute(replicas: list[RunConfig], workers: int) -> Iterator[ReplicaResult]:
    if workers == 1 or len(replicas) == 1:
        yield from map(_run_replica, replicas)
        return
    with ProcessPoolExecutor(max_workers=workers) as pool:
        yield from pool.map(_run_replica, replicas)


def sweep(
    config: SweepConfig,
    *,
    executor: Callable[[list[RunConfig], int], Iterable[ReplicaResult]] = _execute,
) -> tuple[list[ReplicaResult], list[CellSummary]]:
    """Run every replica of the grid and summarise each cell."""

    replicas = config.replicas()
    LOGGER.info(
        "Starting sweep: %d cells x %d seeds on %d workers",
        len(config.cells()),
        len(config.seeds),
        config.workers,
    )
    results: list[ReplicaResult] = []
    for result in executor(replicas, config.workers):
        results.append(result)
        LOGGER.info(
            "replica lambda=%g gamma=%s seed=%d %s",
            result.lam,
            result.gamma,
            result.seed,
            "failed" if result.failed else "done",
        )
    summaries = aggregate(results)
    if config.base.outputs.metrics_csv is not None:
        write_summary(config.base.outputs.metrics_csv, summaries)
    return results, summaries


SUMMARY_COLUMNS = ("lambda", "gamma", "replicas", "failures", *CLASSIFIER_COLUMNS)


def write_summary(path: Path, summaries: Sequence[CellSummary]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(SUMMARY_COLUMNS)
        for summary in summaries:
            writer.writerow(summary.as_csv())


# Artifact checks ------------------------------------------------------------


def read_metrics(path: Path) -> tuple[dict[str, Any], list[dict[str, str]]]:
    """Return the metadata line and the rows of a metrics CSV."""

    with path.open(encoding="utf-8", newline="") as handle:
        first = handle.readline()
        if not first.startswith(METADATA_PREFIX):
            raise ValueError(f"{path} does not start with a metadata line")
        metadata = json.loads(first[len(METADATA_PREFIX) :])
        rows = list(csv.DictReader(handle))
    return metadata, rows


def verify_pair(metrics_path: Path, snapshot_path: Path) -> list[str]:
    """Problems that stop a metrics file and a snapshot from being a pair."""

    problems: list[str] = []
    metadata, rows = read_metrics(metrics_path)
    snapshot = read_snapshot(snapshot_path)
    expected = metadata.get("config_hash")
    found = snapshot.metadata.get("config_hash")
    if not expected or expected != found:
        problems.append(f"config hash mismatch: metrics {expected}, snapshot {found}")
    if rows and int(rows[-1]["step"]) != snapshot.step:
        problems.append(
            f"last metrics step {rows[-1]['step']} is not snapshot step {snapshot.step}"
        )
    steps = [int(row["step"]) for row in rows]
    if any(b <= a for a, b in zip(steps, steps[1:])):
        problems.append("metrics steps are not strictly increasing")
    return problems


# Verification reports -------------------------------------------------------


@dataclass(frozen=True)
class CheckReport:
    """One line of a verification report."""

    check_name: str
    inputs: dict[str, Any]
    value: Any
    bound: Any
    passed: bool

    def as_dict(self) -> dict[str, Any]:
        return {
            "check_name": self.check_name,
            "inputs": self.inputs,
            "value": self.value,
            "bound": self.bound,
            "pass": self.passed,
        }


def theory_checks(
    qs: Sequence[int] = (2, 3, 4, 5),
    *,
    enumerate_up_to: int = 0,
    isoperimetric_up_to: int = 10**6,
) -> list[CheckReport]:
    """KP certification, polymer counts, sample thresholds and isoperimetry.

    ``enumerate_up_to`` compares brute-force polymer counts with the closed
    forms for sizes up to that bound; ``0`` skips the enumeration.
    """

    reports: list[CheckReport] = []
    for q in qs:
        gamma = theory.KP_GAMMA_FACTOR * (q - 1)
        result = theory.kp_condition_check(gamma, q)
        reports.append(
            CheckReport(
                "kp_holds_at_threshold",
                {"gamma": gamma, "q": q, "c": result.c},
                result.residual,
                result.c,
                result.holds,
            )
        )
        low = 10.0 * (q - 1)
        holds = theory.kp_holds(low, q)
        reports.append(
            CheckReport(
                "kp_fails_below_threshold",
                {"gamma": low, "q": q},
                holds,
                False,
                not holds,
            )
        )
        if enumerate_up_to:
            expected = theory.polymer_counts(q, "enumerated")
            for m in range(6, min(enumerate_up_to, MAX_ENUMERATED_SIZE) + 1):
                found = enumerate_polymers(m, q)
                reports.append(
                    CheckReport(
                        "polymer_count",
                        {"m": m, "q": q},
                        found,
                        expected[m],
                        found == expected[m],
                    )
                )
    table = theory.thresholds(
        2, alpha=1.2, eta=0.9, eps=0.1, delta=0.05, rho=0.2, lam=0.8, gamma=1.0
    )
    for name, value in table.values.items():
        reports.append(
            CheckReport(
                f"threshold:{name}",
                dict(table.inputs),
                value,
                None,
                math.isfinite(value) and value > 0,
            )
        )
    worst = 0
    for n in range(1, isoperimetric_up_to + 1):
        lower, upper = theory.p_min_bounds(n)
        p = p_min_exact(n)
        if not lower - 1e-9 <= p <= upper + 1e-9:
            worst = n
            break
    reports.append(
        CheckReport(
            "isoperimetric_sandwich",
            {"n_max": isoperimetric_up_to},
            worst,
            0,
            worst == 0,
        )
    )
    return reports


def oracle_checks(
    setting: Setting,
    model: Model,
    side: int,
    n: int,
    q: int,
    lam: float,
    gamma: float,
    *,
    steps: int,
    seed: int,
    tolerance: float,
) -> list[CheckReport]:
    """Compare the exact stationary law with the chain's empirical occupation."""

    exact = oracle.exact_stationary(setting, model, side, n, q, lam, gamma)
    inputs: dict[str, Any] = {
        "setting": Setting(setting).value,
        "model": Model(model).value,
        "L": side,
        "n": n,
        "q": q,
        "lambda": lam,
        "gamma": gamma,
        "states": len(exact.states),
    }
    stationarity = oracle.stationarity_residual(exact)
    balance = oracle.detailed_balance_residual(exact)
    reports = [
        CheckReport("stationarity", inputs, stationarity, 1e-12, stationarity < 1e-12),
        CheckReport("detailed_balance", inputs, balance, 1e-12, balance < 1e-12),
    ]
    if steps:
        empirical = oracle.empirical_distribution(exact, steps, seed)
        tv = oracle.total_variation(exact.pi, empirical)
        if tv > tolerance:
            LOGGER.warning("empirical TV %.4f exceeds tolerance %.4f", tv, tolerance)
        reports.append(
            CheckReport(
                "total_variation",
                {**inputs, "steps": steps, "seed": seed},
                tv,
                tolerance,
                tv <= tolerance,
            )
        )
    return reports
