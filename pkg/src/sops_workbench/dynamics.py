"""Metropolis chains for the connected and general settings.

Each activation picks a particle uniformly, then with probability one half
proposes moving it to one of its six neighbouring sites and otherwise proposes
one of the ``q`` orientations (the current one included).  Weight ratios are
handled in log space.  :func:`step` is the readable single-activation path;
:func:`run` hands blocks of pre-drawn random numbers to the compiled kernel.
"""

from __future__ import annotations

import logging
import math
import time
from collections.abc import Callable, Iterable, Iterator
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import numpy.typing as npt

from . import kernels
from .configuration import (
    Configuration,
    InvalidMoveError,
    Model,
    Move,
    ReorientMove,
    Setting,
    SpatialMove,
    clock_distance_sum,
    clock_distance_table,
    count_boundary_edges,
    count_heterogeneous,
    local_delta,
    perimeter,
)
from .lattice import Site

__all__ = [
    "RNG_IDENTITY",
    "ChainParams",
    "InvalidMoveError",
    "Model",
    "Move",
    "ReorientMove",
    "RunResult",
    "Setting",
    "SpatialMove",
    "acceptance_probability",
    "is_valid_spatial",
    "log_weight",
    "make_rng",
    "propose",
    "replica_seeds",
    "run",
    "step",
]

LOGGER = logging.getLogger(__name__)

RNG_IDENTITY = "numpy.random.Generator(PCG64)"
BLOCK_SIZE = 1 << 16

Observer = Callable[[int, Configuration], None]


@dataclass(frozen=True)
class ChainParams:
    """Chain parameters; ``gamma`` is ignored in the general setting."""

    q: int
    lam: float
    gamma: float = 1.0
    model: Model = Model.POTTS
    setting: Setting = Setting.CONNECTED
    seed: int = 0

    def __post_init__(self) -> None:
        if self.q < 2:
            raise ValueError("q must be at least 2")
        for name in ("lam", "gamma"):
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0:
                raise ValueError(f"{name} must be finite and positive, got {value!r}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        object.__setattr__(self, "model", Model(self.model))
        object.__setattr__(self, "setting", Setting(self.setting))

    @property
    def connected(self) -> bool:
        return self.setting is Setting.CONNECTED

    @property
    def clock(self) -> bool:
        return self.model is Model.CLOCK

    @property
    def log_weights(self) -> tuple[float, float, float]:
        """``(log(lam * gamma), log(gamma), log(lam))`` as used by the kernel."""

        gamma = self.gamma if self.connected else 1.0
        return (
            math.log(self.lam) + math.log(gamma),
            math.log(gamma),
            math.log(self.lam),
        )


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def replica_seeds(seed: int, count: int) -> list[int]:
    """Independent 64-bit seeds for ``count`` replicas spawned from ``seed``."""

    children = np.random.SeedSequence(seed).spawn(count)
    return [int(child.generate_state(1, dtype=np.uint64)[0]) for child in children]


def _check_params(sigma: Configuration, params: ChainParams) -> None:
    if sigma.q != params.q or sigma.setting is not params.setting:
        raise ValueError(
            f"configuration (q={sigma.q}, {sigma.setting.value}) does not match "
            f"chain parameters (q={params.q}, {params.setting.value})"
        )


def is_valid_spatial(sigma: Configuration, source: Site, target: Site) -> bool:
    """Connected-setting validity of moving the particle at ``source`` to ``target``.

    Raises:
        InvalidMoveError: If ``source`` is empty or ``target`` is not adjacent.
    """

    g = sigma.geometry
    src, dst = g.index(source), g.index(target)
    if sigma.theta[src] < 0:
        raise InvalidMoveError(f"no particle at {g.site(src)}")
    if dst not in g.neighbor_table[src]:
        raise InvalidMoveError(f"{g.site(dst)} is not adjacent to {g.site(src)}")
    return bool(kernels.valid_spatial(sigma.theta, g.neighbor_table, src, dst))


def propose(sigma: Configuration, rng: np.random.Generator) -> Move:
    if sigma.n == 0:
        raise ValueError("cannot propose a move without particles")
    g = sigma.geometry
    k = int(rng.integers(sigma.n))
    site = g.site(int(sigma.positions[k]))
    if rng.random() < 0.5:
        direction = int(rng.integers(6))
        target = int(g.neighbor_table[g.index(site), direction])
        return SpatialMove(site, g.site(target))
    return ReorientMove(site, int(rng.integers(sigma.q)))


def _is_admissible(sigma: Configuration, move: Move) -> bool:
    if isinstance(move, ReorientMove):
        return True
    if sigma.is_occupied(move.target):
        return False
    if sigma.setting is Setting.CONNECTED:
        return is_valid_spatial(sigma, move.source, move.target)
    return True


def _log_ratio(sigma: Configuration, move: Move, params: ChainParams) -> float:
    delta = local_delta(sigma, move)
    log_lg, log_g, log_l = params.log_weights
    return float(
        kernels.log_ratio(
            params.connected,
            params.clock,
            log_lg,
            log_g,
            log_l,
            delta.da,
            delta.dh,
            delta.dd,
        )
    )


def acceptance_probability(
    sigma: Configuration, move: Move, params: ChainParams
) -> float:
    """Metropolis acceptance ``min(1, pi(sigma') / pi(sigma))`` for a valid move.

    Raises:
        InvalidMoveError: If ``move`` would be rejected outright as invalid.
    """

    _check_params(sigma, params)
    if not _is_admissible(sigma, move):
        raise InvalidMoveError(f"{move} is not a valid move")
    return min(1.0, math.exp(min(0.0, _log_ratio(sigma, move, params))))


def step(sigma: Configuration, params: ChainParams, rng: np.random.Generator) -> bool:
    """One activation; mutates ``sigma`` and reports whether the proposal was taken."""

    move = propose(sigma, rng)
    if not _is_admissible(sigma, move):
        return False
    if isinstance(move, ReorientMove):
        if sigma.theta[sigma.geometry.index(move.site)] == move.theta:
            return True
    log_u = math.log1p(-float(rng.random()))
    if log_u <= _log_ratio(sigma, move, params):
        sigma.apply(move)
        return True
    return False


def log_weight(sigma: Configuration, params: ChainParams) -> float:
    """Unnormalised log stationary weight of ``sigma``."""

    disagreement = (
        clock_distance_sum(sigma) if params.clock else float(count_heterogeneous(sigma))
    )
    log_lg, log_g, log_l = params.log_weights
    if params.connected:
        return -perimeter(sigma) * log_lg - disagreement * log_g
    return -(count_boundary_edges(sigma) + disagreement) * log_l


class RandomBlock(NamedTuple):
    ks: npt.NDArray[np.int64]
    kinds: npt.NDArray[np.int64]
    directions: npt.NDArray[np.int64]
    news: npt.NDArray[np.int64]
    log_us: npt.NDArray[np.float64]

    def slice(self, start: int, stop: int) -> RandomBlock:
        return RandomBlock(*(array[start:stop] for array in self))


def draw_block(rng: np.random.Generator, n: int, q: int) -> RandomBlock:
    """Random numbers for ``BLOCK_SIZE`` activations, drawn in a fixed order."""

    return RandomBlock(
        ks=rng.integers(0, n, size=BLOCK_SIZE, dtype=np.int64),
        kinds=(rng.random(BLOCK_SIZE) >= 0.5).astype(np.int64),
        directions=rng.integers(0, 6, size=BLOCK_SIZE, dtype=np.int64),
        news=rng.integers(0, q, size=BLOCK_SIZE, dtype=np.int64),
        log_us=np.log1p(-rng.random(BLOCK_SIZE)),
    )


def kernel_state(sigma: Configuration, params: ChainParams) -> tuple[object, ...]:
    """Leading positional arguments shared by the compiled chunk runners."""

    log_lg, log_g, log_l = params.log_weights
    return (
        sigma.theta,
        sigma.positions,
        sigma.slot,
        sigma.geometry.neighbor_table,
        clock_distance_table(sigma.q),
        sigma.q,
        params.connected,
        params.clock,
        log_lg,
        log_g,
        log_l,
    )


def iter_segments(
    rng: np.random.Generator, n: int, q: int, boundaries: Iterable[int]
) -> Iterator[tuple[int, RandomBlock]]:
    """Yield ``(end_step, randoms)`` pieces covering the steps up to each boundary.

    Blocks are drawn whole, so the random stream does not depend on where the
    boundaries fall.
    """

    block = draw_block(rng, n, q)
    used = 0
    done = 0
    for boundary in boundaries:
        while done < boundary:
            if used == BLOCK_SIZE:
                block = draw_block(rng, n, q)
                used = 0
            take = min(boundary - done, BLOCK_SIZE - used)
            done += take
            yield done, block.slice(used, used + take)
            used += take


def sample_steps(steps: int, interval: int) -> list[int]:
    """Steps at which observers fire: ``0``, every ``interval``, and the last step."""

    if interval < 1:
        raise ValueError("sample_interval must be at least 1")
    points = list(range(0, steps + 1, interval))
    if points[-1] != steps:
        points.append(steps)
    return points


@dataclass(frozen=True)
class RunResult:
    configuration: Configuration
    steps: int
    accepted: int
    seconds: float

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.steps if self.steps else 0.0


def run(
    sigma: Configuration,
    params: ChainParams,
    steps: int,
    observers: Iterable[Observer] = (),
    *,
    sample_interval: int = 1,
    rng: np.random.Generator | None = None,
) -> RunResult:
    """Execute ``steps`` activations in place and notify observers at sample points.

    Args:
        sigma: Configuration mutated by the chain.
        params: Chain parameters; ``params.seed`` seeds the generator unless
            ``rng`` is supplied.
        steps: Number of activations, invalid proposals included.
        observers: Callables receiving ``(step, sigma)`` at every sample point.
        sample_interval: Distance between sample points.
        rng: Optional generator overriding ``params.seed``.

    Returns:
        The final configuration with step and acceptance counts.
    """

    if steps < 0:
        raise ValueError("steps must be non-negative")
    _check_params(sigma, params)
    callbacks = list(observers)
    generator = rng if rng is not None else make_rng(params.seed)
    points = sample_steps(steps, sample_interval)
    LOGGER.info(
        "Starting %s/%s run: n=%d q=%d lam=%g gamma=%g steps=%d",
        params.setting.value,
        params.model.value,
        sigma.n,
        params.q,
        params.lam,
        params.gamma,
        steps,
    )
    started = time.perf_counter()
    for callback in callbacks:
        callback(0, sigma)
    accepted = 0
    if sigma.n and steps:
        state = kernel_state(sigma, params)
        pending = iter(points[1:])
        target = next(pending)
        for done, block in iter_segments(generator, sigma.n, sigma.q, points[1:]):
            accepted += int(kernels.run_chunk(*state, *block))
            if done == target:
                LOGGER.debug("step %d: accepted %d", done, accepted)
                for callback in callbacks:
                    callback(done, sigma)
                target = next(pending, -1)
    elif steps:
        for point in points[1:]:
            for callback in callbacks:
                callback(point, sigma)
    seconds = time.perf_counter() - started
    result = RunResult(sigma, steps, accepted, seconds)
    LOGGER.info(
        "Finished run: %d steps in %.2fs, acceptance rate %.4f",
        steps,
        seconds,
        result.acceptance_rate,
    )
    return result
