"""Exact stationary distributions and transition matrices for tiny instances.

States are enumerated exhaustively, weighted with :func:`dynamics.log_weight`
and joined by the one-step kernel built from the same proposal, validity and
acceptance rules the chain uses.  The empirical side runs the compiled kernel
and histograms the state code recorded after every step.
"""

from __future__ import annotations

import itertools
import logging
import math
from collections import deque
from collections.abc import Iterable
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt
from scipy import sparse

from . import kernels
from .configuration import (
    Configuration,
    Model,
    ReorientMove,
    Setting,
    SpatialMove,
    is_simply_connected,
)
from .dynamics import (
    BLOCK_SIZE,
    ChainParams,
    InvalidMoveError,
    acceptance_probability,
    iter_segments,
    kernel_state,
    log_weight,
    make_rng,
)
from .lattice import LatticeGeometry, Site, get_geometry
from .polymers import EnumerationBudgetError

__all__ = [
    "DEFAULT_MAX_STATES",
    "EnumerationBudgetError",
    "ExactStationary",
    "check_valid_moves",
    "connected_shapes",
    "detailed_balance_residual",
    "empirical_distribution",
    "enumerate_states",
    "exact_stationary",
    "reachable_shapes",
    "stationarity_residual",
    "total_variation",
]

LOGGER = logging.getLogger(__name__)

DEFAULT_MAX_STATES = 10**6
MAX_CONNECTED_PARTICLES = 6

Shape = frozenset[int]


def connected_shapes(
    g: LatticeGeometry, n: int, *, containing: int | None = None
) -> list[Shape]:
    """Every connected ``n``-site set, optionally restricted to those holding a site."""

    if not 1 <= n <= MAX_CONNECTED_PARTICLES:
        raise EnumerationBudgetError(
            f"connected shapes are enumerated for 1 <= n <= {MAX_CONNECTED_PARTICLES}"
        )
    seeds = range(g.n_sites) if containing is None else (containing,)
    level: set[Shape] = {frozenset((s,)) for s in seeds}
    for _ in range(n - 1):
        grown: set[Shape] = set()
        for shape in level:
            for site in shape:
                for other in g.neighbor_table[site]:
                    other = int(other)
                    if other not in shape:
                        grown.add(shape | {other})
        level = grown
    return sorted(level, key=sorted)


def _shape_configuration(
    g: LatticeGeometry,
    shape: Iterable[int],
    orientations: Iterable[int],
    q: int,
    setting: Setting = Setting.GENERAL,
) -> Configuration:
    return Configuration.from_sites(
        g, [g.site(s) for s in sorted(shape)], orientations, q=q, setting=setting
    )


def enumerate_states(
    setting: Setting,
    side: int,
    n: int,
    q: int,
    *,
    max_states: int = DEFAULT_MAX_STATES,
) -> list[Configuration]:
    """All configurations of ``n`` particles in deterministic order.

    Raises:
        EnumerationBudgetError: If the state count exceeds ``max_states``.
    """

    g = get_geometry(side)
    setting = Setting(setting)
    if setting is Setting.GENERAL:
        total = math.comb(g.n_sites, n) * q**n
        if total > max_states:
            raise EnumerationBudgetError(
                f"{total} states exceed the budget of {max_states}"
            )
        shapes = [frozenset(c) for c in itertools.combinations(range(g.n_sites), n)]
    else:
        shapes = [
            shape
            for shape in connected_shapes(g, n)
            if is_simply_connected(_shape_configuration(g, shape, [0] * n, q))
        ]
        total = len(shapes) * q**n
        if total > max_states:
            raise EnumerationBudgetError(
                f"{total} states exceed the budget of {max_states}"
            )
    states = [
        _shape_configuration(g, shape, values, q, setting)
        for shape in shapes
        for values in itertools.product(range(q), repeat=n)
    ]
    LOGGER.debug(
        "enumerated %d %s states (L=%d n=%d q=%d)", total, setting.value, side, n, q
    )
    return states


def _code(sigma: Configuration) -> int:
    return int(kernels.state_code(sigma.theta, sigma.q))


def _moves(sigma: Configuration) -> Iterable[tuple[float, SpatialMove | ReorientMove]]:
    """Every proposal with its proposal probability; self-loops are skipped."""

    g = sigma.geometry
    share = 1.0 / sigma.n
    for position in sigma.positions:
        site = g.site(int(position))
        for target in g.neighbor_table[int(position)]:
            yield share / 12.0, SpatialMove(site, g.site(int(target)))
        current = int(sigma.theta[int(position)])
        for value in range(sigma.q):
            if value != current:
                yield share / (2.0 * sigma.q), ReorientMove(site, value)


@dataclass(frozen=True, eq=False)
class ExactStationary:
    """Enumerated states with their exact probabilities and one-step kernel."""

    params: ChainParams
    states: list[Configuration]
    codes: npt.NDArray[np.int64]
    pi: npt.NDArray[np.float64]
    matrix: sparse.csr_matrix

    def index_of(self, sigma: Configuration) -> int:
        position = int(np.searchsorted(self.codes, _code(sigma)))
        if position >= self.codes.size or self.codes[position] != _code(sigma):
            raise KeyError("configuration is not in the enumerated state space")
        return position

    def probability(self, sigma: Configuration) -> float:
        return float(self.pi[self.index_of(sigma)])


def exact_stationary(
    setting: Setting,
    model: Model,
    side: int,
    n: int,
    q: int,
    lam: float,
    gamma: float = 1.0,
    *,
    max_states: int = DEFAULT_MAX_STATES,
) -> ExactStationary:
    """Exact stationary distribution and transition matrix of a tiny chain.

    Args:
        setting: Connected or general chain.
        model: Potts or clock weights.
        side: Torus side ``L``.
        n: Number of particles.
        q: Number of orientations.
        lam: Compression or aggregation bias.
        gamma: Alignment bias (connected setting only).
        max_states: Enumeration budget.

    Returns:
        States sorted by their kernel code, ``pi`` and the sparse row-stochastic
        matrix ``P``.

    Raises:
        EnumerationBudgetError: If the state space exceeds ``max_states``.
    """

    params = ChainParams(q=q, lam=lam, gamma=gamma, model=model, setting=setting)
    states = enumerate_states(params.setting, side, n, q, max_states=max_states)
    codes = np.array([_code(s) for s in states], dtype=np.int64)
    order = np.argsort(codes, kind="stable")
    states = [states[i] for i in order]
    codes = codes[order]
    weights = np.array([log_weight(s, params) for s in states])
    pi = np.exp(weights - weights.max())
    pi /= pi.sum()

    rows: list[int] = []
    cols: list[int] = []
    data: list[float] = []
    for i, sigma in enumerate(states):
        leave = 0.0
        for share, move in _moves(sigma):
            try:
                accept = acceptance_probability(sigma, move, params)
            except InvalidMoveError:
                continue
            nxt = sigma.copy()
            nxt.apply(move)
            j = int(np.searchsorted(codes, _code(nxt)))
            rows.append(i)
            cols.append(j)
            data.append(share * accept)
            leave += share * accept
        rows.append(i)
        cols.append(i)
        data.append(1.0 - leave)
    size = len(states)
    matrix = sparse.coo_matrix((data, (rows, cols)), shape=(size, size)).tocsr()
    LOGGER.info(
        "exact %s/%s chain: %d states, %d transitions",
        params.setting.value,
        params.model.value,
        size,
        matrix.nnz,
    )
    return ExactStationary(params, states, codes, pi, matrix)


def stationarity_residual(exact: ExactStationary) -> float:
    """``|| pi P - pi ||_1``."""

    return float(np.abs(exact.matrix.T @ exact.pi - exact.pi).sum())


def detailed_balance_residual(exact: ExactStationary) -> float:
    """Largest relative gap between ``pi(x) P(x, y)`` and ``pi(y) P(y, x)``."""

    flow = (sparse.diags(exact.pi) @ exact.matrix).tocsr()
    gap = abs(flow - flow.T).tocoo()
    gap.eliminate_zeros()
    if gap.nnz == 0:
        return 0.0
    forward = np.asarray(flow[gap.row, gap.col]).ravel()
    backward = np.asarray(flow[gap.col, gap.row]).ravel()
    return float(np.max(gap.data / np.maximum(forward, backward)))


def empirical_distribution(
    exact: ExactStationary,
    steps: int,
    seed: int,
    *,
    start: Configuration | None = None,
) -> npt.NDArray[np.float64]:
    """Fraction of the ``steps`` post-step states spent in each enumerated state.

    Raises:
        RuntimeError: If the chain reaches a state outside the enumeration.
    """

    sigma = (start if start is not None else exact.states[0]).copy()
    state = kernel_state(sigma, exact.params)
    rng = make_rng(seed)
    counts = np.zeros(exact.codes.size, dtype=np.int64)
    buffer = np.empty(BLOCK_SIZE, dtype=np.int64)
    for _, block in iter_segments(rng, sigma.n, sigma.q, [steps]):
        used = block.ks.size
        kernels.run_chunk_encoded(*state, *block, buffer[:used])
        positions = np.searchsorted(exact.codes, buffer[:used])
        positions = np.minimum(positions, exact.codes.size - 1)
        if np.any(exact.codes[positions] != buffer[:used]):
            raise RuntimeError("chain left the enumerated state space")
        counts += np.bincount(positions, minlength=exact.codes.size)
    return counts / max(steps, 1)


def total_variation(
    first: npt.NDArray[np.float64], second: npt.NDArray[np.float64]
) -> float:
    return 0.5 * float(np.abs(np.asarray(first) - np.asarray(second)).sum())


def _valid_moves(
    g: LatticeGeometry, sigma: Configuration, shape: Shape
) -> Iterable[tuple[int, int]]:
    for site in sorted(shape):
        for target in g.neighbor_table[site]:
            target = int(target)
            if target in shape:
                continue
            if kernels.valid_spatial(sigma.theta, g.neighbor_table, site, target):
                yield site, target


def reachable_shapes(g: LatticeGeometry, n: int) -> set[Shape]:
    """Occupancy sets reachable from the centred line through valid moves."""

    start = Configuration.line(g, n, q=2)
    seen: set[Shape] = {frozenset(int(i) for i in start.positions)}
    queue = deque(seen)
    while queue:
        shape = queue.popleft()
        sigma = _shape_configuration(g, shape, [0] * n, 2)
        for site, target in _valid_moves(g, sigma, shape):
            nxt = (shape - {site}) | {target}
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return seen


def check_valid_moves(g: LatticeGeometry, n: int) -> list[str]:
    """Check validity over every connected ``n``-site shape through one site.

    Every valid move must keep the shape simply connected and its reverse
    must be valid.  Returns the violations found.
    """

    problems: list[str] = []
    anchor = g.index(Site(g.side // 2, g.side // 2))
    for shape in connected_shapes(g, n, containing=anchor):
        sigma = _shape_configuration(g, shape, [0] * n, 2)
        if not is_simply_connected(sigma):
            continue
        for site, target in _valid_moves(g, sigma, shape):
            moved = sigma.copy()
            moved.apply(SpatialMove(g.site(site), g.site(target)))
            label = f"{g.site(site)}->{g.site(target)} on {sorted(shape)}"
            if not is_simply_connected(moved):
                problems.append(f"{label} breaks simple connectivity")
            elif not kernels.valid_spatial(moved.theta, g.neighbor_table, target, site):
                problems.append(f"{label} is not reversible")
    return problems
