"""Phase classifiers and structural measurements of configurations."""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from .bridges import BridgeSystem, check_bridge_system, construct_bridge_system
from .configuration import Configuration, Setting, perimeter
from .lattice import LatticeGeometry, Site

__all__ = [
    "AlignmentReport",
    "BridgeSystem",
    "RegionReport",
    "aggregation_region",
    "alignment_report",
    "bd_min",
    "bd_min_asymptotic",
    "boundary_length",
    "check_bridge_system",
    "construct_bridge_system",
    "internal_boundary_contour_length",
    "is_aggregated",
    "is_aggregated_aligned",
    "is_aligned",
    "is_alpha_compressed",
    "is_beta_expanded",
    "is_eps_nonaligned",
    "min_cut_bound",
    "p_max",
    "p_min_exact",
]

LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class AlignmentReport:
    counts: tuple[int, ...]
    dominant: int
    rho_p: float


def alignment_report(sigma: Configuration) -> AlignmentReport:
    """Orientation counts and the most popular orientation (smallest on ties)."""

    if sigma.n == 0:
        raise ValueError("alignment is undefined without particles")
    counts = sigma.orientation_counts()
    dominant = int(np.argmax(counts))
    return AlignmentReport(
        counts=tuple(int(c) for c in counts),
        dominant=dominant,
        rho_p=float(counts[dominant]) / sigma.n,
    )


def is_aligned(sigma: Configuration, delta: float) -> bool:
    report = alignment_report(sigma)
    return report.counts[report.dominant] >= (1.0 - delta) * sigma.n


def is_eps_nonaligned(sigma: Configuration, eps: float) -> bool:
    """Every orientation fraction lies within ``eps`` of ``1/q``."""

    fractions = sigma.orientation_counts() / sigma.n
    return bool(np.all(np.abs(fractions - 1.0 / sigma.q) <= eps + 1e-12))


def p_min_exact(n: int) -> int:
    """Smallest ``p >= 0`` with ``n <= floor(((p + 3)^2 + 3) / 12)``."""

    if n < 1:
        raise ValueError("n must be at least 1")
    target = 12 * n - 3
    root = math.isqrt(target)
    if root * root < target:
        root += 1
    return max(0, root - 3)


def p_max(n: int) -> int:
    if n < 1:
        raise ValueError("n must be at least 1")
    return 2 * n - 2


def is_alpha_compressed(sigma: Configuration, alpha: float) -> bool:
    return perimeter(sigma) <= alpha * p_min_exact(sigma.n)


def is_beta_expanded(sigma: Configuration, beta: float) -> bool:
    return perimeter(sigma) > beta * p_max(sigma.n)


def bd_min_asymptotic(c: float) -> float:
    """Leading coefficient of ``bd_min(cN) / sqrt(N)``."""

    if not 0.0 <= c <= 1.0:
        raise ValueError("density must lie in [0, 1]")
    if c < 1.0 / 3.0:
        return 4.0 * math.sqrt(3.0 * c)
    if c <= 2.0 / 3.0:
        return 4.0
    return 4.0 * math.sqrt(3.0 * (1.0 - c))


def bd_min(k: int, n_sites: int) -> int:
    """Minimum boundary length of a ``k``-site region of an ``n_sites`` torus.

    Exact below a third of the torus; above that the asymptotic value is
    rounded and a warning is logged.
    """

    if not 1 <= k <= n_sites:
        raise ValueError(f"k must lie in [1, {n_sites}]")
    if 3 * k < n_sites:
        return 2 * p_min_exact(k) + 6
    LOGGER.warning("bd_min(%d) on %d sites uses the asymptotic branch", k, n_sites)
    return int(round(bd_min_asymptotic(k / n_sites) * math.sqrt(n_sites)))


def _site_mask(
    g: LatticeGeometry, region: Iterable[Site] | npt.NDArray[np.bool_]
) -> npt.NDArray[np.bool_]:
    if isinstance(region, np.ndarray):
        return region.astype(np.bool_)
    mask = np.zeros(g.n_sites, dtype=np.bool_)
    for site in region:
        mask[g.index(site)] = True
    return mask


def boundary_length(
    g: LatticeGeometry, region: Iterable[Site] | npt.NDArray[np.bool_]
) -> int:
    """Number of edges with exactly one endpoint in ``region``."""

    mask = _site_mask(g, region)
    return int(np.count_nonzero(mask[g.edge_tails] != mask[g.edge_heads]))


def min_cut_bound(n: int, kappa: float, alpha: float, nu: float) -> float:
    """Lower bound ``nu sqrt(n) (sqrt(kappa) + sqrt(1 - kappa) - alpha)`` on a split.

    Bounds the internal contour separating a ``kappa`` fraction of the particles
    of an alpha-compressed configuration from the rest; ``nu < 2 sqrt(3)``.
    """

    if not 0.0 <= kappa <= 1.0:
        raise ValueError("kappa must lie in [0, 1]")
    if not 0.0 < nu < 2.0 * math.sqrt(3.0):
        raise ValueError("nu must lie in (0, 2 sqrt 3)")
    return nu * math.sqrt(n) * (math.sqrt(kappa) + math.sqrt(1.0 - kappa) - alpha)


def internal_boundary_contour_length(
    sigma: Configuration, region: Iterable[Site]
) -> int:
    """Edges between ``region`` and the rest of the occupied set."""

    g = sigma.geometry
    mask = _site_mask(g, region)
    occupied = sigma.theta >= 0
    if np.any(mask & ~occupied):
        raise ValueError("region must be a subset of the occupied sites")
    rest = occupied & ~mask
    tails, heads = g.edge_tails, g.edge_heads
    split = (mask[tails] & rest[heads]) | (rest[tails] & mask[heads])
    return int(np.count_nonzero(split))


@dataclass(frozen=True, eq=False)
class RegionReport:
    region: frozenset[Site]
    boundary_length: int
    empty_inside: int
    particles_outside: int
    dominant_inside: tuple[int, int]
    n: int
    n_sites: int
    bridges: BridgeSystem

    @property
    def size(self) -> int:
        return len(self.region)


def aggregation_region(
    sigma: Configuration,
    delta: float,
    *,
    system: BridgeSystem | None = None,
) -> RegionReport:
    """Region where the bridge system assigns an orientation.

    The bridge system is built at ``min(delta, rho / 2)`` with ``rho = n / N``
    so that it certifies fewer stray particles than the density.
    """

    if sigma.setting is not Setting.GENERAL:
        raise ValueError("aggregation regions are defined for the general setting")
    g = sigma.geometry
    if system is None:
        rho = sigma.n / g.n_sites
        system = construct_bridge_system(sigma, min(delta, rho / 2.0))
    inside = system.theta >= 0
    occupied = sigma.theta >= 0
    values = sigma.theta[inside & occupied]
    if values.size:
        counts = np.bincount(values, minlength=sigma.q)
        dominant = (int(np.argmax(counts)), int(counts.max()))
    else:
        dominant = (0, 0)
    return RegionReport(
        region=frozenset(g.site(int(i)) for i in np.flatnonzero(inside)),
        boundary_length=boundary_length(g, inside),
        empty_inside=int(np.count_nonzero(inside & ~occupied)),
        particles_outside=int(np.count_nonzero(~inside & occupied)),
        dominant_inside=dominant,
        n=sigma.n,
        n_sites=g.n_sites,
        bridges=system,
    )


def is_aggregated(report: RegionReport, alpha: float, delta: float) -> bool:
    """Aggregation: few holes in ``R``, few particles outside, short boundary."""

    size = report.size
    if size == 0:
        return False
    return (
        report.empty_inside <= delta * size
        and report.particles_outside <= delta * (report.n_sites - size)
        and report.boundary_length <= alpha * bd_min(report.n, report.n_sites)
    )


def is_aggregated_aligned(report: RegionReport, alpha: float, delta: float) -> bool:
    """Aggregation with one orientation filling ``(1 - delta)`` of ``R``."""

    size = report.size
    if size == 0:
        return False
    return (
        report.dominant_inside[1] >= (1.0 - delta) * size
        and report.particles_outside <= delta * (report.n_sites - size)
        and report.boundary_length <= alpha * bd_min(report.n, report.n_sites)
    )
