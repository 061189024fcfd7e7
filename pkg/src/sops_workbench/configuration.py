"""Particle configurations: occupancy, orientations and boundary statistics.

Orientations are stored densely per site with ``-1`` for an empty site, the
same convention used for vacancies in the general setting.  Global statistics
are recomputed with vectorised numpy over the edge arrays of the geometry;
local deltas for proposed moves come from the compiled helpers in
:mod:`sops_workbench.kernels`, which only inspect the neighbourhood of the move.
"""

from __future__ import annotations

import json
import logging
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, NamedTuple, Union

import networkx as nx
import numpy as np
import numpy.typing as npt

from . import kernels
from .lattice import LatticeGeometry, Site, get_geometry

LOGGER = logging.getLogger(__name__)

SNAPSHOT_FORMAT_VERSION = 1
EMPTY = -1


class ConfigurationError(ValueError):
    """Raised for malformed configurations or snapshots."""


class PerimeterUndefinedError(ValueError):
    """Raised when the perimeter of a non simply connected set is requested."""


class InvalidMoveError(ValueError):
    """Raised when a move cannot be evaluated on the current configuration."""


class Setting(str, Enum):
    CONNECTED = "connected"
    GENERAL = "general"


class Model(str, Enum):
    POTTS = "potts"
    CLOCK = "clock"


@dataclass(frozen=True)
class SpatialMove:
    """Move the particle at ``source`` to the adjacent site ``target``."""

    source: Site
    target: Site


@dataclass(frozen=True)
class ReorientMove:
    """Give the particle at ``site`` the orientation ``theta``."""

    site: Site
    theta: int


Move = Union[SpatialMove, ReorientMove]


class LocalDelta(NamedTuple):
    da: int
    dh: int
    dd: float
    dp: float | None


@dataclass(frozen=True)
class BoundaryStats:
    """Global boundary quantities of a configuration."""

    a: int
    h: int
    d_sum: float
    p: int | None = None


def clock_distance_table(q: int) -> npt.NDArray[np.float64]:
    """``table[k] = 1 - cos(2 pi k / q)``, exactly symmetric in ``k <-> q - k``."""

    if q < 2:
        raise ValueError("q must be at least 2")
    table = np.empty(q, dtype=np.float64)
    for k in range(q // 2 + 1):
        value = 1.0 - float(np.cos(2.0 * np.pi * k / q))
        table[k] = value
        table[(q - k) % q] = value
    table[0] = 0.0
    return table


@dataclass(eq=False)
class Configuration:
    """Occupancy and orientations of ``n`` particles on a lattice.

    ``positions[k]`` is the site of particle ``k`` and ``slot`` is its inverse;
    both are kept in step with ``theta`` by every mutation.
    """

    geometry: LatticeGeometry
    q: int
    setting: Setting
    theta: npt.NDArray[np.int64]
    positions: npt.NDArray[np.int64] = field(repr=False)
    slot: npt.NDArray[np.int64] = field(repr=False)

    __hash__ = None  # type: ignore[assignment]

    # Construction ------------------------------------------------------

    @classmethod
    def from_sites(
        cls,
        geometry: LatticeGeometry,
        sites: Iterable[Site | tuple[int, int]],
        orientations: Iterable[int] | None = None,
        *,
        q: int,
        setting: Setting = Setting.GENERAL,
    ) -> Configuration:
        """Build a configuration from explicit sites and orientations.

        Raises:
            ConfigurationError: On duplicate or out-of-range sites, an
                orientation outside ``[0, q)``, or a connected-setting
                configuration that is not simply connected.
        """

        if q < 2:
            raise ConfigurationError("q must be at least 2")
        indices: list[int] = []
        for site in sites:
            try:
                indices.append(geometry.index(Site(*site)))
            except ValueError as exc:
                raise ConfigurationError(str(exc)) from exc
        values = [0] * len(indices) if orientations is None else list(orientations)
        if len(values) != len(indices):
            raise ConfigurationError(
                f"got {len(values)} orientations for {len(indices)} sites"
            )
        if len(set(indices)) != len(indices):
            raise ConfigurationError("particles must occupy distinct sites")
        theta = np.full(geometry.n_sites, EMPTY, dtype=np.int64)
        for index, value in zip(indices, values):
            if not 0 <= int(value) < q:
                raise ConfigurationError(f"orientation {value} outside [0, {q})")
            theta[index] = int(value)
        config = cls._from_theta(geometry, theta, q=q, setting=Setting(setting))
        if config.setting is Setting.CONNECTED and not is_simply_connected(config):
            raise ConfigurationError(
                "connected-setting configurations must be simply connected"
            )
        return config

    @classmethod
    def _from_theta(
        cls,
        geometry: LatticeGeometry,
        theta: npt.NDArray[np.int64],
        *,
        q: int,
        setting: Setting,
    ) -> Configuration:
        positions = np.flatnonzero(theta >= 0).astype(np.int64)
        slot = np.full(geometry.n_sites, -1, dtype=np.int64)
        slot[positions] = np.arange(positions.size, dtype=np.int64)
        return cls(geometry, q, setting, theta, positions, slot)

    @classmethod
    def line(
        cls,
        geometry: LatticeGeometry,
        n: int,
        orientations: Sequence[int] | None = None,
        *,
        q: int,
        setting: Setting = Setting.CONNECTED,
    ) -> Configuration:
        """``n`` particles in a horizontal line centred on the torus."""

        if n > geometry.side:
            raise ConfigurationError(
                f"a line of {n} wraps a side-{geometry.side} torus"
            )
        x0 = (geometry.side - n) // 2
        y0 = geometry.side // 2
        sites = [Site(x0 + i, y0) for i in range(n)]
        return cls.from_sites(geometry, sites, orientations, q=q, setting=setting)

    @classmethod
    def spiral(
        cls,
        geometry: LatticeGeometry,
        n: int,
        orientations: Sequence[int] | None = None,
        *,
        q: int,
        setting: Setting = Setting.CONNECTED,
        center: Site | None = None,
    ) -> Configuration:
        """``n`` particles on the hexagonal spiral around ``center``."""

        middle = center or Site(geometry.side // 2, geometry.side // 2)
        try:
            sites = geometry.spiral_sites(middle, n)
        except ValueError as exc:
            raise ConfigurationError(str(exc)) from exc
        return cls.from_sites(geometry, sites, orientations, q=q, setting=setting)

    @classmethod
    def uniform_random(
        cls,
        geometry: LatticeGeometry,
        n: int,
        rng: np.random.Generator,
        *,
        q: int,
        random_orientations: bool = True,
    ) -> Configuration:
        """``n`` distinct sites drawn uniformly (general setting only)."""

        if not 0 <= n <= geometry.n_sites:
            raise ConfigurationError(
                f"cannot place {n} particles on {geometry.n_sites} sites"
            )
        chosen = np.sort(rng.choice(geometry.n_sites, size=n, replace=False))
        values = rng.integers(0, q, size=n) if random_orientations else np.zeros(n)
        theta = np.full(geometry.n_sites, EMPTY, dtype=np.int64)
        theta[chosen] = values.astype(np.int64)
        return cls._from_theta(geometry, theta, q=q, setting=Setting.GENERAL)

    # Views -------------------------------------------------------------

    @property
    def n(self) -> int:
        return int(self.positions.size)

    @property
    def occupied(self) -> frozenset[Site]:
        return frozenset(
            self.geometry.site(int(i)) for i in np.flatnonzero(self.theta >= 0)
        )

    @property
    def orientation(self) -> dict[Site, int]:
        return {
            self.geometry.site(int(i)): int(self.theta[i])
            for i in np.flatnonzero(self.theta >= 0)
        }

    def is_occupied(self, site: Site) -> bool:
        return bool(self.theta[self.geometry.index(site)] >= 0)

    def orientation_counts(self) -> npt.NDArray[np.int64]:
        counts = np.bincount(self.theta[self.theta >= 0], minlength=self.q)
        return counts.astype(np.int64)

    def copy(self) -> Configuration:
        return Configuration(
            self.geometry,
            self.q,
            self.setting,
            self.theta.copy(),
            self.positions.copy(),
            self.slot.copy(),
        )

    def shifted(self, k: int) -> Configuration:
        """Copy with every orientation shifted by ``k`` modulo ``q``."""

        shifted = self.copy()
        mask = shifted.theta >= 0
        shifted.theta[mask] = (shifted.theta[mask] + k) % self.q
        return shifted

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Configuration):
            return NotImplemented
        return (
            self.geometry.side == other.geometry.side
            and self.q == other.q
            and self.setting is other.setting
            and bool(np.array_equal(self.theta, other.theta))
        )

    # Mutation ----------------------------------------------------------

    def apply(self, move: Move) -> None:
        """Apply ``move`` without any validity or acceptance check."""

        g = self.geometry
        if isinstance(move, SpatialMove):
            src, dst = g.index(move.source), g.index(move.target)
            k = self.slot[src]
            self.theta[dst] = self.theta[src]
            self.theta[src] = EMPTY
            self.positions[k] = dst
            self.slot[dst] = k
            self.slot[src] = -1
        else:
            self.theta[g.index(move.site)] = move.theta


# Global statistics ------------------------------------------------------


def count_boundary_edges(sigma: Configuration) -> int:
    g = sigma.geometry
    occ = sigma.theta >= 0
    return int(np.count_nonzero(occ[g.edge_tails] != occ[g.edge_heads]))


def _occupied_edge_orientations(
    sigma: Configuration,
) -> tuple[npt.NDArray[np.int64], npt.NDArray[np.int64]]:
    g = sigma.geometry
    tails = sigma.theta[g.edge_tails]
    heads = sigma.theta[g.edge_heads]
    both = (tails >= 0) & (heads >= 0)
    return tails[both], heads[both]


def count_heterogeneous(sigma: Configuration) -> int:
    tails, heads = _occupied_edge_orientations(sigma)
    return int(np.count_nonzero(tails != heads))


def clock_distance_sum(sigma: Configuration, q: int | None = None) -> float:
    """Sum of ``1 - cos(2 pi (theta_i - theta_j) / q)`` over occupied edges."""

    table = clock_distance_table(q or sigma.q)
    tails, heads = _occupied_edge_orientations(sigma)
    return float(table[(heads - tails) % table.size].sum())


def is_simply_connected(sigma: Configuration) -> bool:
    """Occupied set connected and its complement connected."""

    graph = sigma.geometry.graph
    occupied = np.flatnonzero(sigma.theta >= 0).tolist()
    if not occupied:
        return False
    if not nx.is_connected(graph.subgraph(occupied)):
        return False
    empty = np.flatnonzero(sigma.theta < 0).tolist()
    return not empty or nx.is_connected(graph.subgraph(empty))


def perimeter(sigma: Configuration) -> int:
    """Perimeter ``p = (a - 6) / 2`` of a simply connected configuration.

    Raises:
        PerimeterUndefinedError: If the configuration is disconnected or has holes.
    """

    if not is_simply_connected(sigma):
        raise PerimeterUndefinedError(
            "perimeter is only defined for connected, hole-free configurations"
        )
    return (count_boundary_edges(sigma) - 6) // 2


def boundary_stats(
    sigma: Configuration, *, with_perimeter: bool = True
) -> BoundaryStats:
    a = count_boundary_edges(sigma)
    p: int | None = None
    connected = sigma.setting is Setting.CONNECTED
    if with_perimeter and connected and is_simply_connected(sigma):
        p = (a - 6) // 2
    return BoundaryStats(
        a=a,
        h=count_heterogeneous(sigma),
        d_sum=clock_distance_sum(sigma),
        p=p,
    )


def boundary_walk_length(sigma: Configuration) -> int:
    """Length of the closed walk around the outside of a connected configuration.

    The walk starts on the lowest row above an empty row, leaves with the
    exterior on its right, and at every particle turns to the first occupied
    neighbour counter-clockwise from the one it came from.
    """

    g = sigma.geometry
    occupied = np.flatnonzero(sigma.theta >= 0)
    if occupied.size == 0:
        raise PerimeterUndefinedError("empty configuration has no boundary walk")
    if not nx.is_connected(g.graph.subgraph(occupied.tolist())):
        raise PerimeterUndefinedError("boundary walk needs a connected configuration")
    rows = set((occupied // g.side).tolist())
    empty_rows = [y for y in range(g.side) if y not in rows]
    if not empty_rows:
        raise PerimeterUndefinedError("configuration wraps around the torus")
    base = empty_rows[0]
    start = int(
        min(occupied, key=lambda i: (((i // g.side) - base - 1) % g.side, i % g.side))
    )
    ccw = g.ccw_neighbor_table

    def turn(site: int, back: int) -> int:
        for i in range(1, 7):
            d = (back + i) % 6
            if sigma.theta[ccw[site, d]] >= 0:
                return d
        return -1

    first = turn(start, 4)
    if first < 0:
        return 0
    length = 0
    site, direction = start, first
    while True:
        nxt = int(ccw[site, direction])
        length += 1
        following = turn(nxt, (direction + 3) % 6)
        if nxt == start and following == first:
            return length
        site, direction = nxt, following


# Local deltas -----------------------------------------------------------


def local_delta(sigma: Configuration, move: Move) -> LocalDelta:
    """Deltas of ``(a, h, d_sum, p)`` caused by ``move``, from its neighbourhood only.

    Raises:
        InvalidMoveError: If a spatial move starts on an empty site or targets
            an occupied or non-adjacent site, or a reorientation is out of range.
    """

    g = sigma.geometry
    nbr = g.neighbor_table
    table = clock_distance_table(sigma.q)
    if isinstance(move, SpatialMove):
        src, dst = g.index(move.source), g.index(move.target)
        if sigma.theta[src] < 0:
            raise InvalidMoveError(f"no particle at {tuple(move.source)}")
        if dst not in nbr[src]:
            raise InvalidMoveError(
                f"{tuple(move.target)} is not adjacent to {tuple(move.source)}"
            )
        if sigma.theta[dst] >= 0:
            raise InvalidMoveError(f"{tuple(move.target)} is occupied")
        da, dh, dd = kernels.spatial_delta(sigma.theta, nbr, table, sigma.q, src, dst)
    else:
        site = g.index(move.site)
        if sigma.theta[site] < 0:
            raise InvalidMoveError(f"no particle at {tuple(move.site)}")
        if not 0 <= move.theta < sigma.q:
            raise InvalidMoveError(f"orientation {move.theta} outside [0, {sigma.q})")
        da = 0
        dh, dd = kernels.reorient_delta(
            sigma.theta, nbr, table, sigma.q, site, move.theta
        )
    dp = da / 2 if sigma.setting is Setting.CONNECTED else None
    return LocalDelta(int(da), int(dh), float(dd), dp)


# Snapshots --------------------------------------------------------------


def to_snapshot(
    sigma: Configuration,
    *,
    model: Model,
    step: int,
    seed: int,
    metadata: Mapping[str, Any] | None = None,
) -> dict[str, Any]:
    particles = [
        {"x": site.x, "y": site.y, "theta": theta}
        for site, theta in sorted(
            sigma.orientation.items(), key=lambda item: sigma.geometry.index(item[0])
        )
    ]
    payload: dict[str, Any] = {
        "format_version": SNAPSHOT_FORMAT_VERSION,
        "L": sigma.geometry.side,
        "q": sigma.q,
        "setting": sigma.setting.value,
        "model": Model(model).value,
        "step": int(step),
        "seed": int(seed),
        "particles": particles,
    }
    if metadata:
        payload["metadata"] = dict(metadata)
    return payload


@dataclass(frozen=True)
class Snapshot:
    configuration: Configuration
    model: Model
    step: int
    seed: int
    metadata: dict[str, Any]


def from_snapshot(payload: Mapping[str, Any]) -> Snapshot:
    """Decode a snapshot mapping produced by :func:`to_snapshot`."""

    try:
        version = int(payload["format_version"])
        if version != SNAPSHOT_FORMAT_VERSION:
            raise ConfigurationError(f"unsupported snapshot format_version {version}")
        geometry = get_geometry(int(payload["L"]))
        particles = payload["particles"]
        sites = [Site(int(p["x"]), int(p["y"])) for p in particles]
        orientations = [int(p["theta"]) for p in particles]
        config = Configuration.from_sites(
            geometry,
            sites,
            orientations,
            q=int(payload["q"]),
            setting=Setting(payload["setting"]),
        )
        return Snapshot(
            configuration=config,
            model=Model(payload["model"]),
            step=int(payload["step"]),
            seed=int(payload["seed"]),
            metadata=dict(payload.get("metadata", {})),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigurationError(f"malformed snapshot: {exc}") from exc


def dumps_snapshot(payload: Mapping[str, Any]) -> str:
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def write_snapshot(path: Path, payload: Mapping[str, Any]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as handle:
        handle.write(dumps_snapshot(payload))


def read_snapshot(path: Path) -> Snapshot:
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"snapshot {path} is not valid JSON: {exc}") from exc
    return from_snapshot(payload)
