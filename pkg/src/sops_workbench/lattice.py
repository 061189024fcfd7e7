"""Toroidal triangular lattice geometry and its hexagonal dual.

Sites are indexed row-major as ``y * L + x``.  Every primal edge is owned by
its tail site and one of three forward offsets, giving the edge id
``3 * site + direction``; the forward offset is also the edge's canonical
direction.  Dual (hexagonal) vertices are the elementary triangles: the "up"
triangle ``{(x,y), (x+1,y), (x+1,y+1)}`` has id ``2 * site`` and the "down"
triangle ``{(x,y), (x,y+1), (x+1,y+1)}`` has id ``2 * site + 1``.
"""

from __future__ import annotations

import logging
from collections.abc import Iterator
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import NamedTuple

import networkx as nx
import numpy as np
import numpy.typing as npt

LOGGER = logging.getLogger(__name__)

#: Neighbour offsets in the documented order returned by :func:`neighbors`.
NEIGHBOR_OFFSETS: tuple[tuple[int, int], ...] = (
    (1, 0),
    (0, 1),
    (1, 1),
    (-1, 0),
    (0, -1),
    (-1, -1),
)

#: The same offsets in counter-clockwise angular order, starting east.
CCW_OFFSETS: tuple[tuple[int, int], ...] = (
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 0),
    (-1, -1),
    (0, -1),
)

#: Forward offsets owning the three edges of each site.
EDGE_OFFSETS: tuple[tuple[int, int], ...] = ((1, 0), (0, 1), (1, 1))

UP = 0
DOWN = 1


class Site(NamedTuple):
    """A lattice site with coordinates reduced modulo ``L``."""

    x: int
    y: int


class DualEdge(NamedTuple):
    """An edge of the hexagonal dual, stored as ``(smaller id, larger id)``."""

    a: int
    b: int


@dataclass(frozen=True)
class Triangle:
    """An elementary triangle with its boundary edges and their signs.

    ``signs[i]`` is ``+1`` when walking the triangle counter-clockwise follows
    the canonical direction of ``edges[i]`` and ``-1`` otherwise.
    """

    dual_vertex: int
    sites: tuple[int, int, int]
    edges: tuple[int, int, int]
    signs: tuple[int, int, int]


@dataclass(frozen=True)
class LatticeGeometry:
    """An ``L x L`` triangular lattice on the torus."""

    side: int

    def __post_init__(self) -> None:
        if self.side < 3:
            raise ValueError(f"lattice side must be at least 3, got {self.side}")

    @property
    def n_sites(self) -> int:
        return self.side * self.side

    @property
    def n_edges(self) -> int:
        return 3 * self.n_sites

    @property
    def n_dual_vertices(self) -> int:
        return 2 * self.n_sites

    # Site arithmetic ---------------------------------------------------

    def wrap(self, x: int, y: int) -> Site:
        return Site(x % self.side, y % self.side)

    def index(self, site: Site | tuple[int, int]) -> int:
        x, y = site
        if not (0 <= x < self.side and 0 <= y < self.side):
            raise ValueError(
                f"site {tuple(site)} outside a {self.side}x{self.side} lattice"
            )
        return y * self.side + x

    def site(self, index: int) -> Site:
        if not 0 <= index < self.n_sites:
            raise ValueError(f"site index {index} out of range")
        return Site(index % self.side, index // self.side)

    def offset(self, index: int, dx: int, dy: int) -> int:
        """Return the index of the site reached from ``index`` by ``(dx, dy)``."""

        x, y = index % self.side, index // self.side
        return ((y + dy) % self.side) * self.side + (x + dx) % self.side

    def neighbors(self, v: Site) -> list[Site]:
        """Return the six neighbours of ``v`` in :data:`NEIGHBOR_OFFSETS` order."""

        self.index(v)
        return [self.wrap(v.x + dx, v.y + dy) for dx, dy in NEIGHBOR_OFFSETS]

    @cached_property
    def neighbor_table(self) -> npt.NDArray[np.int64]:
        """``(N, 6)`` table of neighbour indices in :data:`NEIGHBOR_OFFSETS` order."""

        idx = np.arange(self.n_sites, dtype=np.int64)
        xs, ys = idx % self.side, idx // self.side
        columns = [
            ((ys + dy) % self.side) * self.side + (xs + dx) % self.side
            for dx, dy in NEIGHBOR_OFFSETS
        ]
        return np.stack(columns, axis=1).astype(np.int64)

    @cached_property
    def ccw_neighbor_table(self) -> npt.NDArray[np.int64]:
        """``(N, 6)`` table of neighbour indices in counter-clockwise order."""

        idx = np.arange(self.n_sites, dtype=np.int64)
        xs, ys = idx % self.side, idx // self.side
        columns = [
            ((ys + dy) % self.side) * self.side + (xs + dx) % self.side
            for dx, dy in CCW_OFFSETS
        ]
        return np.stack(columns, axis=1).astype(np.int64)

    # Primal edges ------------------------------------------------------

    @cached_property
    def edge_tails(self) -> npt.NDArray[np.int64]:
        return np.repeat(np.arange(self.n_sites, dtype=np.int64), 3)

    @cached_property
    def edge_heads(self) -> npt.NDArray[np.int64]:
        heads = np.empty(self.n_edges, dtype=np.int64)
        for direction, (dx, dy) in enumerate(EDGE_OFFSETS):
            heads[direction::3] = [
                self.offset(site, dx, dy) for site in range(self.n_sites)
            ]
        return heads

    @cached_property
    def wrap_mask(self) -> npt.NDArray[np.bool_]:
        """Edges whose unreduced forward offset leaves ``[0, L)^2``."""

        mask = np.zeros(self.n_edges, dtype=np.bool_)
        last = self.side - 1
        for direction, (dx, dy) in enumerate(EDGE_OFFSETS):
            for site in range(self.n_sites):
                x, y = site % self.side, site // self.side
                if (dx and x == last) or (dy and y == last):
                    mask[3 * site + direction] = True
        return mask

    def edge_id(self, u: Site, v: Site) -> int:
        """Return the id of the primal edge joining ``u`` and ``v``."""

        iu, iv = self.index(u), self.index(v)
        for direction, (dx, dy) in enumerate(EDGE_OFFSETS):
            if self.offset(iu, dx, dy) == iv:
                return 3 * iu + direction
            if self.offset(iv, dx, dy) == iu:
                return 3 * iv + direction
        raise ValueError(f"sites {tuple(u)} and {tuple(v)} are not adjacent")

    def edge_endpoints(self, edge: int) -> tuple[int, int]:
        """Return ``(tail, head)`` indices of ``edge`` in canonical direction."""

        return int(self.edge_tails[edge]), int(self.edge_heads[edge])

    def canonical_direction(self, u: Site, v: Site) -> tuple[Site, Site]:
        tail, head = self.edge_endpoints(self.edge_id(u, v))
        return self.site(tail), self.site(head)

    # Dual lattice ------------------------------------------------------

    @cached_property
    def dual_endpoints(self) -> npt.NDArray[np.int64]:
        """``(3N, 2)`` sorted dual-vertex pairs crossing each primal edge."""

        pairs = np.empty((self.n_edges, 2), dtype=np.int64)
        for site in range(self.n_sites):
            below = self.offset(site, 0, -1)
            left = self.offset(site, -1, 0)
            crossing = (
                (2 * site + UP, 2 * below + DOWN),
                (2 * site + DOWN, 2 * left + UP),
                (2 * site + UP, 2 * site + DOWN),
            )
            for direction, (a, b) in enumerate(crossing):
                pairs[3 * site + direction] = (min(a, b), max(a, b))
        return pairs

    @cached_property
    def _dual_index(self) -> dict[DualEdge, int]:
        return {
            DualEdge(int(a), int(b)): edge
            for edge, (a, b) in enumerate(self.dual_endpoints)
        }

    def dual_edge(self, edge: int) -> DualEdge:
        a, b = self.dual_endpoints[edge]
        return DualEdge(int(a), int(b))

    def primal_edge(self, dual: DualEdge) -> int:
        key = DualEdge(min(dual), max(dual))
        try:
            return self._dual_index[key]
        except KeyError:
            raise ValueError(
                f"{tuple(dual)} is not an edge of the dual lattice"
            ) from None

    def triangle_sites(self, dual_vertex: int) -> tuple[int, int, int]:
        site, kind = divmod(dual_vertex, 2)
        if kind == UP:
            return site, self.offset(site, 1, 0), self.offset(site, 1, 1)
        return site, self.offset(site, 0, 1), self.offset(site, 1, 1)

    def triangles(self) -> Iterator[Triangle]:
        """Yield all ``2N`` elementary triangles with signed boundary edges."""

        for site in range(self.n_sites):
            right = self.offset(site, 1, 0)
            above = self.offset(site, 0, 1)
            yield Triangle(
                dual_vertex=2 * site + UP,
                sites=self.triangle_sites(2 * site + UP),
                edges=(3 * site, 3 * right + 1, 3 * site + 2),
                signs=(1, 1, -1),
            )
            yield Triangle(
                dual_vertex=2 * site + DOWN,
                sites=self.triangle_sites(2 * site + DOWN),
                edges=(3 * site + 1, 3 * above, 3 * site + 2),
                signs=(1, 1, -1),
            )

    def wrap_edges(self) -> frozenset[DualEdge]:
        """Dual edges crossing the torus seams (the two seam loops)."""

        return frozenset(
            self.dual_edge(int(edge)) for edge in np.flatnonzero(self.wrap_mask)
        )

    # Graph views -------------------------------------------------------

    @cached_property
    def graph(self) -> nx.Graph:
        """Primal lattice as a networkx graph over site indices."""

        g = nx.Graph()
        g.add_nodes_from(range(self.n_sites))
        g.add_edges_from(zip(self.edge_tails.tolist(), self.edge_heads.tolist()))
        return g

    @cached_property
    def dual_graph(self) -> nx.Graph:
        """Hexagonal dual as a networkx graph; each edge stores its ``primal`` id."""

        g = nx.Graph()
        g.add_nodes_from(range(self.n_dual_vertices))
        for edge, (a, b) in enumerate(self.dual_endpoints.tolist()):
            g.add_edge(a, b, primal=edge)
        return g

    # Spirals -----------------------------------------------------------

    def ring_sites(self, center: Site, k: int) -> list[Site]:
        """Sites at hexagonal distance ``k`` from ``center`` in spiral order.

        The ring starts at the first non-corner site of the east side and
        ends on the east corner, so that each prefix of a spiral keeps the
        minimum perimeter.
        """

        if k == 0:
            return [self.wrap(*center)]
        sites: list[Site] = []
        for i in range(6):
            cx, cy = CCW_OFFSETS[i]
            sx, sy = CCW_OFFSETS[(i + 2) % 6]
            for j in range(1, k + 1):
                sites.append(
                    self.wrap(center.x + k * cx + j * sx, center.y + k * cy + j * sy)
                )
        return sites

    def spiral_sites(self, center: Site, m: int) -> list[Site]:
        """The first ``m`` sites of the hexagonal spiral grown around ``center``."""

        if m < 0:
            raise ValueError("spiral size must be non-negative")
        sites: list[Site] = []
        k = 0
        while len(sites) < m:
            sites.extend(self.ring_sites(center, k))
            k += 1
        if 2 * (k - 1) + 1 > self.side:
            raise ValueError(
                f"a spiral of {m} sites wraps a {self.side}x{self.side} torus"
            )
        return sites[:m]


@lru_cache(maxsize=32)
def get_geometry(side: int) -> LatticeGeometry:
    """Return a shared geometry; instances are immutable."""

    return LatticeGeometry(side)


def neighbors(g: LatticeGeometry, v: Site) -> list[Site]:
    """Module-level alias for :meth:`LatticeGeometry.neighbors`."""

    return g.neighbors(v)


def canonical_direction(g: LatticeGeometry, u: Site, v: Site) -> tuple[Site, Site]:
    return g.canonical_direction(u, v)


def dual_edge(g: LatticeGeometry, u: Site, v: Site) -> DualEdge:
    return g.dual_edge(g.edge_id(u, v))


def primal_edge(g: LatticeGeometry, d: DualEdge) -> tuple[Site, Site]:
    """Inverse of :func:`dual_edge`, returned in canonical direction."""

    tail, head = g.edge_endpoints(g.primal_edge(d))
    return g.site(tail), g.site(head)
