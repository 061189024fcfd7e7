"""Bridge systems certifying aggregation regions in the general setting.

Empty sites take part as a colour of their own (``-1``), so the heterogeneous
edges of a configuration are the edges whose endpoints carry different values
of ``theta``.  Their dual edges split into complex contours.  A bridge system
collects contours into ``I``, links them to the torus seams with bridges ``B``
and assigns every region cut out by ``I`` an orientation ``Theta``.

Construction works on boolean masks over primal edge ids and uses
``scipy.sparse.csgraph`` for the repeated component labelling.  The checker in
:func:`check_bridge_system` re-derives everything with networkx.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import networkx as nx
import numpy as np
import numpy.typing as npt
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .configuration import Configuration
from .lattice import DualEdge, LatticeGeometry, Site

LOGGER = logging.getLogger(__name__)

IntArray = npt.NDArray[np.int64]
BoolArray = npt.NDArray[np.bool_]


@dataclass(frozen=True, eq=False)
class BridgeSystem:
    """A triple ``(B, I, Theta)`` stored as masks over primal edge ids."""

    geometry: LatticeGeometry
    delta: float
    bridge_mask: BoolArray
    contour_mask: BoolArray
    theta: IntArray
    regions: IntArray

    @property
    def B(self) -> frozenset[DualEdge]:  # noqa: N802
        return _dual_set(self.geometry, self.bridge_mask)

    @property
    def I(self) -> frozenset[DualEdge]:  # noqa: N802, E743
        return _dual_set(self.geometry, self.contour_mask)

    @property
    def Theta(self) -> dict[Site, int]:  # noqa: N802
        return {self.geometry.site(i): int(v) for i, v in enumerate(self.theta)}

    @property
    def n_bridges(self) -> int:
        return int(np.count_nonzero(self.bridge_mask))

    @property
    def n_contour_edges(self) -> int:
        return int(np.count_nonzero(self.contour_mask))


def _dual_set(g: LatticeGeometry, mask: BoolArray) -> frozenset[DualEdge]:
    return frozenset(g.dual_edge(int(e)) for e in np.flatnonzero(mask))


def _label(n_nodes: int, rows: IntArray, cols: IntArray) -> IntArray:
    data = np.ones(rows.size, dtype=np.int8)
    graph = coo_matrix((data, (rows, cols)), shape=(n_nodes, n_nodes))
    _, labels = connected_components(graph, directed=False)
    return labels.astype(np.int64)


def heterogeneous_mask(sigma: Configuration) -> BoolArray:
    """Edges whose endpoints differ, counting an empty site as value ``-1``."""

    g = sigma.geometry
    return sigma.theta[g.edge_tails] != sigma.theta[g.edge_heads]


def monochromatic_clusters(sigma: Configuration) -> IntArray:
    g = sigma.geometry
    same = ~heterogeneous_mask(sigma)
    return _label(g.n_sites, g.edge_tails[same], g.edge_heads[same])


def region_labels(g: LatticeGeometry, cut: BoolArray) -> IntArray:
    """Components of the primal lattice after deleting the edges in ``cut``."""

    keep = ~cut
    return _label(g.n_sites, g.edge_tails[keep], g.edge_heads[keep])


def complex_contours(sigma: Configuration) -> list[frozenset[DualEdge]]:
    """Edge sets of the complex contours of ``sigma``, largest first."""

    g = sigma.geometry
    hetero = heterogeneous_mask(sigma)
    labels = _contour_labels(g, hetero)
    edges = np.flatnonzero(hetero)
    owners = labels[g.dual_endpoints[edges, 0]]
    contours = [
        frozenset(g.dual_edge(int(e)) for e in edges[owners == owner])
        for owner in np.unique(owners)
    ]
    return sorted(contours, key=lambda c: (-len(c), min(c)))


def _contour_labels(g: LatticeGeometry, hetero: BoolArray) -> IntArray:
    ends = g.dual_endpoints[hetero]
    return _label(g.n_dual_vertices, ends[:, 0], ends[:, 1])


def _bridged_sites(
    g: LatticeGeometry, clusters: IntArray, anchors: BoolArray
) -> BoolArray:
    anchor_sites = np.concatenate((g.edge_tails[anchors], g.edge_heads[anchors]))
    return np.isin(clusters, np.unique(clusters[anchor_sites]))


def _region_orientations(
    sigma: Configuration, regions: IntArray, bridged: BoolArray
) -> IntArray:
    width = sigma.q + 1
    n_regions = int(regions.max()) + 1
    codes = regions[bridged] * width + sigma.theta[bridged] + 1
    counts = np.bincount(codes, minlength=n_regions * width).reshape(n_regions, width)
    return (counts.argmax(axis=1) - 1).astype(np.int64)


def construct_bridge_system(
    sigma: Configuration, delta: float, *, max_passes: int | None = None
) -> BridgeSystem:
    """Build a ``delta``-bridge system for ``sigma`` column by column.

    ``I`` starts as every complex contour touching the seams.  While some
    region has more than ``delta * |R|`` unbridged particles, the first column
    of that region with more than ``delta * |R_x|`` of them gets rightward
    bridges from each of its bridged sites, and every contour those bridges
    touch moves into ``I``.  A site counts as bridged when a monochromatic
    path joins it to an endpoint of an edge of ``I`` or of the seams.

    Raises:
        ValueError: If ``delta`` is outside ``(0, 1)``.
        RuntimeError: If a pass bridges no new site or the pass limit is hit.
    """

    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta!r}")
    g = sigma.geometry
    limit = max_passes if max_passes is not None else g.n_sites
    hetero = heterogeneous_mask(sigma)
    dual_labels = _contour_labels(g, hetero)
    on_contour = np.zeros(g.n_dual_vertices, dtype=np.bool_)
    on_contour[g.dual_endpoints[hetero].ravel()] = True
    edge_owner = np.where(hetero, dual_labels[g.dual_endpoints[:, 0]], -1)
    absorbed = np.zeros(g.n_dual_vertices, dtype=np.bool_)
    clusters = monochromatic_clusters(sigma)
    occupied = sigma.theta >= 0
    columns = np.arange(g.n_sites) % g.side

    contour_mask = np.zeros(g.n_edges, dtype=np.bool_)
    bridge_mask = np.zeros(g.n_edges, dtype=np.bool_)

    def absorb(edges: IntArray) -> None:
        vertices = g.dual_endpoints[edges].ravel()
        owners = np.unique(dual_labels[vertices[on_contour[vertices]]])
        fresh = owners[~absorbed[owners]]
        if fresh.size:
            absorbed[fresh] = True
            contour_mask[np.isin(edge_owner, fresh)] = True

    absorb(np.flatnonzero(g.wrap_mask))
    passes = 0
    previous = -1
    while True:
        bridged = _bridged_sites(g, clusters, contour_mask | g.wrap_mask)
        regions = region_labels(g, contour_mask)
        loose = occupied & ~bridged
        sizes = np.bincount(regions)
        counts = np.bincount(regions, weights=loose, minlength=sizes.size)
        crowded = np.flatnonzero(counts > delta * sizes)
        if crowded.size == 0:
            break
        done = int(np.count_nonzero(bridged))
        if done <= previous:
            raise RuntimeError("bridging pass made no progress")
        if passes >= limit:
            raise RuntimeError(f"bridging did not finish within {limit} passes")
        previous = done
        passes += 1
        inside = regions == crowded[0]
        column = np.zeros_like(inside)
        for x in range(g.side):
            column = inside & (columns == x)
            size = int(np.count_nonzero(column))
            if size and np.count_nonzero(column & loose) > delta * size:
                break
        anchors = np.flatnonzero(column & bridged)
        candidates = np.concatenate((3 * anchors, 3 * anchors + 2))
        fresh = candidates[~contour_mask[candidates] & ~bridge_mask[candidates]]
        bridge_mask[fresh] = True
        absorb(candidates)
        LOGGER.debug(
            "pass %d: region %d column %d, %d new bridges, |I|=%d",
            passes,
            int(crowded[0]),
            x,
            fresh.size,
            int(np.count_nonzero(contour_mask)),
        )

    bridge_mask &= ~contour_mask
    orientations = _region_orientations(sigma, regions, bridged)
    LOGGER.debug(
        "bridge system after %d passes: |B|=%d |I|=%d regions=%d",
        passes,
        int(np.count_nonzero(bridge_mask)),
        int(np.count_nonzero(contour_mask)),
        orientations.size,
    )
    return BridgeSystem(
        geometry=g,
        delta=delta,
        bridge_mask=bridge_mask,
        contour_mask=contour_mask,
        theta=orientations[regions],
        regions=regions,
    )


def check_bridge_system(sigma: Configuration, system: BridgeSystem) -> list[str]:
    """Return every violated bridge-system condition (empty when valid).

    Checks the structural conditions on ``(B, I, Theta)`` and the conditions
    tying it to ``sigma``, recomputing contours, regions and bridged sites
    with networkx.
    """

    g = sigma.geometry
    problems: list[str] = []
    contour_edges = system.I
    bridges = system.B
    wrap = g.wrap_edges()

    contour_graph = nx.Graph(list(contour_edges))
    low = [v for v, d in contour_graph.degree() if d < 2]
    if low:
        problems.append(f"I has {len(low)} vertices of degree below 2")

    network = nx.Graph(list(bridges | contour_edges | wrap))
    if not nx.is_connected(network):
        problems.append("B + I + E_wrap is not connected")
    low = [v for v, d in network.degree() if d < 2]
    if low:
        problems.append(f"B + I + E_wrap has {len(low)} vertices of degree below 2")

    if bridges & contour_edges:
        problems.append("B and I overlap")
    bound = (1.0 - system.delta) / (2.0 * system.delta) * len(contour_edges)
    if len(bridges) > bound + 1e-9:
        problems.append(f"|B|={len(bridges)} exceeds {bound:.3f}")

    theta = sigma.theta
    for edge in range(g.n_edges):
        u, v = g.edge_endpoints(edge)
        equal = system.theta[u] == system.theta[v]
        if equal == (g.dual_edge(edge) in contour_edges):
            problems.append(f"Theta disagrees with I on edge {edge}")
            break

    cut = {g.edge_endpoints(g.primal_edge(d)) for d in contour_edges}
    anchors = {
        s for d in contour_edges | wrap for s in g.edge_endpoints(g.primal_edge(d))
    }
    same = nx.Graph()
    same.add_nodes_from(range(g.n_sites))
    same.add_edges_from(
        (u, v) for u, v in g.graph.edges() if theta[u] == theta[v]
    )
    bridged: set[int] = set()
    for component in nx.connected_components(same):
        if component & anchors:
            bridged |= component

    pieces = nx.Graph()
    pieces.add_nodes_from(range(g.n_sites))
    pieces.add_edges_from(
        (u, v) for u, v in g.graph.edges() if (u, v) not in cut and (v, u) not in cut
    )
    for region in nx.connected_components(pieces):
        loose = sum(1 for s in region if theta[s] >= 0 and s not in bridged)
        if loose > system.delta * len(region) + 1e-9:
            problems.append(
                f"region of {len(region)} sites has {loose} unbridged particles"
            )
        values = {int(system.theta[s]) for s in region}
        if len(values) != 1:
            problems.append("Theta is not constant on a region")
            continue
        value = values.pop()
        if not any(s in bridged and int(theta[s]) == value for s in region):
            problems.append(f"region value {value} matches no bridged site")

    touched = {v for d in bridges | contour_edges | wrap for v in d}
    for contour in complex_contours(sigma):
        if contour <= contour_edges:
            continue
        if any(v in touched for d in contour for v in d):
            problems.append("an unbridged contour meets B + I + E_wrap")
    return problems
