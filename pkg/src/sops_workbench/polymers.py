"""Polymer representation of orientations inside a fixed boundary.

Inside a simply connected configuration whose boundary particles all point in
direction ``0``, the orientation differences along canonical edge directions
form a labelling that sums to zero around every triangle.  Components of its
nonzero support are polymers.  This module encodes and decodes that
representation, weighs polymers, counts them, and checks the partition
function identity by brute force.
"""

from __future__ import annotations

import itertools
import logging
import math
from collections import Counter
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass
from functools import lru_cache

import networkx as nx
import numpy as np

from .configuration import (
    Configuration,
    ConfigurationError,
    Model,
    Setting,
    is_simply_connected,
    perimeter,
)
from .dynamics import ChainParams, log_weight
from .lattice import LatticeGeometry, Site, get_geometry
from .observables import p_min_exact

LOGGER = logging.getLogger(__name__)

MAX_ENUMERATED_SIZE = 12
MAX_INTERIOR_SITES = 12


class EnumerationBudgetError(ValueError):
    """Raised when an exhaustive enumeration would exceed its budget."""


@dataclass(frozen=True)
class PolymerLabeling:
    """Nonzero labels on primal edge ids, sorted by edge id."""

    edges: tuple[int, ...]
    labels: tuple[int, ...]

    @classmethod
    def from_mapping(cls, labels: dict[int, int]) -> PolymerLabeling:
        items = sorted((e, v) for e, v in labels.items() if v)
        return cls(tuple(e for e, _ in items), tuple(v for _, v in items))

    @property
    def size(self) -> int:
        return len(self.edges)

    def as_dict(self) -> dict[int, int]:
        return dict(zip(self.edges, self.labels))

    def vertices(self, g: LatticeGeometry) -> frozenset[int]:
        return frozenset(s for e in self.edges for s in g.edge_endpoints(e))


@dataclass(frozen=True)
class PolymerConfiguration:
    polymers: tuple[PolymerLabeling, ...]

    def labels(self) -> dict[int, int]:
        merged: dict[int, int] = {}
        for polymer in self.polymers:
            merged.update(polymer.as_dict())
        return merged


def is_consistent(g: LatticeGeometry, labels: dict[int, int], q: int) -> bool:
    """Zero signed flow modulo ``q`` around every elementary triangle."""

    touched = {v for e in labels for v in (int(x) for x in g.dual_endpoints[e])}
    for triangle in g.triangles():
        if triangle.dual_vertex not in touched:
            continue
        flow = sum(s * labels.get(e, 0) for e, s in zip(triangle.edges, triangle.signs))
        if flow % q:
            return False
    return True


def compatible(
    g: LatticeGeometry, first: PolymerLabeling, second: PolymerLabeling
) -> bool:
    """Polymers are compatible when no support edges share an endpoint."""

    return not first.vertices(g) & second.vertices(g)


def polymer_log_weight(
    polymer: PolymerLabeling, gamma: float, q: int, model: Model = Model.POTTS
) -> float:
    if Model(model) is Model.POTTS:
        return -polymer.size * math.log(gamma)
    return sum(
        (math.cos(2.0 * math.pi * label / q) - 1.0) * math.log(gamma)
        for label in polymer.labels
    )


def configuration_log_weight(
    polymers: PolymerConfiguration, gamma: float, q: int, model: Model = Model.POTTS
) -> float:
    return sum(polymer_log_weight(p, gamma, q, model) for p in polymers.polymers)


def boundary_sites(sigma: Configuration) -> frozenset[int]:
    """Occupied sites with at least one empty neighbour."""

    nbr = sigma.geometry.neighbor_table
    occupied = sigma.theta >= 0
    touching = occupied & ~np.all(occupied[nbr], axis=1)
    return frozenset(int(i) for i in np.flatnonzero(touching))


def _support_components(
    g: LatticeGeometry, labels: dict[int, int]
) -> list[list[int]]:
    graph = nx.Graph()
    for edge in labels:
        tail, head = g.edge_endpoints(edge)
        graph.add_edge(tail, head, edge=edge)
    components = []
    for sites in nx.connected_components(graph):
        sub = graph.subgraph(sites)
        components.append(sorted(d["edge"] for _, _, d in sub.edges(data=True)))
    return sorted(components)


def encode_polymers(sigma: Configuration) -> PolymerConfiguration:
    """Split the orientation differences of ``sigma`` into polymers.

    Raises:
        ConfigurationError: If ``sigma`` is not simply connected or a boundary
            particle has a nonzero orientation.
    """

    if not is_simply_connected(sigma):
        raise ConfigurationError(
            "polymer encoding needs a simply connected configuration"
        )
    rim = boundary_sites(sigma)
    if any(sigma.theta[s] != 0 for s in rim):
        raise ConfigurationError("boundary particles must have orientation 0")
    g = sigma.geometry
    theta = sigma.theta
    tails, heads = g.edge_tails, g.edge_heads
    inner = (theta[tails] >= 0) & (theta[heads] >= 0)
    diffs = (theta[heads] - theta[tails]) % sigma.q
    support = np.flatnonzero(inner & (diffs != 0))
    labels = {int(e): int(diffs[e]) for e in support}
    polymers = tuple(
        PolymerLabeling(tuple(edges), tuple(labels[e] for e in edges))
        for edges in _support_components(g, labels)
    )
    return PolymerConfiguration(polymers)


def decode_polymers(
    template: Configuration, polymers: PolymerConfiguration
) -> Configuration:
    """Rebuild orientations on ``template``'s occupancy from its polymers.

    Boundary particles get orientation 0 and every other particle is reached
    by adding labels along occupied edges.
    """

    g = template.geometry
    q = template.q
    labels = polymers.labels()
    theta = np.where(template.theta >= 0, -2, -1).astype(np.int64)
    rim = sorted(boundary_sites(template))
    if not rim:
        raise ConfigurationError("template has no boundary particles")
    graph = g.graph.subgraph(np.flatnonzero(template.theta >= 0).tolist())
    for site in rim:
        theta[site] = 0
    for tail, head in nx.bfs_edges(graph, source=rim[0]):
        if theta[head] != -2:
            continue
        edge = g.edge_id(g.site(tail), g.site(head))
        label = labels.get(edge, 0)
        if g.edge_endpoints(edge)[0] == tail:
            theta[head] = (theta[tail] + label) % q
        else:
            theta[head] = (theta[tail] - label) % q
    decoded = template.copy()
    decoded.theta[:] = theta
    return decoded


# Counting ----------------------------------------------------------------


def _hex_distance(dx: int, dy: int) -> int:
    return max(abs(dx), abs(dy), abs(dx - dy))


def largest_potential_support(m: int) -> int:
    """Largest ``k`` whose minimum boundary fits in ``m`` edges."""

    k = 1
    while 2 * p_min_exact(k + 1) + 6 <= m:
        k += 1
    return k


@lru_cache(maxsize=16)
def _polymer_size_counts(max_m: int, q: int) -> dict[int, int]:
    """Number of polymers through a fixed site, by support size up to ``max_m``.

    Walking over connected edge sets and testing the triangle flow of every
    labelling gives the same counts as walking over potentials.  A labelling
    with zero flow around every triangle of the plane is the gradient modulo
    ``q`` of a site potential, unique once it vanishes far away, so each
    polymer is the gradient support of exactly one potential with finite
    nonzero set ``U``.  Every edge leaving ``U`` carries a nonzero label, so
    ``2 p_min(|U|) + 6 <= m`` bounds ``|U|`` and the search is finite.  Pieces
    of ``U`` more than two steps apart give supports with no shared vertex,
    which are not connected and are skipped.
    """

    k_max = largest_potential_support(max_m)
    radius = 1 + 2 * (k_max - 1)
    g = get_geometry(2 * (radius + 2) + 2)
    centre = g.index(Site(g.side // 2, g.side // 2))
    cx, cy = centre % g.side, centre // g.side
    window = [
        g.index(Site(cx + dx, cy + dy))
        for dy in range(-radius, radius + 1)
        for dx in range(-radius, radius + 1)
        if _hex_distance(dx, dy) <= radius
    ]
    coords = {s: (s % g.side, s // g.side) for s in window}
    near = {
        s for s in window if _hex_distance(coords[s][0] - cx, coords[s][1] - cy) <= 1
    }
    nbr = g.neighbor_table
    counts: Counter[int] = Counter()

    def linked(sites: Sequence[int]) -> bool:
        graph = nx.Graph()
        graph.add_nodes_from(sites)
        for a, b in itertools.combinations(sites, 2):
            (ax, ay), (bx, by) = coords[a], coords[b]
            if _hex_distance(ax - bx, ay - by) <= 2:
                graph.add_edge(a, b)
        return nx.is_connected(graph)

    for k in range(1, k_max + 1):
        for sites in itertools.combinations(window, k):
            if near.isdisjoint(sites) or not linked(sites):
                continue
            edges = sorted(
                {
                    g.edge_id(g.site(s), g.site(int(t)))
                    for s in sites
                    for t in nbr[s]
                }
            )
            for values in itertools.product(range(1, q), repeat=k):
                potential = dict(zip(sites, values))
                support = [
                    e
                    for e in edges
                    if potential.get(g.edge_endpoints(e)[0], 0)
                    != potential.get(g.edge_endpoints(e)[1], 0)
                ]
                if len(support) > max_m:
                    continue
                graph = nx.Graph(g.edge_endpoints(e) for e in support)
                if nx.is_connected(graph):
                    counts[len(support)] += 1
    return dict(counts)


def enumerate_polymers(m: int, q: int, v: Site | None = None) -> int:
    """Exact number of polymers with ``m`` support edges touching one site.

    The count is translation invariant, so ``v`` only documents the anchor.

    Raises:
        EnumerationBudgetError: If ``m`` exceeds the exhaustive budget.
    """

    if m > MAX_ENUMERATED_SIZE:
        raise EnumerationBudgetError(
            f"polymer enumeration is limited to m <= {MAX_ENUMERATED_SIZE}"
        )
    if q < 2:
        raise ValueError("q must be at least 2")
    if m < 6:
        return 0
    return _polymer_size_counts(MAX_ENUMERATED_SIZE, q).get(m, 0)


def polymer_count_bound(m: int, q: int) -> float:
    """Upper bound ``(6e(q-1))^m / 2`` on the number of polymers of size ``m``."""

    return (6.0 * math.e * (q - 1)) ** m / 2.0


# Partition identity ------------------------------------------------------


def _interior(template: Configuration) -> list[int]:
    rim = boundary_sites(template)
    return [int(s) for s in np.flatnonzero(template.theta >= 0) if int(s) not in rim]


def _interior_polymers(
    template: Configuration, interior: Sequence[int]
) -> Iterator[PolymerLabeling]:
    """Every polymer arising from a potential on ``interior`` sites."""

    g = template.geometry
    q = template.q
    occupied = template.theta >= 0
    for k in range(1, len(interior) + 1):
        for sites in itertools.combinations(interior, k):
            edges = sorted(
                {
                    g.edge_id(g.site(s), g.site(int(t)))
                    for s in sites
                    for t in g.neighbor_table[s]
                    if occupied[t]
                }
            )
            for values in itertools.product(range(1, q), repeat=k):
                potential = dict(zip(sites, values))
                labels: dict[int, int] = {}
                for e in edges:
                    tail, head = g.edge_endpoints(e)
                    diff = (potential.get(head, 0) - potential.get(tail, 0)) % q
                    if diff:
                        labels[e] = diff
                if len(_support_components(g, labels)) == 1:
                    yield PolymerLabeling.from_mapping(labels)


def _family_sum(
    weights: Sequence[float], vertices: Sequence[frozenset[int]]
) -> float:
    total = 0.0

    def extend(start: int, used: frozenset[int], product: float) -> None:
        nonlocal total
        total += product
        for j in range(start, len(weights)):
            if used.isdisjoint(vertices[j]):
                extend(j + 1, used | vertices[j], product * weights[j])

    extend(0, frozenset(), 1.0)
    return total


@dataclass(frozen=True)
class PartitionIdentity:
    particle_side: float
    polymer_side: float
    polymer_partition: float

    @property
    def relative_error(self) -> float:
        scale = max(abs(self.particle_side), abs(self.polymer_side))
        return abs(self.particle_side - self.polymer_side) / scale if scale else 0.0


def partition_identity(
    template: Configuration,
    lam: float,
    gamma: float,
    model: Model = Model.POTTS,
) -> PartitionIdentity:
    """Both sides of ``w(Omega_P) = (lam gamma)^(-|P|) * Xi_P`` on a fixed boundary.

    Raises:
        EnumerationBudgetError: If the boundary encloses too many interior sites.
    """

    interior = _interior(template)
    if len(interior) > MAX_INTERIOR_SITES:
        raise EnumerationBudgetError(
            f"{len(interior)} interior sites exceed the budget of {MAX_INTERIOR_SITES}"
        )
    q = template.q
    g = template.geometry
    params = ChainParams(
        q=q, lam=lam, gamma=gamma, model=model, setting=Setting.CONNECTED
    )
    base = template.copy()
    base.theta[base.theta >= 0] = 0
    if base.setting is not Setting.CONNECTED:
        base = Configuration.from_sites(
            g, base.occupied, None, q=q, setting=Setting.CONNECTED
        )
    particle_side = 0.0
    for values in itertools.product(range(q), repeat=len(interior)):
        sigma = base.copy()
        sigma.theta[interior] = values
        particle_side += math.exp(log_weight(sigma, params))

    polymers = list(_interior_polymers(base, interior))
    weights = [math.exp(polymer_log_weight(p, gamma, q, model)) for p in polymers]
    vertices = [p.vertices(g) for p in polymers]
    xi = _family_sum(weights, vertices)
    p = perimeter(base)
    polymer_side = math.exp(-p * (math.log(lam) + math.log(gamma))) * xi
    LOGGER.debug(
        "partition identity: %d interior sites, %d polymers, Xi=%g",
        len(interior),
        len(polymers),
        xi,
    )
    return PartitionIdentity(particle_side, polymer_side, xi)


def polymer_partition_identity_check(
    template: Configuration,
    lam: float,
    gamma: float,
    model: Model = Model.POTTS,
    *,
    tolerance: float = 1e-10,
) -> bool:
    return partition_identity(template, lam, gamma, model).relative_error <= tolerance


def interior_assignments(template: Configuration) -> Iterable[Configuration]:
    """Every configuration of ``Omega_P`` for ``template``'s boundary."""

    interior = _interior(template)
    if len(interior) > MAX_INTERIOR_SITES:
        raise EnumerationBudgetError(
            f"{len(interior)} interior sites exceed the budget of {MAX_INTERIOR_SITES}"
        )
    base = template.copy()
    base.theta[base.theta >= 0] = 0
    for values in itertools.product(range(template.q), repeat=len(interior)):
        sigma = base.copy()
        sigma.theta[interior] = values
        yield sigma
