from __future__ import annotations

import networkx as nx
import pytest

from sops_workbench.lattice import (
    DualEdge,
    LatticeGeometry,
    Site,
    canonical_direction,
    dual_edge,
    get_geometry,
    neighbors,
    primal_edge,
)


def _ensure(condition: bool, message: str) -> None:
    """Raise ``AssertionError`` with ``message`` when ``condition`` is ``False``."""

    if not condition:
        raise AssertionError(message)


def test_rejects_small_tori() -> None:
    """Sides below three would make neighbour sets collide."""

    with pytest.raises(ValueError, match="at least 3"):
        LatticeGeometry(2)


def test_neighbors_follow_documented_order(torus: LatticeGeometry) -> None:
    """Neighbours come out in the fixed offset order and wrap at the seams."""

    found = neighbors(torus, Site(0, 0))
    expected = [Site(1, 0), Site(0, 1), Site(1, 1), Site(8, 0), Site(0, 8), Site(8, 8)]
    _ensure(found == expected, f"unexpected neighbours {found}")


def test_neighbor_relation_is_symmetric() -> None:
    """Every site appears among the neighbours of each of its neighbours."""

    g = get_geometry(5)
    for index in range(g.n_sites):
        v = g.site(index)
        for u in g.neighbors(v):
            _ensure(v in g.neighbors(u), f"{v} missing from neighbours of {u}")


def test_primal_graph_is_six_regular() -> None:
    """The torus has ``3N`` edges and every site has degree six."""

    g = get_geometry(4)
    graph = g.graph
    _ensure(graph.number_of_edges() == 3 * g.n_sites, "edge count should be 3N")
    _ensure(all(d == 6 for _, d in graph.degree()), "every site needs degree six")


def test_dual_graph_is_three_regular_and_connected(torus: LatticeGeometry) -> None:
    """The hexagonal dual has ``2N`` vertices of degree three."""

    dual = torus.dual_graph
    _ensure(dual.number_of_nodes() == 2 * torus.n_sites, "dual has 2N vertices")
    _ensure(all(d == 3 for _, d in dual.degree()), "dual is three-regular")
    _ensure(nx.is_connected(dual), "dual is connected")


def test_dual_edge_round_trips_through_primal_edge(torus: LatticeGeometry) -> None:
    """Crossing an edge and back recovers it in canonical direction."""

    for u in (Site(0, 0), Site(8, 8), Site(3, 5)):
        for v in torus.neighbors(u):
            d = dual_edge(torus, u, v)
            _ensure(isinstance(d, DualEdge) and d.a < d.b, "dual edges are sorted")
            tail, head = primal_edge(torus, d)
            _ensure({tail, head} == {u, v}, f"{d} did not map back to {u}-{v}")
            _ensure(
                (tail, head) == canonical_direction(torus, u, v),
                "primal_edge returns the canonical direction",
            )


def test_canonical_direction_ignores_argument_order(torus: LatticeGeometry) -> None:
    """Both orientations of an edge share one canonical direction."""

    u, v = Site(8, 3), Site(0, 3)
    _ensure(
        canonical_direction(torus, u, v) == canonical_direction(torus, v, u),
        "direction must not depend on argument order",
    )
    _ensure(canonical_direction(torus, u, v) == (u, v), "east offset owns the edge")


def test_triangle_boundaries_close_up(torus: LatticeGeometry) -> None:
    """Signed triangle edges walk a closed loop through the triangle's sites."""

    for triangle in torus.triangles():
        sites = set()
        for edge in triangle.edges:
            sites.update(torus.edge_endpoints(edge))
        _ensure(sites == set(triangle.sites), f"triangle {triangle} is not closed")


def test_wrap_edges_form_two_seams() -> None:
    """The seam edges cut the dual into a contractible piece."""

    g = get_geometry(5)
    seams = g.wrap_edges()
    _ensure(len(seams) == 4 * g.side - 1, f"unexpected seam size {len(seams)}")
    pruned = g.dual_graph.copy()
    pruned.remove_edges_from(seams)
    _ensure(nx.is_connected(pruned), "removing seams keeps the dual connected")


def test_spiral_prefixes_are_connected(torus: LatticeGeometry) -> None:
    """Every spiral prefix is a connected set of distinct sites."""

    sites = torus.spiral_sites(Site(4, 4), 19)
    _ensure(len(set(sites)) == 19, "spiral sites must be distinct")
    for m in range(1, 20):
        prefix = [torus.index(s) for s in sites[:m]]
        _ensure(nx.is_connected(torus.graph.subgraph(prefix)), f"prefix {m} split")


def test_spiral_refuses_to_wrap() -> None:
    """Spirals larger than the torus would overlap themselves."""

    with pytest.raises(ValueError, match="wraps"):
        get_geometry(3).spiral_sites(Site(1, 1), 8)
