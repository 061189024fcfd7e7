from __future__ import annotations

import numpy as np
import pytest

from sops_workbench.bridges import (
    check_bridge_system,
    complex_contours,
    construct_bridge_system,
    heterogeneous_mask,
    monochromatic_clusters,
)
from sops_workbench.configuration import Configuration
from sops_workbench.lattice import Site, get_geometry


def _ensure(condition: bool, message: str) -> None:
    """Raise ``AssertionError`` with ``message`` when ``condition`` is ``False``."""

    if not condition:
        raise AssertionError(message)


def _hexagon(theta: int = 0) -> Configuration:
    g = get_geometry(9)
    return Configuration.from_sites(
        g, g.spiral_sites(Site(4, 4), 19), [theta] * 19, q=2
    )


def test_empty_sites_count_as_a_colour() -> None:
    """Edges between a particle and an empty site are heterogeneous."""

    g = get_geometry(5)
    sigma = Configuration.from_sites(g, [Site(2, 2)], [0], q=2)
    hetero = heterogeneous_mask(sigma)
    _ensure(int(np.count_nonzero(hetero)) == 6, "a lone particle has six")
    clusters = monochromatic_clusters(sigma)
    _ensure(len(set(clusters.tolist())) == 2, "particle and empty sea")


def test_contours_of_separated_particles() -> None:
    """Two distant particles give two hexagonal contours of six dual edges."""

    g = get_geometry(7)
    sigma = Configuration.from_sites(g, [Site(1, 1), Site(4, 4)], [0, 1], q=2)
    sizes = [len(c) for c in complex_contours(sigma)]
    _ensure(sizes == [6, 6], f"unexpected contour sizes {sizes}")


def test_hexagon_contour_is_closed() -> None:
    """Every dual vertex of the hexagon's contour has degree two."""

    contours = complex_contours(_hexagon())
    _ensure([len(c) for c in contours] == [30], "one contour of thirty edges")
    degree: dict[int, int] = {}
    for edge in contours[0]:
        for vertex in edge:
            degree[vertex] = degree.get(vertex, 0) + 1
    _ensure(set(degree.values()) == {2}, "contour must be a cycle")


def test_bridge_system_for_hexagon_is_valid() -> None:
    """The constructed system satisfies every checked condition."""

    sigma = _hexagon(theta=1)
    system = construct_bridge_system(sigma, 0.1)
    problems = check_bridge_system(sigma, system)
    _ensure(problems == [], f"bridge system problems: {problems}")
    _ensure(system.n_contour_edges == 30, "I is the hexagon boundary")
    _ensure(system.n_bridges > 0, "the hexagon had to be bridged")
    inside = {site for site, value in system.Theta.items() if value == 1}
    _ensure(inside == sigma.occupied, "Theta marks the hexagon")


def test_dense_configuration_needs_no_bridges() -> None:
    """When every particle is already bridged, ``B`` stays empty."""

    g = get_geometry(5)
    sigma = Configuration.from_sites(
        g, [g.site(i) for i in range(g.n_sites)], [0] * g.n_sites, q=2
    )
    system = construct_bridge_system(sigma, 0.2)
    _ensure(system.n_bridges == 0 and system.n_contour_edges == 0, "nothing to do")
    _ensure(set(system.Theta.values()) == {0}, "the torus is one region")


def test_bridge_system_rejects_bad_delta() -> None:
    """``delta`` must lie strictly between zero and one."""

    with pytest.raises(ValueError, match="delta"):
        construct_bridge_system(_hexagon(), 0.0)


def _random_bridge_failures(trials: int, seed: int) -> list[str]:
    """Check systems built on random general configurations at three deltas."""

    rng = np.random.default_rng(seed)
    failures: list[str] = []
    for trial in range(trials):
        side = (8, 12)[trial % 2]
        g = get_geometry(side)
        rho = (0.1, 0.2, 0.3)[trial % 3]
        q = 2 + (trial // 6) % 2
        n = max(1, int(rho * g.n_sites))
        sigma = Configuration.uniform_random(g, n, rng, q=q)
        for delta in (0.1, 0.2, 0.3):
            problems = check_bridge_system(sigma, construct_bridge_system(sigma, delta))
            if problems:
                failures.append(f"trial {trial} L={side} delta={delta}: {problems}")
    return failures


def test_random_configurations_yield_valid_bridge_systems() -> None:
    """Systems built on random general configurations pass the checker."""

    failures = _random_bridge_failures(36, seed=5)
    _ensure(failures == [], "\n".join(failures))


@pytest.mark.slow
def test_thousand_random_configurations_yield_valid_bridge_systems() -> None:
    """A thousand random configurations pass at every delta."""

    failures = _random_bridge_failures(1_000, seed=23)
    _ensure(failures == [], "\n".join(failures[:10]))
