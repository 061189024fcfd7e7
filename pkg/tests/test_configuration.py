from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any

import numpy as np
import pytest

from sops_workbench.configuration import (
    Configuration,
    ConfigurationError,
    InvalidMoveError,
    Model,
    PerimeterUndefinedError,
    ReorientMove,
    Setting,
    SpatialMove,
    boundary_stats,
    boundary_walk_length,
    clock_distance_sum,
    count_boundary_edges,
    count_heterogeneous,
    from_snapshot,
    is_simply_connected,
    local_delta,
    perimeter,
    read_snapshot,
    to_snapshot,
    write_snapshot,
)
from sops_workbench.dynamics import (
    ChainParams,
    acceptance_probability,
    is_valid_spatial,
    log_weight,
    propose,
)
from sops_workbench.lattice import LatticeGeometry, Site, get_geometry


def _ensure(condition: bool, message: str) -> None:
    """Raise ``AssertionError`` with ``message`` when ``condition`` is ``False``."""

    if not condition:
        raise AssertionError(message)


def test_hexagon_statistics(hexagon: Any) -> None:
    """The seven-particle hexagon has 18 boundary edges and perimeter six."""

    sigma = hexagon.configuration
    stats = boundary_stats(sigma)
    _ensure(stats.a == 18, f"expected a=18, got {stats.a}")
    _ensure(stats.h == 10, f"expected h=10, got {stats.h}")
    _ensure(stats.p == 6, f"expected p=6, got {stats.p}")
    _ensure(perimeter(sigma) == 6, "perimeter should match boundary stats")


def test_line_has_maximum_perimeter(torus: LatticeGeometry) -> None:
    """A line of ``n`` particles has ``4n + 2`` boundary edges."""

    for n in range(1, 8):
        sigma = Configuration.line(torus, n, q=2)
        _ensure(count_boundary_edges(sigma) == 4 * n + 2, f"line of {n}: wrong a")
        _ensure(perimeter(sigma) == 2 * n - 2, f"line of {n}: wrong perimeter")


def test_boundary_walk_matches_perimeter(
    hexagon: Any, torus: LatticeGeometry
) -> None:
    """Walking around the outside visits ``p`` edges."""

    _ensure(boundary_walk_length(hexagon.configuration) == 6, "hexagon walk")
    line = Configuration.line(torus, 5, q=2)
    _ensure(boundary_walk_length(line) == perimeter(line), "line walk")


def test_hole_breaks_simple_connectivity(hexagon: Any) -> None:
    """A ring around an empty site is connected but not simply connected."""

    g = hexagon.geometry
    ring = g.ring_sites(hexagon.center, 1)
    sigma = Configuration.from_sites(g, ring, q=2)
    _ensure(not is_simply_connected(sigma), "ring encloses a hole")
    with pytest.raises(PerimeterUndefinedError):
        perimeter(sigma)
    with pytest.raises(ConfigurationError, match="simply connected"):
        Configuration.from_sites(g, ring, q=2, setting=Setting.CONNECTED)


def test_from_sites_rejects_bad_input(torus: LatticeGeometry) -> None:
    """Duplicates, out-of-range orientations and mismatched lengths fail."""

    with pytest.raises(ConfigurationError, match="distinct"):
        Configuration.from_sites(torus, [Site(0, 0), Site(0, 0)], q=2)
    with pytest.raises(ConfigurationError, match="orientation"):
        Configuration.from_sites(torus, [Site(0, 0)], [2], q=2)
    with pytest.raises(ConfigurationError, match="orientations for"):
        Configuration.from_sites(torus, [Site(0, 0)], [0, 1], q=2)
    with pytest.raises(ConfigurationError, match="outside"):
        Configuration.from_sites(torus, [Site(9, 0)], q=2)


def test_clock_distance_sum_uses_cosine(torus: LatticeGeometry) -> None:
    """Adjacent orientations a quarter turn apart contribute one unit."""

    pair = Configuration.from_sites(torus, [Site(0, 0), Site(1, 0)], [0, 1], q=4)
    _ensure(math.isclose(clock_distance_sum(pair), 1.0), "quarter turn costs 1")
    opposite = Configuration.from_sites(torus, [Site(0, 0), Site(1, 0)], [0, 2], q=4)
    _ensure(math.isclose(clock_distance_sum(opposite), 2.0), "half turn costs 2")


def test_global_shift_preserves_statistics(hexagon: Any) -> None:
    """Rotating every orientation leaves ``a``, ``h`` and ``d`` unchanged."""

    sigma = hexagon.configuration
    shifted = sigma.shifted(1)
    _ensure(shifted != sigma, "shift should change the orientations")
    _ensure(boundary_stats(shifted) == boundary_stats(sigma), "statistics changed")


def _check_local_deltas(setting: Setting, model: Model, moves: int, seed: int) -> int:
    """Walk through ``moves`` proposals comparing local deltas with recomputation.

    Returns the number of valid moves that were applied and checked.
    """

    rng = np.random.default_rng(seed)
    params = ChainParams(q=3, lam=1.7, gamma=2.3, model=model, setting=setting)
    if setting is Setting.CONNECTED:
        g = get_geometry(10)
        thetas = [int(t) for t in rng.integers(0, 3, size=10)]
        sigma = Configuration.spiral(g, 10, thetas, q=3, setting=setting)
    else:
        g = get_geometry(6)
        sigma = Configuration.uniform_random(g, 14, rng, q=3)
    checked = 0
    for _ in range(moves):
        move = propose(sigma, rng)
        if isinstance(move, SpatialMove):
            if sigma.is_occupied(move.target):
                with pytest.raises(InvalidMoveError, match="occupied"):
                    local_delta(sigma, move)
                continue
            if setting is Setting.CONNECTED and not is_valid_spatial(
                sigma, move.source, move.target
            ):
                continue
        before = (
            count_boundary_edges(sigma),
            count_heterogeneous(sigma),
            clock_distance_sum(sigma),
        )
        p_before = perimeter(sigma) if setting is Setting.CONNECTED else None
        weight_before = log_weight(sigma, params)
        delta = local_delta(sigma, move)
        accept = acceptance_probability(sigma, move, params)
        sigma.apply(move)
        _ensure(count_boundary_edges(sigma) - before[0] == delta.da, f"da for {move}")
        _ensure(count_heterogeneous(sigma) - before[1] == delta.dh, f"dh for {move}")
        _ensure(
            math.isclose(clock_distance_sum(sigma) - before[2], delta.dd, abs_tol=1e-9),
            f"dd for {move}",
        )
        if p_before is None:
            _ensure(delta.dp is None, "general setting has no perimeter delta")
        else:
            _ensure(perimeter(sigma) - p_before == delta.dp, f"dp for {move}")
        ratio = math.exp(log_weight(sigma, params) - weight_before)
        _ensure(
            math.isclose(accept, min(1.0, ratio), rel_tol=1e-9),
            f"acceptance for {move}: {accept} vs {ratio}",
        )
        checked += 1
    return checked


@pytest.mark.parametrize("model", [Model.POTTS, Model.CLOCK])
@pytest.mark.parametrize("setting", [Setting.GENERAL, Setting.CONNECTED])
def test_local_delta_matches_recomputation(setting: Setting, model: Model) -> None:
    """Deltas from the neighbourhood equal the change in global statistics."""

    checked = _check_local_deltas(setting, model, 600, seed=7)
    _ensure(checked > 100, f"only {checked} moves were checked")


@pytest.mark.slow
@pytest.mark.parametrize("model", [Model.POTTS, Model.CLOCK])
@pytest.mark.parametrize("setting", [Setting.GENERAL, Setting.CONNECTED])
def test_local_delta_matches_recomputation_long_walk(
    setting: Setting, model: Model
) -> None:
    """A hundred thousand proposals keep local and global statistics in step."""

    checked = _check_local_deltas(setting, model, 100_000, seed=19)
    _ensure(checked > 20_000, f"only {checked} moves were checked")


def test_bookkeeping_follows_spatial_moves(torus: LatticeGeometry) -> None:
    """``positions`` and ``slot`` stay inverse after a move."""

    sigma = Configuration.line(torus, 3, [0, 1, 0], q=2, setting=Setting.GENERAL)
    source = torus.site(int(sigma.positions[1]))
    target = Site(source.x, source.y + 1)
    sigma.apply(SpatialMove(source, target))
    for k, site in enumerate(sigma.positions):
        _ensure(sigma.slot[site] == k, f"slot of particle {k} is stale")
    _ensure(sigma.orientation[target] == 1, "orientation travels with the particle")
    _ensure(not sigma.is_occupied(source), "source must be empty after the move")


def test_snapshot_file_round_trip(hexagon: Any, tmp_path: Path) -> None:
    """Snapshots keep sites, orientations and metadata."""

    payload = to_snapshot(
        hexagon.configuration,
        model=Model.CLOCK,
        step=12,
        seed=3,
        metadata={"config_hash": "abc"},
    )
    path = tmp_path / "state.json"
    write_snapshot(path, payload)
    snapshot = read_snapshot(path)
    _ensure(snapshot.configuration == hexagon.configuration, "configuration changed")
    _ensure(snapshot.model is Model.CLOCK, "model lost")
    _ensure((snapshot.step, snapshot.seed) == (12, 3), "step or seed lost")
    _ensure(snapshot.metadata == {"config_hash": "abc"}, "metadata lost")
    first = json.loads(path.read_text(encoding="utf-8"))["particles"][0]
    _ensure(first == {"x": 3, "y": 3, "theta": 1}, f"particles sorted by site: {first}")


def test_snapshot_rejects_malformed_payloads(hexagon: Any) -> None:
    """Missing keys and wrong versions raise :class:`ConfigurationError`."""

    payload = to_snapshot(hexagon.configuration, model=Model.POTTS, step=0, seed=0)
    broken = dict(payload)
    del broken["particles"]
    with pytest.raises(ConfigurationError, match="malformed snapshot"):
        from_snapshot(broken)
    with pytest.raises(ConfigurationError, match="format_version"):
        from_snapshot({**payload, "format_version": 99})


def test_read_snapshot_rejects_invalid_json(tmp_path: Path) -> None:
    """Unparseable files report the path."""

    path = tmp_path / "broken.json"
    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(ConfigurationError, match="not valid JSON"):
        read_snapshot(path)
