from __future__ import annotations

import re
from typing import Any

from sops_workbench.configuration import Model, to_snapshot
from sops_workbench.render import PALETTE, orientation_color, render_svg, site_position


def _ensure(condition: bool, message: str) -> None:
    """Raise ``AssertionError`` with ``message`` when ``condition`` is ``False``."""

    if not condition:
        raise AssertionError(message)


def test_render_draws_one_circle_per_particle(hexagon: Any) -> None:
    """Particles are coloured by orientation; the hash comment is optional."""

    payload = to_snapshot(
        hexagon.configuration,
        model=Model.POTTS,
        step=0,
        seed=0,
        metadata={"config_hash": "abc123"},
    )
    svg = render_svg(payload)
    _ensure(svg.count("<circle") == 7, "seven particles")
    fills = set(re.findall(r'fill="(#[0-9a-f]{6})"', svg))
    _ensure(fills == set(PALETTE[:3]), f"three orientation colours, got {fills}")
    _ensure("<!-- config_hash: abc123 -->" in svg, "hash comment is embedded")
    _ensure(svg == render_svg(payload), "rendering is deterministic")

    bare = render_svg(
        to_snapshot(hexagon.configuration, model=Model.POTTS, step=0, seed=0)
    )
    _ensure("config_hash" not in bare, "no metadata, no comment")


def test_grid_skips_seam_edges(torus: Any) -> None:
    """Only edges that do not wrap around the torus are drawn."""

    payload = {
        "format_version": 1,
        "L": torus.side,
        "q": 2,
        "setting": "general",
        "model": "potts",
        "step": 0,
        "seed": 0,
        "particles": [{"x": 0, "y": 0, "theta": 1}],
    }
    svg = render_svg(payload, scale=10.0)
    drawn = svg.count("<line")
    _ensure(drawn == torus.n_edges - (4 * torus.side - 1), f"drew {drawn} edges")


def test_layout_helpers() -> None:
    """Neighbouring sites are one edge length apart; large ``q`` uses hues."""

    x1, y1 = site_position(0, 0, 5, 10.0)
    x2, y2 = site_position(1, 0, 5, 10.0)
    x3, y3 = site_position(0, 1, 5, 10.0)
    _ensure(abs(((x2 - x1) ** 2 + (y2 - y1) ** 2) ** 0.5 - 10.0) < 1e-9, "x edge")
    _ensure(abs(((x3 - x1) ** 2 + (y3 - y1) ** 2) ** 0.5 - 10.0) < 1e-9, "y edge")
    _ensure(orientation_color(11, 12).startswith("hsl("), "hue for many colours")
