"""SVG rendering of configuration snapshots."""

from __future__ import annotations

import math
from collections.abc import Mapping
from typing import Any

from .configuration import Snapshot, from_snapshot

__all__ = ["PALETTE", "orientation_color", "render_svg", "site_position"]

PALETTE = (
    "#1f77b4",
    "#ff7f0e",
    "#2ca02c",
    "#d62728",
    "#9467bd",
    "#8c564b",
    "#e377c2",
    "#7f7f7f",
    "#bcbd22",
    "#17becf",
)
GRID_COLOR = "#d9d9d9"
ROW_HEIGHT = math.sqrt(3.0) / 2.0


def orientation_color(theta: int, q: int) -> str:
    if q <= len(PALETTE):
        return PALETTE[theta]
    return f"hsl({360 * theta // q},65%,45%)"


def site_position(x: int, y: int, side: int, scale: float) -> tuple[float, float]:
    """Pixel centre of site ``(x, y)``; every lattice edge has length ``scale``."""

    margin = scale
    px = margin + (x - y / 2.0 + (side - 1) / 2.0) * scale
    py = margin + (side - 1 - y) * ROW_HEIGHT * scale
    return px, py


def _fmt(value: float) -> str:
    return f"{value:.3f}"


def render_svg(snapshot: Snapshot | Mapping[str, Any], *, scale: float = 20.0) -> str:
    """Draw the lattice and one circle per particle, coloured by orientation.

    Only edges that do not cross the torus seam are drawn.  Output depends on
    the snapshot alone.
    """

    if not isinstance(snapshot, Snapshot):
        snapshot = from_snapshot(snapshot)
    sigma = snapshot.configuration
    g = sigma.geometry
    side = g.side
    width = 2 * scale + (side - 1) * 1.5 * scale
    height = 2 * scale + (side - 1) * ROW_HEIGHT * scale
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        (
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(width)}" '
            f'height="{_fmt(height)}" viewBox="0 0 {_fmt(width)} {_fmt(height)}">'
        ),
    ]
    config_hash = snapshot.metadata.get("config_hash")
    if config_hash:
        lines.append(f"<!-- config_hash: {config_hash} -->")
    lines.append(f'<g class="grid" stroke="{GRID_COLOR}" stroke-width="1">')
    for edge in range(g.n_edges):
        if g.wrap_mask[edge]:
            continue
        tail, head = g.edge_endpoints(edge)
        x1, y1 = site_position(tail % side, tail // side, side, scale)
        x2, y2 = site_position(head % side, head // side, side, scale)
        lines.append(
            f'<line x1="{_fmt(x1)}" y1="{_fmt(y1)}" x2="{_fmt(x2)}" y2="{_fmt(y2)}"/>'
        )
    lines.append("</g>")
    lines.append('<g class="particles" stroke="#000000" stroke-width="1">')
    radius = 0.4 * scale
    for site, theta in sorted(sigma.orientation.items()):
        cx, cy = site_position(site.x, site.y, side, scale)
        lines.append(
            f'<circle class="particle" cx="{_fmt(cx)}" cy="{_fmt(cy)}" '
            f'r="{_fmt(radius)}" fill="{orientation_color(theta, sigma.q)}" '
            f'data-theta="{theta}"/>'
        )
    lines.append("</g>")
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
