from __future__ import annotations

import os
import sys
from collections.abc import Callable
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import pytest

PROJECT_ROOT = Path(__file__).resolve().parents[1]
SRC_DIR = PROJECT_ROOT / "src"
if str(SRC_DIR) not in sys.path:
    sys.path.insert(0, str(SRC_DIR))

from sops_workbench.configuration import Configuration, Setting  # noqa: E402
from sops_workbench.lattice import LatticeGeometry, Site, get_geometry  # noqa: E402


def pytest_addoption(parser: pytest.Parser) -> None:
    parser.addoption(
        "--runslow",
        action="store_true",
        default=False,
        help="Run statistical and enumeration checks marked as slow.",
    )


def pytest_collection_modifyitems(
    config: pytest.Config, items: list[pytest.Item]
) -> None:
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@dataclass(slots=True)
class Hexagon:
    """A seven-particle hexagon centred on a side-9 torus."""

    geometry: LatticeGeometry
    center: Site
    configuration: Configuration


@pytest.fixture
def torus() -> LatticeGeometry:
    """Return a shared side-9 geometry."""

    return get_geometry(9)


@pytest.fixture
def hexagon(torus: LatticeGeometry) -> Hexagon:
    """Seven particles (centre plus ring) with orientations ``0..6 mod 3``."""

    center = Site(4, 4)
    sites = torus.spiral_sites(center, 7)
    sigma = Configuration.from_sites(
        torus, sites, [i % 3 for i in range(7)], q=3, setting=Setting.CONNECTED
    )
    return Hexagon(geometry=torus, center=center, configuration=sigma)


@pytest.fixture
def sops_env(request: pytest.FixtureRequest) -> Callable[..., None]:
    """Return a helper that sets ``SOPS_*`` variables for one test."""

    original_env: dict[str, str | None] = {}

    def _setenv(**values: Any) -> None:
        for name, value in values.items():
            if name not in original_env:
                original_env[name] = os.environ.get(name)
            if value is None:
                os.environ.pop(name, None)
            else:
                os.environ[name] = str(value)

    def _cleanup() -> None:
        for key, value in original_env.items():
            if value is None:
                os.environ.pop(key, None)
            else:
                os.environ[key] = value

    request.addfinalizer(_cleanup)
    return _setenv
