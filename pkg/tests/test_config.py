from __future__ import annotations

from pathlib import Path
from typing import Any

import pytest

from sops_workbench.config import (
    ConfigError,
    Initial,
    load_run_config,
    load_sweep_config,
    log_level,
)
from sops_workbench.configuration import Model, Setting, to_snapshot, write_snapshot


def _ensure(condition: bool, message: str) -> None:
    """Raise ``AssertionError`` with ``message`` when ``condition`` is ``False``."""

    if not condition:
        raise AssertionError(message)


def _baseline_overrides() -> list[str]:
    """Return a minimal valid connected run."""

    return ["L=12", "n=10", "lambda=4.0", "gamma=2.0", "steps=1000"]


def _write_config(tmp_path: Path, body: str) -> Path:
    path = tmp_path / "run.ini"
    path.write_text(body, encoding="utf-8")
    return path


def test_load_run_config_accepts_valid_payload() -> None:
    """A complete override set yields a typed configuration with defaults."""

    config = load_run_config(env={}, overrides=_baseline_overrides())

    _ensure(config.setting is Setting.CONNECTED, "connected is the default setting")
    _ensure(config.model is Model.POTTS, "potts is the default model")
    _ensure((config.side, config.n, config.q) == (12, 10, 2), "sizes")
    _ensure(config.initial is Initial.LINE, "connected runs start from a line")
    _ensure(config.chain_params.gamma == 2.0, "gamma flows into the chain")
    _ensure(config.sample_interval == 1 and config.seed == 0, "defaults")


def test_file_environment_and_overrides_are_layered(tmp_path: Path) -> None:
    """Overrides beat the environment, which beats the file."""

    path = _write_config(
        tmp_path,
        "[run]\nsetting = general\nL = 20\nn = 30\nlambda = 2.0\nsteps = 10\n"
        "[classifiers]\nalpha = 1.5\n",
    )
    env = {"SOPS_LAMBDA": "3.0", "SOPS_STEPS": "50"}
    config = load_run_config(path, env=env, overrides=["steps=70"])

    _ensure(config.setting is Setting.GENERAL, "setting comes from the file")
    _ensure(config.lam == 3.0, f"environment lambda expected, got {config.lam}")
    _ensure(config.steps == 70, f"override steps expected, got {config.steps}")
    _ensure(config.classifiers.alpha == 1.5, "classifier section is read")
    _ensure(config.initial is Initial.UNIFORM_RANDOM, "general default start")
    _ensure(config.gamma is None, "general runs have no gamma")


def test_blank_environment_values_are_ignored() -> None:
    """Whitespace-only variables do not override anything."""

    config = load_run_config(env={"SOPS_Q": "   "}, overrides=_baseline_overrides())
    _ensure(config.q == 2, "blank SOPS_Q must fall back to the default")


def test_load_run_config_rejects_invalid_boolean_flag() -> None:
    """Non-boolean values for ``random_orientations`` raise an error."""

    overrides = [*_baseline_overrides(), "random_orientations=maybe"]
    with pytest.raises(ConfigError, match="boolean flag") as info:
        load_run_config(env={}, overrides=overrides)
    _ensure(info.value.field == "random_orientations", "field is reported")


def test_load_sweep_config_rejects_malformed_json() -> None:
    """Grid axes must be valid JSON arrays."""

    overrides = [*_baseline_overrides(), "lambdas=not-json"]
    with pytest.raises(ConfigError, match="valid JSON"):
        load_sweep_config(env={}, overrides=overrides)

    overrides = [*_baseline_overrides(), 'lambdas={"a": 1}']
    with pytest.raises(ConfigError, match="array"):
        load_sweep_config(env={}, overrides=overrides)


@pytest.mark.parametrize(
    ("override", "field"),
    [
        ("L=2", "L"),
        ("n=0", "n"),
        ("q=1", "q"),
        ("lambda=-1", "lambda"),
        ("lambda=nan", "lambda"),
        ("gamma=0", "gamma"),
        ("steps=-5", "steps"),
        ("sample_interval=0", "sample_interval"),
        ("seed=-1", "seed"),
        ("n=12", "n"),
        ("initial=uniform_random", "initial"),
        ("model=ising", "model"),
        ("steps=many", "steps"),
    ],
)
def test_invalid_values_name_their_field(override: str, field: str) -> None:
    """Each validation failure names the offending key."""

    with pytest.raises(ConfigError) as info:
        load_run_config(env={}, overrides=[*_baseline_overrides(), override])
    _ensure(info.value.field == field, f"expected {field}, got {info.value.field}")


def test_required_fields_are_reported() -> None:
    """A missing side length is reported by name."""

    with pytest.raises(ConfigError, match="is required") as info:
        load_run_config(env={}, overrides=["n=3", "lambda=2", "gamma=1", "steps=1"])
    _ensure(info.value.field == "L", "L is required")


def test_general_setting_rules() -> None:
    """General runs reject gamma and need density below one third."""

    base = ["setting=general", "L=6", "lambda=2", "steps=1"]
    with pytest.raises(ConfigError, match="not allowed") as info:
        load_run_config(env={}, overrides=[*base, "n=5", "gamma=1"])
    _ensure(info.value.field == "gamma", "gamma is rejected")
    with pytest.raises(ConfigError, match="1/3"):
        load_run_config(env={}, overrides=[*base, "n=12"])


def test_unknown_keys_and_sections(tmp_path: Path) -> None:
    """Typos in files and overrides are not silently ignored."""

    path = _write_config(tmp_path, "[run]\nsteps = 3\nsetps = 4\n")
    with pytest.raises(ConfigError, match="unknown key"):
        load_run_config(path, env={})
    path = _write_config(tmp_path, "[runs]\nsteps = 3\n")
    with pytest.raises(ConfigError, match="unknown section"):
        load_run_config(path, env={})
    with pytest.raises(ConfigError, match="key=value"):
        load_run_config(env={}, overrides=["steps"])


def test_snapshot_start_requires_matching_file(tmp_path: Path, hexagon: Any) -> None:
    """``initial = snapshot`` validates the referenced file."""

    path = tmp_path / "start.json"
    write_snapshot(
        path, to_snapshot(hexagon.configuration, model=Model.POTTS, step=0, seed=0)
    )
    common = ["initial=snapshot", "lambda=2", "gamma=1", "steps=1", "L=9", "q=3"]
    config = load_run_config(env={}, overrides=[*common, f"snapshot={path}", "n=7"])
    _ensure(config.snapshot == path, "snapshot path is kept")
    with pytest.raises(ConfigError, match="expected 8") as info:
        load_run_config(env={}, overrides=[*common, f"snapshot={path}", "n=8"])
    _ensure(info.value.field == "snapshot", "snapshot is at fault")
    missing = tmp_path / "missing.json"
    with pytest.raises(ConfigError, match="cannot read"):
        load_run_config(env={}, overrides=[*common, f"snapshot={missing}", "n=7"])
    with pytest.raises(ConfigError, match="is required"):
        load_run_config(env={}, overrides=[*common, "n=7"])


def test_sweep_grid_and_replicas() -> None:
    """Cells are ``lambda`` by ``gamma``; replicas run once per seed."""

    overrides = [
        *_baseline_overrides(),
        "lambdas=[2, 4]",
        "gammas=[1, 3]",
        "seeds=[7, 8, 9]",
        "workers=2",
    ]
    sweep = load_sweep_config(env={}, overrides=overrides)
    _ensure(sweep.cells() == [(2.0, 1.0), (2.0, 3.0), (4.0, 1.0), (4.0, 3.0)], "grid")
    replicas = sweep.replicas()
    _ensure(len(replicas) == 12, f"expected 12 replicas, got {len(replicas)}")
    _ensure([r.seed for r in replicas[:3]] == [7, 8, 9], "seeds vary fastest")
    _ensure(sweep.workers == 2, "workers are read")
    with pytest.raises(ConfigError, match="distinct"):
        load_sweep_config(env={}, overrides=[*_baseline_overrides(), "seeds=[1, 1]"])
    with pytest.raises(ConfigError, match="integers"):
        load_sweep_config(env={}, overrides=[*_baseline_overrides(), "seeds=[1.5]"])


def test_config_hash_ignores_outputs() -> None:
    """Output paths do not change the hash; chain parameters do."""

    first = load_run_config(env={}, overrides=_baseline_overrides())
    second = load_run_config(
        env={}, overrides=[*_baseline_overrides(), "metrics_csv=out.csv"]
    )
    third = load_run_config(env={}, overrides=[*_baseline_overrides(), "seed=1"])
    _ensure(first.hash == second.hash, "outputs are excluded")
    _ensure(first.hash != third.hash, "seed is included")
    _ensure(len(first.hash) == 64, "hex sha-256")


def test_log_level_reads_environment() -> None:
    """``SOPS_LOG_LEVEL`` selects the level and blanks fall back."""

    _ensure(log_level({"SOPS_LOG_LEVEL": "debug"}) == "DEBUG", "explicit level")
    _ensure(log_level({"SOPS_LOG_LEVEL": " "}) == "WARNING", "blank falls back")


def test_process_environment_is_read_by_default(sops_env: Any) -> None:
    """Without an explicit mapping the ``SOPS_*`` process variables apply."""

    sops_env(SOPS_Q="4", SOPS_SEED="9")
    config = load_run_config(overrides=_baseline_overrides())
    _ensure((config.q, config.seed) == (4, 9), f"got q={config.q} seed={config.seed}")
    sops_env(SOPS_LOG_LEVEL="info")
    _ensure(log_level() == "INFO", "log level comes from the process environment")
