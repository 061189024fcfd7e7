"""Run and sweep configuration for the experiment harness.

Values are layered: an INI file, then ``SOPS_<KEY>`` environment variables,
then ``key=value`` overrides from the command line.  Every validation failure
raises :class:`ConfigError` naming the offending field.
"""

from __future__ import annotations

import configparser
import hashlib
import json
import math
import os
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Any

from .configuration import ConfigurationError, Model, Setting, read_snapshot
from .dynamics import ChainParams

__all__ = [
    "ENV_PREFIX",
    "Classifiers",
    "ConfigError",
    "Initial",
    "Outputs",
    "RunConfig",
    "SweepConfig",
    "config_hash",
    "load_run_config",
    "load_sweep_config",
    "log_level",
]

ENV_PREFIX = "SOPS_"

_SECTIONS: dict[str, tuple[str, ...]] = {
    "run": (
        "setting",
        "model",
        "L",
        "n",
        "q",
        "lambda",
        "gamma",
        "steps",
        "seed",
        "sample_interval",
        "initial",
        "snapshot",
        "random_orientations",
    ),
    "classifiers": ("alpha", "beta", "delta", "eps"),
    "outputs": ("metrics_csv", "snapshot_json", "render_svg"),
    "sweep": ("lambdas", "gammas", "seeds", "workers"),
}
_KEYS = {key: section for section, keys in _SECTIONS.items() for key in keys}


class ConfigError(ValueError):
    """Invalid configuration value; ``field`` names the key at fault."""

    def __init__(self, field_name: str, message: str) -> None:
        super().__init__(f"field '{field_name}': {message}")
        self.field = field_name


class Initial(str, Enum):
    LINE = "line"
    SPIRAL = "spiral"
    UNIFORM_RANDOM = "uniform_random"
    SNAPSHOT = "snapshot"


@dataclass(frozen=True)
class Classifiers:
    alpha: float = 3.0
    beta: float = 0.5
    delta: float = 0.2
    eps: float = 0.15


@dataclass(frozen=True)
class Outputs:
    metrics_csv: Path | None = None
    snapshot_json: Path | None = None
    render_svg: Path | None = None


@dataclass(frozen=True)
class RunConfig:
    """A single chain run."""

    setting: Setting
    model: Model
    side: int
    n: int
    q: int
    lam: float
    gamma: float | None
    steps: int
    seed: int = 0
    sample_interval: int = 1
    initial: Initial = Initial.LINE
    snapshot: Path | None = None
    random_orientations: bool = True
    classifiers: Classifiers = field(default_factory=Classifiers)
    outputs: Outputs = field(default_factory=Outputs)

    def __post_init__(self) -> None:
        _validate_run(self)

    @property
    def chain_params(self) -> ChainParams:
        return ChainParams(
            q=self.q,
            lam=self.lam,
            gamma=self.gamma if self.gamma is not None else 1.0,
            model=self.model,
            setting=self.setting,
            seed=self.seed,
        )

    def canonical(self) -> dict[str, Any]:
        """JSON-ready view of every field except the output paths."""

        return {
            "setting": self.setting.value,
            "model": self.model.value,
            "L": self.side,
            "n": self.n,
            "q": self.q,
            "lambda": self.lam,
            "gamma": self.gamma,
            "steps": self.steps,
            "seed": self.seed,
            "sample_interval": self.sample_interval,
            "initial": self.initial.value,
            "snapshot": str(self.snapshot) if self.snapshot is not None else None,
            "random_orientations": self.random_orientations,
            "classifiers": {
                "alpha": self.classifiers.alpha,
                "beta": self.classifiers.beta,
                "delta": self.classifiers.delta,
                "eps": self.classifiers.eps,
            },
        }

    @property
    def hash(self) -> str:
        return config_hash(self)

    def with_cell(self, lam: float, gamma: float | None, seed: int) -> RunConfig:
        return replace(self, lam=lam, gamma=gamma, seed=seed, outputs=Outputs())


@dataclass(frozen=True)
class SweepConfig:
    """Grid over ``lambda`` and ``gamma`` with one replica per seed and cell."""

    base: RunConfig
    lambdas: tuple[float, ...]
    gammas: tuple[float | None, ...]
    seeds: tuple[int, ...]
    workers: int = 1

    def __post_init__(self) -> None:
        if not self.lambdas:
            raise ConfigError("lambdas", "must list at least one value")
        if not self.seeds:
            raise ConfigError("seeds", "must list at least one value")
        if not self.gammas:
            raise ConfigError("gammas", "must list at least one value")
        if self.workers < 1:
            raise ConfigError("workers", "must be at least 1")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds", "must be distinct")

    def cells(self) -> list[tuple[float, float | None]]:
        return [(lam, gamma) for lam in self.lambdas for gamma in self.gammas]

    def replicas(self) -> list[RunConfig]:
        """Every replica in ``(cell, seed)`` order; each is validated."""

        return [
            self.base.with_cell(lam, gamma, seed)
            for lam, gamma in self.cells()
            for seed in self.seeds
        ]


def config_hash(config: RunConfig) -> str:
    """SHA-256 of the canonical JSON of every non-output field."""

    payload = json.dumps(config.canonical(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def log_level(env: Mapping[str, str] | None = None, *, default: str = "WARNING") -> str:
    """Return the log level named by ``SOPS_LOG_LEVEL``."""

    environment = os.environ if env is None else env
    return _pick_env(environment, f"{ENV_PREFIX}LOG_LEVEL", default=default).upper()


# Raw value collection -------------------------------------------------------


def _pick_env(env: Mapping[str, str], *names: str, default: str) -> str:
    """Return the first non-blank value among ``names`` in ``env``."""

    for name in names:
        value = env.get(name)
        if value is not None and value.strip():
            return value.strip()
    return default


def _read_file(path: Path) -> dict[str, str]:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # type: ignore[assignment,method-assign]
    try:
        with path.open(encoding="utf-8") as handle:
            parser.read_file(handle)
    except configparser.Error as exc:
        raise ConfigError("config", f"cannot parse {path}: {exc}") from exc
    raw: dict[str, str] = {}
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(section, "unknown section")
        for key, value in parser.items(section):
            if key not in _SECTIONS[section]:
                raise ConfigError(key, f"unknown key in section [{section}]")
            raw[key] = value
    return raw


def _env_key(key: str) -> str:
    return f"{ENV_PREFIX}{key.upper()}"


def _parse_override(item: str) -> tuple[str, str]:
    key, sep, value = item.partition("=")
    key = key.strip()
    if "." in key:
        section, _, key = key.partition(".")
        if section not in _SECTIONS or key not in _SECTIONS[section]:
            raise ConfigError(key, f"unknown key in section [{section}]")
    if not sep or key not in _KEYS:
        raise ConfigError(key or item, "overrides must look like key=value")
    return key, value.strip()


def _collect(
    path: Path | None,
    env: Mapping[str, str] | None,
    overrides: Iterable[str],
) -> dict[str, str]:
    raw = _read_file(path) if path is not None else {}
    environment = os.environ if env is None else env
    for key in _KEYS:
        value = environment.get(_env_key(key))
        if value is not None and value.strip():
            raw[key] = value.strip()
    for item in overrides:
        key, value = _parse_override(item)
        raw[key] = value
    return raw


# Typed parsing --------------------------------------------------------------


def _parse_int(raw: Mapping[str, str], key: str, default: int | None = None) -> int:
    value = raw.get(key)
    if value is None or value == "":
        if default is None:
            raise ConfigError(key, "is required")
        return default
    try:
        return int(value)
    except ValueError as exc:
        raise ConfigError(key, f"must be an integer, got {value!r}") from exc


def _parse_float(
    raw: Mapping[str, str], key: str, default: float | None = None
) -> float | None:
    value = raw.get(key)
    if value is None or value == "":
        return default
    try:
        return float(value)
    except ValueError as exc:
        raise ConfigError(key, f"must be a number, got {value!r}") from exc


def _parse_number(raw: Mapping[str, str], key: str, default: float) -> float:
    value = _parse_float(raw, key)
    return default if value is None else value


def _parse_bool(raw: Mapping[str, str], key: str, *, default: bool) -> bool:
    value = raw.get(key)
    if value is None:
        return default
    normalized = value.strip().lower()
    if normalized in {"1", "true", "t", "yes", "y", "on"}:
        return True
    if normalized in {"0", "false", "f", "no", "n", "off"}:
        return False
    raise ConfigError(
        key, "must be a boolean flag (accepted values: 1/0/true/false/yes/no/on/off)"
    )


def _parse_enum(
    raw: Mapping[str, str], key: str, enum: type[Enum], default: str
) -> Any:
    value = raw.get(key, default).strip().lower()
    try:
        return enum(value)
    except ValueError as exc:
        choices = ", ".join(member.value for member in enum)
        raise ConfigError(key, f"must be one of {choices}, got {value!r}") from exc


def _parse_path(raw: Mapping[str, str], key: str) -> Path | None:
    value = raw.get(key)
    return Path(value) if value else None


def _load_json(raw: Mapping[str, str], key: str) -> list[Any] | None:
    value = raw.get(key)
    if value is None or value.strip() == "":
        return None
    try:
        parsed = json.loads(value)
    except json.JSONDecodeError as exc:
        raise ConfigError(key, f"must contain valid JSON: {exc}") from exc
    if not isinstance(parsed, list):
        raise ConfigError(key, "must decode to an array")
    return parsed


def _numbers(key: str, values: Sequence[Any]) -> tuple[float, ...]:
    result: list[float] = []
    for value in values:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(key, f"entries must be numbers, got {value!r}")
        result.append(float(value))
    return tuple(result)


def _build_run(raw: Mapping[str, str]) -> RunConfig:
    setting = _parse_enum(raw, "setting", Setting, Setting.CONNECTED.value)
    default_initial = (
        Initial.UNIFORM_RANDOM if setting is Setting.GENERAL else Initial.LINE
    )
    lam = _parse_float(raw, "lambda")
    if lam is None:
        raise ConfigError("lambda", "is required")
    defaults = Classifiers()
    return RunConfig(
        setting=setting,
        model=_parse_enum(raw, "model", Model, Model.POTTS.value),
        side=_parse_int(raw, "L"),
        n=_parse_int(raw, "n"),
        q=_parse_int(raw, "q", 2),
        lam=lam,
        gamma=_parse_float(raw, "gamma"),
        steps=_parse_int(raw, "steps"),
        seed=_parse_int(raw, "seed", 0),
        sample_interval=_parse_int(raw, "sample_interval", 1),
        initial=_parse_enum(raw, "initial", Initial, default_initial.value),
        snapshot=_parse_path(raw, "snapshot"),
        random_orientations=_parse_bool(raw, "random_orientations", default=True),
        classifiers=Classifiers(
            alpha=_parse_number(raw, "alpha", defaults.alpha),
            beta=_parse_number(raw, "beta", defaults.beta),
            delta=_parse_number(raw, "delta", defaults.delta),
            eps=_parse_number(raw, "eps", defaults.eps),
        ),
        outputs=Outputs(
            metrics_csv=_parse_path(raw, "metrics_csv"),
            snapshot_json=_parse_path(raw, "snapshot_json"),
            render_svg=_parse_path(raw, "render_svg"),
        ),
    )


def load_run_config(
    path: Path | None = None,
    *,
    env: Mapping[str, str] | None = None,
    overrides: Iterable[str] = (),
) -> RunConfig:
    """Load a :class:`RunConfig` from file, environment and overrides.

    Raises:
        ConfigError: If a value is missing, malformed or out of range.
    """

    return _build_run(_collect(path, env, overrides))


def load_sweep_config(
    path: Path | None = None,
    *,
    env: Mapping[str, str] | None = None,
    overrides: Iterable[str] = (),
) -> SweepConfig:
    """Load a :class:`SweepConfig`; grid axes default to the single run values."""

    raw = _collect(path, env, overrides)
    base = _build_run(raw)
    lambdas = _load_json(raw, "lambdas")
    gammas = _load_json(raw, "gammas")
    seeds = _load_json(raw, "seeds")
    seed_values: list[int] = []
    for seed in seeds if seeds is not None else [base.seed]:
        if isinstance(seed, bool) or not isinstance(seed, int):
            raise ConfigError("seeds", f"entries must be integers, got {seed!r}")
        seed_values.append(seed)
    if base.setting is Setting.GENERAL and gammas:
        raise ConfigError("gammas", "is not allowed in the general setting")
    gamma_values: tuple[float | None, ...] = (
        _numbers("gammas", gammas) if gammas else (base.gamma,)
    )
    return SweepConfig(
        base=base,
        lambdas=_numbers("lambdas", lambdas) if lambdas is not None else (base.lam,),
        gammas=gamma_values,
        seeds=tuple(seed_values),
        workers=_parse_int(raw, "workers", 1),
    )


# Validation -----------------------------------------------------------------


def _positive(name: str, value: float) -> None:
    if not math.isfinite(value) or value <= 0:
        raise ConfigError(name, f"must be finite and positive, got {value!r}")


def _validate_run(config: RunConfig) -> None:
    if config.side < 3:
        raise ConfigError("L", "must be at least 3")
    if config.n < 1:
        raise ConfigError("n", "must be at least 1")
    if config.q < 2:
        raise ConfigError("q", "must be at least 2")
    _positive("lambda", config.lam)
    if config.steps < 0:
        raise ConfigError("steps", "must be non-negative")
    if config.sample_interval < 1:
        raise ConfigError("sample_interval", "must be at least 1")
    if not 0 <= config.seed < 2**64:
        raise ConfigError("seed", "must be a 64-bit unsigned integer")
    n_sites = config.side**2
    if config.setting is Setting.CONNECTED:
        if config.gamma is None:
            raise ConfigError("gamma", "is required in the connected setting")
        _positive("gamma", config.gamma)
        if n_sites < (config.n + 1) ** 2:
            raise ConfigError("n", "connected runs need L^2 >= (n + 1)^2")
        if config.initial is Initial.UNIFORM_RANDOM:
            raise ConfigError(
                "initial", "uniform_random is only valid in the general setting"
            )
    else:
        if config.gamma is not None:
            raise ConfigError("gamma", "is not allowed in the general setting")
        if 3 * config.n >= n_sites:
            raise ConfigError("n", "general runs need n / L^2 < 1/3")
    for name in ("alpha", "beta", "delta", "eps"):
        _positive(name, getattr(config.classifiers, name))
    if config.initial is Initial.SNAPSHOT:
        _validate_snapshot(config)
    elif config.snapshot is not None:
        raise ConfigError("snapshot", "is only used with initial = snapshot")


def _validate_snapshot(config: RunConfig) -> None:
    if config.snapshot is None:
        raise ConfigError("snapshot", "is required when initial = snapshot")
    try:
        snapshot = read_snapshot(config.snapshot)
    except OSError as exc:
        raise ConfigError("snapshot", f"cannot read {config.snapshot}: {exc}") from exc
    except ConfigurationError as exc:
        raise ConfigError("snapshot", str(exc)) from exc
    sigma = snapshot.configuration
    if sigma.geometry.side != config.side:
        raise ConfigError(
            "snapshot", f"has L={sigma.geometry.side}, expected {config.side}"
        )
    if sigma.q != config.q:
        raise ConfigError("snapshot", f"has q={sigma.q}, expected {config.q}")
    if sigma.setting is not config.setting:
        raise ConfigError("snapshot", f"has setting {sigma.setting.value}")
    if sigma.n != config.n:
        raise ConfigError("snapshot", f"has {sigma.n} particles, expected {config.n}")
