"""Closed-form thresholds and the Kotecký–Preiss certification.

Every bound is evaluated in log space and exponentiated at the end, so the
alignment threshold stays representable for large ``q``.  Inputs outside a
formula's domain raise :class:`DomainError`.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Mapping
from dataclasses import dataclass, field
from typing import Literal

from .configuration import Model, Setting

__all__ = [
    "DEFAULT_KP_C",
    "DivergentTailError",
    "DomainError",
    "KPResult",
    "ThresholdTable",
    "aggregation_lambda",
    "alpha_c",
    "alpha_star",
    "bd_min_bounds",
    "boundary_from_perimeter",
    "compression_threshold",
    "delta_star",
    "dispersion_lambda",
    "expansion_beta_max",
    "expansion_lambda",
    "gamma_star",
    "kp_condition_check",
    "kp_gamma_threshold",
    "kp_holds",
    "log_bridge_system_count",
    "log_gamma_star",
    "log_monochromatic_prefactor",
    "log_preimage_bound",
    "nonalignment_bound",
    "nonalignment_threshold",
    "p_min_bounds",
    "polymer_counts",
    "thresholds",
]

LOGGER = logging.getLogger(__name__)

DEFAULT_KP_C = 1e-4
KP_GAMMA_FACTOR = 29.3
EXPANSION_C1 = 2.17
EXPANSION_C2 = 2.0 + math.sqrt(2.0)
TAIL_START = 16

Coefficients = Literal["printed", "enumerated"]


class DomainError(ValueError):
    """A threshold was requested outside the domain of its formula."""


class DivergentTailError(ValueError):
    """The geometric tail of the polymer sum does not converge."""


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise DomainError(message)


def _check_q(q: int) -> None:
    _require(isinstance(q, int) and q >= 2, f"q must be an integer >= 2, got {q!r}")


def _clock_exponent(q: int) -> float:
    """Exponent ``1 - cos(2 pi / q)`` replacing ``gamma`` by its power."""

    return 1.0 - math.cos(2.0 * math.pi / q)


# Polymer counts ------------------------------------------------------------

_PRINTED: dict[int, Callable[[int], int]] = {
    6: lambda q: 7 * (q - 1),
    10: lambda q: 30 * (q - 1),
    11: lambda q: 30 * (q - 1) * (q - 2),
    12: lambda q: 24 * (q - 1) + 28 * (q - 1) ** 2,
    14: lambda q: 137 * (q - 1) + 72 * (q - 1) * (q - 2),
    15: lambda q: 24 * (q - 1) * (q - 2) * (q - 3) + 246 * (q - 1) * (q - 2),
}

# Exhaustive enumeration finds 75 pairs of stars at distance two, not 28.
_ENUMERATED: dict[int, Callable[[int], int]] = {
    **_PRINTED,
    12: lambda q: 24 * (q - 1) + 75 * (q - 1) ** 2,
}


def polymer_counts(q: int, coefficients: Coefficients = "printed") -> dict[int, int]:
    """``nu(m, q)`` for ``6 <= m < 16`` as used by the KP sum (zeros included)."""

    _check_q(q)
    table = _PRINTED if coefficients == "printed" else _ENUMERATED
    return {m: table[m](q) if m in table else 0 for m in range(6, TAIL_START)}


# Kotecký–Preiss ------------------------------------------------------------


@dataclass(frozen=True)
class KPResult:
    gamma: float
    q: int
    c: float
    effective_gamma: float
    finite_sum: float
    tail: float
    tail_ratio: float

    @property
    def residual(self) -> float:
        return self.finite_sum + self.tail

    @property
    def holds(self) -> bool:
        return self.residual <= self.c


def kp_condition_check(
    gamma: float,
    q: int,
    c: float = DEFAULT_KP_C,
    *,
    model: Model = Model.POTTS,
    coefficients: Coefficients = "printed",
) -> KPResult:
    """Evaluate the polymer sum bound against ``c``.

    The sum runs over polymer sizes 6 to 15 with explicit counts and bounds
    everything larger by a geometric series with ratio
    ``6 (q - 1) e^(1 + c) / gamma``.  For the clock model the edge weight is
    ``gamma^-(1 - cos(2 pi / q))``.

    Raises:
        DomainError: If ``gamma`` or ``c`` is not positive.
        DivergentTailError: If the tail ratio is at least one.
    """

    _check_q(q)
    _require(gamma > 0 and math.isfinite(gamma), "gamma must be positive and finite")
    _require(c > 0, "c must be positive")
    log_gamma = math.log(gamma)
    if Model(model) is Model.CLOCK:
        log_gamma *= _clock_exponent(q)
    log_ratio = math.log(6 * (q - 1)) + 1.0 + c - log_gamma
    if log_ratio >= 0.0:
        raise DivergentTailError(
            f"tail ratio 6(q-1)e^(1+c)/gamma = {math.exp(log_ratio):.4f} is not below 1"
        )
    log_term = c - log_gamma
    finite = math.exp(c) * sum(
        nu * math.exp(m * log_term)
        for m, nu in polymer_counts(q, coefficients).items()
        if nu
    )
    ratio = math.exp(log_ratio)
    tail = 0.5 * math.exp(c + TAIL_START * log_ratio) / (1.0 - ratio)
    result = KPResult(
        gamma=gamma,
        q=q,
        c=c,
        effective_gamma=math.exp(log_gamma),
        finite_sum=finite,
        tail=tail,
        tail_ratio=ratio,
    )
    LOGGER.debug(
        "KP check gamma=%g q=%d: residual %.6g (bound %g)", gamma, q, result.residual, c
    )
    return result


def kp_holds(
    gamma: float,
    q: int,
    c: float = DEFAULT_KP_C,
    *,
    model: Model = Model.POTTS,
    coefficients: Coefficients = "printed",
) -> bool:
    """Like :func:`kp_condition_check` but a divergent tail counts as failure."""

    try:
        return kp_condition_check(
            gamma, q, c, model=model, coefficients=coefficients
        ).holds
    except DivergentTailError:
        return False


def kp_gamma_threshold(q: int, model: Model = Model.POTTS) -> float:
    _check_q(q)
    base = KP_GAMMA_FACTOR * (q - 1)
    if Model(model) is Model.CLOCK:
        return base ** (1.0 / _clock_exponent(q))
    return base


# Compression and alignment ------------------------------------------------


def compression_threshold(
    alpha: float, *, precise: bool = False, c: float = DEFAULT_KP_C
) -> float:
    """Value ``lambda * gamma`` must exceed for alpha-compression.

    The simplified bound is ``7^(alpha/(alpha-1))``; ``precise`` gives the
    sharper ``(4 + 2 sqrt 2)^(alpha/(alpha-1)) e^(7c (alpha+1)/(alpha-1))``.
    """

    _require(alpha > 1.0, f"alpha must exceed 1, got {alpha!r}")
    power = alpha / (alpha - 1.0)
    if not precise:
        return math.exp(power * math.log(7.0))
    return math.exp(
        power * math.log(4.0 + 2.0 * math.sqrt(2.0))
        + 7.0 * c * (alpha + 1.0) / (alpha - 1.0)
    )


def _check_eta(eta: float) -> None:
    _require(0.5 < eta < 1.0, f"eta must lie in (1/2, 1), got {eta!r}")


def alpha_star(eta: float, q: int) -> float:
    _check_eta(eta)
    _check_q(q)
    return min(
        math.sqrt(eta) + math.sqrt(1.0 - eta),
        math.sqrt(1.0 / q) + math.sqrt(1.0 - 1.0 / q),
    )


def delta_star(eta: float, q: int) -> float:
    _check_eta(eta)
    _check_q(q)
    return min(1.0 - eta, 1.0 / q)


def log_gamma_star(
    alpha: float, eta: float, q: int, model: Model = Model.POTTS
) -> float:
    """Log of the ``gamma`` above which compressed configurations align."""

    top = alpha_star(eta, q)
    _require(1.0 < alpha < top, f"alpha must lie in (1, {top:.6f}), got {alpha!r}")
    gap = top - alpha
    inner = (2.0 * alpha / gap) * math.log(3.0) + (
        0.75 + (top - 1.0) / (2.0 * delta_star(eta, q) * gap)
    ) * math.log(4.0)
    value = (q - 1) * inner
    if Model(model) is Model.CLOCK:
        value /= _clock_exponent(q)
    return value


def gamma_star(alpha: float, eta: float, q: int, model: Model = Model.POTTS) -> float:
    """Alignment threshold; ``inf`` when it exceeds the float range."""

    log_value = log_gamma_star(alpha, eta, q, model)
    try:
        return math.exp(log_value)
    except OverflowError:
        return math.inf


def alpha_c(delta: float, eta: float, q: int) -> float:
    """Largest perimeter ratio left once a ``delta`` fraction is misaligned."""

    _check_eta(eta)
    _check_q(q)
    _require(
        0.0 < delta < delta_star(eta, q),
        f"delta must lie in (0, {delta_star(eta, q):.6f}), got {delta!r}",
    )
    rest = 1.0 - delta
    return min(
        math.sqrt((1.0 / q - delta) / rest) + math.sqrt((1.0 - 1.0 / q) / rest),
        math.sqrt(eta / rest) + math.sqrt((1.0 - (eta + delta)) / rest),
    )


def log_monochromatic_prefactor(q: int, gamma: float, perimeter: int) -> float:
    """Log of ``q 2^|P| gamma / (gamma - 3q)``, valid for ``gamma > 3q``."""

    _check_q(q)
    _require(gamma > 3 * q, f"gamma must exceed 3q = {3 * q}, got {gamma!r}")
    _require(perimeter >= 0, "perimeter must be non-negative")
    return (
        math.log(q)
        + perimeter * math.log(2.0)
        + math.log(gamma)
        - math.log(gamma - 3 * q)
    )


def log_preimage_bound(q: int, perimeter: int, delta: float, ell: int) -> float:
    """Log of ``q 3^|P| 4^(((1 + 3 delta) / (4 delta)) ell)``."""

    _check_q(q)
    _require(0.0 < delta < 1.0, "delta must lie in (0, 1)")
    _require(perimeter >= 0 and ell >= 0, "perimeter and ell must be non-negative")
    return (
        math.log(q)
        + perimeter * math.log(3.0)
        + (1.0 + 3.0 * delta) / (4.0 * delta) * ell * math.log(4.0)
    )


# Non-alignment and expansion ----------------------------------------------


def nonalignment_bound(eps: float, q: int) -> float:
    """``(1 - eps q/(q-1))^((q-1)/q - eps) (1 + eps q)^(1/q + eps)``."""

    _check_q(q)
    _require(0.0 < eps < 1.0 / q, f"eps must lie in (0, 1/q), got {eps!r}")
    return math.exp(
        ((q - 1) / q - eps) * math.log1p(-eps * q / (q - 1))
        + (1.0 / q + eps) * math.log1p(eps * q)
    )


def nonalignment_threshold(
    eps: float,
    q: int,
    *,
    setting: Setting = Setting.CONNECTED,
    model: Model = Model.POTTS,
) -> float:
    """Largest ``gamma`` (connected) or ``lambda`` (general) certifying non-alignment.

    Connected Potts needs ``gamma^3`` below the bound and the clock model
    ``gamma^6``; the general setting needs ``lambda^6`` below it.
    """

    bound = nonalignment_bound(eps, q)
    if Setting(setting) is Setting.GENERAL:
        power = 6.0
    else:
        power = 6.0 if Model(model) is Model.CLOCK else 3.0
    return bound ** (1.0 / power)


def _expansion_power(model: Model) -> float:
    return 4.0 if Model(model) is Model.CLOCK else 2.5


def expansion_lambda(gamma: float, model: Model = Model.POTTS) -> float:
    """``lambda`` must stay below ``2.17 / gamma^(5/2)`` (``gamma^4`` for clock)."""

    _require(gamma > 0, "gamma must be positive")
    return EXPANSION_C1 / gamma ** _expansion_power(model)


def expansion_beta_max(lam: float, gamma: float, model: Model = Model.POTTS) -> float:
    """Supremum of the ``beta`` for which beta-expansion is certified."""

    _require(lam > 0 and gamma > 0, "lambda and gamma must be positive")
    power = _expansion_power(model)
    numerator = math.log(EXPANSION_C1) - math.log(lam) - power * math.log(gamma)
    denominator = math.log(EXPANSION_C2) - math.log(lam) - math.log(gamma)
    _require(numerator > 0, "lambda * gamma^power must be below 2.17")
    _require(denominator > 0, "lambda * gamma must be below 2 + sqrt(2)")
    return min(1.0, numerator / denominator)


# General setting ----------------------------------------------------------


def aggregation_lambda(q: int, rho: float, alpha: float, delta: float) -> float:
    """``lambda`` above which aggregation with alignment is certified."""

    _check_q(q)
    _require(0.0 < rho < 1.0 / 3.0, f"rho must lie in (0, 1/3), got {rho!r}")
    _require(alpha > 1.0, "alpha must exceed 1")
    _require(
        0.0 < delta < min(rho, 1.0 - 1.0 / alpha**2),
        "delta must lie in (0, min(rho, 1 - 1/alpha^2))",
    )
    log_base = alpha * (1.0 + delta) / (2.0 * delta) * math.log(3.0 * (q + 1)) + (
        math.log(36.0) / (4.0 * math.sqrt(3.0 * rho))
    )
    exponent = 1.0 / (alpha - 1.0 / math.sqrt(1.0 - delta))
    try:
        return math.exp(log_base * exponent)
    except OverflowError:
        return math.inf


def dispersion_lambda(rho: float, delta: float) -> float:
    """``((1/rho)^rho / (e/delta)^delta)^(1/(3 rho))``; dispersion holds below it."""

    _require(0.0 < rho < 1.0 / 3.0, f"rho must lie in (0, 1/3), got {rho!r}")
    _require(0.0 < delta < 1.0, f"delta must lie in (0, 1), got {delta!r}")
    log_ratio = -rho * math.log(rho) - delta * (1.0 - math.log(delta))
    return math.exp(log_ratio / (3.0 * rho))


def log_bridge_system_count(n_sites: int, q: int, delta: float, ell: int) -> float:
    """Log of ``7 * 6^(2 sqrt(N) - 1) * (3(q+1))^(((1 + delta)/(2 delta)) ell)``."""

    _check_q(q)
    _require(n_sites >= 1, "n_sites must be positive")
    _require(0.0 < delta < 1.0, "delta must lie in (0, 1)")
    _require(ell >= 0, "ell must be non-negative")
    return (
        math.log(7.0)
        + (2.0 * math.sqrt(n_sites) - 1.0) * math.log(6.0)
        + (1.0 + delta) / (2.0 * delta) * ell * math.log(3.0 * (q + 1))
    )


# Isoperimetry -------------------------------------------------------------


def boundary_from_perimeter(p: int) -> int:
    """Boundary edge count of a simply connected configuration with perimeter ``p``."""

    return 2 * p + 6


def p_min_bounds(n: int) -> tuple[float, float]:
    _require(n >= 1, "n must be at least 1")
    root3 = math.sqrt(3.0)
    return 2.0 * root3 * math.sqrt(n - 0.25) - 3.0, 2.0 * root3 * math.sqrt(n)


def bd_min_bounds(k: int) -> tuple[float, float]:
    _require(k >= 1, "k must be at least 1")
    root3 = math.sqrt(3.0)
    return 4.0 * root3 * math.sqrt(k - 0.25), 4.0 * root3 * math.sqrt(k) + 6.0


# Table --------------------------------------------------------------------


@dataclass(frozen=True)
class ThresholdTable:
    """Threshold values keyed by name, next to the inputs that produced them."""

    inputs: Mapping[str, object]
    values: Mapping[str, float] = field(default_factory=dict)

    def __getitem__(self, name: str) -> float:
        return self.values[name]

    def __contains__(self, name: object) -> bool:
        return name in self.values

    def as_dict(self) -> dict[str, object]:
        return {"inputs": dict(self.inputs), "values": dict(self.values)}


def thresholds(
    q: int,
    *,
    model: Model = Model.POTTS,
    alpha: float | None = None,
    eta: float | None = None,
    eps: float | None = None,
    delta: float | None = None,
    rho: float | None = None,
    lam: float | None = None,
    gamma: float | None = None,
) -> ThresholdTable:
    """Evaluate every threshold whose inputs are present.

    Raises:
        DomainError: If a supplied input lies outside a formula's domain.
    """

    model = Model(model)
    _check_q(q)
    values: dict[str, float] = {"kp_gamma": kp_gamma_threshold(q, model)}
    if alpha is not None:
        values["compression_lambda_gamma"] = compression_threshold(alpha)
        values["compression_lambda_gamma_precise"] = compression_threshold(
            alpha, precise=True
        )
    if eta is not None:
        values["alpha_star"] = alpha_star(eta, q)
        values["delta_star"] = delta_star(eta, q)
        if alpha is not None:
            values["log_gamma_star"] = log_gamma_star(alpha, eta, q, model)
            values["gamma_star"] = gamma_star(alpha, eta, q, model)
        if delta is not None:
            values["alpha_c"] = alpha_c(delta, eta, q)
            values["alpha_c_ratio"] = values["alpha_c"] / values["alpha_star"]
    if eps is not None:
        values["nonalignment_bound"] = nonalignment_bound(eps, q)
        values["nonalignment_gamma"] = nonalignment_threshold(eps, q, model=model)
        values["nonalignment_lambda"] = nonalignment_threshold(
            eps, q, setting=Setting.GENERAL
        )
    if gamma is not None:
        values["expansion_lambda"] = expansion_lambda(gamma, model)
        if lam is not None:
            values["expansion_beta_max"] = expansion_beta_max(lam, gamma, model)
    if rho is not None and delta is not None:
        values["dispersion_lambda"] = dispersion_lambda(rho, delta)
        if alpha is not None:
            values["aggregation_lambda"] = aggregation_lambda(q, rho, alpha, delta)
    inputs = {
        name: value
        for name, value in (
            ("q", q),
            ("model", model.value),
            ("alpha", alpha),
            ("eta", eta),
            ("eps", eps),
            ("delta", delta),
            ("rho", rho),
            ("lambda", lam),
            ("gamma", gamma),
        )
        if value is not None
    }
    return ThresholdTable(inputs=inputs, values=values)
