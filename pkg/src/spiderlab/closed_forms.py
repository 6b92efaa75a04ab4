"""Closed-form densities, majorants, and asymptotics for penalized spiders.

Everything here is an exact formula evaluation: the five-regime martingale
density M(alpha, gamma, x, k, l, s), the majorants J*/I*/Z* of the penalized
normalizer, the large-horizon equivalents of Z*, and the joint law of the
local time and distance of a reflected Brownian motion.  Quadrature oracles
for the exact integrals these majorize live in :mod:`spiderlab.quadrature`.

All functions are pure; arguments are plain floats and branch labels.
"""

from __future__ import annotations

import math

from .branches import (
    BranchSpace,
    PenaltyParams,
    RegimeTag,
    classify_regime,
    theta_weights,
)
from .errors import DomainError

__all__ = [
    "martingale_density",
    "j_star",
    "i_star",
    "z_star",
    "z_star_asymptotic",
    "z_star_asymptotic_log",
    "asymptotic_density_ratio",
    "joint_density_local_time",
    "radial_density",
    "radial_cdf_from_origin",
]

_LOG_SPACE_THRESHOLD = 500.0


def _check_time(t: float, name: str = "t") -> None:
    if not t > 0.0:
        raise DomainError(f"{name} must be > 0, got {t}")


def _ratio(num: float, den: float) -> float:
    """num / den with the convention 0/0 = 0 and c/0 = inf for c > 0.

    The denominators here are squared slopes, which can underflow to zero for
    subnormal inputs even though the slope itself is nonzero.
    """
    if den == 0.0:
        return 0.0 if num == 0.0 else math.inf
    return num / den


def _require_label(space: BranchSpace, k: str | None, x: float) -> None:
    if k is None:
        if x != 0.0:
            raise ValueError("a branch label is required when x > 0")
    elif k not in space.weights:
        raise ValueError(f"unknown branch label {k!r}")


def martingale_density(
    params: PenaltyParams,
    space: BranchSpace,
    x: float,
    k: str | None,
    l: float,
    s: float,
) -> float:
    """Density M(alpha, gamma, x, k, l, s) of the limit measure on the s-past.

    The five regimes give, writing ``abar = max(alpha)`` and J for the argmax
    (resp. zero-slope) set:

        dominant gamma:      exp(gamma (l - x) - s gamma^2 / 2)
        dominant alpha:      exp(gamma l - s abar^2/2) (exp(-abar x)
                             + (abar-gamma)/(abar sum_J mu) sinh(abar x) 1_{k in J})
        neutral:             1
        neg gamma, flat max: exp(gamma l) (1 + |gamma|/(sum_J mu) x 1_{k in J})
        neg gamma, all neg:  exp(gamma l) (1 + theta_k x)

    At ``x == 0`` the value does not depend on ``k``, so the label may be None
    there (a spider sitting at the origin has no branch).
    """
    if x < 0.0 or l < 0.0 or s < 0.0:
        raise DomainError(f"x, l, s must be nonnegative, got {(x, l, s)}")
    _require_label(space, k, x)
    gamma = params.gamma
    regime = classify_regime(params, space)

    if regime.tag is RegimeTag.DOMINANT_GAMMA:
        return math.exp(gamma * (l - x) - s * gamma**2 / 2.0)
    if regime.tag is RegimeTag.DOMINANT_ALPHA:
        abar = regime.alpha_bar
        mass = math.fsum(space.weights[m] for m in regime.argmax_set)
        bump = 0.0
        if k is not None and k in regime.argmax_set:
            bump = (abar - gamma) / (abar * mass) * math.sinh(abar * x)
        return math.exp(gamma * l - s * abar**2 / 2.0) * (math.exp(-abar * x) + bump)
    if regime.tag is RegimeTag.NEUTRAL:
        return 1.0
    if regime.tag is RegimeTag.NEG_GAMMA_FLAT_MAX:
        mass = math.fsum(space.weights[m] for m in regime.argmax_set)
        slope = abs(gamma) / mass if (k is not None and k in regime.argmax_set) else 0.0
        return math.exp(gamma * l) * (1.0 + slope * x)
    # NEG_GAMMA_ALL_NEG
    theta = theta_weights(params, space).theta
    slope = theta[k] if k is not None else 0.0
    return math.exp(gamma * l) * (1.0 + slope * x)


def j_star(beta: float, x: float, t: float) -> float:
    """Majorant J*(beta, x, t) of the no-return expectation J.

        J* = sqrt(2/(pi t^3)) x / beta^2   (beta != 0)
           + sqrt(2/(pi t)) x              (beta == 0)
           + 2 sinh(beta x) exp(t beta^2 / 2)   (beta > 0)

    The sinh-times-exp product switches to log-space once the exponent
    exceeds 500 so that large ``beta x`` does not overflow prematurely.
    """
    _check_time(t)
    if x < 0.0:
        raise DomainError(f"x must be nonnegative, got {x}")
    if beta == 0.0:
        return math.sqrt(2.0 / (math.pi * t)) * x
    value = _ratio(math.sqrt(2.0 / (math.pi * t**3)) * x, beta**2)
    if beta > 0.0 and x > 0.0:
        arg = beta * x + t * beta**2 / 2.0
        if arg > _LOG_SPACE_THRESHOLD:
            # 2 sinh(bx) e^{tb^2/2} = exp(bx + tb^2/2) (1 - e^{-2bx})
            log_term = arg + math.log1p(-math.exp(-2.0 * beta * x))
            value += math.exp(log_term) if log_term < 709.0 else math.inf
        else:
            value += 2.0 * math.sinh(beta * x) * math.exp(t * beta**2 / 2.0)
    return value


def i_star(beta: float, gamma: float, x: float, t: float) -> float:
    """Majorant I*(beta, gamma, x, t) of the exponential return expectation I.

    Seven rows, by the signs and ordering of beta and gamma:

        beta, gamma < 0:     sqrt(2/(pi t^3)) (x/(beta gamma)
                             + (|beta|+|gamma|)/(beta^2 gamma^2))
        beta = 0 > gamma:    sqrt(2/(pi t)) / |gamma|
        gamma = 0 > beta:    sqrt(2/(pi t)) / |beta|
        beta = gamma = 0:    1
        beta > max(gamma,0): sqrt(2/(pi t))/(beta-gamma)
                             + 2 beta/(beta-gamma) exp(-beta x + t beta^2/2)
        gamma > max(beta,0): same with beta and gamma exchanged
        gamma = beta > 0:    gamma sqrt(2t/pi) + 2 (t gamma^2 + 1)
                             exp(-gamma x + t gamma^2/2)
    """
    _check_time(t)
    if x < 0.0:
        raise DomainError(f"x must be nonnegative, got {x}")
    if beta == 0.0 and gamma == 0.0:
        return 1.0
    if beta < 0.0 and gamma < 0.0:
        return math.sqrt(2.0 / (math.pi * t**3)) * (
            _ratio(x, beta * gamma) + _ratio(abs(beta) + abs(gamma), beta**2 * gamma**2)
        )
    if beta == 0.0 and gamma < 0.0:
        return math.sqrt(2.0 / (math.pi * t)) / abs(gamma)
    if gamma == 0.0 and beta < 0.0:
        return math.sqrt(2.0 / (math.pi * t)) / abs(beta)
    if beta > 0.0 and beta > gamma:
        return math.sqrt(2.0 / (math.pi * t)) / (beta - gamma) + (
            2.0 * beta / (beta - gamma)
        ) * math.exp(-beta * x + t * beta**2 / 2.0)
    if gamma > 0.0 and gamma > beta:
        return math.sqrt(2.0 / (math.pi * t)) / (gamma - beta) + (
            2.0 * gamma / (gamma - beta)
        ) * math.exp(-gamma * x + t * gamma**2 / 2.0)
    # gamma == beta > 0
    return gamma * math.sqrt(2.0 * t / math.pi) + 2.0 * (t * gamma**2 + 1.0) * math.exp(
        -gamma * x + t * gamma**2 / 2.0
    )


def z_star(
    params: PenaltyParams, space: BranchSpace, x: float, k: str | None, t: float
) -> float:
    """Majorant Z* = sum_m mu_m I*(alpha_m, gamma, x, t) + J*(alpha_k, x, t)."""
    _check_time(t)
    _require_label(space, k, x)
    total = math.fsum(
        space.weights[m] * i_star(params.alpha[m], params.gamma, x, t) for m in space.labels
    )
    if x > 0.0:
        total += j_star(params.alpha[k], x, t)
    return total


def _asymptotic_log_parts(
    params: PenaltyParams, space: BranchSpace, x: float, k: str | None, u: float
) -> float:
    """log of the large-u equivalent of Z*(alpha, gamma, x, k, u).

    Seven rows; the exponentially growing rows are assembled in log-space so
    that ratios at astronomically large u stay computable.
    """
    gamma = params.gamma
    alphas = params.alpha_values(space)
    abar = max(alphas)
    in_argmax = k is not None and params.alpha[k] == abar

    if gamma > 0.0 and gamma >= abar:
        tie = [m for m in space.labels if params.alpha[m] == gamma]
        if tie:
            mass = math.fsum(space.weights[m] for m in tie)
            return math.log(2.0 * mass * u * gamma**2) - gamma * x + u * gamma**2 / 2.0
        coeff = math.fsum(
            2.0 * gamma * space.weights[m] / (gamma - params.alpha[m]) for m in space.labels
        )
        return math.log(coeff) - gamma * x + u * gamma**2 / 2.0
    if abar > gamma and abar > 0.0:
        mass = math.fsum(space.weights[m] for m in space.labels if params.alpha[m] == abar)
        bracket = (2.0 * abar / (abar - gamma)) * mass * math.exp(-abar * x)
        if in_argmax:
            bracket += 2.0 * math.sinh(abar * x)
        return math.log(bracket) + u * abar**2 / 2.0
    if gamma == 0.0:
        flat = [m for m in space.labels if params.alpha[m] == 0.0]
        if flat:
            return math.log(math.fsum(space.weights[m] for m in flat))
        coeff = math.fsum(space.weights[m] / abs(params.alpha[m]) for m in space.labels)
        return math.log(math.sqrt(2.0 / (math.pi * u)) * coeff)
    # gamma < 0, all alpha <= 0
    flat = [m for m in space.labels if params.alpha[m] == 0.0]
    if flat:
        mass = math.fsum(space.weights[m] for m in flat)
        bracket = mass / abs(gamma) + (x if in_argmax and abar == 0.0 else 0.0)
        return math.log(math.sqrt(2.0 / (math.pi * u)) * bracket)
    base = math.fsum(
        space.weights[m]
        * (abs(params.alpha[m]) + abs(gamma))
        / (params.alpha[m] ** 2 * gamma**2)
        for m in space.labels
    )
    slope = 0.0
    if k is not None:
        slope = 1.0 / params.alpha[k] ** 2 + math.fsum(
            space.weights[m] / (params.alpha[m] * gamma) for m in space.labels
        )
    return math.log(math.sqrt(2.0 / (math.pi * u**3)) * (base + slope * x))


def z_star_asymptotic_log(
    params: PenaltyParams, space: BranchSpace, x: float, k: str | None, u: float
) -> float:
    """Logarithm of :func:`z_star_asymptotic`; safe for very large u."""
    _check_time(u, "u")
    _require_label(space, k, x)
    return _asymptotic_log_parts(params, space, x, k, u)


def z_star_asymptotic(
    params: PenaltyParams, space: BranchSpace, x: float, k: str | None, u: float
) -> float:
    """Large-horizon equivalent of Z*(alpha, gamma, x, k, u).

    May overflow to ``inf`` for exponentially growing regimes at huge ``u``;
    ratio checks should go through :func:`asymptotic_density_ratio`, which
    works in log-space.
    """
    log_value = z_star_asymptotic_log(params, space, x, k, u)
    return math.exp(log_value) if log_value < 709.0 else math.inf


def asymptotic_density_ratio(
    params: PenaltyParams,
    space: BranchSpace,
    x: float,
    k: str | None,
    l: float,
    s: float,
    u: float,
) -> float:
    """exp(gamma l) Z~(x, k, u - s) / Z~(0, 0, u) with Z~ the Z* equivalent.

    Converges to the martingale density M(alpha, gamma, x, k, l, s) as u grows;
    evaluated in log-space so that u up to 1e8 and beyond is exact.
    """
    if not u > s:
        raise DomainError(f"u must exceed s, got u={u}, s={s}")
    log_num = z_star_asymptotic_log(params, space, x, k, u - s)
    log_den = z_star_asymptotic_log(params, space, 0.0, None, u)
    return math.exp(params.gamma * l + log_num - log_den)


def joint_density_local_time(x: float, t: float, l: float, y: float) -> float:
    """Joint density of (local time, distance) at time t for reflection from x.

        p(l, y) = sqrt(2/(pi t^3)) (l + x + y) exp(-(l + x + y)^2 / (2 t))

    on l > 0, y > 0, for a reflected Brownian motion started at ``x >= 0``.
    """
    _check_time(t)
    if x < 0.0:
        raise DomainError(f"x must be nonnegative, got {x}")
    if not (l > 0.0 and y > 0.0):
        raise DomainError(f"l and y must be positive, got l={l}, y={y}")
    r = l + x + y
    return math.sqrt(2.0 / (math.pi * t**3)) * r * math.exp(-(r**2) / (2.0 * t))


def radial_density(x: float, t: float, z: float) -> float:
    """Density of (local time + distance) at time t, on the event it is positive.

        sqrt(2/(pi t^3)) z (x + z) exp(-(x + z)^2 / (2 t)),  z > 0.
    """
    _check_time(t)
    if x < 0.0:
        raise DomainError(f"x must be nonnegative, got {x}")
    if z <= 0.0:
        return 0.0
    return math.sqrt(2.0 / (math.pi * t**3)) * z * (x + z) * math.exp(-((x + z) ** 2) / (2.0 * t))


def radial_cdf_from_origin(z: float, t: float) -> float:
    """CDF of local time + distance at time t for reflection from the origin.

    Integrates :func:`radial_density` at x = 0:
        F(z) = erf(z / sqrt(2 t)) - sqrt(2/(pi t)) z exp(-z^2 / (2 t)).
    """
    _check_time(t)
    if z <= 0.0:
        return 0.0
    return math.erf(z / math.sqrt(2.0 * t)) - math.sqrt(2.0 / (math.pi * t)) * z * math.exp(
        -(z**2) / (2.0 * t)
    )


def _first_hit_density(a: float, u: float) -> float:
    """Density at u of the first zero-hitting time from level a > 0."""
    if not (a > 0.0 and u > 0.0):
        raise DomainError(f"a and u must be positive, got a={a}, u={u}")
    return a / math.sqrt(2.0 * math.pi * u**3) * math.exp(-(a**2) / (2.0 * u))
