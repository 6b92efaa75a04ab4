"""Adaptive panel quadrature and the exact expectations it evaluates.

The majorants in :mod:`spiderlab.closed_forms` bound three exact expectations
for a Brownian motion started at ``x >= 0`` with first zero-hitting time T0:

    J(beta, x, t)        = E_x[exp(beta Y_t); T0 > t]
    I(beta, gamma, x, t) = E_x[exp(beta |Y_t| + gamma L_t); T0 <= t]
    Z(alpha, gamma, x, k, t) = sum_m mu_m I(alpha_m, gamma, x, t) + J(alpha_k, x, t)

J reduces by the reflection principle to a one-dimensional Gaussian integral;
I integrates the exponential against the joint (local time, distance) density.
Both are computed here with a fixed-order Gauss-Legendre rule per panel and
uniform panel doubling until the estimate is stable, over a domain truncated
where the integrand has decayed below 1e-18 of its peak.  The truncation
radius and final panel count are recorded in the result for auditability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .branches import BranchSpace, PenaltyParams
from .errors import DomainError, QuadratureFailure

__all__ = [
    "QuadResult",
    "panel_quad_1d",
    "panel_quad_2d",
    "j_exact",
    "i_exact",
    "z_exact",
]

_GAUSS_ORDER = 12
_NODES, _WEIGHTS = np.polynomial.legendre.leggauss(_GAUSS_ORDER)
_DECAY_LOG = 41.5  # -log(1e-18), with margin
_CHUNK_ROWS = 512


@dataclass(frozen=True)
class QuadResult:
    """Converged quadrature value with its audit trail."""

    value: float
    error: float        # |last refinement delta|
    truncation: float   # domain cutoff radius (largest axis)
    panels: int         # panels per axis at convergence


def _panel_points(a: float, b: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    edges = np.linspace(a, b, n + 1)
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    pts = mid[:, None] + half[:, None] * _NODES[None, :]
    wts = half[:, None] * np.broadcast_to(_WEIGHTS, (n, _GAUSS_ORDER))
    return pts.ravel(), wts.ravel()


def _initial_panels(span: float, feature_scale: float, n_min: int = 8) -> int:
    if span <= 0.0:
        return n_min
    return max(n_min, int(math.ceil(span / (4.0 * max(feature_scale, 1e-12)))))


def _converged(current: float, previous: float, tol: float) -> bool:
    return abs(current - previous) <= tol * max(1.0, abs(current))


def panel_quad_1d(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    *,
    tol: float,
    feature_scale: float,
    max_panels: int = 16384,
) -> QuadResult:
    """Integrate a vectorized integrand on [a, b] by panel doubling.

    Converges when successive doublings agree within ``tol * max(1, |value|)``.
    """
    if not tol > 0.0:
        raise DomainError(f"tol must be positive, got {tol}")
    if b <= a:
        return QuadResult(0.0, 0.0, b, 0)
    n = min(_initial_panels(b - a, feature_scale), max_panels)
    pts, wts = _panel_points(a, b, n)
    value = float(wts @ f(pts))
    while True:
        if 2 * n > max_panels:
            raise QuadratureFailure(
                f"1d quadrature did not reach tol={tol} within {max_panels} panels"
            )
        n *= 2
        pts, wts = _panel_points(a, b, n)
        refined = float(wts @ f(pts))
        if _converged(refined, value, tol):
            return QuadResult(refined, abs(refined - value), b, n)
        value = refined


def _tensor_eval(
    f: Callable[[np.ndarray, np.ndarray], np.ndarray],
    pts_x: np.ndarray,
    wts_x: np.ndarray,
    pts_y: np.ndarray,
    wts_y: np.ndarray,
) -> float:
    total = 0.0
    for i in range(0, pts_x.size, _CHUNK_ROWS):
        xs = pts_x[i : i + _CHUNK_ROWS]
        ws = wts_x[i : i + _CHUNK_ROWS]
        block = f(xs[:, None], pts_y[None, :])
        total += float(ws @ (block @ wts_y))
    return total


def panel_quad_2d(
    f: Callable[[np.ndarray, np.ndarray], np.ndarray],
    bounds_x: tuple[float, float],
    bounds_y: tuple[float, float],
    *,
    tol: float,
    feature_scale_x: float,
    feature_scale_y: float,
    max_panels: int = 4096,
) -> QuadResult:
    """Tensor-product analogue of :func:`panel_quad_1d` on a rectangle."""
    if not tol > 0.0:
        raise DomainError(f"tol must be positive, got {tol}")
    ax, bx = bounds_x
    ay, by = bounds_y
    if bx <= ax or by <= ay:
        return QuadResult(0.0, 0.0, max(bx, by), 0)
    nx = min(_initial_panels(bx - ax, feature_scale_x), max_panels)
    ny = min(_initial_panels(by - ay, feature_scale_y), max_panels)
    px, wx = _panel_points(ax, bx, nx)
    py, wy = _panel_points(ay, by, ny)
    value = _tensor_eval(f, px, wx, py, wy)
    while True:
        if 2 * max(nx, ny) > max_panels:
            raise QuadratureFailure(
                f"2d quadrature did not reach tol={tol} within {max_panels} panels per axis"
            )
        nx *= 2
        ny *= 2
        px, wx = _panel_points(ax, bx, nx)
        py, wy = _panel_points(ay, by, ny)
        refined = _tensor_eval(f, px, wx, py, wy)
        if _converged(refined, value, tol):
            return QuadResult(refined, abs(refined - value), max(bx, by), max(nx, ny))
        value = refined


def _growth_cutoff(coef: float, t: float, offset: float = 0.0) -> float:
    """Distance beyond which exp(coef * y) * Gaussian(t) has dropped 1e-18-fold."""
    if coef > 0.0:
        return offset + coef * t + 12.0 * math.sqrt(t)
    if coef == 0.0:
        return offset + 12.0 * math.sqrt(t)
    return offset + min(12.0 * math.sqrt(t), _DECAY_LOG / -coef + 1.0)


def _feature_scale(coef: float, t: float) -> float:
    return min(math.sqrt(t), 1.0 / (1.0 + abs(coef)))


def j_exact(beta: float, x: float, t: float, tol: float = 1e-11) -> QuadResult:
    """No-return expectation J(beta, x, t) by reflection-principle quadrature.

        J = (1/sqrt(2 pi t)) \\int_0^inf (e^{-(x-y)^2/2t} - e^{-(x+y)^2/2t}) e^{beta y} dy

    evaluated in the cancellation-free form
    ``exp(-(x-y)^2/2t + beta y + log1p(-exp(-2xy/t)))``.
    Identically zero from the origin.
    """
    if not t > 0.0:
        raise DomainError(f"t must be > 0, got {t}")
    if x < 0.0:
        raise DomainError(f"x must be nonnegative, got {x}")
    if x == 0.0:
        return QuadResult(0.0, 0.0, 0.0, 0)
    norm = 1.0 / math.sqrt(2.0 * math.pi * t)

    def integrand(y: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore"):
            log_diff = np.log1p(-np.exp(-2.0 * x * y / t))
        return norm * np.exp(-((x - y) ** 2) / (2.0 * t) + beta * y + log_diff)

    y_max = _growth_cutoff(beta, t, offset=x)
    return panel_quad_1d(
        integrand, 0.0, y_max, tol=tol, feature_scale=_feature_scale(beta, t)
    )


def i_exact(beta: float, gamma: float, x: float, t: float, tol: float = 1e-11) -> QuadResult:
    """Return expectation I(beta, gamma, x, t) by 2d quadrature.

    Integrates exp(beta y + gamma l) against the joint (local time, distance)
    density sqrt(2/(pi t^3)) (l+x+y) exp(-(l+x+y)^2 / 2t) over (0, inf)^2.
    """
    if not t > 0.0:
        raise DomainError(f"t must be > 0, got {t}")
    if x < 0.0:
        raise DomainError(f"x must be nonnegative, got {x}")
    norm = math.sqrt(2.0 / (math.pi * t**3))

    def integrand(l: np.ndarray, y: np.ndarray) -> np.ndarray:
        r = l + x + y
        return norm * r * np.exp(beta * y + gamma * l - r**2 / (2.0 * t))

    l_max = _growth_cutoff(gamma, t, offset=x)
    y_max = _growth_cutoff(beta, t, offset=x)
    return panel_quad_2d(
        integrand,
        (0.0, l_max),
        (0.0, y_max),
        tol=tol,
        feature_scale_x=_feature_scale(gamma, t),
        feature_scale_y=_feature_scale(beta, t),
    )


def z_exact(
    params: PenaltyParams,
    space: BranchSpace,
    x: float,
    k: str | None,
    t: float,
    tol: float = 1e-11,
) -> QuadResult:
    """Exact normalizer Z(alpha, gamma, x, k, t); one I per distinct slope."""
    if k is None and x != 0.0:
        raise ValueError("a branch label is required when x > 0")
    if k is not None and k not in space.weights:
        raise ValueError(f"unknown branch label {k!r}")
    cache: dict[float, QuadResult] = {}
    total = 0.0
    error = 0.0
    truncation = 0.0
    panels = 0
    for m in space.labels:
        a = params.alpha[m]
        if a not in cache:
            cache[a] = i_exact(a, params.gamma, x, t, tol=tol)
        part = cache[a]
        total += space.weights[m] * part.value
        error += space.weights[m] * part.error
        truncation = max(truncation, part.truncation)
        panels = max(panels, part.panels)
    if x > 0.0:
        jr = j_exact(params.alpha[k], x, t, tol=tol)
        total += jr.value
        error += jr.error
        truncation = max(truncation, jr.truncation)
        panels = max(panels, jr.panels)
    return QuadResult(total, error, truncation, panels)
