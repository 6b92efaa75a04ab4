"""Branch spaces, penalty parameters, and regime classification.

A spider lives on a finite set of labelled half-lines (branches) glued at the
origin; each branch ``m`` carries a strictly positive weight ``mu_m`` and the
weights sum to one.  An exponential penalization is parameterized by one slope
``alpha_m`` per branch plus a local-time rate ``gamma``.  The long-horizon
behaviour of the penalized measure is governed by which of five parameter
regimes ``(alpha, gamma)`` falls into; this module houses that classification
together with the slope coefficients (theta weights) and the terminal branch
law of the negative-gamma regimes.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Mapping

from .errors import RegimeMismatch

__all__ = [
    "BranchSpace",
    "PenaltyParams",
    "Regime",
    "RegimeTag",
    "ThetaWeights",
    "classify_regime",
    "theta_weights",
    "limit_branch_law",
]

_WEIGHT_TOL = 1e-12


@dataclass(frozen=True)
class BranchSpace:
    """Finite set of branch labels with strictly positive weights summing to 1."""

    labels: tuple[str, ...]
    weights: Mapping[str, float]

    def __post_init__(self):
        if len(self.labels) == 0:
            raise ValueError("branch space needs at least one label")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("branch labels must be distinct")
        if set(self.weights) != set(self.labels):
            raise ValueError("weights must be defined on exactly the labels")
        for m in self.labels:
            if not self.weights[m] > 0.0:
                raise ValueError(f"weight of branch {m!r} must be > 0, got {self.weights[m]}")
        total = math.fsum(self.weights[m] for m in self.labels)
        if abs(total - 1.0) > _WEIGHT_TOL:
            raise ValueError(f"branch weights must sum to 1 within {_WEIGHT_TOL}, got {total!r}")

    @classmethod
    def from_weights(cls, weights: Mapping[str, float]) -> "BranchSpace":
        """Build a space whose label order follows the mapping order."""
        return cls(tuple(weights), dict(weights))

    def mu(self, label: str) -> float:
        return self.weights[label]

    def index_of(self, label: str) -> int:
        return self.labels.index(label)


@dataclass(frozen=True)
class PenaltyParams:
    """Per-branch exponential slopes plus the local-time rate."""

    alpha: Mapping[str, float]
    gamma: float

    def alpha_values(self, space: BranchSpace) -> tuple[float, ...]:
        return tuple(self.alpha[m] for m in space.labels)


class RegimeTag(enum.Enum):
    DOMINANT_GAMMA = "dominant-gamma"
    DOMINANT_ALPHA = "dominant-alpha"
    NEUTRAL = "neutral"
    NEG_GAMMA_FLAT_MAX = "neg-gamma-flat-max"
    NEG_GAMMA_ALL_NEG = "neg-gamma-all-neg"


@dataclass(frozen=True)
class Regime:
    """One row of the five-regime parameter classification.

    ``argmax_set`` holds the branches attaining the maximal slope (for
    DOMINANT_ALPHA) or the zero slope (for NEG_GAMMA_FLAT_MAX); ``alpha_bar``
    is the maximal slope when it dominates.
    """

    tag: RegimeTag
    argmax_set: frozenset[str] | None = None
    alpha_bar: float | None = None


def _check_pair(params: PenaltyParams, space: BranchSpace) -> None:
    if set(params.alpha) != set(space.labels):
        raise ValueError("alpha must be defined on exactly the labels of the branch space")


def classify_regime(params: PenaltyParams, space: BranchSpace) -> Regime:
    """Map ``(alpha, gamma)`` to the unique regime row covering it.

    The classifier is total.  Ties resolve as follows: ``gamma == max(alpha) > 0``
    is DOMINANT_GAMMA (its condition allows equality), and DOMINANT_ALPHA
    requires the strict inequalities ``max(alpha) > gamma`` and ``max(alpha) > 0``.
    """
    _check_pair(params, space)
    gamma = params.gamma
    alphas = params.alpha_values(space)
    alpha_bar = max(alphas)

    if alpha_bar > gamma and alpha_bar > 0.0:
        argmax = frozenset(m for m in space.labels if params.alpha[m] == alpha_bar)
        return Regime(RegimeTag.DOMINANT_ALPHA, argmax_set=argmax, alpha_bar=alpha_bar)
    if gamma > 0.0:
        # here gamma >= alpha_bar, hence gamma >= alpha_m for every branch
        return Regime(RegimeTag.DOMINANT_GAMMA)
    if gamma == 0.0:
        return Regime(RegimeTag.NEUTRAL)
    # gamma < 0 and alpha_bar <= max(gamma, 0) = 0
    flat = frozenset(m for m in space.labels if params.alpha[m] == 0.0)
    if flat:
        return Regime(RegimeTag.NEG_GAMMA_FLAT_MAX, argmax_set=flat)
    return Regime(RegimeTag.NEG_GAMMA_ALL_NEG)


@dataclass(frozen=True)
class ThetaWeights:
    """Slope coefficients of the negative-gamma densities, one per branch."""

    theta: Mapping[str, float]


def theta_weights(params: PenaltyParams, space: BranchSpace) -> ThetaWeights:
    """Slope coefficients for the negative-gamma regimes.

    Flat-max row: ``theta_k = |gamma| / sum_{m in J} mu_m`` on the zero-slope
    set J and 0 elsewhere.  All-negative row:

        theta_k = (1/alpha_k^2 + sum_m mu_m/(alpha_m gamma))
                  / (sum_m mu_m (|alpha_m|+|gamma|)/(alpha_m^2 gamma^2))

    Either way the weights are nonnegative and satisfy the normalization
    ``sum_k mu_k theta_k = |gamma|``.
    """
    _check_pair(params, space)
    regime = classify_regime(params, space)
    gamma = params.gamma
    if regime.tag is RegimeTag.NEG_GAMMA_FLAT_MAX:
        mass = math.fsum(space.weights[m] for m in regime.argmax_set)
        theta = {
            m: (abs(gamma) / mass if m in regime.argmax_set else 0.0) for m in space.labels
        }
    elif regime.tag is RegimeTag.NEG_GAMMA_ALL_NEG:
        denom = math.fsum(
            space.weights[m] * (abs(params.alpha[m]) + abs(gamma)) / (params.alpha[m] ** 2 * gamma**2)
            for m in space.labels
        )
        cross = math.fsum(space.weights[m] / (params.alpha[m] * gamma) for m in space.labels)
        theta = {m: (1.0 / params.alpha[m] ** 2 + cross) / denom for m in space.labels}
    else:
        raise RegimeMismatch(
            f"theta weights require gamma < 0 and alpha <= 0 on every branch; regime is {regime.tag.value}"
        )
    total = math.fsum(space.weights[m] * theta[m] for m in space.labels)
    assert abs(total - abs(gamma)) <= 1e-9 * max(1.0, abs(gamma))
    return ThetaWeights(theta)


def limit_branch_law(params: PenaltyParams, space: BranchSpace) -> dict[str, float]:
    """Distribution of the branch carrying the final unbounded excursion.

    Only meaningful in the negative-gamma regimes.  With J the zero-slope set:

        P(V = m) = mu_m / sum_{k in J} mu_k            if m in J != {}
        P(V = m) = mu_m (|gamma|/alpha_m^2 + sum_k mu_k/|alpha_k|)
                   / sum_k mu_k (|alpha_k|+|gamma|)/alpha_k^2     if J == {}
    """
    _check_pair(params, space)
    regime = classify_regime(params, space)
    gamma = params.gamma
    if regime.tag is RegimeTag.NEG_GAMMA_FLAT_MAX:
        mass = math.fsum(space.weights[m] for m in regime.argmax_set)
        return {
            m: (space.weights[m] / mass if m in regime.argmax_set else 0.0)
            for m in space.labels
        }
    if regime.tag is RegimeTag.NEG_GAMMA_ALL_NEG:
        inv_abs = math.fsum(space.weights[k] / abs(params.alpha[k]) for k in space.labels)
        denom = math.fsum(
            space.weights[k] * (abs(params.alpha[k]) + abs(gamma)) / params.alpha[k] ** 2
            for k in space.labels
        )
        return {
            m: space.weights[m] * (abs(gamma) / params.alpha[m] ** 2 + inv_abs) / denom
            for m in space.labels
        }
    raise RegimeMismatch(
        f"limit branch law requires gamma < 0 and alpha <= 0 on every branch; regime is {regime.tag.value}"
    )
