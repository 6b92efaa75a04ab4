"""Reusable statistical experiments tying samplers to closed forms.

Each procedure draws everything it needs from numbered streams under one
seed, so a (procedure, parameters, seed) triple fully determines its output.
The CLI wraps these into CSV-emitting experiment kinds; the acceptance suite
asserts on their results directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special as sp_special

from .branches import BranchSpace, PenaltyParams, limit_branch_law
from .errors import ConfigError, HorizonTooShort
from .limit_laws import sample_case4, sample_drifted_reflected_with_l_inf
from .rng import RngStream
from .spider import excursions, sample_reflected_batch
from .verify import (
    ChiSquareResult,
    KsResult,
    McEstimate,
    chi_square_fit,
    distance_correlation,
    effective_sample_size,
    ks_one_sample,
    ks_two_sample,
    weighted_resample,
)

__all__ = [
    "RadialCheck",
    "BangBangCheck",
    "DriftCheck",
    "SpliceCheck",
    "radial_angular_check",
    "bang_bang_terminal_batch",
    "bang_bang_match_check",
    "drift_l_inf_check",
    "splice_check",
]


@dataclass(frozen=True)
class RadialCheck:
    """Joint law of (local time + distance, angular fraction) at a fixed time."""

    ks_radial: KsResult
    ks_theta: KsResult
    dcor: float
    dcor_max: float
    n: int

    @property
    def passed(self) -> bool:
        return (
            not self.ks_radial.threshold_exceeded
            and not self.ks_theta.threshold_exceeded
            and self.dcor < self.dcor_max
        )


def radial_angular_check(
    n: int,
    t: float,
    step: float,
    seed: int,
    dcor_max: float = 0.05,
) -> RadialCheck:
    """From the origin, L_t + X_t follows the radial density
    sqrt(2/(pi t^3)) z^2 exp(-z^2/2t) and X_t/(L_t + X_t) is uniform on [0,1],
    independent of the radius; both are tested at the 1% level.
    """
    xs, ls = sample_reflected_batch(n, t, step, RngStream(seed, 0))
    radial = ls + xs
    keep = ls > 0.0
    radial = radial[keep]
    theta = xs[keep] / (ls + xs)[keep]

    def radial_cdf(z: np.ndarray) -> np.ndarray:
        return sp_special.erf(z / math.sqrt(2.0 * t)) - np.sqrt(
            2.0 / (math.pi * t)
        ) * z * np.exp(-(z**2) / (2.0 * t))

    ks_radial = ks_one_sample(radial, radial_cdf)
    ks_theta = ks_one_sample(theta, lambda u: np.clip(u, 0.0, 1.0))
    dcor = distance_correlation(radial, theta)
    return RadialCheck(ks_radial, ks_theta, dcor, dcor_max, int(radial.size))


def bang_bang_terminal_batch(
    gamma: float, n_paths: int, t: float, step: float, stream: RngStream, block: int = 256
) -> np.ndarray:
    """Terminal values of the reflected bang-bang construction S - Y."""
    if not gamma > 0.0:
        raise ConfigError(f"gamma must be positive, got {gamma}")
    n = int(round(t / step))
    if n < 1:
        raise ConfigError(f"step {step} exceeds horizon {t}")
    rng = stream.generator()
    out = np.empty(n_paths)
    root = math.sqrt(step)
    for lo in range(0, n_paths, block):
        hi = min(lo + block, n_paths)
        y = np.cumsum(rng.standard_normal((hi - lo, n)) * root + gamma * step, axis=1)
        s = np.maximum(y.max(axis=1), 0.0)
        out[lo:hi] = s - y[:, -1]
    return out


@dataclass(frozen=True)
class BangBangCheck:
    """Reweighted spider endpoint against the bang-bang endpoint."""

    ks: KsResult
    resample_size: int
    n: int

    @property
    def passed(self) -> bool:
        return not self.ks.threshold_exceeded


def bang_bang_match_check(
    gamma: float, n: int, t: float, step: float, seed: int, pool: int | None = None
) -> BangBangCheck:
    """Two-sample KS between spider endpoints resampled by the dominant-gamma
    density exp(gamma (L - X) - t gamma^2/2) and bang-bang endpoints.

    The spider pool is larger than the requested KS sample (default 10x) so
    that the pool's own weighted-CDF noise is negligible next to the n-vs-n
    comparison and the standard two-sample critical value stays calibrated.
    """
    pool = 10 * n if pool is None else pool
    xs, ls = sample_reflected_batch(pool, t, step, RngStream(seed, 0))
    log_w = gamma * (ls - xs) - t * gamma**2 / 2.0
    weights = np.exp(log_w - log_w.max())
    size = min(n, int(effective_sample_size(weights)))
    resampled = weighted_resample(xs, weights, RngStream(seed, 1), size=size)
    bb = bang_bang_terminal_batch(gamma, n, t, step, RngStream(seed, 2))
    return BangBangCheck(ks_two_sample(resampled, bb), int(resampled.size), n)


@dataclass(frozen=True)
class DriftCheck:
    """Total local time of the reflected drifted motion, plain or reweighted."""

    ks: KsResult
    weight_mean: McEstimate | None
    l_inf: np.ndarray
    rate: float  # exponential rate the KS was run against

    @property
    def passed(self) -> bool:
        ok = not self.ks.threshold_exceeded
        if self.weight_mean is not None:
            ok = ok and self.weight_mean.within(1.0)
        return ok


def _resampled_exponential_ks_threshold(
    alpha_bar: float,
    gamma: float,
    n: int,
    stream: RngStream,
    reps: int = 400,
) -> float:
    """1% critical value, by parametric bootstrap, of the one-sample KS
    statistic computed on values resampled from an exponentially reweighted
    pool.

    Resampling from a finite weighted pool disperses the statistic well beyond
    the i.i.d. one-sample critical value (the pool's weighted CDF carries its
    own noise of order 1/sqrt(ess)), so the threshold is calibrated under the
    exact null: pool ~ Exp(alpha_bar), weight proportional to exp(gamma l),
    target Exp(alpha_bar - gamma).
    """
    rate = alpha_bar - gamma
    rng = stream.generator()
    stats = np.empty(reps)
    for r in range(reps):
        pool = rng.exponential(1.0 / alpha_bar, n)
        weights = np.exp(gamma * pool)
        size = min(n, int(effective_sample_size(weights)))
        counts = rng.multinomial(size, weights / weights.sum())
        resampled = np.repeat(pool, counts)
        stats[r] = ks_one_sample(
            resampled, lambda z: 1.0 - np.exp(-rate * np.clip(z, 0.0, None))
        ).statistic
    return float(np.quantile(stats, 0.99))


def drift_l_inf_check(
    alpha_bar: float,
    gamma: float,
    n: int,
    step: float,
    seed: int,
    tail_eps: float = 1e-6,
) -> DriftCheck:
    """L_inf of the drift-abar reflected motion is Exp(abar); reweighted by
    ((abar-gamma)/abar) exp(gamma L_inf) it becomes Exp(abar - gamma) and the
    weight has unit mean.

    For gamma != 0 the KS runs on weight-resampled values against the
    Exp(abar - gamma) law, with its critical value calibrated to the
    resampling mechanism (see _resampled_exponential_ks_threshold).
    """
    if not alpha_bar > max(gamma, 0.0):
        raise ConfigError(f"need alpha_bar > max(gamma, 0), got {alpha_bar}, {gamma}")
    l_inf = np.empty(n)
    for i in range(n):
        _, l_inf[i] = sample_drifted_reflected_with_l_inf(
            alpha_bar, step, RngStream(seed, i), tail_eps=tail_eps
        )
    if gamma == 0.0:
        rate = alpha_bar
        ks = ks_one_sample(l_inf, lambda z: 1.0 - np.exp(-rate * np.clip(z, 0.0, None)))
        return DriftCheck(ks, None, l_inf, rate)
    weights = (alpha_bar - gamma) / alpha_bar * np.exp(gamma * l_inf)
    mean = float(weights.mean())
    se = float(weights.std(ddof=1) / math.sqrt(n))
    rate = alpha_bar - gamma
    resampled = weighted_resample(l_inf, weights, RngStream(seed, n))
    raw = ks_one_sample(resampled, lambda z: 1.0 - np.exp(-rate * np.clip(z, 0.0, None)))
    threshold = _resampled_exponential_ks_threshold(
        alpha_bar, gamma, n, RngStream(seed, n + 1)
    )
    ks = KsResult(raw.statistic, threshold)
    return DriftCheck(ks, McEstimate(mean, se, n), l_inf, rate)


@dataclass(frozen=True)
class SpliceCheck:
    """Exponential splice level, terminal branch law, and Bessel tail."""

    ks_l_inf: KsResult
    chi_branch: ChiSquareResult
    chi_pre_labels: ChiSquareResult
    slope: float
    n_accepted: int
    n_discarded: int

    @property
    def slope_rel_err(self) -> float:
        return abs(self.slope / 3.0 - 1.0)

    @property
    def passed(self) -> bool:
        return (
            not self.ks_l_inf.threshold_exceeded
            and not self.chi_branch.threshold_exceeded
            and not self.chi_pre_labels.threshold_exceeded
            and self.slope_rel_err < 0.05
        )


def splice_check(
    params: PenaltyParams,
    space: BranchSpace,
    n: int,
    step: float,
    search_horizon: float,
    post_horizon: float,
    seed: int,
) -> SpliceCheck:
    """Sample the negative-gamma limit process and test its three signatures:
    frozen local time Exp(|gamma|), terminal branch occupancy, and the squared
    Bessel tail growing linearly with slope 3.

    Trajectories whose splice time exceeds the search horizon are discarded
    and counted; the horizon should be large enough to keep that rate small.
    """
    law = limit_branch_law(params, space)
    probs = np.array([law[m] for m in space.labels])
    mu = np.array([space.weights[m] for m in space.labels])
    m_post = max(1, int(round(post_horizon / step)))

    l_infs = np.empty(n)
    branch_counts = np.zeros(len(space.labels))
    pre_counts = np.zeros(len(space.labels))
    sq_sum = np.zeros(m_post + 1)
    accepted = 0
    discarded = 0
    stream_index = 0
    while accepted < n:
        try:
            path = sample_case4(
                params,
                space,
                search_horizon,
                step,
                RngStream(seed, stream_index),
                post_horizon=post_horizon,
            )
        except HorizonTooShort:
            discarded += 1
            stream_index += 1
            continue
        stream_index += 1
        l_infs[accepted] = path.local_time[-1]
        branch_counts[path.branch_idx[-1]] += 1
        exc = excursions(path)
        for _, _, label in exc[:-1]:
            pre_counts[space.index_of(label)] += 1
        sq_sum += path.x[-(m_post + 1):] ** 2
        accepted += 1

    rate = abs(params.gamma)
    ks = ks_one_sample(l_infs, lambda z: 1.0 - np.exp(-rate * np.clip(z, 0.0, None)))
    chi_branch = chi_square_fit(branch_counts, probs)
    chi_pre = chi_square_fit(pre_counts, mu)
    offsets = np.arange(m_post + 1) * step
    mean_sq = sq_sum / n
    slope = float(np.dot(offsets, mean_sq) / np.dot(offsets, offsets))
    return SpliceCheck(ks, chi_branch, chi_pre, slope, accepted, discarded)
