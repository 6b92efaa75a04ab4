"""Statistical verification: Monte Carlo estimates, distribution tests, and
the product-form density characterization checker.

Monte Carlo loops assign one counter-based stream per trajectory and reduce
in trajectory order, so estimates are reproducible and independent of worker
count.  Distribution tests (Kolmogorov-Smirnov, chi-square, distance
correlation) use standard asymptotic 1% critical values.
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np
from scipy import stats as sp_stats

from .branches import BranchSpace, PenaltyParams
from .closed_forms import martingale_density
from .errors import EmptySample, HeavyTailWarning, NonFiniteSample
from .quadrature import z_exact
from .closed_forms import z_star
from .rng import RngStream
from .spider import path_stats, simulate_spider

__all__ = [
    "McEstimate",
    "KsResult",
    "ChiSquareResult",
    "PenalizedRow",
    "ZConvergenceRow",
    "Theorem3Report",
    "CheckRecord",
    "mc_expectation",
    "martingale_check",
    "penalized_vs_limit",
    "z_convergence_check",
    "ks_two_sample",
    "ks_one_sample",
    "chi_square_fit",
    "distance_correlation",
    "effective_sample_size",
    "weighted_resample",
    "theorem3_check",
]

KS_CRITICAL_1PCT = 1.628  # asymptotic Kolmogorov constant at the 1% level


@dataclass(frozen=True)
class McEstimate:
    """Sample mean with its standard error (sample sd / sqrt(n))."""

    mean: float
    std_error: float
    n: int

    def within(self, target: float, sigmas: float = 4.0, floor: float = 0.0) -> bool:
        return abs(self.mean - target) <= max(sigmas * self.std_error, floor)


def _resolve_workers(workers: int | None) -> int:
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get("SPIDERLAB_WORKERS", "")
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        return 1


def mc_expectation(
    sampler: Callable[[RngStream], Any],
    functional: Callable[[Any], float],
    n: int,
    seed: int,
    workers: int | None = None,
) -> McEstimate:
    """Unbiased mean and standard error of functional(sampler(stream_i)).

    Trajectory i always uses stream (seed, i); the reduction is by trajectory
    index, so the estimate is bit-identical for any worker count.
    """
    if n < 2:
        raise ValueError(f"need at least 2 trajectories, got {n}")
    values = np.empty(n)

    def run(i: int) -> None:
        values[i] = functional(sampler(RngStream(seed, i)))

    n_workers = _resolve_workers(workers)
    if n_workers == 1:
        for i in range(n):
            run(i)
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            list(pool.map(run, range(n), chunksize=max(1, n // (8 * n_workers))))
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise NonFiniteSample(int(bad[0]), float(values[bad[0]]))
    mean = float(np.mean(values))
    std_error = float(np.std(values, ddof=1) / math.sqrt(n))
    return McEstimate(mean, std_error, n)


def martingale_check(
    params: PenaltyParams,
    space: BranchSpace,
    s: float,
    n: int,
    step: float,
    seed: int,
    workers: int | None = None,
) -> McEstimate:
    """Estimate E[M(alpha, gamma, X_s, N_s, L_s, s)] over spider paths.

    The density process has unit mean at every time, so the estimate should
    sit within Monte Carlo error of 1 in every regime.
    """

    def functional(path) -> float:
        x, branch, ltime = path_stats(path, s)
        return martingale_density(params, space, x, branch, ltime, s)

    return mc_expectation(
        lambda stream: simulate_spider(space, s, step, stream),
        functional,
        n,
        seed,
        workers=workers,
    )


@dataclass(frozen=True)
class PenalizedRow:
    """One horizon of the penalized-vs-limit comparison."""

    t: float
    penalized: float
    limit: float
    ess: float
    warned: bool

    @property
    def difference(self) -> float:
        return self.penalized - self.limit


def penalized_vs_limit(
    params: PenaltyParams,
    space: BranchSpace,
    s: float,
    t_grid: Sequence[float],
    functional: Callable[[float, str | None, float], float],
    n: int,
    step: float,
    seed: int,
    ess_floor: float = 100.0,
    kurtosis_bound: float = 100.0,
    workers: int | None = None,
) -> list[PenalizedRow]:
    """Finite-horizon penalized expectations of an s-past functional against
    the limit-density expectation.

    For each horizon t the penalized column is
    E[F exp(alpha_N X_t + gamma L_t)] / E[exp(alpha_N X_t + gamma L_t)]
    and the limit column the self-normalized E[F M_s] / E[M_s] (the density
    M_s has unit mean, and normalizing makes the constant functional exact);
    the columns converge to each other as t grows.  All horizons share
    trajectories (common random numbers).  A HeavyTailWarning is issued, with
    the effective sample size, whenever the weights are too heavy-tailed for
    the comparison to be trustworthy.
    """
    t_grid = [float(t) for t in t_grid]
    if any(t <= s for t in t_grid):
        raise ValueError(f"every horizon must exceed s={s}, got {t_grid}")
    t_max = max(t_grid)
    f_vals = np.empty(n)
    m_vals = np.empty(n)
    w_vals = np.empty((n, len(t_grid)))

    def run(i: int) -> None:
        path = simulate_spider(space, t_max, step, RngStream(seed, i))
        x, branch, ltime = path_stats(path, s)
        f_vals[i] = functional(x, branch, ltime)
        m_vals[i] = martingale_density(params, space, x, branch, ltime, s)
        for j, t in enumerate(t_grid):
            xt, bt, lt = path_stats(path, t)
            slope = params.alpha[bt] if bt is not None else 0.0
            w_vals[i, j] = math.exp(slope * xt + params.gamma * lt)

    n_workers = _resolve_workers(workers)
    if n_workers == 1:
        for i in range(n):
            run(i)
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            list(pool.map(run, range(n), chunksize=max(1, n // (8 * n_workers))))

    limit = float(np.sum(f_vals * m_vals) / np.sum(m_vals))
    rows = []
    for j, t in enumerate(t_grid):
        w = w_vals[:, j]
        penalized = float(np.sum(f_vals * w) / np.sum(w))
        ess = effective_sample_size(w)
        centred = w - w.mean()
        m2 = float(np.mean(centred**2))
        kurt = float(np.mean(centred**4) / m2**2) if m2 > 0 else 0.0
        warned = ess < ess_floor or kurt > kurtosis_bound
        if warned:
            warnings.warn(
                HeavyTailWarning(
                    f"penalization weights at t={t} are heavy-tailed "
                    f"(ess={ess:.1f}, kurtosis={kurt:.1f}); "
                    "convergence cannot be asserted at this horizon"
                ),
                stacklevel=2,
            )
        rows.append(PenalizedRow(t, penalized, limit, ess, warned))
    return rows


@dataclass(frozen=True)
class ZConvergenceRow:
    t: float
    z_exact: float
    z_star: float

    @property
    def ratio(self) -> float:
        return self.z_exact / self.z_star


def z_convergence_check(
    params: PenaltyParams,
    space: BranchSpace,
    t_grid: Sequence[float],
    x: float = 0.0,
    k: str | None = None,
    tol: float = 1e-11,
) -> list[ZConvergenceRow]:
    """Exact normalizer against its majorant along a horizon grid.

    The ratio column lies in (0, 1] and approaches 1 as t grows.
    """
    t_grid = [float(t) for t in t_grid]
    if not t_grid or any(t <= 0 for t in t_grid) or sorted(t_grid) != t_grid:
        raise ValueError(f"t_grid must be positive and increasing, got {t_grid}")
    if k is None and x == 0.0 and space.labels:
        k = space.labels[0]
    return [
        ZConvergenceRow(
            t,
            z_exact(params, space, x, k, t, tol=tol).value,
            z_star(params, space, x, k, t),
        )
        for t in t_grid
    ]


@dataclass(frozen=True)
class KsResult:
    """Kolmogorov-Smirnov statistic with its 1% asymptotic critical value."""

    statistic: float
    threshold: float

    @property
    def threshold_exceeded(self) -> bool:
        return self.statistic > self.threshold


def ks_two_sample(a: Sequence[float], b: Sequence[float]) -> KsResult:
    """Two-sample KS statistic; 1% critical value 1.628 sqrt((n+m)/(nm))."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size == 0 or b.size == 0:
        raise EmptySample("both samples must be nonempty")
    a_sorted = np.sort(a)
    b_sorted = np.sort(b)
    grid = np.concatenate([a_sorted, b_sorted])
    cdf_a = np.searchsorted(a_sorted, grid, side="right") / a.size
    cdf_b = np.searchsorted(b_sorted, grid, side="right") / b.size
    statistic = float(np.max(np.abs(cdf_a - cdf_b)))
    threshold = KS_CRITICAL_1PCT * math.sqrt((a.size + b.size) / (a.size * b.size))
    return KsResult(statistic, threshold)


def ks_one_sample(sample: Sequence[float], cdf: Callable[[np.ndarray], np.ndarray]) -> KsResult:
    """One-sample KS statistic against an analytic CDF."""
    sample = np.asarray(sample, dtype=float)
    if sample.size == 0:
        raise EmptySample("sample must be nonempty")
    xs = np.sort(sample)
    n = xs.size
    theo = np.asarray(cdf(xs), dtype=float)
    upper = np.arange(1, n + 1) / n
    lower = np.arange(0, n) / n
    statistic = float(max(np.max(np.abs(theo - upper)), np.max(np.abs(theo - lower))))
    return KsResult(statistic, KS_CRITICAL_1PCT / math.sqrt(n))


@dataclass(frozen=True)
class ChiSquareResult:
    statistic: float
    dof: int
    threshold: float

    @property
    def threshold_exceeded(self) -> bool:
        return self.statistic > self.threshold


def chi_square_fit(counts: Sequence[float], probs: Sequence[float]) -> ChiSquareResult:
    """Pearson chi-square of observed counts against cell probabilities (1% level).

    Cells with zero probability must have zero counts and drop out of the
    statistic (and of the degrees of freedom).
    """
    counts = np.asarray(counts, dtype=float)
    probs = np.asarray(probs, dtype=float)
    if counts.size == 0 or counts.size != probs.size:
        raise ValueError("counts and probs must be equally sized and nonempty")
    total = counts.sum()
    if total <= 0:
        raise EmptySample("no observations")
    live = probs > 0.0
    if np.any(counts[~live] > 0):
        return ChiSquareResult(math.inf, max(int(live.sum()) - 1, 1), 0.0)
    expected = total * probs[live]
    statistic = float(np.sum((counts[live] - expected) ** 2 / expected))
    dof = max(int(live.sum()) - 1, 1)
    threshold = float(sp_stats.chi2.ppf(0.99, dof))
    return ChiSquareResult(statistic, dof, threshold)


def distance_correlation(
    a: Sequence[float], b: Sequence[float], max_points: int = 2048
) -> float:
    """Bias-corrected sample distance correlation between two scalar samples.

    Uses U-centred distance matrices, whose distance covariance has zero mean
    under independence (the plain V-statistic is positively biased by O(1/n),
    which matters at the thresholds used here).  Quadratic in the number of
    points, so samples larger than ``max_points`` are truncated
    deterministically (entries are i.i.d. across trajectories).
    """
    a = np.asarray(a, dtype=float)[:max_points]
    b = np.asarray(b, dtype=float)[:max_points]
    n = a.size
    if n != b.size or n < 4:
        raise ValueError("need two samples of equal size >= 4")

    def u_centred(v: np.ndarray) -> np.ndarray:
        d = np.abs(v[:, None] - v[None, :])
        row = d.sum(axis=0)
        total = d.sum()
        m = d - row[None, :] / (n - 2) - row[:, None] / (n - 2) + total / ((n - 1) * (n - 2))
        np.fill_diagonal(m, 0.0)
        return m

    da = u_centred(a)
    db = u_centred(b)
    scale = n * (n - 3)
    dcov2 = float(np.sum(da * db)) / scale
    dvar_a = float(np.sum(da * da)) / scale
    dvar_b = float(np.sum(db * db)) / scale
    if dvar_a <= 0.0 or dvar_b <= 0.0:
        return 0.0
    return math.sqrt(max(dcov2, 0.0) / math.sqrt(dvar_a * dvar_b))


def effective_sample_size(weights: Sequence[float]) -> float:
    """(sum w)^2 / sum w^2 for nonnegative importance weights."""
    w = np.asarray(weights, dtype=float)
    total_sq = float(np.sum(w)) ** 2
    sq_total = float(np.sum(w**2))
    return total_sq / sq_total if sq_total > 0 else 0.0


def weighted_resample(
    values: Sequence[float],
    weights: Sequence[float],
    stream: RngStream,
    size: int | None = None,
) -> np.ndarray:
    """Multinomial resample by normalized weights.

    Default resample size is min(n, floor(effective sample size)), which keeps
    two-sample tests on the output approximately calibrated.
    """
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if values.size == 0 or values.size != weights.size:
        raise ValueError("values and weights must be equally sized and nonempty")
    if size is None:
        size = min(values.size, int(effective_sample_size(weights)))
    probs = weights / weights.sum()
    counts = stream.generator().multinomial(size, probs)
    return np.repeat(values, counts)


@dataclass(frozen=True)
class Theorem3Report:
    """Residuals of the product-form density characterization.

    A density of the form h(s) f_m(x) forces h(s) = exp(-s beta^2/2) and
    f_m(x) = exp(-beta x) + lambda_m sinh(beta x) with lambda_m >= 0 and
    sum_m mu_m lambda_m = 1; the report holds the heat-equation residual of
    the candidate, the zero flux residual at the origin, and the weight-sum
    residual, each with its verdict.
    """

    max_pde_residual: float
    flux_residual: float
    weight_sum_residual: float
    pde_pass: bool
    flux_pass: bool
    weight_sum_pass: bool

    @property
    def passed(self) -> bool:
        return self.pde_pass and self.flux_pass and self.weight_sum_pass


def theorem3_check(
    space: BranchSpace,
    beta: float,
    lambdas: dict[str, float],
    x_grid: Sequence[float],
    s_grid: Sequence[float],
    tol: float = 1e-4,
    fd_step: float = 1e-3,
) -> Theorem3Report:
    """Check that g(s, x, m) = exp(-s beta^2/2)(exp(-beta x) + lambda_m sinh(beta x))
    is a valid product-form density.

    The heat-equation residual d_s g + (1/2) d_xx g is evaluated with centered
    O(h^2) differences over the grid; the flux residual is
    |sum_m mu_m (lambda_m beta - beta)| and the weight-sum residual
    |sum_m mu_m lambda_m - 1|.
    """
    if not beta > 0.0:
        raise ValueError(f"beta must be positive, got {beta}")
    if len(x_grid) == 0 or len(s_grid) == 0:
        raise ValueError("grids must be nonempty")
    if set(lambdas) != set(space.labels):
        raise ValueError("lambdas must be defined on exactly the labels")

    xs = np.asarray(x_grid, dtype=float)
    ss = np.asarray(s_grid, dtype=float)
    h = fd_step
    max_resid = 0.0
    for m in space.labels:
        lam = lambdas[m]

        def g(s: np.ndarray, x: np.ndarray) -> np.ndarray:
            return np.exp(-s * beta**2 / 2.0) * (np.exp(-beta * x) + lam * np.sinh(beta * x))

        s2, x2 = np.meshgrid(ss, xs, indexing="ij")
        d_s = (g(s2 + h, x2) - g(s2 - h, x2)) / (2.0 * h)
        d_xx = (g(s2, x2 + h) - 2.0 * g(s2, x2) + g(s2, x2 - h)) / h**2
        max_resid = max(max_resid, float(np.max(np.abs(d_s + 0.5 * d_xx))))

    flux = abs(
        math.fsum(space.weights[m] * (lambdas[m] * beta - beta) for m in space.labels)
    )
    weight_sum = abs(
        math.fsum(space.weights[m] * lambdas[m] for m in space.labels) - 1.0
    )
    return Theorem3Report(
        max_pde_residual=max_resid,
        flux_residual=flux,
        weight_sum_residual=weight_sum,
        pde_pass=max_resid < tol,
        flux_pass=flux < tol,
        weight_sum_pass=weight_sum < tol,
    )


@dataclass(frozen=True)
class CheckRecord:
    """Machine-readable verdict record emitted by experiment runners."""

    name: str
    params: dict[str, Any] = field(default_factory=dict)
    estimate: float = math.nan
    error: float = math.nan
    verdict: bool = True
