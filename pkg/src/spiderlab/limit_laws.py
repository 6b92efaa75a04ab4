"""Samplers for the long-horizon limit processes of penalized spiders.

One sampler per qualitative regime:

  * dominant local-time rate (gamma > 0): reflected bang-bang motion, labels
    unchanged;
  * dominant branch slope (max alpha > max(gamma, 0)): reflected drifted
    motion with a finite total local time, final excursion confined to the
    argmax branches, and an exponential importance weight in gamma;
  * neutral (gamma = 0, alpha <= 0): the spider itself;
  * negative gamma: a spider stopped at an independent exponential inverse
    local time with a 3-dimensional Bessel tail spliced on a random branch.

All samplers draw from a single (seed, index) stream and are reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .branches import (
    BranchSpace,
    PenaltyParams,
    RegimeTag,
    classify_regime,
    limit_branch_law,
)
from .errors import ConfigError, HorizonTooShort, RegimeMismatch
from .rng import RngStream
from .spider import SpiderPath, label_excursions

__all__ = [
    "ScalarPath",
    "WeightedPath",
    "sample_bang_bang_abs",
    "sample_drifted_reflected_with_l_inf",
    "sample_case2",
    "sample_bessel3",
    "sample_case4",
]

_BLOCK_STEPS = 1 << 16
_MAX_TOTAL_STEPS = 1 << 34  # hard safety valve for adaptive horizons


@dataclass(frozen=True)
class ScalarPath:
    """A nonnegative scalar trajectory on a uniform grid, from zero."""

    step: float
    x: np.ndarray
    local_time: np.ndarray | None
    seed_info: tuple[int, int]

    @property
    def t_end(self) -> float:
        return (self.x.size - 1) * self.step


@dataclass(frozen=True)
class WeightedPath:
    """A sampled path with an importance weight (1 for unweighted samplers)."""

    path: SpiderPath
    weight: float
    l_inf: float | None = None


def _check_grid(t_end: float, step: float) -> int:
    if not step > 0.0:
        raise ConfigError(f"step must be positive, got {step}")
    if not t_end > 0.0:
        raise ConfigError(f"t_end must be positive, got {t_end}")
    n = int(round(t_end / step))
    if n < 1:
        raise ConfigError(f"step {step} exceeds horizon {t_end}")
    return n


def sample_bang_bang_abs(
    gamma: float, t_end: float, step: float, stream: RngStream
) -> ScalarPath:
    """Absolute value of a bang-bang motion with restoring rate gamma.

    Realized as S - Y for a drift-gamma walk Y with running maximum S; the
    local time at zero of the reflected process is S itself.
    """
    if not gamma > 0.0:
        raise ConfigError(f"gamma must be positive, got {gamma}")
    n = _check_grid(t_end, step)
    rng = stream.generator()
    y = np.empty(n + 1)
    y[0] = 0.0
    np.cumsum(rng.standard_normal(n) * math.sqrt(step) + gamma * step, out=y[1:])
    s = np.maximum.accumulate(y)
    return ScalarPath(step, s - y, s, (stream.seed, stream.index))


def _bridge_zero_local_time(
    b0: np.ndarray, b1: np.ndarray, step: float, rng: np.random.Generator
) -> np.ndarray:
    """Exact local time at zero accrued across one grid step.

    Conditionally on the endpoints, the bridge is drift-free and its local
    time L at zero satisfies P(L > z) = exp(((b0-b1)^2 - (z+|b0|+|b1|)^2)/(2 step)),
    so inverse-transform sampling gives the increment with no discretization
    bias.
    """
    u = rng.random(b0.size)
    radius = np.sqrt((b0 - b1) ** 2 - 2.0 * step * np.log(u))
    return np.maximum(radius - np.abs(b0) - np.abs(b1), 0.0)


def _drifted_reflected_core(
    drift: float,
    step: float,
    rng: np.random.Generator,
    tail_eps: float,
    min_horizon: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Drifted walk with exact per-step local time, until the return
    probability exp(-2 drift b) stays below tail_eps (and t >= min_horizon).

    Returns (walk values b, per-step local-time increments).
    """
    x_star = math.log(1.0 / tail_eps) / (2.0 * drift)
    min_steps = int(math.ceil(min_horizon / step))
    # typical stopping step is ~ x_star / (drift * step); size the first block
    # to finish in one draw most of the time
    block = max(int(1.5 * x_star / (drift * step)) + 1024, min_steps + 1024)
    root = math.sqrt(step)
    blocks_b: list[np.ndarray] = []
    blocks_dl: list[np.ndarray] = []
    last = 0.0
    total = 0
    while True:
        incr = rng.standard_normal(block) * root + drift * step
        b = last + np.cumsum(incr)
        b_prev = np.concatenate(([last], b[:-1]))
        dl = _bridge_zero_local_time(b_prev, b, step, rng)
        blocks_b.append(b)
        blocks_dl.append(dl)
        step_index = np.arange(total + 1, total + block + 1)
        total += block
        hits = np.flatnonzero((b >= x_star) & (step_index >= min_steps))
        if hits.size:
            keep = total - block + int(hits[0]) + 1
            walk = np.concatenate([np.zeros(1)] + blocks_b)[: keep + 1]
            dls = np.concatenate(blocks_dl)[:keep]
            return walk, dls
        last = float(b[-1])
        if total > _MAX_TOTAL_STEPS:
            raise ConfigError("adaptive horizon failed to terminate; check parameters")
        block = max(block // 2, 4096)


def sample_drifted_reflected_with_l_inf(
    alpha_bar: float,
    step: float,
    stream: RngStream,
    tail_eps: float = 1e-6,
    min_horizon: float = 0.0,
) -> tuple[ScalarPath, float]:
    """|drifted walk| with its zero local time, run to an adaptive horizon.

    The accumulated local time matches the total one exactly in law up to a
    truncation error of probability at most ``tail_eps`` (the chance of a
    return to zero after stopping).
    """
    if not alpha_bar > 0.0:
        raise ConfigError(f"alpha_bar must be positive, got {alpha_bar}")
    if not 0.0 < tail_eps < 1.0:
        raise ConfigError(f"tail_eps must lie in (0, 1), got {tail_eps}")
    if not step > 0.0:
        raise ConfigError(f"step must be positive, got {step}")
    rng = stream.generator()
    walk, dls = _drifted_reflected_core(alpha_bar, step, rng, tail_eps, min_horizon)
    local_time = np.concatenate(([0.0], np.cumsum(dls)))
    path = ScalarPath(step, np.abs(walk), local_time, (stream.seed, stream.index))
    return path, float(local_time[-1])


def _segment_labels(
    n_points: int,
    zero_steps: np.ndarray,
    rng: np.random.Generator,
    mu: np.ndarray,
    final_probs: np.ndarray,
) -> np.ndarray:
    """Branch index per grid point for a path whose zeros occur inside steps.

    ``zero_steps`` flags step i when the path touches zero in (t_i, t_{i+1});
    grid point i belongs to the segment before the touch.  Every finite
    segment gets an i.i.d. mu label, the final (unbounded) one a final_probs
    label.
    """
    boundaries = np.flatnonzero(zero_steps)
    seg_of_point = np.searchsorted(boundaries, np.arange(n_points), side="left")
    n_segments = boundaries.size + 1
    labels = np.empty(n_segments, dtype=np.int32)
    if n_segments > 1:
        labels[:-1] = rng.choice(mu.size, size=n_segments - 1, p=mu)
    labels[-1] = rng.choice(final_probs.size, p=final_probs)
    return labels[seg_of_point]


def sample_case2(
    params: PenaltyParams,
    space: BranchSpace,
    t_end: float,
    step: float,
    stream: RngStream,
    tail_eps: float = 1e-6,
) -> WeightedPath:
    """Dominant-slope limit process with its gamma reweighting factor.

    The radial part is a reflected drift-abar motion; finite excursions carry
    i.i.d. mu labels while the final unbounded one is confined to the argmax
    branches (mu restricted and renormalized); the importance weight is
    ((abar - gamma)/abar) exp(gamma L_total).
    """
    regime = classify_regime(params, space)
    if regime.tag is not RegimeTag.DOMINANT_ALPHA:
        raise RegimeMismatch(
            f"case-2 sampler needs a dominant branch slope; regime is {regime.tag.value}"
        )
    n = _check_grid(t_end, step)
    abar = regime.alpha_bar
    rng = stream.generator()
    walk, dls = _drifted_reflected_core(abar, step, rng, tail_eps, min_horizon=t_end)
    mu = np.array([space.weights[m] for m in space.labels])
    final_probs = np.array(
        [space.weights[m] if m in regime.argmax_set else 0.0 for m in space.labels]
    )
    final_probs /= final_probs.sum()
    branch_idx = _segment_labels(walk.size, dls > 0.0, rng, mu, final_probs)
    branch_idx[np.abs(walk) == 0.0] = -1
    l_inf = float(dls.sum())
    local_time = np.concatenate(([0.0], np.cumsum(dls)))
    path = SpiderPath(
        step=step,
        x=np.abs(walk[: n + 1]),
        branch_idx=branch_idx[: n + 1],
        local_time=local_time[: n + 1],
        labels=space.labels,
        seed_info=(stream.seed, stream.index),
    )
    weight = (abar - params.gamma) / abar * math.exp(params.gamma * l_inf)
    return WeightedPath(path=path, weight=weight, l_inf=l_inf)


def sample_bessel3(t_end: float, step: float, stream: RngStream) -> ScalarPath:
    """Euclidean norm of a 3-dimensional Gaussian walk from the origin."""
    n = _check_grid(t_end, step)
    rng = stream.generator()
    w = np.cumsum(rng.standard_normal((3, n)) * math.sqrt(step), axis=1)
    r = np.empty(n + 1)
    r[0] = 0.0
    np.sqrt((w**2).sum(axis=0), out=r[1:])
    return ScalarPath(step, r, None, (stream.seed, stream.index))


def sample_case4(
    params: PenaltyParams,
    space: BranchSpace,
    t_end: float,
    step: float,
    stream: RngStream,
    post_horizon: float = 1.0,
) -> SpiderPath:
    """Negative-gamma limit process: spider until an exponential inverse local
    time, then an independent Bessel(3) tail on a branch drawn from the
    terminal branch law.

    ``t_end`` bounds the search for the splice time; if the local time fails
    to reach the exponential level by then, HorizonTooShort is raised (callers
    discard and count).  The returned path covers [0, tau + post_horizon] with
    the local time frozen at the exponential level after tau.
    """
    regime = classify_regime(params, space)
    if regime.tag not in (RegimeTag.NEG_GAMMA_FLAT_MAX, RegimeTag.NEG_GAMMA_ALL_NEG):
        raise RegimeMismatch(
            f"case-4 sampler needs gamma < 0 and alpha <= 0; regime is {regime.tag.value}"
        )
    n_max = _check_grid(t_end, step)
    if not post_horizon > 0.0:
        raise ConfigError(f"post_horizon must be positive, got {post_horizon}")
    rng = stream.generator()
    level = rng.exponential(1.0 / abs(params.gamma))

    root = math.sqrt(step)
    blocks: list[np.ndarray] = []
    last = 0.0
    running_max = 0.0
    total = 0
    tau = None
    while total < n_max:
        m = min(_BLOCK_STEPS, n_max - total)
        w = last + np.cumsum(rng.standard_normal(m) * root)
        s_block = np.maximum.accumulate(np.maximum(w, running_max))
        hits = np.flatnonzero(s_block >= level)
        blocks.append(w)
        if hits.size:
            tau = total + int(hits[0]) + 1
            blocks[-1] = w[: int(hits[0]) + 1]
            break
        total += m
        last = float(w[-1])
        running_max = float(s_block[-1])
    if tau is None:
        raise HorizonTooShort(
            f"local time did not reach {level:.6g} within horizon {t_end}"
        )

    w_pre = np.concatenate([np.zeros(1)] + blocks)
    s_pre = np.maximum.accumulate(w_pre)
    x_pre = s_pre - w_pre
    l_pre = np.minimum(s_pre, level)
    mu = np.array([space.weights[m] for m in space.labels])
    branch_pre = label_excursions(x_pre, rng, mu)

    law = limit_branch_law(params, space)
    probs = np.array([law[m] for m in space.labels])
    v = int(rng.choice(probs.size, p=probs))

    m_post = max(1, int(round(post_horizon / step)))
    tail = np.cumsum(rng.standard_normal((3, m_post)) * root, axis=1)
    r = np.sqrt((tail**2).sum(axis=0))

    x = np.concatenate([x_pre, r])
    branch_idx = np.concatenate(
        [branch_pre, np.full(m_post, v, dtype=np.int32)]
    )
    local_time = np.concatenate([l_pre, np.full(m_post, level)])
    return SpiderPath(
        step=step,
        x=x,
        branch_idx=branch_idx,
        local_time=local_time,
        labels=space.labels,
        seed_info=(stream.seed, stream.index),
    )
