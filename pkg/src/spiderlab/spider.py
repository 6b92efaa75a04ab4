"""Discrete-time Walsh spider simulation from the origin.

The radial part uses construction from a driving Gaussian walk W: with S its
running maximum, the pair (S - W, S) has the law of (distance to origin,
local time at origin) of a reflected Brownian motion at the grid points.  The
discrete maximum undershoots the continuous one by O(sqrt(step)), which is the
only discretization bias.  Each maximal run of strictly positive distance (an
excursion) carries an independent branch label with the branch law mu.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import IO

import numpy as np

from .branches import BranchSpace
from .errors import ConfigError, OutOfRange
from .rng import RngStream

__all__ = [
    "SpiderPath",
    "simulate_spider",
    "path_stats",
    "excursions",
    "inverse_local_time",
    "occupation_local_time",
    "sample_reflected_batch",
    "write_path_csv",
]


@dataclass(frozen=True)
class SpiderPath:
    """A spider trajectory on a uniform grid.

    ``branch_idx`` holds the position of each point's branch label in
    ``labels``, with -1 exactly where ``x == 0`` (no branch at the origin).
    ``local_time`` is nondecreasing and increases only where the driving walk
    sets a new maximum, i.e. where ``x`` returns to 0.
    """

    step: float
    x: np.ndarray
    branch_idx: np.ndarray
    local_time: np.ndarray
    labels: tuple[str, ...]
    seed_info: tuple[int, int]

    @property
    def n_points(self) -> int:
        return self.x.size

    @property
    def t_end(self) -> float:
        return (self.x.size - 1) * self.step

    def branch_at(self, i: int) -> str | None:
        idx = int(self.branch_idx[i])
        return None if idx < 0 else self.labels[idx]

    @property
    def branch(self) -> list[str | None]:
        return [self.branch_at(i) for i in range(self.x.size)]


def _check_grid(t_end: float, step: float) -> int:
    if not step > 0.0:
        raise ConfigError(f"step must be positive, got {step}")
    if not t_end > 0.0:
        raise ConfigError(f"t_end must be positive, got {t_end}")
    n = int(round(t_end / step))
    if n < 1:
        raise ConfigError(f"step {step} exceeds horizon {t_end}")
    return n


def label_excursions(
    x: np.ndarray, rng: np.random.Generator, mu: np.ndarray
) -> np.ndarray:
    """Draw one mu-label per maximal positive run of x; -1 where x == 0."""
    pos = x > 0.0
    starts = pos.copy()
    starts[1:] &= ~pos[:-1]
    n_exc = int(starts.sum())
    branch_idx = np.full(x.size, -1, dtype=np.int32)
    if n_exc:
        draws = rng.choice(mu.size, size=n_exc, p=mu).astype(np.int32)
        seg = np.cumsum(starts) - 1
        branch_idx[pos] = draws[seg[pos]]
    return branch_idx


def simulate_spider(
    space: BranchSpace, t_end: float, step: float, stream: RngStream
) -> SpiderPath:
    """Simulate a spider from the origin on the grid {0, step, ..., t_end}.

    (x, local_time) at grid points are exact in law up to the discrete-maximum
    bias of order sqrt(step); excursion labels are i.i.d. with law mu.
    """
    n = _check_grid(t_end, step)
    rng = stream.generator()
    w = np.empty(n + 1)
    w[0] = 0.0
    np.cumsum(rng.standard_normal(n) * math.sqrt(step), out=w[1:])
    s = np.maximum.accumulate(w)
    x = s - w
    mu = np.array([space.weights[m] for m in space.labels])
    branch_idx = label_excursions(x, rng, mu)
    return SpiderPath(
        step=step,
        x=x,
        branch_idx=branch_idx,
        local_time=s,
        labels=space.labels,
        seed_info=(stream.seed, stream.index),
    )


def path_stats(path: SpiderPath, s: float) -> tuple[float, str | None, float]:
    """(x, branch, local_time) at the nearest grid point <= s."""
    if s < 0.0:
        raise OutOfRange(f"query time must be nonnegative, got {s}")
    i = int(math.floor(s / path.step + 1e-9))
    if i >= path.n_points:
        raise OutOfRange(f"query time {s} exceeds path horizon {path.t_end}")
    return float(path.x[i]), path.branch_at(i), float(path.local_time[i])


def excursions(path: SpiderPath) -> list[tuple[int, int, str]]:
    """Maximal runs of strictly positive x as (start, end, label) triples.

    ``start`` and ``end`` are the enclosing boundary indices: x == 0 at both
    (or the run touches an end of the path); x > 0 strictly between them.
    """
    pos = path.x > 0.0
    if not pos.any():
        return []
    padded = np.concatenate([[False], pos, [False]])
    flips = np.flatnonzero(padded[1:] != padded[:-1])
    result = []
    for first, after in zip(flips[::2], flips[1::2]):
        start = first - 1 if first > 0 else first
        end = after if after < path.n_points else path.n_points - 1
        label = path.branch_at(first)
        result.append((int(start), int(end), label))
    return result


def inverse_local_time(path: SpiderPath, level: float) -> int | None:
    """First grid index where local time reaches ``level``; None if never."""
    if not level > 0.0:
        raise ValueError(f"level must be positive, got {level}")
    idx = int(np.searchsorted(path.local_time, level, side="left"))
    return idx if idx < path.n_points else None


def occupation_local_time(path: SpiderPath, epsilon: float) -> float:
    """Occupation estimate of the terminal local time: step/(2 eps) * #{x <= eps}.

    Cross-check only; the running-maximum local time is the exact one.
    """
    if not epsilon > 0.0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    return path.step / (2.0 * epsilon) * int((path.x <= epsilon).sum())


def sample_reflected_batch(
    n_paths: int, t_end: float, step: float, stream: RngStream, block: int = 256
) -> tuple[np.ndarray, np.ndarray]:
    """Terminal (x, local_time) for a batch of reflected paths from the origin.

    Vectorized version of the radial part of :func:`simulate_spider` for
    estimators that only need the endpoint marginals; a single stream drives
    the whole batch, so results depend only on (stream, n_paths, grid).
    """
    n = _check_grid(t_end, step)
    if n_paths < 1:
        raise ConfigError(f"n_paths must be positive, got {n_paths}")
    rng = stream.generator()
    xs = np.empty(n_paths)
    ls = np.empty(n_paths)
    root = math.sqrt(step)
    for lo in range(0, n_paths, block):
        hi = min(lo + block, n_paths)
        w = np.cumsum(rng.standard_normal((hi - lo, n)) * root, axis=1)
        s = np.maximum(w.max(axis=1), 0.0)
        xs[lo:hi] = s - w[:, -1]
        ls[lo:hi] = s
    return xs, ls


def write_path_csv(path: SpiderPath, dest: IO[str]) -> None:
    """Dump a path as CSV rows (t, x, branch, local_time)."""
    dest.write("t,x,branch,local_time\n")
    for i in range(path.n_points):
        label = path.branch_at(i)
        dest.write(
            f"{i * path.step!r},{float(path.x[i])!r},"
            f"{'' if label is None else label},{float(path.local_time[i])!r}\n"
        )
