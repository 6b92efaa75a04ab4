"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines; the whole suite targets desk scale (a few minutes single-threaded).
"""

import math
import os
import time

import numpy as np
import pytest

from spiderlab import (
    BranchSpace,
    PenaltyParams,
    RngStream,
    asymptotic_density_ratio,
    i_exact,
    i_star,
    j_exact,
    j_star,
    limit_branch_law,
    martingale_check,
    martingale_density,
    theorem3_check,
    theta_weights,
    z_convergence_check,
)
from spiderlab.cli import main as cli_main
from spiderlab.experiments import (
    bang_bang_match_check,
    drift_l_inf_check,
    radial_angular_check,
    splice_check,
)

SPACE = BranchSpace.from_weights({"a": 0.5, "b": 0.5})

REGIME_SETS = {
    "dominant-gamma": PenaltyParams({"a": 0.0, "b": 0.0}, 1.0),
    "dominant-alpha": PenaltyParams({"a": 1.0, "b": 0.0}, 0.0),
    "neutral": PenaltyParams({"a": -1.0, "b": -2.0}, 0.0),
    "neg-gamma-flat-max": PenaltyParams({"a": 0.0, "b": -1.0}, -1.0),
    "neg-gamma-all-neg": PenaltyParams({"a": -1.0, "b": -2.0}, -1.0),
}


def report(criterion: str, passed: bool, detail: str) -> None:
    print(f"{'PASS' if passed else 'FAIL'}  {criterion}: {detail}")


def test_ac01_martingale_normalization():
    """Unit mean of the density process in all five regimes, n=1e5, step=1e-3."""
    start = time.time()
    lines = []
    ok = True
    for idx, (name, params) in enumerate(REGIME_SETS.items()):
        est = martingale_check(params, SPACE, s=1.0, n=100_000, step=1e-3, seed=1000 + idx)
        tol = max(4.0 * est.std_error, 0.02)
        good = abs(est.mean - 1.0) <= tol
        ok &= good
        lines.append(f"{name}: {est.mean:.5f} (tol {tol:.5f})")
    elapsed = time.time() - start
    ok &= elapsed < 300.0
    report("AC1 martingale normalization", ok, "; ".join(lines) + f"; {elapsed:.0f}s")
    assert ok


def test_ac02_majorant_inequalities():
    """J <= J* and I <= I* with relative slack 1e-9 on 200 random tuples."""
    start = time.time()
    rng = RngStream(2001, 0).generator()
    worst_j = worst_i = 0.0
    for _ in range(200):
        beta = rng.uniform(-2.0, 2.0)
        gamma = rng.uniform(-2.0, 2.0)
        x = rng.uniform(0.0, 3.0)
        t = math.exp(rng.uniform(math.log(0.1), math.log(100.0)))
        js = j_star(beta, x, t)
        if js > 0.0:
            worst_j = max(worst_j, j_exact(beta, x, t).value / js)
        worst_i = max(worst_i, i_exact(beta, gamma, x, t).value / i_star(beta, gamma, x, t))
    elapsed = time.time() - start
    ok = worst_j <= 1.0 + 1e-9 and worst_i <= 1.0 + 1e-9 and elapsed < 60.0
    report(
        "AC2 majorant inequalities",
        ok,
        f"max J/J*={worst_j:.12f}, max I/I*={worst_i:.12f}, {elapsed:.0f}s",
    )
    assert ok


def test_ac03_normalizer_equivalence():
    """z_exact/z_star in [0.9, 1] at t=1e3 and nondecreasing along the grid."""
    cases = {
        "neg-gamma-all-neg": PenaltyParams({"a": -1.0, "b": -1.0}, -1.0),
        "neutral": PenaltyParams({"a": -1.0, "b": -2.0}, 0.0),
        "dominant-gamma": PenaltyParams({"a": 0.0, "b": 0.0}, 1.0),
    }
    ok = True
    lines = []
    for name, params in cases.items():
        rows = z_convergence_check(params, SPACE, [10.0, 100.0, 1000.0])
        ratios = [row.ratio for row in rows]
        good = (
            all(r <= 1.0 + 1e-9 for r in ratios)
            and all(b >= a - 1e-9 for a, b in zip(ratios, ratios[1:]))
            and 0.9 <= ratios[-1] <= 1.0 + 1e-9
        )
        ok &= good
        lines.append(f"{name}: " + "->".join(f"{r:.4f}" for r in ratios))
    report("AC3 normalizer equivalence", ok, "; ".join(lines))
    assert ok


def test_ac04_radial_angular_law():
    """Radius law, uniform angular fraction, and their independence at t=1."""
    check = radial_angular_check(10_000, 1.0, 5e-5, seed=4001)
    ok = check.passed
    report(
        "AC4 radial/angular law",
        ok,
        f"KS radial {check.ks_radial.statistic:.4f}/{check.ks_radial.threshold:.4f}, "
        f"KS theta {check.ks_theta.statistic:.4f}/{check.ks_theta.threshold:.4f}, "
        f"dcor {check.dcor:.4f} < {check.dcor_max}",
    )
    assert ok


def test_ac05_bang_bang_limit():
    """Reweighted spider endpoints match bang-bang endpoints (KS at 1%)."""
    check = bang_bang_match_check(1.0, 10_000, 1.0, 1e-3, seed=5001)
    ok = check.passed and check.resample_size == 10_000
    report(
        "AC5 bang-bang limit",
        ok,
        f"two-sample KS {check.ks.statistic:.4f}/{check.ks.threshold:.4f} at n=m=10^4",
    )
    assert ok


def test_ac06_drifted_reflected_limit():
    """Total local time Exp(1) at gamma=0; reweighted Exp(1/2) at gamma=1/2."""
    plain = drift_l_inf_check(1.0, 0.0, 10_000, 1e-3, seed=6001)
    tilted = drift_l_inf_check(1.0, 0.5, 10_000, 1e-3, seed=6002)
    ok = plain.passed and tilted.passed
    report(
        "AC6 drifted reflected limit",
        ok,
        f"KS Exp(1) {plain.ks.statistic:.4f}/{plain.ks.threshold:.4f}; "
        f"resampled KS Exp(0.5) {tilted.ks.statistic:.4f}/{tilted.ks.threshold:.4f}; "
        f"E[weight] {tilted.weight_mean.mean:.4f} +- {tilted.weight_mean.std_error:.4f}",
    )
    assert ok


def test_ac07_splice_limit():
    """Exponential splice level, terminal branch law, and Bessel(3) tail.

    Two runs of the same sampler: a long-horizon coarse-grid one for the
    splice-level law (discard rate ~0.1%, level exact at any grid), and a
    fine-grid short-horizon one for the grid-resolution checks (branch labels,
    terminal branch, and tail slope are independent of the radial motion, so
    discards cannot bias them).
    """
    params = REGIME_SETS["neg-gamma-all-neg"]
    level_run = splice_check(params, SPACE, 10_000, 0.25, 2.56e6, 1.0, seed=7001)
    fine_run = splice_check(params, SPACE, 4_000, 0.01, 100.0, 1.0, seed=7002)
    discard_rate = level_run.n_discarded / (level_run.n_accepted + level_run.n_discarded)
    ok = (
        not level_run.ks_l_inf.threshold_exceeded
        and discard_rate < 1e-3
        and not fine_run.chi_branch.threshold_exceeded
        and not fine_run.chi_pre_labels.threshold_exceeded
        and fine_run.slope_rel_err < 0.05
    )
    report(
        "AC7 splice limit",
        ok,
        f"KS Exp(1) {level_run.ks_l_inf.statistic:.4f}/{level_run.ks_l_inf.threshold:.4f} "
        f"(discards {level_run.n_discarded}/{level_run.n_accepted + level_run.n_discarded}); "
        f"branch chi2 {fine_run.chi_branch.statistic:.2f}/{fine_run.chi_branch.threshold:.2f}; "
        f"pre-label chi2 {fine_run.chi_pre_labels.statistic:.2f}/{fine_run.chi_pre_labels.threshold:.2f}; "
        f"tail slope {fine_run.slope:.4f} (target 3 +- 5%)",
    )
    assert ok


def test_ac08_theta_identity():
    """sum mu theta = |gamma| and branch law sums to 1, both to 1e-12."""
    rng = RngStream(8001, 0).generator()
    worst_theta = worst_law = 0.0
    for _ in range(100):
        k = int(rng.integers(1, 6))
        raw = rng.uniform(0.1, 1.0, k)
        labels = tuple(f"m{j}" for j in range(k))
        space = BranchSpace(labels, {m: w / raw.sum() for m, w in zip(labels, raw)})
        params = PenaltyParams(
            {m: -float(rng.uniform(0.05, 5.0)) for m in labels},
            -float(rng.uniform(0.05, 5.0)),
        )
        theta = theta_weights(params, space).theta
        total = math.fsum(space.weights[m] * theta[m] for m in labels)
        worst_theta = max(worst_theta, abs(total - abs(params.gamma)))
        law = limit_branch_law(params, space)
        worst_law = max(worst_law, abs(math.fsum(law.values()) - 1.0))
    ok = worst_theta <= 1e-12 and worst_law <= 1e-12
    report(
        "AC8 theta identity",
        ok,
        f"max |sum mu theta - |gamma|| = {worst_theta:.2e}, "
        f"max |sum branch law - 1| = {worst_law:.2e}",
    )
    assert ok


def test_ac09_product_form_checker():
    """Valid (beta, lambda) passes below 1e-4; perturbed lambda fails."""
    lambdas = {"a": 1.2, "b": 0.8}
    good = theorem3_check(SPACE, 1.0, lambdas, [0.1, 0.5, 1.0, 1.5, 2.0], [0.0, 0.5, 1.0])
    perturbed = dict(lambdas, a=lambdas["a"] + 0.1)
    bad = theorem3_check(SPACE, 1.0, perturbed, [0.1, 0.5, 1.0, 1.5, 2.0], [0.0, 0.5, 1.0])
    ok = (
        good.passed
        and good.max_pde_residual < 1e-4
        and good.flux_residual < 1e-4
        and good.weight_sum_residual < 1e-4
        and not bad.weight_sum_pass
    )
    report(
        "AC9 product-form checker",
        ok,
        f"valid residuals ({good.max_pde_residual:.2e}, {good.flux_residual:.2e}, "
        f"{good.weight_sum_residual:.2e}); perturbed weight-sum residual "
        f"{bad.weight_sum_residual:.2e} fails",
    )
    assert ok


def test_ac10_asymptotic_table_consistency():
    """exp(gamma l) Z~(x,k,u-s)/Z~(0,0,u) vs the density at (0.5, 1, 1)."""
    x, k, l, s = 0.5, "a", 1.0, 1.0
    ok = True
    worst = {1e6: 0.0, 1e8: 0.0}
    for params in REGIME_SETS.values():
        target = martingale_density(params, SPACE, x, k, l, s)
        for u, tol in ((1e6, 1e-3), (1e8, 1e-6)):
            err = abs(asymptotic_density_ratio(params, SPACE, x, k, l, s, u) - target)
            worst[u] = max(worst[u], err)
            ok &= err <= tol
    report(
        "AC10 asymptotic table",
        ok,
        f"max err {worst[1e6]:.2e} at u=1e6 (tol 1e-3), {worst[1e8]:.2e} at u=1e8 (tol 1e-6)",
    )
    assert ok


def test_ac11_reproducibility(tmp_path):
    """Identical configs give byte-identical outputs at any worker count."""
    config = tmp_path / "exp.cfg"
    config.write_text(
        "mu.a = 0.5\nmu.b = 0.5\nalpha.a = 0\nalpha.b = 0\ngamma = 1\n"
        "s = 0.5\nn = 3000\nstep = 1e-3\nseed = 77\n",
        encoding="utf-8",
    )
    trees = []
    for run, workers in (("r1", "1"), ("r2", "4"), ("r3", "2")):
        out = tmp_path / run
        os.environ["SPIDERLAB_WORKERS"] = workers
        try:
            code = cli_main(
                ["verify-martingale", "--config", str(config), "--out", str(out)]
            )
        finally:
            os.environ.pop("SPIDERLAB_WORKERS", None)
        assert code == 0
        trees.append(
            {
                name: (out / name).read_bytes()
                for name in sorted(os.listdir(out))
            }
        )
    ok = trees[0] == trees[1] == trees[2]
    report(
        "AC11 reproducibility",
        ok,
        f"3 runs x {len(trees[0])} files byte-identical across worker counts 1/4/2",
    )
    assert ok
