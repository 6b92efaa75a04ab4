"""Batch experiment runner: flat key=value configs in, deterministic CSV
tables and SVG figures out.

Usage:
    spiderlab <kind> --config <file> [--seed N] [--out DIR]

Kinds: simulate, verify-martingale, verify-z, verify-limit-law, theorem3,
tables.  Exit codes: 0 all verdicts pass, 1 some verdict failed, 2 broken
config.  Every run writes a manifest listing each emitted file with its
sha256.  The SPIDERLAB_WORKERS environment variable caps Monte Carlo worker
threads (default 1); outputs do not depend on it.
"""

from __future__ import annotations

import argparse
import hashlib
import math
import os
import sys
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np

from .branches import BranchSpace, PenaltyParams, classify_regime
from .closed_forms import (
    asymptotic_density_ratio,
    i_star,
    j_star,
    martingale_density,
)
from .errors import ConfigError, SpiderlabError
from .experiments import (
    bang_bang_match_check,
    drift_l_inf_check,
    radial_angular_check,
    splice_check,
)
from .branches import limit_branch_law, theta_weights
from .plots import emit_plot
from .quadrature import i_exact, j_exact
from .rng import RngStream
from .spider import simulate_spider, write_path_csv
from .verify import CheckRecord, martingale_check, theorem3_check, z_convergence_check

__all__ = ["ExperimentConfig", "parse_config", "run_experiment", "main"]

KINDS = (
    "simulate",
    "verify-martingale",
    "verify-z",
    "verify-limit-law",
    "theorem3",
    "tables",
)

MAJORANT_SLACK = 1e-9
ASYMPTOTIC_TOLS = {1e4: 1e-1, 1e6: 1e-3, 1e8: 1e-6}
THETA_TOL = 1e-12


@dataclass
class ExperimentConfig:
    """A parsed experiment: kind, branch space, penalty, numeric controls."""

    kind: str
    seed: int
    out_dir: str
    space: BranchSpace | None = None
    params: PenaltyParams | None = None
    controls: dict[str, Any] = field(default_factory=dict)


class _ConfigMap:
    """key -> (raw value, line number), with typed, line-anchored accessors."""

    def __init__(self, entries: dict[str, tuple[str, int]], path: str):
        self.entries = entries
        self.path = path
        self.used: set[str] = set()

    def _fail(self, key: str, message: str) -> ConfigError:
        line = self.entries[key][1] if key in self.entries else 0
        return ConfigError(f"{self.path}:{line}: {message}")

    def has(self, key: str) -> bool:
        return key in self.entries

    def raw(self, key: str) -> str:
        self.used.add(key)
        return self.entries[key][0]

    def get_str(self, key: str, default: str | None = None) -> str | None:
        if key not in self.entries:
            return default
        return self.raw(key)

    def get_float(
        self, key: str, default: float | None = None, positive: bool = False
    ) -> float | None:
        if key not in self.entries:
            if positive and default is not None and not default > 0:
                raise ConfigError(f"{self.path}: default for {key} must be positive")
            return default
        raw = self.raw(key)
        try:
            value = float(raw)
        except ValueError:
            raise self._fail(key, f"{key} must be a number, got {raw!r}") from None
        if positive and not value > 0.0:
            raise self._fail(key, f"{key} must be positive, got {value}")
        return value

    def get_int(self, key: str, default: int | None = None, positive: bool = False) -> int | None:
        if key not in self.entries:
            return default
        raw = self.raw(key)
        try:
            value = int(raw)
        except ValueError:
            raise self._fail(key, f"{key} must be an integer, got {raw!r}") from None
        if positive and value <= 0:
            raise self._fail(key, f"{key} must be positive, got {value}")
        return value

    def get_float_list(self, key: str, default: Sequence[float] | None = None) -> list[float]:
        if key not in self.entries:
            return list(default) if default is not None else []
        raw = self.raw(key)
        try:
            return [float(tok) for tok in raw.split(",") if tok.strip()]
        except ValueError:
            raise self._fail(key, f"{key} must be a comma-separated number list, got {raw!r}") from None

    def group(self, prefix: str) -> dict[str, tuple[str, int]]:
        hits = {}
        for key, payload in self.entries.items():
            if key.startswith(prefix + "."):
                self.used.add(key)
                hits[key[len(prefix) + 1 :]] = payload
        return hits


def _read_entries(path: str) -> dict[str, tuple[str, int]]:
    entries: dict[str, tuple[str, int]] = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    for lineno, line in enumerate(lines, start=1):
        text = line.strip()
        if not text or text.startswith("#"):
            continue
        if "=" not in text:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {text!r}")
        key, _, value = text.partition("=")
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigError(f"{path}:{lineno}: empty key")
        if key in entries:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        entries[key] = (value, lineno)
    return entries


def _parse_space(cfg: _ConfigMap, required: bool) -> BranchSpace | None:
    group = cfg.group("mu")
    if not group:
        if required:
            raise ConfigError(f"{cfg.path}: missing branch weights (mu.<label> = ...)")
        return None
    weights = {}
    for label, (raw, lineno) in group.items():
        try:
            weights[label] = float(raw)
        except ValueError:
            raise ConfigError(
                f"{cfg.path}:{lineno}: mu.{label} must be a number, got {raw!r}"
            ) from None
        if weights[label] <= 0.0:
            raise ConfigError(f"{cfg.path}:{lineno}: mu.{label} must be positive")
    total = math.fsum(weights.values())
    if abs(total - 1.0) > 1e-12:
        keys = ", ".join(f"mu.{m}" for m in weights)
        raise ConfigError(
            f"{cfg.path}: branch weights {keys} must sum to 1, got {total!r}"
        )
    return BranchSpace.from_weights(weights)


def _parse_params(cfg: _ConfigMap, space: BranchSpace | None, required: bool) -> PenaltyParams | None:
    group = cfg.group("alpha")
    gamma = cfg.get_float("gamma")
    if not group and gamma is None:
        if required:
            raise ConfigError(f"{cfg.path}: missing penalty (alpha.<label> and gamma)")
        return None
    if space is None:
        raise ConfigError(f"{cfg.path}: alpha/gamma need branch weights mu.<label>")
    if required and gamma is None:
        raise ConfigError(f"{cfg.path}: missing gamma")
    alpha = {}
    for label, (raw, lineno) in group.items():
        if label not in space.weights:
            raise ConfigError(f"{cfg.path}:{lineno}: alpha.{label} has no matching mu.{label}")
        try:
            alpha[label] = float(raw)
        except ValueError:
            raise ConfigError(
                f"{cfg.path}:{lineno}: alpha.{label} must be a number, got {raw!r}"
            ) from None
    missing = [m for m in space.labels if m not in alpha]
    if missing:
        raise ConfigError(
            f"{cfg.path}: alpha missing for labels: {', '.join(missing)}"
        )
    return PenaltyParams(alpha, gamma if gamma is not None else 0.0)


def parse_config(
    path: str,
    kind: str | None = None,
    seed: int | None = None,
    out_dir: str | None = None,
) -> ExperimentConfig:
    """Parse a flat key=value config file into an ExperimentConfig.

    ``kind``, ``seed``, and ``out_dir`` given on the command line override the
    config file.  Raises ConfigError with a line-anchored message for any
    malformed entry.
    """
    cfg = _ConfigMap(_read_entries(path), path)
    file_kind = cfg.get_str("kind")
    if kind is None:
        kind = file_kind
    elif file_kind is not None and file_kind != kind:
        raise ConfigError(
            f"{path}: config kind {file_kind!r} contradicts requested kind {kind!r}"
        )
    if kind is None:
        raise ConfigError(f"{path}: no experiment kind given")
    if kind not in KINDS:
        raise ConfigError(f"{path}: unknown kind {kind!r}; expected one of {', '.join(KINDS)}")

    seed = seed if seed is not None else cfg.get_int("seed", default=0)
    out_dir = out_dir if out_dir is not None else cfg.get_str("out", default="out")

    needs_space = kind in ("simulate", "verify-martingale", "tables", "theorem3")
    needs_params = kind in ("verify-martingale", "verify-z")
    space = _parse_space(cfg, required=needs_space or needs_params)
    params = None
    if needs_params:
        params = _parse_params(cfg, space, required=True)
    elif space is not None and cfg.group("alpha"):
        params = _parse_params(cfg, space, required=False)

    controls: dict[str, Any] = {}
    if kind == "simulate":
        controls["n"] = cfg.get_int("n", default=10, positive=True)
        controls["t_end"] = cfg.get_float("t_end", default=1.0, positive=True)
        controls["step"] = cfg.get_float("step", default=1e-3, positive=True)
    elif kind == "verify-martingale":
        controls["s"] = cfg.get_float("s", default=1.0, positive=True)
        controls["n"] = cfg.get_int("n", default=100_000, positive=True)
        controls["step"] = cfg.get_float("step", default=1e-3, positive=True)
    elif kind == "verify-z":
        controls["t_grid"] = cfg.get_float_list("t_grid", default=[10.0, 100.0, 1000.0])
        controls["x"] = cfg.get_float("x", default=0.0)
        controls["k"] = cfg.get_str("k", default=None)
        controls["n_grid"] = cfg.get_int("n_grid", default=200, positive=True)
        controls["quad_tol"] = cfg.get_float("quad_tol", default=1e-11, positive=True)
        controls["band_lo"] = cfg.get_float("band_lo", default=0.9, positive=True)
        if controls["x"] < 0:
            raise ConfigError(f"{path}: x must be nonnegative")
        grid = controls["t_grid"]
        if not grid or sorted(grid) != grid or any(t <= 0 for t in grid):
            raise ConfigError(f"{path}: t_grid must be positive and increasing")
    elif kind == "verify-limit-law":
        case = cfg.get_str("case")
        if case not in ("radial", "bang-bang", "drift", "splice"):
            raise ConfigError(
                f"{path}: case must be one of radial, bang-bang, drift, splice; got {case!r}"
            )
        controls["case"] = case
        controls["n"] = cfg.get_int("n", default=10_000, positive=True)
        if case == "radial":
            controls["t"] = cfg.get_float("t", default=1.0, positive=True)
            controls["step"] = cfg.get_float("step", default=5e-5, positive=True)
            controls["dcor_max"] = cfg.get_float("dcor_max", default=0.05, positive=True)
        elif case == "bang-bang":
            controls["gamma"] = cfg.get_float("gamma", default=1.0, positive=True)
            controls["t"] = cfg.get_float("t", default=1.0, positive=True)
            controls["step"] = cfg.get_float("step", default=1e-3, positive=True)
        elif case == "drift":
            controls["alpha_bar"] = cfg.get_float("alpha_bar", default=1.0, positive=True)
            controls["gamma"] = cfg.get_float("gamma", default=0.0)
            controls["step"] = cfg.get_float("step", default=1e-3, positive=True)
            controls["tail_eps"] = cfg.get_float("tail_eps", default=1e-6, positive=True)
            if controls["gamma"] >= controls["alpha_bar"]:
                raise ConfigError(f"{path}: drift case needs gamma < alpha_bar")
        else:  # splice
            space = _parse_space(cfg, required=True)
            params = _parse_params(cfg, space, required=True)
            controls["step"] = cfg.get_float("step", default=0.01, positive=True)
            controls["t_end"] = cfg.get_float("t_end", default=1e5, positive=True)
            controls["post_horizon"] = cfg.get_float("post_horizon", default=1.0, positive=True)
    elif kind == "theorem3":
        controls["beta"] = cfg.get_float("beta", positive=True)
        if controls["beta"] is None:
            raise ConfigError(f"{path}: theorem3 needs beta")
        lam_group = cfg.group("lambda")
        if not lam_group:
            raise ConfigError(f"{path}: theorem3 needs lambda.<label> entries")
        lambdas = {}
        for label, (raw, lineno) in lam_group.items():
            try:
                lambdas[label] = float(raw)
            except ValueError:
                raise ConfigError(
                    f"{path}:{lineno}: lambda.{label} must be a number, got {raw!r}"
                ) from None
        controls["lambdas"] = lambdas
        controls["x_grid"] = cfg.get_float_list("x_grid", default=[0.1, 0.5, 1.0, 1.5, 2.0])
        controls["s_grid"] = cfg.get_float_list("s_grid", default=[0.0, 0.5, 1.0])
        controls["tol"] = cfg.get_float("tol", default=1e-4, positive=True)
    elif kind == "tables":
        controls["n_theta"] = cfg.get_int("n_theta", default=100, positive=True)

    return ExperimentConfig(
        kind=kind,
        seed=seed,
        out_dir=out_dir,
        space=space,
        params=params,
        controls=controls,
    )


def _format_cell(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "pass" if value else "fail"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _write_csv(
    out_dir: str, name: str, schema: str, header: Sequence[str], rows: Iterable[Sequence[Any]]
) -> str:
    dest = os.path.join(out_dir, name)
    with open(dest, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# schema: {schema} v1\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_format_cell(cell) for cell in row) + "\n")
    return name


def _write_records(out_dir: str, records: list[CheckRecord]) -> str:
    rows = []
    for rec in records:
        blob = ";".join(f"{k}={_format_cell(v)}" for k, v in sorted(rec.params.items()))
        rows.append((rec.name, blob, rec.estimate, rec.error, rec.verdict))
    return _write_csv(
        out_dir,
        "records.csv",
        "spiderlab.records",
        ("name", "params", "estimate", "error", "verdict"),
        rows,
    )


def _write_manifest(out_dir: str, names: list[str]) -> None:
    lines = []
    for name in sorted(names):
        digest = hashlib.sha256(open(os.path.join(out_dir, name), "rb").read()).hexdigest()
        lines.append(f"{digest}  {name}")
    with open(os.path.join(out_dir, "manifest.txt"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _alpha_blob(params: PenaltyParams, space: BranchSpace) -> str:
    return "|".join(f"{m}:{params.alpha[m]!r}" for m in space.labels)


# --------------------------------------------------------------------------
# experiment kinds
# --------------------------------------------------------------------------


def _run_simulate(config: ExperimentConfig) -> tuple[list[CheckRecord], list[str]]:
    n = config.controls["n"]
    t_end = config.controls["t_end"]
    step = config.controls["step"]
    files = []
    for i in range(n):
        path = simulate_spider(config.space, t_end, step, RngStream(config.seed, i))
        name = f"path_{i:04d}.csv"
        with open(os.path.join(config.out_dir, name), "w", encoding="utf-8", newline="\n") as fh:
            fh.write("# schema: spiderlab.path v1\n")
            write_path_csv(path, fh)
        files.append(name)
    record = CheckRecord(
        name="simulate",
        params={"n": n, "t_end": t_end, "step": step, "seed": config.seed},
        estimate=float(n),
        error=0.0,
        verdict=True,
    )
    return [record], files


def _run_verify_martingale(config: ExperimentConfig) -> tuple[list[CheckRecord], list[str]]:
    s = config.controls["s"]
    n = config.controls["n"]
    step = config.controls["step"]
    est = martingale_check(config.params, config.space, s, n, step, config.seed)
    verdict = est.within(1.0, sigmas=4.0, floor=0.02)
    regime = classify_regime(config.params, config.space)
    records = [
        CheckRecord(
            name="martingale-mean",
            params={
                "regime": regime.tag.value,
                "gamma": config.params.gamma,
                "alpha": _alpha_blob(config.params, config.space),
                "s": s,
                "n": n,
                "step": step,
                "seed": config.seed,
            },
            estimate=est.mean,
            error=est.std_error,
            verdict=verdict,
        )
    ]
    files = [
        _write_csv(
            config.out_dir,
            "martingale.csv",
            "spiderlab.verify-martingale",
            ("regime", "gamma", "s", "n", "step", "mean", "std_error", "verdict"),
            [(regime.tag.value, config.params.gamma, s, n, step, est.mean, est.std_error, verdict)],
        )
    ]
    return records, files


def _run_verify_z(config: ExperimentConfig) -> tuple[list[CheckRecord], list[str]]:
    controls = config.controls
    params, space = config.params, config.space
    tol = controls["quad_tol"]

    rng = RngStream(config.seed, 0).generator()
    n_grid = controls["n_grid"]
    betas = rng.uniform(-2.0, 2.0, n_grid)
    gammas = rng.uniform(-2.0, 2.0, n_grid)
    xs = rng.uniform(0.0, 3.0, n_grid)
    ts = np.exp(rng.uniform(math.log(0.1), math.log(100.0), n_grid))
    majorant_rows = []
    all_ok = True
    worst = 0.0
    for b, g, x, t in zip(betas, gammas, xs, ts):
        jv = j_exact(b, x, t, tol=tol).value
        js = j_star(b, x, t)
        iv = i_exact(b, g, x, t, tol=tol).value
        is_ = i_star(b, g, x, t)
        ok = jv <= js * (1.0 + MAJORANT_SLACK) and iv <= is_ * (1.0 + MAJORANT_SLACK)
        all_ok &= ok
        if js > 0:
            worst = max(worst, jv / js)
        worst = max(worst, iv / is_)
        majorant_rows.append((b, g, x, t, jv, js, iv, is_, ok))

    ratio_rows = z_convergence_check(
        params, space, controls["t_grid"], x=controls["x"], k=controls["k"], tol=tol
    )
    ratios = [row.ratio for row in ratio_rows]
    bounded = all(r <= 1.0 + MAJORANT_SLACK for r in ratios)
    monotone = all(b >= a - 1e-9 for a, b in zip(ratios, ratios[1:]))
    in_band = ratios[-1] >= controls["band_lo"]

    records = [
        CheckRecord(
            name="majorant-sweep",
            params={"n_grid": n_grid, "seed": config.seed},
            estimate=worst,
            error=0.0,
            verdict=bool(all_ok),
        ),
        CheckRecord(
            name="z-ratio-bounded",
            params={"gamma": params.gamma, "alpha": _alpha_blob(params, space)},
            estimate=max(ratios),
            error=0.0,
            verdict=bool(bounded),
        ),
        CheckRecord(
            name="z-ratio-monotone",
            params={"t_grid": ",".join(repr(t) for t in controls["t_grid"])},
            estimate=ratios[-1] - ratios[0],
            error=0.0,
            verdict=bool(monotone),
        ),
        CheckRecord(
            name="z-ratio-final-band",
            params={"band_lo": controls["band_lo"]},
            estimate=ratios[-1],
            error=0.0,
            verdict=bool(in_band),
        ),
    ]
    files = [
        _write_csv(
            config.out_dir,
            "majorant.csv",
            "spiderlab.verify-z.majorant",
            ("beta", "gamma", "x", "t", "j_exact", "j_star", "i_exact", "i_star", "ok"),
            majorant_rows,
        ),
        _write_csv(
            config.out_dir,
            "z_ratio.csv",
            "spiderlab.verify-z.ratio",
            ("t", "z_exact", "z_star", "ratio"),
            [(row.t, row.z_exact, row.z_star, row.ratio) for row in ratio_rows],
        ),
    ]
    emit_plot(
        [("z_exact / z_star", [math.log10(r.t) for r in ratio_rows], ratios)],
        "line",
        os.path.join(config.out_dir, "z_ratio.svg"),
        title="normalizer against its majorant",
        xlabel="log10 t",
        ylabel="ratio",
    )
    files.append("z_ratio.svg")
    return records, files


def _run_verify_limit_law(config: ExperimentConfig) -> tuple[list[CheckRecord], list[str]]:
    controls = config.controls
    case = controls["case"]
    n = controls["n"]
    records: list[CheckRecord] = []
    files: list[str] = []
    if case == "radial":
        check = radial_angular_check(
            n, controls["t"], controls["step"], config.seed, dcor_max=controls["dcor_max"]
        )
        records = [
            CheckRecord(
                "radial-ks",
                {"n": n, "t": controls["t"], "step": controls["step"]},
                check.ks_radial.statistic,
                check.ks_radial.threshold,
                not check.ks_radial.threshold_exceeded,
            ),
            CheckRecord(
                "theta-uniform-ks",
                {"n": n},
                check.ks_theta.statistic,
                check.ks_theta.threshold,
                not check.ks_theta.threshold_exceeded,
            ),
            CheckRecord(
                "radial-theta-independence",
                {"dcor_max": controls["dcor_max"]},
                check.dcor,
                0.0,
                check.dcor < controls["dcor_max"],
            ),
        ]
        files.append(
            _write_csv(
                config.out_dir,
                "radial.csv",
                "spiderlab.limit-law.radial",
                ("check", "statistic", "threshold", "verdict"),
                [
                    ("radial-ks", check.ks_radial.statistic, check.ks_radial.threshold,
                     not check.ks_radial.threshold_exceeded),
                    ("theta-uniform-ks", check.ks_theta.statistic, check.ks_theta.threshold,
                     not check.ks_theta.threshold_exceeded),
                    ("distance-correlation", check.dcor, controls["dcor_max"],
                     check.dcor < controls["dcor_max"]),
                ],
            )
        )
    elif case == "bang-bang":
        check = bang_bang_match_check(
            controls["gamma"], n, controls["t"], controls["step"], config.seed
        )
        records = [
            CheckRecord(
                "bang-bang-ks",
                {"gamma": controls["gamma"], "n": n, "resample": check.resample_size},
                check.ks.statistic,
                check.ks.threshold,
                check.passed,
            )
        ]
        files.append(
            _write_csv(
                config.out_dir,
                "bang_bang.csv",
                "spiderlab.limit-law.bang-bang",
                ("gamma", "n", "resample_size", "ks", "threshold", "verdict"),
                [(controls["gamma"], n, check.resample_size, check.ks.statistic,
                  check.ks.threshold, check.passed)],
            )
        )
    elif case == "drift":
        check = drift_l_inf_check(
            controls["alpha_bar"],
            controls["gamma"],
            n,
            controls["step"],
            config.seed,
            tail_eps=controls["tail_eps"],
        )
        records = [
            CheckRecord(
                "l-inf-exponential-ks",
                {
                    "alpha_bar": controls["alpha_bar"],
                    "gamma": controls["gamma"],
                    "rate": check.rate,
                    "n": n,
                },
                check.ks.statistic,
                check.ks.threshold,
                not check.ks.threshold_exceeded,
            )
        ]
        if check.weight_mean is not None:
            records.append(
                CheckRecord(
                    "weight-unit-mean",
                    {"gamma": controls["gamma"]},
                    check.weight_mean.mean,
                    check.weight_mean.std_error,
                    check.weight_mean.within(1.0),
                )
            )
        edges = np.linspace(0.0, float(check.l_inf.max()) + 1e-9, 41)
        dens, _ = np.histogram(check.l_inf, bins=edges, density=True)
        grid = np.linspace(edges[0], edges[-1], 200)
        rate0 = controls["alpha_bar"]
        emit_plot(
            [
                ("l_inf histogram", edges.tolist(), dens.tolist()),
                ("exp density", grid.tolist(), (rate0 * np.exp(-rate0 * grid)).tolist()),
            ],
            "histogram",
            os.path.join(config.out_dir, "l_inf.svg"),
            title="total local time",
            xlabel="l",
            ylabel="density",
        )
        files.append("l_inf.svg")
        files.append(
            _write_csv(
                config.out_dir,
                "drift.csv",
                "spiderlab.limit-law.drift",
                ("check", "estimate", "error", "verdict"),
                [(r.name, r.estimate, r.error, r.verdict) for r in records],
            )
        )
    else:  # splice
        check = splice_check(
            config.params,
            config.space,
            n,
            controls["step"],
            controls["t_end"],
            controls["post_horizon"],
            config.seed,
        )
        records = [
            CheckRecord(
                "l-inf-exponential-ks",
                {"gamma": config.params.gamma, "n": n, "discarded": check.n_discarded},
                check.ks_l_inf.statistic,
                check.ks_l_inf.threshold,
                not check.ks_l_inf.threshold_exceeded,
            ),
            CheckRecord(
                "terminal-branch-chi2",
                {"dof": check.chi_branch.dof},
                check.chi_branch.statistic,
                check.chi_branch.threshold,
                not check.chi_branch.threshold_exceeded,
            ),
            CheckRecord(
                "pre-splice-labels-chi2",
                {"dof": check.chi_pre_labels.dof},
                check.chi_pre_labels.statistic,
                check.chi_pre_labels.threshold,
                not check.chi_pre_labels.threshold_exceeded,
            ),
            CheckRecord(
                "bessel-tail-slope",
                {"target": 3.0},
                check.slope,
                0.05,
                check.slope_rel_err < 0.05,
            ),
        ]
        files.append(
            _write_csv(
                config.out_dir,
                "splice.csv",
                "spiderlab.limit-law.splice",
                ("check", "estimate", "error", "verdict"),
                [(r.name, r.estimate, r.error, r.verdict) for r in records],
            )
        )
    return records, files


def _run_theorem3(config: ExperimentConfig) -> tuple[list[CheckRecord], list[str]]:
    controls = config.controls
    lambdas = controls["lambdas"]
    if set(lambdas) != set(config.space.labels):
        raise ConfigError(
            "lambda.<label> keys must match mu.<label> keys exactly "
            f"(got {sorted(lambdas)} vs {sorted(config.space.labels)})"
        )
    report = theorem3_check(
        config.space,
        controls["beta"],
        lambdas,
        controls["x_grid"],
        controls["s_grid"],
        tol=controls["tol"],
    )
    shared = {"beta": controls["beta"], "tol": controls["tol"]}
    records = [
        CheckRecord("pde-residual", shared, report.max_pde_residual, controls["tol"], report.pde_pass),
        CheckRecord("flux-residual", shared, report.flux_residual, controls["tol"], report.flux_pass),
        CheckRecord(
            "weight-sum-residual", shared, report.weight_sum_residual, controls["tol"],
            report.weight_sum_pass,
        ),
    ]
    files = [
        _write_csv(
            config.out_dir,
            "theorem3.csv",
            "spiderlab.theorem3",
            ("check", "residual", "tol", "verdict"),
            [(r.name, r.estimate, controls["tol"], r.verdict) for r in records],
        )
    ]
    return records, files


def _reference_sets(space: BranchSpace) -> list[tuple[str, PenaltyParams]]:
    labels = space.labels
    first = labels[0]

    def alpha(mapping: dict[str, float], default: float) -> dict[str, float]:
        return {m: mapping.get(m, default) for m in labels}

    return [
        ("dominant-gamma", PenaltyParams(alpha({}, 0.0), 1.0)),
        ("dominant-alpha", PenaltyParams(alpha({first: 1.0}, 0.0), 0.0)),
        ("neutral", PenaltyParams(alpha({}, -1.0), 0.0)),
        ("neg-gamma-flat-max", PenaltyParams(alpha({first: 0.0}, -1.0), -1.0)),
        ("neg-gamma-all-neg", PenaltyParams(alpha({first: -1.0}, -2.0), -1.0)),
    ]


def _run_tables(config: ExperimentConfig) -> tuple[list[CheckRecord], list[str]]:
    space = config.space
    sets = _reference_sets(space)
    density_rows = []
    for name, params in sets:
        for x in (0.0, 0.5, 1.0):
            for k in space.labels:
                for l in (0.0, 1.0):
                    for s in (0.0, 1.0):
                        density_rows.append(
                            (
                                name,
                                params.gamma,
                                _alpha_blob(params, space),
                                x,
                                k,
                                l,
                                s,
                                martingale_density(params, space, x, k, l, s),
                            )
                        )

    asym_rows = []
    asym_ok = True
    for name, params in sets:
        x, k, l, s = 0.5, space.labels[0], 1.0, 1.0
        target = martingale_density(params, space, x, k, l, s)
        for u, tol in sorted(ASYMPTOTIC_TOLS.items()):
            ratio = asymptotic_density_ratio(params, space, x, k, l, s, u)
            err = abs(ratio - target)
            ok = err <= tol
            asym_ok &= ok
            asym_rows.append((name, u, ratio, target, err, tol, ok))

    rng = RngStream(config.seed, 0).generator()
    theta_rows = []
    theta_ok = True
    worst_theta = 0.0
    worst_law = 0.0
    for i in range(config.controls["n_theta"]):
        alphas = {m: -float(rng.uniform(0.05, 5.0)) for m in space.labels}
        gamma = -float(rng.uniform(0.05, 5.0))
        params = PenaltyParams(alphas, gamma)
        theta = theta_weights(params, space).theta
        resid = abs(
            math.fsum(space.weights[m] * theta[m] for m in space.labels) - abs(gamma)
        )
        law = limit_branch_law(params, space)
        law_resid = abs(math.fsum(law.values()) - 1.0)
        ok = resid <= THETA_TOL and law_resid <= THETA_TOL
        theta_ok &= ok
        worst_theta = max(worst_theta, resid)
        worst_law = max(worst_law, law_resid)
        theta_rows.append((i, gamma, _alpha_blob(params, space), resid, law_resid, ok))

    records = [
        CheckRecord(
            "asymptotic-table-consistency",
            {"u_tols": ";".join(f"{u:g}:{tol:g}" for u, tol in sorted(ASYMPTOTIC_TOLS.items()))},
            max(row[4] for row in asym_rows),
            0.0,
            bool(asym_ok),
        ),
        CheckRecord(
            "theta-normalization",
            {"n_theta": config.controls["n_theta"], "tol": THETA_TOL},
            worst_theta,
            0.0,
            bool(theta_ok),
        ),
        CheckRecord(
            "branch-law-normalization",
            {"n_theta": config.controls["n_theta"], "tol": THETA_TOL},
            worst_law,
            0.0,
            bool(theta_ok),
        ),
    ]
    files = [
        _write_csv(
            config.out_dir,
            "martingale_table.csv",
            "spiderlab.tables.martingale",
            ("regime", "gamma", "alpha", "x", "k", "l", "s", "density"),
            density_rows,
        ),
        _write_csv(
            config.out_dir,
            "asymptotic_check.csv",
            "spiderlab.tables.asymptotic",
            ("regime", "u", "ratio", "density", "abs_err", "tol", "verdict"),
            asym_rows,
        ),
        _write_csv(
            config.out_dir,
            "theta_check.csv",
            "spiderlab.tables.theta",
            ("index", "gamma", "alpha", "theta_residual", "branch_law_residual", "verdict"),
            theta_rows,
        ),
    ]
    return records, files


_RUNNERS = {
    "simulate": _run_simulate,
    "verify-martingale": _run_verify_martingale,
    "verify-z": _run_verify_z,
    "verify-limit-law": _run_verify_limit_law,
    "theorem3": _run_theorem3,
    "tables": _run_tables,
}


def run_experiment(config: ExperimentConfig) -> int:
    """Run one experiment; returns the process exit code (0 pass, 1 fail)."""
    os.makedirs(config.out_dir, exist_ok=True)
    records, files = _RUNNERS[config.kind](config)
    files.append(_write_records(config.out_dir, records))
    _write_manifest(config.out_dir, files)
    return 0 if all(rec.verdict for rec in records) else 1


def main(argv: Sequence[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="spiderlab",
        description="Deterministic experiments for penalized Walsh spiders.",
    )
    parser.add_argument("kind", choices=KINDS, help="experiment kind")
    parser.add_argument("--config", required=True, help="flat key=value config file")
    parser.add_argument("--seed", type=int, default=None, help="override config seed")
    parser.add_argument("--out", default=None, help="override output directory")
    args = parser.parse_args(argv)
    try:
        config = parse_config(args.config, kind=args.kind, seed=args.seed, out_dir=args.out)
        return run_experiment(config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except SpiderlabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
