import io
import math

import numpy as np
import pytest
from scipy import stats as sp_stats

from spiderlab import (
    ConfigError,
    OutOfRange,
    RngStream,
    excursions,
    inverse_local_time,
    occupation_local_time,
    path_stats,
    radial_cdf_from_origin,
    sample_reflected_batch,
    simulate_spider,
    write_path_csv,
)
from spiderlab.verify import chi_square_fit, ks_one_sample


@pytest.fixture
def path(half_half):
    return simulate_spider(half_half, 1.0, 1e-3, RngStream(101, 0))


class TestSimulate:
    def test_config_errors(self, half_half):
        with pytest.raises(ConfigError):
            simulate_spider(half_half, 1.0, 0.0, RngStream(0, 0))
        with pytest.raises(ConfigError):
            simulate_spider(half_half, 0.0, 1e-3, RngStream(0, 0))
        with pytest.raises(ConfigError):
            simulate_spider(half_half, 0.01, 0.5, RngStream(0, 0))

    def test_reproducible(self, half_half, path):
        again = simulate_spider(half_half, 1.0, 1e-3, RngStream(101, 0))
        assert np.array_equal(again.x, path.x)
        assert np.array_equal(again.branch_idx, path.branch_idx)
        assert np.array_equal(again.local_time, path.local_time)
        other = simulate_spider(half_half, 1.0, 1e-3, RngStream(101, 1))
        assert not np.array_equal(other.x, path.x)

    def test_radial_invariants(self, path):
        assert (path.x >= 0.0).all()
        assert (np.diff(path.local_time) >= 0.0).all()

    def test_local_time_grows_only_at_zeros(self, path):
        increases = np.flatnonzero(np.diff(path.local_time) > 0.0) + 1
        assert (path.x[increases] == 0.0).all()

    def test_branch_absent_exactly_at_origin_points(self, path):
        assert ((path.branch_idx < 0) == (path.x == 0.0)).all()

    def test_branch_constant_per_excursion(self, path):
        for start, end, label in excursions(path):
            inside = path.branch_idx[start + 1 : end]
            inside = inside[path.x[start + 1 : end] > 0]
            assert (inside == inside[0]).all()
            assert path.labels[inside[0]] == label

    def test_second_moment(self, half_half):
        xs, _ = sample_reflected_batch(4000, 1.0, 1e-3, RngStream(55, 0))
        mean = float(np.mean(xs**2))
        se = float(np.std(xs**2, ddof=1) / math.sqrt(xs.size))
        assert abs(mean - 1.0) <= 4.0 * se + 0.05

    def test_branch_law_at_fixed_time(self, half_half):
        counts = {"a": 0, "b": 0}
        for i in range(800):
            p = simulate_spider(half_half, 0.5, 5e-3, RngStream(77, i))
            _, branch, ltime = path_stats(p, 0.5)
            if branch is not None and ltime > 0:
                counts[branch] += 1
        result = chi_square_fit([counts["a"], counts["b"]], [0.5, 0.5])
        assert not result.threshold_exceeded


class TestPathStats:
    def test_origin(self, path):
        assert path_stats(path, 0.0) == (0.0, None, 0.0)

    def test_horizon(self, path):
        x, branch, ltime = path_stats(path, 1.0)
        assert x == path.x[-1]
        assert ltime == path.local_time[-1]

    def test_inside_excursion_reports_its_label(self, path):
        start, end, label = max(excursions(path), key=lambda e: e[1] - e[0])
        mid = (start + 1 + end) // 2
        x, branch, _ = path_stats(path, mid * path.step)
        assert branch == label

    def test_out_of_range(self, path):
        with pytest.raises(OutOfRange):
            path_stats(path, 1.5)
        with pytest.raises(OutOfRange):
            path_stats(path, -0.1)


class TestExcursions:
    def test_structure(self, path):
        exc = excursions(path)
        assert exc, "a 1000-step path from the origin has excursions"
        covered = np.zeros(path.n_points, dtype=bool)
        for start, end, label in exc:
            assert label in path.labels
            assert (path.x[start + 1 : end] > 0.0).all()
            assert path.x[start] == 0.0 or start == 0
            assert path.x[end] == 0.0 or end == path.n_points - 1
            covered[start + 1 : end] = True
            if path.x[end] > 0.0:
                covered[end] = True
        assert (covered == (path.x > 0.0)).all()

    def test_flat_path_has_none(self, half_half, path):
        flat = type(path)(
            step=path.step,
            x=np.zeros(11),
            branch_idx=np.full(11, -1, dtype=np.int32),
            local_time=np.zeros(11),
            labels=half_half.labels,
            seed_info=(0, 0),
        )
        assert excursions(flat) == []

    def test_labels_are_mu_distributed(self, half_half):
        counts = np.zeros(2)
        for i in range(300):
            p = simulate_spider(half_half, 0.2, 1e-3, RngStream(31, i))
            for _, _, label in excursions(p):
                counts[half_half.index_of(label)] += 1
        result = chi_square_fit(counts, [0.5, 0.5])
        assert not result.threshold_exceeded


class TestInverseLocalTime:
    def test_not_reached(self, path):
        assert inverse_local_time(path, path.local_time[-1] + 1.0) is None

    def test_first_passage(self, path):
        level = float(path.local_time[-1]) / 2.0
        idx = inverse_local_time(path, level)
        assert idx is not None
        assert path.local_time[idx] >= level
        assert path.local_time[idx - 1] < level

    def test_monotone_in_level(self, half_half):
        for i in range(50):
            p = simulate_spider(half_half, 1.0, 2e-3, RngStream(13, i))
            top = float(p.local_time[-1])
            if top <= 0:
                continue
            indices = [inverse_local_time(p, lvl) for lvl in (0.2 * top, 0.6 * top, top)]
            assert indices == sorted(indices, key=lambda v: math.inf if v is None else v)

    def test_level_validation(self, path):
        with pytest.raises(ValueError):
            inverse_local_time(path, 0.0)


class TestLevyEquivalence:
    def test_radial_and_angular_laws(self, half_half):
        xs, ls = sample_reflected_batch(3000, 1.0, 1e-4, RngStream(991, 0))
        radial = xs + ls
        theta = xs / radial
        ks_r = ks_one_sample(radial, lambda z: np.vectorize(radial_cdf_from_origin)(z, 1.0))
        assert not ks_r.threshold_exceeded
        ks_t = ks_one_sample(theta, lambda u: np.clip(u, 0.0, 1.0))
        assert not ks_t.threshold_exceeded

    def test_batch_reproducible(self):
        a = sample_reflected_batch(100, 0.5, 1e-3, RngStream(5, 9))
        b = sample_reflected_batch(100, 0.5, 1e-3, RngStream(5, 9))
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


class TestOccupationCrossCheck:
    def test_tracks_running_max_local_time(self, half_half):
        # at eps = 2 sqrt(step) the discrete boundary layer inflates the
        # occupation count by a stable constant (~1.29, step-independent);
        # the estimator must track the exact local time linearly
        step = 1e-3
        eps = 2.0 * math.sqrt(step)
        exact, estimated = [], []
        for i in range(400):
            p = simulate_spider(half_half, 1.0, step, RngStream(404, i))
            if p.local_time[-1] > 0.3:
                exact.append(float(p.local_time[-1]))
                estimated.append(occupation_local_time(p, eps))
        ratio = float(np.mean(np.array(estimated) / np.array(exact)))
        assert 1.0 < ratio < 1.6
        assert np.corrcoef(exact, estimated)[0, 1] > 0.85

    def test_wider_window_removes_boundary_layer(self, half_half):
        step = 1e-4
        eps = 8.0 * math.sqrt(step)
        ratios = []
        for i in range(300):
            p = simulate_spider(half_half, 1.0, step, RngStream(405, i))
            if p.local_time[-1] > 0.3:
                ratios.append(occupation_local_time(p, eps) / float(p.local_time[-1]))
        assert abs(float(np.mean(ratios)) - 1.0) < 0.1


class TestCsvDump:
    def test_roundtrip_columns(self, path):
        buf = io.StringIO()
        write_path_csv(path, buf)
        lines = buf.getvalue().strip().split("\n")
        assert lines[0] == "t,x,branch,local_time"
        assert len(lines) == path.n_points + 1
        first = lines[1].split(",")
        assert first[0] == "0.0" and first[1] == "0.0" and first[2] == ""
