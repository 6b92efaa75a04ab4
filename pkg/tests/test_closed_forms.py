import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spiderlab import (
    BranchSpace,
    DomainError,
    PenaltyParams,
    asymptotic_density_ratio,
    i_star,
    j_star,
    joint_density_local_time,
    martingale_density,
    radial_cdf_from_origin,
    radial_density,
    z_star,
    z_star_asymptotic,
)

# frozen from 30-digit evaluation of the closed forms
J_STAR_0_1_2 = 0.564189583547756286948079451561
J_STAR_M1_2_1 = 1.59576912160573071175978423974
J_STAR_1_1_1 = 4.673042971428296754878148045
I_STAR_M1_M1_0_2 = 0.564189583547756286948079451561
I_STAR_0_1_0_1 = 4.0953271022031216495771936955
I_STAR_1_1_0_1 = 7.39276964360337794327449527113
JOINT_0_1_HALF_HALF = 0.483941449038286699595660385871


class TestJStar:
    def test_zero_slope(self):
        assert j_star(0.0, 1.0, 2.0) == pytest.approx(J_STAR_0_1_2, rel=1e-14)

    def test_negative_slope(self):
        assert j_star(-1.0, 2.0, 1.0) == pytest.approx(J_STAR_M1_2_1, rel=1e-14)

    def test_positive_slope_includes_sinh_term(self):
        assert j_star(1.0, 1.0, 1.0) == pytest.approx(J_STAR_1_1_1, rel=1e-14)

    def test_domain(self):
        with pytest.raises(DomainError):
            j_star(1.0, 1.0, 0.0)
        with pytest.raises(DomainError):
            j_star(1.0, -0.5, 1.0)

    def test_log_space_branch_matches_log_identity(self):
        # arg = beta x + t beta^2/2 = 600 > 500 forces the log-space path
        value = j_star(1.0, 100.0, 1000.0)
        expected = math.exp(600.0 + math.log1p(-math.exp(-200.0))) + math.sqrt(
            2.0 / (math.pi * 1000.0**3)
        ) * 100.0
        assert math.isfinite(value)
        assert value == pytest.approx(expected, rel=1e-12)

    def test_overflow_is_honest_inf(self):
        assert j_star(2.0, 300.0, 100.0) == math.inf

    @settings(max_examples=60, deadline=None)
    @given(
        beta=st.floats(-3.0, 3.0),
        x=st.floats(0.0, 5.0),
        t=st.floats(0.01, 50.0),
    )
    def test_nonnegative(self, beta, x, t):
        assert j_star(beta, x, t) >= 0.0


class TestIStar:
    def test_both_zero_row(self):
        assert i_star(0.0, 0.0, 5.0, 9.0) == 1.0

    def test_both_negative_row(self):
        assert i_star(-1.0, -1.0, 0.0, 2.0) == pytest.approx(I_STAR_M1_M1_0_2, rel=1e-14)

    def test_gamma_dominant_row(self):
        assert i_star(0.0, 1.0, 0.0, 1.0) == pytest.approx(I_STAR_0_1_0_1, rel=1e-14)

    def test_diagonal_row(self):
        assert i_star(1.0, 1.0, 0.0, 1.0) == pytest.approx(I_STAR_1_1_0_1, rel=1e-14)

    def test_remaining_rows_dispatch(self):
        t = 2.0
        assert i_star(0.0, -2.0, 1.0, t) == pytest.approx(
            math.sqrt(2.0 / (math.pi * t)) / 2.0, rel=1e-14
        )
        assert i_star(-2.0, 0.0, 1.0, t) == pytest.approx(
            math.sqrt(2.0 / (math.pi * t)) / 2.0, rel=1e-14
        )
        beta, gamma, x = 1.5, -0.5, 0.7
        expected = math.sqrt(2.0 / (math.pi * t)) / (beta - gamma) + (
            2.0 * beta / (beta - gamma)
        ) * math.exp(-beta * x + t * beta**2 / 2.0)
        assert i_star(beta, gamma, x, t) == pytest.approx(expected, rel=1e-14)

    def test_domain(self):
        with pytest.raises(DomainError):
            i_star(0.0, 0.0, 1.0, -1.0)

    @settings(max_examples=80, deadline=None)
    @given(
        beta=st.floats(-3.0, 3.0),
        gamma=st.floats(-3.0, 3.0),
        x=st.floats(0.0, 5.0),
        t=st.floats(0.01, 50.0),
    )
    def test_total_and_positive(self, beta, gamma, x, t):
        assert i_star(beta, gamma, x, t) > 0.0


class TestMartingaleDensity:
    def test_unit_at_origin_every_regime(self, half_half, regime_sets):
        for params in regime_sets.values():
            for k in ("a", "b", None):
                assert martingale_density(params, half_half, 0.0, k, 0.0, 0.0) == 1.0

    def test_dominant_gamma_value(self, half_half):
        params = PenaltyParams({"a": 0.0, "b": 0.0}, 1.0)
        value = martingale_density(params, half_half, 0.5, "b", 2.0, 1.0)
        assert value == pytest.approx(math.e, rel=1e-14)

    def test_all_negative_no_time_dependence(self, half_half):
        params = PenaltyParams({"a": -1.0, "b": -1.0}, -1.0)
        assert martingale_density(params, half_half, 1.0, "a", 0.0, 7.0) == pytest.approx(2.0)
        assert martingale_density(params, half_half, 1.0, "a", 0.0, 0.0) == pytest.approx(2.0)

    def test_dominant_alpha_value(self, half_half):
        params = PenaltyParams({"a": 1.0, "b": 0.0}, 0.0)
        value = martingale_density(params, half_half, 1.0, "a", 0.0, 0.0)
        assert value == pytest.approx(math.exp(-1.0) + 2.0 * math.sinh(1.0), rel=1e-14)
        off_branch = martingale_density(params, half_half, 1.0, "b", 0.0, 0.0)
        assert off_branch == pytest.approx(math.exp(-1.0), rel=1e-14)

    def test_neutral_is_one(self, half_half):
        params = PenaltyParams({"a": -1.0, "b": -2.0}, 0.0)
        assert martingale_density(params, half_half, 3.0, "b", 2.0, 5.0) == 1.0

    def test_branch_irrelevant_at_origin(self, half_half, regime_sets):
        for params in regime_sets.values():
            values = {
                martingale_density(params, half_half, 0.0, k, 1.5, 2.0)
                for k in ("a", "b", None)
            }
            assert len(values) == 1

    def test_label_required_away_from_origin(self, half_half):
        params = PenaltyParams({"a": 0.0, "b": 0.0}, 1.0)
        with pytest.raises(ValueError, match="label"):
            martingale_density(params, half_half, 1.0, None, 0.0, 0.0)

    def test_domain(self, half_half):
        params = PenaltyParams({"a": 0.0, "b": 0.0}, 1.0)
        with pytest.raises(DomainError):
            martingale_density(params, half_half, -1.0, "a", 0.0, 0.0)


class TestZStar:
    def test_neutral_origin_is_one(self, half_half):
        params = PenaltyParams({"a": 0.0, "b": 0.0}, 0.0)
        assert z_star(params, half_half, 0.0, "a", 7.0) == 1.0

    def test_matches_i_star_at_origin(self, half_half):
        params = PenaltyParams({"a": -1.0, "b": -1.0}, -1.0)
        assert z_star(params, half_half, 0.0, "a", 2.0) == pytest.approx(
            I_STAR_M1_M1_0_2, rel=1e-14
        )

    def test_origin_drops_j_term_for_every_label(self, half_half):
        params = PenaltyParams({"a": 1.0, "b": -1.0}, 0.5)
        expected = 0.5 * i_star(1.0, 0.5, 0.0, 3.0) + 0.5 * i_star(-1.0, 0.5, 0.0, 3.0)
        for k in ("a", "b", None):
            assert z_star(params, half_half, 0.0, k, 3.0) == pytest.approx(expected, rel=1e-14)

    def test_positive_x_adds_branch_term(self, half_half):
        params = PenaltyParams({"a": 1.0, "b": -1.0}, 0.5)
        base = 0.5 * i_star(1.0, 0.5, 2.0, 3.0) + 0.5 * i_star(-1.0, 0.5, 2.0, 3.0)
        assert z_star(params, half_half, 2.0, "a", 3.0) == pytest.approx(
            base + j_star(1.0, 2.0, 3.0), rel=1e-14
        )


class TestZStarAsymptotic:
    def test_neutral_all_negative_row(self, half_half):
        params = PenaltyParams({"a": -1.0, "b": -2.0}, 0.0)
        u = 50.0
        expected = math.sqrt(2.0 / (math.pi * u)) * (0.5 / 1.0 + 0.5 / 2.0)
        assert z_star_asymptotic(params, half_half, 0.3, "a", u) == pytest.approx(
            expected, rel=1e-14
        )

    def test_dominant_gamma_strict_row(self, half_half):
        params = PenaltyParams({"a": 0.0, "b": 0.0}, 1.0)
        expected = (0.5 * 2.0 + 0.5 * 2.0) * math.exp(0.5)
        assert z_star_asymptotic(params, half_half, 0.0, "a", 1.0) == pytest.approx(
            expected, rel=1e-14
        )

    def test_ratio_converges_to_density(self, half_half, regime_sets):
        x, k, l, s = 0.5, "a", 1.0, 1.0
        tie = PenaltyParams({"a": 1.0, "b": 0.0}, 1.0)  # gamma equals the top slope
        sets = list(regime_sets.values()) + [tie]
        for params in sets:
            target = martingale_density(params, half_half, x, k, l, s)
            errors = [
                abs(asymptotic_density_ratio(params, half_half, x, k, l, s, u) - target)
                for u in (1e4, 1e6, 1e8)
            ]
            assert errors[0] >= errors[1] >= errors[2]
            assert errors[2] <= 1e-6

    def test_rejects_u_below_s(self, half_half):
        params = PenaltyParams({"a": 0.0, "b": 0.0}, 1.0)
        with pytest.raises(DomainError):
            asymptotic_density_ratio(params, half_half, 0.5, "a", 1.0, 2.0, 1.5)


class TestJointDensity:
    def test_frozen_value(self):
        assert joint_density_local_time(0.0, 1.0, 0.5, 0.5) == pytest.approx(
            JOINT_0_1_HALF_HALF, rel=1e-14
        )

    def test_domain(self):
        with pytest.raises(DomainError):
            joint_density_local_time(0.0, 0.0, 0.5, 0.5)
        with pytest.raises(DomainError):
            joint_density_local_time(0.0, 1.0, 0.0, 0.5)
        with pytest.raises(DomainError):
            joint_density_local_time(-1.0, 1.0, 0.5, 0.5)

    def test_radial_cdf_is_antiderivative(self):
        t = 2.0
        h = 1e-6
        for z in (0.3, 1.0, 2.5):
            derivative = (
                radial_cdf_from_origin(z + h, t) - radial_cdf_from_origin(z - h, t)
            ) / (2.0 * h)
            assert derivative == pytest.approx(radial_density(0.0, t, z), rel=1e-7)

    def test_radial_cdf_limits(self):
        assert radial_cdf_from_origin(0.0, 1.0) == 0.0
        assert radial_cdf_from_origin(50.0, 1.0) == pytest.approx(1.0, abs=1e-12)
