"""Closed-form variance math against the exact enumeration oracle."""

import math

import numpy as np
import pytest

from conftest import enumerate_two_party_variance
from stakesim.analytics import (
    LogGrowthProfile,
    equitability_report,
    max_reward_constant,
    max_reward_geometric,
    normalized_variance,
    normalized_variance_constant,
    normalized_variance_decreasing,
    normalized_variance_geometric,
    pool_gain,
    variance_closed_form,
    variance_constant,
    variance_curve_rows,
    variance_decreasing,
    variance_geometric,
    verify_geometric_optimality,
)
from stakesim.errors import InvalidParameterError, ResourceLimitError
from stakesim.montecarlo import derive_stream
from stakesim.rewards import (
    Checkpoint,
    DecreasingRewardParams,
    composed_schedule,
    constant_schedule,
    decreasing_schedule,
    geometric_schedule,
)


class TestClosedFormAgainstEnumeration:
    """The product formula must equal brute-force enumeration exactly."""

    def test_hand_worked_two_slot_case(self):
        # T=2 constant R=2: normalized variance is 1/3, Var at v0=1/2 is 1/12.
        sched = constant_schedule(2, 2.0, 1.0)
        assert variance_closed_form(sched, 0.5) == pytest.approx(1.0 / 12.0, rel=1e-12)
        assert enumerate_two_party_variance(sched.per_slot, 1.0, 0.5) == pytest.approx(
            1.0 / 12.0, rel=1e-12
        )

    @pytest.mark.parametrize("t", range(1, 13))
    def test_random_schedules_all_horizons(self, t):
        rng = derive_stream(777, t)
        for _ in range(20):
            s0 = float(rng.uniform(0.5, 3.0))
            r = float(rng.uniform(0.0, 8.0))
            v0 = float(rng.uniform(0.05, 0.95))
            per_slot = rng.dirichlet(np.ones(t)) * r
            cumulative = np.concatenate([[s0], s0 + np.cumsum(per_slot)])
            from stakesim.rewards import RewardSchedule

            sched = RewardSchedule(t, s0, per_slot, cumulative)
            exact = enumerate_two_party_variance(per_slot, s0, v0)
            closed = variance_closed_form(sched, v0)
            assert closed == pytest.approx(exact, abs=1e-10)

    @pytest.mark.parametrize(
        "family",
        ["constant", "geometric", "composed", "decreasing"],
    )
    def test_family_schedules(self, family):
        t, r, s0, v0 = 9, 4.0, 1.5, 0.3
        if family == "constant":
            sched = constant_schedule(t, r, s0)
        elif family == "geometric":
            sched = geometric_schedule(t, r, s0)
        elif family == "composed":
            sched = composed_schedule([Checkpoint(4, 1.5), Checkpoint(t, 2.5)], s0)
        else:
            sched = decreasing_schedule(
                t, DecreasingRewardParams(alpha=0.2, target_total=r), s0
            )
        exact = enumerate_two_party_variance(sched.per_slot, s0, v0)
        assert variance_closed_form(sched, v0) == pytest.approx(exact, abs=1e-10)


class TestClosedFormValues:
    def test_degenerate_ownership(self):
        sched = constant_schedule(10, 5.0, 1.0)
        assert variance_closed_form(sched, 0.0) == 0.0
        assert variance_closed_form(sched, 1.0) == 0.0

    def test_constant_flagship_value(self):
        # R^2/((T+R)(1+R)) at T = R = 1000 is 0.4995004995...
        sched = constant_schedule(1000, 1000.0, 1.0)
        norm = variance_closed_form(sched, 1.0 / 3.0) / (2.0 / 9.0)
        assert norm == pytest.approx(0.4995004995004995, abs=1e-9)
        assert normalized_variance_constant(1000, 1000.0) == pytest.approx(
            0.4995004995004995, rel=1e-12
        )

    def test_geometric_flagship_value(self):
        # 1 - (2*1001^(1/1000) - 1)^1000 / 1001^2 = 0.04629757545275...
        sched = geometric_schedule(1000, 1000.0, 1.0)
        norm = variance_closed_form(sched, 1.0 / 3.0) / (2.0 / 9.0)
        assert norm == pytest.approx(0.046297575452754135, abs=1e-9)
        assert normalized_variance_geometric(1000, 1000.0) == pytest.approx(
            0.046297575452754135, rel=1e-9
        )


class TestFamilyFormulas:
    def test_constant_t1(self):
        for r in (0.5, 2.0, 7.0):
            expected = (r / (1.0 + r)) ** 2
            assert normalized_variance_constant(1, r) == pytest.approx(
                expected, rel=1e-12
            )

    def test_constant_example_grid_point(self):
        assert normalized_variance_constant(100, 10.0) == pytest.approx(
            100.0 / (110.0 * 11.0), rel=1e-12
        )

    def test_zero_reward(self):
        assert normalized_variance_constant(10, 0.0) == 0.0
        assert normalized_variance_geometric(10, 0.0) == 0.0

    def test_geometric_equals_constant_at_t1(self):
        for r in (0.5, 2.0, 7.0):
            assert normalized_variance_geometric(1, r) == pytest.approx(
                normalized_variance_constant(1, r), rel=1e-9
            )

    def test_geometric_matches_schedule_product(self):
        rng = derive_stream(31, 0)
        for _ in range(20):
            t = int(rng.integers(1, 50))
            r = float(rng.uniform(0.0, 20.0))
            s0 = float(rng.uniform(0.5, 4.0))
            v0 = float(rng.uniform(0.1, 0.9))
            sched = geometric_schedule(t, r, s0)
            assert variance_geometric(t, r, s0, v0) == pytest.approx(
                variance_closed_form(sched, v0), rel=1e-9, abs=1e-15
            )

    def test_constant_matches_schedule_product(self):
        rng = derive_stream(32, 0)
        for _ in range(20):
            t = int(rng.integers(1, 50))
            r = float(rng.uniform(0.0, 20.0))
            s0 = float(rng.uniform(0.5, 4.0))
            v0 = float(rng.uniform(0.1, 0.9))
            sched = constant_schedule(t, r, s0)
            assert variance_constant(t, r, s0, v0) == pytest.approx(
                variance_closed_form(sched, v0), rel=1e-9, abs=1e-15
            )

    def test_decreasing_matches_schedule_product(self):
        rng = derive_stream(33, 0)
        for _ in range(20):
            t = int(rng.integers(1, 50))
            r = float(rng.uniform(0.1, 20.0))
            s0 = float(rng.uniform(0.5, 4.0))
            v0 = float(rng.uniform(0.1, 0.9))
            alpha = float(rng.uniform(0.01, 0.99))
            params = DecreasingRewardParams(alpha=alpha, target_total=r)
            sched = decreasing_schedule(t, params, s0)
            assert variance_decreasing(t, params, s0, v0) == pytest.approx(
                variance_closed_form(sched, v0), rel=1e-9, abs=1e-15
            )

    def test_decreasing_t1_equals_constant(self):
        params = DecreasingRewardParams(alpha=0.37, target_total=5.0)
        assert normalized_variance_decreasing(1, params) == pytest.approx(
            normalized_variance_constant(1, 5.0), rel=1e-12
        )

    def test_geometric_decreasing_in_t(self):
        values = [normalized_variance_geometric(t, 10.0) for t in (10, 100, 1000, 10000)]
        assert all(a > b for a, b in zip(values, values[1:]))
        assert values[-1] < 1e-2

    def test_scale_invariance(self):
        for k in (2.0, 3.7, 0.25):
            a = variance_closed_form(geometric_schedule(40, 6.0, 1.0), 0.3)
            b = variance_closed_form(geometric_schedule(40, 6.0 * k, k), 0.3)
            assert b == pytest.approx(a, rel=1e-12)


class TestMonotonicityAndOrdering:
    def test_monotone_in_r_and_t(self):
        t_grid = np.unique(np.logspace(1, 4, 10).astype(int))
        r_grid = np.logspace(-1, 3, 10)
        for family in (normalized_variance_constant, normalized_variance_geometric):
            for t in t_grid:
                vals = [family(int(t), float(r)) for r in r_grid]
                assert all(a <= b + 1e-15 for a, b in zip(vals, vals[1:]))
            for r in r_grid:
                vals = [family(int(t), float(r)) for t in t_grid]
                assert all(a >= b - 1e-15 for a, b in zip(vals, vals[1:]))

    def test_family_ordering_geometric_constant_decreasing(self):
        # At equal (T, R): geometric <= constant <= decreasing (alpha = 1/T).
        for t in (10, 32, 100, 316, 1000, 10000):
            rows = dict(
                (family, value)
                for _, family, value in variance_curve_rows([t], 10.0)
            )
            assert rows["geometric"] <= rows["constant"] + 1e-15
            assert rows["constant"] <= rows["decreasing"] + 1e-15

    def test_variance_cap_approached(self):
        # Constant rewards with R = T^2 approach the v0(1-v0) ceiling.
        norm = normalized_variance_constant(100, 10_000.0)
        assert norm == pytest.approx(1e8 / (10100.0 * 10001.0), rel=1e-12)
        assert norm > 0.97
        assert normalized_variance_constant(1000, 1000.0**2) > norm
        assert norm <= 1.0


class TestEquitabilityReport:
    def test_report_fields(self):
        sched = constant_schedule(1000, 1000.0, 1.0)
        report = equitability_report(sched, [1.0 / 3.0, 2.0 / 3.0])
        assert report.normalized_variance == pytest.approx(0.4995005, rel=1e-6)
        assert report.epsilon_tilde == report.normalized_variance
        np.testing.assert_allclose(
            report.per_party_variance,
            report.normalized_variance * report.variance_cap_per_party,
            rtol=1e-12,
        )
        assert 0.0 <= report.normalized_variance <= 1.0

    def test_party_independence(self):
        sched = geometric_schedule(100, 30.0, 2.0)
        report = equitability_report(sched, [0.1, 0.2, 0.3, 0.4])
        norms = report.per_party_variance / report.variance_cap_per_party
        np.testing.assert_allclose(norms, report.normalized_variance, rtol=1e-12)

    def test_bad_fractions(self):
        sched = constant_schedule(5, 1.0, 1.0)
        with pytest.raises(InvalidParameterError):
            equitability_report(sched, [0.5, 0.4])


class TestDesignHelpers:
    def test_geometric_design_achieves_target(self):
        r = max_reward_geometric(10_000, 0.1)
        achieved = normalized_variance_geometric(10_000, r)
        assert abs(achieved - 0.1) <= 0.02

    def test_geometric_design_small_eps_small_r(self):
        assert max_reward_geometric(1000, 1e-6) < max_reward_geometric(1000, 1e-3)
        assert max_reward_geometric(1000, 1e-9) == pytest.approx(0.0, abs=1e-2)

    def test_geometric_design_growth_trend(self):
        # log R grows like sqrt(T): ratios of log R across decades of T
        # track sqrt(10) = 3.162.
        values = [math.log1p(max_reward_geometric(t, 0.1)) for t in (100, 1000, 10000, 100000)]
        ratios = [b / a for a, b in zip(values, values[1:])]
        for ratio in ratios:
            assert 2.5 < ratio < 4.0

    def test_geometric_design_infeasible(self):
        with pytest.raises(InvalidParameterError):
            max_reward_geometric(1, 0.9)

    def test_constant_design(self):
        assert max_reward_constant(1000, 0.1) == pytest.approx(1000.0 / 9.0, rel=1e-12)
        assert max_reward_constant(50, 0.5) == pytest.approx(50.0, rel=1e-12)
        achieved = normalized_variance_constant(1000, max_reward_constant(1000, 0.1))
        assert achieved == pytest.approx(0.09910802775024777, rel=1e-9)
        # linear growth in T at fixed eps
        assert max_reward_constant(2000, 0.1) == pytest.approx(
            2.0 * max_reward_constant(1000, 0.1), rel=1e-12
        )

    def test_eps_domain(self):
        with pytest.raises(InvalidParameterError):
            max_reward_constant(10, 0.0)
        with pytest.raises(InvalidParameterError):
            max_reward_constant(10, 1.0)


class TestPoolGain:
    def test_no_pooling_effect(self):
        assert pool_gain(0.25, 0.25) == pytest.approx(1.0, rel=1e-12)

    def test_reference_value(self):
        assert pool_gain(0.1, 0.3) == pytest.approx(0.25925925925925924, rel=1e-12)

    def test_everyone_pools_limit(self):
        assert pool_gain(0.1, 1.0 - 1e-12) == pytest.approx(0.0, abs=1e-9)

    def test_party_larger_than_pool_rejected(self):
        with pytest.raises(InvalidParameterError):
            pool_gain(0.4, 0.3)

    def test_matches_closed_form_variance_ratio(self):
        sched = constant_schedule(50, 5.0, 1.0)
        va, vp = 0.1, 0.3
        unpooled = variance_closed_form(sched, va)
        pooled = (va / vp) ** 2 * variance_closed_form(sched, vp)
        assert pooled / unpooled == pytest.approx(pool_gain(va, vp), rel=1e-12)


class TestOptimalityOracle:
    def test_t1_trivial(self):
        cert = verify_geometric_optimality(1, 3.0, 0.01)
        assert cert.points_evaluated == 1
        assert cert.max_violation <= 1e-12

    def test_t2_minimizer_is_uniform(self):
        cert = verify_geometric_optimality(2, 1.0, 0.001)
        half_log2 = math.log(2.0) / 2.0
        np.testing.assert_allclose(cert.grid_minimizer, [half_log2, half_log2], rtol=1e-9)
        assert cert.max_violation <= 1e-12

    def test_t3_uniform_below_grid(self):
        cert = verify_geometric_optimality(3, 1.0, 0.01)
        assert cert.max_violation <= 1e-12
        assert cert.uniform_value == pytest.approx(
            normalized_variance_geometric(3, 1.0), rel=1e-12
        )

    def test_grid_minimum_positive_gap(self):
        # The grid minimum sits strictly above the continuum optimum when
        # the uniform profile is off-grid.
        cert = verify_geometric_optimality(3, 1.0, 0.01)
        assert cert.grid_min_value >= cert.uniform_value

    def test_resource_limit(self):
        with pytest.raises(ResourceLimitError):
            verify_geometric_optimality(6, 1000.0, 1e-4)

    def test_zero_reward(self):
        cert = verify_geometric_optimality(3, 0.0, 0.01)
        assert cert.uniform_value == 0.0
        assert cert.max_violation <= 1e-12


class TestLogGrowthProfile:
    def test_from_schedule(self):
        sched = geometric_schedule(10, 5.0, 1.0)
        profile = LogGrowthProfile.from_schedule(sched)
        assert profile.total_log_growth == pytest.approx(math.log(6.0), rel=1e-9)
        assert np.all(profile.thetas >= 0)

    def test_negative_rejected(self):
        with pytest.raises(InvalidParameterError):
            LogGrowthProfile(np.array([0.1, -0.2]))

    def test_normalized_variance_of_schedule(self):
        sched = geometric_schedule(100, 9.0, 1.0)
        assert normalized_variance(sched) == pytest.approx(
            normalized_variance_geometric(100, 9.0), rel=1e-9
        )


def test_huge_reward_log_domain_no_overflow():
    # Growth regime where S(T)^2 overflows: T = 10^4, R near e^sqrt(T).
    r = max_reward_geometric(10_000, 0.1)
    assert math.isinf(r) is False and r > 1e13
    value = normalized_variance_geometric(10_000, r)
    assert 0.05 < value < 0.15
