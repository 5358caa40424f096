"""Dominating urn processes: step semantics, closed form, dominance."""

import numpy as np
import pytest

from stakesim.bounds import (
    BoundProcessState,
    am2_mean_closed_form,
    am2_mean_recursion,
    am_step,
    no_compounding_bound,
    run_bound,
    closed_form_regime_ok,
)
from stakesim.errors import InvalidParameterError, OutOfRegimeError
from stakesim.montecarlo import derive_stream, dominance_check


class TestAmStep:
    def test_honest_monopoly(self):
        state = BoundProcessState(0.0, 1.0, c=0.5, variant="am1")
        for draw in (0.0, 0.3, 0.9):
            out = am_step(state, draw)
            assert (out.x_adversary, out.x_honest) == (0.0, 1.5)

    def test_am1_adversary_win_clips_honest(self):
        state = BoundProcessState(1.0, 1.0, c=1.0, variant="am1")
        out = am_step(state, 0.3)  # 0.3 < 1/2: adversary wins
        assert (out.x_adversary, out.x_honest) == (2.0, 0.0)

    def test_am2_total_grows_by_c(self):
        state = BoundProcessState(1.0, 2.0, c=1.0, variant="am2")
        out = am_step(state, 0.2)  # 0.2 < 1/3
        assert (out.x_adversary, out.x_honest) == (3.0, 1.0)
        assert out.x_adversary + out.x_honest == state.x_adversary + state.x_honest + 1.0

    def test_am2_total_growth_until_clipped(self):
        # While the honest side stays positive the am2 total is S0 + c*t.
        state = BoundProcessState(1.0, 9.0, c=0.5, variant="am2")
        rng = derive_stream(90, 0)
        for t in range(1, 17):
            state = am_step(state, float(rng.random()))
            if state.x_honest > 0.0:
                assert state.x_adversary + state.x_honest == pytest.approx(
                    10.0 + 0.5 * t, rel=1e-12
                )

    def test_honest_draw_boundary(self):
        state = BoundProcessState(1.0, 1.0, c=1.0, variant="am1")
        out = am_step(state, 0.5)  # draw == fraction: honest wins (strict <)
        assert (out.x_adversary, out.x_honest) == (1.0, 2.0)

    def test_fraction_of_empty_honest_side(self):
        state = BoundProcessState(2.0, 0.0, c=1.0)
        assert state.fraction == 1.0


class TestRunBound:
    def test_zero_reward_constant_fraction(self):
        assert run_bound("am1", 100, 0.0, 0.25, 1.0, derive_stream(91, 0)) == 0.25

    def test_t_zero(self):
        assert run_bound("am2", 0, 1.0, 0.25, 1.0, derive_stream(91, 1)) == 0.25

    def test_matches_pure_python_steps(self):
        for variant in ("am1", "am2"):
            rng_a = derive_stream(92, 7)
            rng_b = derive_stream(92, 7)
            fast = run_bound(variant, 200, 0.01, 1 / 3, 1.0, rng_a)
            state = BoundProcessState(1 / 3, 2 / 3, c=0.01, variant=variant)
            for draw in rng_b.random(200):
                state = am_step(state, float(draw))
            assert fast == state.fraction

    def test_unknown_variant(self):
        with pytest.raises(InvalidParameterError):
            run_bound("am3", 10, 0.1, 0.5, 1.0, derive_stream(92, 0))

    def test_am2_sample_mean_matches_closed_form(self):
        # In-regime configuration: R = c*T = 0.5 <= S0*(1-v0) = 2/3.
        t, c, v0, s0 = 10, 0.05, 1 / 3, 1.0
        finals = np.array(
            [run_bound("am2", t, c, v0, s0, derive_stream(93, i)) for i in range(20000)]
        )
        bound = am2_mean_closed_form(t, c, v0, s0)
        se = finals.std(ddof=1) / np.sqrt(finals.size)
        assert abs(finals.mean() - bound.expected_final_fraction) < 3 * se


class TestClosedForm:
    def test_reference_values(self):
        bound = am2_mean_closed_form(10, 0.05, 1 / 3, 1.0)
        assert bound.eta == pytest.approx(0.47619047619047616, rel=1e-12)
        assert bound.expected_final_fraction == pytest.approx(
            0.4920634920634921, rel=1e-12
        )

    def test_t_zero_and_tiny_c(self):
        assert am2_mean_closed_form(0, 0.05, 0.25, 1.0).expected_final_fraction == 0.25
        bound = am2_mean_closed_form(5, 1e-12, 0.25, 1.0)
        assert bound.expected_final_fraction == pytest.approx(0.25, abs=1e-9)

    def test_out_of_regime_raises(self):
        # R = 1 > S0*(1-v0) = 2/3 violates the precondition.
        with pytest.raises(OutOfRegimeError):
            am2_mean_closed_form(1, 1.0, 1 / 3, 1.0)
        assert not closed_form_regime_ok(1, 1.0, 1 / 3, 1.0)
        assert closed_form_regime_ok(10, 0.05, 1 / 3, 1.0)

    def test_out_of_regime_flag(self):
        err = None
        try:
            am2_mean_closed_form(100, 1.0, 1 / 3, 1.0)
        except OutOfRegimeError as exc:
            err = exc
        assert err is not None and err.simulated_only

    def test_recursion_matches_closed_form(self):
        for t, c, v0, s0 in [(10, 0.05, 1 / 3, 1.0), (500, 0.001, 0.2, 2.0), (1, 0.1, 0.4, 1.0)]:
            closed = am2_mean_closed_form(t, c, v0, s0).expected_final_fraction
            iterated = am2_mean_recursion(t, c, v0, s0)
            assert iterated == pytest.approx(closed, rel=1e-12)


class TestNoCompoundingBound:
    def test_eta_zero(self):
        assert no_compounding_bound(0.3, 0.0) == 0.3

    def test_reference_value(self):
        assert no_compounding_bound(1 / 3, 1.0) == pytest.approx(0.4, rel=1e-12)

    def test_bounded_in_eta_vs_linear_compounding(self):
        v0 = 1 / 3
        cap = v0 / (1.0 - v0)
        assert no_compounding_bound(v0, float("inf")) == pytest.approx(cap, rel=1e-12)
        for eta in (1.0, 10.0, 100.0, 1e6):
            assert no_compounding_bound(v0, eta) < cap
        # compounded mean grows linearly in eta instead
        grow = [
            am2_mean_closed_form(t, 0.001, v0, 10.0).expected_final_fraction
            for t in (100, 200, 400)
        ]
        diffs = np.diff(grow)  # mean is linear in T: step 200->400 doubles 100->200
        assert diffs[1] == pytest.approx(2 * diffs[0], rel=1e-9)

    def test_monotone_in_eta(self):
        values = [no_compounding_bound(0.3, eta) for eta in np.linspace(0, 50, 20)]
        assert all(a <= b + 1e-15 for a, b in zip(values, values[1:]))


class TestDominanceAndCoupling:
    def test_am2_dominates_am1(self):
        t, c, v0 = 2000, 0.001, 1 / 3
        am1 = np.array(
            [run_bound("am1", t, c, v0, 1.0, derive_stream(94, i)) for i in range(8000)]
        )
        am2 = np.array(
            [run_bound("am2", t, c, v0, 1.0, derive_stream(95, i)) for i in range(8000)]
        )
        report = dominance_check(am1, am2)
        assert report.within_noise

    def test_monotone_coupling_in_initial_fraction(self):
        # Same draws, larger starting fraction: final fraction ordered.
        rng = derive_stream(96, 0)
        for _ in range(1000):
            v_lo = float(rng.uniform(0.05, 0.45))
            v_hi = float(rng.uniform(v_lo + 0.01, 0.95))
            c = float(rng.uniform(0.001, 0.5))
            t = int(rng.integers(1, 60))
            seed = int(rng.integers(0, 2**32))
            f_lo = run_bound("am1", t, c, v_lo, 1.0, derive_stream(97, seed))
            f_hi = run_bound("am1", t, c, v_hi, 1.0, derive_stream(97, seed))
            assert f_lo <= f_hi + 1e-12
