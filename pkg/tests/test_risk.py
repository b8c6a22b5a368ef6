"""Delay kernels, risk surrogate, timeliness, budgets, objective."""

import numpy as np
import pytest
from hypothesis import given, strategies as st

from aegis import NULL_ACTION, Action, ResourcePools, assess, e2e_delay
from aegis import risk_surrogate, timely_indicator, update_budget
from aegis.risk import comp_delay, long_term_objective, queue_delay, tx_delay
from conftest import build_task

# high-precision reference values (mpmath, 50 digits)
TX_HALF_MB_10MHZ_SINR100 = 0.062994454454704732773
SIG_Z2 = 0.11920292202211755594
E2E_TOTAL = 0.085176272636522914261


class TestTxDelay:
    def test_against_high_precision_reference(self):
        d = tx_delay(0.5 * 8 * 2**20, 10e6, 100.0)
        assert d == pytest.approx(TX_HALF_MB_10MHZ_SINR100, rel=1e-12)

    def test_zero_sinr_gives_infinite_delay(self):
        assert tx_delay(1e6, 10e6, 0.0) == float("inf")

    def test_zero_data_is_free(self):
        assert tx_delay(0.0, 10e6, 5.0) == 0.0

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            tx_delay(1e6, 0.0, 1.0)
        with pytest.raises(ValueError):
            tx_delay(1e6, 1e6, -0.5)

    @given(st.floats(1e3, 1e8), st.floats(1e4, 1e8), st.floats(1e-3, 1e6))
    def test_monotone_in_bandwidth(self, data, bandwidth, sinr):
        assert tx_delay(data, 2 * bandwidth, sinr) < tx_delay(data, bandwidth, sinr)

    @given(st.floats(1e3, 1e8), st.floats(1e4, 1e8), st.floats(1e-3, 1e6))
    def test_monotone_in_sinr(self, data, bandwidth, sinr):
        assert tx_delay(data, bandwidth, 2 * sinr) < tx_delay(data, bandwidth, sinr)


class TestQueueDelay:
    def test_worked_value(self, pools):
        assert queue_delay(1e9, 100e9, pools) == pytest.approx(
            1e9 / (55e9 + 1e-6), rel=1e-15)

    def test_empty_queue(self, pools):
        assert queue_delay(0.0, 100e9, pools) == 0.0

    def test_saturated_pool_divides_by_eps(self, pools):
        # residual clamps to zero, eps keeps the term finite
        d = queue_delay(1.0, pools.total_compute, pools)
        assert d == pytest.approx(1.0 / pools.stability_eps, rel=1e-12)

    def test_ulp_overshoot_tolerated(self, pools):
        over = pools.total_compute * (1.0 + 1e-13)
        assert np.isfinite(queue_delay(1.0, over, pools))

    def test_gross_overshoot_rejected(self, pools):
        with pytest.raises(ValueError):
            queue_delay(1.0, pools.total_compute * 1.01, pools)

    def test_negative_backlog_rejected(self, pools):
        with pytest.raises(ValueError):
            queue_delay(-1.0, 0.0, pools)


class TestCompDelay:
    def test_ratio(self):
        assert comp_delay(0.4e9, 100e9) == pytest.approx(0.004, rel=1e-15)

    def test_nonpositive_compute_rejected(self):
        with pytest.raises(ValueError):
            comp_delay(1e9, 0.0)


class TestE2eDelay:
    def test_composition_against_reference(self, pools):
        task = build_task(0, data_mb=0.5, work_gc=0.4, deadline=0.5)
        d = e2e_delay(task, Action(10e6, 100e9), 100.0, 1e9, 100e9, pools)
        assert d.tx == pytest.approx(TX_HALF_MB_10MHZ_SINR100, rel=1e-12)
        assert d.queue == pytest.approx(1e9 / (55e9 + 1e-6), rel=1e-15)
        assert d.comp == pytest.approx(0.004, rel=1e-15)
        assert d.total == pytest.approx(E2E_TOTAL, rel=1e-12)
        assert d.total == d.tx + d.queue + d.comp

    def test_null_action_is_infinite_everywhere(self, pools):
        task = build_task(0)
        d = e2e_delay(task, NULL_ACTION, 100.0, 1e9, 0.0, pools)
        assert d.tx == d.queue == d.comp == d.total == float("inf")


class TestRiskSurrogate:
    def test_midpoint_exactly_half(self):
        assert risk_surrogate(0.0, 10.0) == 0.5

    def test_against_high_precision_reference(self):
        assert risk_surrogate(0.2, 10.0) == pytest.approx(SIG_Z2, rel=1e-12)
        assert risk_surrogate(-0.2, 10.0) == pytest.approx(1 - SIG_Z2, rel=1e-12)

    def test_extreme_margins_saturate_without_overflow(self):
        with np.errstate(over="raise"):
            assert risk_surrogate(1e6, 10.0) == 0.0
            assert risk_surrogate(-1e6, 10.0) == 1.0

    def test_infinite_margins_exact(self):
        assert risk_surrogate(float("inf"), 10.0) == 0.0
        assert risk_surrogate(float("-inf"), 10.0) == 1.0

    def test_array_input(self):
        out = risk_surrogate(np.array([0.0, 0.2, -0.2]), 10.0)
        np.testing.assert_allclose(out, [0.5, SIG_Z2, 1 - SIG_Z2], rtol=1e-12)

    def test_large_argument_reference(self):
        assert risk_surrogate(5.0, 10.0) == pytest.approx(
            1.928749847963917783e-22, rel=1e-12)

    @given(st.floats(-100, 100), st.floats(-100, 100), st.floats(0.1, 100))
    def test_monotone_decreasing_in_margin(self, m1, m2, kappa):
        lo, hi = min(m1, m2), max(m1, m2)
        assert risk_surrogate(hi, kappa) <= risk_surrogate(lo, kappa)

    @given(st.floats(-1e6, 1e6), st.floats(0.1, 100))
    def test_symmetry_and_bounds(self, margin, kappa):
        r = risk_surrogate(margin, kappa)
        assert 0.0 <= r <= 1.0
        assert r + risk_surrogate(-margin, kappa) == pytest.approx(1.0, abs=1e-12)


class TestTimely:
    def test_boundary_counts(self):
        assert timely_indicator(0.5, 0.5) == 1

    def test_late_and_infinite(self):
        assert timely_indicator(0.6, 0.5) == 0
        assert timely_indicator(float("inf"), 0.5) == 0
        assert timely_indicator(float("nan"), 0.5) == 0


class TestAssess:
    def test_fields_consistent(self, pools):
        task = build_task(2, data_mb=0.5, work_gc=0.4, deadline=0.5)
        a = assess(task, Action(10e6, 100e9), 100.0, 1e9, 100e9, pools, kappa=10.0)
        assert a.user == 2
        assert a.delay == pytest.approx(E2E_TOTAL, rel=1e-12)
        assert a.margin == pytest.approx(0.5 - E2E_TOTAL, rel=1e-12)
        assert a.risk == pytest.approx(risk_surrogate(a.margin, 10.0), rel=1e-15)
        assert a.timely == 1

    def test_null_chain(self, pools):
        task = build_task(0)
        a = assess(task, NULL_ACTION, 100.0, 0.0, 0.0, pools, kappa=10.0)
        assert a.delay == float("inf")
        assert a.margin == float("-inf")
        assert a.risk == 1.0
        assert a.timely == 0


class TestBudget:
    def test_worked_consume(self):
        assert update_budget(0.5, 1, 0.3, 0.05, 1.0) == pytest.approx(0.25)

    def test_inactive_only_recovers(self):
        assert update_budget(0.5, 0, 0.99, 0.05, 1.0) == pytest.approx(0.55)

    def test_cap_clamp(self):
        assert update_budget(0.98, 0, 0.0, 0.05, 1.0) == 1.0

    def test_floor_clamp(self):
        assert update_budget(0.1, 1, 0.9, 0.05, 1.0) == 0.0

    def test_recovery_ladder_reaches_cap(self):
        # rho = 1/16 is a binary fraction, so 16 idle slots recover exactly
        b = 0.0
        for _ in range(16):
            b = update_budget(b, 0, 0.0, 0.0625, 1.0)
        assert b == 1.0

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            update_budget(0.5, 1, 1.5, 0.05, 1.0)
        with pytest.raises(ValueError):
            update_budget(-0.1, 1, 0.5, 0.05, 1.0)
        with pytest.raises(ValueError):
            update_budget(0.5, 1, 0.5, 0.05, 0.0)

    @given(
        st.floats(0, 1), st.booleans(), st.floats(0, 1),
        st.floats(0, 0.5), st.floats(0.1, 2))
    def test_stays_in_range(self, budget, active, risk, rho, cap):
        budget = min(budget, cap)
        out = update_budget(budget, int(active), risk, rho, cap)
        assert 0.0 <= out <= cap


class TestObjective:
    def test_hand_count(self):
        activity = np.array([[1, 0, 1], [1, 1, 0]])
        timely = np.array([[1, 0, 0], [1, 1, 0]])
        weights = np.array([2.0, 1.0, 1.0])
        # slot 0: user 0 timely (w=2); slot 1: users 0 and 1 timely (2+1)
        assert long_term_objective(activity, timely, weights) == 5.0

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            long_term_objective(np.ones((2, 3)), np.ones((3, 2)), np.ones(3))
