"""Core types: grids, actions, validation, slot state."""

import numpy as np
import pytest

from aegis import (
    Action,
    ActionGrid,
    NULL_ACTION,
    ResourcePools,
    SlotState,
    TaskSpec,
    UserProfile,
    make_action_grid,
)
from aegis.core import MB_TO_BITS, validate_action
from conftest import build_task


def test_unit_constants():
    assert MB_TO_BITS == 8 * 2**20


class TestActionGrid:
    def test_uniform_levels_five(self, pools):
        g = make_action_grid(pools, 5, 5)
        assert g.bandwidth_levels == (10e6, 20e6, 30e6, 40e6, 50e6)
        assert g.compute_levels == (31e9, 62e9, 93e9, 124e9, 155e9)

    def test_single_level_is_full_pool(self, pools):
        g = make_action_grid(pools, 1, 1)
        assert g.bandwidth_levels == (50e6,)
        assert g.compute_levels == (155e9,)

    def test_top_level_equals_pool(self, pools, grid):
        assert grid.bandwidth_levels[-1] == pools.total_bandwidth
        assert grid.compute_levels[-1] == pools.total_compute

    def test_zero_levels_rejected(self, pools):
        with pytest.raises(ValueError):
            make_action_grid(pools, 0, 4)
        with pytest.raises(ValueError):
            make_action_grid(pools, 4, 0)

    def test_levels_must_increase(self):
        with pytest.raises(ValueError):
            ActionGrid((2.0, 1.0), (1.0,))
        with pytest.raises(ValueError):
            ActionGrid((1.0, 1.0), (1.0,))
        with pytest.raises(ValueError):
            ActionGrid((), (1.0,))
        with pytest.raises(ValueError):
            ActionGrid((0.0, 1.0), (1.0,))

    def test_action_count_includes_null(self, grid, small_grid):
        assert grid.n_actions == 65
        assert small_grid.n_actions == 5

    def test_actions_bandwidth_major(self, small_grid):
        acts = small_grid.actions()
        assert [(a.bandwidth, a.compute) for a in acts] == [
            (25e6, 77.5e9), (25e6, 155e9), (50e6, 77.5e9), (50e6, 155e9)]


class TestAction:
    def test_null(self):
        assert NULL_ACTION.is_null
        assert Action(0.0, 0.0).is_null
        assert not Action(1.0, 1.0).is_null

    def test_mixed_zero_rejected(self):
        # a half-null pair is not a meaningful allocation
        with pytest.raises(ValueError):
            Action(10e6, 0.0)
        with pytest.raises(ValueError):
            Action(0.0, 1e9)

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            Action(-1.0, 1.0)

    def test_validate_null_always_member(self, grid):
        assert validate_action(NULL_ACTION, grid)

    def test_validate_grid_membership(self, pools):
        g = make_action_grid(pools, 5, 5)
        assert validate_action(Action(10e6, 31e9), g)
        assert not validate_action(Action(11e6, 31e9), g)
        assert not validate_action(Action(10e6, 30e9), g)

    def test_validate_tolerates_recomputed_levels(self, pools):
        g = make_action_grid(pools, 7, 7)
        b = pools.total_bandwidth * 3 / 7
        f = pools.total_compute * 5 / 7
        assert validate_action(Action(b, f), g)


class TestResourcePools:
    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            ResourcePools(total_bandwidth=0.0, total_compute=1.0)
        with pytest.raises(ValueError):
            ResourcePools(total_bandwidth=1.0, total_compute=1.0, slot_duration=0.0)
        with pytest.raises(ValueError):
            ResourcePools(total_bandwidth=1.0, total_compute=1.0, stability_eps=0.0)


class TestUserProfile:
    def test_defaults_valid(self):
        u = UserProfile(index=0)
        assert u.weight == 1.0 and u.budget_cap == 1.0

    @pytest.mark.parametrize("field,value", [
        ("index", -1),
        ("weight", -0.1),
        ("risk_sensitivity", 0.0),
        ("budget_cap", 0.0),
        ("recovery_rate", -0.01),
        ("activity_prob", 1.5),
        ("risk_weight", -1.0),
    ])
    def test_invalid_fields_rejected(self, field, value):
        with pytest.raises(ValueError):
            UserProfile(**{"index": 0, field: value})


class TestTaskSpec:
    def test_positive_fields_required(self):
        with pytest.raises(ValueError):
            TaskSpec(owner=0, data_bits=0.0, workload_cycles=1.0, deadline=1.0)
        with pytest.raises(ValueError):
            TaskSpec(owner=0, data_bits=1.0, workload_cycles=-1.0, deadline=1.0)
        with pytest.raises(ValueError):
            TaskSpec(owner=0, data_bits=1.0, workload_cycles=1.0, deadline=0.0)


class TestSlotState:
    def _state(self, activity, tasks):
        n = len(activity)
        return SlotState(
            slot=1,
            activity=np.asarray(activity, dtype=np.int8),
            tasks=tasks,
            observed_gain=np.full(n, 1e-10),
            observed_backlog=0.0,
            predicted_gain=np.full(n, 1e-10),
            predicted_backlog=0.0,
            budgets=np.ones(n),
        )

    def test_tasks_exactly_for_actives(self):
        st = self._state([1, 0, 1], {0: build_task(0), 2: build_task(2)})
        assert list(st.active_indices) == [0, 2]

    def test_missing_task_rejected(self):
        with pytest.raises(ValueError, match="tasks must exist exactly"):
            self._state([1, 0, 1], {0: build_task(0)})

    def test_task_for_inactive_rejected(self):
        with pytest.raises(ValueError, match="tasks must exist exactly"):
            self._state([1, 0, 0], {0: build_task(0), 1: build_task(1)})

    def test_negative_backlog_rejected(self):
        with pytest.raises(ValueError):
            SlotState(
                slot=1, activity=np.array([0]), tasks={},
                observed_gain=np.ones(1), observed_backlog=-1.0,
                predicted_gain=np.ones(1), predicted_backlog=0.0,
                budgets=np.ones(1))

    def test_array_length_mismatch_rejected(self):
        with pytest.raises(ValueError, match="share one length"):
            SlotState(
                slot=1, activity=np.array([0, 0]), tasks={},
                observed_gain=np.ones(1), observed_backlog=0.0,
                predicted_gain=np.ones(2), predicted_backlog=0.0,
                budgets=np.ones(2))
