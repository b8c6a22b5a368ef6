"""Shared fixtures: small pools, grids, users, and slot-state builders."""

import numpy as np
import pytest

# one line per headline criterion, echoed after the run so verdicts
# survive pytest's stdout capture
ACCEPTANCE_REPORT: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_REPORT:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_REPORT:
            terminalreporter.write_line(line)

from aegis import (
    ActionGrid,
    RadioParams,
    ResourcePools,
    RunConfig,
    TaskSpec,
    UserProfile,
    make_action_grid,
)


@pytest.fixture
def pools():
    return ResourcePools(total_bandwidth=50e6, total_compute=155e9)


@pytest.fixture
def grid(pools):
    return make_action_grid(pools, 8, 8)


@pytest.fixture
def small_grid(pools):
    return make_action_grid(pools, 2, 2)


@pytest.fixture
def radio():
    return RadioParams()


def build_users(n, **overrides):
    base = dict(weight=1.0, risk_sensitivity=10.0, budget_cap=1.0,
                recovery_rate=0.05, activity_prob=0.5,
                bandwidth_cost=0.1 / 50e6, compute_cost=0.1 / 155e9,
                risk_weight=0.5)
    base.update(overrides)
    return [UserProfile(index=i, **base) for i in range(n)]


@pytest.fixture
def users3():
    return build_users(3)


def build_task(owner, data_mb=0.5, work_gc=0.4, deadline=0.5, weight=1.0):
    return TaskSpec(owner=owner, data_bits=data_mb * 8 * 2**20,
                    workload_cycles=work_gc * 1e9, deadline=deadline,
                    weight=weight)


def make_inputs(n=3, *, active=None, budgets=None, gains_db=None, backlog=1e9,
                levels=(8, 8), enforce_budget=True, gamma_scale=1.0, seed=0,
                users=None, tasks=None):
    """SlotInputs over the default pools with randomized or preset tasks."""
    from aegis import SlotState, build_inputs
    from aegis.env import db_to_linear

    pools = ResourcePools(total_bandwidth=50e6, total_compute=155e9)
    grid = make_action_grid(pools, *levels)
    rng = np.random.default_rng(seed)
    users = users if users is not None else build_users(n)
    active = (np.ones(n, dtype=int) if active is None
              else np.asarray(active, dtype=int))
    if tasks is None:
        tasks = {
            int(u): TaskSpec(
                owner=int(u),
                data_bits=rng.uniform(0.12, 0.90) * 8 * 2**20,
                workload_cycles=rng.uniform(0.08, 0.95) * 1e9,
                deadline=rng.uniform(0.28, 0.82),
                weight=1.0,
            )
            for u in np.flatnonzero(active)
        }
    if gains_db is None:
        gains_db = rng.uniform(-100, -90, size=n)
    gains = db_to_linear(np.asarray(gains_db, dtype=float))
    budgets = np.ones(n) if budgets is None else np.asarray(budgets, dtype=float)
    state = SlotState(
        slot=0, activity=active, tasks=tasks,
        observed_gain=gains, observed_backlog=backlog,
        predicted_gain=gains, predicted_backlog=backlog, budgets=budgets,
    )
    return build_inputs(state, users, pools, grid, RadioParams(), gains=gains,
                        backlog=backlog, enforce_budget=enforce_budget,
                        gamma_scale=gamma_scale)


@pytest.fixture
def tiny_cfg():
    """Config small enough that episode-level tests run in well under a second."""
    return RunConfig({
        "horizon": 12,
        "users": {"count": 4},
        "experiment": {"episodes": 2, "sweep_users": [3, 4]},
    })
