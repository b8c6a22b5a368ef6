"""Core value types shared by every other module.

Internal units are fixed: bits for data, Hz for bandwidth, cycles and
cycles/s for compute, seconds for time, linear power ratios for channel
gain and SINR.  Human-facing configuration uses MB / MHz / GHz and is
converted exactly once at ingestion (see config.py).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

__all__ = [
    "MB_TO_BITS",
    "MHZ_TO_HZ",
    "GHZ_TO_HZ",
    "Action",
    "ActionGrid",
    "NULL_ACTION",
    "ResourcePools",
    "TaskSpec",
    "UserProfile",
    "SlotState",
    "make_action_grid",
    "validate_action",
]

MB_TO_BITS = 8 * 2**20  # mebibytes to bits
MHZ_TO_HZ = 1e6
GHZ_TO_HZ = 1e9  # also GHz -> cycles/s and Gcycles -> cycles

# Relative slack on pool-cap comparisons. Grid level sums accumulate a few
# ulps of error for non-binary level counts; 1e-9 absorbs that while still
# rejecting the smallest physically meaningful overshoot (1 Hz at 50 MHz
# is 2e-8 relative).
FEASIBILITY_RTOL = 1e-9


@dataclass(frozen=True)
class ResourcePools:
    """Shared edge resources and slot timing.

    total_bandwidth: B_tot in Hz.
    total_compute: F_tot in cycles/s.
    slot_duration: tau in seconds.
    stability_eps: eps_f added to residual compute in the queue-delay
        denominator so a fully allocated pool yields a large finite delay.
    budget_eps: eps added to remaining budget in the potential's risk
        regularization denominator.
    """

    total_bandwidth: float
    total_compute: float
    slot_duration: float = 1.0
    stability_eps: float = 1e-6
    budget_eps: float = 1e-6

    def __post_init__(self) -> None:
        if not (self.total_bandwidth > 0 and np.isfinite(self.total_bandwidth)):
            raise ValueError(f"total_bandwidth must be positive, got {self.total_bandwidth}")
        if not (self.total_compute > 0 and np.isfinite(self.total_compute)):
            raise ValueError(f"total_compute must be positive, got {self.total_compute}")
        if not self.slot_duration > 0:
            raise ValueError(f"slot_duration must be positive, got {self.slot_duration}")
        if not self.stability_eps > 0:
            raise ValueError(f"stability_eps must be positive, got {self.stability_eps}")
        if not self.budget_eps > 0:
            raise ValueError(f"budget_eps must be positive, got {self.budget_eps}")


@dataclass(frozen=True)
class UserProfile:
    """Static per-user parameters.

    index: position in the user list, stable across the run.
    weight: w_i, timely-service reward weight.
    risk_sensitivity: kappa_i in 1/s, steepness of the risk surrogate.
    budget_cap: B_i^max, also the initial budget.
    recovery_rate: rho_i, per-slot budget replenishment.
    activity_prob: p_i, Bernoulli activation probability.
    bandwidth_cost: alpha_i, potential cost per Hz allocated.
    compute_cost: beta_i, potential cost per cycle/s allocated.
    risk_weight: gamma_i, weight of the budget-normalized risk term.
    """

    index: int
    weight: float = 1.0
    risk_sensitivity: float = 10.0
    budget_cap: float = 1.0
    recovery_rate: float = 0.05
    activity_prob: float = 0.5
    bandwidth_cost: float = 0.0
    compute_cost: float = 0.0
    risk_weight: float = 0.5

    def __post_init__(self) -> None:
        if self.index < 0:
            raise ValueError(f"index must be non-negative, got {self.index}")
        if self.weight < 0:
            raise ValueError(f"weight must be non-negative, got {self.weight}")
        if self.risk_sensitivity <= 0:
            raise ValueError(f"risk_sensitivity must be positive, got {self.risk_sensitivity}")
        if self.budget_cap <= 0:
            raise ValueError(f"budget_cap must be positive, got {self.budget_cap}")
        if self.recovery_rate < 0:
            raise ValueError(f"recovery_rate must be non-negative, got {self.recovery_rate}")
        if not 0.0 <= self.activity_prob <= 1.0:
            raise ValueError(f"activity_prob must lie in [0, 1], got {self.activity_prob}")
        if self.bandwidth_cost < 0 or self.compute_cost < 0 or self.risk_weight < 0:
            raise ValueError("cost coefficients must be non-negative")


@dataclass(frozen=True)
class TaskSpec:
    """One inference task: data to upload, cycles to run, deadline to meet."""

    owner: int
    data_bits: float
    workload_cycles: float
    deadline: float
    weight: float = 1.0

    def __post_init__(self) -> None:
        if self.owner < 0:
            raise ValueError(f"owner must be non-negative, got {self.owner}")
        if not self.data_bits > 0:
            raise ValueError(f"data_bits must be positive, got {self.data_bits}")
        if not self.workload_cycles > 0:
            raise ValueError(f"workload_cycles must be positive, got {self.workload_cycles}")
        if not self.deadline > 0:
            raise ValueError(f"deadline must be positive, got {self.deadline}")


@dataclass(frozen=True)
class Action:
    """One user's allocation: (bandwidth Hz, compute cycles/s).

    (0, 0) is the null action (task rejected this slot). Mixed
    zero/positive pairs are invalid: a task cannot run without uplink
    bandwidth nor transmit without compute.
    """

    bandwidth: float = 0.0
    compute: float = 0.0

    def __post_init__(self) -> None:
        b, f = self.bandwidth, self.compute
        if b < 0 or f < 0:
            raise ValueError(f"allocations must be non-negative, got ({b}, {f})")
        if (b == 0) != (f == 0):
            raise ValueError(f"bandwidth and compute must be both zero or both positive, got ({b}, {f})")

    @property
    def is_null(self) -> bool:
        return self.bandwidth == 0.0


NULL_ACTION = Action(0.0, 0.0)


@dataclass(frozen=True)
class ActionGrid:
    """Discrete allocation levels shared by all users.

    Levels are strictly increasing and positive; the null action is
    implicit and not a grid level.
    """

    bandwidth_levels: tuple[float, ...]
    compute_levels: tuple[float, ...]

    def __post_init__(self) -> None:
        for name, levels in (("bandwidth_levels", self.bandwidth_levels),
                             ("compute_levels", self.compute_levels)):
            if len(levels) == 0:
                raise ValueError(f"{name} must be non-empty")
            if any(v <= 0 for v in levels):
                raise ValueError(f"{name} must be positive, got {levels}")
            if any(b <= a for a, b in zip(levels, levels[1:])):
                raise ValueError(f"{name} must be strictly increasing, got {levels}")

    @property
    def n_actions(self) -> int:
        """Size of one user's action set including null."""
        return len(self.bandwidth_levels) * len(self.compute_levels) + 1

    def actions(self) -> list[Action]:
        """All non-null actions, bandwidth-major order."""
        return [Action(b, f) for b in self.bandwidth_levels for f in self.compute_levels]


def make_action_grid(pools: ResourcePools, n_bandwidth_levels: int, n_compute_levels: int) -> ActionGrid:
    """Uniform grids {B_tot*k/K} and {F_tot*k/K}, k = 1..K.

    The top level of each grid equals the full pool.
    """
    if n_bandwidth_levels < 1 or n_compute_levels < 1:
        raise ValueError("level counts must be at least 1")
    bw = tuple(pools.total_bandwidth * k / n_bandwidth_levels for k in range(1, n_bandwidth_levels + 1))
    cp = tuple(pools.total_compute * k / n_compute_levels for k in range(1, n_compute_levels + 1))
    return ActionGrid(bw, cp)


def validate_action(action: Action, grid: ActionGrid) -> bool:
    """True iff the action is null or both components sit on the grid.

    Membership allows 1e-12 relative tolerance so values recomputed from
    level fractions still validate.
    """
    if action.is_null:
        return True
    bw_ok = any(np.isclose(action.bandwidth, v, rtol=1e-12, atol=0.0) for v in grid.bandwidth_levels)
    cp_ok = any(np.isclose(action.compute, v, rtol=1e-12, atol=0.0) for v in grid.compute_levels)
    return bw_ok and cp_ok


@dataclass
class SlotState:
    """Everything the harness knows at decision time for one slot.

    activity: 0/1 per user; tasks holds a TaskSpec exactly for the
    active users. observed_* are the true slot-t states (used to realize
    delays after the decision); predicted_* are the active predictor's
    one-step forecasts from history ending at t-1 (used by predicting
    policies to schedule).
    """

    slot: int
    activity: np.ndarray
    tasks: Mapping[int, TaskSpec]
    observed_gain: np.ndarray
    observed_backlog: float
    predicted_gain: np.ndarray
    predicted_backlog: float
    budgets: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        n = len(self.activity)
        if not (len(self.observed_gain) == len(self.predicted_gain) == len(self.budgets) == n):
            raise ValueError("per-user arrays must share one length")
        active = {int(i) for i in np.flatnonzero(self.activity)}
        if active != set(self.tasks.keys()):
            raise ValueError(
                f"slot {self.slot}: tasks must exist exactly for active users "
                f"(active={sorted(active)}, tasks={sorted(self.tasks)})"
            )
        if self.observed_backlog < 0 or self.predicted_backlog < 0:
            raise ValueError(f"slot {self.slot}: backlog must be non-negative")

    @property
    def active_indices(self) -> np.ndarray:
        return np.flatnonzero(self.activity)
