"""Delay model, deadline-violation risk surrogate, and risk budgets.

Predicted and realized quantities share these kernels: the caller picks
which channel/backlog states to evaluate at. Delays compose as
transmission + queueing + computation; the queue term couples users
through the total allocated compute.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Action, ResourcePools, TaskSpec, FEASIBILITY_RTOL

__all__ = [
    "DelayBreakdown",
    "RiskAssessment",
    "tx_delay",
    "queue_delay",
    "comp_delay",
    "e2e_delay",
    "risk_surrogate",
    "timely_indicator",
    "assess",
    "update_budget",
    "long_term_objective",
]


@dataclass(frozen=True)
class DelayBreakdown:
    """End-to-end delay and its three components, seconds.

    A null action yields +inf in every field.
    """

    tx: float
    queue: float
    comp: float
    total: float


@dataclass(frozen=True)
class RiskAssessment:
    """Risk view of one task under one action: delay, margin, surrogate."""

    user: int
    delay: float
    margin: float
    risk: float
    timely: int


def tx_delay(data_bits: float, bandwidth: float, sinr: float) -> float:
    """Upload time L / (b * log2(1 + SINR)); +inf at zero rate."""
    if bandwidth <= 0:
        raise ValueError(f"bandwidth must be positive, got {bandwidth}")
    if sinr < 0:
        raise ValueError(f"sinr must be non-negative, got {sinr}")
    rate = bandwidth * np.log2(1.0 + sinr)
    if rate == 0.0:
        return float("inf")
    return data_bits / rate


def queue_delay(backlog: float, allocated_compute: float, pools: ResourcePools) -> float:
    """Background drain time Q / (F_tot - sum_f + eps_f).

    Raises when the allocation exceeds capacity beyond float slack; the
    feasibility layer must reject such profiles first. Residual capacity
    is clamped at zero before adding eps_f so ulp-level overshoot from
    grid-level sums cannot flip the sign of the denominator.
    """
    if backlog < 0:
        raise ValueError(f"backlog must be non-negative, got {backlog}")
    if allocated_compute > pools.total_compute * (1.0 + FEASIBILITY_RTOL):
        raise ValueError(
            f"allocated compute {allocated_compute} exceeds capacity {pools.total_compute}"
        )
    residual = max(pools.total_compute - allocated_compute, 0.0)
    return backlog / (residual + pools.stability_eps)


def comp_delay(workload_cycles: float, compute: float) -> float:
    """Execution time C / f."""
    if compute <= 0:
        raise ValueError(f"compute must be positive, got {compute}")
    return workload_cycles / compute


def e2e_delay(
    task: TaskSpec,
    action: Action,
    sinr: float,
    backlog: float,
    sum_compute: float,
    pools: ResourcePools,
) -> DelayBreakdown:
    """Compose the three delay terms for one task under one action.

    sum_compute is the profile-wide allocated compute including the
    user's own share; the queue term depends on it, which is the only
    cross-user coupling in the delay model.
    """
    if action.is_null:
        inf = float("inf")
        return DelayBreakdown(inf, inf, inf, inf)
    d_tx = tx_delay(task.data_bits, action.bandwidth, sinr)
    d_q = queue_delay(backlog, sum_compute, pools)
    d_c = comp_delay(task.workload_cycles, action.compute)
    return DelayBreakdown(d_tx, d_q, d_c, d_tx + d_q + d_c)


def risk_surrogate(margin, kappa):
    """Sigmoid risk 1 / (1 + exp(kappa * margin)).

    margin is deadline minus delay: large positive margin -> risk near 0,
    large negative margin (or -inf from a rejected task) -> risk near 1,
    zero margin -> exactly 0.5. Both exp branches are evaluated on
    exp(-|z|) so neither can overflow. Accepts scalars or arrays.
    """
    z = np.asarray(np.multiply(kappa, margin), dtype=float)
    with np.errstate(invalid="ignore"):
        e = np.exp(-np.abs(z))  # 0 * inf margins produce NaN, propagated as-is
        out = np.where(z >= 0, e / (1.0 + e), 1.0 / (1.0 + e))
    if out.ndim == 0:
        return float(out)
    return out


def timely_indicator(delay: float, deadline: float) -> int:
    """1 iff the delay is finite and does not exceed the deadline (boundary counts)."""
    return int(np.isfinite(delay) and delay <= deadline)


def assess(
    task: TaskSpec,
    action: Action,
    sinr: float,
    backlog: float,
    sum_compute: float,
    pools: ResourcePools,
    kappa: float,
) -> RiskAssessment:
    """Delay, margin, risk and timeliness for one (task, action) pair."""
    d = e2e_delay(task, action, sinr, backlog, sum_compute, pools)
    margin = task.deadline - d.total
    return RiskAssessment(
        user=task.owner,
        delay=d.total,
        margin=margin,
        risk=risk_surrogate(margin, kappa),
        timely=timely_indicator(d.total, task.deadline),
    )


def update_budget(
    budget: float,
    active: int,
    risk: float,
    recovery_rate: float,
    cap: float,
) -> float:
    """Next-slot budget: min(cap, max(0, B - chi*risk + rho)).

    The consumed risk is the surrogate of the profile the scheduler
    chose, evaluated at its decision states; inactive users only
    recover.
    """
    if not 0.0 <= risk <= 1.0:
        raise ValueError(f"risk must lie in [0, 1], got {risk}")
    if budget < 0 or cap <= 0:
        raise ValueError(f"budget {budget} and cap {cap} must be non-negative/positive")
    chi = 1.0 if active else 0.0
    return min(cap, max(0.0, budget - chi * risk + recovery_rate))


def long_term_objective(activity: np.ndarray, timely: np.ndarray, weights: np.ndarray) -> float:
    """Weighted count of timely completions: sum_t sum_i w_i chi_i psi_i."""
    activity = np.asarray(activity, dtype=float)
    timely = np.asarray(timely, dtype=float)
    if activity.shape != timely.shape:
        raise ValueError("activity and timely must share one shape")
    return float(np.sum(activity * timely * np.asarray(weights, dtype=float)[None, :]))
