"""Scheduling policies: the potential-game scheduler and its comparators.

Seven tags share one decision interface so episode metrics isolate the
policy difference.  The game-based policies differ only in their
decision states (forecasts vs last observations) and in whether the
risk-budget constraint and regularizer are active; the priority
baselines rank active users from observed states and allocate greedily;
EqualShare splits the pools evenly.  Baselines are budget-unaware: they
satisfy pool and activity constraints but never check budgets.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import ClassVar, Sequence

import numpy as np

from .core import Action, ActionGrid, NULL_ACTION, ResourcePools, SlotState, UserProfile
from .env import RadioParams
from .game import GameConfig, SlotInputs, build_inputs, run_slot_game
from .risk import comp_delay, queue_delay, tx_delay

__all__ = [
    "PolicyTag",
    "Policy",
    "SlotContext",
    "SlotDecision",
    "equal_share_allocate",
    "greedy_priority_allocate",
    "make_policy",
    "rank_bclf",
    "rank_deadline_first",
    "rank_slo_edge",
]


class PolicyTag(str, Enum):
    AEGIS = "AEGIS"
    AEGIS_NO_BUDGET = "AEGISNoBudget"
    AEGIS_NO_PRED = "AEGISNoPred"
    SLO_EDGE = "SLOEdge"
    DEADLINE_FIRST = "DeadlineFirst"
    BCLF = "BCLF"
    EQUAL_SHARE = "EqualShare"


@dataclass(frozen=True)
class SlotContext:
    """Per-slot decision context assembled by the episode loop."""

    users: Sequence[UserProfile]
    state: SlotState
    pools: ResourcePools
    grid: ActionGrid
    radio: RadioParams
    game_cfg: GameConfig


@dataclass(frozen=True)
class SlotDecision:
    """A policy's chosen profile plus the inputs it was scored against.

    inputs carry the policy's decision states, so downstream consumers
    can recover decision-time risk for budgets and the AVR metric.
    iterations is 0 for policies without an improvement loop.
    """

    actions: tuple[Action, ...]
    inputs: SlotInputs
    iterations: int = 0
    converged: bool = True
    phi_trace: np.ndarray | None = None
    improving_sizes: tuple[int, ...] = ()


def rank_slo_edge(inputs: SlotInputs) -> np.ndarray:
    """Active users by ascending delay margin, ties by index.

    The margin reference is the full-grid max action evaluated in
    isolation (own transmission and computing at the full pools, queue
    term at the current backlog); smaller margin means more urgent.
    """
    act = inputs.active_indices
    if len(act) == 0:
        return act
    pools = inputs.pools
    qd = queue_delay(inputs.backlog, pools.total_compute, pools)
    margins = np.empty(len(act))
    for j, i in enumerate(act):
        d = (
            tx_delay(inputs.data_bits[i], pools.total_bandwidth, inputs.sinr[i])
            + qd
            + comp_delay(inputs.workload[i], pools.total_compute)
        )
        margins[j] = inputs.deadline[i] - d
    return act[np.lexsort((act, margins))]


def rank_deadline_first(inputs: SlotInputs) -> np.ndarray:
    """Active users by ascending deadline, ties by index."""
    act = inputs.active_indices
    if len(act) == 0:
        return act
    return act[np.lexsort((act, inputs.deadline[act]))]


def rank_bclf(inputs: SlotInputs) -> np.ndarray:
    """Active users by descending observed channel quality, ties by index.

    SINR is the observed gain times a user-independent positive factor,
    so sorting on it reproduces the gain order.
    """
    act = inputs.active_indices
    if len(act) == 0:
        return act
    return act[np.lexsort((act, -inputs.sinr[act]))]


def _grid_levels_small_first(grid: ActionGrid) -> list[tuple[int, int]]:
    pairs = [
        (kb, kf)
        for kb in range(1, len(grid.bandwidth_levels) + 1)
        for kf in range(1, len(grid.compute_levels) + 1)
    ]
    return sorted(pairs, key=lambda p: (p[0] + p[1], p[0], p[1]))


def greedy_priority_allocate(
    order: Sequence[int], inputs: SlotInputs
) -> tuple[Action, ...]:
    """Walk users in priority order, granting each a grid action greedily.

    Each user gets the smallest action (by level sum, then bandwidth
    then compute level) whose delay meets its deadline within the pool
    remainders; failing that, the largest affordable action; failing
    that, null.  The queue term sees the compute committed to earlier
    users in the walk; compute granted later still tightens everyone's
    realized queue delay, which is the usual myopia of this family.
    """
    pools = inputs.pools
    grid = inputs.grid
    small_first = _grid_levels_small_first(grid)
    large_first = sorted(small_first, key=lambda p: (-(p[0] + p[1]), p[0], p[1]))
    btol = pools.total_bandwidth * (1.0 + 1e-9)
    ftol = pools.total_compute * (1.0 + 1e-9)
    actions = [NULL_ACTION] * inputs.n_users
    sb = 0.0
    sf = 0.0
    for i in order:
        if not inputs.active[i]:
            raise ValueError(f"user {i} in priority order is inactive")
        chosen: tuple[int, int] | None = None
        for kb, kf in small_first:
            b = grid.bandwidth_levels[kb - 1]
            f = grid.compute_levels[kf - 1]
            if sb + b > btol or sf + f > ftol:
                continue
            d = (
                tx_delay(inputs.data_bits[i], b, inputs.sinr[i])
                + queue_delay(inputs.backlog, sf + f, pools)
                + comp_delay(inputs.workload[i], f)
            )
            if d <= inputs.deadline[i]:
                chosen = (kb, kf)
                break
        if chosen is None:
            for kb, kf in large_first:
                b = grid.bandwidth_levels[kb - 1]
                f = grid.compute_levels[kf - 1]
                if sb + b <= btol and sf + f <= ftol:
                    chosen = (kb, kf)
                    break
        if chosen is not None:
            kb, kf = chosen
            b = grid.bandwidth_levels[kb - 1]
            f = grid.compute_levels[kf - 1]
            actions[i] = Action(b, f)
            sb += b
            sf += f
    return tuple(actions)


def equal_share_allocate(inputs: SlotInputs) -> tuple[Action, ...]:
    """Give every active user the pools divided by the active count.

    Shares snap down to the nearest grid level (equality included up to
    1e-12 relative); a share below the smallest level becomes null.
    """
    act = inputs.active_indices
    actions = [NULL_ACTION] * inputs.n_users
    if len(act) == 0:
        return tuple(actions)
    grid = inputs.grid
    share_b = inputs.pools.total_bandwidth / len(act)
    share_f = inputs.pools.total_compute / len(act)

    def snap(levels: tuple[float, ...], share: float) -> float | None:
        best = None
        for v in levels:
            if v <= share * (1.0 + 1e-12):
                best = v
        return best

    b = snap(grid.bandwidth_levels, share_b)
    f = snap(grid.compute_levels, share_f)
    if b is None or f is None:
        return tuple(actions)
    for i in act:
        actions[i] = Action(b, f)
    return tuple(actions)


class Policy:
    """One scheduling rule; decide() maps a slot context to a profile.

    predictor_kind tells the episode loop which forecast source to feed
    the slot state: "lstm", "last_obs", or "none" (observed states only).
    """

    tag: ClassVar[PolicyTag]
    predictor_kind: ClassVar[str] = "none"

    def decide(self, ctx: SlotContext) -> SlotDecision:
        raise NotImplementedError


class _GamePolicy(Policy):
    """Shared decide() for the potential-game variants."""

    enforce_budget: ClassVar[bool] = True
    gamma_scale: ClassVar[float] = 1.0

    def decide(self, ctx: SlotContext) -> SlotDecision:
        state = ctx.state
        inputs = build_inputs(
            state,
            ctx.users,
            ctx.pools,
            ctx.grid,
            ctx.radio,
            gains=state.predicted_gain,
            backlog=state.predicted_backlog,
            enforce_budget=self.enforce_budget,
            gamma_scale=self.gamma_scale,
        )
        res = run_slot_game(inputs, ctx.game_cfg)
        return SlotDecision(
            actions=res.profile.actions,
            inputs=inputs,
            iterations=res.iterations,
            converged=res.converged,
            phi_trace=res.phi_trace,
            improving_sizes=tuple(res.improving_sizes),
        )


class AegisPolicy(_GamePolicy):
    tag = PolicyTag.AEGIS
    predictor_kind = "lstm"


class AegisNoBudgetPolicy(_GamePolicy):
    """Ablation: no budget constraint, no risk-budget regularizer."""

    tag = PolicyTag.AEGIS_NO_BUDGET
    predictor_kind = "lstm"
    enforce_budget = False
    gamma_scale = 0.0


class AegisNoPredPolicy(_GamePolicy):
    """Ablation: latest observed states stand in for forecasts."""

    tag = PolicyTag.AEGIS_NO_PRED
    predictor_kind = "last_obs"


class _PriorityPolicy(Policy):
    """Shared decide() for the ranked greedy baselines."""

    def rank(self, inputs: SlotInputs) -> np.ndarray:
        raise NotImplementedError

    def decide(self, ctx: SlotContext) -> SlotDecision:
        state = ctx.state
        inputs = build_inputs(
            state,
            ctx.users,
            ctx.pools,
            ctx.grid,
            ctx.radio,
            gains=state.observed_gain,
            backlog=state.observed_backlog,
            enforce_budget=False,
        )
        actions = greedy_priority_allocate(self.rank(inputs), inputs)
        return SlotDecision(actions=actions, inputs=inputs)


class SloEdgePolicy(_PriorityPolicy):
    tag = PolicyTag.SLO_EDGE

    def rank(self, inputs: SlotInputs) -> np.ndarray:
        return rank_slo_edge(inputs)


class DeadlineFirstPolicy(_PriorityPolicy):
    tag = PolicyTag.DEADLINE_FIRST

    def rank(self, inputs: SlotInputs) -> np.ndarray:
        return rank_deadline_first(inputs)


class BclfPolicy(_PriorityPolicy):
    tag = PolicyTag.BCLF

    def rank(self, inputs: SlotInputs) -> np.ndarray:
        return rank_bclf(inputs)


class EqualSharePolicy(Policy):
    tag = PolicyTag.EQUAL_SHARE

    def decide(self, ctx: SlotContext) -> SlotDecision:
        state = ctx.state
        inputs = build_inputs(
            state,
            ctx.users,
            ctx.pools,
            ctx.grid,
            ctx.radio,
            gains=state.observed_gain,
            backlog=state.observed_backlog,
            enforce_budget=False,
        )
        return SlotDecision(actions=equal_share_allocate(inputs), inputs=inputs)


_POLICY_CLASSES: dict[PolicyTag, type[Policy]] = {
    cls.tag: cls
    for cls in (
        AegisPolicy,
        AegisNoBudgetPolicy,
        AegisNoPredPolicy,
        SloEdgePolicy,
        DeadlineFirstPolicy,
        BclfPolicy,
        EqualSharePolicy,
    )
}


def make_policy(tag: PolicyTag | str) -> Policy:
    """Instantiate the policy for a tag; unknown tags raise ValueError."""
    try:
        resolved = PolicyTag(tag)
    except ValueError:
        known = ", ".join(t.value for t in PolicyTag)
        raise ValueError(f"unknown policy tag {tag!r}; known: {known}") from None
    return _POLICY_CLASSES[resolved]()
