"""Property suites for the scheduler, shared by the CLI and the tests.

Three suites: the exact-potential identity on random deviation
fixtures, convergence-and-verification of the improvement dynamics at a
zero threshold over full episodes, and equivalence against a
brute-force maximizer on exhaustively enumerable instances.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .baselines import PolicyTag
from .config import RunConfig
from .core import NULL_ACTION, ResourcePools, make_action_grid
from .env import RadioParams, compute_sinr, db_to_linear
from .game import (
    SlotInputs,
    brute_force_max_potential,
    marginal_utility,
    potential,
    run_slot_game,
    verify_equilibrium,
)
from .harness import run_episode

__all__ = [
    "CheckReport",
    "check_fip_convergence",
    "check_oracle_equivalence",
    "check_potential_identity",
    "random_inputs",
    "random_profile",
    "run_all_checks",
]


@dataclass
class CheckReport:
    name: str
    passed: bool
    details: dict = field(default_factory=dict)

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        parts = ", ".join(f"{k}={v}" for k, v in self.details.items())
        return f"[{status}] {self.name}: {parts}"


def random_inputs(
    rng: np.random.Generator,
    n_users: int | None = None,
    grid_shape: tuple[int, int] = (3, 3),
    all_active: bool = False,
    enforce_budget: bool = True,
) -> SlotInputs:
    """A random slot instance at physically plausible scales."""
    n = int(n_users if n_users is not None else rng.integers(1, 6))
    pools = ResourcePools(total_bandwidth=50e6, total_compute=155e9)
    grid = make_action_grid(pools, *grid_shape)
    radio = RadioParams()
    active = (
        np.ones(n, dtype=bool) if all_active else rng.random(n) < 0.7
    )
    gains = db_to_linear(rng.uniform(-105.0, -85.0, size=n))
    data = np.where(active, rng.uniform(0.12, 0.90, size=n) * 8 * 2**20, np.nan)
    work = np.where(active, rng.uniform(0.08, 0.95, size=n) * 1e9, np.nan)
    deadline = np.where(active, rng.uniform(0.28, 0.82, size=n), np.nan)
    return SlotInputs(
        active=active,
        data_bits=data,
        workload=work,
        deadline=deadline,
        weight=np.ones(n),
        kappa=np.full(n, 10.0),
        gamma=np.full(n, 0.5),
        alpha=np.full(n, 0.1 / pools.total_bandwidth),
        beta=np.full(n, 0.1 / pools.total_compute),
        budgets=rng.uniform(0.3, 1.0, size=n),
        sinr=compute_sinr(gains, radio),
        backlog=float(rng.uniform(0.0, 0.5) * pools.total_compute),
        pools=pools,
        grid=grid,
        enforce_budget=enforce_budget,
    )


def random_profile(inputs: SlotInputs, rng: np.random.Generator):
    """Random pool-respecting profile (budgets may still be violated).

    Users are visited in random order; each draws uniformly from null
    plus the grid actions that fit the remaining pools, so totals never
    exceed the caps the delay model is defined on.
    """
    actions = [NULL_ACTION] * inputs.n_users
    sb = sf = 0.0
    order = inputs.active_indices.copy()
    rng.shuffle(order)
    pools = inputs.pools
    for i in order:
        fits = [
            a
            for a in inputs.grid.actions()
            if sb + a.bandwidth <= pools.total_bandwidth
            and sf + a.compute <= pools.total_compute
        ]
        pick = [NULL_ACTION] + fits
        a = pick[int(rng.integers(len(pick)))]
        actions[int(i)] = a
        sb += a.bandwidth
        sf += a.compute
    return tuple(actions)


def _random_deviation(
    actions, user: int, inputs: SlotInputs, rng: np.random.Generator
):
    """A random pool-respecting unilateral replacement for one user."""
    b = sum(a.bandwidth for a in actions) - actions[user].bandwidth
    f = sum(a.compute for a in actions) - actions[user].compute
    pools = inputs.pools
    fits = [
        a
        for a in inputs.grid.actions()
        if b + a.bandwidth <= pools.total_bandwidth
        and f + a.compute <= pools.total_compute
    ]
    pick = [NULL_ACTION] + fits
    return pick[int(rng.integers(len(pick)))]


def check_potential_identity(
    n_fixtures: int = 10_000, seed: int = 0, tol: float = 1e-12
) -> CheckReport:
    """|delta U_i - delta Phi| on random unilateral deviations.

    The utility is the potential minus the user's own-null baseline, so
    the two deltas agree up to the rounding of independently evaluated
    differences; the tolerance is absolute.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    checked = 0
    while checked < n_fixtures:
        inputs = random_inputs(rng)
        act = inputs.active_indices
        if len(act) == 0:
            continue
        old = random_profile(inputs, rng)
        i = int(act[rng.integers(len(act))])
        new = list(old)
        new[i] = _random_deviation(old, i, inputs, rng)
        new = tuple(new)
        du = marginal_utility(new, i, inputs) - marginal_utility(old, i, inputs)
        dphi = potential(new, inputs) - potential(old, inputs)
        worst = max(worst, abs(du - dphi))
        checked += 1
    return CheckReport(
        name="exact-potential identity",
        passed=worst < tol,
        details={"fixtures": checked, "worst_abs_gap": worst, "tol": tol},
    )


def check_fip_convergence(
    cfg: RunConfig | None = None,
    n_users: int = 20,
    episodes: int = 20,
    verify_each_slot: bool = True,
) -> CheckReport:
    """Zero-threshold improvement dynamics over full episodes.

    Every slot must converge before the iteration cap, and (optionally)
    every converged profile must re-verify as an equilibrium under the
    same search.
    """
    if cfg is None:
        cfg = RunConfig({"game": {"improvement_threshold": 0.0}})
    elif cfg.game.improvement_threshold != 0.0:
        cfg = RunConfig(
            {**cfg.raw, "game": {**cfg.raw["game"], "improvement_threshold": 0.0}}
        )
    slots = 0
    converged = 0
    max_iters = 0
    for ep in range(episodes):
        log = run_episode(
            cfg,
            PolicyTag.AEGIS.value,
            n_users=n_users,
            episode=ep,
            verify_each_slot=verify_each_slot,
        )
        slots += log.horizon
        converged += int(np.sum(log.converged))
        max_iters = max(max_iters, int(np.max(log.iterations)))
    return CheckReport(
        name="finite improvement convergence",
        passed=converged == slots,
        details={
            "slots": slots,
            "converged": converged,
            "max_iterations": max_iters,
            "verified_each_slot": verify_each_slot,
        },
    )


def check_oracle_equivalence(
    instances: int = 1000,
    seed: int = 2,
    shortfall_frac: float = 0.05,
    eq_eps: float = 1e-12,
    min_pass_rate: float = 0.9,
) -> CheckReport:
    """Brute-force comparison on exhaustively enumerable instances.

    Up to three active users on a 2x2 grid gives at most 5^3 joint
    profiles.  The global maximizer must verify as an equilibrium in
    every instance; the dynamics' terminal potential must come within
    a 5% |Phi*| shortfall in at least min_pass_rate of instances
    (improvement paths may stop at local maxima).
    """
    rng = np.random.default_rng(seed)
    near_optimal = 0
    brute_verified = 0
    worst_shortfall = 0.0
    for _ in range(instances):
        inputs = random_inputs(
            rng,
            n_users=int(rng.integers(1, 4)),
            grid_shape=(2, 2),
            all_active=True,
        )
        best_actions, best_phi = brute_force_max_potential(inputs)
        if verify_equilibrium(best_actions, inputs, eps=eq_eps):
            brute_verified += 1
        res = run_slot_game(inputs)
        shortfall = best_phi - res.profile.potential
        if shortfall <= shortfall_frac * abs(best_phi) + 1e-12:
            near_optimal += 1
        else:
            worst_shortfall = max(worst_shortfall, shortfall)
    rate = near_optimal / instances
    return CheckReport(
        name="brute-force oracle equivalence",
        passed=brute_verified == instances and rate >= min_pass_rate,
        details={
            "instances": instances,
            "brute_max_verified": brute_verified,
            "near_optimal_rate": rate,
            "worst_shortfall": worst_shortfall,
        },
    )


def run_all_checks(fast: bool = False) -> list[CheckReport]:
    """The full suite; fast mode shrinks fixture counts for smoke runs."""
    if fast:
        return [
            check_potential_identity(n_fixtures=500),
            check_fip_convergence(n_users=8, episodes=2),
            check_oracle_equivalence(instances=100),
        ]
    return [
        check_potential_identity(),
        check_fip_convergence(),
        check_oracle_equivalence(),
    ]
