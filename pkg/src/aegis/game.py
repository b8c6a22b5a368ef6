"""Risk-budgeted scheduling game and its asynchronous improvement dynamics.

Each slot the active users play a one-shot game over shared grids. The
aggregate objective is the potential

    Phi(a) = sum_active [ w_i*(1 - r_i) - alpha_i*b_i - beta_i*f_i
                          - gamma_i * r_i / (B_i + eps) ]

with r_i the sigmoid deadline-violation risk of user i's task under the
full profile (the queue term couples users through the total allocated
compute). A user's utility is U_i(a) = Phi(a) - Phi((0,0), a_-i), which
makes every unilateral utility change equal the potential change
identically, so asynchronous strict-improvement steps cannot cycle and
must reach a profile with no improving unilateral deviation.

Two implementations coexist deliberately: plain reference operations
over explicit action tuples (the definitional path used by tests and
the brute-force oracle) and a vectorized engine used by run_slot_game
and verify_equilibrium. The engine measures each user's candidate gains
within one shared evaluation frame so a user's current action always
scores a gain of exactly zero.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import (
    FEASIBILITY_RTOL,
    Action,
    ActionGrid,
    NULL_ACTION,
    ResourcePools,
    SlotState,
    UserProfile,
)
from .env import RadioParams, compute_sinr
from .risk import queue_delay, risk_surrogate, timely_indicator

__all__ = [
    "GameConfig",
    "SlotInputs",
    "JointProfile",
    "GameResult",
    "build_inputs",
    "evaluate_profile",
    "profile_eval",
    "is_feasible_joint",
    "potential",
    "marginal_utility",
    "feasible_unilateral_set",
    "best_response",
    "run_slot_game",
    "verify_equilibrium",
    "brute_force_max_potential",
]


@dataclass(frozen=True)
class GameConfig:
    """Improvement-dynamics knobs.

    improvement_threshold: eps', minimum candidate gain that counts as
        improving.
    max_iterations: K_max hard cap on applied updates per slot.
    selection_rule: which improving user moves each iteration;
        "largest_gain" (ties to the lowest index) or "round_robin".
    """

    improvement_threshold: float = 1e-9
    max_iterations: int = 200
    selection_rule: str = "largest_gain"

    def __post_init__(self) -> None:
        if self.improvement_threshold < 0:
            raise ValueError("improvement_threshold must be non-negative")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if self.selection_rule not in ("largest_gain", "round_robin"):
            raise ValueError(f"unknown selection_rule {self.selection_rule!r}")


@dataclass
class SlotInputs:
    """Everything the slot game needs, frozen at decision time.

    Per-user arrays cover the full user list; task fields hold NaN for
    inactive users. sinr/backlog are the decision states: predicted for
    the predicting scheduler, observed or last-seen for others. gamma
    may be scaled away (budget-ignoring ablation) independently of
    enforce_budget, which controls the admission constraint.
    """

    active: np.ndarray
    data_bits: np.ndarray
    workload: np.ndarray
    deadline: np.ndarray
    weight: np.ndarray
    kappa: np.ndarray
    gamma: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    budgets: np.ndarray
    sinr: np.ndarray
    backlog: float
    pools: ResourcePools
    grid: ActionGrid
    enforce_budget: bool = True

    @property
    def n_users(self) -> int:
        return len(self.active)

    @property
    def active_indices(self) -> np.ndarray:
        return np.flatnonzero(self.active)


def build_inputs(
    state: SlotState,
    users: Sequence[UserProfile],
    pools: ResourcePools,
    grid: ActionGrid,
    radio: RadioParams,
    *,
    gains: np.ndarray,
    backlog: float,
    enforce_budget: bool = True,
    gamma_scale: float = 1.0,
    budgets: np.ndarray | None = None,
) -> SlotInputs:
    """Assemble SlotInputs from a slot state and a choice of channel/backlog states.

    budgets overrides state.budgets (the budget-ignoring ablation pins
    them at cap); gains are linear channel gains, converted to SINR here.
    """
    n = len(users)
    data = np.full(n, np.nan)
    work = np.full(n, np.nan)
    dl = np.full(n, np.nan)
    for u, task in state.tasks.items():
        data[u] = task.data_bits
        work[u] = task.workload_cycles
        dl[u] = task.deadline
    return SlotInputs(
        active=np.asarray(state.activity, dtype=bool),
        data_bits=data,
        workload=work,
        deadline=dl,
        weight=np.array([u.weight for u in users]),
        kappa=np.array([u.risk_sensitivity for u in users]),
        gamma=np.array([u.risk_weight * gamma_scale for u in users]),
        alpha=np.array([u.bandwidth_cost for u in users]),
        beta=np.array([u.compute_cost for u in users]),
        budgets=np.asarray(
            state.budgets if budgets is None else budgets, dtype=float
        ).copy(),
        sinr=compute_sinr(np.asarray(gains, dtype=float), radio),
        backlog=float(backlog),
        pools=pools,
        grid=grid,
        enforce_budget=enforce_budget,
    )


@dataclass(frozen=True)
class JointProfile:
    """A full action profile with its cached evaluation.

    risk/timely are per-user at the inputs' decision states (NaN / 0 for
    inactive users); potential is Phi under the same inputs.
    """

    actions: tuple[Action, ...]
    total_bandwidth: float
    total_compute: float
    delay: np.ndarray
    risk: np.ndarray
    timely: np.ndarray
    potential: float


def _action_arrays(actions: Sequence[Action]) -> tuple[np.ndarray, np.ndarray]:
    b = np.array([a.bandwidth for a in actions], dtype=float)
    f = np.array([a.compute for a in actions], dtype=float)
    return b, f


def profile_eval(actions: Sequence[Action], inputs: SlotInputs):
    """Per-user delay, risk, and predicted-timely arrays for a profile.

    Rejected active users get delay +inf, risk 1, timely 0; inactive
    users get NaN delay and risk. The queue term uses the profile-wide
    compute total, the sole cross-user coupling.
    """
    b, f = _action_arrays(actions)
    n = inputs.n_users
    sum_f = float(np.sum(f))
    qd = queue_delay(inputs.backlog, sum_f, inputs.pools)
    delay = np.full(n, np.nan)
    riskv = np.full(n, np.nan)
    timely = np.zeros(n, dtype=np.int8)
    act = inputs.active
    adm = act & (b > 0)
    rej = act & (b == 0)
    with np.errstate(divide="ignore"):
        se = np.log2(1.0 + inputs.sinr)
        d_adm = (
            inputs.data_bits[adm] / (b[adm] * se[adm])
            + qd
            + inputs.workload[adm] / f[adm]
        )
    delay[adm] = d_adm
    delay[rej] = np.inf
    margin = inputs.deadline[adm] - d_adm
    riskv[adm] = risk_surrogate(margin, inputs.kappa[adm])
    riskv[rej] = 1.0
    timely[adm] = [timely_indicator(d, dl) for d, dl in zip(d_adm, inputs.deadline[adm])]
    return delay, riskv, timely


def is_feasible_joint(actions: Sequence[Action], inputs: SlotInputs) -> bool:
    """Pool caps, inactive-null, and (when enforced) risk-budget admission.

    The budget constraint is checked against the full profile because
    each admitted user's risk depends on the total allocated compute.
    """
    if len(actions) != inputs.n_users:
        raise ValueError(f"profile has {len(actions)} actions for {inputs.n_users} users")
    b, f = _action_arrays(actions)
    act = inputs.active
    if np.any(b[~act] > 0):
        return False
    pools = inputs.pools
    if np.sum(b) > pools.total_bandwidth * (1.0 + FEASIBILITY_RTOL):
        return False
    if np.sum(f) > pools.total_compute * (1.0 + FEASIBILITY_RTOL):
        return False
    if inputs.enforce_budget:
        _, riskv, _ = profile_eval(actions, inputs)
        adm = act & (b > 0)
        if np.any(riskv[adm] > inputs.budgets[adm]):
            return False
    return True


def potential(actions: Sequence[Action], inputs: SlotInputs) -> float:
    """Phi(a): summed over active users in index order; 0 with none active."""
    act = inputs.active
    if not np.any(act):
        return 0.0
    b, f = _action_arrays(actions)
    _, riskv, _ = profile_eval(actions, inputs)
    r = riskv[act]
    terms = (
        inputs.weight[act] * (1.0 - r)
        - inputs.alpha[act] * b[act]
        - inputs.beta[act] * f[act]
        - inputs.gamma[act] * r / (inputs.budgets[act] + inputs.pools.budget_eps)
    )
    return float(np.sum(terms))


def evaluate_profile(actions: Sequence[Action], inputs: SlotInputs) -> JointProfile:
    """Materialize a JointProfile with consistent caches."""
    b, f = _action_arrays(actions)
    delay, riskv, timely = profile_eval(actions, inputs)
    return JointProfile(
        actions=tuple(actions),
        total_bandwidth=float(np.sum(b)),
        total_compute=float(np.sum(f)),
        delay=delay,
        risk=riskv,
        timely=timely,
        potential=potential(actions, inputs),
    )


def _with_action(actions: Sequence[Action], user: int, action: Action) -> tuple[Action, ...]:
    out = list(actions)
    out[user] = action
    return tuple(out)


def marginal_utility(actions: Sequence[Action], user: int, inputs: SlotInputs) -> float:
    """U_i(a) = Phi(a) - Phi((0,0), a_-i); zero when already null."""
    if not inputs.active[user]:
        raise ValueError(f"user {user} is inactive this slot")
    base = _with_action(actions, user, NULL_ACTION)
    return potential(actions, inputs) - potential(base, inputs)


def feasible_unilateral_set(
    actions: Sequence[Action], user: int, inputs: SlotInputs
) -> list[Action]:
    """Actions user may deviate to, holding everyone else fixed.

    Null is always a member; grid candidates must keep the whole profile
    feasible (including everyone's budget admission, since the deviation
    shifts the shared queue term). Order: bandwidth-major grid scan,
    null last.
    """
    if not inputs.active[user]:
        raise ValueError(f"user {user} is inactive this slot")
    out = []
    for cand in inputs.grid.actions():
        if is_feasible_joint(_with_action(actions, user, cand), inputs):
            out.append(cand)
    out.append(NULL_ACTION)
    return out


def best_response(
    actions: Sequence[Action], user: int, inputs: SlotInputs
) -> tuple[Action, float]:
    """Potential-maximizing unilateral deviation and its gain.

    Gain is relative to the current profile; ties prefer the earliest
    candidate in feasible_unilateral_set order (grid first, null last),
    with the current action winning exact ties so a no-op never reports
    a positive gain.
    """
    current_phi = potential(actions, inputs)
    best_action = actions[user]
    best_phi = current_phi
    for cand in feasible_unilateral_set(actions, user, inputs):
        if cand == actions[user]:
            continue
        phi = potential(_with_action(actions, user, cand), inputs)
        if phi > best_phi:
            best_action, best_phi = cand, phi
    return best_action, best_phi - current_phi


@dataclass
class GameResult:
    profile: JointProfile
    iterations: int
    converged: bool
    phi_trace: np.ndarray
    improving_sizes: list[int] = field(default_factory=list)
    action_trace: list[tuple[Action, ...]] = field(default_factory=list)


class _Engine:
    """Vectorized candidate search over active users and grid levels.

    State lives as level indices (0 = null). Candidate potentials are
    evaluated in a shared frame per iteration; the diagonal of the
    compute-total deviation matrix is pinned to the current total so a
    user's own current action always scores exactly its baseline.
    """

    def __init__(self, inputs: SlotInputs):
        self.inputs = inputs
        self.idx = inputs.active_indices
        na = len(self.idx)
        self.na = na
        self.pools = inputs.pools
        grid = inputs.grid
        self.bw_vals = np.concatenate(([0.0], grid.bandwidth_levels))
        self.f_vals = np.concatenate(([0.0], grid.compute_levels))
        self.kb = len(grid.bandwidth_levels)
        self.kf = len(grid.compute_levels)
        if na == 0:
            return
        i = self.idx
        self.L = inputs.data_bits[i]
        self.C = inputs.workload[i]
        self.D = inputs.deadline[i]
        self.w = inputs.weight[i]
        self.kap = inputs.kappa[i]
        self.B = inputs.budgets[i]
        self.alpha = inputs.alpha[i]
        self.beta = inputs.beta[i]
        self.G = self.w + inputs.gamma[i] / (self.B + self.pools.budget_eps)
        with np.errstate(divide="ignore"):
            se = np.log2(1.0 + inputs.sinr[i])
            # candidate static delays: transmission by bandwidth level,
            # computation by compute level (independent of others)
            self.tx_cand = self.L[:, None] / (self.bw_vals[None, 1:] * se[:, None])
            self.comp_cand = self.C[:, None] / self.f_vals[None, 1:]
        self.cost_cand = (
            self.alpha[:, None, None] * self.bw_vals[1:][None, :, None]
            + self.beta[:, None, None] * self.f_vals[1:][None, None, :]
        )
        self.w_sum = float(np.sum(self.w))
        self.btol = self.pools.total_bandwidth * (1.0 + FEASIBILITY_RTOL)
        self.ftol = self.pools.total_compute * (1.0 + FEASIBILITY_RTOL)
        # profile state: level indices, 0 = null
        self.lb = np.zeros(na, dtype=int)
        self.lf = np.zeros(na, dtype=int)

    def set_profile(self, actions: Sequence[Action]) -> None:
        """Adopt an on-grid profile (used by verify_equilibrium)."""
        for row, u in enumerate(self.idx):
            a = actions[u]
            if a.is_null:
                self.lb[row] = self.lf[row] = 0
                continue
            db = np.abs(self.bw_vals[1:] - a.bandwidth)
            df = np.abs(self.f_vals[1:] - a.compute)
            jb, jf = int(np.argmin(db)), int(np.argmin(df))
            if db[jb] > 1e-9 * self.bw_vals[1 + jb] or df[jf] > 1e-9 * self.f_vals[1 + jf]:
                raise ValueError(f"user {u} action {a} is not on the grid")
            self.lb[row] = jb + 1
            self.lf[row] = jf + 1

    def actions(self) -> tuple[Action, ...]:
        out = [NULL_ACTION] * self.inputs.n_users
        for row, u in enumerate(self.idx):
            if self.lb[row] > 0:
                out[u] = Action(self.bw_vals[self.lb[row]], self.f_vals[self.lf[row]])
        return tuple(out)

    def search(self):
        """Per-user best candidate gains under the current profile.

        Returns (gains, cand_lb, cand_lf, phi_now). A user's gain is its
        best candidate's frame value minus its current action's frame
        value, hence exactly 0 when no candidate beats staying put.
        """
        adm = self.lb > 0
        b_val = self.bw_vals[self.lb]
        f_val = self.f_vals[self.lf]
        sb = float(np.sum(b_val))
        sf = float(np.sum(f_val))
        # static (own-action) delay; +inf for rejected users makes their
        # risk exactly 1 through the shared sigmoid kernel
        static = np.where(
            adm,
            self.tx_cand[np.arange(self.na), self.lb - 1]
            + self.comp_cand[np.arange(self.na), self.lf - 1],
            np.inf,
        )
        cost = self.alpha * b_val + self.beta * f_val
        tot_cost = float(np.sum(cost))

        # compute-total deviations: S2[a, c] = sf - f_vals[a] + f_vals[c],
        # diagonal pinned to sf so "stay" reuses the current queue state
        nf = self.kf + 1
        s2 = sf - self.f_vals[:, None] + self.f_vals[None, :]
        np.fill_diagonal(s2, sf)
        qd2 = self.inputs.backlog / (
            np.maximum(self.pools.total_compute - s2, 0.0) + self.pools.stability_eps
        )
        s_ok = s2 <= self.ftol

        # everyone's risk at each deviation total: (nf, nf, na)
        margin = (self.D - static)[None, None, :] - qd2[:, :, None]
        r_all = risk_surrogate(margin, self.kap[None, None, :])
        viol = adm[None, None, :] & (r_all > self.B[None, None, :])
        tot_gr = r_all @ self.G  # sum_j G_j r_j at each (a, c)
        nviol = np.sum(viol, axis=2)

        rows = np.arange(self.na)
        lf = self.lf
        # gather per-user rows: own current f-level selects the frame row
        qd_row = qd2[lf, :]                      # (na, nf)
        tot_gr_row = tot_gr[lf, :]
        r_self_row = r_all[lf, :, rows]          # r_i at each candidate total
        viol_self = viol[lf, :, rows]
        s_ok_row = s_ok[lf, :]
        others_gr = tot_gr_row - self.G[:, None] * r_self_row
        others_viol = nviol[lf, :] - viol_self.astype(np.int64)
        others_ok = others_viol == 0
        base_cost_oth = tot_cost - cost

        # grid candidates (na, kb, kf)
        d_cand = (
            self.tx_cand[:, :, None] + self.comp_cand[:, None, :] + qd_row[:, None, 1:]
        )
        r_own = risk_surrogate(self.D[:, None, None] - d_cand, self.kap[:, None, None])
        phi_grid = (
            self.w_sum
            - others_gr[:, None, 1:]
            - self.G[:, None, None] * r_own
            - (base_cost_oth[:, None, None] + self.cost_cand)
        )
        bw_ok = (sb - b_val)[:, None] + self.bw_vals[None, 1:] <= self.btol
        feas = (
            bw_ok[:, :, None]
            & s_ok_row[:, None, 1:]
            & others_ok[:, None, 1:]
        )
        if self.inputs.enforce_budget:
            feas &= r_own <= self.B[:, None, None]
        # the standing profile is feasible by induction; pin each user's
        # current entry so re-evaluation noise cannot orphan it
        feas[rows[adm], self.lb[adm] - 1, lf[adm] - 1] = True
        phi_grid = np.where(feas, phi_grid, -np.inf)

        # null candidate: always feasible by construction
        phi_null = self.w_sum - others_gr[:, 0] - self.G - base_cost_oth

        flat = np.concatenate((phi_grid.reshape(self.na, -1), phi_null[:, None]), axis=1)
        n_grid = self.kb * self.kf
        # baseline = flat entry of the current action, so a no-op always
        # scores a gain of exactly zero in this frame
        cur_flat = np.where(adm, (self.lb - 1) * self.kf + (lf - 1), n_grid)
        phi_base = flat[rows, cur_flat]
        best = np.argmax(flat, axis=1)
        gains = flat[rows, best] - phi_base
        cand_lb = np.where(best < n_grid, best // self.kf + 1, 0)
        cand_lf = np.where(best < n_grid, best % self.kf + 1, 0)

        # current true potential, for traces and diagnostics
        r_cur = r_self_row[rows, np.where(adm, lf, 0)]
        phi_now = self.w_sum - float(self.G @ r_cur) - tot_cost
        return gains, cand_lb, cand_lf, phi_now


def run_slot_game(
    inputs: SlotInputs,
    cfg: GameConfig | None = None,
    record_trace: bool = False,
) -> GameResult:
    """Asynchronous improvement dynamics from the all-null profile.

    Every iteration, all active users search their feasible unilateral
    sets; the improving set holds those whose best gain exceeds eps'.
    Exactly one improving user (largest gain or round-robin) applies its
    candidate; the loop ends when the improving set empties (converged)
    or after max_iterations updates (capped, converged=False).
    """
    cfg = cfg or GameConfig()
    eng = _Engine(inputs)
    if eng.na == 0:
        prof = evaluate_profile((NULL_ACTION,) * inputs.n_users, inputs)
        return GameResult(prof, 0, True, np.array([0.0]), [0],
                         [prof.actions] if record_trace else [])
    k = 0
    converged = False
    phis: list[float] = []
    sizes: list[int] = []
    traces: list[tuple[Action, ...]] = [eng.actions()] if record_trace else []
    rr_ptr = 0
    while True:
        gains, cand_lb, cand_lf, phi_now = eng.search()
        phis.append(phi_now)
        improving = np.flatnonzero(gains > cfg.improvement_threshold)
        sizes.append(len(improving))
        if len(improving) == 0:
            converged = True
            break
        if k >= cfg.max_iterations:
            break
        if cfg.selection_rule == "largest_gain":
            sel = int(improving[np.argmax(gains[improving])])
        else:  # round_robin over active rows
            after = improving[improving >= rr_ptr]
            sel = int(after[0] if len(after) else improving[0])
            rr_ptr = (sel + 1) % eng.na
        eng.lb[sel] = cand_lb[sel]
        eng.lf[sel] = cand_lf[sel]
        k += 1
        if record_trace:
            traces.append(eng.actions())
    profile = evaluate_profile(eng.actions(), inputs)
    return GameResult(profile, k, converged, np.asarray(phis), sizes, traces)


def verify_equilibrium(
    actions: Sequence[Action], inputs: SlotInputs, eps: float = 0.0
) -> bool:
    """True iff no active user has a feasible unilateral gain above eps.

    Shares the engine's candidate search, so any profile run_slot_game
    reports as converged verifies under the same threshold.
    """
    eng = _Engine(inputs)
    if eng.na == 0:
        return True
    eng.set_profile(actions)
    gains, _, _, _ = eng.search()
    return bool(np.all(gains <= eps))


def brute_force_max_potential(
    inputs: SlotInputs, cap: int = 1_000_000
) -> tuple[tuple[Action, ...], float]:
    """Exhaustive feasible-profile Phi maximizer (oracle-scale only).

    Enumerates the product of per-user candidate lists (null first, then
    the grid bandwidth-major) via the reference feasibility and
    potential; keeps the first maximizer. Refuses joint spaces larger
    than cap.
    """
    act_idx = inputs.active_indices
    per_user = [NULL_ACTION] + inputs.grid.actions()
    total = len(per_user) ** len(act_idx)
    if total > cap:
        raise ValueError(f"joint space of {total} profiles exceeds cap {cap}")
    base = [NULL_ACTION] * inputs.n_users
    best_actions: tuple[Action, ...] | None = None
    best_phi = -np.inf
    for combo in itertools.product(per_user, repeat=len(act_idx)):
        cand = list(base)
        for u, a in zip(act_idx, combo):
            cand[u] = a
        if not is_feasible_joint(cand, inputs):
            continue
        phi = potential(cand, inputs)
        if phi > best_phi:
            best_actions, best_phi = tuple(cand), phi
    assert best_actions is not None  # all-null is always feasible
    return best_actions, best_phi
