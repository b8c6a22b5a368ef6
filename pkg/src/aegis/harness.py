"""Closed-loop episode runner: predict, schedule, realize, update.

One episode advances T slots.  Per slot, the environment is stepped
first (channel innovations, then activation draws, then task draws, in
ascending user order), the policy's forecast bank predicts from history
ending at the previous slot, the policy picks a profile, realized
delays and timeliness come from the true slot states, budgets update
from decision-time risk, and the bank finally observes the slot's truth
and trains.  The arrival draw that advances the background backlog
closes the slot.  All randomness flows from named SeedSequence streams,
so a (config, n_users, episode) triple fully determines the log.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .baselines import Policy, SlotContext, make_policy
from .config import RunConfig
from .core import SlotState, UserProfile
from .env import (
    BacklogProcess,
    ChannelProcess,
    draw_activation,
    draw_task,
    load_activity_probabilities,
    step_backlog,
    step_channel,
    synthesize_activity_probabilities,
)
from .game import build_inputs, evaluate_profile, is_feasible_joint, potential, verify_equilibrium
from .predictor import LastObservationBank, LstmPredictorBank

__all__ = [
    "EpisodeLog",
    "HarnessInvariantError",
    "build_population",
    "episode_rngs",
    "population_rng",
    "run_episode",
]


class HarnessInvariantError(RuntimeError):
    """A slot produced a profile or budget that breaks an invariant."""


@dataclass
class EpisodeLog:
    """Everything one episode produced, as dense arrays.

    Per-slot-and-user arrays are (T, N); budgets are (T+1, N) with row 0
    holding the initial caps; per-slot arrays are (T,).  decision_*
    fields hold the states the policy scored against (forecasts for the
    predicting variants, observations for the rest); realized_* come
    from the true slot states.  Inactive entries are NaN in float
    arrays.
    """

    policy: str
    n_users: int
    horizon: int
    master_seed: int
    episode: int
    activity_probs: np.ndarray
    mean_gain_db: np.ndarray
    activity: np.ndarray
    admitted: np.ndarray
    timely: np.ndarray
    decision_risk: np.ndarray
    realized_risk: np.ndarray
    realized_delay: np.ndarray
    budgets: np.ndarray
    phi: np.ndarray
    phi_internal: np.ndarray
    iterations: np.ndarray
    converged: np.ndarray
    bandwidth: np.ndarray
    compute: np.ndarray
    observed_gain: np.ndarray
    decision_gain: np.ndarray
    observed_backlog: np.ndarray
    decision_backlog: np.ndarray
    task_data: np.ndarray
    task_workload: np.ndarray
    task_deadline: np.ndarray
    phi_traces: list = field(default_factory=list)


def population_rng(master_seed: int, n_users: int) -> np.random.Generator:
    """Population stream: user traits shared by every episode at this size."""
    return np.random.default_rng(np.random.SeedSequence([master_seed, n_users]))


def episode_rngs(
    master_seed: int, n_users: int, episode: int
) -> tuple[np.random.Generator, np.random.Generator]:
    """(environment, predictor-init) streams for one episode."""
    ss = np.random.SeedSequence([master_seed, n_users, episode])
    env_ss, pred_ss = ss.spawn(2)
    return np.random.default_rng(env_ss), np.random.default_rng(pred_ss)


def build_population(
    cfg: RunConfig, n_users: int
) -> tuple[tuple[UserProfile, ...], np.ndarray, np.ndarray]:
    """User profiles plus their activity probabilities and mean gains.

    Draw order on the population stream is fixed: mean gains first, then
    activity probabilities, so switching the activity source to a trace
    leaves the channel population unchanged.
    """
    rng = population_rng(cfg.seed, n_users)
    lo, hi = cfg.channel_mean_db_interval
    mean_db = rng.uniform(lo, hi, size=n_users)
    if cfg.activity_mode == "trace":
        with open(cfg.activity_trace_path, "r", encoding="utf-8") as fh:
            probs = load_activity_probabilities(
                fh,
                n_users,
                cfg.activity_days_in_month,
                community_area=cfg.activity_community_area,
            )
    else:
        probs = synthesize_activity_probabilities(
            n_users, rng, cfg.activity_prob_interval
        )
    users = tuple(
        UserProfile(
            index=i,
            weight=cfg.weight,
            risk_sensitivity=cfg.risk_sensitivity,
            budget_cap=cfg.budget_cap,
            recovery_rate=cfg.recovery_rate,
            activity_prob=float(probs[i]),
            bandwidth_cost=cfg.bandwidth_cost,
            compute_cost=cfg.compute_cost,
            risk_weight=cfg.risk_weight,
        )
        for i in range(n_users)
    )
    return users, probs, mean_db


def _make_bank(kind: str, cfg: RunConfig, n_users: int, rng: np.random.Generator):
    if kind == "lstm":
        return LstmPredictorBank(
            n_users,
            rng,
            window=cfg.predictor_window,
            hidden_size=cfg.predictor_hidden,
            learning_rate=cfg.predictor_lr,
            clip_norm=cfg.predictor_clip,
            replay=cfg.predictor_replay,
            train_passes=cfg.predictor_train_passes,
        )
    return LastObservationBank(n_users)


def run_episode(
    cfg: RunConfig,
    policy: Policy | str,
    n_users: int | None = None,
    episode: int = 0,
    record_traces: bool = False,
    verify_each_slot: bool = False,
) -> EpisodeLog:
    """Run one full episode and return its log.

    Any pool/activity/budget violation aborts with a slot-stamped
    HarnessInvariantError.  verify_each_slot additionally re-verifies
    every converged game profile as an equilibrium, at extra cost.
    """
    if isinstance(policy, str):
        policy = make_policy(policy)
    n = int(n_users if n_users is not None else cfg.n_users)
    T = cfg.horizon
    users, probs, mean_db = build_population(cfg, n)
    env_rng, pred_rng = episode_rngs(cfg.seed, n, episode)

    channel = ChannelProcess(
        mean_db, cfg.channel_ar_coefficient, cfg.channel_noise_std_db, env_rng
    )
    backlog = BacklogProcess(
        cfg.pools, cfg.arrival_fraction_max, env_rng, cfg.initial_backlog
    )
    bank = _make_bank(policy.predictor_kind, cfg, n, pred_rng)
    bank.observe(channel.state_db.copy(), backlog.backlog)

    native_gamma = np.array([u.risk_weight for u in users])
    budgets = np.full(n, cfg.budget_cap)

    log = EpisodeLog(
        policy=policy.tag.value,
        n_users=n,
        horizon=T,
        master_seed=cfg.seed,
        episode=episode,
        activity_probs=probs,
        mean_gain_db=mean_db,
        activity=np.zeros((T, n), dtype=np.int8),
        admitted=np.zeros((T, n), dtype=bool),
        timely=np.zeros((T, n), dtype=np.int8),
        decision_risk=np.full((T, n), np.nan),
        realized_risk=np.full((T, n), np.nan),
        realized_delay=np.full((T, n), np.nan),
        budgets=np.full((T + 1, n), np.nan),
        phi=np.zeros(T),
        phi_internal=np.zeros(T),
        iterations=np.zeros(T, dtype=np.int64),
        converged=np.ones(T, dtype=bool),
        bandwidth=np.zeros((T, n)),
        compute=np.zeros((T, n)),
        observed_gain=np.zeros((T, n)),
        decision_gain=np.zeros((T, n)),
        observed_backlog=np.zeros(T),
        decision_backlog=np.zeros(T),
        task_data=np.full((T, n), np.nan),
        task_workload=np.full((T, n), np.nan),
        task_deadline=np.full((T, n), np.nan),
    )
    log.budgets[0] = budgets

    for t in range(1, T + 1):
        row = t - 1
        gains = step_channel(channel)
        chi = draw_activation(probs, env_rng)
        tasks = {
            int(i): draw_task(
                int(i),
                env_rng,
                cfg.task_data_bits,
                cfg.task_workload_cycles,
                cfg.task_deadline,
                weight=cfg.weight,
            )
            for i in np.flatnonzero(chi)
        }
        pred_gain, pred_q = bank.predict()
        state = SlotState(
            slot=t,
            activity=chi,
            tasks=tasks,
            observed_gain=gains,
            observed_backlog=backlog.backlog,
            predicted_gain=pred_gain,
            predicted_backlog=pred_q,
            budgets=budgets.copy(),
        )
        ctx = SlotContext(
            users=users,
            state=state,
            pools=cfg.pools,
            grid=cfg.grid,
            radio=cfg.radio,
            game_cfg=cfg.game,
        )
        dec = policy.decide(ctx)

        if not is_feasible_joint(dec.actions, dec.inputs):
            raise HarnessInvariantError(
                f"slot {t}: {policy.tag.value} produced an infeasible profile"
            )
        if verify_each_slot and dec.iterations and dec.converged:
            ok = verify_equilibrium(
                dec.actions, dec.inputs, eps=cfg.game.improvement_threshold
            )
            if not ok:
                raise HarnessInvariantError(
                    f"slot {t}: converged profile fails equilibrium verification"
                )

        dec_prof = evaluate_profile(dec.actions, dec.inputs)
        real_inputs = build_inputs(
            state,
            users,
            cfg.pools,
            cfg.grid,
            cfg.radio,
            gains=gains,
            backlog=backlog.backlog,
            enforce_budget=False,
        )
        real_prof = evaluate_profile(dec.actions, real_inputs)
        canon_inputs = dataclasses.replace(dec.inputs, gamma=native_gamma)

        b_alloc = np.array([a.bandwidth for a in dec.actions])
        f_alloc = np.array([a.compute for a in dec.actions])
        adm = chi.astype(bool) & (b_alloc > 0)

        log.activity[row] = chi
        log.admitted[row] = adm
        log.timely[row] = real_prof.timely
        log.decision_risk[row] = dec_prof.risk
        log.realized_risk[row] = real_prof.risk
        log.realized_delay[row] = real_prof.delay
        log.phi[row] = potential(dec.actions, canon_inputs)
        log.phi_internal[row] = dec_prof.potential
        log.iterations[row] = dec.iterations
        log.converged[row] = dec.converged
        log.bandwidth[row] = b_alloc
        log.compute[row] = f_alloc
        log.observed_gain[row] = gains
        # invert SINR so the record holds the states the policy used,
        # whichever source (forecast or observation) it drew them from
        log.decision_gain[row] = (
            dec.inputs.sinr * cfg.radio.noise_power / cfg.radio.transmit_power
        )
        log.observed_backlog[row] = backlog.backlog
        log.decision_backlog[row] = dec.inputs.backlog
        for i, task in tasks.items():
            log.task_data[row, i] = task.data_bits
            log.task_workload[row, i] = task.workload_cycles
            log.task_deadline[row, i] = task.deadline
        if record_traces and dec.phi_trace is not None:
            log.phi_traces.append(dec.phi_trace)

        consume = adm if not cfg.budget_consume_rejected else chi.astype(bool)
        risk_used = np.where(consume, dec_prof.risk, 0.0)
        budgets = np.minimum(
            cfg.budget_cap,
            np.maximum(0.0, budgets - risk_used + cfg.recovery_rate),
        )
        if np.any(budgets < 0) or np.any(budgets > cfg.budget_cap):
            raise HarnessInvariantError(f"slot {t}: budget outside [0, cap]")
        log.budgets[t] = budgets

        bank.observe(channel.state_db.copy(), backlog.backlog)
        bank.train()
        step_backlog(backlog, float(np.sum(f_alloc)))

    return log
