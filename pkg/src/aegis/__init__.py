"""Deterministic simulator and scheduling library for deadline-sensitive
edge inference.

A shared edge platform splits bandwidth and compute across mobile users
whose tasks carry hard deadlines.  The central scheduler treats each
slot as an exact potential game over discrete allocations, regularized
by per-user risk budgets and driven by one-step forecasts of channel
and load; asynchronous best-response dynamics reach a pure equilibrium
in finitely many improvements.  Comparison policies, episode
orchestration, metrics, and a CLI round out the experiment stack.
"""

from .baselines import (
    Policy,
    PolicyTag,
    SlotContext,
    SlotDecision,
    equal_share_allocate,
    greedy_priority_allocate,
    make_policy,
)
from .config import RunConfig, config_digest, default_config, load_config
from .core import (
    NULL_ACTION,
    Action,
    ActionGrid,
    ResourcePools,
    SlotState,
    TaskSpec,
    UserProfile,
    make_action_grid,
)
from .env import (
    BacklogProcess,
    ChannelProcess,
    RadioParams,
    compute_sinr,
    db_to_linear,
    load_activity_probabilities,
    synthesize_activity_probabilities,
)
from .experiment import ablation_pair, emit_outputs, run_sweep
from .game import (
    GameConfig,
    GameResult,
    JointProfile,
    SlotInputs,
    best_response,
    brute_force_max_potential,
    build_inputs,
    evaluate_profile,
    feasible_unilateral_set,
    is_feasible_joint,
    marginal_utility,
    potential,
    run_slot_game,
    verify_equilibrium,
)
from .harness import EpisodeLog, HarnessInvariantError, run_episode
from .metrics import MetricsRow, compute_metrics
from .predictor import LastObservationBank, LstmPredictorBank, OnlineLstm
from .risk import (
    assess,
    e2e_delay,
    risk_surrogate,
    timely_indicator,
    update_budget,
)

__all__ = [
    "Action",
    "ActionGrid",
    "BacklogProcess",
    "ChannelProcess",
    "EpisodeLog",
    "GameConfig",
    "GameResult",
    "HarnessInvariantError",
    "JointProfile",
    "LastObservationBank",
    "LstmPredictorBank",
    "MetricsRow",
    "NULL_ACTION",
    "OnlineLstm",
    "Policy",
    "PolicyTag",
    "RadioParams",
    "ResourcePools",
    "RunConfig",
    "SlotContext",
    "SlotDecision",
    "SlotInputs",
    "SlotState",
    "TaskSpec",
    "UserProfile",
    "ablation_pair",
    "assess",
    "best_response",
    "brute_force_max_potential",
    "build_inputs",
    "compute_metrics",
    "compute_sinr",
    "config_digest",
    "db_to_linear",
    "default_config",
    "e2e_delay",
    "emit_outputs",
    "equal_share_allocate",
    "evaluate_profile",
    "feasible_unilateral_set",
    "greedy_priority_allocate",
    "is_feasible_joint",
    "load_activity_probabilities",
    "load_config",
    "make_action_grid",
    "make_policy",
    "marginal_utility",
    "potential",
    "risk_surrogate",
    "run_episode",
    "run_slot_game",
    "run_sweep",
    "synthesize_activity_probabilities",
    "timely_indicator",
    "update_budget",
    "verify_equilibrium",
]
