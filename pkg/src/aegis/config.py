"""Run configuration: defaults, JSON loading, validation, digest.

The configuration is a plain nested dict in human units (MB, MHz, GHz,
dB, seconds).  ``RunConfig`` validates it once and exposes the typed
objects the rest of the library consumes, converting to internal units
(bits, Hz, cycles) exactly at that boundary.
"""

from __future__ import annotations

import copy
import hashlib
import json
from pathlib import Path
from typing import Any, Mapping

from .core import GHZ_TO_HZ, MB_TO_BITS, MHZ_TO_HZ, ResourcePools, make_action_grid
from .env import RadioParams
from .game import GameConfig

__all__ = [
    "DEFAULT_CONFIG",
    "RunConfig",
    "config_digest",
    "default_config",
    "load_config",
    "merge_config",
]

DEFAULT_CONFIG: dict[str, Any] = {
    "seed": 1,
    "horizon": 180,
    "pools": {
        "total_bandwidth_mhz": 50.0,
        "total_compute_ghz": 155.0,
        "slot_duration_s": 1.0,
        "stability_eps": 1e-6,
        "budget_eps": 1e-6,
    },
    "grid": {
        "bandwidth_levels": 8,
        "compute_levels": 8,
    },
    "users": {
        "count": 20,
        "weight": 1.0,
        "risk_sensitivity": 10.0,
        "budget_cap": 1.0,
        "recovery_rate": 0.05,
        # null costs resolve to 0.1 / pool capacity at ingestion
        "bandwidth_cost": None,
        "compute_cost": None,
        "risk_weight": 0.5,
        "activity": {
            "mode": "synthetic",
            "prob_interval": [0.2, 0.9],
            "trace_path": None,
            "days_in_month": 31,
            "community_area": None,
        },
    },
    "channel": {
        "mean_db_interval": [-100.0, -90.0],
        "ar_coefficient": 0.9,
        "noise_std_db": 2.0,
    },
    "radio": {
        "transmit_power_w": 0.2,
        "noise_power_w": 1e-13,
    },
    "backlog": {
        "arrival_fraction_max": 0.3,
        "initial_gcycles": 0.0,
    },
    "tasks": {
        "data_mb": [0.12, 0.90],
        "workload_gcycles": [0.08, 0.95],
        "deadline_s": [0.28, 0.82],
    },
    "predictor": {
        "window": 8,
        "hidden_size": 16,
        "learning_rate": 0.01,
        "clip_norm": 5.0,
        "replay": 32,
        "train_passes": 2,
    },
    "game": {
        "improvement_threshold": 1e-9,
        "max_iterations": 200,
        "selection_rule": "largest_gain",
    },
    "risk": {
        "budget_consume_rejected": False,
    },
    "experiment": {
        "episodes": 20,
        "sweep_users": [10, 20, 30, 40],
        "policies": [
            "AEGIS",
            "AEGISNoBudget",
            "AEGISNoPred",
            "SLOEdge",
            "DeadlineFirst",
            "BCLF",
            "EqualShare",
        ],
        "out_dir": "results",
    },
}

def default_config() -> dict[str, Any]:
    """Deep copy of the built-in defaults."""
    return copy.deepcopy(DEFAULT_CONFIG)


def merge_config(
    base: Mapping[str, Any], override: Mapping[str, Any], _path: str = ""
) -> dict[str, Any]:
    """Recursively merge override into base, rejecting unknown keys.

    Dict values merge key by key; scalars and lists replace.  A key the
    base does not know raises KeyError with its dotted path, which turns
    config typos into immediate errors instead of silent defaults.
    """
    merged = {k: copy.deepcopy(v) for k, v in base.items()}
    for key, value in override.items():
        dotted = f"{_path}{key}"
        if key not in base:
            raise KeyError(f"unknown config key: {dotted}")
        if isinstance(base[key], Mapping):
            if not isinstance(value, Mapping):
                raise TypeError(f"config key {dotted} expects a mapping")
            merged[key] = merge_config(base[key], value, f"{dotted}.")
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def load_config(path: str | Path | None = None) -> dict[str, Any]:
    """Defaults, optionally overridden by a JSON file."""
    cfg = default_config()
    if path is None:
        return cfg
    with open(path, "r", encoding="utf-8") as fh:
        override = json.load(fh)
    if not isinstance(override, Mapping):
        raise TypeError(f"config file {path} must hold a JSON object")
    return merge_config(cfg, override)


def config_digest(cfg: Mapping[str, Any]) -> str:
    """sha256 over the canonical JSON form (sorted keys, no whitespace)."""
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ValueError(f"invalid config: {msg}")


def _interval(raw: Any, name: str) -> tuple[float, float]:
    _require(
        isinstance(raw, (list, tuple)) and len(raw) == 2,
        f"{name} must be a [low, high] pair",
    )
    lo, hi = float(raw[0]), float(raw[1])
    _require(lo <= hi, f"{name} must satisfy low <= high")
    return lo, hi


class RunConfig:
    """Validated configuration with typed accessors in internal units."""

    def __init__(self, mapping: Mapping[str, Any] | None = None):
        cfg = merge_config(DEFAULT_CONFIG, dict(mapping or {}))
        self.raw = cfg

        self.seed = int(cfg["seed"])
        self.horizon = int(cfg["horizon"])
        _require(self.horizon >= 1, "horizon must be >= 1")

        p = cfg["pools"]
        _require(p["total_bandwidth_mhz"] > 0, "total_bandwidth_mhz must be > 0")
        _require(p["total_compute_ghz"] > 0, "total_compute_ghz must be > 0")
        _require(p["slot_duration_s"] > 0, "slot_duration_s must be > 0")
        self.pools = ResourcePools(
            total_bandwidth=float(p["total_bandwidth_mhz"]) * MHZ_TO_HZ,
            total_compute=float(p["total_compute_ghz"]) * GHZ_TO_HZ,
            slot_duration=float(p["slot_duration_s"]),
            stability_eps=float(p["stability_eps"]),
            budget_eps=float(p["budget_eps"]),
        )

        g = cfg["grid"]
        _require(
            int(g["bandwidth_levels"]) >= 1 and int(g["compute_levels"]) >= 1,
            "grid levels must be >= 1",
        )
        self.grid = make_action_grid(
            self.pools, int(g["bandwidth_levels"]), int(g["compute_levels"])
        )

        u = cfg["users"]
        self.n_users = int(u["count"])
        _require(self.n_users >= 1, "users.count must be >= 1")
        self.weight = float(u["weight"])
        self.risk_sensitivity = float(u["risk_sensitivity"])
        _require(self.risk_sensitivity > 0, "risk_sensitivity must be > 0")
        self.budget_cap = float(u["budget_cap"])
        _require(0.0 < self.budget_cap <= 1.0, "budget_cap must be in (0, 1]")
        self.recovery_rate = float(u["recovery_rate"])
        _require(self.recovery_rate >= 0, "recovery_rate must be >= 0")
        bc = u["bandwidth_cost"]
        cc = u["compute_cost"]
        self.bandwidth_cost = (
            0.1 / self.pools.total_bandwidth if bc is None else float(bc)
        )
        self.compute_cost = (
            0.1 / self.pools.total_compute if cc is None else float(cc)
        )
        self.risk_weight = float(u["risk_weight"])
        _require(self.risk_weight >= 0, "risk_weight must be >= 0")

        act = u["activity"]
        self.activity_mode = str(act["mode"])
        _require(
            self.activity_mode in ("synthetic", "trace"),
            "activity.mode must be 'synthetic' or 'trace'",
        )
        self.activity_prob_interval = _interval(
            act["prob_interval"], "activity.prob_interval"
        )
        _require(
            0.0 <= self.activity_prob_interval[0]
            and self.activity_prob_interval[1] <= 1.0,
            "activity.prob_interval must lie within [0, 1]",
        )
        self.activity_trace_path = act["trace_path"]
        self.activity_days_in_month = int(act["days_in_month"])
        self.activity_community_area = act["community_area"]
        if self.activity_mode == "trace":
            _require(
                self.activity_trace_path is not None,
                "activity.mode 'trace' requires activity.trace_path",
            )

        ch = cfg["channel"]
        self.channel_mean_db_interval = _interval(
            ch["mean_db_interval"], "channel.mean_db_interval"
        )
        self.channel_ar_coefficient = float(ch["ar_coefficient"])
        _require(
            abs(self.channel_ar_coefficient) < 1.0,
            "channel.ar_coefficient must satisfy |phi| < 1",
        )
        self.channel_noise_std_db = float(ch["noise_std_db"])
        _require(self.channel_noise_std_db >= 0, "channel.noise_std_db must be >= 0")

        r = cfg["radio"]
        self.radio = RadioParams(
            transmit_power=float(r["transmit_power_w"]),
            noise_power=float(r["noise_power_w"]),
        )

        b = cfg["backlog"]
        self.arrival_fraction_max = float(b["arrival_fraction_max"])
        _require(
            0.0 <= self.arrival_fraction_max,
            "backlog.arrival_fraction_max must be >= 0",
        )
        self.initial_backlog = float(b["initial_gcycles"]) * GHZ_TO_HZ

        t = cfg["tasks"]
        lo, hi = _interval(t["data_mb"], "tasks.data_mb")
        _require(lo > 0, "tasks.data_mb must be positive")
        self.task_data_bits = (lo * MB_TO_BITS, hi * MB_TO_BITS)
        lo, hi = _interval(t["workload_gcycles"], "tasks.workload_gcycles")
        _require(lo > 0, "tasks.workload_gcycles must be positive")
        self.task_workload_cycles = (lo * GHZ_TO_HZ, hi * GHZ_TO_HZ)
        lo, hi = _interval(t["deadline_s"], "tasks.deadline_s")
        _require(lo > 0, "tasks.deadline_s must be positive")
        self.task_deadline = (lo, hi)

        pr = cfg["predictor"]
        self.predictor_window = int(pr["window"])
        self.predictor_hidden = int(pr["hidden_size"])
        _require(
            self.predictor_window >= 1 and self.predictor_hidden >= 1,
            "predictor window and hidden_size must be >= 1",
        )
        self.predictor_lr = float(pr["learning_rate"])
        self.predictor_clip = float(pr["clip_norm"])
        self.predictor_replay = int(pr["replay"])
        self.predictor_train_passes = int(pr["train_passes"])
        _require(
            self.predictor_replay >= 1 and self.predictor_train_passes >= 0,
            "predictor.replay must be >= 1 and train_passes >= 0",
        )

        gm = cfg["game"]
        self.game = GameConfig(
            improvement_threshold=float(gm["improvement_threshold"]),
            max_iterations=int(gm["max_iterations"]),
            selection_rule=str(gm["selection_rule"]),
        )

        self.budget_consume_rejected = bool(cfg["risk"]["budget_consume_rejected"])

        ex = cfg["experiment"]
        self.episodes = int(ex["episodes"])
        _require(self.episodes >= 1, "experiment.episodes must be >= 1")
        self.sweep_users = [int(n) for n in ex["sweep_users"]]
        _require(
            len(self.sweep_users) > 0 and all(n >= 1 for n in self.sweep_users),
            "experiment.sweep_users must list positive counts",
        )
        self.policies = [str(s) for s in ex["policies"]]
        self.out_dir = str(ex["out_dir"])

    @classmethod
    def from_file(cls, path: str | Path | None) -> "RunConfig":
        if path is None:
            return cls()
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        if not isinstance(data, Mapping):
            raise TypeError(f"config file {path} must hold a JSON object")
        return cls(data)

    @property
    def digest(self) -> str:
        return config_digest(self.raw)
