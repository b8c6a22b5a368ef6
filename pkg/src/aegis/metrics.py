"""Episode metrics and cross-episode aggregation.

Six scalars summarize an episode: timely-inference ratio, average
decision-time violation risk, mean deadline-violation burst length,
average realized delay of admitted tasks, average per-slot scheduling
utility, and mean convergence rounds.  Empty denominators never divide:
they fall back to documented sentinels and raise a flag instead.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .harness import EpisodeLog

__all__ = [
    "EpisodeMetrics",
    "METRIC_NAMES",
    "MetricsRow",
    "aggregate_rows",
    "compute_metrics",
    "metric_aed",
    "metric_asu",
    "metric_avr",
    "metric_cr",
    "metric_dvbl",
    "metric_tir",
    "violation_runs",
]

METRIC_NAMES = ("tir", "avr", "dvbl", "aed", "asu", "cr")


def metric_tir(log: EpisodeLog) -> float:
    """Timely completions over active tasks; no active tasks reports 1.0."""
    den = float(np.sum(log.activity))
    if den == 0:
        return 1.0
    num = float(np.sum(log.activity * log.timely))
    return num / den


def metric_avr(log: EpisodeLog) -> float:
    """Mean decision-time risk over active (user, slot) pairs.

    Rejections count at the null convention risk of 1; zero active
    pairs report 0.
    """
    mask = log.activity.astype(bool)
    if not mask.any():
        return 0.0
    return float(np.mean(log.decision_risk[mask]))


def violation_runs(log: EpisodeLog) -> list[int]:
    """All maximal missed-deadline run lengths, over every user.

    A run is a consecutive stretch of a user's active slots with no
    timely completion; a timely slot or an inactive slot ends it.
    """
    runs: list[int] = []
    T, n = log.activity.shape
    for i in range(n):
        cur = 0
        for t in range(T):
            if log.activity[t, i] and not log.timely[t, i]:
                cur += 1
            else:
                if cur:
                    runs.append(cur)
                cur = 0
        if cur:
            runs.append(cur)
    return runs


def metric_dvbl(log: EpisodeLog) -> float:
    """Mean violation-run length across all runs of all users; 0 if none."""
    runs = violation_runs(log)
    return float(np.mean(runs)) if runs else 0.0


def metric_aed(log: EpisodeLog) -> float:
    """Mean realized delay over admitted tasks; no admissions reports 0."""
    d = log.realized_delay[log.admitted]
    d = d[np.isfinite(d)]
    return float(np.mean(d)) if len(d) else 0.0


def metric_asu(log: EpisodeLog) -> float:
    """Mean per-slot scheduling utility, on the common scoring basis."""
    return float(np.mean(log.phi))


def metric_cr(log: EpisodeLog) -> float:
    """Mean per-slot improvement iterations; 0 for single-shot policies."""
    return float(np.mean(log.iterations))


@dataclass(frozen=True)
class EpisodeMetrics:
    tir: float
    avr: float
    dvbl: float
    aed: float
    asu: float
    cr: float
    flags: tuple[str, ...] = ()

    def value(self, name: str) -> float:
        return float(getattr(self, name))


def compute_metrics(log: EpisodeLog) -> EpisodeMetrics:
    """All six metrics for one episode, with empty-denominator flags."""
    flags = []
    if not np.sum(log.activity):
        flags.append("tir_empty")
        flags.append("avr_empty")
    if not (np.isfinite(log.realized_delay[log.admitted])).any():
        flags.append("aed_empty")
    return EpisodeMetrics(
        tir=metric_tir(log),
        avr=metric_avr(log),
        dvbl=metric_dvbl(log),
        aed=metric_aed(log),
        asu=metric_asu(log),
        cr=metric_cr(log),
        flags=tuple(flags),
    )


@dataclass(frozen=True)
class MetricsRow:
    """Across-episode mean and sample std for one (policy, n_users) cell."""

    policy: str
    n_users: int
    episodes: int
    tir_mean: float
    tir_std: float
    avr_mean: float
    avr_std: float
    dvbl_mean: float
    dvbl_std: float
    aed_mean: float
    aed_std: float
    asu_mean: float
    asu_std: float
    cr_mean: float
    cr_std: float

    def __post_init__(self) -> None:
        checks = (
            (0.0 <= self.tir_mean <= 1.0, "TIR mean outside [0, 1]"),
            (0.0 <= self.avr_mean <= 1.0, "AVR mean outside [0, 1]"),
            (self.dvbl_mean >= 0.0, "DVBL mean negative"),
            (self.aed_mean >= 0.0, "AED mean negative"),
            (self.cr_mean >= 0.0, "CR mean negative"),
        )
        for ok, msg in checks:
            if not ok:
                raise ValueError(f"{self.policy}/{self.n_users}: {msg}")

    def mean(self, name: str) -> float:
        return float(getattr(self, f"{name}_mean"))

    def std(self, name: str) -> float:
        return float(getattr(self, f"{name}_std"))


def _mean_std(values: np.ndarray) -> tuple[float, float]:
    mean = float(np.mean(values))
    std = float(np.std(values, ddof=1)) if len(values) > 1 else 0.0
    return mean, std


def aggregate_rows(
    policy: str, n_users: int, metrics: list[EpisodeMetrics]
) -> MetricsRow:
    """Aggregate per-episode metrics into one sweep-table row."""
    if not metrics:
        raise ValueError("cannot aggregate zero episodes")
    fields: dict[str, float] = {}
    for name in METRIC_NAMES:
        mean, std = _mean_std(np.array([m.value(name) for m in metrics]))
        fields[f"{name}_mean"] = mean
        fields[f"{name}_std"] = std
    return MetricsRow(policy=policy, n_users=n_users, episodes=len(metrics), **fields)
