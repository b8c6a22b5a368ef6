"""Stochastic environment: activity, tasks, channel, radio, backlog.

The channel is a first-order Gauss-Markov process in the dB domain;
linear gains are derived as 10^(x/10). Background edge load follows a
work-conserving backlog recursion driven by uniform arrivals and the
compute left over by the scheduler.
"""

from __future__ import annotations

import csv
import datetime
from dataclasses import dataclass
from typing import IO, Iterable

import numpy as np

from .core import ResourcePools, TaskSpec

__all__ = [
    "RadioParams",
    "ChannelProcess",
    "BacklogProcess",
    "db_to_linear",
    "compute_sinr",
    "load_activity_probabilities",
    "synthesize_activity_probabilities",
    "draw_activation",
    "draw_task",
    "step_channel",
    "step_backlog",
]


def db_to_linear(x_db):
    """10^(x/10); shared by the channel process and the predictors."""
    return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)


@dataclass(frozen=True)
class RadioParams:
    """Uplink power budget and receiver noise floor, watts."""

    transmit_power: float = 0.2
    noise_power: float = 1e-13

    def __post_init__(self) -> None:
        if self.transmit_power <= 0 or self.noise_power <= 0:
            raise ValueError("transmit_power and noise_power must be positive")


def compute_sinr(gain, radio: RadioParams):
    """SINR = P * g / sigma^2. Bandwidth-independent by model choice."""
    g = np.asarray(gain, dtype=float)
    if np.any(g < 0):
        raise ValueError("channel gain must be non-negative")
    out = radio.transmit_power * g / radio.noise_power
    if out.ndim == 0:
        return float(out)
    return out


class ChannelProcess:
    """Per-user AR(1) shadowing in dB: x <- mu + phi*(x - mu) + N(0, sigma^2).

    State is initialized from the stationary distribution
    N(mu, sigma^2 / (1 - phi^2)) so episodes start in steady state
    (degenerate at mu when phi = 1 or sigma = 0).
    """

    def __init__(
        self,
        mean_db: np.ndarray,
        ar_coefficient: float,
        innovation_std_db: float,
        rng: np.random.Generator,
    ) -> None:
        if not 0.0 <= ar_coefficient <= 1.0:
            raise ValueError(f"ar_coefficient must lie in [0, 1], got {ar_coefficient}")
        if innovation_std_db < 0:
            raise ValueError(f"innovation_std_db must be non-negative, got {innovation_std_db}")
        self.mean_db = np.asarray(mean_db, dtype=float)
        self.phi = float(ar_coefficient)
        self.sigma = float(innovation_std_db)
        self.rng = rng
        if self.sigma > 0 and self.phi < 1.0:
            stat_std = self.sigma / np.sqrt(1.0 - self.phi**2)
            self.state_db = self.mean_db + stat_std * rng.standard_normal(self.mean_db.shape)
        else:
            self.state_db = self.mean_db.copy()

    @property
    def gain(self) -> np.ndarray:
        return db_to_linear(self.state_db)


def step_channel(proc: ChannelProcess) -> np.ndarray:
    """Advance one slot and return the new linear gains."""
    noise = proc.sigma * proc.rng.standard_normal(proc.state_db.shape)
    proc.state_db = proc.mean_db + proc.phi * (proc.state_db - proc.mean_db) + noise
    return proc.gain


class BacklogProcess:
    """Background workload queue, cycles.

    Arrivals are uniform on [0, arrival_fraction_max * F_tot * tau] each
    slot; service is whatever compute the scheduler left unallocated.
    """

    def __init__(
        self,
        pools: ResourcePools,
        arrival_fraction_max: float,
        rng: np.random.Generator,
        initial_cycles: float = 0.0,
    ) -> None:
        if arrival_fraction_max < 0:
            raise ValueError(f"arrival_fraction_max must be non-negative, got {arrival_fraction_max}")
        if initial_cycles < 0:
            raise ValueError(f"initial_cycles must be non-negative, got {initial_cycles}")
        self.pools = pools
        self.arrival_max = arrival_fraction_max * pools.total_compute * pools.slot_duration
        self.rng = rng
        self.backlog = float(initial_cycles)


def step_backlog(proc: BacklogProcess, allocated_compute: float) -> float:
    """Q <- max(0, Q + A - (F_tot - sum_f) * tau); returns the new backlog."""
    pools = proc.pools
    if allocated_compute < 0 or allocated_compute > pools.total_compute * (1.0 + 1e-9):
        raise ValueError(f"allocated compute {allocated_compute} outside [0, {pools.total_compute}]")
    arrival = proc.rng.uniform(0.0, proc.arrival_max)
    drained = (pools.total_compute - allocated_compute) * pools.slot_duration
    proc.backlog = max(0.0, proc.backlog + arrival - drained)
    return proc.backlog


def synthesize_activity_probabilities(
    n_users: int, rng: np.random.Generator, interval: tuple[float, float] = (0.2, 0.9)
) -> np.ndarray:
    """i.i.d. uniform activity probabilities on the given interval."""
    lo, hi = interval
    if not (0.0 <= lo <= hi <= 1.0):
        raise ValueError(f"interval must satisfy 0 <= lo <= hi <= 1, got {interval}")
    return rng.uniform(lo, hi, size=n_users)


def load_activity_probabilities(
    trace: IO[str] | Iterable[str],
    n_users: int,
    days_in_month: int,
    community_area: str | None = None,
) -> np.ndarray:
    """Empirical activity from a mobility trace CSV.

    Expects header ``vehicle_id,date,community_area`` with ISO dates.
    p_i = (distinct days vehicle i appears in the target area) / days_in_month,
    clamped to [0, 1]. Vehicles map to user indices by order of first
    appearance over the whole file, so a vehicle never seen inside the
    target area yields p = 0.
    """
    if days_in_month <= 0:
        raise ValueError(f"days_in_month must be positive, got {days_in_month}")
    reader = csv.reader(trace)
    try:
        header = next(reader)
    except StopIteration:
        raise ValueError("trace is empty") from None
    expected = ["vehicle_id", "date", "community_area"]
    if [h.strip() for h in header] != expected:
        raise ValueError(f"trace header must be {expected}, got {header}")
    order: list[str] = []
    days: dict[str, set[datetime.date]] = {}
    for row_no, row in enumerate(reader, start=2):
        if len(row) != 3:
            raise ValueError(f"trace row {row_no}: expected 3 fields, got {len(row)}")
        vehicle, date_str, area = (f.strip() for f in row)
        if not vehicle:
            raise ValueError(f"trace row {row_no}: empty vehicle_id")
        try:
            date = datetime.date.fromisoformat(date_str)
        except ValueError:
            raise ValueError(f"trace row {row_no}: malformed date {date_str!r}") from None
        if vehicle not in days:
            order.append(vehicle)
            days[vehicle] = set()
        if community_area is None or area == community_area:
            days[vehicle].add(date)
    if len(order) < n_users:
        raise ValueError(f"trace has {len(order)} vehicles, need {n_users}")
    probs = np.array(
        [min(1.0, len(days[v]) / days_in_month) for v in order[:n_users]], dtype=float
    )
    return probs


def draw_activation(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Bernoulli activity vector for one slot."""
    p = np.asarray(probs, dtype=float)
    if np.any((p < 0) | (p > 1)):
        raise ValueError("activity probabilities must lie in [0, 1]")
    return (rng.random(p.shape) < p).astype(np.int8)


def draw_task(
    owner: int,
    rng: np.random.Generator,
    data_bits_interval: tuple[float, float],
    workload_interval: tuple[float, float],
    deadline_interval: tuple[float, float],
    weight: float = 1.0,
) -> TaskSpec:
    """Uniform task draw; three uniforms consumed in a fixed order."""
    data = rng.uniform(*data_bits_interval)
    work = rng.uniform(*workload_interval)
    deadline = rng.uniform(*deadline_interval)
    return TaskSpec(owner=owner, data_bits=data, workload_cycles=work, deadline=deadline, weight=weight)
