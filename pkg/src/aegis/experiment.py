"""Sweeps, the ablation pair, and output emission.

A sweep runs every (n_users, policy) cell for a fixed episode count and
aggregates per-episode metrics into rows.  Episodes are paired across
policies by construction: the environment stream depends only on
(seed, n_users, episode), so two policies at the same cell see
identical channels, activations, and tasks.
"""

from __future__ import annotations

import csv
import json
import platform
from importlib import metadata as importlib_metadata
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .baselines import PolicyTag, make_policy
from .config import RunConfig
from .harness import EpisodeLog, run_episode
from .metrics import (
    METRIC_NAMES,
    EpisodeMetrics,
    MetricsRow,
    aggregate_rows,
    compute_metrics,
)

__all__ = [
    "ablation_pair",
    "emit_outputs",
    "run_cell",
    "run_sweep",
    "write_metrics_csv",
]

# AEGIS wins a paired episode on a metric when its value sits on the
# better side; ties are not wins
_BETTER_WHEN_LOWER = {"avr", "cr", "dvbl", "aed"}


def run_cell(
    cfg: RunConfig,
    policy_tag: str | PolicyTag,
    n_users: int,
    episodes: int | None = None,
) -> tuple[list[EpisodeLog], list[EpisodeMetrics]]:
    """All episodes of one (policy, n_users) cell, serially."""
    eps = int(episodes if episodes is not None else cfg.episodes)
    logs = []
    mets = []
    for ep in range(eps):
        log = run_episode(cfg, make_policy(policy_tag), n_users=n_users, episode=ep)
        logs.append(log)
        mets.append(compute_metrics(log))
    return logs, mets


def run_sweep(
    cfg: RunConfig,
    n_users_list: Sequence[int] | None = None,
    policies: Sequence[str] | None = None,
    episodes: int | None = None,
    on_row: Callable[[MetricsRow], None] | None = None,
) -> list[MetricsRow]:
    """One MetricsRow per (n_users, policy); rows stream to on_row as done."""
    sizes = list(n_users_list if n_users_list is not None else cfg.sweep_users)
    tags = list(policies if policies is not None else cfg.policies)
    rows: list[MetricsRow] = []
    for n in sizes:
        for tag in tags:
            _, mets = run_cell(cfg, tag, n, episodes)
            row = aggregate_rows(str(PolicyTag(tag).value), n, mets)
            rows.append(row)
            if on_row is not None:
                on_row(row)
    return rows


def ablation_pair(
    cfg: RunConfig, n_users: int = 20, episodes: int | None = None
) -> dict:
    """Paired-seed comparison of the scheduler against its two ablations.

    Returns the three aggregated rows plus, for the prediction ablation,
    per-metric counts of paired episodes the full scheduler wins.
    """
    tags = [
        PolicyTag.AEGIS.value,
        PolicyTag.AEGIS_NO_BUDGET.value,
        PolicyTag.AEGIS_NO_PRED.value,
    ]
    per_episode: dict[str, list[EpisodeMetrics]] = {}
    rows: dict[str, MetricsRow] = {}
    for tag in tags:
        _, mets = run_cell(cfg, tag, n_users, episodes)
        per_episode[tag] = mets
        rows[tag] = aggregate_rows(tag, n_users, mets)

    base = per_episode[PolicyTag.AEGIS.value]
    nopred = per_episode[PolicyTag.AEGIS_NO_PRED.value]
    wins = {}
    for name in METRIC_NAMES:
        w = 0
        for a, b in zip(base, nopred):
            va, vb = a.value(name), b.value(name)
            w += int(va < vb) if name in _BETTER_WHEN_LOWER else int(va > vb)
        wins[name] = w
    return {
        "n_users": n_users,
        "episodes": len(base),
        "rows": [rows[t] for t in tags],
        "wins_vs_nopred": wins,
        "per_episode": per_episode,
    }


def _fmt(x: float) -> str:
    return repr(float(x))


def write_metrics_csv(rows: Sequence[MetricsRow], path: Path) -> None:
    header = ["policy", "n_users", "episodes"]
    for name in METRIC_NAMES:
        header += [f"{name}_mean", f"{name}_std"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            rec = [r.policy, r.n_users, r.episodes]
            for name in METRIC_NAMES:
                rec += [_fmt(r.mean(name)), _fmt(r.std(name))]
            w.writerow(rec)


def _write_metric_series(rows: Sequence[MetricsRow], name: str, path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["policy", "n_users", "mean", "std"])
        for r in rows:
            w.writerow([r.policy, r.n_users, _fmt(r.mean(name)), _fmt(r.std(name))])


def emit_outputs(
    rows: Sequence[MetricsRow],
    out_dir: str | Path,
    cfg: RunConfig,
    render_plots: bool = True,
) -> list[Path]:
    """Write the sweep table, per-metric series, manifest, and figures.

    metrics.csv holds the full table; <metric>_vs_users.csv hold one
    long-format series per metric; manifest.json records the canonical
    config, its digest, and tool versions.  Re-running with an
    unchanged config rewrites identical bytes.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    table = out / "metrics.csv"
    write_metrics_csv(rows, table)
    written.append(table)

    for name in METRIC_NAMES:
        p = out / f"{name}_vs_users.csv"
        _write_metric_series(rows, name, p)
        written.append(p)

    try:
        pkg_version = importlib_metadata.version("aegis")
    except importlib_metadata.PackageNotFoundError:
        pkg_version = "unknown"
    manifest = {
        "config": cfg.raw,
        "config_digest": cfg.digest,
        "seed": cfg.seed,
        "versions": {
            "package": pkg_version,
            "python": platform.python_version(),
            "numpy": np.__version__,
        },
    }
    mpath = out / "manifest.json"
    with open(mpath, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    written.append(mpath)

    if render_plots:
        from .plots import render_summary_figures

        written.extend(render_summary_figures(rows, out))
    return written
