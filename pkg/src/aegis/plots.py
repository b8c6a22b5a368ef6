"""Headless rendering of the sweep summary figures.

Two three-panel figures: reliability.png (timely ratio, decision risk,
violation bursts) and efficiency.png (admitted delay, utility,
convergence rounds), each metric against the user count with one
errorbar line per policy.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .metrics import MetricsRow

__all__ = ["render_summary_figures"]

_PANELS = {
    "reliability.png": (
        ("tir", "Timely inference ratio"),
        ("avr", "Average violation risk"),
        ("dvbl", "Violation burst length (slots)"),
    ),
    "efficiency.png": (
        ("aed", "Admitted delay (s)"),
        ("asu", "Scheduling utility"),
        ("cr", "Convergence rounds"),
    ),
}


def _series(rows: Sequence[MetricsRow], policy: str, name: str):
    pts = sorted((r.n_users, r.mean(name), r.std(name)) for r in rows if r.policy == policy)
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    es = [p[2] for p in pts]
    return xs, ys, es


def render_summary_figures(
    rows: Sequence[MetricsRow], out_dir: str | Path
) -> list[Path]:
    """Render both summary figures; returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    policies = list(dict.fromkeys(r.policy for r in rows))
    written: list[Path] = []
    for fname, panels in _PANELS.items():
        fig, axes = plt.subplots(1, 3, figsize=(13.5, 4.0))
        for ax, (name, label) in zip(axes, panels):
            for policy in policies:
                xs, ys, es = _series(rows, policy, name)
                if not xs:
                    continue
                ax.errorbar(xs, ys, yerr=es, marker="o", capsize=3, label=policy)
            ax.set_xlabel("Number of users")
            ax.set_ylabel(label)
            ax.grid(True, alpha=0.3)
        axes[0].legend(fontsize=8)
        fig.tight_layout()
        path = out / fname
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(path)
    return written
