"""Command-line front end.

Subcommands: run (one episode), sweep (full policy-by-users table),
ablation (paired-seed comparison at one user count), oracle-check (the
scheduler property suites).  Exit codes: 0 success, 1 failed checks or
bad arguments, 2 runtime invariant breach.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .baselines import PolicyTag
from .checks import run_all_checks
from .config import RunConfig, load_config
from .experiment import ablation_pair, emit_outputs, run_sweep, write_metrics_csv
from .harness import HarnessInvariantError, run_episode
from .metrics import METRIC_NAMES, compute_metrics

__all__ = ["build_parser", "main"]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="aegis",
        description="Deadline-sensitive edge inference scheduling experiments",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp: argparse.ArgumentParser, users_list: bool) -> None:
        sp.add_argument("--config", type=Path, default=None, help="JSON config file")
        sp.add_argument("--seed", type=int, default=None, help="master seed override")
        sp.add_argument("--out", type=Path, default=None, help="output directory")
        if users_list:
            sp.add_argument(
                "--users",
                type=str,
                default=None,
                help="comma-separated user counts (default: config sweep)",
            )
        else:
            sp.add_argument("--users", type=int, default=None, help="user count")

    run_p = sub.add_parser("run", help="run one episode and print its metrics")
    common(run_p, users_list=False)
    run_p.add_argument(
        "--policy",
        type=str,
        default=PolicyTag.AEGIS.value,
        help="policy tag (default AEGIS)",
    )
    run_p.add_argument("--episode", type=int, default=0, help="episode index")

    sweep_p = sub.add_parser("sweep", help="run the full sweep and write outputs")
    common(sweep_p, users_list=True)
    sweep_p.add_argument(
        "--policy", type=str, default=None, help="restrict the sweep to one policy"
    )
    sweep_p.add_argument("--episodes", type=int, default=None)
    sweep_p.add_argument(
        "--no-plots", action="store_true", help="skip figure rendering"
    )

    abl_p = sub.add_parser("ablation", help="paired-seed ablation comparison")
    common(abl_p, users_list=False)
    abl_p.add_argument("--episodes", type=int, default=None)

    chk_p = sub.add_parser("oracle-check", help="scheduler property suites")
    chk_p.add_argument(
        "--fast", action="store_true", help="reduced fixture counts for smoke runs"
    )
    return p


def _load(args: argparse.Namespace) -> RunConfig:
    raw = load_config(args.config)
    if args.seed is not None:
        raw["seed"] = int(args.seed)
    return RunConfig(raw)


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = _load(args)
    log = run_episode(
        cfg, args.policy, n_users=args.users, episode=args.episode
    )
    met = compute_metrics(log)
    payload = {
        "policy": log.policy,
        "n_users": log.n_users,
        "episode": log.episode,
        "seed": log.master_seed,
        "metrics": {name: met.value(name) for name in METRIC_NAMES},
        "flags": list(met.flags),
    }
    text = json.dumps(payload, indent=2, sort_keys=True)
    print(text)
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "episode_metrics.json").write_text(text + "\n", encoding="utf-8")
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _load(args)
    sizes = None
    if args.users:
        sizes = [int(s) for s in args.users.split(",") if s]
    policies = [args.policy] if args.policy else None
    out = args.out if args.out is not None else Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    done: list = []

    def on_row(row) -> None:
        done.append(row)
        write_metrics_csv(done, out / "metrics.csv")
        print(
            f"{row.policy} n={row.n_users}: "
            + " ".join(f"{m}={row.mean(m):.4f}" for m in METRIC_NAMES)
        )

    rows = run_sweep(
        cfg, n_users_list=sizes, policies=policies, episodes=args.episodes,
        on_row=on_row,
    )
    written = emit_outputs(rows, out, cfg, render_plots=not args.no_plots)
    for path in written:
        print(f"wrote {path}")
    return 0


def _cmd_ablation(args: argparse.Namespace) -> int:
    cfg = _load(args)
    n = args.users if args.users is not None else 20
    result = ablation_pair(cfg, n_users=n, episodes=args.episodes)
    rows = result["rows"]
    print(json.dumps(result["wins_vs_nopred"], indent=2, sort_keys=True))
    for row in rows:
        print(
            f"{row.policy}: "
            + " ".join(f"{m}={row.mean(m):.4f}" for m in METRIC_NAMES)
        )
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        write_metrics_csv(rows, args.out / "ablation.csv")
        summary = {
            "n_users": result["n_users"],
            "episodes": result["episodes"],
            "wins_vs_nopred": result["wins_vs_nopred"],
            "rows": [
                {
                    k: v
                    for k, v in dataclasses.asdict(row).items()
                }
                for row in rows
            ],
        }
        (args.out / "ablation.json").write_text(
            json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    return 0


def _cmd_oracle_check(args: argparse.Namespace) -> int:
    reports = run_all_checks(fast=args.fast)
    ok = True
    for rep in reports:
        print(rep.summary())
        ok = ok and rep.passed
    return 0 if ok else 1


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "sweep": _cmd_sweep,
        "ablation": _cmd_ablation,
        "oracle-check": _cmd_oracle_check,
    }
    try:
        return handlers[args.command](args)
    except HarnessInvariantError as exc:
        print(f"invariant breach: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
