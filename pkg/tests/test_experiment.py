"""Sweep orchestration, ablation pairing, and output emission."""

import csv
import json

import pytest

from aegis.experiment import (
    ablation_pair,
    emit_outputs,
    run_cell,
    run_sweep,
    write_metrics_csv,
)
from aegis.metrics import METRIC_NAMES
from aegis.plots import render_summary_figures


@pytest.fixture(scope="module")
def sweep_rows(tiny_cfg_module):
    return run_sweep(tiny_cfg_module, policies=["AEGIS", "EqualShare"],
                     episodes=1)


@pytest.fixture(scope="module")
def tiny_cfg_module():
    from aegis import RunConfig
    return RunConfig({
        "horizon": 12,
        "users": {"count": 4},
        "experiment": {"episodes": 2, "sweep_users": [3, 4]},
    })


class TestRunCell:
    def test_counts_and_pairing(self, tiny_cfg_module):
        logs, mets = run_cell(tiny_cfg_module, "EqualShare", 3)
        assert len(logs) == len(mets) == 2
        assert [log.episode for log in logs] == [0, 1]
        assert all(log.policy == "EqualShare" for log in logs)
        assert all(log.n_users == 3 for log in logs)

    def test_explicit_episode_count(self, tiny_cfg_module):
        logs, _ = run_cell(tiny_cfg_module, "BCLF", 3, episodes=1)
        assert len(logs) == 1


class TestRunSweep:
    def test_row_grid(self, sweep_rows):
        assert len(sweep_rows) == 4
        assert [(r.n_users, r.policy) for r in sweep_rows] == [
            (3, "AEGIS"), (3, "EqualShare"), (4, "AEGIS"), (4, "EqualShare")]
        assert all(r.episodes == 1 for r in sweep_rows)

    def test_streaming_callback_order(self, tiny_cfg_module):
        seen = []
        rows = run_sweep(tiny_cfg_module, n_users_list=[3],
                         policies=["EqualShare"], episodes=1,
                         on_row=seen.append)
        assert seen == rows
        assert len(rows) == 1

    def test_defaults_come_from_config(self, tiny_cfg_module):
        rows = run_sweep(tiny_cfg_module, policies=["DeadlineFirst"],
                         episodes=1)
        assert [r.n_users for r in rows] == [3, 4]


class TestAblationPair:
    def test_shape_and_wins(self, tiny_cfg_module):
        res = ablation_pair(tiny_cfg_module, n_users=3)
        assert res["n_users"] == 3
        assert res["episodes"] == 2
        assert [r.policy for r in res["rows"]] == [
            "AEGIS", "AEGISNoBudget", "AEGISNoPred"]
        assert set(res["wins_vs_nopred"]) == set(METRIC_NAMES)
        assert all(0 <= w <= 2 for w in res["wins_vs_nopred"].values())
        # recount one metric from the per-episode records
        base = res["per_episode"]["AEGIS"]
        nopred = res["per_episode"]["AEGISNoPred"]
        tir_wins = sum(int(a.value("tir") > b.value("tir"))
                       for a, b in zip(base, nopred))
        assert res["wins_vs_nopred"]["tir"] == tir_wins


class TestCsvOutputs:
    def test_metrics_csv_round_trips(self, sweep_rows, tmp_path):
        path = tmp_path / "metrics.csv"
        write_metrics_csv(sweep_rows, path)
        with open(path, newline="") as fh:
            records = list(csv.DictReader(fh))
        assert len(records) == len(sweep_rows)
        for rec, row in zip(records, sweep_rows):
            assert rec["policy"] == row.policy
            assert int(rec["n_users"]) == row.n_users
            for name in METRIC_NAMES:
                assert float(rec[f"{name}_mean"]) == row.mean(name)
                assert float(rec[f"{name}_std"]) == row.std(name)

    def test_emit_outputs_file_set(self, sweep_rows, tiny_cfg_module, tmp_path):
        out = tmp_path / "res"
        written = emit_outputs(sweep_rows, out, tiny_cfg_module,
                               render_plots=False)
        names = {p.name for p in written}
        expect = {"metrics.csv", "manifest.json"}
        expect |= {f"{m}_vs_users.csv" for m in METRIC_NAMES}
        assert names == expect
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config_digest"] == tiny_cfg_module.digest
        assert manifest["seed"] == tiny_cfg_module.seed
        assert "numpy" in manifest["versions"]

    def test_emit_outputs_idempotent_bytes(self, sweep_rows, tiny_cfg_module,
                                           tmp_path):
        out = tmp_path / "res"
        emit_outputs(sweep_rows, out, tiny_cfg_module, render_plots=False)
        first = {p.name: p.read_bytes() for p in out.iterdir()}
        emit_outputs(sweep_rows, out, tiny_cfg_module, render_plots=False)
        second = {p.name: p.read_bytes() for p in out.iterdir()}
        assert first == second

    def test_metric_series_content(self, sweep_rows, tiny_cfg_module, tmp_path):
        out = tmp_path / "res"
        emit_outputs(sweep_rows, out, tiny_cfg_module, render_plots=False)
        with open(out / "tir_vs_users.csv", newline="") as fh:
            recs = list(csv.DictReader(fh))
        assert len(recs) == len(sweep_rows)
        lookup = {(r.policy, r.n_users): r for r in sweep_rows}
        for rec in recs:
            row = lookup[(rec["policy"], int(rec["n_users"]))]
            assert float(rec["mean"]) == row.mean("tir")


class TestFigures:
    def test_renders_both_panels(self, sweep_rows, tmp_path):
        paths = render_summary_figures(sweep_rows, tmp_path)
        assert {p.name for p in paths} == {"reliability.png", "efficiency.png"}
        for p in paths:
            blob = p.read_bytes()
            assert blob[:8] == b"\x89PNG\r\n\x1a\n"
            assert len(blob) > 1000

    def test_emit_outputs_includes_figures(self, sweep_rows, tiny_cfg_module,
                                           tmp_path):
        written = emit_outputs(sweep_rows, tmp_path / "res", tiny_cfg_module,
                               render_plots=True)
        names = {p.name for p in written}
        assert {"reliability.png", "efficiency.png"} <= names
