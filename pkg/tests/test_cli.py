"""CLI subcommands end to end in temporary directories."""

import json
import subprocess
import sys

import pytest

from aegis.cli import build_parser, main
from aegis.metrics import METRIC_NAMES


@pytest.fixture
def cfg_file(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({
        "horizon": 8,
        "users": {"count": 3},
        "experiment": {"episodes": 1, "sweep_users": [3]},
    }))
    return path


def test_parser_requires_subcommand():
    with pytest.raises(SystemExit):
        build_parser().parse_args([])


class TestRun:
    def test_prints_metrics_json(self, cfg_file, capsys):
        rc = main(["run", "--config", str(cfg_file), "--policy", "EqualShare"])
        assert rc == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["policy"] == "EqualShare"
        assert payload["n_users"] == 3
        assert set(payload["metrics"]) == set(METRIC_NAMES)

    def test_out_file_matches_stdout(self, cfg_file, tmp_path, capsys):
        out = tmp_path / "o"
        rc = main(["run", "--config", str(cfg_file), "--policy", "BCLF",
                   "--out", str(out)])
        assert rc == 0
        text = capsys.readouterr().out
        assert (out / "episode_metrics.json").read_text() == text

    def test_users_and_seed_overrides(self, cfg_file, capsys):
        rc = main(["run", "--config", str(cfg_file), "--policy", "EqualShare",
                   "--users", "2", "--seed", "9"])
        assert rc == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["n_users"] == 2
        assert payload["seed"] == 9

    def test_unknown_policy_exits_one(self, cfg_file, capsys):
        rc = main(["run", "--config", str(cfg_file), "--policy", "Bogus"])
        assert rc == 1
        assert "error:" in capsys.readouterr().err


class TestSweep:
    def test_writes_outputs_and_figures(self, cfg_file, tmp_path, capsys):
        out = tmp_path / "res"
        rc = main(["sweep", "--config", str(cfg_file), "--out", str(out),
                   "--policy", "EqualShare"])
        assert rc == 0
        for name in ("metrics.csv", "manifest.json", "tir_vs_users.csv",
                     "reliability.png", "efficiency.png"):
            assert (out / name).exists(), name
        lines = (out / "metrics.csv").read_text().strip().splitlines()
        assert len(lines) == 2
        assert "wrote" in capsys.readouterr().out

    def test_no_plots_flag(self, cfg_file, tmp_path):
        out = tmp_path / "res"
        rc = main(["sweep", "--config", str(cfg_file), "--out", str(out),
                   "--policy", "EqualShare", "--no-plots"])
        assert rc == 0
        assert not (out / "reliability.png").exists()

    def test_rerun_is_byte_identical(self, cfg_file, tmp_path):
        out = tmp_path / "res"
        args = ["sweep", "--config", str(cfg_file), "--out", str(out),
                "--policy", "DeadlineFirst", "--no-plots"]
        assert main(args) == 0
        first = (out / "metrics.csv").read_bytes()
        assert main(args) == 0
        assert (out / "metrics.csv").read_bytes() == first

    def test_users_list_flag(self, cfg_file, tmp_path):
        out = tmp_path / "res"
        rc = main(["sweep", "--config", str(cfg_file), "--out", str(out),
                   "--policy", "EqualShare", "--users", "2,3", "--no-plots"])
        assert rc == 0
        lines = (out / "metrics.csv").read_text().strip().splitlines()
        assert len(lines) == 3

    def test_unknown_config_key_exits_one(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"bogus": 1}))
        rc = main(["sweep", "--config", str(bad), "--no-plots"])
        assert rc == 1
        assert "unknown config key" in capsys.readouterr().err


class TestAblation:
    def test_writes_summary(self, cfg_file, tmp_path, capsys):
        out = tmp_path / "abl"
        rc = main(["ablation", "--config", str(cfg_file), "--users", "3",
                   "--episodes", "2", "--out", str(out)])
        assert rc == 0
        summary = json.loads((out / "ablation.json").read_text())
        assert summary["n_users"] == 3
        assert summary["episodes"] == 2
        assert set(summary["wins_vs_nopred"]) == set(METRIC_NAMES)
        assert len(summary["rows"]) == 3
        assert (out / "ablation.csv").exists()
        assert "AEGISNoPred" in capsys.readouterr().out


class TestOracleCheck:
    def test_fast_suite_passes(self, capsys):
        rc = main(["oracle-check", "--fast"])
        out = capsys.readouterr().out
        assert rc == 0
        assert out.count("[PASS]") == 3
        assert "[FAIL]" not in out


def test_module_entry_point(cfg_file):
    proc = subprocess.run(
        [sys.executable, "-m", "aegis", "run", "--config", str(cfg_file),
         "--policy", "EqualShare"],
        capture_output=True, text=True, timeout=120)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["policy"] == "EqualShare"
