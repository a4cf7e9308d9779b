"""The cfwd command: subcommands, flags, exit codes, failure dumps."""

from __future__ import annotations

import json

import pytest

import cfwd.cli as cli
from cfwd import InvariantViolation
from cfwd.cli import main

PLAN_TEXT = """\
name: cli-test
n: 16
dt: 1.0e-3
t_end: 0.01
seed: 5
replicas: 2
potential: levels:4
initial: identity
snapshot_stride: 2
pair_probes: [[3, 4]]
h_probes: [[0.0, 0.25]]
"""


@pytest.fixture
def plan_file(tmp_path):
    path = tmp_path / "plan.yaml"
    path.write_text(PLAN_TEXT)
    return path


def test_run_writes_results(plan_file, tmp_path, capsys):
    out = tmp_path / "results"
    assert main(["run", str(plan_file), "--out", str(out)]) == 0
    assert (out / "counts.csv").exists()
    assert (out / "summary.json").exists()
    captured = capsys.readouterr()
    assert "levels:4" in captured.out
    assert str(out) in captured.out


def test_run_quiet(plan_file, tmp_path, capsys):
    assert main(["run", str(plan_file), "--out", str(tmp_path / "o"), "--quiet"]) == 0
    assert capsys.readouterr().out == ""


def test_run_overrides(plan_file, tmp_path):
    out = tmp_path / "o"
    assert (
        main(
            ["run", str(plan_file), "--out", str(out), "--replicas", "3",
             "--seed", "77", "--quiet"]
        )
        == 0
    )
    summary = json.loads((out / "summary.json").read_text())
    assert summary["plan"]["replicas"] == 3
    assert summary["plan"]["config"]["seed"] == 77
    assert summary["points"][0]["replicas"] == 3


def test_run_uses_env_default_out(plan_file, tmp_path, monkeypatch):
    monkeypatch.setenv("CFWD_OUT_DIR", str(tmp_path / "envout"))
    assert main(["run", str(plan_file), "--quiet"]) == 0
    assert (tmp_path / "envout" / "cli-test" / "summary.json").exists()


def test_usage_errors_exit_1(capsys):
    assert main([]) == 1
    assert main(["frobnicate"]) == 1
    assert main(["run"]) == 1


def test_help_exits_0(capsys):
    assert main(["--help"]) == 0
    assert "cfwd" in capsys.readouterr().out


def test_missing_plan_is_io_error(tmp_path, capsys):
    assert main(["run", str(tmp_path / "nope.yaml")]) == 3
    assert "error" in capsys.readouterr().err


def test_bad_plan_is_config_error(tmp_path, capsys):
    path = tmp_path / "bad.yaml"
    path.write_text("n: 16\ndt: 1.0e-3\nt_end: 0.01\nseed: 1\npotential: levels:0\n")
    assert main(["run", str(path)]) == 1
    assert "level count" in capsys.readouterr().err


def test_sweep_requires_sweep_section(plan_file, tmp_path, capsys):
    assert main(["sweep", str(plan_file), "--out", str(tmp_path / "o")]) == 1
    assert "no sweep section" in capsys.readouterr().err


def test_sweep_prints_growth_table(tmp_path, capsys):
    path = tmp_path / "sweep.yaml"
    path.write_text(
        PLAN_TEXT
        + "sweep:\n  potential: [levels:1, levels:4]\n"
    )
    out = tmp_path / "o"
    assert main(["sweep", str(path), "--out", str(out)]) == 0
    captured = capsys.readouterr().out
    assert "mean sup #X" in captured
    assert (out / "sweep.csv").exists()
    assert (out / "levels_1" / "counts.csv").exists()


def test_invariant_violation_exits_2_with_dump(plan_file, tmp_path, monkeypatch, capsys):
    def explode(plan, workers=1):
        raise InvariantViolation(
            "order", 7, "post-step state is not non-decreasing", {"t": 0.007}
        )

    monkeypatch.setattr(cli, "run_plan", explode)
    out = tmp_path / "o"
    assert main(["run", str(plan_file), "--out", str(out)]) == 2
    err = capsys.readouterr().err
    assert "order" in err
    dump = json.loads((out / "violation.json").read_text())
    assert dump["kind"] == "order"
    assert dump["step_index"] == 7


def test_check_passes(capsys):
    assert main(["check"]) == 0
    out = capsys.readouterr().out
    assert "all checks passed" in out
    assert "projection identities" in out


def test_check_quiet(capsys):
    assert main(["check", "--quiet"]) == 0
    assert capsys.readouterr().out == "all checks passed\n"
