import json
import subprocess
import sys

import pytest

CLI = [sys.executable, "-m", "fqlems.cli"]


def run(*args, cwd=None):
    return subprocess.run(CLI + list(args), capture_output=True, text=True,
                          cwd=cwd, timeout=300)


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    # full default run: slow-ish but shared by every test below, and the
    # stock agent is known to finish evaluation without a boundary exit
    out = tmp_path_factory.mktemp("cli_train")
    r = run("train", "--out-dir", str(out / "run"))
    assert r.returncode == 0, r.stderr
    return out / "run"


def test_train_writes_artifacts(trained):
    assert (trained / "agent.json").exists()
    assert (trained / "training_curve.csv").exists()
    assert (trained / "resolved_config.txt").exists()


def test_train_determinism(tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    for out in (a, b):
        r = run("train", "--episodes", "1", "--seed", "17",
                "--out-dir", str(out))
        assert r.returncode == 0, r.stderr
    assert (a / "agent.json").read_bytes() == (b / "agent.json").read_bytes()


def test_train_missing_cycle_exits_2(tmp_path):
    r = run("train", "--cycle", "/missing/cycle.csv",
            "--out-dir", str(tmp_path / "x"))
    assert r.returncode == 2
    assert "/missing/cycle.csv" in r.stderr


def test_eval_report_and_trajectory(trained, tmp_path, udds):
    out = tmp_path / "eval"
    r = run("eval", "--agent", str(trained / "agent.json"),
            "--repeat", "2", "--out-dir", str(out))
    assert r.returncode == 0, r.stderr
    doc = json.loads((out / "eval_report.json").read_text())
    assert len(doc["repetitions"]) == 2
    first = doc["repetitions"][0]
    lines = (out / "trajectory.csv").read_text().strip().splitlines()
    assert len(lines) == first["steps"] + 1
    # a completed repetition spans the whole cycle
    assert first["completed"]
    assert len(lines) == len(udds)


def test_eval_rejects_bad_soc(trained, tmp_path):
    r = run("eval", "--agent", str(trained / "agent.json"),
            "--soc0", "1.5", "--out-dir", str(tmp_path / "y"))
    assert r.returncode == 2
    assert "soc0" in r.stderr


def test_eval_missing_agent_exits_2(tmp_path):
    r = run("eval", "--agent", str(tmp_path / "ghost.json"),
            "--out-dir", str(tmp_path / "z"))
    assert r.returncode == 2


def test_calibrate_stdout_json():
    r = run("calibrate")
    assert r.returncode == 0, r.stderr
    doc = json.loads(r.stdout)
    assert set(doc) >= {"r_ohm", "nernst_offset", "i_lim", "residuals"}
    assert all(abs(item["rel_err"]) <= 0.05 for item in doc["residuals"])


def test_calibrate_impossible_anchor_exits_1():
    r = run("calibrate", "--i-peak-a", "10")
    assert r.returncode == 1
    assert "calibration failed" in r.stderr


def test_compare_two_rows(tmp_path):
    cfgf = tmp_path / "tiny.cfg"
    cfgf.write_text("train.episodes = 2\ntrain.seed = 11\n")
    r = run("compare", "--config", str(cfgf), "--seeds", "1")
    assert r.returncode == 0, r.stderr
    body = [ln for ln in r.stdout.splitlines() if ln.strip()]
    data_rows = [ln for ln in body if ln.lstrip()[0].isdigit()]
    assert len(data_rows) == 2


def test_unknown_config_key_exits_2(tmp_path):
    cfgf = tmp_path / "bad.cfg"
    cfgf.write_text("warp.factor = 9\n")
    r = run("train", "--config", str(cfgf), "--out-dir", str(tmp_path / "o"))
    assert r.returncode == 2
    assert "warp.factor" in r.stderr
