import csv
import json
import subprocess
import sys

import pytest

from modeconn.cli import run_command
from modeconn.io import load_graph, load_mode


def run_ok(capsys, *argv):
    code = run_command([str(a) for a in argv])
    out, err = capsys.readouterr()
    assert code == 0, err
    return json.loads(out)


def run_err(capsys, *argv):
    code = run_command([str(a) for a in argv])
    _, err = capsys.readouterr()
    return code, json.loads(err.strip().splitlines()[-1])


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    return tmp_path_factory.mktemp("cli")


@pytest.fixture(scope="module")
def graph_dir(workdir):
    out = workdir / "g"
    assert run_command(["gen-csbm", "--n", "80", "--d", "3", "--p-in", "0.15", "--p-out", "0.03",
                        "--seed", "2", "--out", str(out)]) == 0
    return out


@pytest.fixture(scope="module")
def checkpoints(workdir, graph_dir):
    paths = []
    for seed in (0, 1):
        p = workdir / f"m{seed}.ckpt"
        assert run_command(["train", "--graph", str(graph_dir), "--epochs", "20", "--hidden", "8",
                            "--seed", str(seed), "--out", str(p)]) == 0
        paths.append(p)
    return paths


def test_gen_csbm_round_trip(graph_dir, capsys):
    g = load_graph(graph_dir)
    assert g.n == 80 and g.d == 3
    cfg = json.loads((graph_dir / "config.json").read_text())
    assert cfg["seed"] == 2 and cfg["p_in"] == 0.15


def test_train_writes_checkpoint_and_sidecar(checkpoints):
    m = load_mode(checkpoints[0])
    assert m.metrics is not None and m.params.layer_dims == (3, 8, 2)


def test_barrier_of_identical_checkpoint_is_zero(capsys, graph_dir, checkpoints):
    rec = run_ok(capsys, "barrier", "--graph", graph_dir, "--a", checkpoints[0], "--b", checkpoints[0],
                 "--grid", 9)
    assert rec["loss_barrier"] == 0.0 and rec["kind"] == "linear"


def test_interpolate_dmc_and_bounds(capsys, workdir, graph_dir, checkpoints):
    a, b = checkpoints
    prof = workdir / "p.csv"
    run_ok(capsys, "interpolate", "--graph", graph_dir, "--a", a, "--b", b, "--grid", 7, "--out", prof)
    with open(prof) as f:
        rows = list(csv.reader(f))
    assert rows[0][0] == "alpha" and len(rows) == 8
    assert run_ok(capsys, "dmc", "--profile-a", prof, "--profile-b", prof)["d_mc"] == 0.0
    rep = run_ok(capsys, "bounds", "--graph", graph_dir, "--a", a, "--b", b, "--grid", 7,
                 "--p-in", 0.15, "--p-out", 0.03, "--out", workdir / "bounds.json")
    for key in ("theorem32_bound", "csbm_bound", "lower_bound", "gen_bound"):
        assert key in rep
    assert (workdir / "bounds.json").is_file()


def test_sweep_rows_and_report(capsys, workdir):
    out = workdir / "sweep"
    run_ok(capsys, "sweep", "--axis", "homophily", "--values", "0.55,0.7,0.9", "--n", 60, "--d", 3,
           "--p-in", 0.1, "--p-out", 0.05, "--epochs", 10, "--hidden", 8, "--grid", 5, "--no-bezier",
           "--out", out)
    with open(out / "sweep.csv") as f:
        rows = list(csv.reader(f))
    assert len(rows) == 1 + 9
    assert rows[0][0] == "axis"
    man = json.loads((out / "manifest.json").read_text())
    assert all(s["status"] == "ok" for s in man["status"])
    cfg = json.loads((out / "config.json").read_text())
    assert cfg["sweep"]["values"] == [0.55, 0.7, 0.9]
    summary = run_ok(capsys, "report", out)
    assert summary


def test_config_file_and_unknown_key(capsys, workdir):
    good = workdir / "good.json"
    good.write_text(json.dumps({"n": 40, "d": 2, "p_in": 0.2, "p_out": 0.05, "out": str(workdir / "g2")}))
    run_ok(capsys, "gen-csbm", "--config", good)
    assert load_graph(workdir / "g2").n == 40
    bad = workdir / "bad.json"
    bad.write_text(json.dumps({"n": 40, "bogus": 1}))
    code, err = run_err(capsys, "gen-csbm", "--config", bad, "--out", workdir / "g3")
    assert code == 25 and err["error"] == "ConfigError" and err["exit_code"] == 25


def test_error_records(capsys, workdir):
    code, err = run_err(capsys, "gen-csbm", "--n", 10, "--p-in", 2.0, "--out", workdir / "g4")
    assert code == 12 and err["error"] == "InvalidParamsError"
    (workdir / "broken").mkdir()
    code, err = run_err(capsys, "train", "--graph", workdir / "broken", "--out", workdir / "x.ckpt")
    assert code == 23 and "message" in err


def test_console_entry_point(graph_dir):
    proc = subprocess.run([sys.executable, "-m", "modeconn", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "sweep" in proc.stdout
