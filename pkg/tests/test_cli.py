import json
import math
import subprocess
import sys

import numpy as np
import pytest

from autobid import harness
from autobid.cli import dumps, main
from autobid.config import parse

MINIMAL = """\
env: {kind: point_mass, v: 0.8, d: 0.3}
policy: {kind: fixed, bid: 0.5}
payment: {rule: first}
constraints: {rho: 1.0}
T: 10
seeds: [0]
"""

STOCHASTIC = """\
env:
  kind: product
  values: [0.25, 0.5, 0.75, 1.0]
  value_probs: [0.25, 0.25, 0.25, 0.25]
  bids: [0.0, 0.25, 0.5, 0.75, 1.0]
  bid_probs: [0.2, 0.2, 0.2, 0.2, 0.2]
policy: {kind: poly, lipschitz: 1.0}
payment: {rule: first}
constraints: {rho: 0.5}
T: 150
seeds: [0, 1, 2]
horizons: [50, 100]
"""


def write(tmp_path, text, name="c.yaml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def golden_minimal():
    # Every round wins at 0.8 and pays 0.5; both multipliers stay at 0.
    rows = ["t,v,d,bid,won,payment,lambda,mu,chi,psi,u_cap,budget_remaining,roi_slack,"
            "policy_tag,cum_objective"]
    for t in range(1, 11):
        rows.append(f"{t},0.8,0.3,0.5,1,0.5,0,0,1,0,1,{10 - 0.5 * t:.12g},"
                    f"{0.3 * t:.12g},primal,{0.8 * t:.12g}")
    return "\n".join(rows) + "\n"


def test_run_writes_golden_trace(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["run", "--config", write(tmp_path, MINIMAL), "--out", str(out)]) == 0
    got = (out / "trace_T10_seed0.csv").read_text()
    assert got == golden_minimal()
    summary = json.loads((out / "summary.json").read_text())
    assert summary["opt_per_round"] == pytest.approx(0.8)
    run = summary["runs"][0]
    assert run["cum_objective"] == pytest.approx(8.0)
    assert run["regret"] == pytest.approx(0.0, abs=1e-12)
    assert run["metadata"]["policy"] == "fixed"
    assert "seed 0: objective 8" in capsys.readouterr().out


def test_run_is_byte_identical_across_invocations_and_threads(tmp_path):
    cfg = write(tmp_path, STOCHASTIC)
    dirs = []
    for k, threads in enumerate(["1", "1", "3"]):
        d = tmp_path / f"r{k}"
        assert main(["run", "--config", cfg, "--out", str(d), "--threads", threads]) == 0
        dirs.append(d)
    names = sorted(p.name for p in dirs[0].glob("trace_*.csv"))
    assert names == [f"trace_T150_seed{s}.csv" for s in range(3)]
    for name in names:
        blobs = {(d / name).read_bytes() for d in dirs}
        assert len(blobs) == 1


def test_seed_flag_overrides_config(tmp_path):
    out = tmp_path / "o"
    assert main(["run", "--config", write(tmp_path, STOCHASTIC), "--seed", "7",
                 "--out", str(out)]) == 0
    assert [p.name for p in out.glob("*.csv")] == ["trace_T150_seed7.csv"]


def test_oracle_reports_tight_beta_value(tmp_path, capsys):
    text = "env: {kind: tight_beta, beta: 0.25}\npolicy: {kind: tree}\npayment: {rule: second}\n"
    assert main(["oracle", "--config", write(tmp_path, text), "--out", str(tmp_path)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["value"] == pytest.approx(0.75, abs=1e-12)
    assert json.loads((tmp_path / "oracle.json").read_text()) == report


def test_sweep_outputs(tmp_path, capsys):
    out = tmp_path / "s"
    assert main(["sweep", "--config", write(tmp_path, STOCHASTIC), "--out", str(out),
                 "--threads", "2"]) == 0
    lines = (out / "sweep.csv").read_text().splitlines()
    assert lines[0] == "T,opt_per_round,mean_regret,std_regret,n"
    assert [int(l.split(",")[0]) for l in lines[1:]] == [50, 100]
    result = json.loads((out / "sweep.json").read_text())
    assert np.array(result["regrets"]).shape == (2, 3)
    assert "slope:" in capsys.readouterr().out


def test_probe_selected_suite(tmp_path, capsys):
    assert main(["probe", "--suite", "masses", "--out", str(tmp_path)]) == 0
    assert capsys.readouterr().out.startswith("PASS lower_bound_masses")
    assert json.loads((tmp_path / "probe.json").read_text())[0]["passed"] is True


@pytest.mark.parametrize("argv, code", [
    (["run", "--config", "/nonexistent/c.yaml"], 4),
    (["probe", "--suite", "nope"], 2),
    (["run", "--threads", "0"], 2),
])
def test_exit_codes(argv, code, capsys):
    assert main(argv) == code


def test_invalid_config_exit_code(tmp_path, capsys):
    assert main(["run", "--config", write(tmp_path, "T: -1\n")]) == 2
    assert "T must be a positive integer" in capsys.readouterr().err


def test_unwritable_output_exit_code(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["run", "--config", write(tmp_path, MINIMAL), "--out",
                 str(blocker / "sub")]) == 4


def test_sweep_needs_two_horizons(tmp_path):
    assert main(["sweep", "--config", write(tmp_path, MINIMAL)]) == 2


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "autobid", "probe", "--suite", "masses"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and "PASS" in res.stdout


def test_dumps_replaces_infinities():
    assert json.loads(dumps({"a": math.inf, "b": np.float64(0.5), "c": [np.int64(2)]})) == {
        "a": None, "b": 0.5, "c": [2]}


# Regret stubs with known scaling; module level so they can be pickled.
def sqrt_regret(args):
    return math.sqrt(args[1])


def linear_regret(args):
    return float(args[1]) * (1.0 + 1e-3 * args[2])


def test_sweep_slope_recovers_known_exponents():
    cfg = parse(MINIMAL)
    res = harness.sweep(cfg, [100, 400, 1600], [0, 1], regret_fn=sqrt_regret)
    assert res["slope"] == pytest.approx(0.5, abs=1e-6)
    res = harness.sweep(cfg, [100, 400, 1600], [0, 1], threads=2, regret_fn=linear_regret)
    assert res["slope"] == pytest.approx(1.0, abs=1e-6)
    assert res["rows"][0]["std_regret"] == pytest.approx(np.std([100, 100.1], ddof=1))


def test_fit_slope_drops_nonpositive_means():
    slope, notes = harness.fit_slope([10, 100, 1000], [-1.0, 10.0, 100.0])
    assert slope == pytest.approx(1.0)
    assert notes and "T=10 excluded" in notes[0]
    assert harness.fit_slope([10, 100], [0.0, 5.0])[0] is None
