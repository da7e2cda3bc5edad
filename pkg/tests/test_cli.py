import json
import shutil
import subprocess
import sys

import numpy as np
import pytest

from adaptfunc.cli import main

EXP = {"model": {"problem": "quadratic",
                 "functions": {"b": {"kind": "holder", "beta": 0.25, "M": 0.5, "offset": 0.5, "range": [0.05, 0.95]}}},
       "pipeline": {}, "n_grid": [200, 400, 800], "reps": 3, "seed": 1}
LB = {"problem": "treatment", "alpha": 2.0, "beta": 2.5, "prime": 2.0, "k": [2, 4, 3], "n": [1, 2, 3],
      "C": [1.0, 2.0], "eps": 0.1}


def put(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(json.dumps(obj) if not isinstance(obj, str) else obj)
    return str(p)


def data_csv(tmp_path, n=900, with_a=False):
    rng = np.random.default_rng(0)
    x = rng.random(n)
    y = (rng.random(n) < 0.3 + 0.4 * x).astype(int)
    lines = ["y,a,x1" if with_a else "y,x1"]
    for i in range(n):
        a = int(rng.random() < 0.5)
        lines.append(f"{y[i]},{a},{float(x[i])!r}" if with_a else f"{y[i]},{float(x[i])!r}")
    return put(tmp_path, "d.csv", "\n".join(lines) + "\n")


def run_twice(tmp_path, argv, files):
    outs = []
    for tag in ("a", "b"):
        d = tmp_path / tag
        assert main(argv + ["--out", str(d)]) == 0
        outs.append({f: (d / f).read_bytes() for f in files})
    return outs


def test_simulate_deterministic(tmp_path):
    cfg = put(tmp_path, "exp.json", EXP)
    a, b = run_twice(tmp_path, ["simulate", "--config", cfg, "--seed", "5", "--trace"],
                     ["results.csv", "summary.json", "trace.json"])
    assert a == b
    s = json.loads(a["summary.json"])
    assert s["config"]["seed"] == 5 and "rate_fit" in s


def test_estimate_deterministic_and_fields(tmp_path):
    path = data_csv(tmp_path)
    a, b = run_twice(tmp_path, ["estimate", "--problem", "quadratic", "--input", path],
                     ["estimate.json"])
    assert a == b
    out = json.loads(a["estimate.json"])
    assert out["n_records"] == 900 and "trace" not in out
    assert 0.0 <= out["estimate"] <= 1.0


def test_estimate_trace_flag(tmp_path, capsys):
    path = data_csv(tmp_path)
    assert main(["estimate", "--problem", "quadratic", "--input", path, "--trace"]) == 0
    assert "trace" in json.loads(capsys.readouterr().out)


def test_lowerbound_deterministic_and_invalid_k(tmp_path):
    cfg = put(tmp_path, "lb.json", LB)
    a, b = run_twice(tmp_path, ["lowerbound", "--config", cfg], ["lowerbound.json"])
    assert a == b
    sweep = json.loads(a["lowerbound.json"])["sweep"]
    assert [e["k"] for e in sweep] == [2, 4, 3]
    row = sweep[1]["rows"][0]
    assert row["chi2_bruteforce"] >= 0 and "C0" in row and "risk_rhs" in row


def test_lowerbound_reports_infeasible_k(tmp_path, capsys):
    cfg = put(tmp_path, "lb.json", {"problem": "treatment", "alpha": 0.25, "beta": 0.3, "prime": 0.25,
                                   "k": [16], "n": [2]})
    assert main(["lowerbound", "--config", cfg]) == 0
    assert "invalid" in json.loads(capsys.readouterr().out)["sweep"][0]


def test_wavelet_check_deterministic(tmp_path):
    cfg = put(tmp_path, "w.json", {"families": ["haar"], "d": [1, 2], "extra_levels": 2})
    a, b = run_twice(tmp_path, ["wavelet-check", "--config", cfg], ["wavelet_check.json"])
    assert a == b
    rep = json.loads(a["wavelet_check.json"])["reports"]
    assert all(r["orthonormality_delta"] <= 1e-6 for r in rep)


def test_calibrate_deterministic(tmp_path):
    cfg = put(tmp_path, "c.json", {"constants": ["C_opt"], "n": 200, "reps": 50})
    a, b = run_twice(tmp_path, ["calibrate", "--config", cfg, "--seed", "2"], ["calibration.json"])
    assert a == b
    assert json.loads(a["calibration.json"])["C_opt"]["seed"] == 2


def test_exit_code_missing_file(tmp_path):
    assert main(["simulate", "--config", str(tmp_path / "nope.json")]) == 3


def test_exit_code_unwritable_out(tmp_path):
    cfg = put(tmp_path, "lb.json", LB)
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["lowerbound", "--config", cfg, "--out", str(blocker / "sub")]) == 3


def test_exit_code_bad_json(tmp_path):
    assert main(["simulate", "--config", put(tmp_path, "b.json", "{not json")]) == 2


def test_exit_code_unknown_key(tmp_path):
    path = data_csv(tmp_path)
    cfg = put(tmp_path, "p.json", {"problem": "quadratic", "bogus": 1})
    assert main(["estimate", "--input", path, "--config", cfg]) == 2


def test_exit_code_missing_treatment_column(tmp_path):
    path = data_csv(tmp_path)
    assert main(["estimate", "--problem", "treatment", "--input", path]) == 2


def test_exit_code_bad_covariate_columns(tmp_path):
    path = put(tmp_path, "x.csv", "y,x2\n1,0.5\n")
    assert main(["estimate", "--problem", "quadratic", "--input", path]) == 2


def test_threads_env_contract(tmp_path, monkeypatch):
    monkeypatch.setenv("ADAPTIVE_FUNC_THREADS", "lots")
    assert main(["simulate", "--config", put(tmp_path, "exp.json", EXP)]) == 2


@pytest.mark.skipif(shutil.which("adaptfunc") is None, reason="console script not installed")
def test_console_script(tmp_path):
    cfg = put(tmp_path, "lb.json", LB)
    r = subprocess.run(["adaptfunc", "lowerbound", "--config", cfg], capture_output=True, text=True)
    assert r.returncode == 0 and json.loads(r.stdout)["sweep"]
    r = subprocess.run([sys.executable, "-m", "adaptfunc.cli", "simulate", "--config", "/nonexistent"],
                       capture_output=True, text=True)
    assert r.returncode == 3 and "error" in r.stderr
