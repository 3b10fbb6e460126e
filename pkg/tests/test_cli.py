import csv
import json

import numpy as np
import pytest

from fraclab import __version__
from fraclab.cli import main
from fraclab.io import round_sig


def run(tmp_path, *args):
    return main([*args, "--out", str(tmp_path)])


def read_csv(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith(f"# fraclab {__version__}")
    return list(csv.reader(lines[1:]))


def test_solve_writes_files(tmp_path):
    code = run(tmp_path, "solve", "--domain", "ball", "--s", "0.5", "--lambda", "0", "--p", "2", "--n", "1025")
    assert code == 0
    rows = read_csv(tmp_path / "solution.csv")
    assert rows[0] == ["x", "u"]
    u = np.array([float(r[1]) for r in rows[1:]])
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["results"]["u0"] == pytest.approx(u.max(), rel=1e-11)
    assert summary["results"]["residual"] <= 1e-9
    assert (tmp_path / "solution.svg").exists()


def test_bad_order_exit_one(tmp_path, capsys):
    assert run(tmp_path, "solve", "--s", "1.5") == 1
    assert "(0, 1)" in capsys.readouterr().err


def test_supercritical_exit_one(tmp_path):
    assert run(tmp_path, "solve", "--s", "0.25", "--p", "3.2", "--n", "129") == 1


def test_unknown_config_key(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"s": 0.5, "bogus": 1}))
    assert run(tmp_path, "solve", "--config", str(cfg)) == 1


def test_flags_override_config(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"s": 0.5, "p": 3.0, "n": 129}))
    assert run(tmp_path / "o", "solve", "--config", str(cfg), "--p", "2.0", "--no-plot") == 0
    params = json.loads((tmp_path / "o" / "summary.json").read_text())["params"]
    assert params["p"] == 2.0 and params["n"] == 129


def test_spectrum_odd_rows(tmp_path):
    assert run(tmp_path, "spectrum", "--sector", "odd", "--k", "3", "--n", "257") == 0
    rows = read_csv(tmp_path / "eigenvalues.csv")
    assert rows[0] == ["k", "Lambda", "sector"]
    assert len(rows) == 4
    assert all(r[2] == "odd" for r in rows[1:])


def test_extend_lorentzian(tmp_path):
    assert run(tmp_path, "extend", "--trace", "lorentzian", "--s", "0.5") == 0
    summary = json.loads((tmp_path / "summary.json").read_text())["results"]
    assert summary["pde_residual"] <= 1e-2 * summary["field_max"]
    assert (tmp_path / "extension.png").exists()


def test_picone_command(tmp_path):
    assert run(tmp_path, "picone", "--n", "257", "--seed", "3") == 0
    res = json.loads((tmp_path / "summary.json").read_text())["results"]
    assert res["within"] and res["rhs"] >= 0
    assert (tmp_path / "picone_H.png").exists()


def test_branch_increasing(tmp_path):
    assert run(tmp_path, "branch", "--p-start", "1.2", "--p-end", "4", "--n", "129") == 0
    rows = read_csv(tmp_path / "branch.csv")
    p = np.array([float(r[0]) for r in rows[1:]])
    assert p.size >= 2 and np.all(np.diff(p) > 0)


def test_verify_only_picone(tmp_path):
    assert run(tmp_path, "verify", "--only", "picone") == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert [c["group"] for c in report["results"]["criteria"]] == ["picone"]


def test_verify_zero_tolerance(tmp_path):
    assert run(tmp_path, "verify", "--only", "operator", "--tol-scale", "0") == 3


def test_json_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert main(["spectrum", "--n", "129", "--no-plot", "--out", str(d)]) == 0
    assert (a / "summary.json").read_bytes() == (b / "summary.json").read_bytes()


def test_thread_env(tmp_path, monkeypatch):
    monkeypatch.setenv("FRACLAB_THREADS", "1")
    assert run(tmp_path, "solve", "--n", "129", "--no-plot") == 0
    monkeypatch.setenv("FRACLAB_THREADS", "zero")
    assert run(tmp_path, "solve", "--n", "129", "--no-plot") == 1


def test_round_sig():
    assert round_sig(1 / 3) == 0.333333333333
    assert round_sig(float("nan")) is None
    assert round_sig({"a": [np.float64(2.0), float("inf")]}) == {"a": [2.0, None]}
