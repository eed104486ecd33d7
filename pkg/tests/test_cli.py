import csv
import io
import json
import math

import numpy as np

from entacc import cli
from entacc.eat import TradeoffFunction, rate_curve
from entacc.linalg import Operator, SystemLayout, operator_to_dict

from conftest import bell_vector


def _write(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


def _bell_file(tmp_path):
    phi = bell_vector()
    op = Operator(SystemLayout.of(A=2, B=2), np.outer(phi, phi))
    return _write(tmp_path / "bell.json", operator_to_dict(op))


def test_entropy_bell(tmp_path, capsys):
    _bell_file(tmp_path)
    cfg = _write(tmp_path / "c.json", {"quantity": "cond_renyi_down", "state": "bell.json", "alpha": 2,
                                       "a_labels": ["A"], "b_labels": ["B"]})
    assert cli.main(["entropy", "--config", cfg]) == 0
    out = json.loads(capsys.readouterr().out)
    assert abs(out["value"] + 1) < 1e-9


def test_entropy_equal_states_and_disjoint(tmp_path, capsys):
    a = operator_to_dict(Operator(SystemLayout.of(A=2), np.diag([1.0, 0.0])))
    b = operator_to_dict(Operator(SystemLayout.of(A=2), np.diag([0.0, 1.0])))
    cfg = _write(tmp_path / "c.json", {"quantity": "renyi_divergence", "state": a, "sigma": a, "alpha": 1.5})
    assert cli.main(["entropy", "--config", cfg]) == 0
    assert abs(json.loads(capsys.readouterr().out)["value"]) < 1e-12
    cfg = _write(tmp_path / "d.json", {"quantity": "renyi_divergence", "state": a, "sigma": b, "alpha": 1.5})
    assert cli.main(["entropy", "--config", cfg]) == 0
    assert json.loads(capsys.readouterr().out)["value"] == "+inf"


def test_config_errors(tmp_path, capsys):
    cfg = _write(tmp_path / "c.json", {"quantity": "cond_renyi_down", "state": "missing.json", "extra": 1})
    assert cli.main(["entropy", "--config", cfg]) == 2
    cfg = _write(tmp_path / "d.json", {"quantity": "cond_renyi_down", "state": "missing.json"})
    assert cli.main(["entropy", "--config", cfg]) == 2
    assert cli.main(["entropy", "--config", str(tmp_path / "none.json")]) == 2
    assert cli.main(["verify", "nope"]) == 2
    assert cli.main(["verify", "pinching", "--seed", str(2 ** 64)]) == 2
    assert "error" in capsys.readouterr().err


RC = {"g": {"values": [0.0, 0.8]}, "gamma": 0.1, "omega_exp": 0.85, "delta": 0.01, "eps_s": 1e-6, "eps_a": 1e-6,
      "n_grid": [1000000, 10000000, 100000000]}


def test_rate_curve_csv(tmp_path):
    cfg = _write(tmp_path / "rc.json", RC)
    out = tmp_path / "rc.csv"
    assert cli.main(["rate-curve", "--config", cfg, "--out", str(out)]) == 0
    rows = list(csv.DictReader(io.StringIO(out.read_text())))
    assert list(rows[0]) == list(cli.RATE_COLUMNS)
    ref = rate_curve(TradeoffFunction((0, 1), [0.0, 0.8]), 0.1, 0.85, 0.01, 1e-6, 1e-6, RC["n_grid"])
    for r, e in zip(rows, ref):
        assert float(r["rate"]) == e["rate"]
        assert float(r["bound"]) == e["bound"]
    rates = [float(r["rate"]) for r in rows]
    assert rates == sorted(rates)


def test_rate_curve_empty_event(tmp_path, capsys):
    bad = dict(RC, omega_exp=1.0, delta=-0.5)
    cfg = _write(tmp_path / "rc.json", bad)
    assert cli.main(["rate-curve", "--config", cfg]) == 0
    text = capsys.readouterr()
    assert "nan" in text.out
    assert "empty" in text.err


SIM = {"n": 3000, "gamma": 0.0, "omega_exp": 0.85, "delta": 0.05, "x_star": 0, "y_star": 0, "seed": 5,
       "strategy": {"name": "honest_chsh"}}


def test_simulate_gamma_zero(tmp_path):
    cfg = _write(tmp_path / "s.json", SIM)
    out = tmp_path / "run.csv"
    assert cli.main(["simulate", "--config", cfg, "--out", str(out)]) == 0
    rows = list(csv.DictReader(io.StringIO(out.read_text())))
    assert all(r["c"] == "bot" for r in rows)
    summary = json.loads((tmp_path / "run.json").read_text())
    assert summary["tests"] == 0 and not summary["aborted"]


def test_simulate_honest_win_rate(tmp_path, capsys):
    cfg = _write(tmp_path / "s.json", dict(SIM, n=20000, gamma=1.0))
    assert cli.main(["simulate", "--config", cfg]) == 0
    s = json.loads(capsys.readouterr().out)
    w = 0.5 + 1 / (2 * math.sqrt(2))
    assert abs(s["win_rate"] - w) < 3 * math.sqrt(w * (1 - w) / s["tests"])


def test_simulate_unknown_strategy(tmp_path):
    cfg = _write(tmp_path / "s.json", dict(SIM, strategy={"name": "magic"}))
    assert cli.main(["simulate", "--config", cfg]) == 2


def test_verify_suite_exit_code(tmp_path):
    out = tmp_path / "v.json"
    assert cli.main(["verify", "eat-consistency", "--instances", "4", "--out", str(out)]) == 0
    reps = json.loads(out.read_text())
    assert all(r["violations"] == 0 for r in reps)


def test_byte_identical_outputs(tmp_path):
    cfg = _write(tmp_path / "s.json", dict(SIM, gamma=0.3))
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    cli.main(["simulate", "--config", cfg, "--out", str(a)])
    cli.main(["simulate", "--config", cfg, "--out", str(b)])
    assert a.read_bytes() == b.read_bytes()
    assert a.with_suffix(".json").read_bytes() == b.with_suffix(".json").read_bytes()
