"""One test per acceptance criterion; each prints a single PASS/FAIL line.

The lines appear in the pytest summary (``-rP`` is set in the project config).
"""

import json
import math
import time

import numpy as np

from entacc import cli, protocol
from entacc.verification import (
    verify_uhlmann_counterexample,
    verify_chain_rules,
    verify_divergence_axioms,
    verify_dmax_stable,
    verify_duality_suite,
    verify_eat_consistency,
    verify_pinching,
    verify_uhlmann_suite,
)

from conftest import bell_vector


def _line(k, ok, msg):
    print(f"\nAC-{k:02d} {'PASS' if ok else 'FAIL'} {msg}")
    return ok


def _by_name(reps):
    return {r.name: r for r in reps}


def test_ac01_uhlmann_counterexample():
    t = time.perf_counter()
    rep = verify_uhlmann_counterexample()[0]
    dt = time.perf_counter() - t
    d = rep.details
    ok = (d["D2_marginal"] < 0.476 and d["inf_D_lower_bound"] > 0.48 and d["inf_D_gap"] <= 1e-5
          and rep.violations == 0 and dt < 10.0)
    assert _line(1, ok, f"D2={d['D2_marginal']:.6f}<0.476 infD_lb={d['inf_D_lower_bound']:.6f}>0.48 "
                        f"gap={d['inf_D_gap']:.1e} chain_violations={rep.violations} t={dt:.2f}s<10s")


def test_ac02_dmax_extension_equality():
    reps = _by_name(verify_dmax_stable(25, seed=0, tol=1e-6, gap_tol=1e-7, classical_tol=1e-9))
    eq, gaps, cls = reps["dmax.extension_equality"], reps["dmax.solver_gaps"], reps["classical.extension_equality"]
    ok = eq.passed and gaps.passed and cls.passed
    assert _line(2, ok, f"max|dmax-ext|={-eq.worst_margin:.1e}<=1e-6 max_gap={-gaps.worst_margin:.1e}<=1e-7 "
                        f"classical={-cls.worst_margin:.1e}<=1e-9 instances=25")


def test_ac03_pinching():
    reps = verify_pinching(100, seed=0, tol=1e-10)
    ok = all(r.passed for r in reps)
    worst = {r.name.split(".")[1]: r.worst_margin for r in reps}
    assert _line(3, ok, "instances=100 tol=1e-10 " + " ".join(f"{k}={v:.1e}" for k, v in worst.items()))


def test_ac04_divergence_axioms():
    reps = verify_divergence_axioms(200, seed=0, tol=1e-7)
    viol = sum(r.violations for r in reps)
    assert _line(4, viol == 0, f"DPI/additivity/monotonicity/up-down violations={viol} tol=1e-7 "
                               + " ".join(f"{r.name}:{r.instances}" for r in reps))


def test_ac05_duality():
    rep = verify_duality_suite(50, seed=0, tol=1e-5, restarts=4, max_uncertified=0.02)[0]
    unc = rep.details["uncertified"]
    ok = rep.passed and unc <= 0.02 * 50
    assert _line(5, ok, f"max|Hmin+Hmax|={-rep.worst_margin:.1e}<=1e-5 uncertified={unc}/50 instances=50")


def test_ac06_entropy_chain_rule():
    reps = _by_name(verify_chain_rules(100, 25, seed=0, tol=1e-6, divergence=0))
    cl, qu = reps["entropy_chain_rule.classical_grid"], reps["entropy_chain_rule.qubit_sampled"]
    ok = cl.worst_margin >= -1e-6 and cl.instances == 100 and qu.violations == 0 and qu.instances == 25
    assert _line(6, ok, f"classical min_margin={cl.worst_margin:.3e}>=-1e-6 (100) "
                        f"qubit violations={qu.violations} (25, caveat={qu.caveat})")


def test_ac07_uhlmann_sandwich():
    sand, mono = verify_uhlmann_suite(20, seed=0, alpha=1.5, ns=(1, 2, 3), tol=1e-7, min_monotone=0.9)
    frac = sand.details["monotone_fraction"]
    ok = sand.passed and frac >= 0.9
    assert _line(7, ok, f"sandwich min_margin={sand.worst_margin:.1e}>=-1e-7 upper-gap nonincreasing "
                        f"fraction={frac:.2f}>=0.90 instances=20 n=1,2,3")


def test_ac08_eat_consistency():
    reps = _by_name(verify_eat_consistency(50, seed=0, dominance_tol=1e-9, rel_tol=1e-12))
    dom, orc, res = reps["eat.auto_alpha_vs_grid"], reps["eat.oracle_agreement"], reps["eat.rate_residual"]
    ok = dom.passed and orc.passed and res.passed
    assert _line(8, ok, f"auto<=grid+1e-9 min_slack={dom.worst_margin:.3e} oracle max_rel_err="
                        f"{1e-12 - orc.worst_margin:.1e}<=1e-12 residual max_rel_err={1e-12 - res.worst_margin:.1e}")


def test_ac09_protocol_completeness():
    cfg = protocol.ProtocolConfig(5000, 0.1, 0.85, 0.05, seed=1)
    t = time.perf_counter()
    rate, wins, tests = protocol.abort_statistics(protocol.honest_chsh_strategy(), protocol.chsh_game(), cfg, 2000)
    dt = time.perf_counter() - t
    bound = protocol.chernoff_abort_bound(cfg)
    w = 0.5 + 1 / (2 * math.sqrt(2))
    sd = math.sqrt(w * (1 - w) / tests)
    z = (wins / tests - w) / sd
    ok = rate <= bound and abs(z) <= 3 and dt < 60
    assert _line(9, ok, f"abort_rate={rate:.4f}<=bound={bound:.4f} win={wins / tests:.5f} z={z:+.2f} "
                        f"trials=2000 t={dt:.1f}s<60s")


def test_ac10_nonsignalling():
    cfg = protocol.ProtocolConfig(100, 0.1, 0.85, 0.05)
    game = protocol.chsh_game()
    worst = 0.0
    for name, make in protocol.BUILTIN_STRATEGIES.items():
        for p in (0.0, 0.1):
            ok_, res, _ = protocol.nonsignalling_of_round(protocol.round_channel(make(p), game, cfg))
            worst = max(worst, res)
    _, leak, _ = protocol.nonsignalling_of_round(
        protocol.leaky_round_channel(protocol.honest_chsh_strategy(), game, cfg))
    ok = worst <= 1e-10 and leak >= 0.1
    assert _line(10, ok, f"builtin max_residual={worst:.1e}<=1e-10 leak_residual={leak:.3f}>=0.1")


def test_ac11_determinism(tmp_path):
    phi = bell_vector()
    state = {"layout": [["A", 2], ["B", 2]], "entries": [[[float(a * b), 0.0] for b in phi] for a in phi]}
    configs = {
        "entropy": {"quantity": "cond_renyi_up", "state": state, "alpha": 1.5, "a_labels": ["A"],
                    "b_labels": ["B"], "restarts": 3},
        "rate-curve": {"g": {"values": [0.0, 0.8]}, "gamma": 0.1, "omega_exp": 0.85, "delta": 0.01,
                       "eps_s": 1e-6, "eps_a": 1e-6, "n_grid": [100000, 1000000, 10000000]},
        "simulate": {"n": 5000, "gamma": 0.1, "omega_exp": 0.85, "delta": 0.05, "x_star": 0, "y_star": 0,
                     "seed": 42, "strategy": {"name": "honest_chsh", "noise_p": 0.02},
                     "g": {"values": [0.0, 0.8]}},
    }
    same = []
    for cmd, cfg in configs.items():
        path = tmp_path / f"{cmd}.json"
        path.write_text(json.dumps(cfg))
        outs = []
        for k in range(2):
            out = tmp_path / f"{cmd}-{k}.out"
            assert cli.main([cmd, "--config", str(path), "--seed", "7", "--out", str(out)]) == 0
            blob = out.read_bytes()
            if cmd == "simulate":
                blob += out.with_suffix(".json").read_bytes()
            outs.append(blob)
        same.append(outs[0] == outs[1])
    v = []
    for k in range(2):
        out = tmp_path / f"verify-{k}.json"
        cli.main(["verify", "eat-consistency", "--seed", "3", "--instances", "5", "--out", str(out)])
        v.append(out.read_bytes())
    same.append(v[0] == v[1])
    ok = all(same)
    assert _line(11, ok, "byte-identical reruns: entropy={} rate-curve={} simulate={} verify={}".format(*same))
