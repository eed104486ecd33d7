import json
import math

import numpy as np
import pytest

from entacc.channels import KrausChannel
from entacc.convex import OptConfig
from entacc.instances import random_density_array
from entacc.linalg import SystemLayout
from entacc.verification import (
    SUITES,
    VerificationReport,
    classical_chain_instance,
    divergence_chain_instance,
    factors_through_trace,
    instance_rng,
    quantum_chain_instance,
    reports_to_json,
    run_suite,
    verify_uhlmann_counterexample,
    verify_divergence_chain_rule,
    verify_duality,
    verify_entropy_chain_rule,
    verify_regularized_uhlmann,
)

from conftest import bell_vector


def test_report_json_round_trip():
    rep = VerificationReport("x", 3, math.inf, 0, "exact", 1e-9, {"v": np.float64(1.5), "w": -math.inf})
    data = json.loads(reports_to_json([rep]))
    assert data[0]["worst_margin"] == "+inf"
    assert data[0]["details"]["w"] == "-inf"
    assert rep.passed


def test_bad_caveat():
    with pytest.raises(ValueError):
        VerificationReport("x", 1, 0.0, 0, "maybe", 0.0, {})


def test_unknown_suite():
    with pytest.raises(KeyError):
        run_suite("nope")
    assert "appendix-b" in SUITES


def test_uhlmann_counterexample_numbers():
    # sandwiched D_2 = log2 tr[ρ σ^{-1/2} ρ σ^{-1/2}] with σ^{-1/2} = √3 |+⟩⟨+| + √(3/2) |−⟩⟨−|
    plus = np.array([1, 1]) / math.sqrt(2)
    minus = np.array([1, -1]) / math.sqrt(2)
    s = math.sqrt(3) * np.outer(plus, plus) + math.sqrt(1.5) * np.outer(minus, minus)
    rho_a = np.diag([0.25, 0.75])
    d2 = math.log2(np.trace(rho_a @ s @ rho_a @ s))
    rep = verify_uhlmann_counterexample()[0]
    assert abs(rep.details["D2_marginal"] - d2) < 1e-12
    assert rep.details["D2_marginal"] < 0.476
    assert rep.details["inf_D_lower_bound"] > 0.48
    assert rep.passed


def test_duality_bell_with_pure_c():
    psi = np.kron(bell_vector(), np.array([1.0, 0.0]))
    rep = verify_duality(psi, [2, 2, 2], opt_cfg=OptConfig(restarts=2))
    assert abs(rep.details["h_min"] + 1) < 1e-6
    assert abs(rep.details["h_max"] - 1) < 1e-6
    assert rep.passed


def test_duality_product_state():
    psi = np.kron(np.array([1.0, 0.0]), np.kron(np.array([0.6, 0.8]), np.array([1.0, 0.0])))
    rep = verify_duality(psi, [2, 2, 2], opt_cfg=OptConfig(restarts=2))
    assert abs(rep.details["h_min"]) < 1e-6
    assert rep.passed


def test_duality_ghz_qutrits():
    psi = np.zeros(27)
    for i in range(3):
        psi[i * 9 + i * 3 + i] = 1 / math.sqrt(3)
    rep = verify_duality(psi, [3, 3, 3], opt_cfg=OptConfig(restarts=2))
    # H_min(A|B) = 0 for the classically correlated GHZ marginal
    assert abs(rep.details["h_min"]) < 1e-6
    assert rep.passed


def test_chain_rule_classical_grid():
    rng = instance_rng(1, 0)
    m, rho = classical_chain_instance(rng)
    rep = verify_entropy_chain_rule(m, rho, (2, 2, 2), 1.5, mode="grid")
    assert rep.caveat == "exact"
    assert rep.passed


def test_chain_rule_quantum_sampled():
    rng = instance_rng(1, 1)
    m, rho = quantum_chain_instance(rng)
    rep = verify_entropy_chain_rule(m, rho, (2, 2, 2), 1.3, mode="sampled", opt_cfg=OptConfig(restarts=2, max_iter=150))
    assert rep.caveat == "sampled_inf"
    assert rep.passed


def test_chain_rule_rejects_signalling_map():
    # |r, e> -> |a'=e, r'=0, e'=r> hands R to the adversary
    k = np.zeros((8, 4))
    for r in range(2):
        for e in range(2):
            k[(e * 2 + 0) * 2 + r, r * 2 + e] = 1.0
    m = KrausChannel(SystemLayout([("R", 2), ("E", 2)]), SystemLayout([("A'", 2), ("R'", 2), ("E'", 2)]), [k])
    rho = random_density_array(8, np.random.default_rng(0))
    with pytest.raises(ValueError):
        verify_entropy_chain_rule(m, rho, (2, 2, 2), 1.5, mode="grid")


def test_chain_rule_alpha_range():
    m, rho = classical_chain_instance(instance_rng(1, 3))
    with pytest.raises(ValueError):
        verify_entropy_chain_rule(m, rho, (2, 2, 2), 2.5, mode="grid")


def test_factors_through_trace():
    rng = instance_rng(2, 0)
    e, f, rho, sigma = divergence_chain_instance(rng)
    ok, res = factors_through_trace(f, ["A"], ["R"])
    assert ok and res < 1e-12
    ok, res = factors_through_trace(e, ["A"], ["R"])
    assert not ok


def test_divergence_chain_replacer_closed_form():
    # E = F = replacer onto τ: LHS = 0, channel term = 0, marginal term = D(ρ_A‖σ_A) = 0
    lay = SystemLayout.of(A=2, R=2)
    tau = np.array([0.3, 0.7])
    ks = [np.sqrt(tau[b]) * np.outer(np.eye(2)[b], np.eye(4)[j]) for b in range(2) for j in range(4)]
    ch = KrausChannel(lay, SystemLayout.of(B=2), ks)
    phi = bell_vector()
    rho = np.outer(phi, phi)
    sigma = np.eye(4) / 4
    reps = verify_divergence_chain_rule(ch, ch, rho, sigma, 1.5, opt_cfg=OptConfig(restarts=1))
    assert abs(reps[0].details["lhs"]) < 1e-12
    assert abs(reps[0].details["channel_divergence"]) < 1e-9
    assert abs(reps[0].details["d_marginal"]) < 1e-12
    # full form: D_α(Φ ‖ 1/4) = 2
    assert abs(reps[1].details["d_full"] - 2) < 1e-9
    assert all(r.caveat == "one_sided" and r.passed for r in reps)


def test_divergence_chain_random_instance():
    rng = instance_rng(0, 110_000)
    e, f, rho, sigma = divergence_chain_instance(rng)
    r1 = verify_divergence_chain_rule(e, f, rho, sigma, 1.5, 1, opt_cfg=OptConfig(restarts=2))
    r2 = verify_divergence_chain_rule(e, f, rho, sigma, 1.5, 2, opt_cfg=OptConfig(restarts=1, max_iter=60))
    # the RHS grows with n_reg, so violations cannot increase
    assert sum(r.violations for r in r2) <= sum(r.violations for r in r1)
    assert r2[0].details["channel_divergence"] >= r1[0].details["channel_divergence"] - 1e-9


def test_uhlmann_trivial_r():
    # R one-dimensional: the sandwich collapses at n = 1
    rng = np.random.default_rng(3)
    rho = random_density_array(2, rng)
    sig = random_density_array(2, rng)
    rep = verify_regularized_uhlmann(rho, sig, 1.5, 1, da=2, dr=1)
    assert abs(rep.details["middle"] - rep.details["lower"]) < 1e-9
    assert rep.passed


def test_uhlmann_marginal_and_sandwich():
    rng = np.random.default_rng(4)
    rho = random_density_array(4, rng)
    sig = random_density_array(2, rng)
    gaps = []
    for n in (1, 2, 3):
        rep = verify_regularized_uhlmann(rho, sig, 1.5, n)
        assert rep.passed
        assert rep.details["marginal_residual"] < 1e-9
        gaps.append(rep.details["upper_gap"])
    assert gaps[0] >= gaps[1] >= gaps[2]


def test_uhlmann_guard():
    rng = np.random.default_rng(4)
    with pytest.raises(ValueError):
        verify_regularized_uhlmann(random_density_array(4, rng), random_density_array(2, rng), 1.5, 4)


def test_eat_suite_small():
    reps = run_suite("eat-consistency", instances=5)
    assert all(r.passed for r in reps)
