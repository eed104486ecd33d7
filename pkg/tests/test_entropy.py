import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from entacc.channels import KrausChannel, depolarizing, identity_channel
from entacc.convex import OptConfig
from entacc.entropy import (
    beta_of,
    channel_divergence_finite,
    cond_down_value_and_grad,
    cond_renyi_down,
    cond_renyi_up,
    max_entropy,
    min_entropy,
    renyi_divergence,
    renyi_divergence_array,
)
from entacc.instances import random_density_array
from entacc.linalg import DensityMatrix, Operator, SystemLayout

from conftest import bell_vector

AB = SystemLayout.of(A=2, B=2)


def _classical_renyi(p, q, alpha):
    if alpha == 1:
        return float(np.sum(p * np.log2(p / q)))
    return float(np.log2(np.sum(p ** alpha * q ** (1 - alpha))) / (alpha - 1))


@pytest.mark.parametrize("alpha", [0.5, 0.8, 1.0, 1.5, 2.0, 3.0])
def test_commuting_closed_form(alpha):
    p = np.array([0.5, 0.3, 0.2])
    q = np.array([0.2, 0.2, 0.6])
    val = renyi_divergence_array(np.diag(p), np.diag(q), alpha)
    assert abs(val - _classical_renyi(p, q, alpha)) < 1e-12


def test_dmax_commuting():
    p = np.array([0.5, 0.3, 0.2])
    q = np.array([0.2, 0.2, 0.6])
    val = renyi_divergence_array(np.diag(p), np.diag(q), math.inf)
    assert abs(val - math.log2(2.5)) < 1e-6


def test_identical_states_zero(rng):
    r = random_density_array(3, rng)
    for a in (0.5, 1.0, 2.0):
        assert abs(renyi_divergence_array(r, r, a)) < 1e-10


def test_disjoint_support_inf():
    assert math.isinf(renyi_divergence_array(np.diag([1.0, 0]), np.diag([0, 1.0]), 2.0))


def test_alpha_out_of_range():
    with pytest.raises(ValueError):
        renyi_divergence_array(np.eye(2) / 2, np.eye(2) / 2, 0.3)
    with pytest.raises(ValueError):
        beta_of(2.5)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_monotone_in_alpha(seed):
    rng = np.random.default_rng(seed)
    r, s = random_density_array(3, rng), random_density_array(3, rng)
    vals = [renyi_divergence_array(r, s, a) for a in (0.5, 0.75, 1.0, 1.5, 2.0, 4.0)]
    assert all(b >= a - 1e-9 for a, b in zip(vals, vals[1:]))


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5, 2.0])
def test_bell_conditional_entropy(alpha):
    phi = bell_vector()
    rho = DensityMatrix(AB, np.outer(phi, phi))
    assert abs(cond_renyi_down(rho, ["A"], ["B"], alpha) + 1) < 1e-9
    up = cond_renyi_up(rho, ["A"], ["B"], alpha, OptConfig(restarts=3))
    assert abs(up.value + 1) < 1e-7


def test_bell_min_max():
    phi = bell_vector()
    rho = DensityMatrix(AB, np.outer(phi, phi))
    hmin, rep = min_entropy(rho, ["A"], ["B"])
    assert abs(hmin + 1) < 1e-6
    hmax = max_entropy(rho, ["A"], ["B"], OptConfig(restarts=3))
    assert abs(hmax.value + 1) < 1e-7


@pytest.mark.parametrize("alpha", [0.5, 0.7, 1.5, 2.0])
def test_up_arrow_classical_side_information(alpha, rng):
    # classical B: H^up = α/(1-α) log Σ_b (Σ_a p(a,b)^α)^{1/α}
    p = rng.dirichlet(np.ones(6)).reshape(3, 2)
    rho = np.zeros((6, 6))
    for a in range(3):
        for b in range(2):
            rho[a * 2 + b, a * 2 + b] = p[a, b]
    exact = alpha / (1 - alpha) * math.log2(np.sum(np.sum(p ** alpha, axis=0) ** (1 / alpha)))
    res = cond_renyi_up(DensityMatrix(SystemLayout.of(A=3, B=2), rho), ["A"], ["B"], alpha, OptConfig(restarts=3))
    assert abs(res.value - exact) < 1e-7
    assert res.certified


def test_max_entropy_trivial_side():
    p = np.array([0.6, 0.3, 0.1])
    rho = DensityMatrix(SystemLayout.of(A=3, B=1), np.diag(p))
    res = max_entropy(rho, ["A"], ["B"], OptConfig(restarts=2))
    assert abs(res.value - 2 * math.log2(np.sum(np.sqrt(p)))) < 1e-9


def test_up_dominates_down(rng):
    rho = DensityMatrix(AB, random_density_array(4, rng))
    for a in (0.7, 1.5):
        up = cond_renyi_up(rho, ["A"], ["B"], a, OptConfig(restarts=3)).value
        assert up >= cond_renyi_down(rho, ["A"], ["B"], a) - 1e-9


def test_down_gradient_finite_difference(rng):
    m = random_density_array(4, rng)
    h = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    h = h + h.conj().T
    for a in (0.7, 1.3, 1.8):
        v, g = cond_down_value_and_grad(m, 2, 2, a)
        eps = 1e-6
        vp, _ = cond_down_value_and_grad(m + eps * h, 2, 2, a)
        vm, _ = cond_down_value_and_grad(m - eps * h, 2, 2, a)
        fd = (vp - vm) / (2 * eps)
        assert abs(fd - np.real(np.trace(g @ h))) < 1e-6 * max(1, abs(fd))


def test_channel_divergence_identical_channels(rng):
    lay = SystemLayout.of(A=2)
    e = depolarizing(lay, 0.3)
    assert abs(channel_divergence_finite(e, e, 1.5, opt_cfg=OptConfig(restarts=2))) < 1e-9


def test_channel_divergence_vs_identity():
    # maximally entangled input: D_α(Φ ‖ 1/4) = 2 for every α
    lay = SystemLayout.of(A=2)
    val = channel_divergence_finite(identity_channel(lay), depolarizing(lay, 1.0), 2.0, opt_cfg=OptConfig(restarts=2))
    assert abs(val - 2.0) < 1e-6


def test_channel_divergence_guard():
    lay = SystemLayout.of(A=4)
    e = identity_channel(lay)
    with pytest.raises(ValueError):
        channel_divergence_finite(e, e, 1.5, n=2)
