import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog

from entacc.eat import (
    EatTestingInput,
    FrequencyConstraint,
    TradeoffFunction,
    cor_constants,
    eat_bound_auto_alpha,
    eat_bound_simple,
    eat_bound_testing,
    g_eps,
    h_from_event,
    rate_curve,
    tradeoff_from_test,
)
from entacc.verification import eat_oracle

G = TradeoffFunction((0, 1), {0: 0.0, 1: 0.8})


def _inp(n=10 ** 7, alpha=None, eps=1e-6, pw=1e-6, gamma=0.1, h=0.3):
    f, stats = tradeoff_from_test(G, gamma)
    return EatTestingInput(n=n, epsilon=eps, p_omega=pw, d_a=2, tradeoff=f, h=h, alpha=alpha, stats=stats)


def test_g_eps_small_epsilon_stable():
    # 1 - sqrt(1 - ε²) ≈ ε²/2 for small ε
    for e in (1e-3, 1e-9, 1e-15):
        assert abs(g_eps(e) - (-math.log2(e * e / 2))) < 1e-6
    with pytest.raises(ValueError):
        g_eps(0.0)


def test_tradeoff_extension():
    f, stats = tradeoff_from_test(G, 0.25)
    # f(δ_x) = Max g + (g(δ_x) - Max g)/γ, f(⊥) = Max g
    assert abs(f.vertex_values[0] - (0.8 - 0.8 / 0.25)) < 1e-15
    assert f.vertex_values[1] == 0.8
    assert f.vertex_values["bot"] == 0.8
    assert abs(stats.var_f - 0.64 / 0.25) < 1e-15
    # f evaluated on γ-mixed test statistics reproduces g
    q = np.array([0.3, 0.7])
    mixed = {0: 0.25 * q[0], 1: 0.25 * q[1], "bot": 0.75}
    assert abs(f(mixed) - G(q)) < 1e-12


def test_testing_bound_matches_oracle():
    inp = _inp(alpha=1.01)
    val, const = eat_bound_testing(inp)
    st_ = inp.resolved_stats()
    ref = eat_oracle(inp.n, inp.h, inp.epsilon, inp.p_omega, 2, st_.max_f, st_.min_sigma_f, st_.var_f, alpha=1.01)
    assert abs(val - ref) <= 1e-12 * abs(ref)


def test_auto_alpha_matches_oracle():
    inp = _inp()
    res = eat_bound_auto_alpha(inp)
    st_ = inp.resolved_stats()
    b, c1, c0 = eat_oracle(inp.n, inp.h, inp.epsilon, inp.p_omega, 2, st_.max_f, st_.min_sigma_f, st_.var_f)
    assert abs(res.bound - b) <= 1e-12 * abs(b)
    assert abs(res.constants.c1 - c1) <= 1e-12 * c1
    assert abs(res.constants.c0 - c0) <= 1e-12 * c0


def test_alpha_to_one_diverges():
    # below the optimal order the g(ε)/(α-1) term dominates
    vals = [eat_bound_testing(_inp(alpha=1 + d))[0] for d in (1e-4, 1e-5, 1e-6, 1e-7)]
    assert all(b < a for a, b in zip(vals, vals[1:]))


def test_higher_success_probability_helps():
    a = eat_bound_testing(_inp(alpha=1.01, pw=1e-6))[0]
    b = eat_bound_testing(_inp(alpha=1.01, pw=1e-2))[0]
    assert b > a


def test_rate_residual():
    inp = _inp()
    c = cor_constants(inp)
    for n in (10 ** 6, 10 ** 7, 10 ** 8):
        res = eat_bound_auto_alpha(_inp(n=n))
        resid = inp.h - res.bound / n
        expect = c.c1 / math.sqrt(n) + c.c0 / n
        assert abs(resid - expect) <= 1e-9 * expect


def test_alpha_validation():
    with pytest.raises(ValueError):
        _inp(alpha=1.6)
    with pytest.raises(ValueError):
        eat_bound_testing(_inp())


def test_simple_bound_constant_rounds():
    val = eat_bound_simple([0.5] * 1000, 1.1, 1e-3, 2)
    expect = 500 - 1000 * 0.1 / 0.9 * math.log2(5) ** 2 - g_eps(1e-3) / 0.1
    assert abs(val - expect) < 1e-9


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=3, max_size=3), st.floats(0.05, 0.95))
def test_h_from_event_matches_linprog(vals, cap):
    f = TradeoffFunction((0, 1, 2), vals)
    cons = [FrequencyConstraint({0: 1.0}, cap)]
    r = linprog(vals, A_ub=[[1, 0, 0]], b_ub=[cap], A_eq=[[1, 1, 1]], b_eq=[1], bounds=[(0, None)] * 3)
    assert abs(h_from_event(f, cons) - r.fun) < 1e-9


def test_empty_event():
    f = TradeoffFunction((0, 1), [0.0, 1.0])
    with pytest.raises(ValueError):
        h_from_event(f, [FrequencyConstraint({0: 1.0, 1: 1.0}, 0.5)])


def test_rate_curve_rows():
    rows = rate_curve(G, 0.1, 0.85, 0.01, 1e-6, 1e-6, [10 ** 6, 10 ** 7, 10 ** 8, 10 ** 9])
    rates = [r["rate"] for r in rows]
    assert all(b >= a for a, b in zip(rates, rates[1:]))
    assert all(r["rate"] < r["h"] for r in rows)
    # single point equals eat_bound_auto_alpha
    f, stats = tradeoff_from_test(G, 0.1)
    inp = EatTestingInput(n=10 ** 7, epsilon=1e-6, p_omega=1e-6, d_a=2, tradeoff=f, h=rows[1]["h"], stats=stats)
    assert rows[1]["bound"] == eat_bound_auto_alpha(inp).bound
