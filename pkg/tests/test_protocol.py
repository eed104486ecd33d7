import math

import numpy as np
import pytest

from entacc.channels import check_nonsignalling
from entacc.eat import TradeoffFunction
from entacc.protocol import (
    ProtocolConfig,
    abort_statistics,
    certified_rate,
    chernoff_abort_bound,
    chsh_game,
    deterministic_strategy,
    honest_chsh_strategy,
    leaky_round_channel,
    nonsignalling_of_round,
    round_channel,
    round_uniforms,
    run_protocol,
    single_round_entropy,
    trivial_game,
    uniform_bit_strategy,
    win_probability,
)

TSIRELSON = 0.5 + 1 / (2 * math.sqrt(2))


def _h2(p):
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def test_honest_win_probability():
    assert abs(win_probability(honest_chsh_strategy(), chsh_game()) - TSIRELSON) < 1e-12
    # fully depolarised pair wins half the time
    assert abs(win_probability(honest_chsh_strategy(1.0), chsh_game()) - 0.5) < 1e-12
    p = 0.2
    assert abs(win_probability(honest_chsh_strategy(p), chsh_game()) - ((1 - p) * TSIRELSON + p / 2)) < 1e-12


def test_config_validation():
    with pytest.raises(ValueError):
        ProtocolConfig(0, 0.1, 0.85, 0.01)
    with pytest.raises(ValueError):
        ProtocolConfig(10, 1.5, 0.85, 0.01)
    with pytest.raises(ValueError):
        ProtocolConfig(10, 0.1, 0.85, 0.01, seed=2 ** 64)


def test_round_channel_nonsignalling():
    cfg = ProtocolConfig(100, 0.3, 0.85, 0.01)
    for s in (honest_chsh_strategy(), honest_chsh_strategy(0.1), uniform_bit_strategy()):
        ok, res, _ = nonsignalling_of_round(round_channel(s, chsh_game(), cfg))
        assert ok and res <= 1e-10


def test_leak_detected():
    cfg = ProtocolConfig(100, 0.3, 0.85, 0.01)
    ok, res, _ = nonsignalling_of_round(leaky_round_channel(honest_chsh_strategy(), chsh_game(), cfg))
    assert not ok and res >= 0.1


def test_gamma_zero_never_tests():
    cfg = ProtocolConfig(500, 0.0, 0.85, 0.01, seed=3)
    rec = run_protocol(honest_chsh_strategy(), chsh_game(), cfg)
    assert rec.tests == 0
    assert rec.freq["bot"] == 1.0
    assert not rec.aborted
    assert "bot" in rec.to_csv().splitlines()[1]


def test_gamma_one_always_tests():
    cfg = ProtocolConfig(500, 1.0, 0.85, 0.05, seed=3)
    rec = run_protocol(honest_chsh_strategy(), chsh_game(), cfg)
    assert rec.tests == 500
    assert rec.freq["bot"] == 0.0


def test_determinism():
    cfg = ProtocolConfig(2000, 0.2, 0.85, 0.05, seed=11)
    a = run_protocol(honest_chsh_strategy(0.05), chsh_game(), cfg).to_csv()
    b = run_protocol(honest_chsh_strategy(0.05), chsh_game(), cfg).to_csv()
    assert a == b
    c = run_protocol(honest_chsh_strategy(0.05), chsh_game(), cfg, seed=12).to_csv()
    assert a != c


def test_round_uniforms_prefix_stable():
    # round i only depends on (seed, i)
    a = round_uniforms(5, 100)
    b = round_uniforms(5, 300)
    assert np.abs(a - b[:100]).max() == 0.0


def test_sequential_path_matches_vectorised():
    s = honest_chsh_strategy(0.1)
    # a refresh state off by rounding forces the sequential path
    seq = type(s)(s.name, s.r_dim, s.e_dim, s.initial_state, s.device, s.adversary, refresh=s.refresh * (1 + 1e-14))
    assert s.memoryless and not seq.memoryless
    cfg = ProtocolConfig(300, 0.5, 0.85, 0.05, seed=9)
    r1 = run_protocol(s, chsh_game(), cfg)
    r2 = run_protocol(seq, chsh_game(), cfg)
    assert np.array_equal(r1.a, r2.a) and np.array_equal(r1.b, r2.b)


def test_trivial_game_never_loses():
    cfg = ProtocolConfig(200, 0.5, 1.0, 0.0, seed=1)
    rec = run_protocol(deterministic_strategy(), trivial_game(), cfg)
    assert rec.losses == 0 and not rec.aborted


def test_abort_rate_below_chernoff():
    cfg = ProtocolConfig(2000, 0.2, 0.85, 0.05, seed=100)
    rate, wins, tests = abort_statistics(honest_chsh_strategy(), chsh_game(), cfg, 50)
    assert rate <= chernoff_abort_bound(cfg)
    sd = math.sqrt(TSIRELSON * (1 - TSIRELSON) / tests)
    assert abs(wins / tests - TSIRELSON) < 3 * sd


def test_single_round_entropy_honest():
    # outcomes of A and B agree with probability cos²(π/8) in every block
    cfg = ProtocolConfig(100, 0.1, 0.85, 0.01)
    h = single_round_entropy(honest_chsh_strategy(), chsh_game(), cfg)
    assert abs(h - _h2(math.cos(math.pi / 8) ** 2)) < 1e-10


def test_single_round_entropy_purified_mixed_input():
    # the purification of a mixed device qubit gives the adversary full knowledge
    cfg = ProtocolConfig(100, 0.1, 0.85, 0.01)
    assert abs(single_round_entropy(uniform_bit_strategy(), chsh_game(), cfg)) < 1e-10


def test_certified_rate_positive_for_large_n():
    g = TradeoffFunction((0, 1), {0: 0.0, 1: 0.8})
    rate, bound, const = certified_rate(g, ProtocolConfig(10 ** 9, 0.1, 0.85, 0.01), 1e-6, 1e-6)
    assert 0 < rate < 0.8
    assert abs(bound / 10 ** 9 - rate) < 1e-15
