import numpy as np
import pytest

from entacc.channels import (
    KrausChannel,
    apply,
    channels_equivalent,
    check_nonsignalling,
    choi_from_kraus,
    compose,
    dephasing,
    depolarizing,
    identity_channel,
    kraus_from_choi,
    replacer,
    stinespring,
    tensor_power,
)
from entacc.instances import random_channel, random_state
from entacc.linalg import DensityMatrix, Operator, SystemLayout, partial_trace


def test_trace_preservation_enforced():
    with pytest.raises(ValueError):
        KrausChannel(SystemLayout.of(A=2), SystemLayout.of(A=2), [0.5 * np.eye(2)])


def test_choi_round_trip(rng):
    ch = random_channel(SystemLayout.of(A=2), SystemLayout.of(B=3), rng, n_kraus=3)
    back = kraus_from_choi(choi_from_kraus(ch))
    assert channels_equivalent(ch, back)


def test_depolarizing_full_noise(rng):
    lay = SystemLayout.of(A=3)
    rho = random_state(lay, rng)
    out = apply(depolarizing(lay, 1.0), rho)
    assert np.abs(out.matrix - np.eye(3) / 3).max() < 1e-12


def test_dephasing_kills_coherences():
    lay = SystemLayout.of(A=2)
    plus = DensityMatrix(lay, np.full((2, 2), 0.5))
    out = apply(dephasing(lay), plus)
    assert np.abs(out.matrix - np.eye(2) / 2).max() < 1e-12


def test_apply_on_subsystem(rng):
    lay = SystemLayout.of(A=2, B=2)
    rho = random_state(lay, rng)
    ch = random_channel(SystemLayout.of(B=2), SystemLayout.of(B=2), rng)
    out = apply(ch, rho, ["B"])
    assert out.layout.labels == ("A", "B")
    assert np.abs(partial_trace(out, ["A"]).matrix - partial_trace(rho, ["A"]).matrix).max() < 1e-12


def test_compose_and_tensor_power(rng):
    lay = SystemLayout.of(A=2)
    e = random_channel(lay, lay, rng)
    f = identity_channel(lay)
    assert channels_equivalent(compose(f, e), e)
    e2 = tensor_power(e, 2)
    assert e2.in_layout.dim == 4


def test_stinespring_isometry(rng):
    ch = random_channel(SystemLayout.of(A=2), SystemLayout.of(B=2), rng, n_kraus=3)
    v = stinespring(ch, "F")
    m = v.matrix if hasattr(v, "matrix") else v.v
    assert np.abs(m.conj().T @ m - np.eye(2)).max() < 1e-12


def test_replacer_is_nonsignalling():
    # R E -> A E' where A is freshly prepared and E passes through
    inp = SystemLayout.of(R=2, E=2)
    out = SystemLayout.of(A=2, Eo=2)
    ks = []
    for i in range(2):
        k = np.zeros((4, 4))
        for e in range(2):
            k[0 * 2 + e, i * 2 + e] = 1.0
        ks.append(k)
    ch = KrausChannel(inp, out, ks)
    ok, res, _ = check_nonsignalling(ch, ["R"], ["E"], ["Eo"], ["A"])
    assert ok and res < 1e-12


def test_swap_is_signalling():
    inp = SystemLayout.of(R=2, E=2)
    out = SystemLayout.of(A=2, Eo=2)
    swap = np.zeros((4, 4))
    for r in range(2):
        for e in range(2):
            swap[e * 2 + r, r * 2 + e] = 1.0
    ch = KrausChannel(inp, out, [swap])
    ok, res, _ = check_nonsignalling(ch, ["R"], ["E"], ["Eo"], ["A"])
    assert not ok and res > 0.1
