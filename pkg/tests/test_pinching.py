import numpy as np
from hypothesis import given, settings, strategies as st

from entacc.instances import random_density_array
from entacc.linalg import Operator, SystemLayout
from entacc.pinching import cluster_eigenvalues, distinct_spectrum_count, pinch, pinching_map


def _op(m):
    return Operator(SystemLayout.of(A=m.shape[0]), m)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(2, 6))
def test_pinching_properties(seed, d):
    rng = np.random.default_rng(seed)
    sig = _op(random_density_array(d, rng))
    rho = _op(random_density_array(d, rng))
    p = pinching_map(sig)
    out = pinch(p, rho)
    # invariance of sigma, commutation with sigma, idempotence
    assert np.abs(pinch(p, sig).matrix - sig.matrix).max() < 1e-10
    assert np.abs(out.matrix @ sig.matrix - sig.matrix @ out.matrix).max() < 1e-10
    assert np.abs(pinch(p, out).matrix - out.matrix).max() < 1e-12
    # rho <= (number of distinct eigenvalues) P(rho)
    gap = len(p) * out.matrix - rho.matrix
    assert np.linalg.eigvalsh(0.5 * (gap + gap.conj().T))[0] > -1e-10


def test_degenerate_clustering():
    w = np.array([0.25, 0.25 + 1e-14, 0.5])
    groups = cluster_eigenvalues(w)
    assert len(groups) == 2
    assert distinct_spectrum_count(np.diag(w)) == 2


def test_identity_pinching_is_trivial(rng):
    p = pinching_map(_op(np.eye(3) / 3))
    assert len(p) == 1
    rho = _op(random_density_array(3, rng))
    assert np.abs(pinch(p, rho).matrix - rho.matrix).max() < 1e-14


def test_tensor_power_spectrum_count():
    # sigma^{⊗n} has at most (n+1)^{d-1} distinct eigenvalues
    sig = np.diag([0.2, 0.3, 0.5])
    for n in range(1, 5):
        big = sig
        for _ in range(n - 1):
            big = np.kron(big, sig)
        count = distinct_spectrum_count(big)
        assert count <= (n + 1) ** 2
    # generic spectrum attains the count for n = 2: compositions of 2 into 3 parts
    assert count == 15
