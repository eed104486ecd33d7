"""Seeded random states, channels and isometries."""

from __future__ import annotations

import numpy as np

from .linalg import DensityMatrix, Operator, PureState, SystemLayout, _as_layout


def rng_from(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def ginibre(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    return (rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))) / np.sqrt(2)


def haar_unitary(d: int, rng) -> np.ndarray:
    rng = rng_from(rng)
    q, r = np.linalg.qr(ginibre(rng, d, d))
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def haar_isometry(d_out: int, d_in: int, rng) -> np.ndarray:
    """Haar-random isometry ``C^d_in -> C^d_out`` (first columns of a Haar unitary)."""
    if d_out < d_in:
        raise ValueError("isometry needs d_out >= d_in")
    return haar_unitary(d_out, rng)[:, :d_in]


def haar_vector(d: int, rng) -> np.ndarray:
    rng = rng_from(rng)
    v = ginibre(rng, d, 1).reshape(-1)
    return v / np.linalg.norm(v)


def random_density_array(d: int, rng, rank: int | None = None) -> np.ndarray:
    """Partial trace of a Haar-random pure state, giving rank ``min(rank, d)``."""
    rng = rng_from(rng)
    g = ginibre(rng, d, rank or d)
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_state(layout, rng, rank: int | None = None) -> DensityMatrix:
    layout = _as_layout(layout)
    return DensityMatrix(layout, random_density_array(layout.dim, rng, rank))


def random_pure_state(layout, rng) -> PureState:
    layout = _as_layout(layout)
    return PureState(layout, haar_vector(layout.dim, rng))


def random_psd(layout, rng, rank: int | None = None, scale: float = 1.0) -> Operator:
    layout = _as_layout(layout)
    return Operator(layout, scale * random_density_array(layout.dim, rng, rank))


def random_kraus(d_in: int, d_out: int, n_kraus: int, rng) -> list[np.ndarray]:
    """Kraus operators of a random channel from a Haar isometry ``d_in -> d_out * n_kraus``."""
    v = haar_isometry(d_out * n_kraus, d_in, rng)
    return [v[k * d_out:(k + 1) * d_out, :] for k in range(n_kraus)]


def random_channel(in_layout, out_layout, rng, n_kraus: int | None = None):
    from .channels import KrausChannel

    in_layout, out_layout = _as_layout(in_layout), _as_layout(out_layout)
    n_kraus = n_kraus or in_layout.dim * out_layout.dim
    ks = random_kraus(in_layout.dim, out_layout.dim, n_kraus, rng)
    return KrausChannel(in_layout, out_layout, ks, trace_preserving=True)


def random_classical_distribution(k: int, rng) -> np.ndarray:
    rng = rng_from(rng)
    return rng.dirichlet(np.ones(k))


def qubit_layout(*labels: str) -> SystemLayout:
    return SystemLayout((lab, 2) for lab in labels)
