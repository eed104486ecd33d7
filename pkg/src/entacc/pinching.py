"""Spectral pinching maps and distinct-eigenvalue counting."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import LayoutError, Operator, SystemLayout, hermiticity_residual, hermitize

CLUSTER_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class PinchingMap:
    """Projectors onto the (clustered) eigenspaces of a Hermitian operator."""

    layout: SystemLayout
    projectors: tuple[np.ndarray, ...] = field(repr=False)
    eigenvalues: tuple[float, ...]
    source: str = ""

    def __len__(self) -> int:
        return len(self.projectors)

    def __call__(self, omega: Operator) -> Operator:
        return pinch(self, omega)


def cluster_eigenvalues(w: np.ndarray, cluster_tol: float = CLUSTER_TOL) -> list[np.ndarray]:
    """Group ascending eigenvalues by a sorted-gap scan.

    A new cluster starts whenever the gap to the previous eigenvalue exceeds
    ``cluster_tol * max|λ|``.
    """
    if w.size == 0:
        return []
    scale = float(np.abs(w).max())
    thresh = cluster_tol * (scale if scale > 0 else 1.0)
    groups, start = [], 0
    for i in range(1, w.size):
        if w[i] - w[i - 1] > thresh:
            groups.append(np.arange(start, i))
            start = i
    groups.append(np.arange(start, w.size))
    return groups


def _check_herm(m: np.ndarray) -> None:
    scale = max(1.0, float(np.abs(m).max(initial=0.0)))
    if hermiticity_residual(m) > 1e-10 * scale:
        raise ValueError("pinching requires a Hermitian operator")


def pinching_map(sigma: Operator, cluster_tol: float = CLUSTER_TOL, source: str = "") -> PinchingMap:
    m = sigma.matrix
    _check_herm(m)
    w, v = np.linalg.eigh(hermitize(m))
    projs, vals = [], []
    for g in cluster_eigenvalues(w, cluster_tol):
        vg = v[:, g]
        projs.append(vg @ vg.conj().T)
        vals.append(float(w[g].mean()))
    return PinchingMap(sigma.layout, tuple(projs), tuple(vals), source or "spectral pinching")


def pinch(p: PinchingMap, omega: Operator) -> Operator:
    if omega.dim != p.layout.dim:
        raise LayoutError(f"dimension mismatch: {omega.dim} vs {p.layout.dim}")
    return Operator(omega.layout, pinch_array(p.projectors, omega.matrix))


def pinch_array(projectors, m: np.ndarray) -> np.ndarray:
    out = np.zeros_like(m, dtype=complex)
    for q in projectors:
        out += q @ m @ q
    return out


def distinct_spectrum_count(a: Operator | np.ndarray, cluster_tol: float = CLUSTER_TOL) -> int:
    m = a.matrix if isinstance(a, Operator) else np.asarray(a)
    _check_herm(m)
    return len(cluster_eigenvalues(np.linalg.eigvalsh(hermitize(m)), cluster_tol))
