"""Dense linear algebra over labelled tensor-product systems.

Every operator carries a :class:`SystemLayout`, an ordered list of
``(label, dimension)`` factors.  Matrix entries are row-major over that order,
so ``A ⊗ B`` with layout ``[("A", 2), ("B", 3)]`` is the usual Kronecker
product.  All matrix functions go through a Hermitian eigendecomposition.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

SystemLabel = str

HERM_TOL = 1e-10
PSD_TOL = 1e-10
SUPPORT_TOL = 1e-12


class LayoutError(ValueError):
    """Raised when system labels or dimensions do not fit together."""


@dataclass(frozen=True)
class SystemLayout:
    """Ordered labelled tensor factors.

    Parameters
    ----------
    factors : sequence of (label, dim)
        Labels must be nonempty and pairwise distinct, dims positive.
    """

    factors: tuple[tuple[str, int], ...]

    def __init__(self, factors: Iterable[tuple[str, int]] = ()):
        fs = tuple((str(lab), int(d)) for lab, d in factors)
        seen = set()
        for lab, d in fs:
            if not lab:
                raise LayoutError("system labels must be nonempty")
            if lab in seen:
                raise LayoutError(f"duplicate system label {lab!r}")
            if d < 1:
                raise LayoutError(f"system {lab!r} has non-positive dimension {d}")
            seen.add(lab)
        object.__setattr__(self, "factors", fs)

    @classmethod
    def of(cls, **dims: int) -> "SystemLayout":
        """``SystemLayout.of(A=2, B=3)``; keyword order is kept."""
        return cls(dims.items())

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(lab for lab, _ in self.factors)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(d for _, d in self.factors)

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims, dtype=np.int64)) if self.factors else 1

    def __len__(self) -> int:
        return len(self.factors)

    def __contains__(self, label: object) -> bool:
        return label in self.labels

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise LayoutError(f"unknown system label {label!r}") from None

    def dim_of(self, labels: Iterable[str]) -> int:
        return int(np.prod([self.factors[self.index(lab)][1] for lab in labels], dtype=np.int64))

    def sub(self, labels: Iterable[str]) -> "SystemLayout":
        """Sub-layout with the given labels, in this layout's order."""
        wanted = set(labels)
        for lab in wanted:
            self.index(lab)
        return SystemLayout(f for f in self.factors if f[0] in wanted)

    def ordered(self, labels: Sequence[str]) -> "SystemLayout":
        """Sub-layout with the given labels, in the given order."""
        return SystemLayout((lab, self.factors[self.index(lab)][1]) for lab in labels)

    def without(self, labels: Iterable[str]) -> "SystemLayout":
        drop = set(labels)
        for lab in drop:
            self.index(lab)
        return SystemLayout(f for f in self.factors if f[0] not in drop)

    def concat(self, other: "SystemLayout") -> "SystemLayout":
        clash = set(self.labels) & set(other.labels)
        if clash:
            raise LayoutError(f"label collision: {sorted(clash)[0]!r}")
        return SystemLayout(self.factors + other.factors)

    def to_json(self) -> list:
        return [[lab, d] for lab, d in self.factors]


def _as_layout(layout) -> SystemLayout:
    if isinstance(layout, SystemLayout):
        return layout
    return SystemLayout(layout)


@dataclass(frozen=True, eq=False)
class Operator:
    """Dense square complex matrix bound to a layout."""

    layout: SystemLayout
    matrix: np.ndarray = field(repr=False)

    def __init__(self, layout, matrix):
        layout = _as_layout(layout)
        m = np.array(matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise LayoutError(f"operator matrix must be square, got shape {m.shape}")
        if m.shape[0] != layout.dim:
            raise LayoutError(f"matrix side {m.shape[0]} does not match layout dimension {layout.dim}")
        m.setflags(write=False)
        object.__setattr__(self, "layout", layout)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.layout.dim

    @property
    def labels(self) -> tuple[str, ...]:
        return self.layout.labels

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def dag(self) -> "Operator":
        return Operator(self.layout, self.matrix.conj().T)

    def is_hermitian(self, tol: float = HERM_TOL) -> bool:
        return hermiticity_residual(self.matrix) <= tol

    def _check_same(self, other: "Operator") -> None:
        if self.layout != other.layout:
            raise LayoutError(f"layout mismatch: {self.layout.factors} vs {other.layout.factors}")

    def __add__(self, other: "Operator") -> "Operator":
        self._check_same(other)
        return Operator(self.layout, self.matrix + other.matrix)

    def __sub__(self, other: "Operator") -> "Operator":
        self._check_same(other)
        return Operator(self.layout, self.matrix - other.matrix)

    def __mul__(self, scalar) -> "Operator":
        return Operator(self.layout, self.matrix * scalar)

    __rmul__ = __mul__

    def __matmul__(self, other: "Operator") -> "Operator":
        self._check_same(other)
        return Operator(self.layout, self.matrix @ other.matrix)

    def allclose(self, other: "Operator", tol: float = 1e-10) -> bool:
        return self.layout == other.layout and np.abs(self.matrix - other.matrix).max() <= tol


class DensityMatrix(Operator):
    """Positive semidefinite operator with unit trace.

    Use :meth:`subnormalized` for conditional states with trace at most one.
    """

    def __init__(self, layout, matrix, trace_tol: float = 1e-10, psd_tol: float = PSD_TOL,
                 subnormalized: bool = False):
        super().__init__(layout, matrix)
        m = self.matrix
        if hermiticity_residual(m) > psd_tol:
            raise ValueError("density matrix is not Hermitian")
        lam_min = np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0] if m.size else 0.0
        if lam_min < -psd_tol:
            raise ValueError(f"density matrix has negative eigenvalue {lam_min:.3e}")
        tr = np.trace(m).real
        if subnormalized:
            if tr > 1 + trace_tol:
                raise ValueError(f"subnormalised state has trace {tr} > 1")
        elif abs(tr - 1) > trace_tol:
            raise ValueError(f"density matrix has trace {tr}, expected 1")
        object.__setattr__(self, "trace_tol", trace_tol)
        object.__setattr__(self, "psd_tol", psd_tol)
        object.__setattr__(self, "is_subnormalized", subnormalized)

    @classmethod
    def subnormalized(cls, layout, matrix, trace_tol: float = 1e-10, psd_tol: float = PSD_TOL):
        return cls(layout, matrix, trace_tol=trace_tol, psd_tol=psd_tol, subnormalized=True)

    @classmethod
    def from_operator(cls, op: Operator, **kw) -> "DensityMatrix":
        return cls(op.layout, op.matrix, **kw)


@dataclass(frozen=True, eq=False)
class PureState:
    """Unit vector on a layout."""

    layout: SystemLayout
    amplitudes: np.ndarray = field(repr=False)

    def __init__(self, layout, amplitudes, norm_tol: float = 1e-12):
        layout = _as_layout(layout)
        v = np.array(amplitudes, dtype=complex).reshape(-1)
        if v.size != layout.dim:
            raise LayoutError(f"vector length {v.size} does not match layout dimension {layout.dim}")
        if abs(np.linalg.norm(v) - 1) > norm_tol:
            raise ValueError(f"state vector has norm {np.linalg.norm(v)}")
        v.setflags(write=False)
        object.__setattr__(self, "layout", layout)
        object.__setattr__(self, "amplitudes", v)

    def density(self) -> DensityMatrix:
        v = self.amplitudes
        return DensityMatrix(self.layout, np.outer(v, v.conj()))


# ---------------------------------------------------------------------------
# array-level helpers (used in inner loops)


def hermiticity_residual(m: np.ndarray) -> float:
    if m.size == 0:
        return 0.0
    return float(np.abs(m - m.conj().T).max())


def hermitize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.conj().T)


def ptrace_array(m: np.ndarray, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Partial trace of a matrix with factor dims ``dims`` keeping positions ``keep``.

    ``keep`` must be increasing; the result follows the original order.
    """
    n = len(dims)
    keep = sorted(keep)
    t = m.reshape(tuple(dims) * 2)
    letters = [chr(ord("a") + i) for i in range(2 * n)]
    row = letters[:n]
    col = [letters[n + i] if i in keep else letters[i] for i in range(n)]
    out = [row[i] for i in keep] + [col[i] for i in keep]
    expr = "".join(row) + "".join(col) + "->" + "".join(out)
    d = int(np.prod([dims[i] for i in keep], dtype=np.int64)) if keep else 1
    return np.einsum(expr, t).reshape(d, d)


def permute_array(m: np.ndarray, dims: Sequence[int], perm: Sequence[int]) -> np.ndarray:
    """Reorder tensor factors: new factor ``k`` is old factor ``perm[k]``."""
    n = len(dims)
    t = m.reshape(tuple(dims) * 2)
    t = t.transpose(list(perm) + [n + p for p in perm])
    return t.reshape(m.shape)


def eigh_desc(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    w, v = np.linalg.eigh(hermitize(m))
    return w[::-1], v[:, ::-1]


def mfunc(m: np.ndarray, f) -> np.ndarray:
    """Apply a scalar function to a Hermitian matrix through its eigenbasis."""
    w, v = np.linalg.eigh(hermitize(m))
    return (v * f(w)) @ v.conj().T


def mpow(m: np.ndarray, p: float, support_tol: float = SUPPORT_TOL) -> np.ndarray:
    """``m^p`` on the support of a PSD matrix; eigenvalues below the cutoff map to 0."""
    w, v = np.linalg.eigh(hermitize(m))
    top = max(w.max(initial=0.0), 0.0)
    keep = w > support_tol * top if top > 0 else np.zeros_like(w, dtype=bool)
    wp = np.zeros_like(w)
    wp[keep] = w[keep] ** p
    return (v * wp) @ v.conj().T


def support_projector(m: np.ndarray, support_tol: float = SUPPORT_TOL) -> np.ndarray:
    w, v = np.linalg.eigh(hermitize(m))
    top = max(w.max(initial=0.0), 0.0)
    keep = w > support_tol * top if top > 0 else np.zeros_like(w, dtype=bool)
    vk = v[:, keep]
    return vk @ vk.conj().T


def entropy_bits(m: np.ndarray) -> float:
    """von Neumann entropy (base 2) of a PSD matrix, with 0 log 0 = 0."""
    w = np.linalg.eigvalsh(hermitize(m))
    w = w[w > 1e-300]
    return float(-np.sum(w * np.log2(w)))


# ---------------------------------------------------------------------------
# operator-level API


def tensor(a: Operator, b: Operator) -> Operator:
    """Kronecker product with concatenated layout."""
    layout = a.layout.concat(b.layout)
    return Operator(layout, np.kron(a.matrix, b.matrix))


def tensor_all(ops: Sequence[Operator]) -> Operator:
    out = ops[0]
    for op in ops[1:]:
        out = tensor(out, op)
    return out


def identity(layout) -> Operator:
    layout = _as_layout(layout)
    return Operator(layout, np.eye(layout.dim))


def partial_trace(a: Operator, keep: Iterable[str]) -> Operator:
    """Marginal on the ``keep`` systems, layout order preserved."""
    keep = set(keep)
    idx = sorted(a.layout.index(lab) for lab in keep)
    m = ptrace_array(a.matrix, a.layout.dims, idx)
    out = Operator(SystemLayout(a.layout.factors[i] for i in idx), m)
    if isinstance(a, DensityMatrix):
        return DensityMatrix(out.layout, out.matrix, trace_tol=max(a.trace_tol, 1e-9),
                             psd_tol=max(a.psd_tol, 1e-9), subnormalized=a.is_subnormalized)
    return out


def trace_out(a: Operator, drop: Iterable[str]) -> Operator:
    drop = set(drop)
    return partial_trace(a, [lab for lab in a.labels if lab not in drop])


def permute_systems(a: Operator, new_order: Sequence[str]) -> Operator:
    """Reorder the tensor factors of ``a``; a similarity by a permutation matrix."""
    new_order = list(new_order)
    if sorted(new_order) != sorted(a.labels) or len(set(new_order)) != len(new_order):
        raise LayoutError(f"{new_order} is not a permutation of {list(a.labels)}")
    perm = [a.layout.index(lab) for lab in new_order]
    m = permute_array(a.matrix, a.layout.dims, perm)
    layout = a.layout.ordered(new_order)
    if isinstance(a, DensityMatrix):
        return DensityMatrix(layout, m, trace_tol=a.trace_tol, psd_tol=a.psd_tol,
                             subnormalized=a.is_subnormalized)
    return Operator(layout, m)


def align(a: Operator, layout: SystemLayout) -> Operator:
    """Permute ``a`` so that its factor order matches ``layout``."""
    if a.layout == layout:
        return a
    out = permute_systems(a, layout.labels)
    if out.layout != layout:
        raise LayoutError(f"layout mismatch: {a.layout.factors} vs {layout.factors}")
    return out


def herm_eig(a: Operator | np.ndarray, tol: float = HERM_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues in descending order and the matching unitary of eigenvectors."""
    m = a.matrix if isinstance(a, Operator) else np.asarray(a, dtype=complex)
    scale = max(1.0, float(np.abs(m).max(initial=0.0)))
    if hermiticity_residual(m) > tol * scale:
        raise ValueError("matrix is not Hermitian within tolerance")
    return eigh_desc(m)


def power_on_support(a: Operator, p: float, support_tol: float = SUPPORT_TOL,
                     psd_tol: float = PSD_TOL) -> Operator:
    """``a^p`` restricted to the support of ``a``.

    Eigenvalues at most ``support_tol * λ_max`` are treated as zero and mapped
    to zero, so negative ``p`` gives the pseudo-inverse power.
    """
    w, v = herm_eig(a)
    top = max(w[0] if w.size else 0.0, 0.0)
    if w.size and w[-1] < -psd_tol * max(1.0, top):
        raise ValueError(f"matrix has negative eigenvalue {w[-1]:.3e}")
    keep = w > support_tol * top if top > 0 else np.zeros_like(w, dtype=bool)
    wp = np.zeros_like(w)
    wp[keep] = w[keep] ** p
    return Operator(a.layout, (v * wp) @ v.conj().T)


def purify(rho: DensityMatrix, purifier_label: str) -> PureState:
    """Purification on ``rho.layout`` followed by a purifier of the same dimension."""
    w, v = herm_eig(rho)
    d = rho.dim
    w = np.clip(w, 0.0, None)
    w = w / w.sum()
    psi = (v * np.sqrt(w)).reshape(-1)  # sum_i sqrt(w_i) |v_i>|i>
    layout = rho.layout.concat(SystemLayout([(purifier_label, d)]))
    return PureState(layout, psi / np.linalg.norm(psi))


def ket(layout, *indices: int) -> np.ndarray:
    layout = _as_layout(layout)
    v = np.zeros(layout.dim, dtype=complex)
    v[np.ravel_multi_index(indices, layout.dims)] = 1.0
    return v


# ---------------------------------------------------------------------------
# JSON


def matrix_to_json(m: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m)]


def matrix_from_json(entries) -> np.ndarray:
    a = np.array(entries, dtype=float)
    if a.ndim != 3 or a.shape[-1] != 2:
        raise ValueError("entries must be a 2-d array of [re, im] pairs")
    return a[..., 0] + 1j * a[..., 1]


def operator_to_dict(op: Operator) -> dict:
    return {"layout": op.layout.to_json(), "entries": matrix_to_json(op.matrix)}


def operator_from_dict(obj: dict) -> Operator:
    if set(obj) != {"layout", "entries"}:
        raise ValueError(f"operator JSON needs exactly keys layout, entries; got {sorted(obj)}")
    return Operator(SystemLayout(tuple(f) for f in obj["layout"]), matrix_from_json(obj["entries"]))


def operator_to_json(op: Operator) -> str:
    return json.dumps(operator_to_dict(op), separators=(",", ":"))


def operator_from_json(text: str) -> Operator:
    return operator_from_dict(json.loads(text))
