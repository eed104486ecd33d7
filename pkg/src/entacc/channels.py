"""Completely positive maps between labelled layouts.

Choi convention: ``J = (ch ⊗ id)(|Ω⟩⟨Ω|)`` with the unnormalised maximally
entangled ``|Ω⟩ = Σ_i |i⟩|i⟩``; the output factors come first and the input
duplicate sits on the right.  Input-duplicate labels carry the suffix ``~``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .linalg import (
    LayoutError,
    Operator,
    SystemLayout,
    _as_layout,
    align,
    identity,
    matrix_from_json,
    matrix_to_json,
    permute_array,
    tensor,
    trace_out,
)

TP_TOL = 1e-10
NS_TOL = 1e-8
DUP = "~"


def _labels(x) -> tuple[str, ...]:
    if isinstance(x, str):
        return (x,)
    return tuple(x)


@dataclass(frozen=True, eq=False)
class KrausChannel:
    """Kraus representation ``ρ ↦ Σ K ρ K†`` of a CP map ``in_layout -> out_layout``."""

    in_layout: SystemLayout
    out_layout: SystemLayout
    kraus_ops: tuple[np.ndarray, ...] = field(repr=False)
    trace_preserving: bool = True

    def __init__(self, in_layout, out_layout, kraus_ops, trace_preserving: bool = True,
                 tp_tol: float = TP_TOL):
        in_layout, out_layout = _as_layout(in_layout), _as_layout(out_layout)
        ks = []
        for k in kraus_ops:
            k = np.array(k, dtype=complex)
            if k.shape != (out_layout.dim, in_layout.dim):
                raise LayoutError(f"Kraus operator shape {k.shape} != {(out_layout.dim, in_layout.dim)}")
            k.setflags(write=False)
            ks.append(k)
        if not ks:
            raise ValueError("at least one Kraus operator is required")
        if trace_preserving:
            s = sum(k.conj().T @ k for k in ks)
            res = np.abs(s - np.eye(in_layout.dim)).max()
            if res > tp_tol:
                raise ValueError(f"channel flagged trace preserving but residual is {res:.3e}")
        object.__setattr__(self, "in_layout", in_layout)
        object.__setattr__(self, "out_layout", out_layout)
        object.__setattr__(self, "kraus_ops", tuple(ks))
        object.__setattr__(self, "trace_preserving", bool(trace_preserving))

    @property
    def stacked(self) -> np.ndarray:
        return np.stack(self.kraus_ops)

    def apply_array(self, rho: np.ndarray) -> np.ndarray:
        """Action on a bare matrix over ``in_layout``."""
        k = self.stacked
        return np.einsum("kai,ij,kbj->ab", k, rho, k.conj())

    def to_dict(self) -> dict:
        return {
            "in_layout": self.in_layout.to_json(),
            "out_layout": self.out_layout.to_json(),
            "kraus": [matrix_to_json(k) for k in self.kraus_ops],
            "trace_preserving": self.trace_preserving,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "KrausChannel":
        return cls(SystemLayout(tuple(f) for f in obj["in_layout"]),
                   SystemLayout(tuple(f) for f in obj["out_layout"]),
                   [matrix_from_json(k) for k in obj["kraus"]],
                   trace_preserving=bool(obj.get("trace_preserving", True)))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "KrausChannel":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True, eq=False)
class ChoiMatrix:
    in_layout: SystemLayout
    out_layout: SystemLayout
    matrix: Operator = field(repr=False)
    trace_preserving: bool = True

    def __init__(self, in_layout, out_layout, matrix, trace_preserving: bool = True,
                 tol: float = 1e-10):
        in_layout, out_layout = _as_layout(in_layout), _as_layout(out_layout)
        layout = out_layout.concat(dup_layout(in_layout))
        m = matrix.matrix if isinstance(matrix, Operator) else np.asarray(matrix, dtype=complex)
        op = Operator(layout, m)
        w = np.linalg.eigvalsh(0.5 * (m + m.conj().T))
        if w[0] < -tol * max(1.0, w[-1]):
            raise ValueError(f"Choi matrix is not PSD (min eigenvalue {w[0]:.3e})")
        if trace_preserving:
            marg = trace_out(op, out_layout.labels).matrix
            res = np.abs(marg - np.eye(in_layout.dim)).max()
            if res > max(tol, 1e-9):
                raise ValueError(f"Choi matrix flagged TP but Tr_out J deviates by {res:.3e}")
        object.__setattr__(self, "in_layout", in_layout)
        object.__setattr__(self, "out_layout", out_layout)
        object.__setattr__(self, "matrix", op)
        object.__setattr__(self, "trace_preserving", bool(trace_preserving))


def dup_layout(layout: SystemLayout) -> SystemLayout:
    return SystemLayout((lab + DUP, d) for lab, d in layout.factors)


def apply(ch: KrausChannel, rho: Operator, acting_on: Iterable[str] | None = None) -> Operator:
    """Apply ``ch`` to the ``acting_on`` factors of ``rho``, identity elsewhere.

    The output factors replace the input factors at the position of the first
    acted-on factor; spectators keep their order.
    """
    in_labels = ch.in_layout.labels
    acting = set(in_labels if acting_on is None else _labels(acting_on))
    if acting != set(in_labels):
        raise LayoutError(f"acting_on {sorted(acting)} does not match channel input {list(in_labels)}")
    for lab, d in ch.in_layout.factors:
        if lab not in rho.layout or rho.layout.dims[rho.layout.index(lab)] != d:
            raise LayoutError(f"state layout has no factor ({lab!r}, {d})")
    rest = [lab for lab in rho.labels if lab not in acting]
    rest_layout = rho.layout.ordered(rest)
    order = list(in_labels) + rest
    perm = [rho.layout.index(lab) for lab in order]
    m = permute_array(rho.matrix, rho.layout.dims, perm)
    din, dr, dout = ch.in_layout.dim, rest_layout.dim, ch.out_layout.dim
    t = m.reshape(din, dr, din, dr)
    k = ch.stacked
    out = np.einsum("kai,ixjy,kbj->axby", k, t, k.conj(), optimize=True).reshape(dout * dr, dout * dr)
    cur = ch.out_layout.concat(rest_layout)
    positions = [rho.layout.index(lab) for lab in in_labels]
    first = min(positions) if positions else 0
    before = [lab for lab in rho.labels[:first] if lab not in acting]
    after = [lab for lab in rho.labels[first:] if lab not in acting]
    final = before + list(ch.out_layout.labels) + after
    res = Operator(cur, out)
    if list(cur.labels) != final:
        from .linalg import permute_systems
        res = permute_systems(res, final)
    return res


def identity_channel(layout) -> KrausChannel:
    layout = _as_layout(layout)
    return KrausChannel(layout, layout, [np.eye(layout.dim)])


def unitary_channel(layout, u: np.ndarray) -> KrausChannel:
    layout = _as_layout(layout)
    return KrausChannel(layout, layout, [u])


def depolarizing(layout, p: float) -> KrausChannel:
    """``ρ ↦ (1-p) ρ + p tr(ρ) 1/d``."""
    layout = _as_layout(layout)
    d = layout.dim
    ks = [np.sqrt(1 - p) * np.eye(d)] if p < 1 else []
    for i in range(d):
        for j in range(d):
            e = np.zeros((d, d))
            e[i, j] = 1.0
            ks.append(np.sqrt(p / d) * e)
    return KrausChannel(layout, layout, ks)


def dephasing(layout, p: float = 1.0) -> KrausChannel:
    layout = _as_layout(layout)
    d = layout.dim
    ks = [np.sqrt(1 - p) * np.eye(d)] if p < 1 else []
    for i in range(d):
        e = np.zeros((d, d))
        e[i, i] = 1.0
        ks.append(np.sqrt(p) * e)
    return KrausChannel(layout, layout, ks)


def trace_channel(layout) -> KrausChannel:
    layout = _as_layout(layout)
    return KrausChannel(layout, SystemLayout(), [ket_row(layout.dim, i) for i in range(layout.dim)])


def ket_row(d: int, i: int) -> np.ndarray:
    r = np.zeros((1, d))
    r[0, i] = 1.0
    return r


def preparation(layout, state: np.ndarray) -> KrausChannel:
    """Channel from the trivial system preparing ``state``."""
    layout = _as_layout(layout)
    w, v = np.linalg.eigh(0.5 * (state + state.conj().T))
    ks = [np.sqrt(x) * v[:, [i]] for i, x in enumerate(w) if x > 1e-15]
    return KrausChannel(SystemLayout(), layout, ks)


def replacer(label: str, dim: int) -> KrausChannel:
    """The map ``ω_{AR} ↦ 1_A ⊗ ω_R`` on the ``label`` factor (not trace preserving)."""
    if dim < 1:
        raise ValueError("dimension must be positive")
    layout = SystemLayout([(label, dim)])
    ks = []
    for i in range(dim):
        for j in range(dim):
            e = np.zeros((dim, dim))
            e[i, j] = 1.0
            ks.append(e)
    return KrausChannel(layout, layout, ks, trace_preserving=False)


def choi_from_kraus(ch: KrausChannel) -> ChoiMatrix:
    vecs = ch.stacked.reshape(len(ch.kraus_ops), -1)
    j = vecs.T @ vecs.conj()
    return ChoiMatrix(ch.in_layout, ch.out_layout, j, trace_preserving=ch.trace_preserving)


def kraus_from_choi(c: ChoiMatrix, rank_tol: float = 1e-12) -> KrausChannel:
    m = c.matrix.matrix
    w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    top = max(w[-1], 0.0)
    if w[0] < -1e-10 * max(1.0, top):
        raise ValueError(f"Choi matrix is not PSD (min eigenvalue {w[0]:.3e})")
    dout, din = c.out_layout.dim, c.in_layout.dim
    ks = [np.sqrt(x) * v[:, i].reshape(dout, din) for i, x in enumerate(w) if x > rank_tol * max(top, 1e-300)]
    if not ks:
        ks = [np.zeros((dout, din))]
    return KrausChannel(c.in_layout, c.out_layout, ks, trace_preserving=c.trace_preserving, tp_tol=1e-8)


def compose(a: KrausChannel, b: KrausChannel) -> KrausChannel:
    """``a ∘ b``: apply ``b`` first."""
    if b.out_layout != a.in_layout:
        raise LayoutError(f"cannot compose: {b.out_layout.factors} -> {a.in_layout.factors}")
    ks = [ka @ kb for ka in a.kraus_ops for kb in b.kraus_ops]
    tp = a.trace_preserving and b.trace_preserving
    return KrausChannel(b.in_layout, a.out_layout, ks, trace_preserving=tp, tp_tol=1e-9)


def tensor_channels(a: KrausChannel, b: KrausChannel) -> KrausChannel:
    ks = [np.kron(ka, kb) for ka in a.kraus_ops for kb in b.kraus_ops]
    tp = a.trace_preserving and b.trace_preserving
    return KrausChannel(a.in_layout.concat(b.in_layout), a.out_layout.concat(b.out_layout), ks,
                        trace_preserving=tp, tp_tol=1e-9)


def tensor_power(ch: KrausChannel, n: int, suffix=lambda lab, i: f"{lab}{i}") -> KrausChannel:
    """``ch^{⊗n}`` with factor labels renamed by ``suffix(label, copy)``."""
    def relabel(layout, i):
        return SystemLayout((suffix(lab, i), d) for lab, d in layout.factors)

    out = None
    for i in range(n):
        c = KrausChannel(relabel(ch.in_layout, i), relabel(ch.out_layout, i), ch.kraus_ops,
                         trace_preserving=ch.trace_preserving)
        out = c if out is None else tensor_channels(out, c)
    return out


@dataclass(frozen=True, eq=False)
class Isometry:
    in_layout: SystemLayout
    out_layout: SystemLayout
    matrix: np.ndarray = field(repr=False)


def stinespring(ch: KrausChannel, env_label: str) -> Isometry:
    """Isometry ``V = Σ_k K_k ⊗ |k⟩_env`` with output layout ``out ⊗ env``."""
    if not ch.trace_preserving:
        raise ValueError("Stinespring dilation requires a trace-preserving channel")
    k = ch.stacked
    n = k.shape[0]
    v = np.einsum("kai->aki", k).reshape(ch.out_layout.dim * n, ch.in_layout.dim)
    out = ch.out_layout.concat(SystemLayout([(env_label, n)]))
    return Isometry(ch.in_layout, out, v)


def partial_trace_channel(ch: KrausChannel, drop: Iterable[str]) -> KrausChannel:
    """``Tr_drop ∘ ch`` in Kraus form."""
    drop = set(_labels(drop))
    out = ch.out_layout
    keep = [lab for lab in out.labels if lab not in drop]
    drop_order = [lab for lab in out.labels if lab in drop]
    perm = [out.index(lab) for lab in keep + drop_order]
    dk = out.dim_of(keep)
    dd = out.dim_of(drop_order)
    ks = []
    for k in ch.kraus_ops:
        t = k.reshape(tuple(out.dims) + (ch.in_layout.dim,)).transpose(perm + [len(out)])
        t = t.reshape(dk, dd, ch.in_layout.dim)
        for j in range(dd):
            ks.append(t[:, j, :])
    return KrausChannel(ch.in_layout, out.sub(keep), ks, trace_preserving=ch.trace_preserving, tp_tol=1e-9)


def check_nonsignalling(m: KrausChannel, r_labels, e_in_labels, e_out_labels, a_labels,
                        tol: float = NS_TOL):
    """Test whether ``Tr_A ∘ m = R̂ ∘ Tr_R`` for some channel ``R̂: E -> E'``.

    Parameters
    ----------
    m : KrausChannel
        Map on ``R E`` with output ``A... E'``.
    r_labels, e_in_labels : labels partitioning the input layout.
    e_out_labels, a_labels : labels partitioning the output layout;
        ``a_labels`` are all output factors other than ``E'`` (including ``R'``).
    tol : float
        Max-norm tolerance on the Choi-matrix residual.

    Returns
    -------
    passes : bool
    residual : float
    extracted : KrausChannel or None
        The channel ``R̂`` on a pass.
    """
    r, e_in = _labels(r_labels), _labels(e_in_labels)
    e_out, a = _labels(e_out_labels), _labels(a_labels)
    if sorted(r + e_in) != sorted(m.in_layout.labels) or len(set(r) & set(e_in)):
        raise LayoutError("r_labels and e_in_labels must partition the input layout")
    if sorted(e_out + a) != sorted(m.out_layout.labels) or len(set(e_out) & set(a)):
        raise LayoutError("e_out_labels and a_labels must partition the output layout")
    j = choi_from_kraus(m).matrix
    jn = trace_out(j, a)
    r_dup = [lab + DUP for lab in r]
    d_r = m.in_layout.dim_of(r)
    reduced = trace_out(jn, r_dup) * (1.0 / d_r)
    cand = align(tensor(reduced, identity(jn.layout.ordered(r_dup))), jn.layout)
    residual = float(np.abs(cand.matrix - jn.matrix).max())
    passes = residual <= tol
    extracted = None
    if passes:
        e_in_layout = m.in_layout.sub(e_in)
        e_out_layout = m.out_layout.sub(e_out)
        target = e_out_layout.concat(dup_layout(e_in_layout))
        jr = align(reduced, target)
        c = ChoiMatrix(e_in_layout, e_out_layout, jr, trace_preserving=False)
        ks = kraus_from_choi(c).kraus_ops
        s = sum(k.conj().T @ k for k in ks)
        tp = m.trace_preserving and np.abs(s - np.eye(e_in_layout.dim)).max() <= 1e-8
        extracted = KrausChannel(e_in_layout, e_out_layout, ks, trace_preserving=tp, tp_tol=1e-8)
    return passes, residual, extracted


def relabel_channel(ch: KrausChannel, mapping: dict[str, str]) -> KrausChannel:
    def rl(layout):
        return SystemLayout((mapping.get(lab, lab), d) for lab, d in layout.factors)

    return KrausChannel(rl(ch.in_layout), rl(ch.out_layout), ch.kraus_ops,
                        trace_preserving=ch.trace_preserving, tp_tol=1e-8)


def channels_equivalent(a: KrausChannel, b: KrausChannel, tol: float = 1e-9) -> bool:
    """Compare Choi matrices (equivalent to action on a full operator basis)."""
    if a.in_layout != b.in_layout or a.out_layout != b.out_layout:
        return False
    ja = choi_from_kraus(a).matrix.matrix if a.trace_preserving else _raw_choi(a)
    jb = choi_from_kraus(b).matrix.matrix if b.trace_preserving else _raw_choi(b)
    return float(np.abs(ja - jb).max()) <= tol


def _raw_choi(ch: KrausChannel) -> np.ndarray:
    vecs = ch.stacked.reshape(len(ch.kraus_ops), -1)
    return vecs.T @ vecs.conj()


def choi_array(ch: KrausChannel) -> np.ndarray:
    return _raw_choi(ch)


def apply_via_choi(c: ChoiMatrix, rho: np.ndarray) -> np.ndarray:
    """``Tr_in[(1 ⊗ ρ^T) J]`` for a bare input matrix."""
    dout, din = c.out_layout.dim, c.in_layout.dim
    j = c.matrix.matrix.reshape(dout, din, dout, din)
    return np.einsum("aibj,ji->ab", j, rho)


def measure_prepare(in_layout, out_layout, povm: Sequence[np.ndarray], states: Sequence[np.ndarray]) -> KrausChannel:
    """``ρ ↦ Σ_k tr(M_k ρ) τ_k`` (entanglement breaking)."""
    in_layout, out_layout = _as_layout(in_layout), _as_layout(out_layout)
    ks = []
    for mk, tau in zip(povm, states):
        wm, vm = np.linalg.eigh(0.5 * (mk + mk.conj().T))
        wt, vt = np.linalg.eigh(0.5 * (tau + tau.conj().T))
        for i, x in enumerate(wm):
            if x <= 1e-15:
                continue
            for j, y in enumerate(wt):
                if y <= 1e-15:
                    continue
                ks.append(np.sqrt(x * y) * np.outer(vt[:, j], vm[:, i].conj()))
    return KrausChannel(in_layout, out_layout, ks, tp_tol=1e-9)
