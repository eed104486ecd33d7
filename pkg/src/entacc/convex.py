"""Small dense convex programs with duality certificates.

The semidefinite programs are stated over complex Hermitian matrix variables
and real scalars.  :func:`sdp_solve` expands every affine map in a real basis,
embeds complex Hermitian blocks as real symmetric ones
(``H ↦ [[Re H, -Im H], [Im H, Re H]]``) and hands the result to the
primal-dual interior-point solver of cvxopt.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.optimize as so

from .linalg import (
    DensityMatrix,
    Operator,
    SystemLayout,
    align,
    hermitize,
    mpow,
    ptrace_array,
    support_projector,
)

MAX_SIDE = 64
SUPPORT_RESIDUAL = 1e-9
LN2 = math.log(2.0)


# ---------------------------------------------------------------------------
# generic SDP layer


@dataclass
class SdpProblem:
    """Affine SDP over Hermitian matrix variables and real scalars.

    Parameters
    ----------
    variables : dict
        Name to side length.  Side ``0`` declares a real scalar.
    objective : callable
        Affine map from a dict of variable values to a real number.
    psd : list of callable
        Affine maps to Hermitian matrices that must be PSD.
    eq : list of callable
        Affine maps to Hermitian matrices (or scalars) that must vanish.
    sense : {"min", "max"}
    """

    variables: dict
    objective: Callable
    psd: list = field(default_factory=list)
    eq: list = field(default_factory=list)
    sense: str = "min"

    def __post_init__(self):
        if self.sense not in ("min", "max"):
            raise ValueError("sense must be 'min' or 'max'")
        for name, d in self.variables.items():
            if d < 0 or d > MAX_SIDE:
                raise ValueError(f"variable {name!r} has unsupported side {d}")


@dataclass
class SolveReport:
    primal_value: float
    dual_value: float
    gap: float
    iterations: int
    status: str
    solution: dict = field(default_factory=dict, repr=False)
    duals_psd: list = field(default_factory=list, repr=False)
    duals_eq: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {"primal": _num(self.primal_value), "dual": _num(self.dual_value),
                "gap": _num(self.gap), "iterations": int(self.iterations), "status": self.status}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))


def _num(x: float):
    if isinstance(x, float) and math.isinf(x):
        return "+inf" if x > 0 else "-inf"
    return float(x)


def _herm_basis(d: int) -> list[np.ndarray]:
    basis = []
    for i in range(d):
        e = np.zeros((d, d), dtype=complex)
        e[i, i] = 1.0
        basis.append(e)
    for i in range(d):
        for j in range(i + 1, d):
            e = np.zeros((d, d), dtype=complex)
            e[i, j] = e[j, i] = 1.0
            basis.append(e)
            e = np.zeros((d, d), dtype=complex)
            e[i, j] = -1j
            e[j, i] = 1j
            basis.append(e)
    return basis


def _herm_coords(d: int, coords: np.ndarray) -> np.ndarray:
    m = np.zeros((d, d), dtype=complex)
    k = 0
    for i in range(d):
        m[i, i] = coords[k]
        k += 1
    for i in range(d):
        for j in range(i + 1, d):
            re, im = coords[k], coords[k + 1]
            k += 2
            m[i, j] = re - 1j * im
            m[j, i] = re + 1j * im
    return m


def _herm_real_vector(m: np.ndarray) -> np.ndarray:
    """Independent real coordinates of a Hermitian matrix (or a scalar)."""
    m = np.atleast_2d(np.asarray(m, dtype=complex))
    d = m.shape[0]
    out = [m[i, i].real for i in range(d)]
    for i in range(d):
        for j in range(i + 1, d):
            out.append(m[i, j].real)
            out.append(m[i, j].imag)
    return np.array(out)


def _embed(m: np.ndarray) -> np.ndarray:
    m = np.atleast_2d(np.asarray(m, dtype=complex))
    re, im = m.real, m.imag
    return np.block([[re, -im], [im, re]])


def _unembed(z: np.ndarray) -> np.ndarray:
    d = z.shape[0] // 2
    return (z[:d, :d] + z[d:, d:]) + 1j * (z[d:, :d] - z[:d, d:])


def _layout_vars(variables: dict):
    slots = []
    for name, d in variables.items():
        if d == 0:
            slots.append((name, 0, 1))
        else:
            slots.append((name, d, d * d))
    return slots


def _values(slots, x: np.ndarray) -> dict:
    out, k = {}, 0
    for name, d, n in slots:
        if d == 0:
            out[name] = float(x[k])
        else:
            out[name] = _herm_coords(d, x[k:k + n])
        k += n
    return out


def _unit(slots, idx: int | None) -> dict:
    total = sum(n for _, _, n in slots)
    x = np.zeros(total)
    if idx is not None:
        x[idx] = 1.0
    return _values(slots, x)


def sdp_solve(p: SdpProblem, tol: float = 1e-9, max_iter: int = 100) -> SolveReport:
    """Solve ``p`` with a primal-dual interior-point method.

    Returns a report whose ``gap`` is the absolute difference of primal and
    dual objective values; ``status`` is ``optimal`` only if the gap is at
    most ``max(tol, 1e-7)``.
    """
    from cvxopt import matrix, solvers

    slots = _layout_vars(p.variables)
    nvar = sum(n for _, _, n in slots)
    zero = _unit(slots, None)
    sign = 1.0 if p.sense == "min" else -1.0
    c0 = float(np.real(p.objective(zero)))
    c = np.array([float(np.real(p.objective(_unit(slots, i)))) - c0 for i in range(nvar)]) * sign

    units = [_unit(slots, i) for i in range(nvar)]
    gs, hs, sides = [], [], []
    for f in p.psd:
        f0 = np.atleast_2d(np.asarray(f(zero), dtype=complex))
        side = f0.shape[0]
        if side > MAX_SIDE:
            raise ValueError(f"PSD block of side {side} exceeds the cap of {MAX_SIDE}")
        e0 = _embed(hermitize(f0))
        cols = []
        for u in units:
            fi = np.atleast_2d(np.asarray(f(u), dtype=complex)) - f0
            cols.append(-_embed(fi).reshape(-1, order="F"))
        gs.append(np.array(cols).T if cols else np.zeros((4 * side * side, 0)))
        hs.append(e0)
        sides.append(side)

    a_rows, b_rows = [], []
    for f in p.eq:
        f0 = _herm_real_vector(f(zero))
        cols = [(_herm_real_vector(f(u)) - f0) for u in units]
        a_rows.append(np.array(cols).T)
        b_rows.append(-f0)
    a_mat = b_vec = None
    if a_rows:
        a_full = np.vstack(a_rows)
        b_full = np.concatenate(b_rows)
        # drop linearly dependent equality rows
        q, r, piv = _qr_rank(a_full)
        keep = piv
        a_mat, b_vec = a_full[keep], b_full[keep]
        resid = np.linalg.lstsq(a_mat.T, a_full.T, rcond=None)[0].T @ b_vec - b_full
        if np.abs(resid).max(initial=0.0) > 1e-9 * max(1.0, np.abs(b_full).max(initial=0.0)):
            return SolveReport(math.nan, math.nan, math.inf, 0, "infeasible")

    kwargs = dict(Gs=[matrix(g) for g in gs], hs=[matrix(h) for h in hs])
    if a_mat is not None:
        kwargs["A"] = matrix(a_mat)
        kwargs["b"] = matrix(b_vec)
    sol = None
    # very tight tolerances occasionally break the scaling update near the
    # optimum; retry progressively looser settings
    for gtol, ftol in ((1e-10, 1e-9), (1e-9, 1e-8), (1e-8, 1e-7)):
        opts = {"show_progress": False, "abstol": gtol, "reltol": gtol, "feastol": ftol,
                "maxiters": max_iter}
        try:
            cand = solvers.sdp(matrix(c), **kwargs, options=opts)
        except (ArithmeticError, ValueError):
            continue
        if cand["status"] == "unknown" and sol is not None:
            continue
        sol = cand
        if cand["status"] != "unknown":
            break
    if sol is None:
        return SolveReport(math.nan, math.nan, math.inf, 0, "max_iter")
    st = sol["status"]
    if sol["x"] is None or st in ("primal infeasible", "dual infeasible"):
        return SolveReport(math.nan, math.nan, math.inf, int(sol.get("iterations", 0) or 0), "infeasible")
    x = np.array(sol["x"]).reshape(-1)
    pval = sign * (float(c @ x)) + c0
    zs = [np.array(z) for z in sol["zs"]]
    y = np.array(sol["y"]).reshape(-1) if a_mat is not None else np.zeros(0)
    dval_min = -sum(float(np.sum(h * z)) for h, z in zip(hs, zs)) - (float(b_vec @ y) if a_mat is not None else 0.0)
    dval = sign * dval_min + c0
    gap = abs(pval - dval)
    status = "optimal" if gap <= max(tol, 1e-7) else "max_iter"
    return SolveReport(pval, dval, gap, int(sol["iterations"]), status,
                       solution=_values(slots, x),
                       duals_psd=[_unembed(z) for z in zs],
                       duals_eq=list(y))


def _qr_rank(a: np.ndarray):
    import scipy.linalg as sl

    q, r, piv = sl.qr(a.T, pivoting=True, mode="economic")
    diag = np.abs(np.diag(r))
    if diag.size == 0:
        return q, r, np.array([], dtype=int)
    rank = int(np.sum(diag > 1e-10 * diag[0]))
    return q, r, np.sort(piv[:rank])


# ---------------------------------------------------------------------------
# max-divergence programs


def _restrict_to_support(rho: np.ndarray, sigma: np.ndarray):
    """Compress to supp σ; returns (ρ', σ', isometry) or None if supp ρ ⊄ supp σ."""
    w, v = np.linalg.eigh(hermitize(sigma))
    top = max(w[-1], 0.0)
    keep = w > 1e-12 * top if top > 0 else np.zeros_like(w, dtype=bool)
    vk = v[:, keep]
    proj = vk @ vk.conj().T
    if np.abs(rho - proj @ rho @ proj).max(initial=0.0) > SUPPORT_RESIDUAL:
        return None
    return vk.conj().T @ rho @ vk, vk.conj().T @ sigma @ vk, vk


def _matrix(x) -> np.ndarray:
    return x.matrix if isinstance(x, Operator) else np.asarray(x, dtype=complex)


def dmax(rho_a, sigma_a, tol: float = 1e-9) -> tuple[float, SolveReport]:
    """Max-divergence ``log2 min{λ : ρ ≤ λσ}`` by SDP.

    The dual program is ``max{tr Xρ : tr Xσ = 1, X ⪰ 0}``; both are solved.
    Returns ``(+inf, report)`` when the support condition fails.
    """
    rho, sigma = _matrix(rho_a), _matrix(sigma_a)
    if isinstance(rho_a, Operator) and isinstance(sigma_a, Operator) and rho_a.layout != sigma_a.layout:
        sigma = align(sigma_a, rho_a.layout).matrix
    r = _restrict_to_support(rho, sigma)
    if r is None:
        return math.inf, SolveReport(math.inf, math.inf, 0.0, 0, "infeasible")
    rho_s, sig_s, _ = r
    prob = SdpProblem({"lam": 0}, lambda v: v["lam"],
                      psd=[lambda v: v["lam"] * sig_s - rho_s])
    rep = sdp_solve(prob, tol=tol)
    return math.log2(rep.primal_value), rep


def dmax_closed_form(rho: np.ndarray, sigma: np.ndarray) -> float:
    """``log2 λ_max(σ^{-1/2} ρ σ^{-1/2})`` on the support of σ."""
    r = _restrict_to_support(_matrix(rho), _matrix(sigma))
    if r is None:
        return math.inf
    rho_s, sig_s, _ = r
    s = mpow(sig_s, -0.5)
    return math.log2(max(np.linalg.eigvalsh(hermitize(s @ rho_s @ s))[-1], 1e-300))


@dataclass
class ExtensionResult:
    value: float
    optimizer: np.ndarray | None
    report: SolveReport
    dual_report: SolveReport | None = None


def _split_ar(rho_ar: Operator, a_labels, r_labels):
    a_labels, r_labels = list(a_labels), list(r_labels)
    lay = rho_ar.layout.ordered(a_labels + r_labels)
    m = align(rho_ar, lay).matrix
    return m, rho_ar.layout.dim_of(a_labels), rho_ar.layout.dim_of(r_labels), lay


def dmax_extension(rho_ar: Operator, sigma_a: Operator, a_labels=None, r_labels=None,
                   tol: float = 1e-9) -> ExtensionResult:
    """``inf{D_max(ρ_AR ‖ σ̂_AR) : σ̂_A = σ_A}`` with primal and explicit dual SDPs.

    Primal: ``min λ`` over ``τ_AR ⪰ ρ_AR`` with ``Tr_R τ = λ σ_A``; the
    optimiser is ``σ̂ = τ/λ``.  Dual: ``max tr(X ρ_AR)`` over
    ``X = W ⊗ 1_R ⪰ 0`` with ``tr(W σ_A) = 1``, solved as its own program.
    """
    if a_labels is None:
        a_labels = sigma_a.labels
    if r_labels is None:
        r_labels = [lab for lab in rho_ar.labels if lab not in set(a_labels)]
    m, da, dr, lay = _split_ar(rho_ar, a_labels, r_labels)
    sig = align(sigma_a, lay.ordered(list(a_labels))).matrix if isinstance(sigma_a, Operator) else sigma_a
    rho_a = ptrace_array(m, [da, dr], [0])
    if _restrict_to_support(rho_a, sig) is None:
        inf = SolveReport(math.inf, math.inf, 0.0, 0, "infeasible")
        return ExtensionResult(math.inf, None, inf, inf)
    _, _, vk = _restrict_to_support(rho_a, sig)
    k = vk.shape[1]
    big = np.kron(vk, np.eye(dr))
    m_s = big.conj().T @ m @ big
    sig_s = vk.conj().T @ sig @ vk

    prob = SdpProblem(
        {"tau": k * dr, "lam": 0},
        lambda v: v["lam"],
        psd=[lambda v: v["tau"] - m_s],
        eq=[lambda v: ptrace_array(v["tau"], [k, dr], [0]) - v["lam"] * sig_s],
    )
    rep = sdp_solve(prob, tol=tol)
    # explicit dual: max tr((W ⊗ 1) ρ) s.t. W ⊗ 1 ⪰ 0, tr(W σ) = 1
    dual = SdpProblem(
        {"W": k},
        lambda v: float(np.real(np.trace(np.kron(v["W"], np.eye(dr)) @ m_s))),
        psd=[lambda v: np.kron(v["W"], np.eye(dr))],
        eq=[lambda v: np.real(np.trace(v["W"] @ sig_s)) - 1.0],
        sense="max",
    )
    drep = sdp_solve(dual, tol=tol)
    lam = rep.primal_value
    tau = rep.solution["tau"]
    opt = big @ (tau / lam) @ big.conj().T
    return ExtensionResult(math.log2(lam), opt, rep, drep)


# ---------------------------------------------------------------------------
# conditional min-entropy


def min_entropy_sdp(rho_ab: np.ndarray, da: int, db: int, tol: float = 1e-9) -> tuple[float, SolveReport]:
    """``-log2 min{tr σ_B : 1_A ⊗ σ_B ⪰ ρ_AB}``; dual ``max{tr ρX : Tr_A X = 1_B, X ⪰ 0}``."""
    prob = SdpProblem({"s": db}, lambda v: float(np.real(np.trace(v["s"]))),
                      psd=[lambda v: np.kron(np.eye(da), v["s"]) - rho_ab])
    rep = sdp_solve(prob, tol=tol)
    return -math.log2(rep.primal_value), rep


# ---------------------------------------------------------------------------
# relative entropy with a fixed marginal


def _log_derivative(w: np.ndarray, v: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Fréchet derivative of the natural log at ``V diag(w) V†`` in direction ``x``."""
    lw = np.log(w)
    w1, w2 = np.meshgrid(w, w, indexing="ij")
    l1, l2 = np.meshgrid(lw, lw, indexing="ij")
    diff = w1 - w2
    same = np.abs(diff) <= 1e-12 * np.maximum(w1, w2)
    gam = np.where(same, 1.0 / np.where(same, w1, 1.0), (l1 - l2) / np.where(same, 1.0, diff))
    xv = v.conj().T @ x @ v
    return v @ (gam * xv) @ v.conj().T


def _power_derivative(w: np.ndarray, v: np.ndarray, x: np.ndarray, p: float) -> np.ndarray:
    w1, w2 = np.meshgrid(w, w, indexing="ij")
    diff = w1 - w2
    same = np.abs(diff) <= 1e-12 * np.maximum(np.abs(w1), np.abs(w2))
    gam = np.where(same, p * np.where(same, w1, 1.0) ** (p - 1),
                   (w1 ** p - w2 ** p) / np.where(same, 1.0, diff))
    xv = v.conj().T @ x @ v
    return v @ (gam * xv) @ v.conj().T


def relative_entropy_bits(rho: np.ndarray, sigma: np.ndarray) -> float:
    wr = np.linalg.eigvalsh(hermitize(rho))
    wr = wr[wr > 1e-300]
    ws, vs = np.linalg.eigh(hermitize(sigma))
    if ws[0] <= 0:
        return math.inf
    logs = (vs * np.log(ws)) @ vs.conj().T
    return float((np.sum(wr * np.log(wr)) - np.real(np.trace(rho @ logs))) / LN2)


@dataclass
class RelEntResult:
    value: float
    sigma_hat: np.ndarray
    lower_bound: float
    gap: float
    converged: bool


@dataclass
class OptConfig:
    """Settings shared by the restart-based optimisers."""

    restarts: int = 25
    max_iter: int = 2000
    tol: float = 1e-12
    seed: int = 0
    agree_tol: float = 1e-7
    certify_tol: float = 1e-8


def relent_min_marginal(rho_ar: Operator, sigma_a: Operator, a_labels=None, r_labels=None,
                        opt_cfg: OptConfig | None = None) -> RelEntResult:
    """``inf{D(ρ_AR ‖ σ̂_AR) : σ̂ ⪰ 0, σ̂_A = σ_A}`` with a certified lower bound.

    The feasible set is parametrised as
    ``σ̂ = (σ_A^{1/2} M^{-1/2} ⊗ 1) Z Z† (…)†`` with ``M = Tr_R Z Z†``, which
    satisfies the marginal constraint identically, and the objective is
    minimised with BFGS using the analytic gradient.  Because the problem is
    convex in σ̂, the Frank-Wolfe gap
    ``tr(G σ̂) - min{tr(G τ) : τ ⪰ 0, τ_A = σ_A}`` at the returned point,
    with ``G`` the gradient, bounds the suboptimality.  The inner minimum is
    bounded from below by any ``Y`` with ``G - Y ⊗ 1 ⪰ 0`` (weak duality), so
    ``value - gap`` is a rigorous lower bound.
    """
    cfg = opt_cfg or OptConfig(restarts=4)
    if a_labels is None:
        a_labels = sigma_a.labels
    if r_labels is None:
        r_labels = [lab for lab in rho_ar.labels if lab not in set(a_labels)]
    m, da, dr, lay = _split_ar(rho_ar, a_labels, r_labels)
    sig = align(sigma_a, lay.ordered(list(a_labels))).matrix if isinstance(sigma_a, Operator) else sigma_a
    rho_a = ptrace_array(m, [da, dr], [0])
    if _restrict_to_support(rho_a, sig) is None:
        return RelEntResult(math.inf, np.full((da * dr, da * dr), np.nan), math.inf, 0.0, True)
    ws, vs = np.linalg.eigh(hermitize(sig))
    if ws[0] <= 1e-12 * ws[-1]:
        raise ValueError("relent_min_marginal needs a full-rank marginal σ_A")
    sh = (vs * np.sqrt(ws)) @ vs.conj().T
    d = da * dr
    neg_ent = -sum(x * math.log(x) for x in np.linalg.eigvalsh(hermitize(m)) if x > 1e-300)

    def build(z):
        zc = (z[: d * d] + 1j * z[d * d:]).reshape(d, d)
        p = zc @ zc.conj().T
        mm = ptrace_array(p, [da, dr], [0])
        wm, vm = np.linalg.eigh(hermitize(mm))
        wm = np.maximum(wm, 1e-300)
        n = (vm * wm ** -0.5) @ vm.conj().T
        s = sh @ n
        k = np.kron(s, np.eye(dr))
        return zc, p, wm, vm, k, k @ p @ k.conj().T

    def fun(z):
        zc, p, wm, vm, k, shat = build(z)
        w, v = np.linalg.eigh(hermitize(shat))
        if w[0] <= 0:
            return 1e6, np.zeros_like(z)
        logs = (v * np.log(w)) @ v.conj().T
        f = (-neg_ent - np.real(np.trace(m @ logs))) / LN2
        g = -_log_derivative(w, v, m) / LN2
        g = hermitize(g)
        h1 = k.conj().T @ g @ k
        cmat = ptrace_array(p @ k.conj().T @ g @ np.kron(sh, np.eye(dr)), [da, dr], [0])
        dmat = _power_derivative(wm, vm, cmat, -0.5)
        h = h1 + np.kron(dmat + dmat.conj().T, np.eye(dr))
        hz = h @ zc
        grad = np.concatenate([2 * hz.real.reshape(-1), 2 * hz.imag.reshape(-1)])
        return float(f), grad

    rng = np.random.default_rng(cfg.seed)
    best = None
    starts = [None] + [rng.standard_normal(2 * d * d) for _ in range(max(cfg.restarts - 1, 0))]
    for s0 in starts:
        if s0 is None:
            # product start σ_A ⊗ ρ_R, slightly perturbed to full rank
            rho_r = ptrace_array(m, [da, dr], [1])
            base = np.kron(sig, hermitize(0.9 * rho_r + 0.1 * np.eye(dr) / dr))
            z0 = mpow(base, 0.5)
            s0 = np.concatenate([z0.real.reshape(-1), z0.imag.reshape(-1)])
        r = so.minimize(fun, s0, jac=True, method="BFGS", options={"gtol": 1e-11, "maxiter": cfg.max_iter})
        if best is None or r.fun < best.fun:
            best = r
    shat = build(best.x)[5]
    shat = hermitize(shat)
    value = relative_entropy_bits(m, shat)
    gap = _fw_gap(m, shat, sig, da, dr)
    return RelEntResult(value, shat, value - gap, gap, bool(gap < 1e-6))


def _fw_gap(rho: np.ndarray, shat: np.ndarray, sig: np.ndarray, da: int, dr: int) -> float:
    w, v = np.linalg.eigh(hermitize(shat))
    g = hermitize(-_log_derivative(w, v, rho) / LN2)
    inner = float(np.real(np.trace(g @ shat)))
    prob = SdpProblem({"Y": da}, lambda x: float(np.real(np.trace(x["Y"] @ sig))),
                      psd=[lambda x: g - np.kron(x["Y"], np.eye(dr))], sense="max")
    rep = sdp_solve(prob, tol=1e-10)
    if rep.status == "infeasible":
        return math.inf
    y = rep.solution["Y"]
    lam = np.linalg.eigvalsh(hermitize(g - np.kron(y, np.eye(dr))))[0]
    y = y + min(lam, 0.0) * np.eye(da)
    lower_inner = float(np.real(np.trace(y @ sig)))
    return max(inner - lower_inner, 0.0)
