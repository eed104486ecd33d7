"""Sandwiched Rényi divergences, conditional entropies and channel divergences.

All quantities are in bits.  Orders are plain floats: ``1.0`` selects the
von Neumann (relative entropy) limit and ``math.inf`` the max-divergence /
min-entropy limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.optimize as so

from . import convex
from .channels import KrausChannel, tensor_power
from .convex import OptConfig, _power_derivative
from .linalg import (
    DensityMatrix,
    Operator,
    SystemLayout,
    align,
    entropy_bits,
    hermitize,
    mpow,
    ptrace_array,
    trace_out,
)

LN2 = math.log(2.0)
SUPPORT_RESIDUAL = 1e-9
VN = 1.0
INF = math.inf


def check_alpha(alpha: float) -> float:
    """Validate an order in ``[1/2, ∞]`` and return it as a float."""
    a = float(alpha)
    if math.isnan(a) or a < 0.5:
        raise ValueError(f"Rényi order {alpha} outside [1/2, inf]")
    return a


def beta_of(alpha: float) -> float:
    """The dual order ``1/(2-α)`` appearing in the chain rules."""
    a = check_alpha(alpha)
    if a >= 2:
        raise ValueError("beta_of needs alpha < 2")
    return 1.0 / (2.0 - a)


def _mat(x) -> np.ndarray:
    return x.matrix if isinstance(x, Operator) else np.asarray(x, dtype=complex)


def support_violated(rho: np.ndarray, sigma: np.ndarray, support_tol: float = 1e-12) -> bool:
    w, v = np.linalg.eigh(hermitize(sigma))
    top = max(w[-1], 0.0) if w.size else 0.0
    keep = w > support_tol * top if top > 0 else np.zeros_like(w, dtype=bool)
    vk = v[:, keep]
    proj = vk @ vk.conj().T
    return float(np.abs(rho - proj @ rho @ proj).max(initial=0.0)) > SUPPORT_RESIDUAL


def _check_psd(sigma: np.ndarray, tol: float = 1e-10) -> None:
    w = np.linalg.eigvalsh(hermitize(sigma))
    if w.size and w[0] < -tol * max(1.0, w[-1]):
        raise ValueError(f"sigma is not PSD (min eigenvalue {w[0]:.3e})")


def relative_entropy(rho: np.ndarray, sigma: np.ndarray) -> float:
    """``tr ρ(log ρ - log σ)`` in bits, logs taken on supports."""
    if support_violated(rho, sigma):
        return math.inf
    wr = np.linalg.eigvalsh(hermitize(rho))
    wr = wr[wr > 1e-300]
    ws, vs = np.linalg.eigh(hermitize(sigma))
    top = max(ws[-1], 0.0)
    keep = ws > 1e-12 * top
    logs = (vs[:, keep] * np.log(ws[keep])) @ vs[:, keep].conj().T
    return float((np.sum(wr * np.log(wr)) - np.real(np.trace(rho @ logs))) / LN2)


def sandwiched_q(rho: np.ndarray, sigma: np.ndarray, alpha: float) -> float:
    """``tr[(σ^{(1-α)/2α} ρ σ^{(1-α)/2α})^α]`` with powers on the support of σ."""
    s = mpow(sigma, (1 - alpha) / (2 * alpha))
    w = np.linalg.eigvalsh(hermitize(s @ rho @ s))
    w = np.clip(w, 0.0, None)
    return float(np.sum(w ** alpha))


def renyi_divergence_array(rho: np.ndarray, sigma: np.ndarray, alpha: float) -> float:
    alpha = check_alpha(alpha)
    _check_psd(sigma)
    if support_violated(rho, sigma):
        return math.inf
    if alpha == 1.0:
        return relative_entropy(rho, sigma)
    if math.isinf(alpha):
        return convex.dmax(rho, sigma)[0]
    q = sandwiched_q(rho, sigma, alpha)
    if q <= 0:
        return math.inf
    return math.log2(q) / (alpha - 1)


def renyi_divergence(rho, sigma, alpha: float) -> float:
    """Sandwiched Rényi divergence ``D_α(ρ‖σ)`` in bits.

    Parameters
    ----------
    rho : DensityMatrix or ndarray
    sigma : Operator or ndarray
        PSD; aligned to ``rho``'s layout when both carry layouts.
    alpha : float
        In ``[1/2, ∞]``; ``1`` gives the relative entropy and ``inf`` the
        max-divergence (solved as an SDP).

    Returns
    -------
    float
        ``+inf`` when the support of ρ is not contained in that of σ.
    """
    if isinstance(rho, Operator) and isinstance(sigma, Operator) and rho.layout != sigma.layout:
        sigma = align(sigma, rho.layout)
    return renyi_divergence_array(_mat(rho), _mat(sigma), alpha)


# ---------------------------------------------------------------------------
# conditional entropies


def ab_matrix(rho: Operator, a_labels, b_labels) -> tuple[np.ndarray, int, int]:
    """Marginal on ``A B`` as a bare matrix ordered ``A`` then ``B``."""
    a_labels = [a_labels] if isinstance(a_labels, str) else list(a_labels)
    b_labels = [b_labels] if isinstance(b_labels, str) else list(b_labels)
    if set(a_labels) & set(b_labels):
        raise ValueError("A and B labels overlap")
    marg = trace_out(Operator(rho.layout, rho.matrix), [lab for lab in rho.labels if lab not in set(a_labels + b_labels)])
    lay = rho.layout.ordered(a_labels + b_labels)
    m = align(marg, lay).matrix
    return np.array(m), rho.layout.dim_of(a_labels), rho.layout.dim_of(b_labels)


def cond_down_array(m: np.ndarray, da: int, db: int, alpha: float) -> float:
    alpha = check_alpha(alpha)
    if alpha == 1.0:
        return entropy_bits(m) - entropy_bits(ptrace_array(m, [da, db], [1]))
    rho_b = ptrace_array(m, [da, db], [1])
    return -renyi_divergence_array(m, np.kron(np.eye(da), rho_b), alpha)


def cond_down_value_and_grad(m: np.ndarray, da: int, db: int, alpha: float) -> tuple[float, np.ndarray]:
    """``H_α(A|B)`` and its gradient with respect to ``ρ_AB`` (for ``α ≠ 1, ∞``).

    Both arguments of ``Q_α(ρ‖1⊗ρ_B)`` depend on ρ, so the gradient is
    ``-(∂_ρ Q + 1 ⊗ ∂_σ Q) / ((α-1) ln2 Q)``.
    """
    alpha = check_alpha(alpha)
    if alpha == 1.0 or math.isinf(alpha):
        raise ValueError("the gradient is implemented for finite alpha != 1")
    m = hermitize(m)
    rho_b = hermitize(ptrace_array(m, [da, db], [1]))
    r12 = mpow(m, 0.5)
    q, gb = _q_and_grad(m, r12, rho_b, da, alpha)
    sp = np.kron(np.eye(da), mpow(rho_b, (1 - alpha) / (2 * alpha)))
    inner = hermitize(sp @ m @ sp)
    g_rho = alpha * sp @ mpow(inner, alpha - 1) @ sp
    grad = -(g_rho + np.kron(np.eye(da), gb)) / ((alpha - 1) * LN2 * q)
    return _h_from_q(q, alpha), hermitize(grad)


def cond_renyi_down(rho, a_labels, b_labels, alpha: float) -> float:
    """``H_α(A|B) = -D_α(ρ_AB ‖ 1_A ⊗ ρ_B)``."""
    m, da, db = ab_matrix(rho, a_labels, b_labels)
    return cond_down_array(m, da, db, alpha)


@dataclass
class OptimizationResult:
    """Outcome of a restart-based maximisation.

    ``upper_bound`` is a bound on the true supremum derived from a
    Frank-Wolfe gap (``inf`` if none is available).
    """

    value: float
    optimizer: object
    certified: bool
    upper_bound: float = math.inf
    restart_spread: float = math.nan
    residual: float = math.nan

    def __iter__(self):
        return iter((self.value, self.optimizer, self.certified))


def _q_and_grad(rho: np.ndarray, r12: np.ndarray, sig: np.ndarray, da: int, alpha: float):
    """``Q_α(ρ‖1⊗σ)`` and its gradient with respect to ``σ``."""
    db = sig.shape[0]
    p = (1 - alpha) / alpha
    ws, vs = np.linalg.eigh(hermitize(sig))
    ws = np.maximum(ws, 1e-300)
    w = np.tile(ws, da)
    v = np.kron(np.eye(da), vs)
    x = (v * w ** p) @ v.conj().T
    t = hermitize(r12 @ x @ r12)
    wt = np.clip(np.linalg.eigvalsh(t), 0.0, None)
    q = float(np.sum(wt ** alpha))
    mm = r12 @ mpow(t, alpha - 1) @ r12
    g = alpha * _power_derivative(w, v, mm, p)
    return q, hermitize(ptrace_array(g, [da, db], [1]))


def _fixed_point(rho, sig, da, alpha, max_iter, damping=0.5, tol=1e-14):
    db = sig.shape[0]
    g = (1 - alpha) / (2 * alpha)
    res = math.inf
    for _ in range(max_iter):
        s = np.kron(np.eye(da), mpow(sig, g))
        new = ptrace_array(mpow(hermitize(s @ rho @ s), alpha), [da, db], [1])
        new = hermitize(new) / np.trace(new).real
        res = float(np.abs(new - sig).max())
        sig = (1 - damping) * sig + damping * new
        if res < tol:
            break
    return sig, res


def _expm_h(m):
    w, v = np.linalg.eigh(hermitize(m))
    w = w - w.max()
    return (v * np.exp(w)) @ v.conj().T


def _logm_h(m):
    w, v = np.linalg.eigh(hermitize(m))
    return (v * np.log(np.maximum(w, 1e-300))) @ v.conj().T


def _mirror_polish(rho, r12, sig, da, alpha, iters=200):
    sgn = 1.0 if alpha < 1 else -1.0
    q, g = _q_and_grad(rho, r12, sig, da, alpha)
    eta = 0.5
    for _ in range(iters):
        scale = max(float(np.abs(g).max()), 1e-300)
        cand = _expm_h(_logm_h(sig) + sgn * eta * g / scale)
        cand = cand / np.trace(cand).real
        qn, gn = _q_and_grad(rho, r12, cand, da, alpha)
        if sgn * (qn - q) > 0:
            sig, q, g = cand, qn, gn
            eta = min(2 * eta, 1.0)
        else:
            eta *= 0.5
            if eta < 1e-12:
                break
    return sig, q, g


def _bfgs_polish(rho, r12, sig, da, alpha, max_iter=500):
    """BFGS over ``σ = Z Z† / tr(Z Z†)``, which reaches rank-deficient optima."""
    k = sig.shape[0]
    sgn = -1.0 if alpha < 1 else 1.0

    def split(x):
        return (x[: k * k] + 1j * x[k * k:]).reshape(k, k)

    def fun(x):
        z = split(x)
        t = float(np.real(np.vdot(z, z)))
        s = z @ z.conj().T / t
        q, g = _q_and_grad(rho, r12, s, da, alpha)
        gz = 2 * (g @ z - np.real(np.trace(g @ s)) * z) / t
        return sgn * q, sgn * np.concatenate([gz.real.reshape(-1), gz.imag.reshape(-1)])

    # mixing in the identity keeps every direction of Z live
    z0 = mpow(hermitize(0.95 * sig + 0.05 * np.eye(k) / k), 0.5)
    x0 = np.concatenate([z0.real.reshape(-1), z0.imag.reshape(-1)])
    r = so.minimize(fun, x0, jac=True, method="BFGS", options={"maxiter": max_iter, "gtol": 1e-13})
    z = split(r.x)
    s = hermitize(z @ z.conj().T)
    s = s / np.trace(s).real
    q, g = _q_and_grad(rho, r12, s, da, alpha)
    return s, q, g


def _face_projection(sig, rel_tol=1e-7):
    w, v = np.linalg.eigh(hermitize(sig))
    keep = w > rel_tol * w[-1]
    vk = v[:, keep]
    s = (vk * w[keep]) @ vk.conj().T
    return s / np.trace(s).real


def _h_from_q(q: float, alpha: float) -> float:
    if q <= 0:
        return -math.inf if alpha > 1 else math.inf
    return math.log2(q) / (1 - alpha)


def _fw_upper(q, g, sig, alpha):
    """Upper bound on ``sup_σ -D_α(ρ‖1⊗σ)`` from the Frank-Wolfe gap at ``sig``."""
    ev = np.linalg.eigvalsh(g)
    lin = float(np.real(np.trace(g @ sig)))
    if alpha < 1:
        gap = max(ev[-1] - lin, 0.0)
        return _h_from_q(q + gap, alpha), gap
    gap = max(lin - ev[0], 0.0)
    if q - gap <= 0:
        return math.inf, gap
    return _h_from_q(q - gap, alpha), gap


def cond_up_array(m: np.ndarray, da: int, db: int, alpha: float,
                  opt_cfg: OptConfig | None = None) -> OptimizationResult:
    """``H^↑_α(A|B) = sup_σ -D_α(ρ_AB ‖ 1_A ⊗ σ_B)`` for a bare matrix."""
    cfg = opt_cfg or OptConfig()
    alpha = check_alpha(alpha)
    rho_b = hermitize(ptrace_array(m, [da, db], [1]))
    if alpha == 1.0:
        val = entropy_bits(m) - entropy_bits(rho_b)
        return OptimizationResult(val, rho_b, True, val, 0.0, 0.0)
    if math.isinf(alpha):
        val, rep = convex.min_entropy_sdp(m, da, db)
        s = rep.solution["s"]
        return OptimizationResult(val, hermitize(s) / np.trace(s).real, rep.status == "optimal",
                                  -math.log2(max(rep.dual_value, 1e-300)), 0.0, rep.gap)
    # restrict B to the support of ρ_B; this never lowers the supremum
    wb, vb = np.linalg.eigh(rho_b)
    keep = wb > 1e-12 * wb[-1]
    vk = vb[:, keep]
    k = vk.shape[1]
    big = np.kron(np.eye(da), vk)
    mc = hermitize(big.conj().T @ m @ big)
    r12 = mpow(mc, 0.5)
    rng = np.random.default_rng(cfg.seed)
    starts = [hermitize(vk.conj().T @ rho_b @ vk), np.eye(k) / k]
    while len(starts) < max(cfg.restarts, 1):
        g = rng.standard_normal((k, k)) + 1j * rng.standard_normal((k, k))
        s = g @ g.conj().T
        starts.append(s / np.trace(s).real)
    starts = starts[: max(cfg.restarts, 1)]
    vals, best = [], None
    for s0 in starts:
        sig, res = _fixed_point(mc, s0, da, alpha, cfg.max_iter, damping=1.0 if alpha < 1 else 0.5)
        q, g = _q_and_grad(mc, r12, sig, da, alpha)
        ub, gap = _fw_upper(q, g, sig, alpha)
        if not (ub - _h_from_q(q, alpha) <= cfg.certify_tol) or not math.isfinite(res) or res > 1e-8:
            sig, q, g = _mirror_polish(mc, r12, sig, da, alpha)
            ub, gap = _fw_upper(q, g, sig, alpha)
        if not ub - _h_from_q(q, alpha) <= cfg.certify_tol:
            s2, q2, g2 = _bfgs_polish(mc, r12, sig, da, alpha)
            ub2, _ = _fw_upper(q2, g2, s2, alpha)
            if _h_from_q(q2, alpha) >= _h_from_q(q, alpha):
                sig, q, g = s2, q2, g2
            ub = min(ub, ub2)
        if not ub - _h_from_q(q, alpha) <= cfg.certify_tol:
            # optimum on a face: drop negligible eigenvalues and iterate there
            s3 = _face_projection(sig)
            s3, _ = _fixed_point(mc, s3, da, alpha, cfg.max_iter, damping=1.0 if alpha < 1 else 0.5)
            q3, g3 = _q_and_grad(mc, r12, s3, da, alpha)
            ub3, _ = _fw_upper(q3, g3, s3, alpha)
            if _h_from_q(q3, alpha) >= _h_from_q(q, alpha):
                sig, q, g = s3, q3, g3
            ub = min(ub, ub3)
        val = _h_from_q(q, alpha)
        vals.append(val)
        if best is None or val > best[0]:
            best = (val, sig, ub, res)
    val, sig, ub, res = best
    spread = max(vals) - min(vals)
    certified = bool(spread <= cfg.agree_tol and ub - val <= cfg.certify_tol)
    return OptimizationResult(val, vk @ sig @ vk.conj().T, certified, max(ub, val), spread, res)


def cond_renyi_up(rho, a_labels, b_labels, alpha: float,
                  opt_cfg: OptConfig | None = None) -> OptimizationResult:
    """``H^↑_α(A|B)``, maximised over ``σ_B``.

    Damped fixed-point iterations from several starts (``ρ_B``, maximally
    mixed, random), each polished by exponentiated-gradient steps when
    needed.  ``certified`` requires the restarts to agree within
    ``opt_cfg.agree_tol`` and the Frank-Wolfe bound to lie within
    ``opt_cfg.certify_tol`` of the value.  The optimiser is returned as a
    :class:`DensityMatrix` on the ``B`` systems.
    """
    m, da, db = ab_matrix(rho, a_labels, b_labels)
    res = cond_up_array(m, da, db, alpha, opt_cfg)
    b_labels = [b_labels] if isinstance(b_labels, str) else list(b_labels)
    lay = rho.layout.ordered(b_labels)
    res.optimizer = DensityMatrix(lay, res.optimizer, trace_tol=1e-8, psd_tol=1e-8)
    return res


def min_entropy(rho, a_labels, b_labels):
    """``H_min(A|B)`` (unsmoothed) and the SDP solve report as certificate."""
    m, da, db = ab_matrix(rho, a_labels, b_labels)
    return convex.min_entropy_sdp(m, da, db)


def max_entropy_array(m: np.ndarray, da: int, db: int, opt_cfg: OptConfig | None = None) -> OptimizationResult:
    return cond_up_array(m, da, db, 0.5, opt_cfg)


def max_entropy(rho, a_labels, b_labels, opt_cfg: OptConfig | None = None) -> OptimizationResult:
    """``H_max(A|B) = log2 sup_σ ‖ρ^{1/2}(1⊗σ)^{1/2}‖_1²`` (unsmoothed).

    This is the order-1/2 case of :func:`cond_renyi_up` and shares its
    fidelity ascent and certification.
    """
    return cond_renyi_up(rho, a_labels, b_labels, 0.5, opt_cfg)


# ---------------------------------------------------------------------------
# channel divergence at finite n

CHANNEL_DIM_GUARD = 64


def _divergence_value_and_grads(rho: np.ndarray, sigma: np.ndarray, alpha: float):
    """``D_α(ρ‖σ)`` and its gradients in ``ρ`` and ``σ`` for full-rank ``σ`` and finite ``α ≠ 1``."""
    g = (1 - alpha) / (2 * alpha)
    ws, vs = np.linalg.eigh(hermitize(sigma))
    s = (vs * ws ** g) @ vs.conj().T
    x = hermitize(s @ rho @ s)
    wx, vx = np.linalg.eigh(x)
    wx = np.clip(wx, 0.0, None)
    q = float(np.sum(wx ** alpha))
    if q <= 0:
        return math.inf, None, None
    pos = wx > 1e-15 * max(wx[-1], 1e-300)
    m = alpha * (vx[:, pos] * wx[pos] ** (alpha - 1)) @ vx[:, pos].conj().T
    scale = 1.0 / ((alpha - 1) * LN2 * q)
    g_rho = scale * (s @ m @ s)
    c = rho @ s @ m + m @ s @ rho
    g_sig = scale * _power_derivative(ws, vs, c, g)
    return math.log2(q) / (alpha - 1), hermitize(g_rho), hermitize(g_sig)


def channel_divergence_finite(e: KrausChannel, f: KrausChannel, alpha: float, n: int = 1,
                              opt_cfg: OptConfig | None = None) -> float:
    """Best found ``(1/n) sup_ω D_α(E^{⊗n}(ω) ‖ F^{⊗n}(ω))`` over pure purified inputs.

    Multi-restart BFGS over input vectors on ``input^{⊗n} ⊗ purifier``,
    always including the maximally entangled input and, for ``n > 1``, the
    ``n``-th tensor power of the best single-copy input.  The value found is
    a lower bound on the supremum, hence on the regularised divergence.
    Gradients are analytic when ``F``'s output is full rank and ``α`` is
    finite and not 1, numeric otherwise.
    """
    cfg = opt_cfg or OptConfig(restarts=6, max_iter=200)
    alpha = check_alpha(alpha)
    if e.in_layout.dims != f.in_layout.dims or e.out_layout.dims != f.out_layout.dims:
        raise ValueError("channels must have matching layouts")
    if n == 1:
        return _channel_div_search(e, f, alpha, 1, cfg, [])[0]
    d1 = e.in_layout.dim
    if (e.out_layout.dim * d1) ** n > CHANNEL_DIM_GUARD or d1 ** n > CHANNEL_DIM_GUARD // 4:
        raise ValueError(f"dimension guard exceeded for n={n}")
    best1, v1 = _channel_div_search(e, f, alpha, 1, cfg, [])
    if math.isinf(best1):
        return math.inf
    m1 = v1.reshape(d1, d1)
    mn = m1
    for _ in range(n - 1):
        mn = np.kron(mn, m1)
    return _channel_div_search(tensor_power(e, n), tensor_power(f, n), alpha, n, cfg, [mn.reshape(-1)])[0]


def _channel_div_search(en: KrausChannel, fn: KrausChannel, alpha: float, n: int, cfg: OptConfig, extra):
    din, dout = en.in_layout.dim, en.out_layout.dim
    if dout * din > CHANNEL_DIM_GUARD or din > CHANNEL_DIM_GUARD // 4:
        raise ValueError(f"dimension guard exceeded: {dout}x{din}")
    ke, kf = en.stacked, fn.stacked
    n2 = din * din
    analytic = alpha != 1.0 and not math.isinf(alpha)

    def outputs(psi):
        psi = psi.reshape(din, din)
        oe = np.einsum("kai,ix->kax", ke, psi).reshape(len(ke), -1)
        of = np.einsum("kai,ix->kax", kf, psi).reshape(len(kf), -1)
        return hermitize(oe.T @ oe.conj()), hermitize(of.T @ of.conj())

    def value(vec):
        a, b = outputs(vec / np.linalg.norm(vec))
        return renyi_divergence_array(a, b, alpha) / n

    def pull_back(ks, g, psi):
        # Σ_k (K_k ⊗ 1)† G (K_k ⊗ 1) ψ
        gt = g.reshape(dout, din, dout, din)
        kp = np.einsum("kai,ix->kax", ks, psi.reshape(din, din))
        return np.einsum("kaj,aybx,kbx->jy", ks.conj(), gt, kp).reshape(-1)

    def neg_value_grad(x):
        v = x[:n2] + 1j * x[n2:]
        nrm = float(np.real(np.vdot(v, v)))
        psi = v / math.sqrt(nrm)
        a, b = outputs(psi)
        if np.linalg.eigvalsh(b)[0] <= 1e-12 * max(np.trace(b).real, 1e-300):
            return 1e6, np.zeros_like(x)
        val, gr, gs = _divergence_value_and_grads(a, b, alpha)
        if not math.isfinite(val):
            return 1e6, np.zeros_like(x)
        mv = (pull_back(ke, gr, psi) + pull_back(kf, gs, psi)) / n
        # gradient of the value at ψ/‖ψ‖ with respect to v
        grad = 2 * (mv - np.real(np.vdot(psi, mv)) * psi) / math.sqrt(nrm)
        return -val / n, -np.concatenate([grad.real, grad.imag])

    def neg_value(x):
        val = value(x[:n2] + 1j * x[n2:])
        return -val if math.isfinite(val) else 1e6

    rng = np.random.default_rng(cfg.seed)
    omega = np.eye(din).reshape(-1) / np.sqrt(din)
    starts = [omega.astype(complex)] + [
        (rng.standard_normal(n2) + 1j * rng.standard_normal(n2)) for _ in range(cfg.restarts - 1)
    ] + [np.asarray(x, dtype=complex) for x in extra]
    best, arg = -math.inf, omega
    for s0 in starts:
        v0 = value(s0)
        if math.isinf(v0):
            return math.inf, s0
        if v0 > best:
            best, arg = v0, s0 / np.linalg.norm(s0)
        if math.isinf(alpha):
            continue
        x0 = np.concatenate([s0.real, s0.imag])
        if analytic:
            r = so.minimize(neg_value_grad, x0, jac=True, method="BFGS",
                            options={"maxiter": cfg.max_iter, "gtol": 1e-9})
        else:
            r = so.minimize(neg_value, x0, method="BFGS", options={"maxiter": cfg.max_iter, "gtol": 1e-9})
        if r.fun < 1e5:
            # re-evaluate at the returned point rather than trusting the optimiser's value
            z = r.x[:n2] + 1j * r.x[n2:]
            vz = value(z)
            if vz > best:
                best, arg = vz, z / np.linalg.norm(z)
    return float(best), arg
