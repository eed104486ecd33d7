"""Finite-size entropy accumulation bounds and min-tradeoff functions.

All logarithms are base 2 unless written ``ln``.  ``g(ε)`` is taken as the
non-negative quantity ``-log2(1 - sqrt(1 - ε²))`` and is subtracted.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Hashable, Mapping, Sequence

import numpy as np

LN2 = math.log(2.0)
ETA = 2 * LN2 / (1 + 2 * LN2)
BOT = "bot"


@dataclass(frozen=True)
class TradeoffFunction:
    """Affine function on distributions over ``alphabet``, stored by its vertex values."""

    alphabet: tuple
    vertex_values: Mapping

    def __init__(self, alphabet: Sequence[Hashable], vertex_values: Mapping | Sequence[float]):
        alphabet = tuple(alphabet)
        if not alphabet:
            raise ValueError("alphabet must be nonempty")
        if len(set(alphabet)) != len(alphabet):
            raise ValueError("alphabet symbols must be distinct")
        if not isinstance(vertex_values, Mapping):
            vertex_values = dict(zip(alphabet, vertex_values))
        missing = [x for x in alphabet if x not in vertex_values]
        if missing:
            raise ValueError(f"no value for symbols {missing}")
        object.__setattr__(self, "alphabet", alphabet)
        object.__setattr__(self, "vertex_values", {x: float(vertex_values[x]) for x in alphabet})

    def values(self) -> np.ndarray:
        return np.array([self.vertex_values[x] for x in self.alphabet])

    def __call__(self, q) -> float:
        """``f(q) = Σ_x q(x) f(δ_x)`` for a distribution given as a mapping or vector."""
        if isinstance(q, Mapping):
            return float(sum(q.get(x, 0.0) * self.vertex_values[x] for x in self.alphabet))
        return float(np.dot(np.asarray(q, dtype=float), self.values()))

    @property
    def max(self) -> float:
        return float(self.values().max())

    @property
    def min(self) -> float:
        return float(self.values().min())


@dataclass(frozen=True)
class TradeoffStats:
    max_f: float
    min_f: float
    min_sigma_f: float
    var_f: float

    def __post_init__(self):
        if not (self.min_f <= self.min_sigma_f + 1e-12 and self.min_sigma_f <= self.max_f + 1e-12):
            raise ValueError("stats must satisfy min_f <= min_sigma_f <= max_f")
        if self.var_f < 0:
            raise ValueError("variance bound must be non-negative")


def default_stats(f: TradeoffFunction) -> TradeoffStats:
    """Stats valid for any achievable set: ``Min_Σ ≥ Min`` and ``Var ≤ (Max-Min)²/4``."""
    return TradeoffStats(f.max, f.min, f.min, (f.max - f.min) ** 2 / 4)


@dataclass(frozen=True)
class EatTestingInput:
    n: int
    epsilon: float
    p_omega: float
    d_a: int
    tradeoff: TradeoffFunction
    h: float
    alpha: float | None = None
    stats: TradeoffStats | None = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be positive")
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")
        if not 0 < self.p_omega <= 1:
            raise ValueError("p_omega must lie in (0, 1]")
        if self.d_a < 2:
            raise ValueError("d_A must be at least 2")
        if self.alpha is not None and not 1 < self.alpha < 1.5:
            raise ValueError("alpha must lie in (1, 3/2)")

    def resolved_stats(self) -> TradeoffStats:
        return self.stats or default_stats(self.tradeoff)


@dataclass(frozen=True)
class EatConstants:
    g_eps: float
    v: float
    k_prime: float
    eta: float = ETA
    c1: float = math.nan
    c0: float = math.nan


def g_eps(epsilon: float) -> float:
    """``-log2(1 - sqrt(1 - ε²))``."""
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    # 1 - sqrt(1 - ε²) written without cancellation
    return -math.log2(epsilon * epsilon / (1 + math.sqrt(1 - epsilon * epsilon)))


def v_constant(d_a: int, var_f: float) -> float:
    return math.log2(2 * d_a * d_a + 1) + math.sqrt(2 + var_f)


def _spread(d_a: int, stats: TradeoffStats) -> float:
    return 2 * math.log2(d_a) + stats.max_f - stats.min_sigma_f


def k_prime(alpha: float, d_a: int, stats: TradeoffStats) -> float:
    s = _spread(d_a, stats)
    return ((2 - alpha) ** 3 / (6 * (3 - 2 * alpha) ** 3 * LN2)
            * 2 ** ((alpha - 1) / (2 - alpha) * s) * math.log(2 ** s + math.e ** 2) ** 3)


def eat_bound_simple(per_round: Sequence[float], alpha: float, epsilon: float, d_a: int) -> float:
    """``Σ h_i - n (α-1)/(2-α) log²(1+2 d_A) - g(ε)/(α-1)``."""
    if not 1 < alpha < 2:
        raise ValueError("alpha must lie in (1, 2)")
    n = len(per_round)
    return (float(sum(per_round)) - n * (alpha - 1) / (2 - alpha) * math.log2(1 + 2 * d_a) ** 2
            - g_eps(epsilon) / (alpha - 1))


def eat_bound_testing(inp: EatTestingInput) -> tuple[float, EatConstants]:
    """Bound with testing at the given order ``α ∈ (1, 3/2)``.

    ``n h - n (α-1)/(2-α) (ln2/2) V² - (g(ε) + α log(1/P[Ω]))/(α-1)
    - n ((α-1)/(2-α))² K'(α)``.
    """
    if inp.alpha is None:
        raise ValueError("alpha is required; use eat_bound_auto_alpha otherwise")
    a, n = inp.alpha, inp.n
    st = inp.resolved_stats()
    g = g_eps(inp.epsilon)
    v = v_constant(inp.d_a, st.var_f)
    kp = k_prime(a, inp.d_a, st)
    r = (a - 1) / (2 - a)
    bound = (n * inp.h - n * r * LN2 / 2 * v * v - (g + a * math.log2(1 / inp.p_omega)) / (a - 1)
             - n * r * r * kp)
    return bound, EatConstants(g, v, kp)


@dataclass(frozen=True)
class AutoAlphaResult:
    bound: float
    constants: EatConstants
    alpha: float
    trivial_regime: bool

    def __iter__(self):
        return iter((self.bound, self.constants, self.alpha))


def cor_constants(inp: EatTestingInput) -> EatConstants:
    st = inp.resolved_stats()
    g = g_eps(inp.epsilon)
    v = v_constant(inp.d_a, st.var_f)
    lp = math.log2(1 / inp.p_omega)
    big_g = g + (2 - ETA) * lp
    c1 = math.sqrt(2 * LN2 * v * v / ETA * big_g)
    s = _spread(inp.d_a, st)
    c0 = (((2 - ETA) * ETA ** 2 * lp + ETA ** 2 * g) / (3 * LN2 ** 2 * v * v * (2 * ETA - 1) ** 3)
          * 2 ** ((1 - ETA) / ETA * s) * math.log(2 ** s + math.e ** 2) ** 3)
    return EatConstants(g, v, math.nan, ETA, c1, c0)


def eat_bound_auto_alpha(inp: EatTestingInput) -> AutoAlphaResult:
    """``n h - c1 √n - c0`` with the order chosen to balance the first-order terms.

    Below ``n = (c1 / (2 log d_A))²`` the bound is at most ``-n log d_A``
    (trivial regime) and the chosen order need not satisfy ``α ≤ 2 - η``.
    """
    const = cor_constants(inp)
    n = inp.n
    lp = math.log2(1 / inp.p_omega)
    alpha = 1 + math.sqrt(2 * ETA / (n * LN2 * const.v ** 2) * (const.g_eps + (2 - ETA) * lp))
    trivial = n < (const.c1 / (2 * math.log2(inp.d_a))) ** 2
    if not trivial and alpha > 2 - ETA + 1e-12:
        raise AssertionError(f"chosen alpha {alpha} exceeds 2 - eta")
    st = inp.resolved_stats()
    kp = k_prime(alpha, inp.d_a, st) if alpha < 1.5 else math.inf
    const = replace(const, k_prime=kp)
    bound = n * inp.h - const.c1 * math.sqrt(n) - const.c0
    return AutoAlphaResult(bound, const, alpha, trivial)


def tradeoff_from_test(g: TradeoffFunction, gamma: float) -> tuple[TradeoffFunction, TradeoffStats]:
    """Extend a tradeoff on test outcomes to the alphabet with ``⊥`` (no test).

    ``f(δ_x) = Max g + (g(δ_x) - Max g)/γ`` and ``f(δ_⊥) = Max g``; the stats
    use ``Min_Σ f ≥ Min g`` and ``Var f ≤ (Max g - Min g)²/γ``.
    """
    if not 0 < gamma <= 1:
        raise ValueError("gamma must lie in (0, 1]")
    if BOT in g.alphabet:
        raise ValueError(f"symbol {BOT!r} is reserved for untested rounds")
    mg, ng = g.max, g.min
    vals = {x: mg + (g.vertex_values[x] - mg) / gamma for x in g.alphabet}
    vals[BOT] = mg
    f = TradeoffFunction(g.alphabet + (BOT,), vals)
    stats = TradeoffStats(mg, (1 - 1 / gamma) * mg + ng / gamma, ng, (mg - ng) ** 2 / gamma)
    return f, stats


@dataclass(frozen=True)
class FrequencyConstraint:
    """Linear acceptance condition ``Σ_x coeffs[x] q(x) ≤ bound``."""

    coeffs: Mapping
    bound: float


def feasible_vertices(alphabet: Sequence, constraints: Sequence[FrequencyConstraint]) -> list[np.ndarray]:
    """Vertices of ``{q in simplex : constraints}`` by enumeration of active sets."""
    k = len(alphabet)
    rows, rhs = [], []
    for i in range(k):
        r = np.zeros(k)
        r[i] = -1.0
        rows.append(r)
        rhs.append(0.0)
    for c in constraints:
        unknown = set(c.coeffs) - set(alphabet)
        if unknown:
            raise ValueError(f"constraint refers to unknown symbols {sorted(map(str, unknown))}")
        rows.append(np.array([float(c.coeffs.get(x, 0.0)) for x in alphabet]))
        rhs.append(float(c.bound))
    a_ub, b_ub = np.array(rows), np.array(rhs)
    verts = []
    for active in itertools.combinations(range(len(rows)), k - 1):
        a = np.vstack([np.ones(k)] + [a_ub[i] for i in active])
        b = np.concatenate([[1.0], b_ub[list(active)]])
        if abs(np.linalg.det(a)) < 1e-12:
            continue
        q = np.linalg.solve(a, b)
        if np.all(a_ub @ q <= b_ub + 1e-10):
            if not any(np.abs(q - v).max() < 1e-10 for v in verts):
                verts.append(q)
    return verts


def h_from_event(f: TradeoffFunction, constraints: Sequence[FrequencyConstraint] = ()) -> float:
    """Minimum of ``f`` over the frequency polytope cut out by ``constraints``.

    Raises ``ValueError`` when no distribution satisfies the constraints.
    """
    verts = feasible_vertices(f.alphabet, constraints)
    if not verts:
        raise ValueError("acceptance event is empty")
    vals = f.values()
    return float(min(np.dot(v, vals) for v in verts))


def hmax_dual_bound(channels, a_labels, r_labels, f_label: str, alpha: float, epsilon: float,
                    d_a: int, r_in_labels=(), e_in_labels=(), e_out_labels=(), opt_cfg=None) -> tuple[float, list[float]]:
    """Upper bound on the max-entropy ``H_max(A^n | F^n R_n)`` of a dilated process.

    Each round map ``M_i: R_{i-1} E_{i-1} -> A_i R_i E_i`` is dilated to an
    isometry with environment ``F_i`` (label ``f_label``).  The per-round
    term ``max_ω H(A_i | R_i F_i)`` over pure inputs on
    ``R_{i-1} E_{i-1} Ẽ`` is found by restart ascent; the second-order terms
    are those of :func:`eat_bound_simple` with the sign flipped.  When
    ``r_in_labels``/``e_in_labels``/``e_out_labels`` are given, each channel
    is checked for the non-signalling condition first.

    Returns
    -------
    bound : float
    per_round : list of float
    """
    from .channels import check_nonsignalling
    from .entropy import OptConfig

    cfg = opt_cfg or OptConfig(restarts=8)
    if not 1 < alpha < 2:
        raise ValueError("alpha must lie in (1, 2)")
    per_round = []
    for ch in channels:
        if e_out_labels:
            a_side = [lab for lab in ch.out_layout.labels if lab not in set(e_out_labels)]
            ok, res, _ = check_nonsignalling(ch, r_in_labels, e_in_labels, e_out_labels, a_side)
            if not ok:
                raise ValueError(f"round channel fails the non-signalling condition (residual {res:.3e})")
        per_round.append(max_cond_entropy_dilated(ch, a_labels, r_labels, f_label, cfg))
    n = len(per_round)
    bound = (sum(per_round) + n * (alpha - 1) / (2 - alpha) * math.log2(1 + 2 * d_a) ** 2
             + g_eps(epsilon) / (alpha - 1))
    return float(bound), per_round


def max_cond_entropy_dilated(ch, a_labels, r_labels, f_label: str, cfg) -> float:
    """``max_ω H(A|R F)`` on ``V|ω⟩`` over pure inputs with a purifier of input size."""
    import scipy.optimize as so

    from .channels import stinespring
    from .linalg import entropy_bits, ptrace_array

    a_labels = [a_labels] if isinstance(a_labels, str) else list(a_labels)
    r_labels = [r_labels] if isinstance(r_labels, str) else list(r_labels)
    iso = stinespring(ch, f_label)
    out = iso.out_layout
    din = ch.in_layout.dim
    dims = list(out.dims) + [din]
    ia = [out.index(lab) for lab in a_labels]
    irf = [out.index(lab) for lab in r_labels] + [out.index(f_label)]

    def h(vec):
        psi = vec.reshape(din, din)
        psi = psi / np.linalg.norm(psi)
        phi = (iso.matrix @ psi).reshape(-1)
        full = np.outer(phi, phi.conj())
        return (entropy_bits(ptrace_array(full, dims, sorted(ia + irf)))
                - entropy_bits(ptrace_array(full, dims, sorted(irf))))

    rng = np.random.default_rng(cfg.seed)
    best = -math.inf
    starts = [np.eye(din).reshape(-1).astype(complex)] + [
        rng.standard_normal(din * din) + 1j * rng.standard_normal(din * din) for _ in range(cfg.restarts - 1)]
    for s0 in starts:
        best = max(best, h(s0))
        x0 = np.concatenate([s0.real, s0.imag])
        r = so.minimize(lambda x: -h(x[: din * din] + 1j * x[din * din:]), x0, method="BFGS",
                        options={"maxiter": 200, "gtol": 1e-9})
        best = max(best, -float(r.fun))
    return float(best)


def rate_curve(g: TradeoffFunction, gamma: float, omega_exp: float, delta: float, eps_s: float,
               eps_a: float, n_grid: Sequence[int], d_a: int = 2, test_symbol=0) -> list[dict]:
    """Rows ``n, alpha, h, g_eps, V, K_prime, c1, c0, bound, rate`` for a CHSH-style test.

    The acceptance event is ``freq(test_symbol) ≤ (1 - ω_exp + δ) γ``, which in
    terms of the test-outcome distribution ``p'`` reads
    ``p'(test_symbol) ≤ 1 - ω_exp + δ``.
    """
    rows = []
    for n in n_grid:
        try:
            rate, bound, res, h = certified_rate_parts(g, gamma, omega_exp, delta, eps_s, eps_a, n, d_a, test_symbol)
        except ValueError as exc:
            rows.append({"n": int(n), "error": str(exc)})
            continue
        c = res.constants
        rows.append({"n": int(n), "alpha": res.alpha, "h": h, "g_eps": c.g_eps, "V": c.v,
                     "K_prime": c.k_prime, "c1": c.c1, "c0": c.c0, "bound": bound, "rate": rate})
    return rows


def certified_rate_parts(g: TradeoffFunction, gamma: float, omega_exp: float, delta: float,
                         eps_s: float, eps_a: float, n: int, d_a: int = 2, test_symbol=0):
    h = h_from_event(g, [FrequencyConstraint({test_symbol: 1.0}, 1 - omega_exp + delta)])
    f, stats = tradeoff_from_test(g, gamma)
    inp = EatTestingInput(n=int(n), epsilon=eps_s, p_omega=eps_a, d_a=d_a, tradeoff=f, h=h, stats=stats)
    res = eat_bound_auto_alpha(inp)
    return res.bound / n, res.bound, res, h
