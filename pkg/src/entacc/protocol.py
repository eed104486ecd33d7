"""Blind randomness expansion: round channels, Monte-Carlo runs and rates.

Each round: Alice draws ``T ~ Bernoulli(γ)``; on test rounds the inputs
``(x, y)`` are drawn from the game's question distribution, otherwise the
generation inputs ``(x*, y*)`` are used.  The device measures its memory
``R`` with input ``x`` and the adversary measures ``E'`` with input ``y``.
On test rounds ``C = ω(x, y, a, b)``, otherwise ``C = ⊥``.  The protocol
aborts if more than ``(1 - ω_exp + δ) γ n`` test rounds are lost.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .channels import KrausChannel, check_nonsignalling
from .eat import BOT, TradeoffFunction, certified_rate_parts
from .entropy import cond_down_array
from .linalg import SystemLayout, hermitize, ptrace_array

BOT_CODE = -1


@dataclass(frozen=True)
class GameSpec:
    """Two-player non-local game with question distribution ``q[x, y]``."""

    x_alphabet: tuple
    y_alphabet: tuple
    a_alphabet: tuple
    b_alphabet: tuple
    q: np.ndarray = field(repr=False)
    predicate: Callable[[int, int, int, int], int] = field(repr=False)

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        if q.shape != (len(self.x_alphabet), len(self.y_alphabet)):
            raise ValueError("question distribution has the wrong shape")
        if np.any(q < 0) or abs(q.sum() - 1) > 1e-12:
            raise ValueError("question distribution must be normalised")
        object.__setattr__(self, "q", q)
        table = np.zeros((len(self.x_alphabet), len(self.y_alphabet), len(self.a_alphabet), len(self.b_alphabet)),
                         dtype=np.int64)
        for idx in np.ndindex(table.shape):
            w = int(self.predicate(*idx))
            if w not in (0, 1):
                raise ValueError("predicate must return 0 or 1")
            table[idx] = w
        object.__setattr__(self, "win_table", table)


def chsh_game() -> GameSpec:
    """CHSH: win iff ``a xor b = x y`` with uniform questions."""
    return GameSpec((0, 1), (0, 1), (0, 1), (0, 1), np.full((2, 2), 0.25),
                    lambda x, y, a, b: int((a ^ b) == (x & y)))


def trivial_game() -> GameSpec:
    """Single-question game that is always won."""
    return GameSpec((0,), (0,), (0,), (0,), np.ones((1, 1)), lambda x, y, a, b: 1)


@dataclass(frozen=True)
class ProtocolConfig:
    n: int
    gamma: float
    omega_exp: float
    delta: float
    x_star: int = 0
    y_star: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be positive")
        if not 0 <= self.gamma <= 1:
            raise ValueError("gamma must lie in [0, 1]")
        if not 0 <= self.omega_exp <= 1:
            raise ValueError("omega_exp must lie in [0, 1]")
        if self.delta < 0:
            raise ValueError("delta must be non-negative")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    @property
    def max_losses(self) -> float:
        return (1 - self.omega_exp + self.delta) * self.gamma * self.n


@dataclass(frozen=True, eq=False)
class DeviceStrategy:
    """Device and adversary instruments acting on disjoint memories ``R`` and ``E'``.

    Parameters
    ----------
    r_dim, e_dim : int
    initial_state : ndarray
        Joint state on ``R ⊗ E'``.
    device : sequence over x of sequences over a of Kraus lists on ``R``.
    adversary : sequence over y of sequences over b of Kraus lists on ``E'``.
    refresh : ndarray or None
        If given, ``R E'`` is re-prepared in this state at the end of every
        round (a fresh shared pair per round).
    """

    name: str
    r_dim: int
    e_dim: int
    initial_state: np.ndarray = field(repr=False)
    device: tuple = field(repr=False)
    adversary: tuple = field(repr=False)
    refresh: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        d = self.r_dim * self.e_dim
        st = np.asarray(self.initial_state, dtype=complex)
        if st.shape != (d, d):
            raise ValueError("initial state has the wrong shape")
        for label, inst, dim in (("device", self.device, self.r_dim), ("adversary", self.adversary, self.e_dim)):
            for k, outcomes in enumerate(inst):
                s = sum(m.conj().T @ m for ks in outcomes for m in ks)
                if np.abs(s - np.eye(dim)).max() > 1e-10:
                    raise ValueError(f"{label} instrument for input {k} is not trace preserving")
        object.__setattr__(self, "initial_state", st)

    @property
    def memoryless(self) -> bool:
        return self.refresh is not None and np.abs(self.refresh - self.initial_state).max() < 1e-15


def _proj(v):
    v = np.asarray(v, dtype=complex).reshape(-1, 1)
    return v @ v.conj().T


def _basis_instrument(vectors):
    return tuple((_proj(v),) for v in vectors)


def honest_chsh_strategy(noise_p: float = 0.0) -> DeviceStrategy:
    """Optimal CHSH measurements on ``|Φ+⟩`` with depolarising noise ``noise_p``.

    Device: ``A0 = Z``, ``A1 = X``.  Adversary (playing Bob):
    ``B0 = (Z+X)/√2``, ``B1 = (Z-X)/√2``.  Outcome 0 is the ``+1``
    eigenvalue.  A fresh noisy pair is prepared every round.
    """
    if not 0 <= noise_p <= 1:
        raise ValueError("noise_p must lie in [0, 1]")
    phi = np.array([1, 0, 0, 1]) / np.sqrt(2)
    tau = (1 - noise_p) * np.outer(phi, phi) + noise_p * np.eye(4) / 4

    def angle_basis(theta):
        # eigenvectors of cos(θ) Z + sin(θ) X
        plus = np.array([np.cos(theta / 2), np.sin(theta / 2)])
        minus = np.array([-np.sin(theta / 2), np.cos(theta / 2)])
        return plus, minus

    device = (_basis_instrument(angle_basis(0.0)), _basis_instrument(angle_basis(np.pi / 2)))
    adversary = (_basis_instrument(angle_basis(np.pi / 4)), _basis_instrument(angle_basis(-np.pi / 4)))
    return DeviceStrategy(f"honest_chsh(noise_p={noise_p})", 2, 2, tau, device, adversary, refresh=tau)


def deterministic_strategy(a_value: int = 0, b_value: int = 0, n_x: int = 1, n_y: int = 1,
                           n_a: int = 1, n_b: int = 1) -> DeviceStrategy:
    """Classical device and adversary that always answer ``a_value`` and ``b_value``."""
    one = np.ones((1, 1))
    zero = np.zeros((1, 1))
    dev = tuple(tuple(((one,) if a == a_value else (zero,)) for a in range(n_a)) for _ in range(n_x))
    adv = tuple(tuple(((one,) if b == b_value else (zero,)) for b in range(n_b)) for _ in range(n_y))
    st = np.ones((1, 1), dtype=complex)
    return DeviceStrategy("deterministic", 1, 1, st, dev, adv, refresh=st)


def uniform_bit_strategy(n_x: int = 2, n_y: int = 2) -> DeviceStrategy:
    """Device holding a maximally mixed qubit measured in the computational basis."""
    st = np.eye(2, dtype=complex) / 2
    z = _basis_instrument(np.eye(2))
    dev = tuple(z for _ in range(n_x))
    adv = tuple(((np.ones((1, 1)),), (np.zeros((1, 1)),)) for _ in range(n_y))
    return DeviceStrategy("uniform_bit", 2, 1, st, dev, adv, refresh=st)


BUILTIN_STRATEGIES = {
    "honest_chsh": lambda noise_p=0.0: honest_chsh_strategy(noise_p),
    "uniform_bit": lambda noise_p=0.0: uniform_bit_strategy(),
}


# ---------------------------------------------------------------------------
# single-round quantities


def _instrument_op(inst, outcome):
    return inst[outcome]


def joint_outcome_probs(s: DeviceStrategy, state: np.ndarray, x: int, y: int, n_a: int, n_b: int) -> np.ndarray:
    p = np.zeros((n_a, n_b))
    for a in range(n_a):
        for b in range(n_b):
            tot = 0.0
            for k in s.device[x][a]:
                for l in s.adversary[y][b]:
                    m = np.kron(k, l)
                    tot += np.real(np.trace(m @ state @ m.conj().T))
            p[a, b] = max(tot, 0.0)
    return p


def win_probability(s: DeviceStrategy, game: GameSpec) -> float:
    """Winning probability of a memoryless strategy on its round state."""
    na, nb = len(game.a_alphabet), len(game.b_alphabet)
    tot = 0.0
    for x in range(len(game.x_alphabet)):
        for y in range(len(game.y_alphabet)):
            p = joint_outcome_probs(s, s.initial_state, x, y, na, nb)
            tot += game.q[x, y] * float(np.sum(p * game.win_table[x, y]))
    return tot


ROUND_LABELS = ("A", "R", "T", "X", "Y", "B", "E", "C")


def _round_kraus(s: DeviceStrategy, game: GameSpec, cfg: ProtocolConfig, leak: bool = False):
    nx, ny = len(game.x_alphabet), len(game.y_alphabet)
    na, nb = len(game.a_alphabet), len(game.b_alphabet)
    dr, de = s.r_dim, s.e_dim
    out = SystemLayout([("A", na), ("R", dr), ("T", 2), ("X", nx), ("Y", ny), ("B", nb), ("E", de), ("C", 3)])
    inp = SystemLayout([("R", dr), ("E", de)])
    # re-preparation Kraus operators on R E (identity if no refresh)
    if s.refresh is None:
        prep = [np.eye(dr * de)]
    else:
        w, v = np.linalg.eigh(hermitize(s.refresh))
        prep = []
        for k, lam in enumerate(w):
            if lam <= 1e-15:
                continue
            for i in range(dr * de):
                e = np.zeros((1, dr * de))
                e[0, i] = 1.0
                prep.append(np.sqrt(lam) * v[:, [k]] @ e)
    ks = []
    for t in (0, 1):
        pt = cfg.gamma if t == 1 else 1 - cfg.gamma
        if pt <= 0:
            continue
        for x in range(nx):
            for y in range(ny):
                pxy = game.q[x, y] if t == 1 else float(x == cfg.x_star and y == cfg.y_star)
                if pxy <= 0:
                    continue
                for a in range(na):
                    for b in range(nb):
                        c = int(game.win_table[x, y, a, b]) if t == 1 else 2
                        breg = a if leak else b
                        reg = np.zeros(na * 2 * nx * ny * nb * 3)
                        reg_idx = np.ravel_multi_index((a, t, x, y, breg, c), (na, 2, nx, ny, nb, 3))
                        reg[reg_idx] = 1.0
                        for kd in s.device[x][a]:
                            for ka in s.adversary[y][b]:
                                core = np.kron(kd, ka)
                                for pk in prep:
                                    op_re = pk @ core  # (dr*de, dr*de)
                                    # embed registers: order A R T X Y B E C
                                    full = np.einsum("g,rexy->grexy", reg,
                                                     op_re.reshape(dr, de, dr, de))
                                    full = full.reshape(na, 2, nx, ny, nb, 3, dr, de, dr * de)
                                    full = full.transpose(0, 6, 1, 2, 3, 4, 7, 5, 8)
                                    ks.append(np.sqrt(pt * pxy) * full.reshape(out.dim, inp.dim))
    return inp, out, ks


def round_channel(s: DeviceStrategy, game: GameSpec, cfg: ProtocolConfig) -> KrausChannel:
    """The round map ``R E' -> A R T X Y B E' C`` as a Kraus channel.

    ``C`` has three levels: 0 (lose), 1 (win) and 2 (``⊥``).  The map is
    checked for the non-signalling condition with ``E = T X Y B E'``.
    """
    inp, out, ks = _round_kraus(s, game, cfg)
    ch = KrausChannel(inp, out, ks, tp_tol=1e-9)
    ok, res, _ = nonsignalling_of_round(ch)
    if not ok:
        raise AssertionError(f"round channel violates the non-signalling condition (residual {res:.3e})")
    return ch


def leaky_round_channel(s: DeviceStrategy, game: GameSpec, cfg: ProtocolConfig) -> KrausChannel:
    """Round map whose ``B`` register receives a copy of the device output ``a``."""
    inp, out, ks = _round_kraus(s, game, cfg, leak=True)
    return KrausChannel(inp, out, ks, tp_tol=1e-9)


def nonsignalling_of_round(ch: KrausChannel, tol: float = 1e-10):
    return check_nonsignalling(ch, ["R"], ["E"], ["T", "X", "Y", "B", "E"], ["A", "R", "C"], tol=tol)


def chernoff_abort_bound(cfg: ProtocolConfig) -> float:
    """``exp(-δ² γ n / (1 - ω_exp + δ))``."""
    return math.exp(-cfg.delta ** 2 * cfg.gamma * cfg.n / (1 - cfg.omega_exp + cfg.delta))


def _purified_input(state: np.ndarray) -> tuple[np.ndarray, int]:
    w, v = np.linalg.eigh(hermitize(state))
    w = np.clip(w, 0, None)
    d = state.shape[0]
    psi = (v * np.sqrt(w / w.sum())).reshape(-1)  # on (R E') ⊗ Ẽ
    return np.outer(psi, psi.conj()), d


def single_round_entropy(s: DeviceStrategy, game: GameSpec, cfg: ProtocolConfig, alpha: float = 1.0,
                         inputs: tuple[int, int] | None = None) -> float:
    """``H_α(A | B X Y T E' Ẽ)`` of one round, with ``Ẽ`` purifying the round input.

    The classical registers ``T X Y`` are handled blockwise; ``E'`` is the
    adversary memory after its measurement (before any re-preparation).
    With ``inputs=(x, y)`` the entropy of that single input block is returned.
    """
    na, nb = len(game.a_alphabet), len(game.b_alphabet)
    nx, ny = len(game.x_alphabet), len(game.y_alphabet)
    dr, de = s.r_dim, s.e_dim
    full, dp = _purified_input(s.initial_state)

    def block(x, y):
        # state on A B E' Ẽ (R traced out), A and B classical
        blocks = np.zeros((na * nb * de * dp, na * nb * de * dp), dtype=complex)
        for a in range(na):
            for b in range(nb):
                post = np.zeros((dr * de * dp, dr * de * dp), dtype=complex)
                for kd in s.device[x][a]:
                    for ka in s.adversary[y][b]:
                        m = np.kron(np.kron(kd, ka), np.eye(dp))
                        post += m @ full @ m.conj().T
                red = ptrace_array(post, [dr, de, dp], [1, 2])
                i = a * nb + b
                sl = slice(i * de * dp, (i + 1) * de * dp)
                blocks[sl, sl] = red
        return blocks

    if inputs is not None:
        return cond_down_array(block(*inputs), na, nb * de * dp, alpha)
    weights = []
    for x in range(nx):
        for y in range(ny):
            p = cfg.gamma * game.q[x, y] + (1 - cfg.gamma) * float(x == cfg.x_star and y == cfg.y_star)
            if p > 0:
                weights.append((p, cond_down_array(block(x, y), na, nb * de * dp, alpha)))
    # blocks of T with equal (x, y) give equal states; merging them does not change H
    if alpha == 1.0:
        return float(sum(p * h for p, h in weights))
    if math.isinf(alpha):
        return float(-math.log2(sum(p * 2.0 ** (-h) for p, h in weights)))
    return float(math.log2(sum(p * 2.0 ** ((1 - alpha) * h) for p, h in weights)) / (1 - alpha))


# ---------------------------------------------------------------------------
# Monte-Carlo runs


@dataclass(frozen=True, eq=False)
class RunRecord:
    t: np.ndarray = field(repr=False)
    x: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)
    a: np.ndarray = field(repr=False)
    b: np.ndarray = field(repr=False)
    c: np.ndarray = field(repr=False)
    aborted: bool
    losses: int
    max_losses: float

    @property
    def n(self) -> int:
        return int(self.t.size)

    @property
    def freq(self) -> dict:
        n = max(self.n, 1)
        return {0: float(np.sum(self.c == 0)) / n, 1: float(np.sum(self.c == 1)) / n,
                BOT: float(np.sum(self.c == BOT_CODE)) / n}

    @property
    def tests(self) -> int:
        return int(np.sum(self.t == 1))

    @property
    def wins(self) -> int:
        return int(np.sum(self.c == 1))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["round", "t", "x", "y", "a", "b", "c"])
        for i in range(self.n):
            c = BOT if self.c[i] == BOT_CODE else int(self.c[i])
            w.writerow([i + 1, int(self.t[i]), int(self.x[i]), int(self.y[i]), int(self.a[i]), int(self.b[i]), c])
        return buf.getvalue()

    def summary(self) -> dict:
        return {"n": self.n, "aborted": bool(self.aborted), "losses": int(self.losses),
                "max_losses": float(self.max_losses), "tests": self.tests, "wins": self.wins,
                "freq": {str(k): v for k, v in self.freq.items()}}


def round_uniforms(seed: int, n: int) -> np.ndarray:
    """Uniforms for ``n`` rounds from a Philox stream keyed by ``seed``.

    Row ``i`` (three numbers: test flag, questions, outcomes) belongs to
    round ``i``; Philox is counter based, so row ``i`` is the block at
    counter ``3 i`` regardless of how many rounds are drawn.
    """
    gen = np.random.Generator(np.random.Philox(key=int(seed)))
    return gen.random((n, 3))


def run_protocol(s: DeviceStrategy, game: GameSpec, cfg: ProtocolConfig, seed: int | None = None) -> RunRecord:
    """Simulate one run of the protocol."""
    seed = cfg.seed if seed is None else seed
    n = cfg.n
    u = round_uniforms(seed, n)
    nx, ny = len(game.x_alphabet), len(game.y_alphabet)
    na, nb = len(game.a_alphabet), len(game.b_alphabet)
    t = (u[:, 0] < cfg.gamma).astype(np.int64)
    qcdf = np.cumsum(game.q.reshape(-1))
    qcdf[-1] = 1.0
    qi = np.minimum(np.searchsorted(qcdf, u[:, 1], side="right"), nx * ny - 1)
    x = np.where(t == 1, qi // ny, cfg.x_star).astype(np.int64)
    y = np.where(t == 1, qi % ny, cfg.y_star).astype(np.int64)
    if s.memoryless:
        table = np.zeros((nx * ny, na * nb))
        for xx in range(nx):
            for yy in range(ny):
                p = joint_outcome_probs(s, s.initial_state, xx, yy, na, nb).reshape(-1)
                table[xx * ny + yy] = p / p.sum()
        cdf = np.cumsum(table, axis=1)
        cdf[:, -1] = 1.0
        rows = cdf[x * ny + y]
        ab = np.minimum((u[:, 2:3] >= rows).sum(axis=1), na * nb - 1)
    else:
        ab = _sequential_outcomes(s, x, y, u[:, 2], na, nb)
    a, b = ab // nb, ab % nb
    c = np.where(t == 1, game.win_table[x, y, a, b], BOT_CODE).astype(np.int64)
    losses = int(np.sum(c == 0))
    return RunRecord(t, x, y, a, b, c, losses > cfg.max_losses, losses, cfg.max_losses)


def _sequential_outcomes(s: DeviceStrategy, x, y, u, na, nb) -> np.ndarray:
    state = np.array(s.initial_state, dtype=complex)
    out = np.zeros(len(x), dtype=np.int64)
    for i in range(len(x)):
        probs, posts = [], []
        for a in range(na):
            for b in range(nb):
                post = np.zeros_like(state)
                for kd in s.device[x[i]][a]:
                    for ka in s.adversary[y[i]][b]:
                        m = np.kron(kd, ka)
                        post += m @ state @ m.conj().T
                probs.append(max(np.real(np.trace(post)), 0.0))
                posts.append(post)
        cdf = np.cumsum(probs) / sum(probs)
        cdf[-1] = 1.0
        k = min(int(np.sum(u[i] >= cdf)), na * nb - 1)
        out[i] = k
        state = np.array(s.refresh, dtype=complex) if s.refresh is not None else posts[k] / probs[k]
    return out


def abort_statistics(s: DeviceStrategy, game: GameSpec, cfg: ProtocolConfig, trials: int, root_seed: int | None = None):
    """Run ``trials`` independent runs with seeds ``root_seed + k``.

    Returns ``(abort_rate, wins, tests)`` aggregated over all runs.
    """
    root = cfg.seed if root_seed is None else root_seed
    aborts = wins = tests = 0
    for k in range(trials):
        rec = run_protocol(s, game, cfg, seed=(root + k) % 2 ** 64)
        aborts += int(rec.aborted)
        wins += rec.wins
        tests += rec.tests
    return aborts / trials, wins, tests


def certified_rate(g: TradeoffFunction, cfg: ProtocolConfig, eps_s: float, eps_a: float, d_a: int = 2):
    """Per-round certified rate, bound and constants for the blind protocol.

    ``h`` is the minimum of ``g`` over test-outcome distributions with
    ``p'(0) ≤ 1 - ω_exp + δ``; the bound is ``n h - c1 √n - c0`` with the
    tradeoff extended to untested rounds and ``Pr[Ω] ≥ ε_a``.
    """
    if abs(g.max - g.vertex_values.get(1, math.nan)) > 1e-15:
        raise ValueError("the tradeoff must attain its maximum at a won test round")
    rate, bound, res, _ = certified_rate_parts(g, cfg.gamma, cfg.omega_exp, cfg.delta, eps_s, eps_a, cfg.n, d_a)
    return rate, bound, res.constants
