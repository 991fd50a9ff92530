"""Homological equation and a truncated quadratic KAM iteration.

Hamiltonians live in :class:`~nlsbeat.algebra.PolyHamiltonian` with four
angles ``φ = (ψ0, ψ1, ψ2, ψ3)`` (pendulum angle and the angles conjugate to
``K``), their actions ``y`` and normal modes ``z_j``.  A state splits as

    H = N + Prg + P⁺,   N = ω·y + Σ Ω_j |z_j|²,

with ``Prg`` the degree ≤ 0 terms outside the kernel and ``P⁺`` the terms
of positive degree.  One step solves

    {N, F} + Π_rg{P⁺, F} = Π_{≤K} Prg

and replaces ``H`` by ``e^{ad F} H`` truncated to degree ≤ 2, Fourier
``≤ K_{m+1}`` and modes ``|j| ≤ 8``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import TANGENTIAL
from .algebra import (NormParams, PolyHamiltonian, key_degree, key_fourier, lie_transform,
                      majorant_norm, poisson_bracket, project, sparse)
from .melnikov import LINEAR_OMEGA, Spectra, fourier_cutoff

MAX_DEGREE = 2
MAX_MODE = 8
LIE_ORDER = 6
SMALLNESS = 0.1
# Lie-series coefficients below DROP_FRACTION·‖Prg‖² are discarded.
DROP_FRACTION = 1e-10
NORMAL_MODES = tuple(j for j in range(-MAX_MODE, MAX_MODE + 1) if j not in TANGENTIAL)


class DivisorError(ArithmeticError):
    """A divisor fell below the excision threshold."""


class SmallnessError(ValueError):
    """The initial perturbation is too large for the iteration."""


def normal_form(omega, Omega: dict) -> PolyHamiltonian:
    """``N = ω·y + Σ Ω_j |z_j|²``."""
    terms = {}
    for h, w in enumerate(omega):
        i = [0, 0, 0, 0]
        i[h] = 1
        terms[((0, 0, 0, 0), tuple(i), (), ())] = complex(w)
    for j, w in Omega.items():
        terms[((0, 0, 0, 0), (0, 0, 0, 0), ((j, 1),), ((j, 1),))] = complex(w)
    return PolyHamiltonian(terms)


def frequencies(N: PolyHamiltonian) -> tuple[np.ndarray, dict]:
    """``ω`` and ``Ω`` read off a kernel Hamiltonian."""
    omega = np.zeros(N.dim)
    Omega = {}
    for (l, i, a, b), c in N:
        if sum(i) == 1 and not a:
            omega[i.index(1)] = c.real
        elif a and a == b:
            Omega[a[0][0]] = c.real
    return omega, Omega


def divisor(key, omega, Omega) -> float:
    """``d`` with ``{N, m} = i d m`` for the monomial ``m`` of ``key``."""
    l, _, a, b = key
    d = float(np.dot(omega, l))
    for j, e in a:
        d -= e * Omega.get(j, j * j)
    for j, e in b:
        d += e * Omega.get(j, j * j)
    return d


def conserves_mass_momentum(f: PolyHamiltonian) -> bool:
    """Every term commutes with the mass ``𝕃`` and the momentum ``𝕄``.

    In these coordinates ``𝕃 = y1 + y2 + y3 + Σ|z_j|²`` and
    ``𝕄 = y1 − y2 − 2y3 + Σ j|z_j|²``.
    """
    for (l, _, a, b) in f.terms:
        dz = sum(e for _, e in a) - sum(e for _, e in b)
        dm = sum(j * e for j, e in a) - sum(j * e for j, e in b)
        if l[1] + l[2] + l[3] != dz or l[1] - l[2] - 2 * l[3] != dm:
            return False
    return True


@dataclass
class Bounds:
    """``M`` (frequency size), ``L`` (inverse Lipschitz), ``alpha`` (divisor floor), ``R``."""

    M: float
    L: float
    alpha: float
    R: float

    def as_tuple(self) -> tuple:
        return (self.M, self.L, self.alpha, self.R)


@dataclass
class KamState:
    N: PolyHamiltonian
    Prg: PolyHamiltonian
    Ppos: PolyHamiltonian
    m: int
    s: float
    r: float
    K: int
    bounds: Bounds
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if project(self.N, "ker") != self.N:
            raise ValueError("N has terms outside the kernel")
        if project(self.Prg, "rg") != self.Prg:
            raise ValueError("Prg has terms outside the range")
        if project(self.Ppos, "degree>", 0) != self.Ppos:
            raise ValueError("Ppos has terms of non-positive degree")

    @property
    def hamiltonian(self) -> PolyHamiltonian:
        return self.N + self.Prg + self.Ppos

    def norm_params(self) -> NormParams:
        return NormParams(self.s, self.r)

    def prg_norm(self) -> float:
        return majorant_norm(self.Prg, self.norm_params())


def schedule(m: int, s0: float, r0: float, k0: int) -> tuple[float, float, int]:
    """``s_m, r_m`` with ``x_{m+1} = (1 − 2^{−m−3}) x_m`` and ``K_m = 4^m K0``."""
    s, r = s0, r0
    for n in range(m):
        s *= 1 - 2.0 ** (-n - 3)
        r *= 1 - 2.0 ** (-n - 3)
    return s, r, fourier_cutoff(m, k0)


def split(H: PolyHamiltonian) -> tuple[PolyHamiltonian, PolyHamiltonian, PolyHamiltonian]:
    """``(Π_ker H, Π_rg H, Π_{degree>0} H)``; constants are dropped."""
    return project(H, "ker"), project(H, "rg"), project(H, "degree>", 0)


def _apply_inverse(f: PolyHamiltonian, omega, Omega, floor: float) -> tuple[PolyHamiltonian, float]:
    out = {}
    dmin = math.inf
    for key, c in f:
        d = divisor(key, omega, Omega)
        dmin = min(dmin, abs(d))
        if abs(d) < floor:
            raise DivisorError(f"divisor {d:.3e} below {floor:.3e} at {key}")
        out[key] = c / (1j * d)
    return PolyHamiltonian._raw(out, f.dim, f.tangential), dmin


def _truncate(f: PolyHamiltonian, K: int) -> PolyHamiltonian:
    return f.filter(lambda k: key_fourier(k) <= K and key_degree(k) <= MAX_DEGREE
                    and all(abs(j) <= MAX_MODE for j, _ in k[2] + k[3]))


def solve_homological(state: KamState, spectra: Spectra | None = None, gamma: float = 0.0,
                      eps: float = 0.0, tau: float = 5.0) -> PolyHamiltonian:
    """Solve ``{N, F} + Π_{≤K}Π_rg{P⁺, F} = Π_{≤K} Prg`` for ``F ∈ Π_{≤K} 𝓕_rg``.

    With ``𝔇 = ad N`` diagonal and ``A = 𝔇⁻¹ Π_{≤K}Π_rg ad P⁺`` raising the
    degree by at least one, ``A³ = 0`` on degrees ``−2..0`` and
    ``F = (1 − A + A²) 𝔇⁻¹ Π_{≤K} Prg`` exactly.  Divisors below
    ``εγK^{−τ}`` raise :class:`DivisorError`.  ``spectra`` is unused when
    the frequencies are read from ``N``; it is accepted for symmetry with
    the excision test.
    """
    omega, Omega = frequencies(state.N)
    floor = eps * gamma * state.K ** (-tau) if gamma and eps else 0.0
    G = project(state.Prg, "fourier<=", state.K)
    term, dmin = _apply_inverse(G, omega, Omega, floor)
    F = term
    for _ in range(2):
        if not term or not state.Ppos:
            break
        nxt = _truncate(project(poisson_bracket(state.Ppos, term), "rg"), state.K)
        term, d = _apply_inverse(nxt, omega, Omega, floor)
        term = -term
        dmin = min(dmin, d)
        F = F + term
    state.diagnostics["min_divisor"] = dmin
    return F


def homological_residual(state: KamState, F: PolyHamiltonian) -> float:
    """Largest coefficient of ``{N,F} + Π_{≤K}Π_rg{P⁺,F} − Π_{≤K}Prg``."""
    lhs = poisson_bracket(state.N, F) + _truncate(project(poisson_bracket(state.Ppos, F), "rg"),
                                                  state.K)
    res = lhs - project(state.Prg, "fourier<=", state.K)
    return res.max_abs()


def _bounds(N: PolyHamiltonian, Ppos: PolyHamiltonian, ref_keys, L: float, eps: float,
            np0: NormParams) -> Bounds:
    """Bounds tracked across steps.

    ``M``: largest ε-normalized frequency correction; ``alpha``: smallest
    divisor over the reference monomials; ``R``: norm of ``P⁺`` on the
    initial domain.
    """
    omega, Omega = frequencies(N)
    corr = [abs(w - l) for w, l in zip(omega, LINEAR_OMEGA)]
    corr += [abs(w - j * j) for j, w in Omega.items()]
    M = max(corr) / eps if eps else max(corr)
    alpha = min((abs(divisor(k, omega, Omega)) for k in ref_keys), default=math.inf)
    return Bounds(M, L, alpha, max(1.0, majorant_norm(Ppos, np0)))


def _meta(state: KamState) -> dict:
    return {k: state.diagnostics[k] for k in ("s0", "r0", "k0", "L0", "ref_keys", "eps")}


def initial_state(N: PolyHamiltonian, Prg: PolyHamiltonian, Ppos: PolyHamiltonian, *,
                  s0: float = 0.5, r0: float = 0.5, k0: int = 16, eps: float = 1e-3,
                  L0: float = math.nan) -> KamState:
    """State at step 0; the monomials of ``Prg`` become the divisor reference set."""
    s, r, K = schedule(0, s0, r0, k0)
    meta = {"s0": s0, "r0": r0, "k0": k0, "L0": L0, "ref_keys": tuple(Prg.terms), "eps": eps}
    state = KamState(N, Prg, Ppos, 0, s, r, K, Bounds(0, 0, 0, 0), meta)
    state.bounds = _bounds(N, Ppos, meta["ref_keys"], L0, eps, NormParams(s0, r0))
    return state


def kam_iterate(state0: KamState, steps: int, spectra: Spectra | None = None,
                gamma: float = 0.05, eps: float = 1e-3, tau: float = 5.0) -> list[KamState]:
    """Run ``steps`` quadratic KAM steps from a state made by ``initial_state``.

    Each state's ``diagnostics`` records the ``Prg`` norm, the generating
    function norm, the homological residual, the smallest divisor met, the
    frequency shift and the observed amplification ``‖Prg_{m+1}‖/‖Prg_m‖²``.
    The smallness gate requires the first generating function to have norm
    below ``SMALLNESS``.
    """
    meta = _meta(state0)
    np0 = NormParams(meta["s0"], meta["r0"])
    states = [state0]
    state0.diagnostics["prg_norm"] = state0.prg_norm()
    for m in range(steps):
        cur = states[-1]
        F = solve_homological(cur, spectra, gamma, eps, tau)
        fnorm = majorant_norm(F, cur.norm_params())
        cur.diagnostics["F_norm"] = fnorm
        cur.diagnostics["residual"] = homological_residual(cur, F)
        if m == 0 and fnorm > SMALLNESS:
            raise SmallnessError(f"generating function norm {fnorm:.3e} exceeds {SMALLNESS}")
        s, r, K = schedule(m + 1, meta["s0"], meta["r0"], meta["k0"])
        H = lie_transform(F, cur.hamiltonian, LIE_ORDER, max_degree=MAX_DEGREE, max_fourier=K,
                          max_modes=MAX_MODE,
                          drop=DROP_FRACTION * cur.diagnostics["prg_norm"] ** 2)
        N, Prg, Ppos = split(H)
        nxt = KamState(N, Prg, Ppos, m + 1, s, r, K, cur.bounds, dict(meta))
        nxt.bounds = _bounds(N, Ppos, meta["ref_keys"], meta["L0"], eps, np0)
        nxt.diagnostics["prg_norm"] = nxt.prg_norm()
        (w0, W0), (w1, W1) = frequencies(cur.N), frequencies(N)
        nxt.diagnostics["omega_shift"] = max([float(np.max(np.abs(w1 - w0)))]
                                             + [abs(W1[j] - W0.get(j, 0.0)) for j in W1])
        pn = cur.diagnostics["prg_norm"]
        nxt.diagnostics["amplification"] = nxt.diagnostics["prg_norm"] / pn**2 if pn else 0.0
        states.append(nxt)
    return states


def telescopic(states: list[KamState]) -> bool:
    """Every tracked bound stays within ``[b0/2, 3b0/2]``."""
    b0 = states[0].bounds.as_tuple()
    for st in states[1:]:
        for v, v0 in zip(st.bounds.as_tuple(), b0):
            if math.isfinite(v0) and math.isfinite(v):
                if not 0.5 * v0 <= v <= 1.5 * v0:
                    return False
    return True


def log_ratios(states: list[KamState]) -> list[float]:
    """``log‖Prg_{m+1}‖ / log‖Prg_m‖`` for consecutive states (norms below 1)."""
    norms = [st.diagnostics["prg_norm"] for st in states]
    return [math.log(b) / math.log(a) for a, b in zip(norms, norms[1:]) if 0 < a < 1 and b > 0]


# ---------------------------------------------------------------------------
# Seed from the Birkhoff normal form

def _site_fourier(m2, m1, mm1, mm2) -> tuple:
    """Site phase vector ``(m2, m1, m−1, m−2)`` in the angles ``(ψ0, ψ1, ψ2, ψ3)``."""
    return (m2, m1 + 2 * m2, mm1 - 2 * m2, mm2 + m2)


_SITE_ORDER = (2, 1, -1, -2)
# d(site actions)/d(y0, y1, y2, y3)
_SITE_JAC = np.array([[1, 0, 0, 0], [-2, 1, 0, 0], [2, 0, 1, 0], [-1, 0, 0, 1]])


def birkhoff_seed(spectra: Spectra, xi, eps: float, *, p: float | None = None,
                  scale: float = 1e-3, mode_cut: int = MAX_MODE) -> tuple:
    """``(N, Prg, P⁺)`` built from the resonant degree-6 Birkhoff terms.

    ``N`` carries ``ω = (0,1,1,4) + ελ`` and ``Ω_j = j² + εΘ_j``.  The
    resonant terms with two to four normal factors are written at the site
    actions ``(p, K1−2p, K2+2p, K3−p)`` with tangential amplitudes
    ``√(I + δI) e^{−iθ}`` expanded to first order in ``δI``; the pendulum angle
    is identified with ``ψ0``.  Diagonal kernel terms are dropped (they are
    already in ``Ω``) and ``Prg`` is multiplied by ``scale``.
    """
    from .birkhoff import TruncatedNlsHamiltonian, resonant_part

    K = np.asarray(xi[1:], dtype=float)
    if p is None:
        from .pendulum import fixed_points
        p = fixed_points(K).stable
    x = dict(zip(_SITE_ORDER, (p, K[0] - 2 * p, K[1] + 2 * p, K[2] - p)))
    if min(x.values()) <= 0:
        raise ValueError("site actions must be positive")
    res = resonant_part(TruncatedNlsHamiltonian.build(mode_cut, eps).H6)
    omega = LINEAR_OMEGA + eps * spectra.lam
    Omega = {j: j * j + eps * spectra.theta_of(j) for j in NORMAL_MODES if abs(j) <= mode_cut}
    N = normal_form(omega, Omega)
    terms: dict = {}

    def add(key, c):
        terms[key] = terms.get(key, 0) + c

    for (_, _, a, b), c in res:
        an = tuple((j, e) for j, e in a if j not in x)
        bn = tuple((j, e) for j, e in b if j not in x)
        nn = sum(e for _, e in an + bn)
        if nn < 2:
            continue
        at = dict((j, e) for j, e in a if j in x)
        bt = dict((j, e) for j, e in b if j in x)
        amp = 1.0
        dl = np.zeros(4)
        m = []
        for j in _SITE_ORDER:
            n = at.get(j, 0) + bt.get(j, 0)
            amp *= x[j] ** (n / 2)
            dl[_SITE_ORDER.index(j)] = n / (2 * x[j])
            m.append(at.get(j, 0) - bt.get(j, 0))
        # {u, ū} = i under the bracket convention requires u = √I e^{−iθ}
        ell = tuple(-v for v in _site_fourier(*m))
        c0 = eps * c * amp
        add((ell, (0, 0, 0, 0), sparse(an), sparse(bn)), c0)
        # first order in δI = SITE_JAC·y
        gy = dl @ _SITE_JAC
        for h in range(4):
            if gy[h]:
                i = [0, 0, 0, 0]
                i[h] = 1
                add((ell, tuple(i), sparse(an), sparse(bn)), c0 * gy[h])
    H = PolyHamiltonian({k: v for k, v in terms.items() if v != 0})
    H = _truncate(H, 10**9)
    Prg = project(H, "rg") * scale
    Ppos = project(H, "degree>", 0)
    return N, Prg, Ppos
