"""Floquet reduction of the 2×2 blocks coupling the modes ``±3`` and ``±4``.

In rescaled time the block ``(w_j, w_{−j})`` obeys ``w' = A_j(τ) w`` with

    A_j = i [[f0, U_j], [U_j, f0 + V_j]],

periodic with the period ``T = 2π/|λ0|`` of the reduced orbit.  The
monodromy ``W(T)`` is split into a scalar phase (fixed exactly by the
trace) and an ``SU(2)`` factor whose logarithm is taken in axis-angle form.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm, polar

from . import pendulum as pend

SKEW_TOL = 1e-12
UNITARY_TOL = 1e-10


@dataclass(frozen=True)
class Block2:
    """2×2 complex matrix with a declared structure."""

    m: np.ndarray
    structure: str = "general"

    def __post_init__(self):
        m = np.asarray(self.m, dtype=complex)
        if m.shape != (2, 2):
            raise ValueError("Block2 needs a 2×2 matrix")
        object.__setattr__(self, "m", m)
        if self.structure == "skewHermitian":
            err = np.max(np.abs(m + m.conj().T))
            if err > SKEW_TOL * max(1.0, np.max(np.abs(m))):
                raise ValueError(f"not skew-Hermitian (residual {err:.2e})")
        elif self.structure == "unitary":
            err = np.max(np.abs(m @ m.conj().T - np.eye(2)))
            if err > UNITARY_TOL:
                raise ValueError(f"not unitary (residual {err:.2e})")
        elif self.structure != "general":
            raise ValueError(f"unknown structure {self.structure!r}")

    def trace(self) -> complex:
        return complex(np.trace(self.m))


@dataclass
class BlockSystem:
    """Orbit data needed to build ``A_j`` at any rescaled time."""

    j: int
    K: np.ndarray
    f0: float
    lam0: float
    period: float
    p0: float
    constant: bool
    U0: float = 0.0
    V0: float = 0.0

    @classmethod
    def at(cls, j: int, xi, freq: pend.FrequencyData | None = None) -> "BlockSystem":
        if j not in pend.BLOCK_INDICES:
            raise ValueError("blocks exist for j = 3 and j = 4")
        E, K = float(xi[0]), np.asarray(xi[1:], dtype=float)
        if E < pend.GUARD:
            # fixed-point orbit: constant coefficients
            pc = pend.fixed_points(K).stable
            lam0 = -pend.fixed_point_frequencies(K)[0]
            lam0 = -abs(lam0)
            U, V = pend.block_coefficients(np.array([pc]), np.array([0.0]), K)
            f0 = float(pend.deriv("f", pc, K))
            return cls(j, K, f0, lam0, 2 * math.pi / abs(lam0), pc, True,
                       float(U[j][0]), float(V[j][0]))
        freq = freq or pend.frequency_map(xi, n_grid=128, gradient="average")
        return cls(j, K, freq.f0, float(freq.lam[0]), freq.period, float(freq.p[0]), False)

    def coefficients(self, p, q):
        U, V = pend.block_coefficients(np.atleast_1d(p), np.atleast_1d(q), self.K)
        return U[self.j], V[self.j]

    def matrix(self, U, V) -> np.ndarray:
        return 1j * np.array([[self.f0, U], [U, self.f0 + V]], dtype=complex)

    def state_at(self, tau: float):
        """``(p, q)`` on the orbit at rescaled time ``tau``."""
        if self.constant:
            return self.p0, 0.0
        tau = tau % self.period
        if tau == 0:
            return self.p0, 0.0

        def rhs(_, y):
            dp, dq = pend.vector_field(y[0], y[1], self.K)
            return [dp, dq]

        sol = solve_ivp(rhs, (0, tau), [self.p0, 0.0], method="DOP853", rtol=1e-12, atol=1e-13)
        return float(sol.y[0, -1]), float(sol.y[1, -1])


def block_matrix(j: int, xi, phi: float, system: BlockSystem | None = None) -> Block2:
    """``A_j(ξ, φ)``; the orbit angle ``φ`` advances as ``λ0 τ``."""
    sysm = system or BlockSystem.at(j, xi)
    if sysm.constant:
        return Block2(sysm.matrix(sysm.U0, sysm.V0), "skewHermitian")
    p, q = sysm.state_at(phi / sysm.lam0)
    U, V = sysm.coefficients(p, q)
    return Block2(sysm.matrix(float(U[0]), float(V[0])), "skewHermitian")


def _integrate(sysm: BlockSystem, t_end: float, tol: float, macro: int, t_eval=None):
    """Fundamental matrix with the scalar ``e^{i f0 τ}`` factored out.

    Returns the final ``W``, the integrated ``∫ V dτ`` and optional samples.
    """
    def rhs(_, y):
        p, q = y[0], y[1]
        W = (y[2:6] + 1j * y[6:10]).reshape(2, 2)
        U, V = sysm.coefficients(p, q)
        U, V = float(U[0]), float(V[0])
        dW = 1j * np.array([[0.0, U], [U, V]]) @ W
        dp, dq = pend.vector_field(p, q, sysm.K)
        return np.concatenate([[dp, dq], dW.real.ravel(), dW.imag.ravel(), [V]])

    y = np.concatenate([[sysm.p0, 0.0], np.eye(2).ravel(), np.zeros(4), [0.0]])
    edges = np.linspace(0.0, t_end, macro + 1)
    samples = []
    for a, b in zip(edges[:-1], edges[1:]):
        te = None
        if t_eval is not None:
            te = t_eval[(t_eval >= a) & (t_eval < b)]
        sol = solve_ivp(rhs, (a, b), y, method="DOP853", rtol=tol, atol=tol * 1e-2,
                        dense_output=te is not None and len(te) > 0)
        if not sol.success:
            raise RuntimeError(f"monodromy integration failed: {sol.message}")
        if te is not None and len(te):
            ys = sol.sol(te)
            for k, t in enumerate(te):
                Wk = (ys[2:6, k] + 1j * ys[6:10, k]).reshape(2, 2)
                samples.append((float(t), np.exp(1j * sysm.f0 * t) * Wk))
        y = sol.y[:, -1].copy()
        W = (y[2:6] + 1j * y[6:10]).reshape(2, 2)
        drift = np.max(np.abs(W @ W.conj().T - np.eye(2)))
        if drift > 1e3 * tol + 1e-12:
            raise RuntimeError(f"unitarity violated during integration ({drift:.2e})")
        W, _ = polar(W)
        y[2:6], y[6:10] = W.real.ravel(), W.imag.ravel()
    W = (y[2:6] + 1j * y[6:10]).reshape(2, 2)
    return W, float(y[10]), samples


def monodromy(j: int, xi, tol: float = 1e-12, system: BlockSystem | None = None,
              macro: int = 8) -> Block2:
    """``W_j(T)`` for ``W' = A_j W``, ``W(0) = I``."""
    sysm = system or BlockSystem.at(j, xi)
    if sysm.constant:
        W = expm(sysm.period * sysm.matrix(sysm.U0, sysm.V0))
    else:
        Wt, _, _ = _integrate(sysm, sysm.period, tol, macro)
        W = np.exp(1j * sysm.f0 * sysm.period) * Wt
    if abs(abs(np.linalg.det(W)) - 1) > max(10 * tol, 1e-12):
        raise RuntimeError("monodromy determinant left the unit circle")
    return Block2(W, "unitary")


class FloquetResult(NamedTuple):
    theta_plus: float
    theta_minus: float
    B: Block2
    monodromy: Block2
    period: float
    mean_trace: float  # time average of 2 f0 + V
    branch_flag: bool
    periodicity_residual: float


def _su2_axis_angle(W0: np.ndarray):
    """``W0 = cos ψ I + i sin ψ (n·σ)`` with ``ψ ∈ [0, π]``; returns ``ψ`` and ``n·σ``."""
    a = W0[0, 0]
    b = W0[1, 0]
    c = a.real
    s = math.sqrt(a.imag**2 + abs(b) ** 2)
    psi = math.atan2(s, c)
    if s < 1e-14:
        return psi, None
    return psi, (W0 - c * np.eye(2)) / (1j * s)


def floquet_exponents(j: int, xi, *, reference: float | None = None, tol: float = 1e-12,
                      system: BlockSystem | None = None) -> FloquetResult:
    """Floquet exponents ``Θ_{±j}`` and a constant skew-Hermitian ``B_j``.

    The scalar phase ``(Θ_j + Θ_{−j})/2`` is the exact time average of
    ``f0 + V/2`` integrated alongside the monodromy.  The half gap
    ``(Θ_j − Θ_{−j})/2`` is defined modulo ``2π/T``; the branch closest to
    ``reference`` is taken (default: the half gap of the orbit-averaged
    matrix, which is exact in the constant-coefficient limit).
    """
    sysm = system or BlockSystem.at(j, xi)
    T = sysm.period
    if sysm.constant:
        W = expm(T * sysm.matrix(sysm.U0, sysm.V0))
        intV = sysm.V0 * T
        Ubar, Vbar = sysm.U0, sysm.V0
    else:
        Wt, intV, _ = _integrate(sysm, T, tol, 8)
        W = np.exp(1j * sysm.f0 * T) * Wt
        # averaged matrix for the default branch reference
        n = 256
        taus = T * np.arange(n) / n
        sol = solve_ivp(lambda _, y: list(pend.vector_field(y[0], y[1], sysm.K)), (0, T),
                        [sysm.p0, 0.0], method="DOP853", t_eval=taus, rtol=1e-12, atol=1e-13)
        U, V = sysm.coefficients(sol.y[0], sol.y[1])
        Ubar, Vbar = float(np.mean(U)), float(np.mean(V))
    scalar = sysm.f0 + 0.5 * intV / T
    W0 = W * np.exp(-1j * scalar * T)
    psi, axis = _su2_axis_angle(W0)
    if reference is None:
        reference = math.hypot(Ubar, 0.5 * Vbar)
    omega = 2 * math.pi / T
    candidates = []
    for n in range(-3, int(abs(reference) / omega) + 4):
        for sgn in (1, -1):
            candidates.append(sgn * psi / T + n * omega)
    delta = min(candidates, key=lambda d: abs(d - reference))
    flag = axis is None or abs(psi - math.pi) < 1e-8
    if axis is None:
        # W0 = ±I: axis undetermined, take the axis of the averaged matrix
        Mbar = np.array([[-0.5 * Vbar, Ubar], [Ubar, 0.5 * Vbar]])
        axis = Mbar / max(np.linalg.norm(Mbar, 2), 1e-300)
    # log W0 on the chosen branch: exp(i δT·axis) = W0 requires δT ≡ ±ψ
    sgn = 1.0 if abs(((delta * T - psi) + math.pi) % (2 * math.pi) - math.pi) < 1e-6 else -1.0
    B = 1j * scalar * np.eye(2) + 1j * delta * sgn * axis
    Theta_p, Theta_m = scalar + delta, scalar - delta
    resid = float(np.max(np.abs(W @ expm(-T * B) - np.eye(2))))
    return FloquetResult(Theta_p, Theta_m, Block2(B, "skewHermitian"), Block2(W, "unitary"),
                         T, 2 * scalar, flag, resid)


def floquet_path(j: int, xis, tol: float = 1e-12) -> list[FloquetResult]:
    """Exponents along a path of parameters, continuing the branch step by step."""
    out = []
    ref = None
    for xi in xis:
        r = floquet_exponents(j, xi, reference=ref, tol=tol)
        ref = 0.5 * (r.theta_plus - r.theta_minus)
        out.append(r)
    return out


def periodicity_residual(j: int, xi, result: FloquetResult | None = None, n: int = 16,
                         tol: float = 1e-12) -> float:
    """``max |P(τ+T) − P(τ)|`` for ``P(τ) = W(τ) e^{−τB}`` sampled over two periods."""
    sysm = BlockSystem.at(j, xi)
    res = result or floquet_exponents(j, xi, system=sysm, tol=tol)
    B = res.B.m
    T = sysm.period
    if sysm.constant:
        A = sysm.matrix(sysm.U0, sysm.V0)
        W = lambda t: expm(t * A)  # noqa: E731
        taus = T * np.arange(n) / n
        return float(max(np.max(np.abs(W(t + T) @ expm(-(t + T) * B) - W(t) @ expm(-t * B)))
                         for t in taus))
    taus = np.concatenate([T * np.arange(n) / n, T + T * np.arange(n) / n])
    _, _, samples = _integrate(sysm, 2 * T + T / (4 * n), tol, 16, t_eval=taus)
    Ws = [w for _, w in samples]
    ts = [t for t, _ in samples]
    err = 0.0
    for k in range(n):
        P0 = Ws[k] @ expm(-ts[k] * B)
        P1 = Ws[k + n] @ expm(-ts[k + n] * B)
        err = max(err, float(np.max(np.abs(P1 - P0))))
    return err
