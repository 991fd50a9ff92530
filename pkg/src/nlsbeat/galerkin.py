"""Galerkin integration of the quintic NLS on the modes ``|j| ≤ J``.

In Fourier variables the truncated equation is

    u̇_j = −i j² u_j − 3i Π_J(|u|⁴ u)_j,

the Hamiltonian flow of ``H = Σ j²|u_j|² + (1/2π)∫|u|⁶`` restricted to the
band.  The quintic term is computed by exact index convolution, so the
projection carries no aliasing.  Tangential data of size ``ε^{1/4}`` put the
nonlinearity at relative size ``ε`` and the beating on the time scale
``τ = ε t``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from . import TANGENTIAL
from . import pendulum

SCHEMES = ("splitStep", "symplecticImplicit")
DEFAULT_J = 16
DEFAULT_EPS = 1e-3
# 2π is a whole number of steps: the linear flow is 2π-periodic
DEFAULT_DT = 2 * math.pi / 2048
DEFAULT_STRIDE = 64
NEWTON_TOL = 1e-15
MAX_ITER = 60

_CBRT2 = 2.0 ** (1.0 / 3.0)
_YOSHIDA = (1 / (2 - _CBRT2), -_CBRT2 / (2 - _CBRT2), 1 / (2 - _CBRT2))


def modes(J: int) -> np.ndarray:
    return np.arange(-J, J + 1)


@dataclass
class GalerkinState:
    """Amplitudes ``u_j`` for ``j = −J..J`` (array index ``j + J``)."""

    J: int
    u: np.ndarray
    eps: float
    t: float = 0.0

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=complex)
        if self.u.shape != (2 * self.J + 1,):
            raise ValueError(f"expected {2 * self.J + 1} amplitudes, got {self.u.shape}")

    def amplitude(self, j: int) -> complex:
        return self.u[j + self.J]

    @property
    def mass(self) -> float:
        return mass(self.u)

    @property
    def momentum(self) -> float:
        return momentum(self.u, self.J)

    @property
    def energy(self) -> float:
        return hamiltonian(self.u, self.J)


def mass(u) -> float:
    return float(np.sum(np.abs(u) ** 2))


def momentum(u, J: int) -> float:
    return float(np.sum(modes(J) * np.abs(u) ** 2))


def _cube(u):
    return np.convolve(np.convolve(u, u), u)


def hamiltonian(u, J: int) -> float:
    """``Σ j²|u_j|² + ‖u³‖²`` (Parseval for the sextic mean)."""
    c = _cube(u)
    return float(np.sum(modes(J) ** 2 * np.abs(u) ** 2) + np.sum(np.abs(c) ** 2))


def quintic(u, J: int) -> np.ndarray:
    """``Π_J(|u|⁴u)`` by exact convolution of the Fourier coefficients."""
    ubar = np.conj(u[::-1])
    full = np.convolve(_cube(u), np.convolve(ubar, ubar))
    return full[4 * J: 6 * J + 1]


def vector_field(u, J: int) -> np.ndarray:
    return -1j * modes(J) ** 2 * u - 3j * quintic(u, J)


# ---------------------------------------------------------------- initial data

def reduced_point(xi, phi0: float) -> tuple[float, float, float]:
    """``(p, q, T)`` on the reduced orbit of ``ξ`` at angle ``φ₀``.

    ``T`` is the period in ``τ``; at the fixed point (``E = 0``) it is ``inf``.
    The angle runs as ``φ = λ0 τ`` from the point of largest ``p`` on ``q = 0``.
    """
    E, K = float(xi[0]), np.asarray(xi[1:], dtype=float)
    if E < 0:
        raise ValueError(f"negative action E={E}")
    if E == 0.0:
        return pendulum.fixed_points(K).stable, 0.0, math.inf
    aa = pendulum.action_angle_data(xi, n_grid=8)
    tau0 = (phi0 / aa.frequency) % aa.period
    if tau0 == 0.0:
        return float(aa.p[0]), 0.0, aa.period

    def rhs(_, y):
        dp, dq = pendulum.vector_field(y[0], y[1], K)
        return [dp, dq]

    sol = solve_ivp(rhs, (0.0, tau0), [aa.p[0], 0.0], method="DOP853", rtol=1e-12, atol=1e-13)
    if not sol.success:
        raise RuntimeError(sol.message)
    return float(sol.y[0, -1]), float(sol.y[1, -1]), aa.period


def tangential_actions(p: float, K) -> dict[int, float]:
    x = pendulum.site_actions(p, np.asarray(K, dtype=float))
    return {2: float(x[0]), 1: float(x[1]), -1: float(x[2]), -2: float(x[3])}


def initial_data(xi, eps: float = DEFAULT_EPS, J: int = DEFAULT_J, phi0: float = 0.0,
                 phases=(0.0, 0.0, 0.0)) -> GalerkinState:
    """Four-mode data on the reduced orbit of ``ξ`` at angle ``φ₀``.

    ``u_j = ε^{1/4} √I_j e^{−iθ_j}`` (the sign makes ``(θ, I)`` canonical for
    the bracket with ``{u, ū} = i``).  ``phases`` are the free angles of the
    modes ``1, −1, −2``; the angle of mode 2 is fixed by
    ``θ₂ − 2θ₁ + 2θ₋₁ − θ₋₂ = q``.  Normal modes are zero.
    """
    if J < 2:
        raise ValueError("J must be at least 2")
    K = np.asarray(xi[1:], dtype=float)
    lo, hi = max(0.0, -K[1] / 2), min(K[0] / 2, K[2])
    if lo >= hi:
        raise ValueError(f"no p with all tangential actions positive at K={tuple(K)}")
    p, q, _ = reduced_point(xi, phi0)
    acts = tangential_actions(p, K)
    if min(acts.values()) < 0:
        raise ValueError(f"negative tangential action at xi={tuple(xi)}: {acts}")
    th1, thm1, thm2 = phases
    theta = {1: th1, -1: thm1, -2: thm2, 2: q + 2 * th1 - 2 * thm1 + thm2}
    u = np.zeros(2 * J + 1, dtype=complex)
    scale = eps ** 0.25
    for j in TANGENTIAL:
        u[j + J] = scale * math.sqrt(acts[j]) * np.exp(-1j * theta[j])
    return GalerkinState(J, u, eps)


def translate(state: GalerkinState, k: int) -> GalerkinState:
    """Index shift ``u_j → u_{j−k}`` (the Galilean boost at ``t = 0``)."""
    u = np.zeros_like(state.u)
    if k >= 0:
        u[k:] = state.u[:len(u) - k]
    else:
        u[:k] = state.u[-k:]
    return GalerkinState(state.J, u, state.eps, state.t)


# ---------------------------------------------------------------- integrators

def _midpoint_nonlinear(u, h, J):
    """Implicit midpoint for ``u̇ = −3i Π_J(|u|⁴u)``; keeps L and M exactly."""
    m = u.copy()
    tol = NEWTON_TOL * max(1.0, np.linalg.norm(u))
    for _ in range(MAX_ITER):
        new = u - 1.5j * h * quintic(m, J)
        if np.linalg.norm(new - m) <= tol:
            return 2 * new - u
        m = new
    raise FloatingPointError("nonlinear substep did not converge; reduce dt")


def _strang(u, h, J, rot_half, coupling):
    u = rot_half * u
    if coupling:
        u = _midpoint_nonlinear(u, coupling * h, J)
    return rot_half * u


def _yoshida_step(u, dt, J, rots, coupling):
    for w, rot in zip(_YOSHIDA, rots):
        u = _strang(u, w * dt, J, rot, coupling)
    return u


def _implicit_step(u, dt, J, k2, coupling):
    """Implicit midpoint on the whole field (Cayley rotation for the linear part)."""
    m = u.copy()
    denom = 1 + 0.5j * dt * k2
    tol = NEWTON_TOL * max(1.0, np.linalg.norm(u))
    for _ in range(MAX_ITER):
        new = (u - 1.5j * coupling * dt * quintic(m, J)) / denom
        if np.linalg.norm(new - m) <= tol:
            return 2 * new - u
        m = new
    raise FloatingPointError("implicit step did not converge; reduce dt")


@dataclass
class Trajectory:
    t: np.ndarray
    u: np.ndarray
    J: int
    eps: float
    dt: float
    scheme: str
    L: np.ndarray = field(repr=False)
    M: np.ndarray = field(repr=False)
    H: np.ndarray = field(repr=False)

    @property
    def final(self) -> GalerkinState:
        return GalerkinState(self.J, self.u[-1].copy(), self.eps, float(self.t[-1]))

    def drift(self) -> dict[str, float]:
        """Largest excursions of L, M, H; M is measured against L (it can vanish)."""
        L0 = self.L[0] or 1.0
        return {
            "L": float(np.max(np.abs(self.L - self.L[0])) / L0),
            "M": float(np.max(np.abs(self.M - self.M[0])) / L0),
            "H": float(np.max(np.abs(self.H - self.H[0])) / (abs(self.H[0]) or 1.0)),
        }

    def mode(self, j: int) -> np.ndarray:
        return self.u[:, j + self.J]


def integrate(state: GalerkinState, dt: float = DEFAULT_DT, T: float = 100.0,
              scheme: str = "splitStep", stride: int = DEFAULT_STRIDE,
              coupling: float = 1.0) -> Trajectory:
    """Integrate to time ``state.t + T``, sampling every ``stride`` steps.

    ``splitStep`` composes three Strang steps (exact rotation, implicit
    midpoint nonlinear substep) to fourth order.  ``symplecticImplicit`` is
    the second-order implicit midpoint rule on the full field.  ``coupling``
    multiplies the quintic term; 0 gives the linear flow.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    if dt <= 0 or T < 0 or stride < 1:
        raise ValueError("dt and stride must be positive and T non-negative")
    J = state.J
    k2 = (modes(J) ** 2).astype(float)
    n_steps = int(round(T / dt))
    if scheme == "splitStep":
        rots = [np.exp(-0.5j * w * dt * k2) for w in _YOSHIDA]

        def step(u):
            return _yoshida_step(u, dt, J, rots, coupling)
    else:
        def step(u):
            return _implicit_step(u, dt, J, k2, coupling)

    u = state.u.copy()
    norm0 = np.linalg.norm(u)
    samples, times = [u.copy()], [state.t]
    for n in range(1, n_steps + 1):
        u = step(u)
        if not np.isfinite(norm0) or np.linalg.norm(u) > 2 * norm0 + 1e-300:
            raise FloatingPointError(f"norm growth at step {n}: dt={dt} is unstable")
        if n % stride == 0 or n == n_steps:
            samples.append(u.copy())
            times.append(state.t + n * dt)
    U = np.array(samples)
    L = np.sum(np.abs(U) ** 2, axis=1)
    M = np.sum(modes(J) * np.abs(U) ** 2, axis=1)
    H = np.array([hamiltonian(row, J) for row in U])
    return Trajectory(np.array(times), U, J, state.eps, dt, scheme, L, M, H)


def linear_flow(state: GalerkinState, t: float) -> np.ndarray:
    return state.u * np.exp(-1j * modes(state.J) ** 2 * t)


# ---------------------------------------------------------------- diagnostics

COMBINATIONS = {
    "xi1": {1: 1.0, 2: 2.0},
    "xi2": {-1: 1.0, 2: -2.0},
    "xi3": {-2: 1.0, 2: 1.0},
}
LOW = {-2: 0.5, 1: 1.0}
HIGH = {-2: 1.5, 1: 3.0}
# mirrored pair: −1 and 2 swap roles
LOW_MIRROR = {-1: 1.0, 2: 0.5}
HIGH_MIRROR = {-1: 3.0, 2: 1.5}


def mode_energies(traj: Trajectory) -> dict[int, np.ndarray]:
    """``f_j = ε^{−1/2}|u_j|²`` for the tangential modes."""
    s = 1.0 / math.sqrt(traj.eps)
    return {j: s * np.abs(traj.mode(j)) ** 2 for j in TANGENTIAL}


def combinations(f: dict[int, np.ndarray]) -> dict[str, np.ndarray]:
    return {name: sum(c * f[j] for j, c in w.items()) for name, w in COMBINATIONS.items()}


def period_average(traj: Trajectory, series: np.ndarray) -> np.ndarray:
    """Mean over consecutive windows of length 2π (one period of the linear flow).

    Needs ``2π`` to be a whole number of samples; the non-resonant first-order
    oscillations (integer frequencies) then average out exactly.
    """
    h = traj.dt * round((traj.t[1] - traj.t[0]) / traj.dt) if len(traj.t) > 1 else traj.dt
    per = 2 * math.pi / h
    n = int(round(per))
    if abs(per - n) > 1e-9 or n < 2:
        raise ValueError("sampling interval does not divide 2π")
    if len(series) < n + 1:
        raise ValueError("trajectory shorter than one averaging window")
    c = np.cumsum(np.concatenate([[0.0], series[:-1]]))
    return (c[n:] - c[:-n]) / n


@dataclass
class BeatingReport:
    xi: tuple
    combos: dict
    combo_deviation: dict
    combo_deviation_raw: dict
    low_at_zero: bool
    high_at_pi: bool
    mirrored: bool
    f2_range: tuple
    beating: bool
    drift: dict

    def as_dict(self) -> dict:
        return {
            "xi": list(self.xi),
            "combos": self.combos,
            "combo_deviation": self.combo_deviation,
            "combo_deviation_raw": self.combo_deviation_raw,
            "low_at_zero": self.low_at_zero,
            "high_at_pi": self.high_at_pi,
            "mirrored": self.mirrored,
            "f2_range": list(self.f2_range),
            "beating": self.beating,
            "drift": self.drift,
        }


def reduced_angle(traj: Trajectory, xi, phi0: float = 0.0) -> np.ndarray:
    """Reduced angle ``φ₀ + λ0 ε t`` (wrapped to ``(−π, π]``)."""
    aa = pendulum.action_angle_data(xi, n_grid=8)
    phi = phi0 + aa.frequency * traj.eps * traj.t
    return np.angle(np.exp(1j * phi))


def diagnostics(traj: Trajectory, xi, phi0: float = 0.0, window: float = math.pi / 8) -> BeatingReport:
    """Mode energies, the three combinations, and the beating verdict.

    Combination deviations are spreads of the 2π-averaged series
    (``combo_deviation``) and of the raw samples (``combo_deviation_raw``),
    relative to the normalized mass ``Σ f_j`` (a combination may vanish).
    The thresholds are tested on the samples within ``window`` of reduced
    angles 0 and π.
    """
    f = mode_energies(traj)
    combos = combinations(f)
    dev, dev_raw, means = {}, {}, {}
    ref = float(np.mean(sum(f.values())))
    for name, series in combos.items():
        avg = period_average(traj, series)
        means[name] = float(np.mean(avg))
        dev[name] = float((avg.max() - avg.min()) / ref)
        dev_raw[name] = float((series.max() - series.min()) / ref)
    angle = reduced_angle(traj, xi, phi0)
    near0 = np.abs(angle) <= window
    nearpi = np.abs(np.abs(angle) - math.pi) <= window

    def below(mask, thr):
        return bool(mask.any() and all(np.min(f[j][mask]) < v for j, v in thr.items()))

    def above(mask, thr):
        return bool(mask.any() and all(np.max(f[j][mask]) > v for j, v in thr.items()))

    low0 = below(near0, LOW)
    highpi = above(nearpi, HIGH)
    mirror = above(near0, HIGH_MIRROR) and below(nearpi, LOW_MIRROR)
    return BeatingReport(
        xi=tuple(float(x) for x in xi), combos=means, combo_deviation=dev,
        combo_deviation_raw=dev_raw, low_at_zero=low0, high_at_pi=highpi,
        mirrored=mirror, f2_range=(float(f[2].min()), float(f[2].max())),
        beating=low0 and highpi and mirror, drift=traj.drift())


def reduced_trace(xi, times, eps: float, phi0: float = 0.0) -> np.ndarray:
    """``p(ε t)`` on the reduced orbit through ``φ₀``."""
    K = np.asarray(xi[1:], dtype=float)
    p0, q0, _ = reduced_point(xi, phi0)
    tau = eps * (np.asarray(times, dtype=float) - times[0])

    def rhs(_, y):
        dp, dq = pendulum.vector_field(y[0], y[1], K)
        return [dp, dq]

    sol = solve_ivp(rhs, (0.0, float(tau[-1])), [p0, q0], method="DOP853", t_eval=tau,
                    rtol=1e-11, atol=1e-12)
    if not sol.success:
        raise RuntimeError(sol.message)
    return sol.y[0]
