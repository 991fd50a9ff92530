"""Reduced one-degree-of-freedom system on the tangential modes.

On the invariant subspace ``z = 0`` the Birkhoff Hamiltonian becomes

    ℋ(p, q; K) = K1 + K2 + 4 K3 + ε (a(p, K) + b(p, K) cos q)

with site actions ``x = (p, K1 − 2p, K2 + 2p, K3 − p)`` (the actions of the
modes ``2, 1, −1, −2``) and

    a = 6 (Σx)³ − 9 (Σx)(Σx²) + 4 Σx³,   b = 18 x1 x2 √(x0 x3).

Everything below is ε-free: ``h = a + b cos q`` generates the motion in the
rescaled time ``τ = ε t``, with ``q' = ∂_p h`` and ``p' = −∂_q h``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np
import sympy as sp
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

K_STAR = np.array([4.0, 0.0, 2.0])
LINEAR_FREQ = np.array([1.0, 1.0, 4.0])
GUARD = 1e-3
EXTRAP_ACTIONS = (1e-2, 5e-3, 2.5e-3)
FD_STEP = 1e-4

# Floquet coupling data: (n_j, ell_j) for the blocks j = 3, 4
BLOCK_INDICES = {3: (-1, 3), 4: (-2, 4)}

_P, _K1, _K2, _K3 = sp.symbols("p K1 K2 K3", real=True)
_X = (_P, _K1 - 2 * _P, _K2 + 2 * _P, _K3 - _P)
_S1 = _K1 + _K2 + _K3
_EXPR = {
    "a": 6 * _S1**3 - 9 * _S1 * sum(x**2 for x in _X) + 4 * sum(x**3 for x in _X),
    "b": 18 * _X[1] * _X[2] * sp.sqrt(_X[0] * _X[3]),
    "f": 18 * _S1**2 - 9 * sum(x**2 for x in _X),
    "U3": 72 * sp.sqrt(_X[0] * _X[1] * _X[2] * _X[3]),
    "U4": 18 * _X[0] * _X[3],
}


@lru_cache(maxsize=None)
def _lambdified(name: str, order: tuple[int, int, int, int]):
    expr = _EXPR[name]
    for var, n in zip((_P, _K1, _K2, _K3), order):
        if n:
            expr = sp.diff(expr, var, n)
    return sp.lambdify((_P, _K1, _K2, _K3), expr, "numpy")


def deriv(name: str, p, K, dp: int = 0, dK=(0, 0, 0)):
    """Closed-form partial derivative of ``a``, ``b``, ``f``, ``U3`` or ``U4``."""
    fn = _lambdified(name, (dp, *dK))
    K = np.asarray(K, dtype=float)
    out = fn(np.asarray(p, dtype=float), K[0], K[1], K[2])
    return np.broadcast_to(out, np.shape(p)).astype(float) if np.ndim(p) else float(out)


def _unit(i: int, n: int = 1) -> tuple:
    e = [0, 0, 0]
    e[i] = n
    return tuple(e)


def site_actions(p, K):
    """Actions ``(I2, I1, I−1, I−2) = (p, K1−2p, K2+2p, K3−p)``."""
    K = np.asarray(K, dtype=float)
    return np.array([p, K[0] - 2 * p, K[1] + 2 * p, K[2] - p])


def _check_domain(p, K):
    x = site_actions(np.asarray(p, dtype=float), K)
    if np.any(x[0] * x[3] < 0):
        raise ValueError(f"square-root argument negative at p={p}, K={tuple(K)}")


class ABData(NamedTuple):
    """ε-free pieces of ``A`` and ``B`` and their derivatives at ``(K, p)``."""

    linear: float
    a: float
    b: float
    a_p: float
    b_p: float
    a_pp: float
    b_pp: float
    a_ppp: float
    b_ppp: float
    a_pppp: float
    b_pppp: float
    a_K: np.ndarray
    b_K: np.ndarray

    def A(self, eps: float) -> float:
        return self.linear + eps * self.a

    def B(self, eps: float) -> float:
        return eps * self.b


def hamiltonian_AB(K, p: float) -> ABData:
    """Values and derivatives of the reduced Hamiltonian pieces."""
    _check_domain(p, K)
    K = np.asarray(K, dtype=float)
    d = {}
    for name in ("a", "b"):
        for n in range(5):
            d[name, n] = deriv(name, p, K, n)
    aK = np.array([deriv("a", p, K, 0, _unit(i)) for i in range(3)])
    bK = np.array([deriv("b", p, K, 0, _unit(i)) for i in range(3)])
    return ABData(float(LINEAR_FREQ @ K), d["a", 0], d["b", 0], d["a", 1], d["b", 1],
                  d["a", 2], d["b", 2], d["a", 3], d["b", 3], d["a", 4], d["b", 4], aK, bK)


def reduced_hamiltonian(p, q, K, eps: float = 1.0):
    """Full ``ℋ = K1+K2+4K3 + ε(a + b cos q)``."""
    K = np.asarray(K, dtype=float)
    return LINEAR_FREQ @ K + eps * (deriv("a", p, K) + deriv("b", p, K) * np.cos(q))


def h(p, q, K):
    """ε-free part ``a + b cos q``."""
    return deriv("a", p, K) + deriv("b", p, K) * np.cos(q)


def vector_field(p, q, K):
    """``(p', q')`` in rescaled time."""
    return deriv("b", p, K) * np.sin(q), deriv("a", p, K, 1) + deriv("b", p, K, 1) * np.cos(q)


def _newton(fun, dfun, x0, tol=1e-14, maxit=50):
    x = x0
    for _ in range(maxit):
        dx = fun(x) / dfun(x)
        x -= dx
        if abs(dx) < tol * max(1.0, abs(x)):
            return x
    raise RuntimeError("Newton iteration did not converge")


class FixedPoints(NamedTuple):
    stable: float
    unstable: float


def fixed_points(K) -> FixedPoints:
    """Stable point at ``q = 0`` and saddle at ``q = π``, by Newton from ``p = 1``."""
    K = np.asarray(K, dtype=float)
    try:
        ps = _newton(lambda p: deriv("a", p, K, 1) + deriv("b", p, K, 1),
                     lambda p: deriv("a", p, K, 2) + deriv("b", p, K, 2), 1.0)
        pu = _newton(lambda p: deriv("a", p, K, 1) - deriv("b", p, K, 1),
                     lambda p: deriv("a", p, K, 2) - deriv("b", p, K, 2), 1.0)
    except (RuntimeError, ZeroDivisionError, FloatingPointError) as exc:
        raise RuntimeError(f"fixed-point solve failed at K={tuple(K)}") from exc
    if not (0 < ps < K[2] and 0 < pu < K[2]):
        raise RuntimeError(f"fixed points left the domain at K={tuple(K)}")
    # stability types: maximum at q = 0, saddle at q = π
    b_s, hpp_s = deriv("b", ps, K), deriv("a", ps, K, 2) + deriv("b", ps, K, 2)
    b_u, hpp_u = deriv("b", pu, K), deriv("a", pu, K, 2) - deriv("b", pu, K, 2)
    if not (b_s > 0 and hpp_s < 0 and b_u > 0 and hpp_u < 0):
        raise RuntimeError(f"unexpected fixed-point types at K={tuple(K)}")
    return FixedPoints(float(ps), float(pu))


def separatrix_energy(K) -> float:
    return float(h(fixed_points(K).unstable, math.pi, K))


def separatrix_crossings(K) -> tuple[float, float]:
    """Points where the separatrix meets ``q = 0`` on either side of the centre."""
    K = np.asarray(K, dtype=float)
    fp = fixed_points(K)
    level = separatrix_energy(K)
    g = lambda p: h(p, 0.0, K) - level  # noqa: E731
    lo, hi = 0.0, K[2]
    try:
        p1 = brentq(g, lo, fp.stable, xtol=1e-15, rtol=1e-15, maxiter=200)
        p2 = brentq(g, fp.stable, hi, xtol=1e-15, rtol=1e-15, maxiter=200)
    except ValueError as exc:
        raise RuntimeError("separatrix crossing not bracketed") from exc
    return float(p1), float(p2)


# ---------------------------------------------------------------------------
# Action-angle quadrature


@dataclass
class _Chart:
    """Scaled polar chart around the stable point."""

    K: np.ndarray
    pc: float
    top: float
    sp_: float
    sq: float
    h_sep: float

    @classmethod
    def at(cls, K) -> "_Chart":
        K = np.asarray(K, dtype=float)
        fp = fixed_points(K)
        pc = fp.stable
        hpp = deriv("a", pc, K, 2) + deriv("b", pc, K, 2)
        b0 = deriv("b", pc, K)
        return cls(K, pc, float(h(pc, 0.0, K)), 1 / math.sqrt(-hpp), 1 / math.sqrt(b0),
                   separatrix_energy(K))

    def point(self, rho, theta):
        return self.pc + self.sp_ * rho * np.cos(theta), self.sq * rho * np.sin(theta)

    def rho_max(self, theta):
        c, s = np.cos(theta), np.sin(theta)
        with np.errstate(divide="ignore"):
            rp = np.where(c > 0, (self.K[2] - self.pc) / (self.sp_ * c),
                          np.where(c < 0, self.pc / (self.sp_ * -c), np.inf))
            rq = np.where(s != 0, math.pi / (self.sq * np.abs(s)), np.inf)
        return np.minimum(rp, rq) * (1 - 1e-12)

    def drop(self, rho, theta):
        """``top − h`` and its ρ-derivative along the ray."""
        p, q = self.point(rho, theta)
        hp = deriv("a", p, self.K, 1) + deriv("b", p, self.K, 1) * np.cos(q)
        hq = -deriv("b", p, self.K) * np.sin(q)
        val = self.top - (deriv("a", p, self.K) + deriv("b", p, self.K) * np.cos(q))
        dval = -(hp * self.sp_ * np.cos(theta) + hq * self.sq * np.sin(theta))
        return val, dval

    def level_radius(self, energy: float, theta):
        """Radius of the ``h = energy`` level along each ray."""
        target = self.top - energy
        lo = np.zeros_like(theta)
        hi = self.rho_max(theta)
        # initial guess from the quadratic approximation, bracketed by bisection
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            val, _ = self.drop(mid, theta)
            below = val < target
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
            if np.max(hi - lo) < 1e-9:
                break
        rho = 0.5 * (lo + hi)
        for _ in range(4):
            val, dval = self.drop(rho, theta)
            rho = rho - (val - target) / dval
        return rho


class OrbitData(NamedTuple):
    action: float
    energy: float
    period: float
    area_rate: float  # dA/de, equal to −period


def _orbit_quadrature(chart: _Chart, energy: float, n: int) -> OrbitData:
    theta = 2 * np.pi * np.arange(n) / n
    rho = chart.level_radius(energy, theta)
    _, dval = chart.drop(rho, theta)
    w = chart.sp_ * chart.sq * 2 * np.pi / n
    area = 0.5 * w * np.sum(rho**2)
    period = w * np.sum(rho / dval)
    return OrbitData(area / (2 * np.pi), energy, period, -period)


def orbit_at_energy(K, energy: float, n: int = 512) -> OrbitData:
    chart = _Chart.at(K)
    if not chart.h_sep < energy < chart.top:
        raise ValueError("energy outside the oscillation band")
    return _orbit_quadrature(chart, energy, n)


def separatrix_action(K, n: int = 4096) -> float:
    """Action of the separatrix loop (limit of the oscillation band)."""
    chart = _Chart.at(K)
    return _orbit_quadrature(chart, chart.h_sep + 1e-12 * abs(chart.h_sep), n).action


def energy_of_action(K, E: float, n: int = 512, chart: _Chart | None = None) -> OrbitData:
    """Invert ``E ↦ energy`` on the oscillation band by safeguarded Newton."""
    chart = chart or _Chart.at(K)
    if E <= 0:
        raise ValueError("action must be positive")
    alpha2 = 1 / (chart.sp_ * chart.sq)  # small-oscillation frequency
    lo, hi = chart.h_sep, chart.top
    e = max(chart.top - alpha2 * E, 0.5 * (lo + chart.top))
    if chart.top - alpha2 * E > lo:
        e = chart.top - alpha2 * E
    for _ in range(60):
        od = _orbit_quadrature(chart, e, n)
        r = od.action - E
        if r > 0:
            lo = max(lo, e)
        else:
            hi = min(hi, e)
        step = r * 2 * np.pi / od.period
        e_new = e + step
        if not lo < e_new < hi:
            e_new = 0.5 * (lo + hi)
        if abs(e_new - e) < 1e-15 * abs(e):
            od = _orbit_quadrature(chart, e_new, n)
            return od
        e = e_new
    raise RuntimeError("energy inversion did not converge")


def reduced_energy(E: float, K, n: int = 512) -> float:
    """ε-free ``h̃(E, K)``; the full Hamiltonian is ``K1+K2+4K3 + ε h̃``."""
    return energy_of_action(K, E, n).energy


class ActionAngle(NamedTuple):
    period: float
    energy: float
    frequency: float
    phi: np.ndarray
    p: np.ndarray
    q: np.ndarray


def _check_band(K, E):
    if E < GUARD:
        raise ValueError(f"action {E} inside the guard band at the fixed point")
    Esep = separatrix_action(K)
    if E > Esep - GUARD:
        raise ValueError(f"action {E} inside the guard band at the separatrix ({Esep:.6f})")


def orbit_samples(K, energy: float, period: float, n: int, chart: _Chart | None = None):
    """``(p, q)`` at ``n`` equally spaced times over one period, from ``(p_max, 0)``."""
    chart = chart or _Chart.at(K)
    p0 = float(chart.level_radius(energy, np.array([0.0]))[0]) * chart.sp_ + chart.pc
    K = np.asarray(K, dtype=float)

    def rhs(_, y):
        dp, dq = vector_field(y[0], y[1], K)
        return [dp, dq]

    t = period * np.arange(n) / n
    sol = solve_ivp(rhs, (0.0, period), [p0, 0.0], method="DOP853", t_eval=t,
                    rtol=1e-12, atol=1e-13)
    if not sol.success:
        raise RuntimeError(sol.message)
    return sol.y[0], sol.y[1]


def action_angle_data(xi, n_grid: int = 256, n_rays: int = 512) -> ActionAngle:
    """Period, energy and orbit samples for ``ξ = (E, K)``.

    The angle grid ``φ_k = λ0 τ_k`` follows the flow; ``φ = 0`` is the point
    of the orbit on ``q = 0`` with the largest ``p``.
    """
    E, K = float(xi[0]), np.asarray(xi[1:], dtype=float)
    _check_band(K, E)
    chart = _Chart.at(K)
    od = energy_of_action(K, E, n_rays, chart)
    p, q = orbit_samples(K, od.energy, od.period, n_grid, chart)
    freq = -2 * np.pi / od.period
    phi = freq * od.period * np.arange(n_grid) / n_grid
    return ActionAngle(od.period, od.energy, freq, phi, p, q)


def frequency_E(E, K, n_rays: int = 512) -> float:
    """``∂h̃/∂E = −2π/T``."""
    return -2 * np.pi / energy_of_action(K, E, n_rays).period


def _grad_K(E, K, step=FD_STEP, n_rays=512) -> np.ndarray:
    """``∂h̃/∂K`` at fixed action, central differences with one Richardson level."""
    K = np.asarray(K, dtype=float)
    out = np.empty(3)
    for i in range(3):
        d = []
        for hstep in (step, step / 2):
            e = np.eye(3)[i] * hstep
            d.append((reduced_energy(E, K + e, n_rays) - reduced_energy(E, K - e, n_rays))
                     / (2 * hstep))
        out[i] = (4 * d[1] - d[0]) / 3
    return out


def _neville_zero(xs, ys):
    """Value at 0 of the interpolating polynomial through ``(xs, ys)``."""
    xs = list(xs)
    ys = [np.asarray(y, dtype=float) for y in ys]
    n = len(xs)
    for m in range(1, n):
        ys = [(xs[i + m] * ys[i] - xs[i] * ys[i + 1]) / (xs[i + m] - xs[i]) for i in range(n - m)]
    return ys[0]


class FrequencyData(NamedTuple):
    lam: np.ndarray
    f0: float
    period: float
    phi: np.ndarray
    p: np.ndarray
    q: np.ndarray
    U: dict
    V: dict
    f: np.ndarray


def block_coefficients(p, q, K):
    """``U_j`` and ``V_j`` (ε-free) for ``j = 3, 4`` along sampled states."""
    K = np.asarray(K, dtype=float)
    cq = np.cos(q)
    hp = deriv("a", p, K, 1) + deriv("b", p, K, 1) * cq
    hK1 = deriv("a", p, K, 0, (1, 0, 0)) + deriv("b", p, K, 0, (1, 0, 0)) * cq
    hK2 = deriv("a", p, K, 0, (0, 1, 0)) + deriv("b", p, K, 0, (0, 1, 0)) * cq
    U, V = {}, {}
    for j, (nj, lj) in BLOCK_INDICES.items():
        U[j] = np.asarray(deriv(f"U{j}", p, K), dtype=float)
        V[j] = np.asarray(lj * (hK1 - hK2) + nj * hp, dtype=float)
    return U, V


def fixed_point_frequencies(K) -> np.ndarray:
    """``(−α2, ∂_K α0)`` at the stable point, closed form (the ``E → 0`` limit)."""
    tw = _alpha_cascade(K)
    return np.array([-tw["alpha2"], *tw["dalpha0"]])


def orbit_average_gradient(p, q, K) -> np.ndarray:
    """``∂_K h̃`` at fixed action as the orbit average of ``∂_K h``."""
    cq = np.cos(q)
    return np.array([np.mean(deriv("a", p, K, 0, _unit(i)) + deriv("b", p, K, 0, _unit(i)) * cq)
                     for i in range(3)])


def frequency_map(xi, n_grid: int = 256, n_rays: int = 512,
                  gradient: str = "fd") -> FrequencyData:
    """ε-normalized frequencies ``λ``, ``f0`` and block coefficients along the orbit.

    ``gradient`` selects how ``∂_K h̃`` is obtained: ``"fd"`` (central
    differences at fixed action with one Richardson level) or ``"average"``
    (orbit average of ``∂_K h``, valid because ``E`` is an action variable).
    For ``E`` below the guard band the orbit collapses to the fixed point:
    ``λ`` is then obtained by polynomial extrapolation from the actions in
    ``EXTRAP_ACTIONS`` and the orbit data are constant.
    """
    if gradient not in ("fd", "average"):
        raise ValueError("gradient must be 'fd' or 'average'")
    E, K = float(xi[0]), np.asarray(xi[1:], dtype=float)
    if E < GUARD:
        lams = []
        for Ek in EXTRAP_ACTIONS:
            if gradient == "fd":
                gK = _grad_K(Ek, K, n_rays=n_rays)
            else:
                aa = action_angle_data([Ek, *K], n_grid, n_rays)
                gK = orbit_average_gradient(aa.p, aa.q, K)
            lams.append(np.array([frequency_E(Ek, K, n_rays), *gK]))
        lam = _neville_zero(EXTRAP_ACTIONS, lams)
        pc = fixed_points(K).stable
        p = np.full(n_grid, pc)
        q = np.zeros(n_grid)
        period = 2 * np.pi / abs(lam[0])
        phi = lam[0] * period * np.arange(n_grid) / n_grid
    else:
        aa = action_angle_data(xi, n_grid, n_rays)
        gK = (_grad_K(E, K, n_rays=n_rays) if gradient == "fd"
              else orbit_average_gradient(aa.p, aa.q, K))
        lam = np.array([aa.frequency, *gK])
        p, q, period, phi = aa.p, aa.q, aa.period, aa.phi
    f = np.asarray(deriv("f", p, K), dtype=float)
    U, V = block_coefficients(p, q, K)
    return FrequencyData(lam, float(np.mean(f)), period, phi, p, q, U, V, f)


# ---------------------------------------------------------------------------
# Twist


def beta_coefficient(alpha: dict, l: int, m: int) -> float:
    """Coefficient of ``z^l z̄^m`` for ``Σ α_{i,j} P^i Q^{2j}`` with ``√2 z = P + iQ``.

    Uses ``Q² = −(z − z̄)²/2``, so both the factor ``(−1)^j`` and the sign
    ``(−1)^b`` from expanding ``(z − z̄)^{2j}`` enter.
    """
    n = l + m
    tot = 0.0
    for (i, j), val in alpha.items():
        if i + 2 * j != n:
            continue
        for a_ in range(0, i + 1):
            b_ = l - a_
            if 0 <= b_ <= 2 * j:
                tot += (-1) ** j * (-1) ** b_ * val * math.comb(i, a_) * math.comb(2 * j, b_)
    return tot / math.sqrt(2) ** n


def _alpha_cascade(K) -> dict:
    K = np.asarray(K, dtype=float)
    pc = fixed_points(K).stable

    def g(n, dK=(0, 0, 0), p=pc):
        return deriv("a", p, K, n, dK) + deriv("b", p, K, n, dK)

    def b(n, dK=(0, 0, 0), p=pc):
        return deriv("b", p, K, n, dK)

    G, Gpp, Gppp, Gpppp = g(0), g(2), g(3), g(4)
    B, Bp, Bpp = b(0), b(1), b(2)
    lam4 = -Gpp / B
    lam = lam4 ** 0.25
    alpha2 = math.sqrt(-B * Gpp)
    # implicit derivative of the stable point in K
    dpc = np.array([-g(1, _unit(i)) / Gpp for i in range(3)])
    dalpha0 = np.array([g(0, _unit(i)) for i in range(3)])
    ddalpha0 = np.empty((3, 3))
    for i in range(3):
        for k in range(3):
            dK = tuple(np.array(_unit(i)) + np.array(_unit(k)))
            ddalpha0[i, k] = g(0, dK) + g(1, _unit(i)) * dpc[k]
    dGpp = np.array([g(2, _unit(i)) + Gppp * dpc[i] for i in range(3)])
    dB = np.array([b(0, _unit(i)) + Bp * dpc[i] for i in range(3)])
    dalpha2 = -(dB * Gpp + B * dGpp) / (2 * alpha2)
    a3 = {(3, 0): Gppp / (6 * lam**3), (1, 1): -0.5 * Bp * lam}
    a4 = {(4, 0): Gpppp / (24 * lam4), (2, 1): -0.25 * Bpp, (0, 2): B * lam4 / 24}
    beta3 = {(l, 3 - l): beta_coefficient(a3, l, 3 - l) for l in range(4)}
    beta4 = {(l, 4 - l): beta_coefficient(a4, l, 4 - l) for l in range(5)}
    return {"p": pc, "G": G, "Gpp": Gpp, "Gppp": Gppp, "Gpppp": Gpppp, "B": B, "Bp": Bp,
            "Bpp": Bpp, "lambda4": lam4, "alpha0": G, "alpha2": alpha2, "dalpha0": dalpha0,
            "ddalpha0": ddalpha0, "dalpha2": dalpha2, "alpha3": a3, "alpha4": a4,
            "beta3": beta3, "beta4": beta4}


def _quartic_normal_form(alpha2: float, beta3: dict, beta4: dict) -> float:
    """``|z|⁴`` coefficient after removing the cubic terms by one Lie step."""
    from .algebra import PolyHamiltonian, poisson_bracket

    def mono(l, m, c):
        return PolyHamiltonian({((), (), ((0, l),) if l else (), ((0, m),) if m else ()): c}, dim=0)

    H3 = sum((mono(l, m, c) for (l, m), c in beta3.items() if c), PolyHamiltonian.zero(0))
    # {Ω|z|², z^l z̄^m} = −iΩ(l−m) z^l z̄^m with Ω = −α2
    F = sum((mono(l, m, 1j * c / (-alpha2 * (l - m))) for (l, m), c in beta3.items() if c),
            PolyHamiltonian.zero(0))
    corr = 0.5 * poisson_bracket(F, H3)
    return float((beta4.get((2, 2), 0.0) + corr.coeff(alpha={0: 2}, beta={0: 2})).real)


class Twist(NamedTuple):
    M: np.ndarray
    det: float
    gamma22: float
    beta3: dict
    beta4: dict
    alpha2: float


def twist_matrix(K) -> Twist:
    """Hessian of ``h̃(E, K)`` at ``E = 0`` in the ordering ``(K1, K2, K3, E)``."""
    c = _alpha_cascade(K)
    g22 = _quartic_normal_form(c["alpha2"], c["beta3"], c["beta4"])
    M = np.zeros((4, 4))
    M[:3, :3] = c["ddalpha0"]
    M[:3, 3] = -c["dalpha2"]
    M[3, :3] = -c["dalpha2"]
    M[3, 3] = 2 * g22
    return Twist(M, float(np.linalg.det(M)), g22, c["beta3"], c["beta4"], c["alpha2"])


def phase_portrait(K, n: int = 101, n_orbits: int = 7, samples: int = 200):
    """Grid values of ``h`` on ``[−π, π] × (0, K3)`` and a few orbits for plotting."""
    K = np.asarray(K, dtype=float)
    qs = np.linspace(-np.pi, np.pi, n)
    ps = np.linspace(K[2] * 1e-3, K[2] * (1 - 1e-3), n)
    Q, Pg = np.meshgrid(qs, ps)
    grid = h(Pg, Q, K)
    chart = _Chart.at(K)
    orbits = []
    for e in np.linspace(chart.h_sep, chart.top, n_orbits + 2)[1:-1]:
        od = _orbit_quadrature(chart, e, 512)
        p, q = orbit_samples(K, e, od.period, samples, chart)
        orbits.append((e, p, q))
    return qs, ps, grid, orbits
