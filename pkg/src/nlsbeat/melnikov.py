"""Melnikov non-resonance: exact checks at ``ξ⋆``, excision tests, measure estimates.

Indices are ``(ℓ, σ, σ′, h, k)`` with ``ℓ ∈ Z⁴`` (angle 0 is the pendulum
angle, angles 1..3 are conjugate to ``K``), signs ``σ, σ′ ∈ {−1, 0, 1}`` and
normal modes ``h, k`` present only when their sign is non-zero.  The divisor
is ``ω·ℓ + σΩ_h + σ′Ω_k`` with ``ω = (0,1,1,4) + ελ`` and ``Ω_j = j² + εΘ_j``.
Mass and momentum conservation require

    η(ℓ) + σ + σ′ = 0,         η(ℓ) = ℓ1 + ℓ2 + ℓ3,
    π(ℓ) + σ r(h) + σ′ r(k) = 0, π(ℓ) = ℓ1 − ℓ2 − 2ℓ3,

with ``r(j) = |j|`` on the Floquet blocks ``|j| ∈ {3, 4}`` and ``r(j) = j``
otherwise.  Every normal mode outside the blocks carries ``Θ_j = f0``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np
import sympy as sp
from scipy.interpolate import RegularGridInterpolator

from . import floquet as flq
from . import pendulum as pend
from . import TANGENTIAL

DOMAIN = ((0.004, 0.012), (3.9, 4.1), (-0.1, 0.1), (1.9, 2.1))
GRID_SHAPE = (5, 3, 3, 3)
LINEAR_OMEGA = np.array([0, 1, 1, 4])
BLOCK_MODES = (3, -3, 4, -4)
TAU = 5.0
K0 = 8
MAX_ELL_BOUND = 512


def r_index(j: int) -> int:
    return abs(j) if abs(j) in (3, 4) else j


def is_normal(j: int) -> bool:
    return j not in TANGENTIAL


def eta(ell) -> int:
    return ell[1] + ell[2] + ell[3]


def pi_(ell) -> int:
    return ell[1] - ell[2] - 2 * ell[3]


def fourier_cutoff(m: int, k0: int = K0) -> int:
    """``K_m = 4^m K0``."""
    return 4**m * k0


def _theta_coefficients(sigma: int, h, sigma_p: int, k) -> tuple:
    """Coefficients of ``(Θ3, Θ−3, Θ4, Θ−4, f0)`` in ``σΘ_h + σ′Θ_k``."""
    c = [0, 0, 0, 0, 0]
    for s, j in ((sigma, h), (sigma_p, k)):
        if s:
            c[BLOCK_MODES.index(j) if j in BLOCK_MODES else 4] += s
    return tuple(c)


@dataclass(frozen=True)
class MelnikovIndex:
    ell: tuple
    sigma: int
    sigma_prime: int
    h: int | None = None
    k: int | None = None

    def __post_init__(self):
        ell = tuple(int(x) for x in self.ell)
        if len(ell) != 4:
            raise ValueError("ell must have four components")
        object.__setattr__(self, "ell", ell)
        for s, j in ((self.sigma, self.h), (self.sigma_prime, self.k)):
            if s not in (-1, 0, 1):
                raise ValueError("signs must lie in {-1, 0, 1}")
            if (s == 0) != (j is None):
                raise ValueError("a mode is present exactly when its sign is non-zero")
            if j is not None and not is_normal(j):
                raise ValueError(f"mode {j} is tangential")
        if eta(ell) + self.sigma + self.sigma_prime != 0:
            raise ValueError("mass constraint violated")
        if pi_(ell) + self.momentum_of_modes != 0:
            raise ValueError("momentum constraint violated")
        if self.is_trivial:
            raise ValueError("trivial index")

    @property
    def momentum_of_modes(self) -> int:
        return sum(s * r_index(j) for s, j in self._modes())

    @property
    def is_trivial(self) -> bool:
        return (not any(self.ell) and self.sigma + self.sigma_prime == 0
                and self.h == self.k)

    @property
    def norm(self) -> int:
        return sum(abs(x) for x in self.ell)

    @property
    def quadratic(self) -> int:
        """``σh² + σ′k²``."""
        return sum(s * j * j for s, j in self._modes())

    @property
    def integer_part(self) -> int:
        """The ``ε⁰`` part of the divisor."""
        return int(LINEAR_OMEGA @ np.array(self.ell)) + self.quadratic

    def _modes(self):
        return [(s, j) for s, j in ((self.sigma, self.h), (self.sigma_prime, self.k)) if s]

    def divisor(self, spectra: "Spectra", eps: float) -> float:
        c = np.array(_theta_coefficients(self.sigma, self.h, self.sigma_prime, self.k))
        return self.integer_part + eps * (float(spectra.lam @ np.array(self.ell))
                                          + float(c @ spectra.theta_vector))


def admissible_indices(ell_bound: int, mode_bound: int) -> list[MelnikovIndex]:
    """All non-trivial indices with ``|ℓ|₁ ≤ ell_bound`` and ``|h|, |k| ≤ mode_bound``."""
    if not 0 <= ell_bound <= 64 or not 0 <= mode_bound <= 64:
        raise ValueError("bounds outside the enumeration limits")
    normal = [j for j in range(-mode_bound, mode_bound + 1) if is_normal(j)]
    slots = [(0, None)] + [(s, j) for s in (1, -1) for j in normal]
    out = []
    for (s1, h), (s2, k) in itertools.product(slots, repeat=2):
        mass = s1 + s2
        mom = sum(s * r_index(j) for s, j in ((s1, h), (s2, k)) if s)
        for l1 in range(-ell_bound, ell_bound + 1):
            l3 = 2 * l1 + mass + mom
            l2 = -2 * mass - mom - 3 * l1
            rest = abs(l1) + abs(l2) + abs(l3)
            if rest > ell_bound:
                continue
            for l0 in range(-(ell_bound - rest), ell_bound - rest + 1):
                ell = (l0, l1, l2, l3)
                if not any(ell) and mass == 0 and h == k:
                    continue
                out.append(MelnikovIndex(ell, s1, s2, h, k))
    return out


# ---------------------------------------------------------------------------
# Spectra

@dataclass
class Spectra:
    """Frequencies at one parameter point (ε-normalized corrections)."""

    lam: np.ndarray
    theta: dict
    f0: float
    M0: float = math.nan
    L0: float = math.nan
    alpha0: float = math.nan

    def __post_init__(self):
        self.lam = np.asarray(self.lam, dtype=float)
        if self.lam.shape != (4,) or not np.all(np.isfinite(self.lam)):
            raise ValueError("lambda must be a finite 4-vector")
        missing = set(BLOCK_MODES) - set(self.theta)
        if missing:
            raise ValueError(f"Theta missing for modes {sorted(missing)}")

    def theta_of(self, j: int) -> float:
        return self.theta[j] if j in BLOCK_MODES else self.f0

    @property
    def theta_vector(self) -> np.ndarray:
        return np.array([self.theta[j] for j in BLOCK_MODES] + [self.f0])

    def omega(self, eps: float) -> np.ndarray:
        return LINEAR_OMEGA + eps * self.lam

    def normal_frequency(self, j: int, eps: float) -> float:
        return j * j + eps * self.theta_of(j)


def spectra_at(xi, n_grid: int = 128) -> Spectra:
    """``λ``, ``f0`` and the Floquet exponents at one point of the domain."""
    freq = pend.frequency_map(xi, n_grid=n_grid, gradient="average")
    theta = {}
    for j in (3, 4):
        system = flq.BlockSystem.at(j, xi, freq=freq)
        res = flq.floquet_exponents(j, xi, system=system)
        theta[j], theta[-j] = res.theta_plus, res.theta_minus
    return Spectra(freq.lam, theta, freq.f0)


@dataclass
class SpectraGrid:
    """Spectra on a tensor grid, multilinearly interpolated."""

    axes: tuple
    lam: np.ndarray
    theta: np.ndarray
    f0: np.ndarray
    _interp: RegularGridInterpolator = field(init=False, repr=False)

    def __post_init__(self):
        self.axes = tuple(np.asarray(a, dtype=float) for a in self.axes)
        values = np.concatenate([self.lam, self.theta, self.f0[..., None]], axis=-1)
        self._interp = RegularGridInterpolator(self.axes, values, method="linear")

    @classmethod
    def build(cls, domain=DOMAIN, shape=GRID_SHAPE, n_grid: int = 128) -> "SpectraGrid":
        axes = tuple(np.linspace(lo, hi, n) for (lo, hi), n in zip(domain, shape))
        lam = np.empty(shape + (4,))
        theta = np.empty(shape + (4,))
        f0 = np.empty(shape)
        for idx in itertools.product(*(range(n) for n in shape)):
            sp_ = spectra_at([axes[i][idx[i]] for i in range(4)], n_grid)
            lam[idx] = sp_.lam
            theta[idx] = sp_.theta_vector[:4]
            f0[idx] = sp_.f0
        return cls(axes, lam, theta, f0)

    def save(self, path) -> None:
        np.savez(path, **{f"axis{i}": a for i, a in enumerate(self.axes)},
                 lam=self.lam, theta=self.theta, f0=self.f0)

    @classmethod
    def load(cls, path) -> "SpectraGrid":
        with np.load(path) as d:
            return cls(tuple(d[f"axis{i}"] for i in range(4)), d["lam"], d["theta"], d["f0"])

    @property
    def domain(self) -> tuple:
        return tuple((a[0], a[-1]) for a in self.axes)

    def values(self, xis) -> np.ndarray:
        """Rows ``(λ0..λ3, Θ3, Θ−3, Θ4, Θ−4, f0)`` at the given points."""
        return self._interp(np.atleast_2d(xis))

    def bounds(self) -> tuple[float, float]:
        """``M0`` (sup of frequencies and of ``|∂_ξ λ|``) and ``L0``.

        ``L0`` bounds the Lipschitz constant of the inverse of ``ξ ↦ λ``: the
        largest inverse smallest singular value of the grid Jacobian.
        """
        vals = np.concatenate([self.lam, self.theta, self.f0[..., None]], axis=-1)
        J = np.stack(np.gradient(self.lam, *self.axes, axis=(0, 1, 2, 3)), axis=-1)
        sv = np.linalg.svd(J.reshape(-1, 4, 4), compute_uv=False)
        m0 = max(float(np.max(np.abs(vals))), float(np.max(sv[:, 0])))
        return m0, float(np.max(1.0 / sv[:, -1]))

    def at(self, xi) -> Spectra:
        row = self.values(xi)[0]
        m0, l0 = self.bounds()
        theta = dict(zip(BLOCK_MODES, row[4:8]))
        return Spectra(row[:4], theta, row[8], m0, l0)


def cached_grid(path, domain=DOMAIN, shape=GRID_SHAPE) -> SpectraGrid:
    """Load the grid at ``path`` or build and store it there."""
    path = Path(path)
    if path.exists():
        grid = SpectraGrid.load(path)
        if grid.lam.shape[:4] == tuple(shape) and np.allclose(grid.domain, domain):
            return grid
    grid = SpectraGrid.build(domain, shape)
    path.parent.mkdir(parents=True, exist_ok=True)
    grid.save(path)
    return grid


# ---------------------------------------------------------------------------
# Index classes for fast divisor minimisation

@dataclass(frozen=True)
class IndexTable:
    """Every ``(modes, ℓ1..3)`` combination that can produce a small divisor.

    Rows hold ``ℓ1..3``, the integer part without ``ℓ0``, the Θ-coefficients
    and the bound on ``|ℓ0|``; ``ℓ0`` is chosen per parameter point.
    """

    ellK: np.ndarray
    integer: np.ndarray
    coeff: np.ndarray
    l0_bound: np.ndarray
    trivial_class: np.ndarray
    ell_bound: int


def _mode_classes(q_max: float, mom_max: int):
    """Distinct ``(Q, P, mass, Θ-coefficients)`` over mode choices with ``|Q| ≤ q_max``."""
    hmax = int(q_max) + 2
    normal = [j for j in range(-hmax, hmax + 1) if is_normal(j)]
    keys = {(0, 0, 0, (0, 0, 0, 0, 0))}
    for s in (1, -1):
        for h in normal:
            if h * h <= q_max:
                keys.add((s * h * h, s * r_index(h), s, _theta_coefficients(s, h, 0, None)))
    arr = np.array(normal)
    H, Kk = np.meshgrid(arr, arr, indexing="ij")
    for s1, s2 in ((1, 1), (-1, -1), (1, -1)):
        Q = s1 * H**2 + s2 * Kk**2
        rH = np.where(np.isin(np.abs(H), (3, 4)), np.abs(H), H)
        rK = np.where(np.isin(np.abs(Kk), (3, 4)), np.abs(Kk), Kk)
        P = s1 * rH + s2 * rK
        ok = (np.abs(Q) <= q_max) & (np.abs(P) <= mom_max)
        for h, k in zip(H[ok], Kk[ok]):
            h, k = int(h), int(k)
            for a, b, ha, kb in ((s1, s2, h, k), (-s1, -s2, h, k)):
                keys.add((a * h * h + b * k * k, a * r_index(ha) + b * r_index(kb), a + b,
                          _theta_coefficients(a, ha, b, kb)))
    return sorted(keys)


def index_table(ell_bound: int, eps: float, lam_max: float, theta_max: float) -> IndexTable:
    """Rows that can reach ``|divisor| < 1`` for ``|ℓ|₁ ≤ ell_bound``.

    Mode pairs whose quadratic part exceeds ``v|ℓ| + 2εΘmax + 1`` (``v`` a bound
    on ``|ω|``) are dominated by it and never produce a small divisor.
    """
    if not 0 < ell_bound <= MAX_ELL_BOUND:
        raise ValueError("ell_bound out of range")
    v = 4 + eps * lam_max
    q_max = v * ell_bound + 2 * eps * theta_max + 1
    window = 1 + eps * (lam_max * ell_bound + 2 * theta_max)
    classes = _mode_classes(q_max, 2 * ell_bound)
    Q = np.array([c[0] for c in classes])
    P = np.array([c[1] for c in classes])
    Mm = np.array([c[2] for c in classes])
    C = np.array([c[3] for c in classes])
    s = np.arange(-ell_bound, ell_bound + 1)
    ci, si = np.meshgrid(np.arange(len(classes)), s, indexing="ij")
    ci, si = ci.ravel(), si.ravel()
    l1 = si
    l2 = -2 * Mm[ci] - P[ci] - 3 * si
    l3 = 2 * si + Mm[ci] + P[ci]
    n_int = 6 * si + 2 * Mm[ci] + 3 * P[ci] + Q[ci]
    rest = np.abs(l1) + np.abs(l2) + np.abs(l3)
    keep = (rest <= ell_bound) & (np.abs(n_int) <= window)
    ci = ci[keep]
    trivial = (Q[ci] == 0) & (P[ci] == 0) & (Mm[ci] == 0) & ~C[ci].any(axis=1)
    return IndexTable(np.stack([l1[keep], l2[keep], l3[keep]], axis=1), n_int[keep], C[ci],
                      ell_bound - rest[keep], trivial & (rest[keep] == 0), ell_bound)


def _table_for(m: int, eps: float, k0: int, lam: np.ndarray, theta: np.ndarray) -> IndexTable:
    return index_table(fourier_cutoff(m, k0), eps, float(np.max(np.abs(lam))) * 1.05,
                       float(np.max(np.abs(theta))) * 1.05)


def min_divisor(table: IndexTable, spectra: Spectra, eps: float) -> tuple[float, int, int]:
    """Smallest ``|ω·ℓ + σΩ_h + σ′Ω_k|`` over the table at one parameter point.

    Returns the value, the table row and ``ℓ0``; ``table_index`` turns the
    last two into a ``MelnikovIndex``.
    """
    lam = spectra.lam
    R = table.integer + eps * (table.ellK @ lam[1:] + table.coeff @ spectra.theta_vector)
    a = eps * lam[0]
    l0 = np.clip(np.rint(-R / a), -table.l0_bound, table.l0_bound)
    # the trivial index ℓ = 0 is excluded: move to the better neighbour
    bad = table.trivial_class & (l0 == 0)
    if np.any(bad):
        alt = np.where(-R[bad] / a >= 0, 1.0, -1.0)
        l0[bad] = np.where(table.l0_bound[bad] >= 1, alt, np.nan)
    D = np.abs(R + a * l0)
    D[np.isnan(D)] = np.inf
    if D.size == 0:
        return math.inf, -1, 0
    i = int(np.argmin(D))
    return float(D[i]), i, int(l0[i])


def table_index(table: IndexTable, i: int, l0: int) -> MelnikovIndex:
    """A representative index for a table row."""
    ellK = tuple(int(x) for x in table.ellK[i])
    c = tuple(int(x) for x in table.coeff[i])
    ell = (l0, *ellK)
    n_int = int(table.integer[i])
    mass = -eta(ell)
    mom = -pi_(ell)
    Q = n_int - int(LINEAR_OMEGA[1:] @ np.array(ellK))
    for s1, s2 in ((0, 0), (1, 0), (-1, 0), (1, 1), (-1, -1), (1, -1), (-1, 1)):
        if s1 + s2 != mass:
            continue
        for h, k in _mode_pairs(s1, s2, mom, Q):
            if _theta_coefficients(s1, h, s2, k) == c:
                try:
                    return MelnikovIndex(ell, s1, s2, h, k)
                except ValueError:
                    continue
    raise RuntimeError("no representative index for table row")


def _mode_pairs(s1, s2, mom, Q):
    if s1 == 0 and s2 == 0:
        if mom == 0 and Q == 0:
            yield None, None
        return
    bound = abs(Q) + abs(mom) + 8
    normal = [j for j in range(-bound, bound + 1) if is_normal(j)]
    if s2 == 0:
        for h in normal:
            if s1 * r_index(h) == mom and s1 * h * h == Q:
                yield h, None
        return
    for h in normal:
        for k in normal:
            if s1 * r_index(h) + s2 * r_index(k) == mom and s1 * h * h + s2 * k * k == Q:
                yield h, k


def threshold(m: int, gamma: float, eps: float, tau: float = TAU, k0: int = K0) -> float:
    """``εγK_m^{−τ}``."""
    return eps * gamma * fourier_cutoff(m, k0) ** (-tau)


def excision_test(xi, m: int, gamma: float, eps: float, tau: float = TAU, k0: int = K0,
                  spectra: Spectra | None = None, table: IndexTable | None = None) -> bool:
    """True iff every admissible divisor with ``|ℓ|₁ ≤ K_m`` is at least ``εγK_m^{−τ}``."""
    if spectra is None:
        raise ValueError("spectra unavailable")
    table = table or _table_for(m, eps, k0, spectra.lam, spectra.theta_vector)
    dmin, _, _ = min_divisor(table, spectra, eps)
    return dmin >= threshold(m, gamma, eps, tau, k0)


def cantor_membership(xi, steps: int, gamma: float, eps: float, tau: float = TAU,
                      k0: int = K0, spectra: Spectra | None = None, tables=None) -> list[bool]:
    """Membership of ``ξ`` in ``𝒪_1 ⊇ … ⊇ 𝒪_steps``.

    ``𝒪_{m+1} = 𝒪_m ∩ {excision_test(m)}``.  A single test at step ``m+1``
    does not imply the one at ``m`` (its threshold is smaller), so nesting
    comes from the recursion.
    """
    out, inside = [], True
    for m in range(steps):
        table = tables[m] if tables is not None else None
        inside = inside and excision_test(xi, m, gamma, eps, tau, k0, spectra, table)
        out.append(inside)
    return out


# ---------------------------------------------------------------------------
# Measure estimate

def _union_length(intervals: np.ndarray) -> float:
    if len(intervals) == 0:
        return 0.0
    iv = intervals[np.argsort(intervals[:, 0])]
    total, (lo, hi) = 0.0, iv[0]
    for a, b in iv[1:]:
        if a > hi:
            total += hi - lo
            lo, hi = a, b
        else:
            hi = max(hi, b)
    return total + hi - lo


def _subtable(table: IndexTable, keep: np.ndarray) -> IndexTable:
    return IndexTable(table.ellK[keep], table.integer[keep], table.coeff[keep],
                      table.l0_bound[keep], table.trivial_class[keep], table.ell_bound)


def _cell_filter(table: IndexTable, corner_vals: np.ndarray, eps: float,
                 delta: float) -> IndexTable:
    """Rows that can vanish somewhere in a grid cell.

    Within a cell the interpolated divisor is bounded by its corner values,
    so a row survives only if its ``ℓ0`` root range over the corners
    contains an admissible integer.
    """
    R = table.integer[:, None] + eps * (table.ellK @ corner_vals[:, 1:4].T
                                         + table.coeff @ corner_vals[:, 4:9].T)
    a = eps * corner_vals[:, 0]
    roots = -R / a
    margin = delta / np.min(np.abs(a))
    lo = np.maximum(np.ceil(roots.min(axis=1) - margin), -table.l0_bound)
    hi = np.minimum(np.floor(roots.max(axis=1) + margin), table.l0_bound)
    return _subtable(table, hi >= lo)


def _line_candidates(table: IndexTable, E: np.ndarray, vals: np.ndarray, eps: float,
                     delta: float):
    """Divisors that may drop below ``delta`` somewhere on a line in ``E``.

    ``vals`` holds the spectra rows at the nodes ``E``; along the line every
    divisor is piecewise linear between consecutive nodes.  Returns the
    segment index and the divisor values at both segment ends.
    """
    R = table.integer[:, None] + eps * (table.ellK @ vals[:, 1:4].T
                                         + table.coeff @ vals[:, 4:9].T)
    a = eps * vals[:, 0]
    segs, d0s, d1s = [], [], []
    for seg in range(len(E) - 1):
        R0, R1 = R[:, seg], R[:, seg + 1]
        a0, a1 = a[seg], a[seg + 1]
        r0, r1 = -R0 / a0, -R1 / a1
        margin = delta / min(abs(a0), abs(a1))
        lo = np.maximum(np.ceil(np.minimum(r0, r1) - margin), -table.l0_bound)
        hi = np.minimum(np.floor(np.maximum(r0, r1) + margin), table.l0_bound)
        cnt = np.maximum(hi - lo + 1, 0).astype(int)
        if not cnt.any():
            continue
        rows = np.repeat(np.arange(len(cnt)), cnt)
        offs = np.arange(cnt.sum()) - np.repeat(np.cumsum(cnt) - cnt, cnt)
        l0 = lo[rows] + offs
        keep = ~(table.trivial_class[rows] & (l0 == 0))
        rows, l0 = rows[keep], l0[keep]
        segs.append(np.full(len(rows), seg))
        d0s.append(R0[rows] + a0 * l0)
        d1s.append(R1[rows] + a1 * l0)
    if not segs:
        return np.empty(0, int), np.empty(0), np.empty(0)
    return np.concatenate(segs), np.concatenate(d0s), np.concatenate(d1s)


def _intervals(E: np.ndarray, cands, delta: float) -> np.ndarray:
    """Sub-intervals of the line where a candidate divisor is below ``delta``."""
    seg, D0, D1 = cands
    slope = D1 - D0
    inside0 = np.abs(D0) < delta
    with np.errstate(divide="ignore", invalid="ignore"):
        t_a = (-delta - D0) / slope
        t_b = (delta - D0) / slope
    flat = slope == 0
    t_lo = np.where(flat, np.where(inside0, 0.0, 1.0), np.minimum(t_a, t_b))
    t_hi = np.where(flat, np.where(inside0, 1.0, 0.0), np.maximum(t_a, t_b))
    t_lo, t_hi = np.clip(t_lo, 0, 1), np.clip(t_hi, 0, 1)
    hit = t_hi > t_lo
    w = E[seg[hit] + 1] - E[seg[hit]]
    return np.stack([E[seg[hit]] + w * t_lo[hit], E[seg[hit]] + w * t_hi[hit]], axis=1)


@dataclass
class MeasureResult:
    gamma: float
    excised_fraction: float
    per_step: list
    method: str
    samples: int


def _cell_of(x: float, axis: np.ndarray) -> int:
    return int(min(max(np.searchsorted(axis, x, side="right") - 1, 0), len(axis) - 2))


def measure_sweep(gammas, eps: float, tau: float = TAU, k0: int = K0, steps: int = 3,
                  samples: int = 10_000, *, grid: SpectraGrid, seed: int = 0,
                  method: str = "lines") -> list[MeasureResult]:
    """``measure_monte_carlo`` for several ``γ`` on the same samples."""
    if method not in ("lines", "points"):
        raise ValueError("method must be 'lines' or 'points'")
    gammas = [float(g) for g in gammas]
    rng = np.random.default_rng(seed)
    lo = np.array([d[0] for d in grid.domain])
    hi = np.array([d[1] for d in grid.domain])
    theta_all = np.concatenate([grid.theta.ravel(), grid.f0.ravel()])
    tables = [_table_for(m, eps, k0, grid.lam, theta_all) for m in range(steps)]
    deltas = np.array([[threshold(m, g, eps, tau, k0) for m in range(steps)] for g in gammas])
    cumulative = np.zeros((len(gammas), steps))
    if method == "points":
        xs = lo + (hi - lo) * rng.random((samples, 4))
        for v in grid.values(xs):
            spectra_xi = Spectra(v[:4], dict(zip(BLOCK_MODES, v[4:8])), v[8])
            dmin = [min_divisor(t, spectra_xi, eps)[0] for t in tables]
            for gi in range(len(gammas)):
                bad = [m for m in range(steps) if dmin[m] < deltas[gi, m]]
                if bad:
                    cumulative[gi, bad[0]:] += 1
    else:
        E = grid.axes[0]
        length = E[-1] - E[0]
        ks = lo[1:] + (hi[1:] - lo[1:]) * rng.random((samples, 3))
        vals_all = np.concatenate([grid.lam, grid.theta, grid.f0[..., None]], axis=-1)
        cell_tables: dict = {}
        for kk in ks:
            cell = tuple(_cell_of(kk[i], grid.axes[i + 1]) for i in range(3))
            if cell not in cell_tables:
                sl = (slice(None),) + tuple(slice(c, c + 2) for c in cell)
                corners = vals_all[sl].reshape(-1, 9)
                cell_tables[cell] = [_cell_filter(t, corners, eps, deltas[:, m].max())
                                     for m, t in enumerate(tables)]
            vals = grid.values(np.column_stack([E, np.tile(kk, (len(E), 1))]))
            cands = [_line_candidates(t, E, vals, eps, deltas[:, m].max())
                     for m, t in enumerate(cell_tables[cell])]
            for gi in range(len(gammas)):
                acc = []
                for m in range(steps):
                    acc.append(_intervals(E, cands[m], deltas[gi, m]))
                    cumulative[gi, m] += _union_length(np.concatenate(acc)) / length
    cumulative /= samples
    out = []
    for gi, g in enumerate(gammas):
        per_step = [float(x) for x in np.diff(np.concatenate([[0.0], cumulative[gi]]))]
        out.append(MeasureResult(g, float(cumulative[gi, -1]), per_step, method, samples))
    return out


def measure_monte_carlo(gamma: float, eps: float, tau: float = TAU, k0: int = K0,
                        steps: int = 3, samples: int = 10_000, *, grid: SpectraGrid,
                        seed: int = 0, method: str = "lines") -> MeasureResult:
    """Fraction of the domain removed by the excisions ``m = 0..steps−1``.

    ``method="points"`` samples ξ uniformly and applies the excision test at
    each point.  ``method="lines"`` samples ``(K1, K2, K3)`` uniformly and
    integrates the excised length along the whole ``E`` range exactly under
    the interpolated spectra; it estimates the same quantity with far
    smaller variance.
    """
    return measure_sweep([gamma], eps, tau, k0, steps, samples, grid=grid, seed=seed,
                         method=method)[0]


# ---------------------------------------------------------------------------
# Exact verification at ξ⋆

@dataclass(frozen=True)
class StarData:
    """Exact frequencies at ``ξ⋆ = (0, 4, 0, 2)``; ``λ0 = −√lam0_sq``."""

    lam0_sq: int
    lamK: tuple
    f0: int
    theta: dict

    def theta_of(self, j: int) -> int:
        return self.theta[j] if j in BLOCK_MODES else self.f0


def _exact_int(expr) -> int:
    val = sp.nsimplify(sp.simplify(expr))
    if not val.is_Integer:
        raise ValueError(f"expected an integer, got {val}")
    return int(val)


def star_data() -> StarData:
    """Frequencies at ``ξ⋆`` from the closed forms, in exact arithmetic."""
    P, K1, K2, K3 = pend._P, pend._K1, pend._K2, pend._K3
    sub = {P: 1, K1: 4, K2: 0, K3: 2}
    E = pend._EXPR
    h_at_0 = E["a"] + E["b"]
    lamK = tuple(_exact_int(sp.diff(h_at_0, K).subs(sub)) for K in (K1, K2, K3))
    if _exact_int(sp.diff(h_at_0, P).subs(sub)) != 0:
        raise ValueError("p = 1 is not a critical point at K⋆")
    # small oscillations of a + b cos q: frequency² = −∂²_p(a+b) · b
    lam0_sq = _exact_int(-sp.diff(h_at_0, P, 2).subs(sub) * E["b"].subs(sub))
    f0 = _exact_int(E["f"].subs(sub))
    theta = {}
    for j, (nj, lj) in pend.BLOCK_INDICES.items():
        U = E[f"U{j}"].subs(sub)
        V = (lj * (sp.diff(h_at_0, K1) - sp.diff(h_at_0, K2)) + nj * sp.diff(h_at_0, P)).subs(sub)
        mid = f0 + sp.Rational(1, 2) * V
        gap = sp.sqrt(U**2 + V**2 / 4)
        theta[j], theta[-j] = _exact_int(mid + gap), _exact_int(mid - gap)
    return StarData(lam0_sq, lamK, f0, theta)


@dataclass(frozen=True)
class CaseVerdict:
    case: str
    description: str
    parameter: int | None
    solution: tuple | None
    integral: bool
    obstruction: str

    def as_dict(self) -> dict:
        sol = None if self.solution is None else [str(x) for x in self.solution]
        return {"case": self.case, "description": self.description, "parameter": self.parameter,
                "solution": sol, "integral": self.integral, "obstruction": self.obstruction}


@dataclass(frozen=True)
class StarReport:
    star: StarData
    verdicts: tuple
    searched: int
    hits: tuple
    twist_covered: tuple

    @property
    def ok(self) -> bool:
        return not self.hits and not any(v.integral for v in self.verdicts)

    def as_dict(self) -> dict:
        return {"ok": self.ok,
                "star": {"lambda0_squared": self.star.lam0_sq, "lambdaK": list(self.star.lamK),
                         "f0": self.star.f0,
                         "Theta": {str(j): self.star.theta[j] for j in BLOCK_MODES}},
                "cases": [v.as_dict() for v in self.verdicts],
                "brute_force": {"searched": self.searched, "hits": [str(h) for h in self.hits],
                                "twist_covered": len(self.twist_covered)}}


def _solve2(a11, a12, b1, a21, a22, b2):
    det = Fraction(a11 * a22 - a12 * a21)
    if det == 0:
        return None
    return (Fraction(b1 * a22 - a12 * b2) / det, Fraction(a11 * b2 - b1 * a21) / det)


def _mod3(cx: int, cy: int, rhs: int, total: int) -> str:
    """Mod-3 obstruction for ``cx·x + cy·y = rhs``, ``x + y = total``."""
    if cx % 3 or cy % 3 or rhs % 3:
        return ""
    ax, ay, r = (cx // 3) % 3, (cy // 3) % 3, (rhs // 3) % 3
    if ax == ay and ax and (r * pow(ax, -1, 3)) % 3 != total % 3:
        return f"x+y ≡ {(r * pow(ax, -1, 3)) % 3} (mod 3) but x+y = {total}"
    return ""


def _linear_case(case, description, par, cx, cy, rhs, total) -> CaseVerdict:
    sol = _solve2(cx, cy, rhs, 1, 1, total)
    integral = sol is not None and all(x.denominator == 1 for x in sol)
    return CaseVerdict(case, description, par, sol, integral, _mod3(cx, cy, rhs, total))


def _brute_force(star: StarData, ell_bound: int, mode_bound: int):
    """Exact integer search for indices whose divisor vanishes identically in ε.

    Zeros with two outer modes, ``σ + σ′ = 0`` and ``ℓ ≠ 0`` reduce to
    ``λ(ξ⋆)·ℓ = 0``; they are returned separately because there the divisor
    is ``ελ(ξ)·ℓ``, which is not identically zero once ``ξ ↦ λ`` has an
    invertible Jacobian (the twist condition).
    """
    lamK = np.array(star.lamK, dtype=np.int64)
    normal = [j for j in range(-mode_bound, mode_bound + 1) if is_normal(j)]
    slots = [(0, None)] + [(s, j) for s in (1, -1) for j in normal]
    s = np.arange(-ell_bound, ell_bound + 1, dtype=np.int64)
    searched, hits, covered = 0, [], []
    for (s1, h), (s2, k) in itertools.product(slots, repeat=2):
        mass = s1 + s2
        mom = sum(x * r_index(j) for x, j in ((s1, h), (s2, k)) if x)
        Q = sum(x * j * j for x, j in ((s1, h), (s2, k)) if x)
        th = sum(x * star.theta_of(j) for x, j in ((s1, h), (s2, k)) if x)
        ell = np.stack([s, -2 * mass - mom - 3 * s, 2 * s + mass + mom], axis=1)
        inside = np.abs(ell).sum(axis=1) <= ell_bound
        searched += int(inside.sum())
        d0 = ell @ LINEAR_OMEGA[1:] + Q
        d1 = ell @ lamK + th
        # ℓ0 = 0: λ0 is irrational and every other term is an integer
        zero = inside & (d0 == 0) & (d1 == 0)
        for row in ell[zero]:
            if not any(row) and mass == 0 and h == k:
                continue
            idx = MelnikovIndex((0, *row), s1, s2, h, k)
            outer = all(j not in BLOCK_MODES for j in (h, k))
            (covered if mass == 0 and s1 and outer else hits).append(idx)
    return searched, tuple(hits), tuple(covered)


def verify_star_nonresonance(ell_bound: int = 24, mode_bound: int = 24) -> StarReport:
    """Replay every linear system of the non-resonance argument at ``ξ⋆`` exactly.

    The brute-force part searches ``|ℓ|₁ ≤ ell_bound``, ``|h|, |k| ≤ mode_bound``
    in integer arithmetic for divisors vanishing identically in ``ε``.
    """
    st = star_data()
    v: list[CaseVerdict] = []
    if math.isqrt(st.lam0_sq) ** 2 == st.lam0_sq:
        raise RuntimeError("λ0 is rational at ξ⋆; the ℓ0 = 0 reduction fails")
    cx, cy = st.lamK[0], st.lamK[2]
    if st.lamK[0] != st.lamK[1]:
        raise RuntimeError("λ1 ≠ λ2 at ξ⋆; the two-variable reduction fails")
    f0 = st.f0
    # (a) both modes outside the blocks, σ + σ′ = 2
    v.append(_linear_case("a", "two outer modes, sigma+sigma'=2", None, cx, cy, -2 * f0, -2))
    # (b) both modes in the blocks with |h| = |k|, σ + σ′ = 2
    rhos = sorted({st.theta[h] + st.theta[k] - 2 * f0
                   for h in BLOCK_MODES for k in BLOCK_MODES if abs(h) == abs(k)})
    for rho in rhos:
        v.append(_linear_case("b", "block modes |h|=|k|, sigma+sigma'=2", rho, cx, cy,
                              -2 * f0 - rho, -2))
    # (b′) both modes in the blocks, σ + σ′ = 0: 3ℓ3 = ∓(r²(h) − r²(k))
    for h, k in itertools.product(BLOCK_MODES, repeat=2):
        d = r_index(h) ** 2 - r_index(k) ** 2
        if d % 3:
            v.append(CaseVerdict("b", "block modes, sigma+sigma'=0", d, (Fraction(-d, 3),),
                                 False, f"3*l3 = {-d} has no integer solution"))
        elif st.theta[h] != st.theta[k]:
            v.append(CaseVerdict("b", "block modes |h|=|k|, sigma+sigma'=0", 0, (Fraction(0),),
                                 False, f"l = 0 forces Theta({h}) = Theta({k}), false"))
    # (c) |h| ≠ |k| in the blocks, σ + σ′ = 2: ℓ1+ℓ2+ℓ3 = −2, ℓ1+ℓ2+4ℓ3 = −25
    rhs = -(9 + 16) + 2
    v.append(CaseVerdict("c", "block modes |h|!=|k|, sigma+sigma'=2", rhs,
                         (Fraction(rhs, 3),), rhs % 3 == 0, f"3*l3 = {rhs}"))
    # (d) one block mode and one outer mode
    varrhos = sorted({st.theta[h] - f0 for h in BLOCK_MODES})
    for vr in varrhos:
        v.append(_linear_case("d", "block + outer mode, sigma+sigma'=2", vr, cx, cy,
                              -2 * f0 - vr, -2))
    for vr in varrhos:
        l3 = abs(Fraction(vr, cy - cx))
        if l3.denominator != 1:
            v.append(CaseVerdict("d", "block + outer mode, sigma+sigma'=0", vr, (l3,), False,
                                 f"72*l3 = {vr} has no integer solution"))
            continue
        # the branch survives: |h| = 3, and ℓ1+ℓ2+4ℓ3 = 3ℓ3 = −σ(9 − r²(k)) fixes r²(k)
        squares = sorted({9 + sg * 3 * int(l3) for sg in (1, -1)})
        hs = [h for h in BLOCK_MODES if st.theta[h] - f0 == vr]
        bad = [q for q in squares if q >= 25 and math.isqrt(q) ** 2 == q]
        v.append(CaseVerdict("d", f"72*l3 = {vr} branch, |h| = {abs(hs[0])}, l3 = {int(l3)}",
                             vr, (l3,), bool(bad),
                             f"r^2(k) in {squares}: not the square of an outer mode"))
    # (e) first Melnikov: one normal mode, 426x + 498y = 558 + ϱ, x + y = 1
    for vr in sorted(set(varrhos) | {0}):
        v.append(_linear_case("e", "single normal mode", vr, cx, cy, f0 + vr, 1))
    searched, hits, covered = _brute_force(st, ell_bound, mode_bound)
    unique = tuple(dict.fromkeys(v))
    return StarReport(st, unique, searched, hits, covered)
