"""One Birkhoff normal form step for the Galerkin-truncated quintic NLS.

The truncated Hamiltonian is ``H = H2 + ε H6`` with ``H2 = Σ j²|u_j|²`` and
``H6`` the sum of ``u_{j1}u_{j2}u_{j3}ū_{j4}ū_{j5}ū_{j6}`` over ordered,
momentum-conserving sextuples with ``|j_i| ≤ B``.  Grouped by multi-index the
coefficient of ``u^α ū^β`` is ``C(α)·C(β)`` with ``C`` the multinomial
``3!/Π α_k!``.  All polynomials here are ``PolyHamiltonian`` objects with no
angle/action variables (``dim = 0``).
"""
from __future__ import annotations

import itertools
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import NamedTuple

from .algebra import PolyHamiltonian, poisson_bracket, sparse
from .modes import Sextuple, is_resonant

EPS_MAX = 0.1
TANGENTIAL = (-2, -1, 1, 2)


def multinomial3(triple) -> int:
    """Number of orderings of a multiset of three indices."""
    out = 6
    for c in Counter(triple).values():
        out //= math.factorial(c)
    return out


def _mono(alpha, beta, c) -> PolyHamiltonian:
    return PolyHamiltonian({((), (), sparse(alpha), sparse(beta)): c}, dim=0)


def _x(j) -> PolyHamiltonian:
    """``|u_j|²``."""
    return _mono({j: 1}, {j: 1}, 1.0)


def momentum(alpha, beta) -> int:
    return sum(k * e for k, e in alpha) - sum(k * e for k, e in beta)


def energy_divisor(alpha, beta) -> int:
    """``Σ (α_k − β_k) k²``."""
    return sum(k * k * e for k, e in alpha) - sum(k * k * e for k, e in beta)


def mass(alpha, beta) -> int:
    return sum(e for _, e in alpha) - sum(e for _, e in beta)


@dataclass(frozen=True)
class TruncatedNlsHamiltonian:
    """``H2 + ε·H6`` on the modes ``|j| ≤ mode_cut``.

    ``H6`` is stored ε-free.
    """

    mode_cut: int
    eps: float
    H2: PolyHamiltonian = field(repr=False)
    H6: PolyHamiltonian = field(repr=False)

    @classmethod
    def build(cls, mode_cut: int = 8, eps: float = 1e-3) -> "TruncatedNlsHamiltonian":
        if mode_cut < 0:
            raise ValueError("mode_cut must be non-negative")
        modes = range(-mode_cut, mode_cut + 1)
        H2 = PolyHamiltonian({((), (), ((j, 1),), ((j, 1),)): j * j for j in modes if j}, dim=0)
        by_sum = defaultdict(list)
        for t in itertools.combinations_with_replacement(modes, 3):
            by_sum[sum(t)].append(t)
        terms = {}
        for triples in by_sum.values():
            for a in triples:
                ca = multinomial3(a)
                alpha = sparse(Counter(a))
                for b in triples:
                    terms[((), (), alpha, sparse(Counter(b)))] = float(ca * multinomial3(b))
        return cls(mode_cut, float(eps), H2, PolyHamiltonian._raw(terms, 0, ()))

    def full(self) -> PolyHamiltonian:
        return self.H2 + self.eps * self.H6


def sextuple_of(alpha, beta) -> Sextuple:
    a = [k for k, e in alpha for _ in range(e)]
    b = [k for k, e in beta for _ in range(e)]
    return Sextuple(a + b)


def resonant_part(H6: PolyHamiltonian) -> PolyHamiltonian:
    return H6.filter(lambda k: energy_divisor(k[2], k[3]) == 0)


def build_generating_function(H: TruncatedNlsHamiltonian) -> PolyHamiltonian:
    """``F`` with ``{H2, F} = ε·(non-resonant part of H6)``.

    Under the bracket convention of :mod:`nlsbeat.algebra`,
    ``{H2, u^α ū^β} = −i Ω u^α ū^β`` with the integer divisor
    ``Ω = Σ (α_k − β_k) k²``, so each non-resonant coefficient ``c`` becomes
    ``i ε c / Ω`` in ``F``.
    """
    out = {}
    for key, c in H.H6:
        om = energy_divisor(key[2], key[3])
        if om:
            out[key] = 1j * H.eps * c / om
    return PolyHamiltonian._raw(out, 0, ())


class BirkhoffResult(NamedTuple):
    HBirk: PolyHamiltonian
    remainder: PolyHamiltonian | None
    F: PolyHamiltonian
    resonant: PolyHamiltonian  # ε-free Π_res H6, integer coefficients


def normal_form_step(H: TruncatedNlsHamiltonian, *, remainder: bool | None = None,
                     max_degree: int = 10, eps_max: float = EPS_MAX) -> BirkhoffResult:
    """Apply the time-one flow of the generating function.

    ``HBirk = H2 + ε·Π_res H6``.  The ``ε²`` part of the transformed
    Hamiltonian is ``{F, ε(Π_res H6 + ½ Π_nonres H6)}``, homogeneous of
    degree 10 in ``u``; it is computed when ``remainder`` is true (default:
    only for ``mode_cut ≤ 4``, since its size grows like ``B^8``).
    """
    if not 0 < H.eps <= eps_max:
        raise ValueError(f"eps={H.eps} outside (0, {eps_max}]")
    F = build_generating_function(H)
    res = resonant_part(H.H6)
    HBirk = H.H2 + H.eps * res
    R = None
    if remainder is None:
        remainder = H.mode_cut <= 4
    if remainder:
        nonres = H.H6 - res
        R = poisson_bracket(F, H.eps * (res + 0.5 * nonres))
        over = [k for k, _ in R if len(k[2]) + len(k[3]) and
                sum(e for _, e in k[2] + k[3]) > max_degree]
        if over:
            raise OverflowError(f"{len(over)} remainder terms exceed degree cap {max_degree}")
    return BirkhoffResult(HBirk, R, F, res)


def u_degree(key) -> int:
    return sum(e for _, e in key[2]) + sum(e for _, e in key[3])


def extract_restricted(HBirk: PolyHamiltonian, S=TANGENTIAL, normal_degree: int = 0,
                       eps: float = 1.0, check: bool = True) -> PolyHamiltonian:
    """ε-free sextic terms of ``HBirk`` with exactly ``normal_degree`` factors off ``S``.

    With ``check`` the result is compared coefficient-wise with the closed
    forms (``normal_degree`` 0 or 2, ``S = {−2,−1,1,2}``); a mismatch raises.
    """
    S = set(S)

    def keep(k):
        if u_degree(k) != 6:
            return False
        outside = sum(e for m, e in k[2] + k[3] if m not in S)
        return outside == normal_degree

    out = HBirk.filter(keep) / eps
    if check and normal_degree in (0, 2):
        if S != set(TANGENTIAL):
            raise ValueError("closed forms exist only for S = {-2,-1,1,2}")
        modes = HBirk.modes()
        expected = closed_form(normal_degree, [m for m in modes if m not in S])
        diff = out - expected
        bad = diff.max_abs()
        if bad > 1e-9 * max(1.0, expected.max_abs()):
            raise AssertionError(f"H_6,{normal_degree} differs from the closed form by {bad}")
    return out


def closed_form_parts(normal_degree: int, normal_modes=()) -> dict[str, PolyHamiltonian]:
    """Closed-form ``ap``/``eff`` pieces of ``H_{6,0}`` and ``H_{6,2}``."""
    S = TANGENTIAL
    s1 = sum((_x(j) for j in S), PolyHamiltonian.zero(0))
    s2 = sum((_x(j) * _x(j) for j in S), PolyHamiltonian.zero(0))
    s3 = sum((_x(j) * _x(j) * _x(j) for j in S), PolyHamiltonian.zero(0))
    if normal_degree == 0:
        ap = 6 * s1 * s1 * s1 - 9 * s1 * s2 + 4 * s3
        eff = 9 * (_mono({1: 2, -2: 1}, {-1: 2, 2: 1}, 1) + _mono({-1: 2, 2: 1}, {1: 2, -2: 1}, 1))
        return {"ap": ap, "eff": eff}
    if normal_degree == 2:
        zz = sum((_x(j) for j in normal_modes), PolyHamiltonian.zero(0))
        ap = (18 * s1 * s1 - 9 * s2) * zz
        eff = PolyHamiltonian.zero(0)
        if 3 in normal_modes and -3 in normal_modes:
            m = _mono({-1: 1, -2: 1, 3: 1}, {1: 1, 2: 1, -3: 1}, 1)
            eff = eff + 36 * (m + m.conj())
        if 4 in normal_modes and -4 in normal_modes:
            m = _mono({-2: 2, 4: 1}, {2: 2, -4: 1}, 1)
            eff = eff + 9 * (m + m.conj())
        return {"ap": ap, "eff": eff}
    if normal_degree == 1:
        return {"ap": PolyHamiltonian.zero(0), "eff": PolyHamiltonian.zero(0)}
    raise ValueError("closed forms known for normal degree 0, 1, 2")


def closed_form(normal_degree: int, normal_modes=()) -> PolyHamiltonian:
    parts = closed_form_parts(normal_degree, normal_modes)
    return parts["ap"] + parts["eff"]


def restricted_conserved() -> list[PolyHamiltonian]:
    """``|u1|²+2|u2|²``, ``|u−1|²−2|u2|²``, ``|u−2|²+|u2|²``."""
    return [_x(1) + 2 * _x(2), _x(-1) - 2 * _x(2), _x(-2) + _x(2)]


def mass_poly(mode_cut: int) -> PolyHamiltonian:
    return sum((_x(j) for j in range(-mode_cut, mode_cut + 1)), PolyHamiltonian.zero(0))


def momentum_poly(mode_cut: int) -> PolyHamiltonian:
    return sum((j * _x(j) for j in range(-mode_cut, mode_cut + 1) if j),
               PolyHamiltonian.zero(0))


def verification_report(mode_cut: int = 8, eps: float = 1e-3) -> dict:
    """Coefficient checks against the closed forms and the commutation identities."""
    H = TruncatedNlsHamiltonian.build(mode_cut, eps)
    res = normal_form_step(H, remainder=False)
    HB = res.HBirk
    # ε-free resonant sextic part: integer coefficients, so every check is exact
    H6r = res.resonant
    checks = []

    def add(name, expected, got, tol=0.0):
        checks.append({"check": name, "expected": expected, "measured": got,
                       "pass": bool(abs(got - expected) <= tol)})

    h60 = extract_restricted(H6r, normal_degree=0, check=False)
    h61 = extract_restricted(H6r, normal_degree=1, check=False)
    h62 = extract_restricted(H6r, normal_degree=2, check=False)
    # individual closed-form coefficients
    add("H60ap |u1|^6 (6-9+4)", 1.0, h60.coeff(alpha={1: 3}, beta={1: 3}).real)
    add("H60ap |u1|^4|u2|^2 (18-9)", 9.0, h60.coeff(alpha={1: 2, 2: 1}, beta={1: 2, 2: 1}).real)
    add("H60ap |u1 u2 u-1|^2 (6*6)", 36.0,
        h60.coeff(alpha={1: 1, 2: 1, -1: 1}, beta={1: 1, 2: 1, -1: 1}).real)
    add("H60eff u1^2 u-2 ub-1^2 ub2", 9.0, h60.coeff(alpha={1: 2, -2: 1}, beta={-1: 2, 2: 1}).real)
    add("H61 vanishes", 0.0, h61.max_abs())
    if mode_cut >= 5:
        add("H62ap |u1|^4|z5|^2 (18-9)", 9.0, h62.coeff(alpha={1: 2, 5: 1}, beta={1: 2, 5: 1}).real)
        add("H62ap |u1 u2 z5|^2 (2*18)", 36.0,
            h62.coeff(alpha={1: 1, 2: 1, 5: 1}, beta={1: 1, 2: 1, 5: 1}).real)
    if mode_cut >= 4:
        add("H62eff u-1 u-2 ub1 ub2 z3 zb-3", 36.0,
            h62.coeff(alpha={-1: 1, -2: 1, 3: 1}, beta={1: 1, 2: 1, -3: 1}).real)
        add("H62eff u-2^2 ub2^2 z4 zb-4", 9.0, h62.coeff(alpha={-2: 2, 4: 1}, beta={2: 2, -4: 1}).real)
        add("H62eff ub-2^2 u2^2 zb4 z-4", 9.0, h62.coeff(alpha={2: 2, -4: 1}, beta={-2: 2, 4: 1}).real)
    normal = [m for m in range(-mode_cut, mode_cut + 1) if m not in TANGENTIAL]
    add("H60 equals closed form", 0.0, (h60 - closed_form(0)).max_abs())
    add("H62 equals closed form", 0.0, (h62 - closed_form(2, normal)).max_abs())
    # HBirk = H2 + ε·H6r and H2 commutes with L, M, H2 exactly
    add("{HBirk,H2}=0", 0.0, poisson_bracket(H6r, H.H2).max_abs())
    add("{HBirk,L}=0", 0.0, poisson_bracket(H6r, mass_poly(mode_cut)).max_abs())
    add("{HBirk,M}=0", 0.0, poisson_bracket(H6r, momentum_poly(mode_cut)).max_abs())
    bad = [k for k, _ in HB if u_degree(k) == 6 and not is_resonant(sextuple_of(k[2], k[3]))]
    add("sextic terms resonant", 0.0, float(len(bad)))
    return {"mode_cut": mode_cut, "eps": eps, "terms": len(HB), "checks": checks,
            "all_pass": all(c["pass"] for c in checks)}
