"""Sparse polynomial Hamiltonians in angle, action and complex normal variables.

A monomial is ``c · e^{iℓ·φ} y^i z^α z̄^β`` with ``ℓ ∈ Z^n``, ``i ∈ N^n`` and
finitely supported exponent maps ``α, β`` over integer mode labels.  The
number ``n`` of angle/action pairs is a per-polynomial attribute, so the
same class serves for pure complex polynomials (``n = 0``) in the Birkhoff
step and for the mixed ``(φ, y, z)`` chart used by the KAM iteration.

Bracket convention::

    {f, g} = Σ_h (∂_{y_h} f ∂_{φ_h} g − ∂_{φ_h} f ∂_{y_h} g)
           + i Σ_k (∂_{z_k} f ∂_{z̄_k} g − ∂_{z̄_k} f ∂_{z_k} g)

and the flow of ``H`` is ``ḟ = {H, f}``, so ``ż = −i ∂_{z̄} H``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Mapping

Sparse = tuple  # tuple of (mode, exponent) pairs sorted by mode
Key = tuple  # (ell, i, alpha, beta)


def sparse(d: Mapping[int, int] | Iterable[tuple[int, int]]) -> Sparse:
    """Normalize an exponent map to a sorted tuple without zero entries."""
    items = d.items() if isinstance(d, Mapping) else d
    acc: dict[int, int] = {}
    for k, e in items:
        acc[int(k)] = acc.get(int(k), 0) + int(e)
    if any(e < 0 for e in acc.values()):
        raise ValueError("negative exponent")
    return tuple(sorted((k, e) for k, e in acc.items() if e))


def _merge(a: Sparse, b: Sparse) -> Sparse:
    if not a:
        return b
    if not b:
        return a
    d = dict(a)
    for k, e in b:
        d[k] = d.get(k, 0) + e
    return tuple(sorted(d.items()))


def _lower(a: Sparse, k: int) -> Sparse:
    out = []
    for m, e in a:
        if m == k:
            if e > 1:
                out.append((m, e - 1))
        else:
            out.append((m, e))
    return tuple(out)


def _add(u: tuple, v: tuple) -> tuple:
    return tuple(x + y for x, y in zip(u, v))


def _total(a: Sparse) -> int:
    return sum(e for _, e in a)


def key_degree(key: Key) -> int:
    """Grading ``2|i| + |α| + |β| − 2``."""
    _, i, a, b = key
    return 2 * sum(i) + _total(a) + _total(b) - 2


def key_fourier(key: Key) -> int:
    return sum(abs(x) for x in key[0])


class PolyHamiltonian:
    """Immutable sparse polynomial with complex coefficients.

    Parameters
    ----------
    terms : mapping from ``(ell, i, alpha, beta)`` to a complex coefficient.
        ``alpha`` and ``beta`` may be dicts or pair sequences; they are
        normalized.  Zero coefficients are dropped.
    dim : number of angle/action pairs.
    tangential : mode labels that must not appear in ``alpha``/``beta``.
    """

    __slots__ = ("terms", "dim", "tangential")

    def __init__(self, terms=None, dim: int = 4, tangential: Iterable[int] = ()):
        self.dim = int(dim)
        self.tangential = tuple(sorted(tangential))
        clean: dict[Key, complex] = {}
        if terms:
            items = terms.items() if isinstance(terms, Mapping) else terms
            forbid = set(self.tangential)
            for key, c in items:
                ell, i, a, b = key
                ell = tuple(int(x) for x in ell)
                i = tuple(int(x) for x in i)
                if len(ell) != self.dim or len(i) != self.dim:
                    raise ValueError(f"key {key} does not match dim={self.dim}")
                if any(x < 0 for x in i):
                    raise ValueError("negative action exponent")
                a, b = sparse(a), sparse(b)
                if forbid and any(k in forbid for k, _ in a + b):
                    raise ValueError(f"normal exponents touch tangential modes: {key}")
                k = (ell, i, a, b)
                clean[k] = clean.get(k, 0j) + complex(c)
            clean = {k: c for k, c in clean.items() if c != 0}
        self.terms = clean

    @classmethod
    def _raw(cls, terms: dict, dim: int, tangential: tuple) -> "PolyHamiltonian":
        obj = cls.__new__(cls)
        obj.terms = {k: c for k, c in terms.items() if c != 0}
        obj.dim = dim
        obj.tangential = tangential
        return obj

    def _like(self, terms: dict) -> "PolyHamiltonian":
        return PolyHamiltonian._raw(terms, self.dim, self.tangential)

    # ---- constructors -------------------------------------------------
    @classmethod
    def zero(cls, dim: int = 4, tangential: Iterable[int] = ()) -> "PolyHamiltonian":
        return cls({}, dim, tangential)

    @classmethod
    def monomial(cls, coeff=1.0, ell=None, i=None, alpha=(), beta=(), dim: int = 4,
                 tangential: Iterable[int] = ()) -> "PolyHamiltonian":
        ell = tuple(ell) if ell is not None else (0,) * dim
        i = tuple(i) if i is not None else (0,) * dim
        return cls({(ell, i, sparse(alpha), sparse(beta)): coeff}, dim, tangential)

    # ---- container protocol ------------------------------------------
    def __len__(self) -> int:
        return len(self.terms)

    def __iter__(self) -> Iterator[tuple[Key, complex]]:
        return iter(self.terms.items())

    def __bool__(self) -> bool:
        return bool(self.terms)

    def coeff(self, ell=None, i=None, alpha=(), beta=()) -> complex:
        ell = tuple(ell) if ell is not None else (0,) * self.dim
        i = tuple(i) if i is not None else (0,) * self.dim
        return self.terms.get((ell, i, sparse(alpha), sparse(beta)), 0j)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PolyHamiltonian):
            return NotImplemented
        return self.dim == other.dim and self.terms == other.terms

    def __repr__(self) -> str:
        return f"PolyHamiltonian({len(self.terms)} terms, dim={self.dim})"

    # ---- arithmetic ---------------------------------------------------
    def _check(self, other: "PolyHamiltonian"):
        if self.dim != other.dim:
            raise ValueError("dimension mismatch")

    def __add__(self, other: "PolyHamiltonian") -> "PolyHamiltonian":
        self._check(other)
        out = dict(self.terms)
        for k, c in other.terms.items():
            out[k] = out.get(k, 0j) + c
        tang = self.tangential if self.tangential == other.tangential else ()
        return PolyHamiltonian._raw(out, self.dim, tang)

    def __neg__(self) -> "PolyHamiltonian":
        return self._like({k: -c for k, c in self.terms.items()})

    def __sub__(self, other: "PolyHamiltonian") -> "PolyHamiltonian":
        return self + (-other)

    def __mul__(self, s) -> "PolyHamiltonian":
        if isinstance(s, PolyHamiltonian):
            return self.product(s)
        s = complex(s)
        return self._like({k: c * s for k, c in self.terms.items()})

    __rmul__ = __mul__

    def __truediv__(self, s) -> "PolyHamiltonian":
        return self * (1.0 / complex(s))

    def product(self, other: "PolyHamiltonian") -> "PolyHamiltonian":
        self._check(other)
        out: dict[Key, complex] = {}
        for (l1, i1, a1, b1), c1 in self.terms.items():
            for (l2, i2, a2, b2), c2 in other.terms.items():
                k = (_add(l1, l2), _add(i1, i2), _merge(a1, a2), _merge(b1, b2))
                out[k] = out.get(k, 0j) + c1 * c2
        return self._like(out)

    def filter(self, pred: Callable[[Key], bool]) -> "PolyHamiltonian":
        return self._like({k: c for k, c in self.terms.items() if pred(k)})

    def conj(self) -> "PolyHamiltonian":
        """Complex conjugate as a function: ``(ℓ,i,α,β,c) → (−ℓ,i,β,α,c̄)``."""
        return self._like({(tuple(-x for x in l), i, b, a): c.conjugate()
                           for (l, i, a, b), c in self.terms.items()})

    def is_real(self, tol: float = 0.0) -> bool:
        """Check the reality condition coefficient by coefficient."""
        for (l, i, a, b), c in self.terms.items():
            partner = self.terms.get((tuple(-x for x in l), i, b, a), 0j)
            if abs(partner - c.conjugate()) > tol:
                return False
        return True

    def degrees(self) -> set[int]:
        return {key_degree(k) for k in self.terms}

    def modes(self) -> set[int]:
        out = set()
        for _, _, a, b in self.terms:
            out.update(m for m, _ in a)
            out.update(m for m, _ in b)
        return out

    def max_abs(self) -> float:
        return max((abs(c) for c in self.terms.values()), default=0.0)

    def evaluate(self, phi=None, y=None, z: Mapping[int, complex] | None = None,
                 zbar: Mapping[int, complex] | None = None) -> complex:
        """Evaluate at a point; ``zbar`` defaults to the conjugate of ``z``."""
        import cmath
        phi = phi if phi is not None else (0.0,) * self.dim
        y = y if y is not None else (0.0,) * self.dim
        z = z or {}
        if zbar is None:
            zbar = {k: complex(v).conjugate() for k, v in z.items()}
        total = 0j
        for (l, i, a, b), c in self.terms.items():
            v = c * cmath.exp(1j * sum(x * t for x, t in zip(l, phi)))
            for e, yy in zip(i, y):
                v *= yy ** e
            for k, e in a:
                v *= z.get(k, 0j) ** e
            for k, e in b:
                v *= zbar.get(k, 0j) ** e
            total += v
        return total

    # ---- text format --------------------------------------------------
    def to_text(self) -> str:
        """One term per line: ``ell i alpha beta re im``."""
        lines = [f"# dim={self.dim} tangential={','.join(map(str, self.tangential)) or '.'}"]
        for (l, i, a, b), c in sorted(self.terms.items()):
            lines.append(" ".join([
                _fmt_vec(l), _fmt_vec(i), _fmt_sparse(a), _fmt_sparse(b),
                repr(c.real), repr(c.imag),
            ]))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "PolyHamiltonian":
        dim, tang = 4, ()
        terms = {}
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for tok in line[1:].split():
                    name, _, val = tok.partition("=")
                    if name == "dim":
                        dim = int(val)
                    elif name == "tangential" and val != ".":
                        tang = tuple(int(x) for x in val.split(","))
                continue
            l, i, a, b, re, im = line.split()
            key = (_parse_vec(l), _parse_vec(i), _parse_sparse(a), _parse_sparse(b))
            terms[key] = complex(float(re), float(im))
        return cls._raw(terms, dim, tang)


def _fmt_vec(v) -> str:
    return ",".join(str(x) for x in v) if v else "."


def _parse_vec(s: str) -> tuple:
    return () if s == "." else tuple(int(x) for x in s.split(","))


def _fmt_sparse(a) -> str:
    return ",".join(f"{k}:{e}" for k, e in a) if a else "."


def _parse_sparse(s: str) -> Sparse:
    if s == ".":
        return ()
    return tuple((int(k), int(e)) for k, e in (t.split(":") for t in s.split(",")))


# ---------------------------------------------------------------------------
# Poisson bracket


def poisson_bracket(f: PolyHamiltonian, g: PolyHamiltonian) -> PolyHamiltonian:
    """``{f, g}`` under the module convention; exact up to float rounding."""
    f._check(g)
    dim = f.dim
    out: dict[Key, complex] = {}
    get = out.get
    hs = range(dim)
    for (l1, i1, a1, b1), c1 in f.terms.items():
        da1, db1 = dict(a1), dict(b1)
        for (l2, i2, a2, b2), c2 in g.terms.items():
            cc = c1 * c2
            ell = None
            for h in hs:
                w = i1[h] * l2[h] - l1[h] * i2[h]
                if w:
                    if ell is None:
                        ell = _add(l1, l2)
                        isum = _add(i1, i2)
                        asum = _merge(a1, a2)
                        bsum = _merge(b1, b2)
                    ii = isum[:h] + (isum[h] - 1,) + isum[h + 1:]
                    k = (ell, ii, asum, bsum)
                    out[k] = get(k, 0j) + 1j * cc * w
            if not (a1 or b1) or not (a2 or b2):
                continue
            da2, db2 = dict(a2), dict(b2)
            for kk in set(da1) | set(db1):
                w = da1.get(kk, 0) * db2.get(kk, 0) - db1.get(kk, 0) * da2.get(kk, 0)
                if w:
                    if ell is None:
                        ell = _add(l1, l2)
                        isum = _add(i1, i2)
                        asum = _merge(a1, a2)
                        bsum = _merge(b1, b2)
                    k = (ell, isum, _lower(asum, kk), _lower(bsum, kk))
                    out[k] = get(k, 0j) + 1j * cc * w
    tang = f.tangential if f.tangential == g.tangential else ()
    return PolyHamiltonian._raw(out, dim, tang)


# ---------------------------------------------------------------------------
# Projections


def _is_ker(key: Key) -> bool:
    l, i, a, b = key
    if any(l):
        return False
    ni = sum(i)
    if ni == 1 and not a and not b:
        return True
    return ni == 0 and len(a) == 1 and a == b and a[0][1] == 1


def _is_const(key: Key) -> bool:
    l, i, a, b = key
    return not any(l) and not any(i) and not a and not b


def project(f: PolyHamiltonian, which: str, value: int | None = None) -> PolyHamiltonian:
    """Coefficient filter.

    ``which`` is one of ``degree``, ``degree<=``, ``degree>``, ``fourier<=``,
    ``fourier>``, ``ker`` or ``rg``.  ``ker`` keeps the zero-Fourier terms
    ``q·y + Σ Q_j |z_j|²``; ``rg`` keeps the degree ≤ 0 terms outside the
    kernel, leaving out constants (they carry no vector field and no divisor
    can remove them).
    """
    if which == "degree":
        return f.filter(lambda k: key_degree(k) == value)
    if which == "degree<=":
        return f.filter(lambda k: key_degree(k) <= value)
    if which == "degree>":
        return f.filter(lambda k: key_degree(k) > value)
    if which == "fourier<=":
        return f.filter(lambda k: key_fourier(k) <= value)
    if which == "fourier>":
        return f.filter(lambda k: key_fourier(k) > value)
    if which == "ker":
        return f.filter(_is_ker)
    if which == "rg":
        return f.filter(lambda k: key_degree(k) <= 0 and not _is_ker(k) and not _is_const(k))
    raise ValueError(f"unknown projection {which!r}")


# ---------------------------------------------------------------------------
# Lie series


def lie_transform(F: PolyHamiltonian, H: PolyHamiltonian, order: int, *,
                  max_degree: int | None = None, max_fourier: int | None = None,
                  max_modes: int | None = None, drop: float = 0.0) -> PolyHamiltonian:
    """``Σ_{l≤order} ad_F^l H / l!`` with ``ad_F H = {F, H}``.

    This is ``H`` composed with the time-one flow of ``F``.  Each iterate is
    cut to the supplied caps (degree grading, ``|ℓ|₁`` and ``max |mode|``)
    and loses coefficients of modulus at most ``drop``.
    """
    if order < 0:
        raise ValueError("order must be non-negative")

    def cap(p: PolyHamiltonian) -> PolyHamiltonian:
        if max_degree is None and max_fourier is None and max_modes is None and not drop:
            return p

        def keep(k):
            if drop and abs(p.terms[k]) <= drop:
                return False
            if max_degree is not None and key_degree(k) > max_degree:
                return False
            if max_fourier is not None and key_fourier(k) > max_fourier:
                return False
            if max_modes is not None and any(abs(m) > max_modes for m, _ in k[2] + k[3]):
                return False
            return True
        return p.filter(keep)

    total = cap(H)
    term = total
    for l in range(1, order + 1):
        term = cap(poisson_bracket(F, term)) / l
        if not term:
            break
        total = total + term
    return total


# ---------------------------------------------------------------------------
# Majorant norm


@dataclass(frozen=True)
class NormParams:
    """Domain ``D(s, r)`` and weights for the ``ℓ^{a,p}`` normal norm."""

    s: float
    r: float
    a: float = 0.1
    p: float = 1.0
    gamma: float = 0.0

    def __post_init__(self):
        if not self.s > 0:
            raise ValueError("s must be positive")
        if not 0 < self.r < 1:
            raise ValueError("r must lie in (0, 1)")
        if not self.a > 0:
            raise ValueError("a must be positive")
        if not self.p > 0.5:
            raise ValueError("p must exceed 1/2")
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")

    def weight(self, j: int) -> float:
        return math.exp(self.a * abs(j)) * (abs(j) ** self.p if j else 1.0)


def _alloc(exps, total_radius_sq: float) -> float:
    """``sup Π x_h^{e_h}`` over ``Σ x_h ≤ R`` (x ≥ 0)."""
    n = sum(exps)
    if n == 0:
        return 1.0
    v = total_radius_sq ** n
    for e in exps:
        if e:
            v *= (e / n) ** e
    return v


def monomial_sup(key: Key, np_: NormParams) -> float:
    """Supremum of ``|e^{iℓφ} y^i z^α z̄^β|`` over ``D(s, r)``."""
    l, i, a, b = key
    v = math.exp(np_.s * sum(abs(x) for x in l))
    v *= _alloc(i, np_.r ** 2)
    gam: dict[int, int] = {}
    for k, e in a + b:
        gam[k] = gam.get(k, 0) + e
    n = sum(gam.values())
    if n:
        v *= np_.r ** n
        for k, e in gam.items():
            v *= (e / n) ** (e / 2) / np_.weight(k) ** e
    return v


def _field_norm(f: PolyHamiltonian, np_: NormParams) -> float:
    dim = f.dim
    phi = [0.0] * dim
    y = [0.0] * dim
    zc: dict[int, float] = {}
    zbc: dict[int, float] = {}
    for key, c in f.terms.items():
        l, i, a, b = key
        ac = abs(c)
        for h in range(dim):
            if i[h]:
                k2 = (l, i[:h] + (i[h] - 1,) + i[h + 1:], a, b)
                phi[h] += ac * i[h] * monomial_sup(k2, np_)
            if l[h]:
                y[h] += ac * abs(l[h]) * monomial_sup(key, np_)
        for k, e in b:
            zc[k] = zc.get(k, 0.0) + ac * e * monomial_sup((l, i, a, _lower(b, k)), np_)
        for k, e in a:
            zbc[k] = zbc.get(k, 0.0) + ac * e * monomial_sup((l, i, _lower(a, k), b), np_)
    norm = (max(phi, default=0.0) / np_.s) + sum(y) / np_.r ** 2
    wz = math.sqrt(sum((np_.weight(k) * v) ** 2 for k, v in zc.items()))
    wzb = math.sqrt(sum((np_.weight(k) * v) ** 2 for k, v in zbc.items()))
    return norm + (wz + wzb) / np_.r


def majorant_norm(f: PolyHamiltonian, np_: NormParams, other: PolyHamiltonian | None = None,
                  dxi: float | None = None) -> float:
    """Upper bound for the weighted vector-field norm of ``f`` on ``D(s, r)``.

    Components: ``|X^φ|_∞ / s + |X^y|_1 / r² + (‖X^z‖ + ‖X^{z̄}‖) / r``.  Each
    component is bounded by summing closed-form monomial suprema, which is
    exact for a single monomial and conservative otherwise.  When ``other``
    (the same Hamiltonian at a parameter shifted by ``dxi``) is supplied the
    Lipschitz quotient weighted by ``gamma`` is added.
    """
    val = _field_norm(f, np_)
    if other is not None:
        if not dxi:
            raise ValueError("dxi is required with other")
        val += np_.gamma * _field_norm(f - other, np_) / abs(dxi)
    return val
