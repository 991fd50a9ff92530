"""Resonant sextuples and tangential-set classification.

A sextuple ``(j1, j2, j3 | j4, j5, j6)`` is resonant when both the momentum
``j1+j2+j3 = j4+j5+j6`` and the energy ``j1²+j2²+j3² = j4²+j5²+j6²`` balance.
Everything here is exact integer arithmetic.
"""
from __future__ import annotations

import itertools
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence

MAX_BOX = 32


def _canonical(j: Sequence[int]) -> tuple[int, ...]:
    a = tuple(sorted(int(x) for x in j[:3]))
    b = tuple(sorted(int(x) for x in j[3:]))
    return a + b if a <= b else b + a


@dataclass(frozen=True)
class Sextuple:
    """Six mode indices, three creation then three annihilation.

    Always stored canonically (triples sorted, smaller triple first), so
    two sextuples compare equal iff they describe the same monomial up to
    complex conjugation.
    """

    j: tuple[int, ...]

    def __init__(self, *j):
        if len(j) == 1 and not isinstance(j[0], int):
            j = tuple(j[0])
        if len(j) != 6:
            raise ValueError(f"a sextuple has six entries, got {len(j)}")
        object.__setattr__(self, "j", _canonical(j))

    @property
    def creation(self) -> tuple[int, int, int]:
        return self.j[:3]

    @property
    def annihilation(self) -> tuple[int, int, int]:
        return self.j[3:]

    def momentum_defect(self) -> int:
        return sum(self.j[:3]) - sum(self.j[3:])

    def energy_defect(self) -> int:
        return sum(x * x for x in self.j[:3]) - sum(x * x for x in self.j[3:])

    def __str__(self):
        a, b = self.j[:3], self.j[3:]
        return "({},{},{}|{},{},{})".format(*a, *b)


def is_resonant(s: Sextuple) -> bool:
    return s.momentum_defect() == 0 and s.energy_defect() == 0


def is_trivial(s: Sextuple) -> bool:
    """True iff the two triples coincide as multisets (action preserving)."""
    if not is_resonant(s):
        raise ValueError(f"{s} is not resonant")
    return s.creation == s.annihilation


def enumerate_resonances(
    box: int,
    *,
    modes: Iterable[int] | None = None,
    inside: Iterable[int] | None = None,
    n_inside: int | None = None,
    nontrivial_only: bool = False,
    max_box: int = MAX_BOX,
) -> list[Sextuple]:
    """All canonical resonant sextuples with every ``|j_i| <= box``.

    ``modes`` restricts every slot to the given set; ``inside`` together
    with ``n_inside`` keeps sextuples with exactly ``n_inside`` of their six
    entries in ``inside``.  The output is sorted.
    """
    if box < 0:
        raise ValueError("box must be non-negative")
    if box > max_box:
        raise ValueError(f"box {box} exceeds the safety bound {max_box}")
    if (inside is None) != (n_inside is None):
        raise ValueError("inside and n_inside go together")
    pool = range(-box, box + 1)
    if modes is not None:
        allowed = set(modes)
        pool = [x for x in pool if x in allowed]
    inside_set = set(inside) if inside is not None else None

    groups: dict[tuple[int, int], list[tuple[int, int, int]]] = defaultdict(list)
    for t in itertools.combinations_with_replacement(pool, 3):
        groups[(sum(t), t[0] ** 2 + t[1] ** 2 + t[2] ** 2)].append(t)

    out = []
    for triples in groups.values():
        for a, b in itertools.combinations_with_replacement(triples, 2):
            if nontrivial_only and a == b:
                continue
            if inside_set is not None:
                hits = sum(x in inside_set for x in a + b)
                if hits != n_inside:
                    continue
            out.append(Sextuple(a + b))
    out.sort(key=lambda s: s.j)
    return out


def is_complete(S: Iterable[int]) -> bool:
    """No resonance has five entries in ``S`` and the sixth outside.

    The missing entry is forced by the momentum equation, so the check is
    exact without any search box.
    """
    S = tangential_set(S)
    members = set(S)
    for j1, j2, j3, j4, j5 in itertools.product(S, repeat=5):
        k = j1 + j2 + j3 - j4 - j5
        if k in members:
            continue
        if j1 * j1 + j2 * j2 + j3 * j3 == j4 * j4 + j5 * j5 + k * k:
            return False
    return True


def completeness_witness(S: Iterable[int]) -> Sextuple | None:
    """A resonance with five entries in ``S`` and one outside, if any."""
    S = tangential_set(S)
    members = set(S)
    for j1, j2, j3, j4, j5 in itertools.product(S, repeat=5):
        k = j1 + j2 + j3 - j4 - j5
        if k not in members and j1 * j1 + j2 * j2 + j3 * j3 == j4 * j4 + j5 * j5 + k * k:
            return Sextuple(j1, j2, j3, j4, j5, k)
    return None


def is_action_preserving(S: Iterable[int]) -> bool:
    S = tangential_set(S)
    if not is_complete(S):
        raise ValueError(f"{S} is not complete")
    for t in itertools.product(S, repeat=6):
        s = Sextuple(t)
        if is_resonant(s) and not is_trivial(s):
            return False
    return True


def tangential_set(S: Iterable[int]) -> tuple[int, ...]:
    """Validate and sort a finite set of distinct integers."""
    vals = [int(x) for x in S]
    if len(set(vals)) != len(vals):
        dup = [k for k, c in Counter(vals).items() if c > 1]
        raise ValueError(f"duplicate modes {dup}")
    return tuple(sorted(vals))


def orbit(s: Sextuple) -> set[tuple[int, ...]]:
    """Ordered sextuples obtained by permuting within triples and swapping them."""
    a, b = s.creation, s.annihilation
    out = set()
    for pa in itertools.permutations(a):
        for pb in itertools.permutations(b):
            out.add(pa + pb)
            out.add(pb + pa)
    return out
