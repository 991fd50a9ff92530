import itertools

import pytest
from hypothesis import given
from hypothesis import strategies as st

from nlsbeat.modes import (
    Sextuple,
    completeness_witness,
    enumerate_resonances,
    is_action_preserving,
    is_complete,
    is_resonant,
    is_trivial,
    orbit,
    tangential_set,
)

S = (-2, -1, 1, 2)
modes = st.integers(-6, 6)


def test_canonical_form_identifies_conjugates():
    assert Sextuple(1, 1, -2, -1, -1, 2) == Sextuple(-1, 2, -1, 1, -2, 1)
    assert str(Sextuple(2, 1, 1, -1, 2, -1)) == "(-1,-1,2|1,1,2)"


def test_wrong_length_rejected():
    with pytest.raises(ValueError):
        Sextuple(1, 2, 3)


def test_interior_resonance_of_tangential_set():
    found = enumerate_resonances(2, modes=S, nontrivial_only=True)
    assert [str(s) for s in found] == ["(-2,1,1|-1,-1,2)"]


def test_boundary_resonances():
    found = enumerate_resonances(4, inside=S, n_inside=4, nontrivial_only=True)
    assert {str(s) for s in found} == {"(-4,2,2|-2,-2,4)", "(-3,1,2|-2,-1,3)"}


def test_trivial_sextuple_is_resonant_and_trivial():
    s = Sextuple(1, 1, 1, 1, 1, 1)
    assert is_resonant(s) and is_trivial(s)


def test_is_trivial_rejects_nonresonant():
    with pytest.raises(ValueError):
        is_trivial(Sextuple(2, 1, 0, 1, 1, 1))


def test_tangential_set_is_complete():
    assert is_complete(S)
    assert completeness_witness(S) is None


def test_incomplete_set_has_witness():
    T = (-2, -1, 1)
    assert not is_complete(T)
    w = completeness_witness(T)
    assert is_resonant(w)
    assert sum(x in T for x in w.j) == 5


def test_tangential_set_is_not_action_preserving():
    # the interior orbit (1,1,-2|-1,-1,2) moves actions
    assert not is_action_preserving(S)


def test_duplicates_rejected():
    with pytest.raises(ValueError):
        tangential_set([1, 1, 2])


def test_box_safety_bound():
    with pytest.raises(ValueError):
        enumerate_resonances(100)


def test_orbit_size():
    assert len(orbit(Sextuple(1, 1, -2, -1, -1, 2))) == 2 * 3 * 3


@given(st.lists(modes, min_size=6, max_size=6), st.integers(-5, 5))
def test_resonance_invariant_under_translation(j, k):
    # momentum and energy defects both vanish after a shift when they vanish before
    s = Sextuple(j)
    t = Sextuple([x + k for x in j])
    assert is_resonant(s) == is_resonant(t)


@given(st.lists(modes, min_size=6, max_size=6))
def test_resonance_invariant_under_reflection_and_conjugation(j):
    s = Sextuple(j)
    assert is_resonant(s) == is_resonant(Sextuple([-x for x in j]))
    assert is_resonant(s) == is_resonant(Sextuple(j[3:] + j[:3]))


def test_enumeration_matches_brute_force():
    box = 3
    brute = set()
    for t in itertools.product(range(-box, box + 1), repeat=6):
        s = Sextuple(t)
        if is_resonant(s):
            brute.add(s)
    assert set(enumerate_resonances(box)) == brute


def test_completeness_matches_brute_force_on_small_sets():
    for S_ in itertools.combinations(range(-3, 4), 3):
        brute = True
        for t in itertools.product(S_, repeat=5):
            for k in range(-20, 21):
                if k in S_:
                    continue
                s = Sextuple(t + (k,))
                if is_resonant(s):
                    brute = False
        assert is_complete(S_) == brute, S_
