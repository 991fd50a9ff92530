import pytest

from nlsbeat.algebra import PolyHamiltonian, poisson_bracket, sparse
from nlsbeat.birkhoff import (
    TruncatedNlsHamiltonian,
    build_generating_function,
    closed_form,
    energy_divisor,
    extract_restricted,
    mass_poly,
    momentum,
    momentum_poly,
    normal_form_step,
    restricted_conserved,
    sextuple_of,
    u_degree,
    verification_report,
)
from nlsbeat.modes import is_resonant


def mono(a, b, c=1.0):
    return PolyHamiltonian({((), (), sparse(a), sparse(b)): c}, dim=0)


@pytest.fixture(scope="module")
def small():
    return TruncatedNlsHamiltonian.build(mode_cut=4, eps=1e-3)


@pytest.fixture(scope="module")
def step4(small):
    return normal_form_step(small, remainder=False)


def test_divisor_is_exact_integer():
    assert energy_divisor(sparse({2: 1, 1: 1, 0: 1}), sparse({1: 3})) == 2


def test_h6_conserves_momentum_and_mass(small):
    assert all(momentum(k[2], k[3]) == 0 for k, _ in small.H6)
    assert not poisson_bracket(small.H6, mass_poly(4))
    assert not poisson_bracket(small.H6, momentum_poly(4))


def test_h6_coefficients_count_orderings(small):
    # u1 u2 u-1 ū1 ū2 ū-1 appears 3!·3! times among ordered sextuples
    assert small.H6.coeff(alpha={1: 1, 2: 1, -1: 1}, beta={1: 1, 2: 1, -1: 1}) == 36


def test_generating_function_skips_resonances(small):
    F = build_generating_function(small)
    assert F.coeff(alpha={1: 2, -2: 1}, beta={-1: 2, 2: 1}) == 0
    assert F.coeff(alpha={1: 3}, beta={1: 3}) == 0
    assert F.coeff(alpha={2: 1, 1: 1, 0: 1}, beta={1: 3}) != 0


def test_generating_function_solves_homological_equation(small):
    F = build_generating_function(small)
    nonres = small.H6.filter(lambda k: energy_divisor(k[2], k[3]) != 0)
    diff = poisson_bracket(small.H2, F) - small.eps * nonres
    assert diff.max_abs() < 1e-15


def test_normal_form_step(small, step4):
    res = step4
    sextic = [k for k, _ in res.HBirk if u_degree(k) == 6]
    assert sextic
    assert all(is_resonant(sextuple_of(k[2], k[3])) for k in sextic)
    assert res.HBirk.coeff(alpha={1: 2, -2: 1}, beta={-1: 2, 2: 1}) == pytest.approx(9e-3)
    # integer coefficients: exact; after scaling by ε only rounding remains
    assert not poisson_bracket(res.resonant, small.H2)
    assert poisson_bracket(res.HBirk, small.H2).max_abs() < 1e-15


def test_remainder_degree():
    res = normal_form_step(TruncatedNlsHamiltonian.build(mode_cut=3, eps=1e-3), remainder=True)
    assert res.remainder
    assert min(u_degree(k) for k, _ in res.remainder) >= 10


def test_eps_threshold():
    with pytest.raises(ValueError):
        normal_form_step(TruncatedNlsHamiltonian.build(2, eps=0.5))


def test_restricted_pieces(small, step4):
    HB = step4.HBirk
    h60 = extract_restricted(HB, normal_degree=0, eps=small.eps)
    assert extract_restricted(HB, normal_degree=1, eps=small.eps, check=False).max_abs() < 1e-12
    h62 = extract_restricted(HB, normal_degree=2, eps=small.eps)
    assert h62.coeff(alpha={-2: 2, 4: 1}, beta={2: 2, -4: 1}) == pytest.approx(9)
    assert h62.coeff(alpha={-1: 1, -2: 1, 3: 1}, beta={1: 1, 2: 1, -3: 1}) == pytest.approx(36)
    for c in restricted_conserved():
        assert poisson_bracket(h60, c).max_abs() < 1e-12


def test_ap_part_expands_from_power_sums():
    # (Σ|u_j|²)³ carries 6 in front: its |u1|²|u2|²|u-1|² coefficient is 6·3! = 36
    ap = closed_form(0).filter(lambda k: len(k[2]) == 3)
    assert ap.coeff(alpha={1: 1, 2: 1, -1: 1}, beta={1: 1, 2: 1, -1: 1}) == 36


def test_mismatch_detected(small, step4):
    HB = step4.HBirk + mono({1: 3}, {1: 3}, 1e-3)
    with pytest.raises(AssertionError):
        extract_restricted(HB, normal_degree=0, eps=small.eps)


def test_verification_report_small_cut():
    rep = verification_report(mode_cut=5)
    assert rep["all_pass"], [c for c in rep["checks"] if not c["pass"]]
