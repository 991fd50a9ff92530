import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlsbeat import pendulum as pend

KS = pend.K_STAR


def star_closed_form(p, q):
    return (1308 + (-270 * (p**2 + (2 - p) ** 2) + 36 * (p**3 + (2 - p) ** 3)
                    + 72 * p**1.5 * (2 - p) ** 1.5 * np.cos(q)))


@given(st.floats(0.01, 1.99), st.floats(-math.pi, math.pi))
def test_reduced_hamiltonian_at_star(p, q):
    assert pend.reduced_hamiltonian(p, q, KS, eps=1.0) == pytest.approx(star_closed_form(p, q),
                                                                        abs=1e-12 * 1308)


def test_coupling_at_centre():
    assert pend.hamiltonian_AB(KS, 1.0).b == pytest.approx(72, abs=1e-12)


@given(st.floats(0.01, 1.99))
def test_star_symmetry(p):
    assert pend.hamiltonian_AB(KS, p).a == pytest.approx(pend.hamiltonian_AB(KS, 2 - p).a, abs=1e-10)


def test_eps_factorizes():
    d = pend.hamiltonian_AB(KS, 0.7)
    assert d.A(1e-3) == pytest.approx(d.linear + 1e-3 * d.a)
    assert d.B(1e-3) == pytest.approx(1e-3 * d.b)


def test_fixed_points_at_star():
    fp = pend.fixed_points(KS)
    assert abs(fp.stable - 1) < 1e-12 and abs(fp.unstable - 1) < 1e-12


def test_fixed_point_off_star_against_bisection():
    from scipy.optimize import brentq
    K = KS + np.array([0.1, 0, 0])
    fp = pend.fixed_points(K)
    g = lambda p: pend.deriv("a", p, K, 1) + pend.deriv("b", p, K, 1)  # noqa: E731
    ref = brentq(g, 0.5, 1.5, xtol=1e-15)
    assert abs(fp.stable - 1) > 0
    assert abs(g(fp.stable)) < 1e-12
    assert fp.stable == pytest.approx(ref, abs=1e-12)
    for p, q in ((fp.stable, 0.0), (fp.unstable, math.pi)):
        assert np.max(np.abs(pend.vector_field(p, q, K))) < 1e-12


def test_separatrix_crossings_at_star():
    p1, p2 = pend.separatrix_crossings(KS)
    assert abs(p1 + p2 - 2) < 1e-10
    assert p1 < 0.5 and p2 > 1.5
    assert p1 == pytest.approx(0.41597780845703, abs=1e-10)


def test_separatrix_energy_at_star():
    assert pend.separatrix_energy(KS) == pytest.approx(756, abs=1e-9)


def test_energy_along_orbit_conserved():
    aa = pend.action_angle_data([0.3, *KS], n_grid=64)
    vals = pend.h(aa.p, aa.q, KS)
    assert np.max(np.abs(vals - aa.energy)) < 1e-9


def test_action_monotone_in_energy():
    chart_energies = np.linspace(pend.separatrix_energy(KS) + 1, 863, 8)
    actions = [pend.orbit_at_energy(KS, e).action for e in chart_energies]
    assert np.all(np.diff(actions) < 0)  # energy decreases outward from the maximum


def test_frequency_quadratures_agree():
    E, h = 0.3, 1e-5
    T = pend.energy_of_action(KS, E).period
    dH = (pend.reduced_energy(E + h, KS) - pend.reduced_energy(E - h, KS)) / (2 * h)
    assert abs(dH) * T == pytest.approx(2 * math.pi, rel=1e-8)


def test_guard_bands():
    with pytest.raises(ValueError):
        pend.action_angle_data([1e-4, *KS])
    with pytest.raises(ValueError):
        pend.action_angle_data([pend.separatrix_action(KS), *KS])


def test_small_oscillation_limit():
    lam = pend.frequency_map([0.0, *KS], n_grid=32, gradient="average").lam
    assert abs(lam[0]) == pytest.approx(144 * math.sqrt(3), rel=1e-6)


def test_gradient_methods_agree():
    xi = [0.3, 4.02, -0.03, 2.01]
    fd = pend.frequency_map(xi, n_grid=128, gradient="fd").lam
    av = pend.frequency_map(xi, n_grid=128, gradient="average").lam
    assert np.allclose(fd, av, rtol=1e-6)


def test_block_coefficients_at_centre():
    U, V = pend.block_coefficients(np.array([1.0]), np.array([0.0]), KS)
    assert U[3][0] == pytest.approx(72 * math.sqrt(1 * 2 * 2 * 1))
    assert U[4][0] == pytest.approx(18)
    assert V[3][0] == pytest.approx(0, abs=1e-12) and V[4][0] == pytest.approx(0, abs=1e-12)


def test_twist_at_star():
    tw = pend.twist_matrix(KS)
    assert abs(tw.det) > 1e6
    assert all(abs(v) < 1e-10 for v in tw.beta3.values())
    assert np.allclose(tw.M, tw.M.T)


def test_quartic_coefficient_against_quadrature():
    # ∂²h̃/∂E² at E → 0 from the action-angle quadrature
    tw = pend.twist_matrix(KS)
    Es = (0.004, 0.008, 0.012)
    d2 = []
    for E in Es:
        h = 1e-3
        d2.append((pend.frequency_E(E + h, KS) - pend.frequency_E(E - h, KS)) / (2 * h))
    limit = float(pend._neville_zero(Es, d2))
    assert 2 * tw.gamma22 == pytest.approx(limit, rel=0.05)


@settings(max_examples=10)
@given(st.floats(-0.05, 0.05), st.floats(-0.05, 0.05), st.floats(-0.05, 0.05))
def test_twist_nondegenerate_near_star(d1, d2, d3):
    assert abs(pend.twist_matrix(KS + np.array([d1, d2, d3])).det) > 1e6


def test_phase_portrait_shapes():
    qs, ps, grid, orbits = pend.phase_portrait(KS, n=11, n_orbits=2, samples=20)
    assert grid.shape == (11, 11) and len(orbits) == 2
