import math

import numpy as np
import pytest
from scipy.linalg import expm

from nlsbeat import floquet as fl
from nlsbeat import pendulum as pend

STAR = (0.0, 4.0, 0.0, 2.0)
MID = (0.3, 4.02, -0.03, 2.01)


def test_block_structure_validation():
    with pytest.raises(ValueError):
        fl.Block2(np.eye(2), "skewHermitian")
    with pytest.raises(ValueError):
        fl.Block2(2 * np.eye(2), "unitary")
    with pytest.raises(ValueError):
        fl.Block2(np.eye(3))


def test_only_blocks_three_and_four():
    with pytest.raises(ValueError):
        fl.BlockSystem.at(5, STAR)


@pytest.mark.parametrize("j,U", [(3, 144.0), (4, 18.0)])
def test_star_limit_is_constant(j, U):
    a = fl.block_matrix(j, STAR, 0.0).m
    b = fl.block_matrix(j, STAR, 1.3).m
    assert np.array_equal(a, b)
    assert a == pytest.approx(1j * np.array([[558, U], [U, 558]]), abs=1e-6)


def test_trace_reads_entries():
    sysm = fl.BlockSystem.at(3, MID)
    A = fl.block_matrix(3, MID, 0.7, sysm)
    V = (A.m[1, 1] - A.m[0, 0]) / 1j
    assert A.trace() == pytest.approx(1j * (2 * sysm.f0 + V.real), abs=1e-12)


def test_constant_monodromy_is_exponential():
    sysm = fl.BlockSystem.at(3, STAR)
    W = fl.monodromy(3, STAR, system=sysm).m
    assert np.max(np.abs(W - expm(sysm.period * sysm.matrix(sysm.U0, sysm.V0)))) < 1e-10


def test_zero_generator_gives_identity():
    sysm = fl.BlockSystem(3, np.array(pend.K_STAR), 0.0, -1.0, 2 * math.pi, 1.0, True, 0.0, 0.0)
    assert np.allclose(fl.monodromy(3, STAR, system=sysm).m, np.eye(2), atol=1e-15)


def test_monodromy_step_halving():
    tol = 1e-10
    sysm = fl.BlockSystem.at(4, MID)
    a = fl.monodromy(4, MID, tol=tol, system=sysm).m
    b = fl.monodromy(4, MID, tol=tol / 2, system=sysm).m
    assert np.max(np.abs(a - b)) < 10 * tol


@pytest.mark.parametrize("j,expected", [(3, (702, 414)), (4, (576, 540))])
def test_star_exponents(j, expected):
    r = fl.floquet_exponents(j, STAR)
    assert (r.theta_plus, r.theta_minus) == pytest.approx(expected, rel=1e-6)


@pytest.mark.parametrize("j", [3, 4])
def test_trace_identity(j):
    fm = pend.frequency_map(MID, n_grid=256, gradient="average")
    sysm = fl.BlockSystem.at(j, MID, fm)
    r = fl.floquet_exponents(j, MID, system=sysm)
    mean_trace = np.mean(2 * fm.f0 + fm.V[j])
    assert r.theta_plus + r.theta_minus == pytest.approx(mean_trace, abs=1e-8)
    B = r.B.m
    assert np.allclose(B, -B.conj().T, atol=1e-12)
    assert np.allclose(np.sort(np.linalg.eigvals(-1j * B).real), [r.theta_minus, r.theta_plus])


def test_flow_is_unitary_and_floquet_factor_periodic():
    sysm = fl.BlockSystem.at(3, MID)
    r = fl.floquet_exponents(3, MID, system=sysm)
    _, _, samples = fl._integrate(sysm, sysm.period, 1e-12, 8, t_eval=np.linspace(0, sysm.period, 9))
    for _, W in samples:
        assert np.max(np.abs(W @ W.conj().T - np.eye(2))) < 1e-10
    assert fl.periodicity_residual(3, MID, result=r) < 1e-9
    assert r.periodicity_residual < 1e-9


def test_path_continuation_from_anchor():
    fine = fl.floquet_path(3, [(E, 4.0, 0.0, 2.0) for E in np.linspace(0, 0.1, 11)])
    coarse = fl.floquet_path(3, [(E, 4.0, 0.0, 2.0) for E in (0.0, 0.05, 0.1)])
    gaps = [r.theta_plus - r.theta_minus for r in fine]
    assert gaps[0] == pytest.approx(288, rel=1e-6)
    # no jumps by a branch step 2π/T (about 240 here)
    omega = 2 * math.pi / fine[-1].period
    assert all(abs(a - b) < omega / 4 for a, b in zip(gaps, gaps[1:]))
    assert coarse[-1].theta_plus == pytest.approx(fine[-1].theta_plus, rel=1e-10)
