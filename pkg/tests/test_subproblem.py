import dataclasses

import numpy as np
import pytest
from numpy.testing import assert_allclose

from TrustQN.curvature import CurvaturePairBuffer
from TrustQN.exceptions import ConfigValueError, PoleHitError, SingularShiftError, ZeroPredictionError
from TrustQN.hessian import CompactHessian, HessianKind, build_bfgs, build_sr1, identity, select_gamma_sr1
from TrustQN.subproblem import (SpectralFactors, TrustRegionState, adjust_radius, p_norm, p_of_sigma,
                                rho, solve_sigma, solve_subproblem, solve_subproblem_bfgs,
                                solve_subproblem_sr1, spectral_factors)


def _diag_minus_one_two():
    # gamma = 2 with a rank-one correction of -3 along e1: dense B = diag(-1, 2)
    return CompactHessian(HessianKind.SR1, 2.0, np.array([[1.0], [0.0]]), np.array([[-1.0 / 3.0]]))


def _random_sr1(rng, dim=12, memory=4):
    basis, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    H = (basis * rng.uniform(-5.0, 5.0, dim)) @ basis.T
    buf = CurvaturePairBuffer(memory, dim)
    for _ in range(memory):
        s = rng.standard_normal(dim)
        buf.push_pair(s, H @ s)
    return build_sr1(buf, select_gamma_sr1(buf).gamma)


def test_spectral_factors_recover_negative_eigenvalue():
    f = spectral_factors(_diag_minus_one_two(), np.array([1.0, 1.0]))
    assert_allclose(f.lambda1, [-1.0], atol=1e-14)
    assert f.lambda_min == pytest.approx(-1.0)
    assert f.g_par @ f.g_par + f.g_perp_norm ** 2 == pytest.approx(2.0)


def test_spectral_factors_match_dense_spectrum(rng):
    B = _random_sr1(rng)
    g = rng.standard_normal(B.dim)
    for factorization in ("qr", "cholesky"):
        f = spectral_factors(B, g, factorization)
        P = f.p_parallel()
        assert_allclose(P.T @ P, np.eye(B.rank), atol=1e-9)
        assert_allclose(B.dense() @ P, P * f.lambda1, atol=1e-8 * max(1.0, np.abs(f.lambda1).max()))
        assert f.lambda_min == pytest.approx(np.linalg.eigvalsh(B.dense())[0], abs=1e-9)
        assert f.g_par @ f.g_par + f.g_perp_norm ** 2 == pytest.approx(g @ g, rel=1e-10)


def test_spectral_factors_unknown_factorization():
    with pytest.raises(ConfigValueError):
        spectral_factors(_diag_minus_one_two(), np.ones(2), "svd")


def test_p_norm_example_and_pole():
    f = SpectralFactors(np.array([2.0]), 1.0, np.ones((1, 1)), np.eye(1), np.eye(1), np.array([4.0]),
                        0.0, 4.0)
    assert p_norm(0.0, f) == pytest.approx(2.0)
    with pytest.raises(PoleHitError):
        p_norm(-2.0, f)


def test_p_norm_matches_dense_solve(rng):
    B = _random_sr1(rng)
    g = rng.standard_normal(B.dim)
    f = spectral_factors(B, g)
    sigma = -f.lambda_min + 0.7
    expected = np.linalg.norm(np.linalg.solve(B.dense() + sigma * np.eye(B.dim), g))
    assert p_norm(sigma, f) == pytest.approx(expected, rel=1e-9)


def test_p_of_sigma_matches_dense_solve(rng):
    buf = CurvaturePairBuffer(3, 7)
    for _ in range(3):
        s = rng.standard_normal(7)
        buf.push_pair(s, 2.0 * s + 0.1 * rng.standard_normal(7))
    B = build_bfgs(buf, 1.5)
    g = rng.standard_normal(7)
    for sigma in (0.0, 0.3, 10.0):
        expected = -np.linalg.solve(B.dense() + sigma * np.eye(7), g)
        assert_allclose(p_of_sigma(B, g, sigma), expected, atol=1e-10 * max(1.0, np.abs(expected).max()))


def test_p_of_sigma_singular_shift():
    with pytest.raises(SingularShiftError):
        p_of_sigma(identity(HessianKind.SR1, -1.0, 3), np.ones(3), 1.0)


def test_bfgs_interior_step():
    solution = solve_subproblem_bfgs(identity(HessianKind.BFGS, 2.0, 2), np.array([1.0, 0.0]), 10.0)
    assert_allclose(solution.p, [-0.5, 0.0])
    assert solution.sigma == 0.0
    assert not solution.on_boundary
    assert solution.q_value == pytest.approx(-0.25)


def test_bfgs_boundary_step():
    solution = solve_subproblem_bfgs(identity(HessianKind.BFGS, 1.0, 2), np.array([3.0, 4.0]), 1.0)
    assert solution.sigma == pytest.approx(4.0, rel=1e-8)
    assert_allclose(solution.p, [-0.6, -0.8], rtol=1e-8)
    assert solution.on_boundary


def test_sr1_negative_identity_boundary():
    solution = solve_subproblem_sr1(identity(HessianKind.SR1, -1.0, 2), np.array([1.0, 0.0]), 2.0)
    assert solution.sigma == pytest.approx(1.5, rel=1e-8)
    assert_allclose(solution.p, [-2.0, 0.0], rtol=1e-8)
    assert solution.on_boundary and not solution.hard_case


def test_sr1_hard_case_in_parallel_eigenspace():
    delta = 2.0
    solution = solve_subproblem_sr1(_diag_minus_one_two(), np.array([0.0, 1.0]), delta)
    alpha = np.sqrt(delta ** 2 - 1.0 / 9.0)
    assert solution.hard_case
    assert solution.sigma == pytest.approx(1.0)
    assert_allclose(solution.p, [alpha, -1.0 / 3.0], atol=1e-12)
    assert solution.p_norm == pytest.approx(delta, rel=1e-12)


def test_sr1_hard_case_in_gamma_eigenspace():
    # gamma = -1 has the two-dimensional eigenspace span(e2, e3); g lies along e1
    B = CompactHessian(HessianKind.SR1, -1.0, np.array([[1.0], [0.0], [0.0]]), np.array([[1.0 / 3.0]]))
    solution = solve_subproblem_sr1(B, np.array([1.0, 0.0, 0.0]), 1.0)
    assert solution.hard_case
    assert solution.sigma == pytest.approx(1.0)
    assert solution.p[0] == pytest.approx(-1.0 / 3.0)
    assert_allclose(solution.p[1:], [np.sqrt(8.0 / 9.0), 0.0], atol=1e-12)
    dense = B.dense()
    assert_allclose(dense @ solution.p + solution.sigma * solution.p, -np.array([1.0, 0.0, 0.0]),
                    atol=1e-12)


def test_sr1_hard_case_with_short_pseudo_inverse_step_stays_interior():
    # delta equal to the pseudo-inverse step length needs no eigenvector component
    solution = solve_subproblem_sr1(_diag_minus_one_two(), np.array([0.0, 1.0]), 1.0 / 3.0)
    assert not solution.hard_case
    assert_allclose(solution.p, [0.0, -1.0 / 3.0], atol=1e-12)


def test_solve_sigma_root(rng):
    B = _random_sr1(rng)
    g = 100.0 * rng.standard_normal(B.dim)
    f = spectral_factors(B, g)
    for delta in (1e-3, 0.1, 1.0):
        sigma = solve_sigma(f, delta)
        assert sigma >= max(0.0, -f.lambda_min)
        assert p_norm(sigma, f) == pytest.approx(delta, rel=1e-7)


def test_factorizations_agree(rng):
    B = _random_sr1(rng)
    g = rng.standard_normal(B.dim)
    by_qr = solve_subproblem(B, g, 0.5, "qr")
    by_cholesky = solve_subproblem(B, g, 0.5, "cholesky")
    assert_allclose(by_qr.p, by_cholesky.p, atol=1e-7 * max(1.0, by_qr.p_norm))
    assert by_qr.sigma == pytest.approx(by_cholesky.sigma, rel=1e-7, abs=1e-10)


def test_dispatch_by_kind():
    g = np.array([3.0, 4.0])
    assert solve_subproblem(identity(HessianKind.BFGS, 1.0, 2), g, 1.0).on_boundary
    assert solve_subproblem(identity(HessianKind.SR1, 1.0, 2), g, 100.0).sigma == 0.0


def test_rho():
    assert rho(10.0, 8.0, -4.0) == pytest.approx(0.5)
    assert rho(10.0, 11.0, -1.0) == pytest.approx(-1.0)
    with pytest.raises(ZeroPredictionError):
        rho(1.0, 1.0, 0.0)


def test_trust_region_state_validation():
    with pytest.raises(ConfigValueError):
        TrustRegionState(delta=0.0)
    with pytest.raises(ConfigValueError):
        TrustRegionState(tau2=0.6)
    with pytest.raises(ConfigValueError):
        TrustRegionState(eta4=0.9)
    state = TrustRegionState()
    assert state.accepts(1e-4)
    assert not state.accepts(0.0)


@pytest.mark.parametrize("rho_value, p_length, expected", [
    (0.9, 1.0, 2.0),
    (0.9, 0.5, 1.0),
    (0.5, 1.0, 1.0),
    (0.05, 1.0, 0.5),
    (-3.0, 0.2, 0.5),
])
def test_adjust_radius(rho_value, p_length, expected):
    state = TrustRegionState(delta=1.0)
    updated = adjust_radius(state, rho_value, p_length)
    assert updated.delta == pytest.approx(expected)
    assert updated.last_rho == rho_value
    assert state.delta == 1.0
    assert dataclasses.replace(updated, delta=1.0, last_rho=None) == state
