import numpy as np
import pytest
import scipy.linalg
from numpy.testing import assert_allclose

from TrustQN.exceptions import NotPositiveDefiniteError, RankDeficientError, SingularMatrixError
from TrustQN.kernels import cholesky, gen_sym_eig_smallest, solve_small, solve_upper, sym_eig, thin_qr


def test_thin_qr_reproduces_input(rng):
    a = rng.standard_normal((30, 6))
    q, r = thin_qr(a)
    assert q.shape == (30, 6) and r.shape == (6, 6)
    assert_allclose(q @ r, a, atol=1e-12)
    assert_allclose(q.T @ q, np.eye(6), atol=1e-12)
    assert np.all(np.diag(r) > 0.0)
    assert_allclose(np.tril(r, -1), 0.0)


def test_thin_qr_rejects_dependent_columns(rng):
    a = rng.standard_normal((10, 2))
    with pytest.raises(RankDeficientError):
        thin_qr(np.column_stack([a, a[:, 0]]))


def test_thin_qr_rejects_wide_matrix(rng):
    with pytest.raises(RankDeficientError):
        thin_qr(rng.standard_normal((2, 3)))


def test_cholesky_factor(rng):
    a = rng.standard_normal((5, 5))
    spd = a @ a.T + 5.0 * np.eye(5)
    r = cholesky(spd)
    assert_allclose(r.T @ r, spd, atol=1e-12)
    assert_allclose(np.tril(r, -1), 0.0)


@pytest.mark.parametrize("matrix", [[[1.0, 2.0], [2.0, 1.0]], [[0.0, 0.0], [0.0, 0.0]], [[1.0, 1.0], [1.0, 1.0]]])
def test_cholesky_rejects_indefinite_and_singular(matrix):
    with pytest.raises(NotPositiveDefiniteError):
        cholesky(np.array(matrix))


def test_sym_eig_small_examples():
    u, lam = sym_eig(np.array([[2.0, 1.0], [1.0, 2.0]]))
    assert_allclose(lam, [1.0, 3.0], atol=1e-14)
    assert_allclose(np.abs(u[:, 0]), [np.sqrt(0.5), np.sqrt(0.5)], atol=1e-14)

    u, lam = sym_eig(np.diag([3.0, 1.0]))
    assert_allclose(lam, [1.0, 3.0])
    assert_allclose(np.abs(u), [[0.0, 1.0], [1.0, 0.0]])


def test_sym_eig_matches_lapack(rng):
    for dim in range(1, 11):
        a = rng.standard_normal((dim, dim))
        a = a + a.T
        u, lam = sym_eig(a)
        assert_allclose(lam, np.linalg.eigvalsh(a), atol=1e-12 * max(1.0, np.abs(a).max()))
        assert_allclose(u.T @ u, np.eye(dim), atol=1e-12)
        assert_allclose(u @ np.diag(lam) @ u.T, a, atol=1e-12 * max(1.0, np.abs(a).max()))


def test_sym_eig_repeated_and_zero():
    _, lam = sym_eig(np.eye(4))
    assert_allclose(lam, np.ones(4))
    u, lam = sym_eig(np.zeros((3, 3)))
    assert_allclose(lam, np.zeros(3))
    assert_allclose(u, np.eye(3))


def test_gen_sym_eig_smallest(rng):
    assert gen_sym_eig_smallest(np.diag([1.0, 4.0]), np.diag([1.0, 2.0])) == pytest.approx(1.0)
    a = rng.standard_normal((5, 5))
    a = a + a.T
    b = rng.standard_normal((5, 5))
    b = b @ b.T + np.eye(5)
    expected = scipy.linalg.eigh(a, b, eigvals_only=True)[0]
    assert gen_sym_eig_smallest(a, b) == pytest.approx(expected, rel=1e-10, abs=1e-12)


def test_gen_sym_eig_smallest_needs_definite_b():
    with pytest.raises(NotPositiveDefiniteError):
        gen_sym_eig_smallest(np.eye(2), np.array([[1.0, 1.0], [1.0, 1.0]]))


def test_solve_small(rng):
    a = rng.standard_normal((4, 4)) + 4.0 * np.eye(4)
    b = rng.standard_normal(4)
    assert_allclose(a @ solve_small(a, b), b, atol=1e-12)
    columns = rng.standard_normal((4, 3))
    assert_allclose(a @ solve_small(a, columns), columns, atol=1e-12)


def test_solve_small_singular():
    with pytest.raises(SingularMatrixError):
        solve_small(np.array([[1.0, 2.0], [2.0, 4.0]]), np.ones(2))


def test_solve_upper(rng):
    r = np.triu(rng.standard_normal((4, 4))) + 3.0 * np.eye(4)
    b = rng.standard_normal(4)
    assert_allclose(r @ solve_upper(r, b), b, atol=1e-12)
    assert_allclose(r.T @ solve_upper(r, b, transpose=True), b, atol=1e-12)
