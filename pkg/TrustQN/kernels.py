"""
Small dense linear-algebra kernels.

Every matrix handled here is either tiny (at most 2l+1 on a side) or tall and
thin (n rows, at most 2l columns). The functions are pure: they copy their
inputs, keep no state and may be called from any number of threads.
"""
import numpy as np
import scipy.linalg

from TrustQN.exceptions import (NoConvergenceError, NotPositiveDefiniteError,
                                RankDeficientError, SingularMatrixError)

QR_RANK_TOLERANCE = 1e-12
CHOLESKY_PIVOT_TOLERANCE = 1e-14
SOLVE_PIVOT_TOLERANCE = 1e-14
JACOBI_MAX_SWEEPS = 30
JACOBI_TOLERANCE = np.finfo(np.float64).eps


def _as_matrix(a):
    a = np.array(a, dtype=np.float64)
    if a.ndim == 1:
        a = a.reshape(-1, 1)
    if a.ndim != 2:
        raise ValueError(f"Expected a 2-D array, got shape {a.shape}.")
    return a


def thin_qr(a):
    """
    The function `thin_qr` computes the economy-size QR factorization of a tall matrix with a
    nonnegative diagonal in R.

    :param a: The `a` parameter is the n-by-k matrix to factor (a 1-D array is read as a single
    column). It must have full column rank
    :return: a tuple `(q, r)` with `q` n-by-k with orthonormal columns and `r` k-by-k upper triangular
    such that `q @ r` reproduces `a`.
    """
    a = _as_matrix(a)
    rows, cols = a.shape
    if cols == 0:
        return np.zeros((rows, 0)), np.zeros((0, 0))
    if cols > rows:
        raise RankDeficientError(
            f"A {rows}x{cols} matrix cannot have full column rank.")
    q, r = scipy.linalg.qr(a, mode='economic', check_finite=False)
    signs = np.where(np.diag(r) < 0.0, -1.0, 1.0)
    q = q * signs
    r = r * signs[:, None]
    diagonal = np.abs(np.diag(r))
    if diagonal.max() == 0.0 or diagonal.min() <= QR_RANK_TOLERANCE * diagonal.max():
        raise RankDeficientError(
            f"Smallest R pivot {diagonal.min():.3e} is below {QR_RANK_TOLERANCE:g} of the largest "
            f"{diagonal.max():.3e}.")
    return q, r


def cholesky(a):
    """
    The function `cholesky` returns the upper triangular factor R with R^T R = A.

    :param a: The `a` parameter is a symmetric matrix
    :return: the upper triangular Cholesky factor. Raises `NotPositiveDefiniteError` when a pivot
    falls below 1e-14 of the average diagonal entry.
    """
    a = _as_matrix(a)
    dim = a.shape[0]
    if dim == 0:
        return np.zeros((0, 0))
    threshold = CHOLESKY_PIVOT_TOLERANCE * np.trace(a) / dim
    if not threshold > 0.0:
        raise NotPositiveDefiniteError(f"Trace {np.trace(a):.3e} is not positive.")
    try:
        r = scipy.linalg.cholesky(a, lower=False, check_finite=False)
    except np.linalg.LinAlgError as e:
        raise NotPositiveDefiniteError(f"Cholesky factorization failed: {e}")
    pivots = np.diag(r) ** 2
    if pivots.min() <= threshold:
        raise NotPositiveDefiniteError(
            f"Pivot {pivots.min():.3e} is below the tolerance {threshold:.3e}.")
    return r


def _off_diagonal_norm(a):
    return np.sqrt(2.0 * np.sum(np.triu(a, 1) ** 2))


def _jacobi_rotation(a, v, p, q):
    apq = a[p, q]
    if apq == 0.0:
        return
    theta = (a[q, q] - a[p, p]) / (2.0 * apq)
    if abs(theta) > 1e150:
        t = 0.5 / theta
    else:
        t = np.copysign(1.0, theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
    c = 1.0 / np.sqrt(t * t + 1.0)
    s = t * c

    col_p = a[:, p].copy()
    col_q = a[:, q].copy()
    a[:, p] = c * col_p - s * col_q
    a[:, q] = s * col_p + c * col_q
    row_p = a[p, :].copy()
    row_q = a[q, :].copy()
    a[p, :] = c * row_p - s * row_q
    a[q, :] = s * row_p + c * row_q
    a[p, q] = 0.0
    a[q, p] = 0.0

    vec_p = v[:, p].copy()
    vec_q = v[:, q].copy()
    v[:, p] = c * vec_p - s * vec_q
    v[:, q] = s * vec_p + c * vec_q


def sym_eig(a, max_sweeps=JACOBI_MAX_SWEEPS):
    """
    The function `sym_eig` spectrally decomposes a small symmetric matrix with cyclic Jacobi
    rotations.

    :param a: The `a` parameter is the symmetric matrix to decompose
    :param max_sweeps: The `max_sweeps` parameter bounds the number of full cyclic sweeps before
    `NoConvergenceError` is raised, defaults to 30 (optional)
    :return: a tuple `(u, lam)` where `lam` holds the eigenvalues in ascending order and the columns
    of the orthogonal matrix `u` are the matching eigenvectors.
    """
    a = _as_matrix(a)
    a = 0.5 * (a + a.T)
    dim = a.shape[0]
    v = np.eye(dim)
    scale = np.linalg.norm(a)
    if dim > 1 and scale > 0.0:
        tolerance = dim * JACOBI_TOLERANCE * scale
        for _ in range(max_sweeps):
            if _off_diagonal_norm(a) <= tolerance:
                break
            for p in range(dim - 1):
                for q in range(p + 1, dim):
                    _jacobi_rotation(a, v, p, q)
        else:
            residual = _off_diagonal_norm(a)
            if residual > 1e3 * tolerance:
                raise NoConvergenceError(
                    f"Jacobi did not converge in {max_sweeps} sweeps (off-diagonal {residual:.3e}).")
    lam = np.diag(a).copy()
    order = np.argsort(lam, kind='stable')
    return v[:, order], lam[order]


def gen_sym_eig_smallest(a, b):
    """
    The function `gen_sym_eig_smallest` returns the smallest eigenvalue of the pencil A u = lambda B u.

    :param a: The `a` parameter is a symmetric matrix
    :param b: The `b` parameter is a symmetric positive definite matrix of the same size
    :return: the smallest generalized eigenvalue, computed by reducing B = R^T R and decomposing
    R^{-T} A R^{-1}.
    """
    a = _as_matrix(a)
    b = _as_matrix(b)
    if a.shape != b.shape or a.shape[0] != a.shape[1]:
        raise ValueError(f"Pencil shapes {a.shape} and {b.shape} do not match.")
    r = cholesky(b)
    left = scipy.linalg.solve_triangular(r, a, trans='T', lower=False, check_finite=False)
    reduced = scipy.linalg.solve_triangular(r, left.T, trans='T', lower=False, check_finite=False)
    _, lam = sym_eig(0.5 * (reduced + reduced.T))
    return float(lam[0])


def solve_small(a, b):
    """
    The function `solve_small` solves a small square system with partially pivoted LU.

    :param a: The `a` parameter is the square coefficient matrix
    :param b: The `b` parameter is the right-hand side, a vector or a matrix of stacked columns
    :return: the solution with the shape of `b`. Raises `SingularMatrixError` when a pivot is at or
    below 1e-14 times the infinity norm of `a`.
    """
    a = _as_matrix(a)
    b = np.asarray(b, dtype=np.float64)
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"Expected a square matrix, got shape {a.shape}.")
    if a.shape[0] == 0:
        return b.copy()
    scale = np.linalg.norm(a, np.inf)
    lu, piv = scipy.linalg.lu_factor(a, check_finite=False)
    pivots = np.abs(np.diag(lu))
    if scale == 0.0 or pivots.min() <= SOLVE_PIVOT_TOLERANCE * scale:
        raise SingularMatrixError(
            f"Pivot {pivots.min():.3e} is below the tolerance {SOLVE_PIVOT_TOLERANCE * scale:.3e}.")
    return scipy.linalg.lu_solve((lu, piv), b, check_finite=False)


def solve_upper(r, b, transpose=False):
    """Triangular solve with the upper factor from `thin_qr` or `cholesky`."""
    return scipy.linalg.solve_triangular(r, b, trans='T' if transpose else 'N', lower=False,
                                         check_finite=False)
