"""
Compact limited-memory quasi-Newton matrices B = gamma * I + Psi M Psi^T.

The middle matrix is kept as M^{-1} and only ever factored through `solve_small`.
"""
import enum
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from TrustQN.curvature import split_gram
from TrustQN.exceptions import (DegenerateQuotientError, LinearAlgebraError,
                                SingularMatrixError, SingularMiddleError)
from TrustQN.kernels import gen_sym_eig_smallest, solve_small

logger = logging.getLogger(__name__)

BFGS_GAMMA_SCALE = 0.9
SR1_GAMMA_SCALE_POSITIVE = 0.5
SR1_GAMMA_SCALE_NEGATIVE = 1.5
SR1_GAMMA_FLOOR = 1e-6
QUOTIENT_TOLERANCE = 1e-14


class HessianKind(enum.Enum):
    BFGS = "bfgs"
    SR1 = "sr1"


@dataclass(frozen=True, eq=False)
class CompactHessian:
    kind: HessianKind
    gamma: float
    psi: np.ndarray
    minv: np.ndarray

    @property
    def dim(self):
        return self.psi.shape[0]

    @property
    def rank(self):
        return self.psi.shape[1]

    def apply(self, v):
        """
        The function `apply` multiplies the compact matrix with a vector.

        :param v: The `v` parameter is a vector of length n
        :return: gamma * v + Psi solve(M^{-1}, Psi^T v). Raises `SingularMiddleError` when M^{-1} is
        numerically singular.
        """
        v = np.asarray(v, dtype=np.float64)
        if v.shape != (self.dim,):
            raise ValueError(f"Vector of shape {v.shape} does not match dimension {self.dim}.")
        if self.rank == 0:
            return self.gamma * v
        try:
            middle = solve_small(self.minv, self.psi.T @ v)
        except SingularMatrixError as e:
            raise SingularMiddleError(f"Middle matrix is singular: {e}")
        return self.gamma * v + self.psi @ middle

    def dense(self):
        """Materializes the n-by-n matrix. Only meant for small n."""
        matrix = self.gamma * np.eye(self.dim)
        if self.rank:
            try:
                matrix += self.psi @ solve_small(self.minv, self.psi.T)
            except SingularMatrixError as e:
                raise SingularMiddleError(f"Middle matrix is singular: {e}")
        return 0.5 * (matrix + matrix.T)

    def model_value(self, g, p):
        """Quadratic model value Q(p) = g^T p + 0.5 p^T B p."""
        p = np.asarray(p, dtype=np.float64)
        return float(np.asarray(g) @ p + 0.5 * (p @ self.apply(p)))


@dataclass(frozen=True)
class GammaResult:
    gamma: float
    lambda_hat: Optional[float]
    used_heuristic: bool


def gamma_h(s, y):
    """
    The function `gamma_h` returns the scaling heuristic y^T y / y^T s for a single pair.

    :param s: The `s` parameter is the step vector
    :param y: The `y` parameter is the gradient difference
    :return: the Rayleigh-type quotient. Raises `DegenerateQuotientError` when |y^T s| is below
    1e-14 * ||y|| * ||s||.
    """
    s = np.asarray(s, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    ys = float(y @ s)
    if ys == 0.0 or abs(ys) < QUOTIENT_TOLERANCE * np.linalg.norm(y) * np.linalg.norm(s):
        raise DegenerateQuotientError(f"y^T s = {ys:.3e} is too small for the quotient.")
    return float(y @ y) / ys


def _lambda_hat(buf):
    lower, diagonal, _ = split_gram(buf)
    try:
        return gen_sym_eig_smallest(lower + diagonal + lower.T, buf.get_gram_ss())
    except LinearAlgebraError as e:
        logger.debug("Generalized eigenproblem failed: %s", e)
        return None


def select_gamma_bfgs(buf):
    """
    The function `select_gamma_bfgs` picks the initial matrix scale gamma for the compact BFGS form.

    :param buf: The `buf` parameter is a nonempty `CurvaturePairBuffer`
    :return: a `GammaResult`. With the smallest generalized eigenvalue lambda_hat positive the scale is
    max(1, 0.9 * lambda_hat); otherwise it is max(1, gamma_h) of the most recent pair.
    """
    lambda_hat = _lambda_hat(buf)
    if lambda_hat is not None and lambda_hat > 0.0:
        return GammaResult(max(1.0, BFGS_GAMMA_SCALE * lambda_hat), lambda_hat, False)
    s, y = buf.newest_pair()
    try:
        heuristic = gamma_h(s, y)
    except DegenerateQuotientError:
        heuristic = 1.0
    return GammaResult(max(1.0, heuristic), lambda_hat, True)


def select_gamma_sr1(buf):
    """
    The function `select_gamma_sr1` picks gamma for the compact SR1 form from lambda_hat.

    :param buf: The `buf` parameter is a nonempty `CurvaturePairBuffer`
    :return: a `GammaResult` with max(1e-6, 0.5 * lambda_hat) for positive lambda_hat and
    min(-1e-6, 1.5 * lambda_hat) otherwise. A failed factorization gives -1e-6.
    """
    lambda_hat = _lambda_hat(buf)
    if lambda_hat is None:
        return GammaResult(-SR1_GAMMA_FLOOR, None, True)
    if lambda_hat > 0.0:
        return GammaResult(max(SR1_GAMMA_FLOOR, SR1_GAMMA_SCALE_POSITIVE * lambda_hat), lambda_hat, False)
    return GammaResult(min(-SR1_GAMMA_FLOOR, SR1_GAMMA_SCALE_NEGATIVE * lambda_hat), lambda_hat, False)


def build_bfgs(buf, gamma):
    """
    The function `build_bfgs` assembles the compact BFGS matrix.

    :param buf: The `buf` parameter is the pair buffer, possibly empty
    :param gamma: The `gamma` parameter is the positive scale of B_0 = gamma * I
    :return: a `CompactHessian` with Psi = [gamma S, Y] and
    M^{-1} = [[-gamma S^T S, -L], [-L^T, D]].
    """
    if not gamma > 0.0:
        raise ValueError(f"BFGS requires a positive gamma, got {gamma}.")
    if len(buf) == 0:
        return CompactHessian(HessianKind.BFGS, float(gamma), np.zeros((buf.get_dim(), 0)),
                              np.zeros((0, 0)))
    lower, diagonal, _ = split_gram(buf)
    psi = np.hstack([gamma * buf.get_s(), buf.get_y()])
    minv = np.block([[-gamma * buf.get_gram_ss(), -lower],
                     [-lower.T, diagonal]])
    return CompactHessian(HessianKind.BFGS, float(gamma), psi, minv)


def build_sr1(buf, gamma):
    """
    The function `build_sr1` assembles the compact SR1 matrix.

    :param buf: The `buf` parameter is the pair buffer, possibly empty
    :param gamma: The `gamma` parameter is the nonzero scale of B_0 = gamma * I
    :return: a `CompactHessian` with Psi = Y - gamma S and M^{-1} = D + L + L^T - gamma S^T S.
    """
    if gamma == 0.0:
        raise ValueError("SR1 requires a nonzero gamma.")
    if len(buf) == 0:
        return CompactHessian(HessianKind.SR1, float(gamma), np.zeros((buf.get_dim(), 0)),
                              np.zeros((0, 0)))
    lower, diagonal, _ = split_gram(buf)
    psi = buf.get_y() - gamma * buf.get_s()
    minv = diagonal + lower + lower.T - gamma * buf.get_gram_ss()
    return CompactHessian(HessianKind.SR1, float(gamma), psi, minv)


def identity(kind, gamma, dim):
    """B = gamma * I with no stored pairs."""
    return CompactHessian(kind, float(gamma), np.zeros((dim, 0)), np.zeros((0, 0)))


def build(kind, buf, gamma):
    if kind is HessianKind.BFGS:
        return build_bfgs(buf, gamma)
    return build_sr1(buf, gamma)


def select_gamma(kind, buf):
    if kind is HessianKind.BFGS:
        return select_gamma_bfgs(buf)
    return select_gamma_sr1(buf)
