"""
Exact trust-region subproblem solvers for compact quasi-Newton matrices.

    minimize Q(p) = g^T p + 0.5 p^T B p   subject to   ||p|| <= delta

B = gamma * I + Psi M Psi^T is decomposed through a thin factorization Psi = Q R and the
eigendecomposition R M R^T = U diag(lambda_hat) U^T, so that B = P diag(lambda_hat + gamma, gamma) P^T
with P_par = Psi R^{-1} U. Only the k-by-k pieces are ever formed.
"""
import logging
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from TrustQN.exceptions import (ConfigValueError, HardCaseEigenvectorNotFoundError,
                                MaxIterationsError, PoleHitError, SingularMatrixError,
                                SingularMiddleError, SingularShiftError, ZeroPredictionError)
from TrustQN.hessian import HessianKind
from TrustQN.kernels import cholesky, solve_small, solve_upper, sym_eig, thin_qr

logger = logging.getLogger(__name__)

POLE_TOLERANCE = 1e-300
SECULAR_TOLERANCE = 1e-10
SECULAR_MAX_ITERATIONS = 100
EIGENSPACE_TOLERANCE = 1e-10
HARD_CASE_GRADIENT_TOLERANCE = 1e-8
PROJECTION_TOLERANCE = 1e-8

FACTORIZATIONS = ('qr', 'cholesky')


@dataclass(frozen=True, eq=False)
class SpectralFactors:
    lambda1: np.ndarray
    gamma: float
    psi: np.ndarray
    r_inv: np.ndarray
    u: np.ndarray
    g_par: np.ndarray
    g_perp_norm: float
    g_norm: float

    @property
    def dim(self):
        return self.psi.shape[0]

    @property
    def has_perp(self):
        # with k == n the gamma eigenvalue has no eigenvectors left
        return self.psi.shape[1] < self.psi.shape[0]

    @property
    def lambda_min(self):
        if self.lambda1.size == 0:
            return self.gamma
        if not self.has_perp:
            return float(self.lambda1[0])
        return float(min(self.lambda1[0], self.gamma))

    def p_parallel(self):
        """The n-by-k matrix P_par = Psi R^{-1} U with orthonormal columns."""
        return self.psi @ (self.r_inv @ self.u)

    def eigenspace_tolerance(self):
        scale = max(1.0, abs(self.gamma), float(np.abs(self.lambda1).max()) if self.lambda1.size else 0.0)
        return EIGENSPACE_TOLERANCE * scale


def spectral_factors(B, g, factorization='qr'):
    """
    The function `spectral_factors` computes the partial spectral decomposition of a compact matrix and
    the gradient components in its eigenbasis.

    :param B: The `B` parameter is a `CompactHessian`
    :param g: The `g` parameter is the gradient vector
    :param factorization: The `factorization` parameter selects how R with Psi^T Psi = R^T R is obtained:
    'qr' factors Psi directly, 'cholesky' factors Psi^T Psi, defaults to 'qr' (optional)
    :return: a `SpectralFactors`. Raises `RankDeficientError` or `NotPositiveDefiniteError` when Psi is
    numerically rank deficient.
    """
    if factorization not in FACTORIZATIONS:
        raise ConfigValueError(f"Unknown factorization '{factorization}', expected one of {FACTORIZATIONS}.")
    g = np.asarray(g, dtype=np.float64)
    g_norm = float(np.linalg.norm(g))
    rank = B.rank
    if rank == 0:
        empty = np.zeros((0, 0))
        return SpectralFactors(np.zeros(0), B.gamma, B.psi, empty, empty, np.zeros(0), g_norm, g_norm)

    if factorization == 'qr':
        _, r = thin_qr(B.psi)
    else:
        r = cholesky(B.psi.T @ B.psi)
    try:
        core = r @ solve_small(B.minv, r.T)
    except SingularMatrixError as e:
        raise SingularMiddleError(f"Middle matrix is singular: {e}")
    u, lambda_hat = sym_eig(0.5 * (core + core.T))

    r_inv = solve_upper(r, np.eye(rank))
    g_par = u.T @ (r_inv.T @ (B.psi.T @ g))
    if rank < B.dim:
        # ||(I - P_par P_par^T) g|| taken directly, not as a difference of squares
        g_perp_norm = float(np.linalg.norm(g - B.psi @ (r_inv @ (u @ g_par))))
    else:
        g_perp_norm = 0.0
    return SpectralFactors(lambda_hat + B.gamma, B.gamma, B.psi, r_inv, u, g_par, g_perp_norm, g_norm)


def _norm_terms(sigma, f):
    numerators = [f.g_par]
    denominators = [f.lambda1 + sigma]
    if f.has_perp:
        numerators.append(np.array([f.g_perp_norm]))
        denominators.append(np.array([f.gamma + sigma]))
    numerators = np.concatenate(numerators)
    denominators = np.concatenate(denominators)
    touched = numerators != 0.0
    numerators = numerators[touched]
    denominators = denominators[touched]
    if denominators.size and np.abs(denominators).min() < POLE_TOLERANCE:
        raise PoleHitError(f"Shift {sigma!r} sits on an eigenvalue of B.")
    return numerators, denominators


def p_norm(sigma, f):
    """
    The function `p_norm` evaluates ||p(sigma)|| = ||(B + sigma I)^{-1} g|| from the spectral factors
    without forming p.

    :param sigma: The `sigma` parameter is the shift
    :param f: The `f` parameter is the `SpectralFactors` of B and g
    :return: the norm of the shifted Newton step.
    """
    numerators, denominators = _norm_terms(sigma, f)
    return float(np.sqrt(np.sum((numerators / denominators) ** 2)))


def _secular(sigma, f, delta):
    numerators, denominators = _norm_terms(sigma, f)
    ratios = numerators / denominators
    norm_sq = float(np.sum(ratios ** 2))
    if norm_sq == 0.0:
        return np.inf, 0.0
    norm = np.sqrt(norm_sq)
    value = 1.0 / norm - 1.0 / delta
    derivative = float(np.sum(ratios ** 2 / denominators)) / norm ** 3
    return value, derivative


def solve_sigma(f, delta):
    """
    The function `solve_sigma` finds the root of phi(sigma) = 1/||p(sigma)|| - 1/delta to the right of
    max(0, -lambda_min) with a safeguarded Newton iteration.

    :param f: The `f` parameter is the `SpectralFactors` of B and g
    :param delta: The `delta` parameter is the trust-region radius
    :return: the shift sigma with |phi(sigma)| <= 1e-10. Raises `MaxIterationsError` after 100 steps.
    """
    lambda_min = f.lambda_min
    sigma = max(0.0, -lambda_min) + 1e-10 * (1.0 + abs(lambda_min))
    lo = sigma
    hi = sigma + f.g_norm / delta + abs(lambda_min) + 1.0

    try:
        value, _ = _secular(sigma, f, delta)
    except PoleHitError:
        value = -np.inf
    if value >= 0.0:
        if lambda_min <= 0.0:
            return sigma
        # the root lies in [0, sigma0) and phi(0) < 0
        lo, hi, sigma = 0.0, sigma, 0.0

    for iteration in range(SECULAR_MAX_ITERATIONS):
        try:
            value, derivative = _secular(sigma, f, delta)
        except PoleHitError:
            value, derivative = -np.inf, 0.0
        if abs(value) <= SECULAR_TOLERANCE:
            logger.debug("Secular equation solved in %d iterations, sigma=%.6e", iteration, sigma)
            return sigma
        if value < 0.0:
            lo = sigma
        else:
            hi = sigma
        if hi - lo <= 4.0 * np.finfo(np.float64).eps * max(1.0, abs(hi)):
            return sigma
        candidate = sigma - value / derivative if derivative > 0.0 and np.isfinite(value) else np.nan
        if not (lo < candidate < hi):
            candidate = 0.5 * (lo + hi)
        if candidate == sigma:
            return sigma
        sigma = candidate
    raise MaxIterationsError(
        f"Secular equation did not converge in {SECULAR_MAX_ITERATIONS} iterations (sigma={sigma:.6e}).")


def p_of_sigma(B, g, sigma):
    """
    The function `p_of_sigma` returns p = -(B + sigma I)^{-1} g through the Sherman-Morrison-Woodbury
    identity.

    :param B: The `B` parameter is a `CompactHessian`
    :param g: The `g` parameter is the gradient vector
    :param sigma: The `sigma` parameter is the shift
    :return: -(1/tau) (g - Psi (tau M^{-1} + Psi^T Psi)^{-1} Psi^T g) with tau = gamma + sigma. Raises
    `SingularShiftError` when tau vanishes or the small system is singular.
    """
    g = np.asarray(g, dtype=np.float64)
    tau = B.gamma + sigma
    if tau == 0.0 or abs(tau) <= np.finfo(np.float64).eps * (abs(B.gamma) + abs(sigma)):
        raise SingularShiftError(f"gamma + sigma = {tau!r} vanishes.")
    if B.rank == 0:
        return -g / tau
    small = tau * B.minv + B.psi.T @ B.psi
    try:
        correction = B.psi @ solve_small(small, B.psi.T @ g)
    except SingularMatrixError as e:
        raise SingularShiftError(f"Shifted small system is singular: {e}")
    return -(g - correction) / tau


def _spectral_step(f, g, sigma, drop_tolerance=0.0):
    # pseudo-inverse: eigenvalue terms with |lambda + sigma| <= drop_tolerance are dropped
    p_par = f.p_parallel()
    step = np.zeros(f.dim)
    if f.lambda1.size:
        shifted = f.lambda1 + sigma
        keep = np.abs(shifted) > drop_tolerance
        coefficients = np.zeros_like(shifted)
        coefficients[keep] = f.g_par[keep] / shifted[keep]
        step -= p_par @ coefficients
    if f.has_perp and abs(f.gamma + sigma) > drop_tolerance:
        perp = g - p_par @ f.g_par if f.lambda1.size else g
        step -= perp / (f.gamma + sigma)
    return step


@dataclass(frozen=True, eq=False)
class SubproblemSolution:
    p: np.ndarray
    sigma: float
    q_value: float
    on_boundary: bool
    hard_case: bool = False

    @property
    def p_norm(self):
        return float(np.linalg.norm(self.p))


def solve_subproblem_bfgs(B, g, delta, factorization='qr'):
    """
    The function `solve_subproblem_bfgs` solves the subproblem for a positive definite compact BFGS
    matrix.

    :param B: The `B` parameter is a `CompactHessian` of kind BFGS
    :param g: The `g` parameter is the gradient vector
    :param delta: The `delta` parameter is the trust-region radius
    :param factorization: The `factorization` parameter is 'qr' or 'cholesky', defaults to 'qr' (optional)
    :return: a `SubproblemSolution`, interior with sigma = 0 when the Newton step fits.
    """
    g = np.asarray(g, dtype=np.float64)
    f = spectral_factors(B, g, factorization)
    if f.lambda_min <= 0.0:
        logger.warning("BFGS matrix has smallest eigenvalue %.3e", f.lambda_min)
    if p_norm(0.0, f) <= delta:
        p = p_of_sigma(B, g, 0.0)
        return SubproblemSolution(p, 0.0, B.model_value(g, p), False)
    sigma = solve_sigma(f, delta)
    p = p_of_sigma(B, g, sigma)
    return SubproblemSolution(p, sigma, B.model_value(g, p), True)


def _leftmost_vector(f):
    tolerance = f.eigenspace_tolerance()
    if f.lambda1.size and (not f.has_perp or f.lambda1[0] <= f.gamma + tolerance):
        vector = f.p_parallel()[:, 0]
        return vector / np.linalg.norm(vector)
    p_par = f.p_parallel() if f.lambda1.size else np.zeros((f.dim, 0))
    for j in range(f.dim):
        probe = -(p_par @ p_par[j, :])
        probe[j] += 1.0
        norm = float(np.linalg.norm(probe))
        if norm > PROJECTION_TOLERANCE:
            return probe / norm
    raise HardCaseEigenvectorNotFoundError(
        f"No canonical basis vector has a component outside span(P_par) among {f.dim} probes.")


def _leftmost_gradient_norm(f):
    tolerance = f.eigenspace_tolerance()
    lambda_min = f.lambda_min
    components = f.g_par[np.abs(f.lambda1 - lambda_min) <= tolerance] if f.lambda1.size else np.zeros(0)
    total = float(components @ components)
    if f.has_perp and abs(f.gamma - lambda_min) <= tolerance:
        total += f.g_perp_norm ** 2
    return float(np.sqrt(total))


def solve_subproblem_sr1(B, g, delta, factorization='qr'):
    """
    The function `solve_subproblem_sr1` solves the subproblem for a compact SR1 matrix of any
    definiteness, including the hard case.

    :param B: The `B` parameter is a `CompactHessian` of kind SR1
    :param g: The `g` parameter is the gradient vector
    :param delta: The `delta` parameter is the trust-region radius
    :param factorization: The `factorization` parameter is 'qr' or 'cholesky', defaults to 'qr' (optional)
    :return: a `SubproblemSolution` with B + sigma I positive semidefinite.
    """
    g = np.asarray(g, dtype=np.float64)
    f = spectral_factors(B, g, factorization)
    lambda_min = f.lambda_min

    if lambda_min > 0.0 and p_norm(0.0, f) <= delta:
        p = _spectral_step(f, g, 0.0)
        return SubproblemSolution(p, 0.0, B.model_value(g, p), False)

    if lambda_min <= 0.0 and _leftmost_gradient_norm(f) <= HARD_CASE_GRADIENT_TOLERANCE * f.g_norm:
        sigma = -lambda_min
        p_hat = _spectral_step(f, g, sigma, drop_tolerance=f.eigenspace_tolerance())
        p_hat_norm = float(np.linalg.norm(p_hat))
        if p_hat_norm <= delta:
            if lambda_min < 0.0 and p_hat_norm < delta:
                alpha = np.sqrt(delta ** 2 - p_hat_norm ** 2)
                p = p_hat + alpha * _leftmost_vector(f)
                logger.debug("Hard case: sigma=%.6e alpha=%.6e", sigma, alpha)
                return SubproblemSolution(p, sigma, B.model_value(g, p), True, True)
            return SubproblemSolution(p_hat, sigma, B.model_value(g, p_hat), p_hat_norm >= delta)

    sigma = solve_sigma(f, delta)
    p = _spectral_step(f, g, sigma)
    return SubproblemSolution(p, sigma, B.model_value(g, p), True)


def solve_subproblem(B, g, delta, factorization='qr'):
    if B.kind is HessianKind.BFGS:
        return solve_subproblem_bfgs(B, g, delta, factorization)
    return solve_subproblem_sr1(B, g, delta, factorization)


def rho(f_cur, f_trial, q_at_p):
    """
    The function `rho` returns the ratio of actual to predicted reduction.

    :param f_cur: The `f_cur` parameter is the objective value at the current point
    :param f_trial: The `f_trial` parameter is the objective value at the trial point
    :param q_at_p: The `q_at_p` parameter is the model value Q(p), negative for a useful step
    :return: (f_trial - f_cur) / Q(p). Raises `ZeroPredictionError` when Q(p) is numerically zero.
    """
    if abs(q_at_p) < POLE_TOLERANCE:
        raise ZeroPredictionError(f"Model predicts no change (Q(p) = {q_at_p!r}).")
    return (f_trial - f_cur) / q_at_p


@dataclass(frozen=True)
class TrustRegionState:
    delta: float = 1.0
    tau1: float = 1e-4
    tau2: float = 0.1
    tau3: float = 0.75
    eta2: float = 0.5
    eta3: float = 0.8
    eta4: float = 2.0
    last_rho: Optional[float] = None

    def __post_init__(self):
        errors = []
        if not self.delta > 0.0:
            errors.append(f"delta must be positive, got {self.delta}")
        if not 0.0 < self.tau2 < 0.5 < self.tau3 < 1.0:
            errors.append(f"need 0 < tau2 < 0.5 < tau3 < 1, got tau2={self.tau2}, tau3={self.tau3}")
        if not 0.0 < self.eta2 <= 0.5 < self.eta3 < 1.0 < self.eta4:
            errors.append(
                f"need 0 < eta2 <= 0.5 < eta3 < 1 < eta4, got {self.eta2}, {self.eta3}, {self.eta4}")
        if errors:
            raise ConfigValueError('\n'.join(errors))

    def accepts(self, rho_value):
        return rho_value >= self.tau1


def adjust_radius(st, rho_value, p_norm_value):
    """
    The function `adjust_radius` applies the radius schedule and returns a new state.

    :param st: The `st` parameter is the current `TrustRegionState`
    :param rho_value: The `rho_value` parameter is the reduction ratio of the last step
    :param p_norm_value: The `p_norm_value` parameter is the length of the last step
    :return: a new `TrustRegionState`; `st` is left untouched.
    """
    delta = st.delta
    if rho_value > st.tau3:
        if p_norm_value > st.eta3 * delta:
            delta = st.eta4 * delta
    elif rho_value < st.tau2:
        delta = st.eta2 * delta
    return replace(st, delta=delta, last_rho=rho_value)
