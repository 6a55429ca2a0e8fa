"""
Randomized checks of the trust-region subproblem solvers against a dense eigendecomposition oracle.

Each instance is a compact matrix built from pairs y = H s of a random symmetric H, a random gradient
and a radius drawn log-uniformly from [1e-3, 1e2]. A returned solution passes when it satisfies the
global optimality conditions

    (B + sigma I) p = -g,   sigma >= 0,   sigma (delta - ||p||) = 0,   B + sigma I positive semidefinite

to tolerance and its model value is no worse than the oracle's.
"""
import logging
import time
from dataclasses import dataclass, field
from typing import List

import numpy as np

from TrustQN.curvature import CurvaturePairBuffer, accept_sr1_pair
from TrustQN.exceptions import PoleHitError, SingularMiddleError, TrustQNError
from TrustQN.hessian import (build_bfgs, build_sr1, identity, select_gamma_bfgs,
                             select_gamma_sr1, HessianKind)
from TrustQN.subproblem import (solve_subproblem_bfgs, solve_subproblem_sr1,
                                spectral_factors, _secular)

logger = logging.getLogger(__name__)

KINDS = ("bfgs", "sr1")
MAX_MEMORY = 5
MAX_DIM = 50
DELTA_RANGE = (1e-3, 1e2)
STATIONARITY_TOLERANCE = 1e-7
COMPLEMENTARITY_TOLERANCE = 1e-6
CURVATURE_TOLERANCE = 1e-9
Q_TOLERANCE = 1e-7
HARD_CASE_TOLERANCE = 1e-8
ORACLE_BISECTIONS = 200


@dataclass(frozen=True, eq=False)
class FuzzInstance:
    hessian: object
    g: np.ndarray
    delta: float


@dataclass(frozen=True, eq=False)
class OracleSolution:
    p: np.ndarray
    sigma: float
    q_value: float
    hard_case: bool


@dataclass
class FuzzReport:
    kind: str
    count: int
    passed: int = 0
    hard_cases: int = 0
    failures: List = field(default_factory=list)
    elapsed_s: float = 0.0

    @property
    def ok(self):
        return self.passed == self.count

    def summary(self):
        return (f"{self.kind}: {self.passed}/{self.count} passed, {self.hard_cases} hard cases, "
                f"{self.elapsed_s:.2f}s")


def _random_delta(rng):
    return float(np.exp(rng.uniform(np.log(DELTA_RANGE[0]), np.log(DELTA_RANGE[1]))))


def _random_symmetric(rng, dim, low, high):
    basis, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    H = (basis * rng.uniform(low, high, dim)) @ basis.T
    return 0.5 * (H + H.T)


def random_bfgs_instance(rng):
    """
    The function `random_bfgs_instance` draws a compact BFGS matrix from pairs of an SPD quadratic with
    eigenvalues in [0.1, 10].
    """
    memory = int(rng.integers(1, MAX_MEMORY + 1))
    dim = int(rng.integers(2 * memory + 1, MAX_DIM + 1))
    H = _random_symmetric(rng, dim, 0.1, 10.0)
    buf = CurvaturePairBuffer(memory, dim)
    for _ in range(memory):
        s = rng.standard_normal(dim)
        buf.push_pair(s, H @ s)
    B = build_bfgs(buf, select_gamma_bfgs(buf).gamma)
    return FuzzInstance(B, rng.standard_normal(dim) * 10.0 ** rng.uniform(-2, 2), _random_delta(rng))


def random_sr1_instance(rng, attempts=100):
    """
    The function `random_sr1_instance` draws a compact SR1 matrix from pairs of an indefinite quadratic,
    offering each pair to the skip rule against the matrix current at that time.
    """
    for _ in range(attempts):
        memory = int(rng.integers(1, MAX_MEMORY + 1))
        dim = int(rng.integers(memory + 2, MAX_DIM + 1))
        H = _random_symmetric(rng, dim, -10.0, 10.0)
        buf = CurvaturePairBuffer(memory, dim)
        B = identity(HessianKind.SR1, 1.0, dim)
        try:
            for _ in range(memory):
                s = rng.standard_normal(dim)
                y = H @ s
                if accept_sr1_pair(s, y, B.apply(s)):
                    buf.push_pair(s, y)
                    B = build_sr1(buf, select_gamma_sr1(buf).gamma)
        except SingularMiddleError:
            continue
        if len(buf):
            return FuzzInstance(B, rng.standard_normal(dim) * 10.0 ** rng.uniform(-2, 2),
                                _random_delta(rng))
    raise TrustQNError(f"No usable SR1 instance in {attempts} attempts.")


def _pseudo_step(lam, basis, g, sigma, tolerance):
    shifted = lam + sigma
    coefficients = np.zeros_like(lam)
    keep = np.abs(shifted) > tolerance
    coefficients[keep] = (basis.T @ g)[keep] / shifted[keep]
    return -basis @ coefficients


def hard_case_instance(rng, attempts=100):
    """
    The function `hard_case_instance` draws an SR1 instance with a negative leftmost eigenvalue, removes
    the gradient component along the leftmost eigenspace and picks a radius beyond the pseudo-inverse
    step so the solution needs the eigenvector term.
    """
    for _ in range(attempts):
        instance = random_sr1_instance(rng)
        B = instance.hessian
        lam, basis = np.linalg.eigh(B.dense())
        if lam[0] > -1e-3:
            continue
        tolerance = 1e-10 * max(1.0, np.abs(lam).max())
        leftmost = basis[:, np.abs(lam - lam[0]) <= tolerance]
        g = instance.g - leftmost @ (leftmost.T @ instance.g)
        p_hat = _pseudo_step(lam, basis, g, -lam[0], tolerance)
        delta = float(np.linalg.norm(p_hat)) * rng.uniform(1.5, 3.0) + 1e-3
        return FuzzInstance(B, g, delta)
    raise TrustQNError(f"No hard-case instance in {attempts} attempts.")


def dense_oracle(B_dense, g, delta):
    """
    The function `dense_oracle` solves the subproblem by a full eigendecomposition and bisection on the
    secular equation.

    :param B_dense: The `B_dense` parameter is the symmetric n-by-n matrix
    :param g: The `g` parameter is the gradient
    :param delta: The `delta` parameter is the radius
    :return: an `OracleSolution`.
    """
    lam, basis = np.linalg.eigh(B_dense)
    g_tilde = basis.T @ g
    g_norm = float(np.linalg.norm(g))
    lambda_min = float(lam[0])
    tolerance = 1e-10 * max(1.0, np.abs(lam).max())

    def q_value(p):
        return float(g @ p + 0.5 * p @ (B_dense @ p))

    def step_norm(sigma):
        shifted = lam + sigma
        if np.any(np.abs(shifted[g_tilde != 0.0]) == 0.0):
            return np.inf
        return float(np.linalg.norm(g_tilde / shifted))

    if lambda_min > 0.0 and step_norm(0.0) <= delta:
        p = -basis @ (g_tilde / lam)
        return OracleSolution(p, 0.0, q_value(p), False)

    leftmost = np.abs(lam - lambda_min) <= tolerance
    if lambda_min <= 0.0 and np.linalg.norm(g_tilde[leftmost]) <= HARD_CASE_TOLERANCE * g_norm:
        sigma = -lambda_min
        p_hat = _pseudo_step(lam, basis, g, sigma, tolerance)
        p_hat_norm = float(np.linalg.norm(p_hat))
        if p_hat_norm <= delta:
            if lambda_min < 0.0 and p_hat_norm < delta:
                p = p_hat + np.sqrt(delta ** 2 - p_hat_norm ** 2) * basis[:, 0]
                return OracleSolution(p, sigma, q_value(p), True)
            return OracleSolution(p_hat, sigma, q_value(p_hat), False)

    lo = max(0.0, -lambda_min)
    hi = lo + g_norm / delta + abs(lambda_min) + 1.0
    for _ in range(ORACLE_BISECTIONS):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if step_norm(mid) > delta:
            lo = mid
        else:
            hi = mid
    sigma = hi
    p = -basis @ (g_tilde / (lam + sigma))
    return OracleSolution(p, sigma, q_value(p), False)


def check_certificates(B_dense, g, delta, p, sigma):
    """
    The function `check_certificates` verifies the global optimality conditions for a candidate pair.

    :return: a list of violated conditions, empty when all hold.
    """
    problems = []
    p_norm = float(np.linalg.norm(p))
    residual = float(np.linalg.norm(B_dense @ p + sigma * p + g))
    bound = STATIONARITY_TOLERANCE * (np.linalg.norm(g) + np.linalg.norm(B_dense, 1) * p_norm)
    if residual > bound:
        problems.append(f"stationarity residual {residual:.3e} > {bound:.3e}")
    if sigma < 0.0:
        problems.append(f"negative sigma {sigma:.3e}")
    if p_norm > delta * (1.0 + 1e-8):
        problems.append(f"step length {p_norm:.6e} exceeds radius {delta:.6e}")
    gap = sigma * abs(delta - p_norm)
    if gap > COMPLEMENTARITY_TOLERANCE * delta * max(1.0, sigma):
        problems.append(f"complementarity gap {gap:.3e}")
    lambda_min = float(np.linalg.eigvalsh(B_dense)[0])
    if lambda_min + sigma < -CURVATURE_TOLERANCE * max(1.0, abs(lambda_min)):
        problems.append(f"B + sigma I is indefinite (lambda_min + sigma = {lambda_min + sigma:.3e})")
    return problems


def secular_is_monotone(factors, delta, samples=8):
    """Samples phi on its search interval and reports whether it never decreases."""
    lambda_min = factors.lambda_min
    lo = max(0.0, -lambda_min) + 1e-8 * (1.0 + abs(lambda_min))
    hi = lo + factors.g_norm / delta + abs(lambda_min) + 1.0
    values = []
    for sigma in np.linspace(lo, hi, samples):
        try:
            values.append(_secular(sigma, factors, delta)[0])
        except PoleHitError:
            return True
    values = np.array(values)
    finite = values[np.isfinite(values)]
    return bool(np.all(np.diff(finite) >= -1e-12 * (1.0 + np.abs(finite[:-1]))))


def check_instance(instance, kind, factorization='qr'):
    """
    The function `check_instance` runs the matching solver on one instance and compares it with the
    dense oracle.

    :return: a tuple `(problems, solution)`.
    """
    B = instance.hessian
    solver = solve_subproblem_bfgs if kind == "bfgs" else solve_subproblem_sr1
    try:
        solution = solver(B, instance.g, instance.delta, factorization)
    except TrustQNError as e:
        return [f"solver raised {type(e).__name__}: {e}"], None
    B_dense = B.dense()
    problems = check_certificates(B_dense, instance.g, instance.delta, solution.p, solution.sigma)
    oracle = dense_oracle(B_dense, instance.g, instance.delta)
    q_returned = float(instance.g @ solution.p + 0.5 * solution.p @ (B_dense @ solution.p))
    if q_returned > oracle.q_value + Q_TOLERANCE * (1.0 + abs(oracle.q_value)):
        problems.append(f"Q(p)={q_returned:.10e} worse than oracle {oracle.q_value:.10e}")
    if not secular_is_monotone(spectral_factors(B, instance.g, factorization), instance.delta):
        problems.append("secular function decreases on its search interval")
    return problems, solution


def run_fuzz(count, seed=0, kind="sr1", hard_case=False, factorization='qr'):
    """
    The function `run_fuzz` checks `count` random instances of one solver.

    :param count: The `count` parameter is the number of instances
    :param seed: The `seed` parameter seeds the instance generator, defaults to 0 (optional)
    :param kind: The `kind` parameter is "bfgs" or "sr1", defaults to "sr1" (optional)
    :param hard_case: The `hard_case` parameter draws only constructed hard-case SR1 instances, which
    must also be flagged as such and end on the boundary, defaults to False (optional)
    :return: a `FuzzReport`.
    """
    if kind not in KINDS:
        raise ValueError(f"Unknown solver kind '{kind}', expected one of {KINDS}.")
    if hard_case and kind != "sr1":
        raise ValueError("Hard-case instances only exist for sr1.")
    rng = np.random.default_rng(seed)
    report = FuzzReport(kind=kind, count=count)
    started = time.perf_counter()
    for index in range(count):
        if hard_case:
            instance = hard_case_instance(rng)
        elif kind == "bfgs":
            instance = random_bfgs_instance(rng)
        else:
            instance = random_sr1_instance(rng)
        problems, solution = check_instance(instance, kind, factorization)
        if solution is not None and solution.hard_case:
            report.hard_cases += 1
        if hard_case and solution is not None:
            if not solution.hard_case:
                problems.append("hard case not detected")
            if abs(solution.p_norm - instance.delta) > HARD_CASE_TOLERANCE * instance.delta:
                problems.append(f"hard-case step length {solution.p_norm:.10e} != {instance.delta:.10e}")
        if problems:
            logger.debug("Instance %d failed: %s", index, "; ".join(problems))
            report.failures.append((index, problems))
        else:
            report.passed += 1
    report.elapsed_s = time.perf_counter() - started
    logger.info(report.summary())
    return report
