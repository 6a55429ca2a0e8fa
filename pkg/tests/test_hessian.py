import numpy as np
import pytest
from numpy.testing import assert_allclose

from TrustQN.curvature import CurvaturePairBuffer, accept_sr1_pair
from TrustQN.exceptions import DegenerateQuotientError
from TrustQN.hessian import (HessianKind, build, build_bfgs, build_sr1, gamma_h, identity,
                             select_gamma_bfgs, select_gamma_sr1)
from TrustQN.kernels import gen_sym_eig_smallest

E1 = np.array([1.0, 0.0])


def _symmetric(rng, dim, low, high):
    basis, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    H = (basis * rng.uniform(low, high, dim)) @ basis.T
    return 0.5 * (H + H.T)


def _single_pair(s, y):
    return CurvaturePairBuffer(1, s.shape[0]).push_pair(s, y)


def _dense_bfgs(gamma, pairs, dim):
    B = gamma * np.eye(dim)
    for s, y in pairs:
        bs = B @ s
        B = B - np.outer(bs, bs) / (s @ bs) + np.outer(y, y) / (y @ s)
    return B


def _dense_sr1(gamma, pairs, dim):
    B = gamma * np.eye(dim)
    for s, y in pairs:
        r = y - B @ s
        B = B + np.outer(r, r) / (r @ s)
    return B


def _max_rel(a, b):
    return np.abs(a - b).max() / max(1.0, np.abs(b).max())


def test_gamma_h():
    assert gamma_h(E1, 2.0 * E1) == pytest.approx(2.0)
    s = np.array([1.0, 2.0, -1.0])
    assert gamma_h(s, s) == pytest.approx(1.0)
    with pytest.raises(DegenerateQuotientError):
        gamma_h(E1, np.array([0.0, 1.0]))


def test_gamma_h_is_rayleigh_quotient(rng):
    s = rng.standard_normal(6)
    y = s + 0.1 * rng.standard_normal(6)
    assert gamma_h(s, y) == pytest.approx((y @ y) / (y @ s), rel=1e-14)


def test_select_gamma_bfgs_examples():
    result = select_gamma_bfgs(_single_pair(E1, 2.0 * E1))
    assert result.gamma == pytest.approx(1.8)
    assert result.lambda_hat == pytest.approx(2.0)
    assert not result.used_heuristic
    assert select_gamma_bfgs(_single_pair(E1, 0.5 * E1)).gamma == 1.0


def test_select_gamma_bfgs_negative_curvature_uses_heuristic():
    s = np.array([1.0, 1.0])
    y = np.array([-3.0, 1.0])
    result = select_gamma_bfgs(_single_pair(s, y))
    assert result.lambda_hat < 0.0
    assert result.used_heuristic
    # gamma_h = 10 / -2 is negative, clamped to 1
    assert result.gamma == 1.0

    e2 = np.array([0.0, 1.0])
    buf = CurvaturePairBuffer(2, 2).push_pair(E1, -E1).push_pair(e2, 4.0 * e2)
    result = select_gamma_bfgs(buf)
    assert result.lambda_hat == pytest.approx(-1.0)
    # newest pair: y^T y / y^T s = 16 / 4
    assert result.gamma == pytest.approx(4.0)


def test_select_gamma_sr1_examples():
    assert select_gamma_sr1(_single_pair(E1, 2.0 * E1)).gamma == pytest.approx(1.0)
    assert select_gamma_sr1(_single_pair(E1, -2.0 * E1)).gamma == pytest.approx(-3.0)
    assert select_gamma_sr1(_single_pair(E1, 1e-9 * E1)).gamma == pytest.approx(1e-6)


def test_select_gamma_sr1_falls_back_on_singular_gram():
    s = np.array([1.0, 0.0])
    buf = CurvaturePairBuffer(2, 2).push_pair(s, s).push_pair(s, 2.0 * s)
    result = select_gamma_sr1(buf)
    assert result.gamma == -1e-6
    assert result.lambda_hat is None


def test_empty_buffer_is_scaled_identity(rng):
    v = rng.standard_normal(4)
    for kind in HessianKind:
        B = build(kind, CurvaturePairBuffer(3, 4), 2.5)
        assert B.rank == 0
        assert_allclose(B.apply(v), 2.5 * v)
        assert_allclose(identity(kind, 2.5, 4).dense(), 2.5 * np.eye(4))


def test_build_rejects_bad_gamma():
    buf = CurvaturePairBuffer(2, 2)
    with pytest.raises(ValueError):
        build_bfgs(buf, 0.0)
    with pytest.raises(ValueError):
        build_sr1(buf, 0.0)


def test_bfgs_single_pair_matches_recursion():
    s, y = E1, 2.0 * E1
    B = build_bfgs(_single_pair(s, y), 3.0)
    dense = _dense_bfgs(3.0, [(s, y)], 2)
    for v in (E1, np.array([0.0, 1.0]), np.array([0.3, -0.7])):
        assert_allclose(B.apply(v), dense @ v, atol=1e-12)


def test_apply_zero_vector(rng):
    buf = CurvaturePairBuffer(2, 4)
    buf.push_pair(rng.standard_normal(4), rng.standard_normal(4))
    assert_allclose(build_sr1(buf, 0.7).apply(np.zeros(4)), 0.0)


def test_apply_matches_dense_materialization(rng):
    H = _symmetric(rng, 8, 0.1, 10.0)
    buf = CurvaturePairBuffer(3, 8)
    for _ in range(3):
        s = rng.standard_normal(8)
        buf.push_pair(s, H @ s)
    for B in (build_bfgs(buf, 1.3), build_sr1(buf, 0.05)):
        v = rng.standard_normal(8)
        assert_allclose(B.apply(v), B.dense() @ v, atol=1e-11 * max(1.0, np.abs(B.dense()).max()))


def test_compact_bfgs_matches_recursion(rng):
    for _ in range(250):
        dim = int(rng.integers(2, 13))
        memory = int(rng.integers(1, min(5, dim) + 1))
        H = _symmetric(rng, dim, 0.1, 10.0)
        pairs = []
        for _ in range(memory):
            s = rng.standard_normal(dim)
            pairs.append((s, H @ s))
        buf = CurvaturePairBuffer(memory, dim)
        for s, y in pairs:
            buf.push_pair(s, y)
        gamma = float(rng.uniform(0.5, 5.0))
        B = build_bfgs(buf, gamma)
        assert _max_rel(B.dense(), _dense_bfgs(gamma, pairs, dim)) < 1e-10
        s, y = pairs[-1]
        assert_allclose(B.apply(s), y, rtol=0, atol=1e-9 * np.linalg.norm(y))
        assert np.linalg.eigvalsh(B.dense())[0] > 0.0


def test_compact_sr1_matches_recursion(rng):
    checked = 0
    while checked < 250:
        dim = int(rng.integers(3, 13))
        memory = int(rng.integers(1, min(5, dim - 1) + 1))
        H = _symmetric(rng, dim, -5.0, 5.0)
        gamma = float(rng.choice([-1.0, 1.0]) * rng.uniform(0.5, 3.0))
        pairs = []
        dense = gamma * np.eye(dim)
        for _ in range(memory):
            s = rng.standard_normal(dim)
            y = H @ s
            r = y - dense @ s
            # keep the sequence away from tiny SR1 denominators
            if abs(r @ s) < 0.1 * np.linalg.norm(r) * np.linalg.norm(s):
                continue
            pairs.append((s, y))
            dense = dense + np.outer(r, r) / (r @ s)
        if not pairs:
            continue
        buf = CurvaturePairBuffer(memory, dim)
        for s, y in pairs:
            buf.push_pair(s, y)
        B = build_sr1(buf, gamma)
        assert _max_rel(B.dense(), _dense_sr1(gamma, pairs, dim)) < 1e-8
        s, y = pairs[-1]
        assert_allclose(B.apply(s), y, rtol=0, atol=1e-8 * max(1.0, np.linalg.norm(y)))
        checked += 1


def test_sr1_single_pair_secant():
    B = build_sr1(_single_pair(E1, 3.0 * E1), 1.0)
    assert_allclose(B.apply(E1), 3.0 * E1, atol=1e-15)


def test_sr1_reproduces_quadratic_on_span(rng):
    for _ in range(50):
        dim = int(rng.integers(6, 13))
        memory = int(rng.integers(1, 6))
        H = _symmetric(rng, dim, -5.0, 5.0)
        buf = CurvaturePairBuffer(memory, dim)
        for _ in range(memory):
            s = rng.standard_normal(dim)
            buf.push_pair(s, H @ s)
        lambda_hat = select_gamma_sr1(buf).lambda_hat
        for gamma in (lambda_hat - 0.5, lambda_hat - 3.0, select_gamma_sr1(buf).gamma):
            if abs(gamma) < 1e-6 or not gamma < lambda_hat:
                continue
            B = build_sr1(buf, gamma)
            S = buf.get_s()
            v = S @ rng.standard_normal(S.shape[1])
            assert_allclose(B.apply(v), H @ v, atol=1e-9 * max(1.0, np.linalg.norm(H @ v)))
            # the smallest eigenvalue of B stays below the smallest Rayleigh quotient of H on span(S)
            bound = gen_sym_eig_smallest(S.T @ H @ S, S.T @ S)
            assert np.linalg.eigvalsh(B.dense())[0] <= bound + 1e-9


def test_sr1_pairs_accepted_incrementally_keep_secant(rng):
    dim = 10
    H = _symmetric(rng, dim, -4.0, 4.0)
    buf = CurvaturePairBuffer(5, dim)
    B = identity(HessianKind.SR1, 1.0, dim)
    for _ in range(8):
        s = rng.standard_normal(dim)
        y = H @ s
        if accept_sr1_pair(s, y, B.apply(s)):
            buf.push_pair(s, y)
            B = build_sr1(buf, select_gamma_sr1(buf).gamma)
            assert_allclose(B.apply(s), y, atol=1e-9 * max(1.0, np.linalg.norm(y)))
