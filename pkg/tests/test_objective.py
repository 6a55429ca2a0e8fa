import numpy as np
import pytest
from numpy.testing import assert_allclose

from TrustQN.exceptions import IndexOutOfRangeError
from TrustQN.objective import (MlpObjective, QuadraticObjective, RosenbrockObjective, eval_batch,
                               fd_check, quadratic_true_pairs)


def _mlp(rng, count=20, features=8, hidden=(5,), classes=3):
    inputs = rng.standard_normal((count, features))
    labels = rng.integers(0, classes, count)
    return MlpObjective(inputs, labels, classes, hidden)


def test_quadratic_value_and_gradient():
    obj = QuadraticObjective(np.diag([1.0, 2.0]), np.array([1.0, -1.0]))
    loss, grad = obj.full(np.array([1.0, 1.0]))
    assert loss == pytest.approx(0.5 * 3.0 + 0.0)
    assert_allclose(grad, [2.0, 1.0])
    _, grad = obj.full(obj.minimizer())
    assert_allclose(grad, 0.0, atol=1e-12)


def test_quadratic_rejects_asymmetric():
    with pytest.raises(ValueError):
        QuadraticObjective(np.array([[1.0, 2.0], [0.0, 1.0]]), np.zeros(2))


def test_random_spd_condition():
    obj = QuadraticObjective.random_spd(10, condition=1e3, seed=4)
    eigenvalues = np.linalg.eigvalsh(obj.get_h())
    assert eigenvalues[0] == pytest.approx(1.0, rel=1e-9)
    assert eigenvalues[-1] == pytest.approx(1e3, rel=1e-9)
    again = QuadraticObjective.random_spd(10, condition=1e3, seed=4)
    assert_allclose(again.initial_point(), obj.initial_point())


def test_quadratic_true_pairs():
    H = np.diag([1.0, 3.0])
    (s, y), = quadratic_true_pairs(H, [np.array([1.0, 1.0])])
    assert_allclose(y, [1.0, 3.0])


def test_rosenbrock():
    obj = RosenbrockObjective(2)
    w0 = obj.initial_point()
    assert_allclose(w0, [-1.2, 1.0])
    assert obj.full(w0)[0] == pytest.approx(24.2)
    loss, grad = obj.full(np.ones(2))
    assert loss == 0.0
    assert_allclose(grad, 0.0)
    assert fd_check(obj, w0, coordinates=[0, 1]) < 1e-6
    with pytest.raises(ValueError):
        RosenbrockObjective(1)


def test_indices_are_validated(rng):
    obj = _mlp(rng)
    w = obj.initial_point(0)
    with pytest.raises(IndexOutOfRangeError):
        obj.eval_batch(w, [0, 20])
    with pytest.raises(IndexOutOfRangeError):
        obj.eval_batch(w, [])
    with pytest.raises(ValueError):
        obj.eval_batch(np.zeros(3), [0])


def test_duplicate_indices_count_with_multiplicity(rng):
    obj = _mlp(rng)
    w = obj.initial_point(1)
    loss0, grad0 = obj.eval_batch(w, [0])
    loss1, grad1 = obj.eval_batch(w, [1])
    loss, grad = eval_batch(obj, w, [1, 0, 0])
    assert loss == pytest.approx((2.0 * loss0 + loss1) / 3.0, rel=1e-12)
    assert_allclose(grad, (2.0 * grad0 + grad1) / 3.0, atol=1e-14)


def test_batch_order_does_not_matter(rng):
    obj = _mlp(rng)
    w = obj.initial_point(2)
    first = obj.eval_batch(w, [5, 2, 9, 0])
    second = obj.eval_batch(w, [0, 9, 2, 5])
    assert first[0] == second[0]
    assert np.array_equal(first[1], second[1])


def test_zero_output_layer_gives_uniform_prediction(rng):
    obj = _mlp(rng, classes=10)
    loss, _ = obj.full(obj.initial_point(0, zero_output=True))
    assert loss == pytest.approx(np.log(10.0), rel=1e-12)


def test_mlp_parameter_layout(rng):
    obj = _mlp(rng, features=8, hidden=(5, 4), classes=3)
    assert obj.get_layer_sizes() == [8, 5, 4, 3]
    assert obj.param_dim == 8 * 5 + 5 + 5 * 4 + 4 + 4 * 3 + 3
    layers = obj.unflatten(np.arange(obj.param_dim, dtype=np.float64))
    assert [weights.shape for weights, _ in layers] == [(8, 5), (5, 4), (4, 3)]
    assert layers[0][1][0] == 40.0


def test_mlp_metrics(rng):
    obj = _mlp(rng)
    loss, accuracy = obj.metrics(obj.initial_point(0))
    assert loss == pytest.approx(obj.full(obj.initial_point(0))[0], rel=1e-12)
    assert 0.0 <= accuracy <= 100.0
    assert QuadraticObjective(np.eye(2), np.zeros(2)).metrics(np.ones(2)) == (1.0, None)


def test_sample_losses_average_to_batch_loss(rng):
    obj = _mlp(rng)
    w = obj.initial_point(3)
    assert np.mean(obj.sample_losses(w, [1, 4, 7])) == pytest.approx(obj.eval_batch(w, [1, 4, 7])[0])


def test_mlp_gradient_matches_finite_differences(rng):
    obj = _mlp(rng, hidden=(6, 5))
    for seed in range(20):
        w = obj.initial_point(seed)
        assert fd_check(obj, w, seed=seed) < 1e-5


def test_corrupted_gradient_is_detected(rng):
    obj = _mlp(rng)
    w = obj.initial_point(0)
    _, grad = obj.full(w)
    corrupted = grad.copy()
    corrupted[3] += 0.1 * max(1.0, abs(grad[3]))
    assert fd_check(obj, w, grad=corrupted, coordinates=[3]) > 1e-3
    assert fd_check(obj, w, grad=grad, coordinates=[3]) < 1e-5


def test_fd_check_rejects_bad_step(rng):
    with pytest.raises(ValueError):
        fd_check(_mlp(rng), np.zeros(_mlp(rng).param_dim), h=0.0)
