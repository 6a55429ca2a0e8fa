"""
Objectives exposing subsampled loss and gradient:

    f^J(w) = (1/|J|) sum_{i in J} L_i(w),    g^J(w) = gradient of f^J at w
"""
import abc

import numpy as np
from scipy.special import logsumexp

from TrustQN.exceptions import IndexOutOfRangeError


class ObjectiveOracle(abc.ABC):
    """A finite-sum objective with N samples over an n-dimensional parameter vector."""

    @property
    @abc.abstractmethod
    def param_dim(self):
        pass

    @property
    @abc.abstractmethod
    def sample_count(self):
        pass

    @abc.abstractmethod
    def _eval(self, w, indices):
        pass

    @abc.abstractmethod
    def initial_point(self, seed=0):
        pass

    def all_indices(self):
        return np.arange(self.sample_count)

    def _verify_indices(self, indices):
        indices = np.asarray(indices, dtype=np.int64).ravel()
        if indices.size == 0:
            raise IndexOutOfRangeError("Index set is empty.")
        if indices.min() < 0 or indices.max() >= self.sample_count:
            raise IndexOutOfRangeError(
                f"Indices span [{indices.min()}, {indices.max()}], valid range is [0, {self.sample_count}).")
        return np.sort(indices, kind='stable')

    def eval_batch(self, w, indices):
        """
        The function `eval_batch` averages loss and gradient over a multiset of sample indices.

        :param w: The `w` parameter is the parameter vector
        :param indices: The `indices` parameter is a nonempty collection of indices in [0, N); duplicates
        count with their multiplicity
        :return: a tuple `(loss, grad)`. Indices are summed in ascending order so the result is
        reproducible bit for bit.
        """
        w = np.asarray(w, dtype=np.float64)
        if w.shape != (self.param_dim,):
            raise ValueError(f"Parameter vector has shape {w.shape}, expected ({self.param_dim},).")
        loss, grad = self._eval(w, self._verify_indices(indices))
        return float(loss), grad

    def full(self, w):
        return self.eval_batch(w, self.all_indices())

    def metrics(self, w, indices=None):
        """Returns `(loss, accuracy_percent)`; accuracy is None for objectives without labels."""
        indices = self.all_indices() if indices is None else indices
        loss, _ = self.eval_batch(w, indices)
        return loss, None


def eval_batch(obj, w, indices):
    return obj.eval_batch(w, indices)


class QuadraticObjective(ObjectiveOracle):
    """
    F(w) = 0.5 w^T H w + g^T w. Every one of the `sample_count` samples carries the same quadratic, so
    every subsample is noise free.
    """

    def __init__(self, H, g, sample_count=1, w0=None):
        H = np.asarray(H, dtype=np.float64)
        if H.ndim != 2 or H.shape[0] != H.shape[1]:
            raise ValueError(f"H must be square, got shape {H.shape}.")
        if not np.allclose(H, H.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(H).max())):
            raise ValueError("H must be symmetric.")
        self.__h = 0.5 * (H + H.T)
        self.__g = np.asarray(g, dtype=np.float64).copy()
        self.__sample_count = int(sample_count)
        self.__w0 = None if w0 is None else np.asarray(w0, dtype=np.float64).copy()

    @classmethod
    def random_spd(cls, dim, condition=1e3, seed=0, sample_count=1):
        """SPD H with eigenvalues log-spaced in [1, condition] and a random linear term."""
        rng = np.random.default_rng(seed)
        basis, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
        eigenvalues = np.logspace(0.0, np.log10(condition), dim)
        H = (basis * eigenvalues) @ basis.T
        return cls(0.5 * (H + H.T), rng.standard_normal(dim), sample_count,
                   rng.standard_normal(dim))

    @property
    def param_dim(self):
        return self.__g.shape[0]

    @property
    def sample_count(self):
        return self.__sample_count

    def get_h(self):
        return self.__h.copy()

    def get_g(self):
        return self.__g.copy()

    def minimizer(self):
        return np.linalg.solve(self.__h, -self.__g)

    def initial_point(self, seed=0):
        if self.__w0 is not None:
            return self.__w0.copy()
        return np.random.default_rng(seed).standard_normal(self.param_dim)

    def _eval(self, w, indices):
        hw = self.__h @ w
        return 0.5 * (w @ hw) + self.__g @ w, hw + self.__g


class RosenbrockObjective(ObjectiveOracle):
    """Chained Rosenbrock function sum 100 (w_{i+1} - w_i^2)^2 + (1 - w_i)^2 as a single sample."""

    def __init__(self, dim=2):
        if dim < 2:
            raise ValueError(f"Rosenbrock needs at least two coordinates, got {dim}.")
        self.__dim = int(dim)

    @property
    def param_dim(self):
        return self.__dim

    @property
    def sample_count(self):
        return 1

    def initial_point(self, seed=0):
        w = np.ones(self.__dim)
        w[0::2] = -1.2
        return w

    def _eval(self, w, indices):
        head, tail = w[:-1], w[1:]
        ridge = tail - head ** 2
        loss = np.sum(100.0 * ridge ** 2 + (1.0 - head) ** 2)
        grad = np.zeros_like(w)
        grad[:-1] = -400.0 * head * ridge - 2.0 * (1.0 - head)
        grad[1:] += 200.0 * ridge
        return loss, grad


class MlpObjective(ObjectiveOracle):
    """
    Fully connected network with rectifier hidden layers and a softmax cross-entropy output.

    Weights are stored layer by layer as (fan_in, fan_out) matrices followed by their bias vectors, all
    flattened into one parameter vector.
    """

    def __init__(self, inputs, labels, num_classes=10, hidden_layers=(32,)):
        """
        The function initializes the network over a fixed dataset.

        :param inputs: The `inputs` parameter is an N-by-d array of features
        :param labels: The `labels` parameter holds N integer class labels in [0, num_classes)
        :param num_classes: The `num_classes` parameter is the number of softmax outputs C, defaults to 10
        (optional)
        :param hidden_layers: The `hidden_layers` parameter lists the hidden layer widths, defaults to (32,)
        (optional)
        """
        inputs = np.asarray(inputs, dtype=np.float64)
        labels = np.asarray(labels, dtype=np.int64)
        if inputs.ndim != 2 or labels.shape != (inputs.shape[0],):
            raise ValueError(f"Inputs {inputs.shape} and labels {labels.shape} do not line up.")
        if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
            raise ValueError(f"Labels must lie in [0, {num_classes}).")
        self.__inputs = inputs
        self.__labels = labels
        self.__num_classes = int(num_classes)
        self.__sizes = [inputs.shape[1], *[int(width) for width in hidden_layers], self.__num_classes]
        self.__shapes = []
        for fan_in, fan_out in zip(self.__sizes[:-1], self.__sizes[1:]):
            self.__shapes.append((fan_in, fan_out))
        self.__param_dim = sum(fan_in * fan_out + fan_out for fan_in, fan_out in self.__shapes)

    @property
    def param_dim(self):
        return self.__param_dim

    @property
    def sample_count(self):
        return self.__inputs.shape[0]

    def get_layer_sizes(self):
        return list(self.__sizes)

    def initial_point(self, seed=0, zero_output=False):
        """
        The function `initial_point` draws Glorot-uniform weights with zero biases.

        :param seed: The `seed` parameter seeds the generator, defaults to 0 (optional)
        :param zero_output: The `zero_output` parameter zeroes the last layer so every logit is equal,
        defaults to False (optional)
        :return: a flattened parameter vector.
        """
        rng = np.random.default_rng(seed)
        pieces = []
        for layer, (fan_in, fan_out) in enumerate(self.__shapes):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            weights = rng.uniform(-limit, limit, size=(fan_in, fan_out))
            if zero_output and layer == len(self.__shapes) - 1:
                weights = np.zeros_like(weights)
            pieces.extend([weights.ravel(), np.zeros(fan_out)])
        return np.concatenate(pieces)

    def unflatten(self, w):
        layers = []
        offset = 0
        for fan_in, fan_out in self.__shapes:
            weights = w[offset:offset + fan_in * fan_out].reshape(fan_in, fan_out)
            offset += fan_in * fan_out
            bias = w[offset:offset + fan_out]
            offset += fan_out
            layers.append((weights, bias))
        return layers

    def _forward(self, layers, x):
        activations = [x]
        pre_activations = []
        for depth, (weights, bias) in enumerate(layers):
            z = activations[-1] @ weights + bias
            pre_activations.append(z)
            if depth < len(layers) - 1:
                activations.append(np.maximum(z, 0.0))
        log_probs = pre_activations[-1] - logsumexp(pre_activations[-1], axis=1, keepdims=True)
        return activations, pre_activations, log_probs

    def sample_losses(self, w, indices):
        indices = self._verify_indices(indices)
        _, _, log_probs = self._forward(self.unflatten(np.asarray(w, dtype=np.float64)),
                                        self.__inputs[indices])
        return -log_probs[np.arange(indices.size), self.__labels[indices]]

    def _eval(self, w, indices):
        layers = self.unflatten(w)
        x = self.__inputs[indices]
        labels = self.__labels[indices]
        count = indices.size
        activations, pre_activations, log_probs = self._forward(layers, x)
        loss = -np.mean(log_probs[np.arange(count), labels])

        delta = np.exp(log_probs)
        delta[np.arange(count), labels] -= 1.0
        delta /= count
        grads = []
        for depth in range(len(layers) - 1, -1, -1):
            weights, _ = layers[depth]
            grads.append((activations[depth].T @ delta, delta.sum(axis=0)))
            if depth:
                delta = (delta @ weights.T) * (pre_activations[depth - 1] > 0.0)
        grad = np.concatenate([piece.ravel() for pair in reversed(grads) for piece in pair])
        return loss, grad

    def metrics(self, w, indices=None):
        indices = self.all_indices() if indices is None else self._verify_indices(indices)
        _, _, log_probs = self._forward(self.unflatten(np.asarray(w, dtype=np.float64)),
                                        self.__inputs[indices])
        labels = self.__labels[indices]
        loss = float(-np.mean(log_probs[np.arange(indices.size), labels]))
        accuracy = 100.0 * float(np.mean(np.argmax(log_probs, axis=1) == labels))
        return loss, accuracy


def fd_check(obj, w, h=1e-5, indices=None, coordinates=None, count=50, seed=0, grad=None):
    """
    The function `fd_check` compares the analytic gradient against central differences.

    :param obj: The `obj` parameter is an `ObjectiveOracle`
    :param w: The `w` parameter is the point to check at
    :param h: The `h` parameter is the difference step, defaults to 1e-5 (optional)
    :param indices: The `indices` parameter restricts the check to a subsample, defaults to all samples
    (optional)
    :param coordinates: The `coordinates` parameter lists coordinates to probe; when omitted `count`
    random coordinates are drawn with `seed` (optional)
    :param grad: The `grad` parameter overrides the analytic gradient, which is how a corrupted gradient
    is fed in (optional)
    :return: the largest relative error |a - d| / max(|a|, |d|, 1e-4) over the probed coordinates.
    """
    if not h > 0.0:
        raise ValueError(f"Difference step must be positive, got {h}.")
    w = np.asarray(w, dtype=np.float64)
    indices = obj.all_indices() if indices is None else indices
    if grad is None:
        _, grad = obj.eval_batch(w, indices)
    if coordinates is None:
        rng = np.random.default_rng(seed)
        coordinates = rng.choice(obj.param_dim, size=min(count, obj.param_dim), replace=False)
    worst = 0.0
    for coordinate in coordinates:
        step = np.zeros_like(w)
        step[coordinate] = h
        forward, _ = obj.eval_batch(w + step, indices)
        backward, _ = obj.eval_batch(w - step, indices)
        estimate = (forward - backward) / (2.0 * h)
        analytic = float(grad[coordinate])
        error = abs(analytic - estimate) / max(abs(analytic), abs(estimate), 1e-4)
        worst = max(worst, error)
    return worst


def quadratic_true_pairs(H, steps):
    """Curvature pairs (s, H s) of a quadratic."""
    H = np.asarray(H, dtype=np.float64)
    return [(np.asarray(s, dtype=np.float64), H @ np.asarray(s, dtype=np.float64)) for s in steps]
