import logging

import numpy as np

from TrustQN.exceptions import DimensionMismatchError, EmptyBufferError, ZeroStepError

GRAM_DRIFT_TOLERANCE = 1e-12


def accept_bfgs_pair(s, y, tau=1e-2):
    """
    The function `accept_bfgs_pair` applies the BFGS curvature condition to a candidate pair.

    :param s: The `s` parameter is the parameter step w_t - w_k
    :param y: The `y` parameter is the matching gradient difference
    :param tau: The `tau` parameter is the curvature threshold, defaults to 1e-2 (optional)
    :return: True when s^T y > tau * ||s||^2. Raises `ZeroStepError` for a zero step.
    """
    s = np.asarray(s, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    s_norm_sq = float(s @ s)
    if s_norm_sq == 0.0:
        raise ZeroStepError("Curvature pair has a zero step.")
    return bool(float(s @ y) > tau * s_norm_sq)


def accept_sr1_pair(s, y, bs, tau=1e-8):
    """
    The function `accept_sr1_pair` applies the SR1 skip rule to a candidate pair.

    :param s: The `s` parameter is the parameter step
    :param y: The `y` parameter is the gradient difference
    :param bs: The `bs` parameter is the current quasi-Newton matrix applied to `s`
    :param tau: The `tau` parameter is the relative denominator threshold, defaults to 1e-8 (optional)
    :return: True when |s^T (y - Bs)| >= tau * ||s|| * ||y - Bs|| and y differs from Bs.
    """
    s = np.asarray(s, dtype=np.float64)
    residual = np.asarray(y, dtype=np.float64) - np.asarray(bs, dtype=np.float64)
    s_norm = float(np.linalg.norm(s))
    if s_norm == 0.0:
        raise ZeroStepError("Curvature pair has a zero step.")
    residual_norm = float(np.linalg.norm(residual))
    if residual_norm == 0.0:
        return False
    return bool(abs(float(s @ residual)) >= tau * s_norm * residual_norm)


def split_gram(buf):
    """
    The function `split_gram` splits S^T Y into its strictly lower, diagonal and strictly upper parts.

    :param buf: The `buf` parameter is a nonempty `CurvaturePairBuffer`
    :return: a tuple `(lower, diagonal, upper)` whose sum is S^T Y exactly.
    """
    if len(buf) == 0:
        raise EmptyBufferError("Cannot split the Gram matrix of an empty buffer.")
    gram = buf.get_gram_sy()
    return np.tril(gram, -1), np.diag(np.diag(gram)), np.triu(gram, 1)


class CurvaturePairBuffer:
    """
    Keeps the `capacity` most recent curvature pairs as the columns of S and Y, oldest first,
    together with the Gram blocks S^T Y and S^T S.
    """

    def __init__(self, capacity, dim, debug=False):
        """
        The function initializes an empty pair buffer.

        :param capacity: The `capacity` parameter is the memory size l, the number of pairs kept
        :param dim: The `dim` parameter is the parameter dimension n of every stored vector
        :param debug: The `debug` parameter recomputes the Gram blocks from scratch after every push and
        logs any drift from the incremental update, defaults to False (optional)
        """
        if capacity < 1:
            raise ValueError(f"Buffer capacity must be positive, got {capacity}.")
        self.__logger = logging.getLogger(__name__)
        self.__capacity = int(capacity)
        self.__dim = int(dim)
        self.__debug = debug
        self.__s = np.zeros((self.__dim, 0))
        self.__y = np.zeros((self.__dim, 0))
        self.__gram_sy = np.zeros((0, 0))
        self.__gram_ss = np.zeros((0, 0))

    def __len__(self):
        return self.__s.shape[1]

    def get_capacity(self):
        return self.__capacity

    def get_dim(self):
        return self.__dim

    def get_s(self):
        return self.__s.copy()

    def get_y(self):
        return self.__y.copy()

    def get_gram_sy(self):
        return self.__gram_sy.copy()

    def get_gram_ss(self):
        return self.__gram_ss.copy()

    def newest_pair(self):
        if len(self) == 0:
            raise EmptyBufferError("The buffer holds no pairs.")
        return self.__s[:, -1].copy(), self.__y[:, -1].copy()

    def copy(self):
        clone = CurvaturePairBuffer(self.__capacity, self.__dim, self.__debug)
        clone.__s = self.__s.copy()
        clone.__y = self.__y.copy()
        clone.__gram_sy = self.__gram_sy.copy()
        clone.__gram_ss = self.__gram_ss.copy()
        return clone

    def _verify_vector(self, name, vector):
        vector = np.asarray(vector, dtype=np.float64)
        if vector.shape != (self.__dim,):
            raise DimensionMismatchError(
                f"Vector '{name}' has shape {vector.shape}, expected ({self.__dim},).")
        return vector

    def push_pair(self, s, y):
        """
        The function `push_pair` appends an accepted pair, evicting the oldest one when the buffer is
        full. Only one new row and column of each Gram block is computed.

        :param s: The `s` parameter is the step of an accepted pair
        :param y: The `y` parameter is the gradient difference of the same pair
        :return: The method `push_pair` is returning `self`.
        """
        s = self._verify_vector('s', s)
        y = self._verify_vector('y', y)
        if len(self) == self.__capacity:
            self.pop_oldest()

        sy_row = s @ self.__y
        sy_col = self.__s.T @ y
        ss_col = self.__s.T @ s
        count = len(self) + 1

        gram_sy = np.empty((count, count))
        gram_sy[:-1, :-1] = self.__gram_sy
        gram_sy[-1, :-1] = sy_row
        gram_sy[:-1, -1] = sy_col
        gram_sy[-1, -1] = s @ y

        gram_ss = np.empty((count, count))
        gram_ss[:-1, :-1] = self.__gram_ss
        gram_ss[-1, :-1] = ss_col
        gram_ss[:-1, -1] = ss_col
        gram_ss[-1, -1] = s @ s

        self.__s = np.column_stack([self.__s, s])
        self.__y = np.column_stack([self.__y, y])
        self.__gram_sy = gram_sy
        self.__gram_ss = gram_ss

        if self.__debug:
            self._check_gram()
        return self

    def pop_oldest(self):
        """
        The function `pop_oldest` drops the oldest stored pair.

        :return: the removed `(s, y)` pair.
        """
        if len(self) == 0:
            raise EmptyBufferError("The buffer holds no pairs.")
        s, y = self.__s[:, 0].copy(), self.__y[:, 0].copy()
        self.__s = self.__s[:, 1:]
        self.__y = self.__y[:, 1:]
        self.__gram_sy = self.__gram_sy[1:, 1:]
        self.__gram_ss = self.__gram_ss[1:, 1:]
        return s, y

    def _check_gram(self):
        recomputed_sy = self.__s.T @ self.__y
        recomputed_ss = self.__s.T @ self.__s
        for name, cached, fresh in (("S^T Y", self.__gram_sy, recomputed_sy),
                                    ("S^T S", self.__gram_ss, recomputed_ss)):
            scale = max(1.0, float(np.abs(fresh).max()))
            drift = float(np.abs(cached - fresh).max())
            if drift > GRAM_DRIFT_TOLERANCE * scale:
                self.__logger.warning("Cached %s drifted by %.3e, replacing it.", name, drift)
        self.__gram_sy = recomputed_sy
        self.__gram_ss = recomputed_ss
