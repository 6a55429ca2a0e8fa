"""
Half-overlapping multi-batch sampling.

An epoch shuffles the N sample indices and cuts them into chunks O_0, ..., O_{N_bar} of `os` indices
each plus a remainder R of N mod os indices. Batch b (0-based) is O_b U O_{b+1}; when R is nonempty
it joins the last batch. Consecutive batches share exactly one chunk, so gradient differences over a
batch can reuse one chunk evaluation from the previous iteration.
"""
import enum
from dataclasses import dataclass
from typing import Hashable, Optional, Tuple

import numpy as np

from TrustQN.exceptions import MissingEvalError, PointMismatchError, TooFewSamplesError

REMAINDER = 'R'


def make_rng(seed):
    """Counter-based generator so every stream is reproducible from its seed."""
    return np.random.Generator(np.random.Philox(seed))


@dataclass(frozen=True, eq=False)
class EpochPlan:
    sample_count: int
    overlap: int
    chunks: Tuple[np.ndarray, ...]
    remainder: np.ndarray

    @property
    def batch_count(self):
        return len(self.chunks) - 1

    @property
    def remainder_size(self):
        return int(self.remainder.size)

    def is_triple(self, b):
        return self.remainder_size > 0 and b == self.batch_count - 1

    def chunk(self, chunk_id):
        if chunk_id == REMAINDER:
            return self.remainder
        return self.chunks[chunk_id]

    def batch_chunk_ids(self, b):
        if not 0 <= b < self.batch_count:
            raise IndexError(f"Batch {b} outside [0, {self.batch_count}).")
        if self.is_triple(b):
            return (b, REMAINDER, b + 1)
        return (b, b + 1)

    def batch(self, b):
        return np.concatenate([self.chunk(chunk_id) for chunk_id in self.batch_chunk_ids(b)])

    def batch_size(self, b):
        return 2 * self.overlap + (self.remainder_size if self.is_triple(b) else 0)


def plan_epoch(N, os, rng):
    """
    The function `plan_epoch` shuffles the sample indices without replacement and slices them into
    overlap chunks.

    :param N: The `N` parameter is the number of samples
    :param os: The `os` parameter is the overlap chunk size, half of the batch size
    :param rng: The `rng` parameter is a numpy `Generator`, advanced by one permutation
    :return: an `EpochPlan` with floor(N/os) - 1 batches. Raises `TooFewSamplesError` when N < 2 * os.
    """
    if os < 1:
        raise ValueError(f"Overlap size must be positive, got {os}.")
    if N < 2 * os:
        raise TooFewSamplesError(f"{N} samples cannot fill one batch of two chunks of {os}.")
    order = rng.permutation(N)
    chunk_count = N // os
    chunks = tuple(order[i * os:(i + 1) * os] for i in range(chunk_count))
    return EpochPlan(int(N), int(os), chunks, order[chunk_count * os:])


class EvalPoint(enum.Enum):
    CURRENT = "current"
    TRIAL = "trial"


@dataclass(frozen=True, eq=False)
class ChunkEval:
    chunk_id: Hashable
    loss: float
    grad: np.ndarray
    at_point: EvalPoint
    point_key: Optional[Hashable] = None

    def relabel(self, at_point, point_key):
        return ChunkEval(self.chunk_id, self.loss, self.grad, at_point, point_key)


def _verify_same_point(*evals):
    first = evals[0]
    for other in evals[1:]:
        if other.at_point is not first.at_point or other.point_key != first.point_key:
            raise PointMismatchError(
                f"Chunk {first.chunk_id} was evaluated at {first.at_point.value}/{first.point_key!r}, "
                f"chunk {other.chunk_id} at {other.at_point.value}/{other.point_key!r}.")


def aggregate_duplex(eval_prev, eval_next):
    """
    The function `aggregate_duplex` combines two equally sized chunks into a batch value with weight 1/2
    each.

    :return: a tuple `(loss, grad)` equal to the average over the union of the two chunks.
    """
    _verify_same_point(eval_prev, eval_next)
    return 0.5 * (eval_prev.loss + eval_next.loss), 0.5 * (eval_prev.grad + eval_next.grad)


def aggregate_triple(eval_prev, eval_rem, eval_next, os, rs):
    """
    The function `aggregate_triple` combines two chunks and the epoch remainder into a batch value.

    :param eval_prev: The `eval_prev` parameter is the evaluation over the older chunk
    :param eval_rem: The `eval_rem` parameter is the evaluation over the remainder
    :param eval_next: The `eval_next` parameter is the evaluation over the newer chunk
    :param os: The `os` parameter is the chunk size
    :param rs: The `rs` parameter is the remainder size, at least 1
    :return: a tuple `(loss, grad)` with chunk weight os / (2 os + rs) and remainder weight
    rs / (2 os + rs).
    """
    if rs < 1:
        raise ValueError(f"Remainder size must be at least 1, got {rs}.")
    _verify_same_point(eval_prev, eval_rem, eval_next)
    weight = os / (2.0 * os + rs)
    rest = 1.0 - 2.0 * weight
    loss = weight * (eval_prev.loss + eval_next.loss) + rest * eval_rem.loss
    grad = weight * (eval_prev.grad + eval_next.grad) + rest * eval_rem.grad
    return loss, grad


def aggregate(plan, b, evals):
    """Aggregates the chunk evaluations of batch `b`, keyed by chunk id."""
    ids = plan.batch_chunk_ids(b)
    try:
        found = [evals[chunk_id] for chunk_id in ids]
    except KeyError as e:
        raise MissingEvalError(f"Batch {b} is missing the evaluation of chunk {e.args[0]}.")
    if len(found) == 3:
        return aggregate_triple(found[0], found[1], found[2], plan.overlap, plan.remainder_size)
    return aggregate_duplex(found[0], found[1])


def carry_cache(plan, b, accepted, trial_evals, current_evals):
    """
    The function `carry_cache` picks the evaluation of the chunk shared by batches b and b + 1.

    :param plan: The `plan` parameter is the epoch plan
    :param b: The `b` parameter is the 0-based batch just processed
    :param accepted: The `accepted` parameter tells whether the trial point was accepted
    :param trial_evals: The `trial_evals` parameter maps chunk ids to evaluations at the trial point
    :param current_evals: The `current_evals` parameter maps chunk ids to evaluations at the current point
    :return: the trial-point evaluation of chunk b + 1 when accepted, the current-point one otherwise.
    """
    shared = plan.batch_chunk_ids(b)[-1]
    source = trial_evals if accepted else current_evals
    if shared not in source:
        point = EvalPoint.TRIAL if accepted else EvalPoint.CURRENT
        raise MissingEvalError(f"No {point.value}-point evaluation of chunk {shared} to carry.")
    return source[shared]


def plain_batches(N, bs, rng):
    """
    Non-overlapping batches of `bs` shuffled indices; the last batch also takes the N mod bs leftovers.
    """
    if bs < 1:
        raise ValueError(f"Batch size must be positive, got {bs}.")
    order = rng.permutation(N)
    count = max(1, N // bs)
    batches = [order[i * bs:(i + 1) * bs] for i in range(count - 1)]
    batches.append(order[(count - 1) * bs:])
    return batches
