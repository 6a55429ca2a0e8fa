"""
Training loops: deterministic and stochastic limited-memory trust-region methods plus an Adam baseline.
Every loop returns one `MetricsRecord` per iteration.
"""
import logging

import numpy as np

from TrustQN.curvature import CurvaturePairBuffer, accept_bfgs_pair, accept_sr1_pair
from TrustQN.exceptions import (LinearAlgebraError, NonFiniteLossError, NumericalFailureError,
                                SingularMiddleError, SingularShiftError, TrustQNError,
                                ZeroPredictionError)
from TrustQN.hessian import HessianKind, build, identity, select_gamma
from TrustQN.models import MetricsRecord
from TrustQN.sampling import (EvalPoint, ChunkEval, aggregate, carry_cache, make_rng, plan_epoch,
                              plain_batches)
from TrustQN.subproblem import POLE_TOLERANCE, adjust_radius, rho, solve_subproblem
from TrustQN.utills import WallClock

RETRYABLE_ERRORS = (LinearAlgebraError, SingularMiddleError, SingularShiftError)


class QuasiNewtonModel:
    """
    Owns the curvature pairs, gamma and the compact matrix of one trust-region run.
    """

    def __init__(self, kind, dim, memory, gamma0, tau, factorization='qr', debug=False):
        self.__logger = logging.getLogger(__name__)
        self.__kind = kind
        self.__buffer = CurvaturePairBuffer(memory, dim, debug=debug)
        self.__gamma = float(gamma0)
        self.__tau = tau
        self.__factorization = factorization
        self.__hessian = identity(kind, gamma0, dim)

    def get_kind(self):
        return self.__kind

    def get_gamma(self):
        return self.__gamma

    def get_hessian(self):
        return self.__hessian

    def get_buffer(self):
        return self.__buffer

    def pairs_stored(self):
        return len(self.__buffer)

    def _rebuild(self):
        if len(self.__buffer):
            self.__gamma = select_gamma(self.__kind, self.__buffer).gamma
        self.__hessian = build(self.__kind, self.__buffer, self.__gamma)

    def scaled_gradient_step(self, g, delta):
        """
        The function `scaled_gradient_step` returns the first step p = -delta g / ||g|| and its model
        value under B_0 = gamma0 * I. A zero gradient gives the null step with model value 0.
        """
        g_norm = float(np.linalg.norm(g))
        if g_norm == 0.0:
            return np.zeros_like(g), 0.0
        p = -delta * g / g_norm
        return p, float(g @ p + 0.5 * self.__gamma * (p @ p))

    def direction(self, g, delta):
        """
        The function `direction` solves the trust-region subproblem, dropping the oldest pair and
        rebuilding whenever the compact factors turn out numerically rank deficient.

        :param g: The `g` parameter is the current gradient
        :param delta: The `delta` parameter is the current radius
        :return: a `SubproblemSolution`.
        """
        while True:
            try:
                return solve_subproblem(self.__hessian, g, delta, self.__factorization)
            except RETRYABLE_ERRORS as e:
                if len(self.__buffer) == 0:
                    raise NumericalFailureError(f"Subproblem failed with an empty memory: {e}")
                self.__logger.warning("Factorization failed (%s); dropping the oldest of %d pairs.",
                                      e, len(self.__buffer))
                self.__buffer.pop_oldest()
                self._rebuild()

    def update(self, s, y):
        """
        The function `update` applies the skip rule of the update kind to a new pair and, when it
        passes, stores it and rebuilds gamma and the compact matrix.

        :return: True when the pair was stored.
        """
        if self.__kind is HessianKind.BFGS:
            accepted = accept_bfgs_pair(s, y, self.__tau)
            self.__logger.debug("Pair test s^T y=%.6e tau||s||^2=%.6e accepted=%s",
                                float(s @ y), self.__tau * float(s @ s), accepted)
        else:
            bs = self.__hessian.apply(s)
            accepted = accept_sr1_pair(s, y, bs, self.__tau)
            self.__logger.debug("Pair test |s^T(y-Bs)|=%.6e tau||s|| ||y-Bs||=%.6e accepted=%s",
                                abs(float(s @ (y - bs))),
                                self.__tau * np.linalg.norm(s) * np.linalg.norm(y - bs), accepted)
        if accepted:
            self.__buffer.push_pair(s, y)
            self._rebuild()
        return accepted


class Trainer:
    def __init__(self, cfg, obj, test_obj=None, w0=None):
        """
        The function initializes a training run.

        :param cfg: The `cfg` parameter is the `TrainConfig` of the run
        :param obj: The `obj` parameter is the training `ObjectiveOracle`
        :param test_obj: The `test_obj` parameter is an optional held-out objective for test metrics
        :param w0: The `w0` parameter overrides the objective's seeded starting point (optional)
        """
        self.__logger = logging.getLogger(__name__)
        self._cfg = cfg
        self._obj = obj
        self._test_obj = test_obj
        self._w = obj.initial_point(cfg.seed) if w0 is None else np.array(w0, dtype=np.float64)
        self._records = []
        self._clock = None
        self._stop_reason = None
        self._last_grad_norm = None

    def _handle_error(self, operation, error):
        """
        The function `_handle_error` logs an error message and raises the error.

        :param operation: The `operation` parameter names the step of the run that failed
        :param error: The `error` parameter is the exception raised by that step
        """
        self.__logger.error("Error during %s: %s", operation, error)
        raise error

    def get_weights(self):
        return self._w.copy()

    def get_records(self):
        return list(self._records)

    def get_stop_reason(self):
        return self._stop_reason

    def get_last_grad_norm(self):
        return self._last_grad_norm

    def _check_finite(self, where, loss, grad=None):
        if not np.isfinite(loss) or (grad is not None and not np.all(np.isfinite(grad))):
            self._handle_error(where, NonFiniteLossError(
                f"Non-finite loss or gradient at iteration {len(self._records)} ({where}).",
                self._records))

    def _display(self, iteration, last):
        return last or iteration % self._cfg.display_every == 0

    def _record(self, iteration, epoch, display, delta=None, rho_value=None, gamma=None,
                accepted=True, pairs_stored=0, grad_norm=None):
        train_loss = train_acc = test_loss = test_acc = None
        if display:
            train_loss, train_acc = self._obj.metrics(self._w)
            if self._test_obj is not None:
                test_loss, test_acc = self._test_obj.metrics(self._w)
        record = MetricsRecord(
            iteration=iteration, epoch=epoch, wall_time_s=self._clock.elapsed(),
            train_loss=train_loss, train_acc=train_acc, test_loss=test_loss, test_acc=test_acc,
            delta=delta, rho=rho_value, gamma=gamma, accepted=bool(accepted),
            pairs_stored=pairs_stored, grad_norm=grad_norm)
        self._records.append(record)
        return record

    def run(self):
        self._clock = WallClock()
        try:
            self._train()
        except TrustQNError as e:
            if isinstance(e, NonFiniteLossError):
                e.records = list(self._records)
                raise
            self._handle_error("training", e)
        self.__logger.info("Training stopped after %d iterations: %s", len(self._records),
                           self._stop_reason)
        return self.get_records()

    def _train(self):
        raise NotImplementedError


class TrustRegionTrainer(Trainer):
    def __init__(self, cfg, obj, test_obj=None, w0=None):
        super().__init__(cfg, obj, test_obj, w0)
        self.__logger = logging.getLogger(__name__)
        kind = HessianKind.SR1 if cfg.uses_sr1 else HessianKind.BFGS
        self._model = QuasiNewtonModel(kind, obj.param_dim, cfg.memory, cfg.gamma0, cfg.resolved_tau(),
                                       cfg.factorization)
        self._state = cfg.trust_region_state()

    def get_model(self):
        return self._model

    def get_state(self):
        return self._state

    def _budget_left(self):
        cap = self._cfg.max_iterations
        return cap is None or len(self._records) < cap

    def _gradient_converged(self, g_norm):
        self._last_grad_norm = g_norm
        return self._cfg.grad_stop and g_norm <= self._cfg.grad_tol

    def _step(self, iteration, g):
        """
        The function `_step` computes the step of one iteration.

        :return: a tuple `(p, q_value)`.
        """
        if not np.any(g):
            return np.zeros_like(g), 0.0
        if iteration == 0:
            return self._model.scaled_gradient_step(g, self._state.delta)
        solution = self._model.direction(g, self._state.delta)
        return solution.p, solution.q_value

    def _conclude(self, f_k, f_t, q_value, p, y):
        """
        The function `_conclude` decides acceptance, updates the radius and offers the pair to the model.

        :return: a tuple `(rho_value, accepted)`.
        """
        if not np.any(p):
            self.__logger.info("Zero gradient; keeping the point and the radius.")
            return 0.0, False
        if q_value >= POLE_TOLERANCE:
            # rho is only defined for Q(p) < 0
            self.__logger.warning("Model value Q(p)=%.6e is not negative; rejecting the step.", q_value)
            rho_value = 0.0
        else:
            try:
                rho_value = rho(f_k, f_t, q_value)
            except ZeroPredictionError as e:
                self.__logger.warning("%s; rejecting the step.", e)
                rho_value = 0.0
        accepted = self._state.accepts(rho_value)
        if accepted:
            self._w = self._w + p
        self._state = adjust_radius(self._state, rho_value, float(np.linalg.norm(p)))
        pair_stored = self._model.update(p, y)
        self.__logger.debug(
            "rho=%.6e accepted=%s delta=%.6e gamma=%.6e pair_stored=%s pairs=%d",
            rho_value, accepted, self._state.delta, self._model.get_gamma(), pair_stored,
            self._model.pairs_stored())
        return rho_value, accepted


class DeterministicTrainer(TrustRegionTrainer):
    """Full-batch L-BFGS-TR / L-SR1-TR. Every iteration counts as one epoch."""

    def __init__(self, cfg, obj, test_obj=None, w0=None):
        super().__init__(cfg, obj, test_obj, w0)
        self.__logger = logging.getLogger(__name__)

    def _train(self):
        f_k, g_k = self._obj.full(self._w)
        self._check_finite("initial evaluation", f_k, g_k)
        iteration = 0
        while True:
            epoch = iteration + 1
            if self._gradient_converged(float(np.linalg.norm(g_k))):
                self._stop_reason = "gradient"
                return
            if epoch > self._cfg.epoch_max or not self._budget_left():
                self._stop_reason = "budget"
                return

            p, q_value = self._step(iteration, g_k)
            f_t, g_t = self._obj.full(self._w + p)
            self._check_finite("trial evaluation", f_t, g_t)
            rho_value, accepted = self._conclude(f_k, f_t, q_value, p, g_t - g_k)
            if accepted:
                f_k, g_k = f_t, g_t

            last = epoch == self._cfg.epoch_max
            self._record(iteration, epoch, self._display(iteration, last), self._state.delta,
                         rho_value, self._model.get_gamma(), accepted, self._model.pairs_stored(),
                         self._last_grad_norm)
            self.__logger.info("Epoch %d: f=%.6e ||g||=%.3e delta=%.3e", epoch, f_k,
                               self._last_grad_norm, self._state.delta)
            iteration += 1


class StochasticTrainer(TrustRegionTrainer):
    """
    Overlapping multi-batch sL-BFGS-TR / sL-SR1-TR. Each epoch draws a fresh plan and bootstraps its
    first batch from two chunks; afterwards every batch reuses the chunk it shares with its predecessor.
    """

    def __init__(self, cfg, obj, test_obj=None, w0=None, plan_source=plan_epoch):
        super().__init__(cfg, obj, test_obj, w0)
        self.__logger = logging.getLogger(__name__)
        self.__plan_source = plan_source
        self.__rng = make_rng(cfg.seed)
        self.__point = 0
        self.__fresh_evaluations = []

    def get_fresh_evaluations(self):
        """Fresh chunk evaluations performed in each completed or interrupted epoch."""
        return list(self.__fresh_evaluations)

    def _evaluate(self, plan, chunk_id, w, at_point, point_key):
        loss, grad = self._obj.eval_batch(w, plan.chunk(chunk_id))
        self.__fresh_evaluations[-1] += 1
        self._check_finite(f"{at_point.value}-point evaluation of chunk {chunk_id}", loss, grad)
        return ChunkEval(chunk_id, loss, grad, at_point, point_key)

    def _train(self):
        iteration = 0
        for epoch in range(1, self._cfg.epoch_max + 1):
            plan = self.__plan_source(self._obj.sample_count, self._cfg.overlap, self.__rng)
            self.__fresh_evaluations.append(0)
            carried = None
            for b in range(plan.batch_count):
                if not self._budget_left():
                    self._stop_reason = "budget"
                    return
                current = {}
                if carried is None:
                    current[b] = self._evaluate(plan, b, self._w, EvalPoint.CURRENT, self.__point)
                else:
                    current[b] = carried.relabel(EvalPoint.CURRENT, self.__point)
                for chunk_id in plan.batch_chunk_ids(b)[1:]:
                    current[chunk_id] = self._evaluate(plan, chunk_id, self._w, EvalPoint.CURRENT,
                                                       self.__point)
                f_k, g_k = aggregate(plan, b, current)

                if self._gradient_converged(float(np.linalg.norm(g_k))):
                    self._stop_reason = "gradient"
                    return

                p, q_value = self._step(iteration, g_k)
                w_t = self._w + p
                trial = {chunk_id: self._evaluate(plan, chunk_id, w_t, EvalPoint.TRIAL, self.__point + 1)
                         for chunk_id in plan.batch_chunk_ids(b)}
                f_t, g_t = aggregate(plan, b, trial)
                rho_value, accepted = self._conclude(f_k, f_t, q_value, p, g_t - g_k)
                if accepted:
                    self.__point += 1

                if b + 1 < plan.batch_count:
                    carried = carry_cache(plan, b, accepted, trial, current)
                last = epoch == self._cfg.epoch_max and b + 1 == plan.batch_count
                self._record(iteration, epoch, self._display(iteration, last), self._state.delta,
                             rho_value, self._model.get_gamma(), accepted, self._model.pairs_stored(),
                             self._last_grad_norm)
                iteration += 1
            train_loss = self._records[-1].train_loss if self._records else None
            self.__logger.info("Epoch %d/%d done after %d iterations: train loss %s, delta %.3e",
                               epoch, self._cfg.epoch_max, iteration, train_loss, self._state.delta)
        self._stop_reason = "budget"


class AdamTrainer(Trainer):
    """Bias-corrected Adam over non-overlapping shuffled batches of size 2 * overlap."""

    def __init__(self, cfg, obj, test_obj=None, w0=None, batch_source=plain_batches):
        super().__init__(cfg, obj, test_obj, w0)
        self.__logger = logging.getLogger(__name__)
        self.__batch_source = batch_source
        self.__rng = make_rng(cfg.seed)

    def _train(self):
        cfg = self._cfg
        m = np.zeros_like(self._w)
        v = np.zeros_like(self._w)
        step = 0
        for epoch in range(1, cfg.epoch_max + 1):
            batches = self.__batch_source(self._obj.sample_count, 2 * cfg.overlap, self.__rng)
            for position, batch in enumerate(batches):
                if cfg.max_iterations is not None and step >= cfg.max_iterations:
                    self._stop_reason = "budget"
                    return
                loss, grad = self._obj.eval_batch(self._w, batch)
                self._check_finite("batch evaluation", loss, grad)
                self._last_grad_norm = float(np.linalg.norm(grad))
                step += 1
                m = cfg.adam_beta1 * m + (1.0 - cfg.adam_beta1) * grad
                v = cfg.adam_beta2 * v + (1.0 - cfg.adam_beta2) * grad * grad
                m_hat = m / (1.0 - cfg.adam_beta1 ** step)
                v_hat = v / (1.0 - cfg.adam_beta2 ** step)
                self._w = self._w - cfg.adam_lr * m_hat / (np.sqrt(v_hat) + cfg.adam_eps)
                last = epoch == cfg.epoch_max and position + 1 == len(batches)
                self._record(step - 1, epoch, self._display(step - 1, last),
                             grad_norm=self._last_grad_norm)
            self.__logger.info("Epoch %d/%d done after %d steps", epoch, cfg.epoch_max, step)
        self._stop_reason = "budget"


def make_trainer(cfg, obj, test_obj=None, w0=None):
    if cfg.method == "adam":
        return AdamTrainer(cfg, obj, test_obj, w0)
    if cfg.is_stochastic:
        return StochasticTrainer(cfg, obj, test_obj, w0)
    return DeterministicTrainer(cfg, obj, test_obj, w0)


def train_deterministic(cfg, obj, test_obj=None, w0=None):
    if cfg.is_stochastic or cfg.method == "adam":
        raise ValueError(f"Method '{cfg.method}' is not a deterministic trust-region method.")
    return DeterministicTrainer(cfg, obj, test_obj, w0).run()


def train_stochastic(cfg, obj, plan_source=plan_epoch, test_obj=None, w0=None):
    if not cfg.is_stochastic:
        raise ValueError(f"Method '{cfg.method}' is not a stochastic trust-region method.")
    return StochasticTrainer(cfg, obj, test_obj, w0, plan_source).run()


def train_adam(cfg, obj, batch_source=plain_batches, test_obj=None, w0=None):
    if cfg.method != "adam":
        raise ValueError(f"Method '{cfg.method}' is not adam.")
    return AdamTrainer(cfg, obj, test_obj, w0, batch_source).run()
