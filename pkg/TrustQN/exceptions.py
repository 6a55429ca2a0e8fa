class TrustQNError(Exception):
    pass


# dense kernels
class LinearAlgebraError(TrustQNError):
    pass


class RankDeficientError(LinearAlgebraError):
    pass


class NotPositiveDefiniteError(LinearAlgebraError):
    pass


class NoConvergenceError(LinearAlgebraError):
    pass


class SingularMatrixError(LinearAlgebraError):
    pass


# curvature store
class CurvatureStoreError(TrustQNError):
    pass


class ZeroStepError(CurvatureStoreError):
    pass


class DimensionMismatchError(CurvatureStoreError):
    pass


class EmptyBufferError(CurvatureStoreError):
    pass


# compact hessian
class CompactHessianError(TrustQNError):
    pass


class DegenerateQuotientError(CompactHessianError):
    pass


class SingularMiddleError(CompactHessianError):
    pass


# trust-region subproblem
class SubproblemError(TrustQNError):
    pass


class PoleHitError(SubproblemError):
    pass


class MaxIterationsError(SubproblemError):
    pass


class SingularShiftError(SubproblemError):
    pass


class ZeroPredictionError(SubproblemError):
    pass


class HardCaseEigenvectorNotFoundError(SubproblemError):
    pass


# objectives and sampling
class ObjectiveError(TrustQNError):
    pass


class IndexOutOfRangeError(ObjectiveError):
    pass


class SamplingError(TrustQNError):
    pass


class TooFewSamplesError(SamplingError):
    pass


class PointMismatchError(SamplingError):
    pass


class MissingEvalError(SamplingError):
    pass


# training
class TrainingError(TrustQNError):
    pass


class NonFiniteLossError(TrainingError):
    def __init__(self, message, records=None):
        super().__init__(message)
        self.records = list(records or [])


class NumericalFailureError(TrainingError):
    pass


# configuration
class ConfigError(TrustQNError):
    pass


class ConfigInvalidError(ConfigError):
    pass


class ConfigTypeError(ConfigInvalidError):
    pass


class ConfigValueError(ConfigInvalidError):
    pass


# datasets
class DatasetError(TrustQNError):
    pass


class DatasetMissingError(DatasetError):
    pass


class BadMagicError(DatasetError):
    pass


class TruncatedFileError(DatasetError):
    pass


class CountMismatchError(DatasetError):
    pass
