"""Exception hierarchy shared by all qksvm modules."""


class QksvmError(Exception):
    """Base class for every error raised by this package."""


# dataset I/O
class BadMagic(QksvmError):
    pass


class TruncatedPayload(QksvmError):
    pass


class DimensionOverflow(QksvmError):
    pass


class IoError(QksvmError):
    pass


class DtypeUnsupported(QksvmError):
    pass


class ShapeMismatch(QksvmError):
    pass


# distillation
class EmptyInput(QksvmError):
    pass


class KExceedsPopulation(QksvmError):
    pass


# reduction
class DimError(QksvmError):
    pass


class NotFitted(QksvmError):
    pass


# circuits and backends
class EmptyFeatureVector(QksvmError):
    pass


class QubitCountMismatch(QksvmError):
    pass


class QubitCapExceeded(QksvmError):
    pass


class SizeMismatch(QksvmError):
    pass


class MemoryBudgetExceeded(QksvmError):
    pass


class TooLargeForExhaustive(QksvmError):
    pass


class PathInvalid(QksvmError):
    pass


# SVM
class SingleClassInput(QksvmError):
    pass


class NonFiniteKernel(QksvmError):
    pass


# evaluation
class LengthMismatch(QksvmError):
    pass


class ClassTooSmall(QksvmError):
    pass


# CLI / pipeline
class ConfigInvalid(QksvmError):
    pass


class MissingArtifact(QksvmError):
    pass


class StageFailure(QksvmError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
