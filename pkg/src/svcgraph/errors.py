"""Exception hierarchy.

Every error raised on purpose by the library derives from ``SvcGraphError``.
``UsageError`` subclasses map to CLI exit code 2, the rest to exit code 1.
"""


class SvcGraphError(Exception):
    pass


class UsageError(SvcGraphError):
    """Bad input supplied by the caller (config, selector, file contents)."""


class SelfEdgeError(UsageError):
    pass


class NonPositiveWeightError(UsageError):
    pass


class EmptySnapshotError(UsageError):
    pass


class MalformedLineError(UsageError):
    pass


class FormatVersionMismatch(UsageError):
    pass


class CorpusIOError(UsageError):
    pass


class ConfigError(UsageError):
    pass


class InfeasibleDensityError(UsageError):
    pass


class EmptyTrainSetError(UsageError):
    pass


class EmptyReferenceError(UsageError):
    pass


class ShapeMismatchError(UsageError):
    pass


class InvalidThresholdError(UsageError):
    pass


class RegistryMismatchError(UsageError):
    pass


class UnknownServiceError(UsageError):
    pass


class NoSuchPathError(UsageError):
    pass


class MissingEdgeError(UsageError):
    pass


class DegenerateDataError(SvcGraphError):
    def __init__(self, message, achievable_k):
        super().__init__(message)
        self.achievable_k = achievable_k


class NonFiniteError(SvcGraphError):
    pass


class DivergedError(SvcGraphError):
    pass
