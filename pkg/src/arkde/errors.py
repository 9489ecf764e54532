"""Exception types shared across the package."""


class ArkdeError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatchError(ArkdeError, ValueError):
    """A point or matrix does not match the declared dimension."""


class ParameterError(ArkdeError, ValueError):
    """A parameter violates its admissible range."""


class ContractViolationError(ArkdeError, RuntimeError):
    """A streaming-update ordering contract was broken (e.g. out-of-order index)."""


class NumericalOverflowError(ArkdeError, FloatingPointError):
    """A simulation produced a non-finite state.

    Attributes:
        step: index of the first offending step.
    """

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class EmptyEstimatorError(ArkdeError, RuntimeError):
    """An operation requiring at least one stored sample was called on an empty estimator."""


class ResourceLimitError(ArkdeError, RuntimeError):
    """A requested grid or enumeration exceeds the documented desk-scale limits."""


class InfeasibleScheduleError(ArkdeError, ValueError):
    """A bandwidth/rate schedule request violates one of its defining inequalities.

    The message quotes the violated inequality.
    """


class UnsupportedNoiseError(ArkdeError, ValueError):
    """The noise density does not satisfy a structural property required by the operation."""


class ConfigError(ArkdeError, ValueError):
    """A run configuration failed to parse or validate.

    Attributes:
        key: the offending ``section.key`` path, when known.
        line: the offending line number, when parsing a file.
    """

    def __init__(self, message, key=None, line=None):
        super().__init__(message)
        self.key = key
        self.line = line
