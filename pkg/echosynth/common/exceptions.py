"""
Custom Exceptions
=================

Exception hierarchy for echosynth.

Exception Hierarchy:
    EchoSynthException (base)
    ├── ConfigurationError                      (exit 1)
    │   ├── ConfigError
    │   ├── InvalidConfigError
    │   ├── InvalidScheduleParams
    │   └── InvalidSpec
    ├── DataError                               (exit 2)
    │   ├── VideoTooShort
    │   ├── OutOfBounds
    │   ├── ParseError
    │   ├── SplitOverlap
    │   ├── DataEmpty
    │   ├── MissingArtifact
    │   ├── MissingSelection
    │   ├── LengthMismatch
    │   ├── DegenerateTargets
    │   └── TooFewSamples
    ├── ShapeError                              (exit 2)
    │   ├── ShapeMismatch
    │   ├── DimensionMismatch
    │   ├── IncompatibleArchitecture
    │   ├── BranchMismatch
    │   ├── StepOutOfRange
    │   └── OutOfRange
    └── NumericalError                          (exit 3)
        ├── NonFiniteLoss
        └── NotPSD
"""

from typing import Optional, Any, Dict, Sequence

from ..config import ExitCode


class EchoSynthException(Exception):
    """
    Base exception for all echosynth exceptions.

    Attributes:
        message: Error message
        details: Additional error details
        original_exception: Original exception if this wraps another exception
    """

    exit_code: ExitCode = ExitCode.DATA_ERROR

    def __init__(
        self,
        message: str,
        details: Optional[Dict[str, Any]] = None,
        original_exception: Optional[Exception] = None
    ):
        super().__init__(message)
        self.message = message
        self.details = details or {}
        self.original_exception = original_exception

    def __str__(self) -> str:
        """String representation with details."""
        if self.details:
            details_str = ", ".join(f"{k}={v}" for k, v in self.details.items())
            return f"{self.message} ({details_str})"
        return self.message

    def to_dict(self) -> Dict[str, Any]:
        """
        Convert exception to dictionary.

        Returns:
            Dictionary representation of exception
        """
        return {
            "type": self.__class__.__name__,
            "message": self.message,
            "details": self.details,
            "exit_code": int(self.exit_code),
        }


# ==================== Configuration Errors ====================

class ConfigurationError(EchoSynthException):
    """Base class for configuration-related errors."""
    exit_code = ExitCode.CONFIG_ERROR


class ConfigError(ConfigurationError):
    """Raised when a run configuration file is unreadable or invalid."""
    pass


class InvalidConfigError(ConfigurationError):
    """Raised when a model or training configuration violates its invariants."""
    pass


class InvalidScheduleParams(ConfigurationError):
    """Raised when noise-schedule parameters are out of range."""
    pass


class InvalidSpec(ConfigurationError):
    """Raised when a phantom specification is inconsistent."""
    pass


# ==================== Data Errors ====================

class DataError(EchoSynthException):
    """Base class for data-related errors."""
    exit_code = ExitCode.DATA_ERROR


class VideoTooShort(DataError):
    """Raised when a raw video has fewer frames than one window."""

    def __init__(self, length: int, required: int):
        """
        Args:
            length: Number of frames available
            required: Minimum number of frames
        """
        super().__init__(
            f"Video has {length} frames, at least {required} required",
            {"length": length, "required": required},
        )


class OutOfBounds(DataError):
    """Raised when a window extends past the end of a video."""

    def __init__(self, window_start: int, window: int, length: int):
        super().__init__(
            f"Window [{window_start}, {window_start + window}) exceeds video length {length}",
            {"window_start": window_start, "window": window, "length": length},
        )


class ParseError(DataError):
    """Raised when a manifest or clip container cannot be parsed."""
    pass


class SplitOverlap(DataError):
    """Raised when a case id belongs to more than one split."""

    def __init__(self, case_ids: Sequence[str]):
        ids = sorted(set(case_ids))
        super().__init__(
            f"{len(ids)} case id(s) appear in more than one split",
            {"case_ids": ids[:10]},
        )


class DataEmpty(DataError):
    """Raised when a training stage receives no samples."""
    pass


class MissingArtifact(DataError):
    """Raised when an upstream artifact required by a command is absent."""

    def __init__(self, path: str, produced_by: Optional[str] = None):
        details = {"path": path}
        if produced_by:
            details["produced_by"] = produced_by
        super().__init__(f"Required artifact not found: {path}", details)


class MissingSelection(DataError):
    """Raised when a ranking without any selected candidate is used for augmentation."""
    pass


class LengthMismatch(DataError):
    """Raised when paired sequences differ in length."""

    def __init__(self, left: int, right: int):
        super().__init__(
            f"Length mismatch: {left} != {right}",
            {"left": left, "right": right},
        )


class DegenerateTargets(DataError):
    """Raised when all targets are identical and R^2 is undefined."""
    pass


class TooFewSamples(DataError):
    """Raised when a statistic needs more samples than were supplied."""

    def __init__(self, count: int, required: int):
        super().__init__(
            f"Got {count} sample(s), at least {required} required",
            {"count": count, "required": required},
        )


# ==================== Shape Errors ====================

class ShapeError(EchoSynthException):
    """Base class for tensor-shape and index errors."""
    exit_code = ExitCode.DATA_ERROR


class ShapeMismatch(ShapeError):
    """Raised when an array does not have the expected shape."""

    def __init__(self, expected: Any, actual: Any, name: str = "array"):
        super().__init__(
            f"Shape mismatch for {name}: expected {tuple(expected)}, got {tuple(actual)}",
            {"name": name, "expected": tuple(expected), "actual": tuple(actual)},
        )


class DimensionMismatch(ShapeError):
    """Raised when two feature summaries have different dimensions."""
    pass


class IncompatibleArchitecture(ShapeError):
    """Raised when a control branch cannot be built from a host network."""
    pass


class BranchMismatch(ShapeError):
    """Raised when a control branch does not belong to the given host."""
    pass


class StepOutOfRange(ShapeError):
    """Raised when a diffusion step index is outside [1, T]."""

    def __init__(self, t: int, total: int):
        super().__init__(
            f"Diffusion step {t} outside [1, {total}]",
            {"t": t, "T": total},
        )


class OutOfRange(ShapeError):
    """Raised when an iteration index is outside the schedule."""

    def __init__(self, value: int, upper: int, name: str = "iter"):
        super().__init__(
            f"{name}={value} outside [0, {upper})",
            {"name": name, "value": value, "upper": upper},
        )


# ==================== Numerical Errors ====================

class NumericalError(EchoSynthException):
    """Base class for numerical failures."""
    exit_code = ExitCode.NUMERICAL_FAILURE


class NonFiniteLoss(NumericalError):
    """Raised when a training loss becomes NaN or infinite."""

    def __init__(self, iteration: int, loss: float, phase: str):
        super().__init__(
            f"Non-finite loss {loss} at iteration {iteration}",
            {"iteration": iteration, "loss": loss, "phase": phase},
        )


class NotPSD(NumericalError):
    """Raised when a covariance has eigenvalues below the clipping tolerance."""

    def __init__(self, min_eigenvalue: float):
        super().__init__(
            f"Covariance is not positive semi-definite (min eigenvalue {min_eigenvalue:.3e})",
            {"min_eigenvalue": min_eigenvalue},
        )


# ==================== Helper Functions ====================

def wrap_exception(
    exception: Exception,
    message: str,
    exception_class: type = EchoSynthException
) -> EchoSynthException:
    """
    Wrap an exception in an echosynth exception.

    Args:
        exception: Original exception to wrap
        message: New error message
        exception_class: Exception class to use for wrapping

    Returns:
        Wrapped exception

    Example:
        >>> try:
        ...     yaml.safe_load(text)
        ... except yaml.YAMLError as e:
        ...     raise wrap_exception(e, "Bad config", ConfigError)
    """
    return exception_class(
        message=message,
        details={"original_error": str(exception)},
        original_exception=exception
    )


def exit_code_for(exception: BaseException) -> ExitCode:
    """
    Map any exception to a CLI exit status.

    Args:
        exception: Raised exception

    Returns:
        ExitCode for the process
    """
    if isinstance(exception, EchoSynthException):
        return exception.exit_code
    if isinstance(exception, (FloatingPointError, ArithmeticError)):
        return ExitCode.NUMERICAL_FAILURE
    return ExitCode.DATA_ERROR


__all__ = [
    'EchoSynthException',
    # Configuration
    'ConfigurationError',
    'ConfigError',
    'InvalidConfigError',
    'InvalidScheduleParams',
    'InvalidSpec',
    # Data
    'DataError',
    'VideoTooShort',
    'OutOfBounds',
    'ParseError',
    'SplitOverlap',
    'DataEmpty',
    'MissingArtifact',
    'MissingSelection',
    'LengthMismatch',
    'DegenerateTargets',
    'TooFewSamples',
    # Shape
    'ShapeError',
    'ShapeMismatch',
    'DimensionMismatch',
    'IncompatibleArchitecture',
    'BranchMismatch',
    'StepOutOfRange',
    'OutOfRange',
    # Numerical
    'NumericalError',
    'NonFiniteLoss',
    'NotPSD',
    # Helpers
    'wrap_exception',
    'exit_code_for',
]
