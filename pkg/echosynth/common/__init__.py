"""
Common Module
=============

Cross-cutting utilities used across echosynth.

Submodules:
- exceptions: Custom exception hierarchy and exit-code mapping
- decorators: Logging and validation decorators
- logging_config: Centralized logging configuration
- type_guards: Shape and index validators
"""

from .exceptions import (
    EchoSynthException,
    ConfigurationError,
    ConfigError,
    InvalidConfigError,
    InvalidScheduleParams,
    InvalidSpec,
    DataError,
    VideoTooShort,
    OutOfBounds,
    ParseError,
    SplitOverlap,
    DataEmpty,
    MissingArtifact,
    MissingSelection,
    LengthMismatch,
    DegenerateTargets,
    TooFewSamples,
    ShapeError,
    ShapeMismatch,
    DimensionMismatch,
    IncompatibleArchitecture,
    BranchMismatch,
    StepOutOfRange,
    OutOfRange,
    NumericalError,
    NonFiniteLoss,
    NotPSD,
    wrap_exception,
    exit_code_for,
)

from .decorators import (
    format_duration,
    log_execution,
    measure_time,
    validate_not_none,
)

from .logging_config import (
    setup_logging,
    get_logger,
    set_level,
    disable_logging,
    LoggingContext,
    LogColors,
    ColoredFormatter,
)

from .type_guards import (
    validate_same_shape,
    validate_step,
)

__all__ = [
    # Exceptions
    'EchoSynthException',
    'ConfigurationError',
    'ConfigError',
    'InvalidConfigError',
    'InvalidScheduleParams',
    'InvalidSpec',
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
    'ShapeError',
    'ShapeMismatch',
    'DimensionMismatch',
    'IncompatibleArchitecture',
    'BranchMismatch',
    'StepOutOfRange',
    'OutOfRange',
    'NumericalError',
    'NonFiniteLoss',
    'NotPSD',
    'wrap_exception',
    'exit_code_for',
    # Decorators
    'format_duration',
    'log_execution',
    'measure_time',
    'validate_not_none',
    # Logging
    'setup_logging',
    'get_logger',
    'set_level',
    'disable_logging',
    'LoggingContext',
    'LogColors',
    'ColoredFormatter',
    # Type guards
    'validate_same_shape',
    'validate_step',
]
