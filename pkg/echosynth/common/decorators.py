"""
Decorators
==========

- @log_execution: announce a pipeline stage and report how long it took
- @measure_time: debug-level wall time of a call
- @validate_not_none: reject None for required collaborators
"""

import functools
import inspect
import logging
import time
from typing import Any, Callable, TypeVar, cast

logger = logging.getLogger(__name__)

F = TypeVar('F', bound=Callable[..., Any])


def format_duration(seconds: float) -> str:
    """``42.1s``, ``3m07s`` or ``2h05m``; training stages run for hours."""
    if seconds < 60:
        return f"{seconds:.1f}s"
    minutes, secs = divmod(int(round(seconds)), 60)
    if minutes < 60:
        return f"{minutes}m{secs:02d}s"
    hours, minutes = divmod(minutes, 60)
    return f"{hours}h{minutes:02d}m"


def log_execution(level: int = logging.INFO) -> Callable[[F], F]:
    """
    Log the start and end of a stage such as ``train_ef`` or ``cmd_curate``.

    A failing stage is logged at ERROR with the exception type and the
    exception is re-raised unchanged.

    Args:
        level: Level of the start and completion lines

    Example:
        >>> @log_execution()
        ... def cmd_sample(config, force=False):
        ...     ...
    """
    def decorator(func: F) -> F:
        stage = func.__qualname__

        @functools.wraps(func)
        def wrapper(*args: Any, **kwargs: Any) -> Any:
            logger.log(level, f"{stage}: started")
            start = time.perf_counter()
            try:
                result = func(*args, **kwargs)
            except Exception as e:
                elapsed = format_duration(time.perf_counter() - start)
                logger.error(f"{stage}: {type(e).__name__} after {elapsed}: {e}")
                raise
            logger.log(level, f"{stage}: finished in {format_duration(time.perf_counter() - start)}")
            return result

        return cast(F, wrapper)
    return decorator


def measure_time(func: F) -> F:
    @functools.wraps(func)
    def wrapper(*args: Any, **kwargs: Any) -> Any:
        start = time.perf_counter()
        try:
            return func(*args, **kwargs)
        finally:
            logger.debug(f"{func.__qualname__} took {time.perf_counter() - start:.3f}s")

    return cast(F, wrapper)


def validate_not_none(*param_names: str) -> Callable[[F], F]:
    """
    Raise ValueError when any of the named arguments is None.

    Example:
        >>> @validate_not_none("generator", "ef_model")
        ... def generate_candidates(case, generator, ef_model, n, seed):
        ...     ...
    """
    def decorator(func: F) -> F:
        signature = inspect.signature(func)
        unknown = [name for name in param_names if name not in signature.parameters]
        if unknown:
            raise TypeError(f"{func.__qualname__} has no parameter(s) {unknown}")

        @functools.wraps(func)
        def wrapper(*args: Any, **kwargs: Any) -> Any:
            bound = signature.bind(*args, **kwargs)
            bound.apply_defaults()
            missing = [name for name in param_names if bound.arguments[name] is None]
            if missing:
                raise ValueError(f"{func.__qualname__}: {', '.join(missing)} must not be None")
            return func(*args, **kwargs)

        return cast(F, wrapper)
    return decorator


__all__ = [
    'format_duration',
    'log_execution',
    'measure_time',
    'validate_not_none',
]
