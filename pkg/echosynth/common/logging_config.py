"""
Logging Configuration
=====================

Logging for echosynth lives under the ``echosynth`` logger. The console
handler writes through ``tqdm.write`` so that training and sampling
progress bars stay on one line. Every command run additionally tees the
package log into its own ``run.log`` (see ``attach_run_log``).
"""

import logging
import logging.handlers
import sys
from pathlib import Path
from typing import Optional, Union

from tqdm import tqdm


ROOT_LOGGER = "echosynth"

CONSOLE_FORMAT = "%(levelname)s: %(message)s"
VERBOSE_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
RUN_LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(filename)s:%(lineno)d - %(message)s"


class LogColors:
    RESET = "\033[0m"
    DEBUG = "\033[36m"
    INFO = "\033[32m"
    WARNING = "\033[33m"
    ERROR = "\033[31m"
    CRITICAL = "\033[35m"


class ColoredFormatter(logging.Formatter):
    """Colors the level name for terminal output; the record itself is left untouched."""

    def format(self, record: logging.LogRecord) -> str:
        color = getattr(LogColors, record.levelname, "")
        if not color:
            return super().format(record)
        plain = record.levelname
        record.levelname = f"{color}{plain}{LogColors.RESET}"
        try:
            return super().format(record)
        finally:
            record.levelname = plain


class TqdmHandler(logging.StreamHandler):
    """Console handler that prints above active tqdm bars."""

    def emit(self, record: logging.LogRecord) -> None:
        try:
            tqdm.write(self.format(record), file=self.stream)
            self.flush()
        except Exception:
            self.handleError(record)


def _package_logger() -> logging.Logger:
    return logging.getLogger(ROOT_LOGGER)


def setup_logging(
    level: int = logging.INFO,
    log_file: Optional[str] = None,
    verbose: bool = False,
    enable_colors: bool = True,
    max_file_size: int = 10 * 1024 * 1024,
    backup_count: int = 3,
) -> None:
    """
    Configure the package logger for a CLI or notebook session.

    Existing handlers on the package logger are closed and replaced, so
    calling this twice does not duplicate output.

    Args:
        level: Level for the logger and its handlers
        log_file: Optional rotating log file shared by all runs
        verbose: Use timestamps and logger names on the console
        enable_colors: Color level names when stderr is a terminal
        max_file_size: Rotation threshold of log_file in bytes
        backup_count: Rotated files to keep

    Example:
        >>> setup_logging(level=logging.DEBUG, verbose=True)
    """
    root = _package_logger()
    root.setLevel(level)
    for handler in list(root.handlers):
        handler.close()
    root.handlers.clear()

    fmt = VERBOSE_FORMAT if verbose else CONSOLE_FORMAT
    console = TqdmHandler(sys.stderr)
    console.setLevel(level)
    use_colors = enable_colors and sys.stderr.isatty()
    console.setFormatter(ColoredFormatter(fmt) if use_colors else logging.Formatter(fmt))
    root.addHandler(console)

    if log_file:
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)
        rotating = logging.handlers.RotatingFileHandler(
            log_file, maxBytes=max_file_size, backupCount=backup_count, encoding="utf-8"
        )
        rotating.setLevel(level)
        rotating.setFormatter(logging.Formatter(RUN_LOG_FORMAT))
        root.addHandler(rotating)


def attach_run_log(path: Union[str, Path]) -> logging.Handler:
    """
    Tee the package log into ``path`` (truncated) at the current level.

    Returns:
        The handler, to be passed to ``detach_handler`` when the run ends
    """
    root = _package_logger()
    handler = logging.FileHandler(path, mode="w", encoding="utf-8")
    handler.setFormatter(logging.Formatter(RUN_LOG_FORMAT))
    handler.setLevel(root.level or logging.INFO)
    root.addHandler(handler)
    return handler


def detach_handler(handler: logging.Handler) -> None:
    _package_logger().removeHandler(handler)
    handler.close()


def get_logger(name: str) -> logging.Logger:
    """Logger for ``name``, placed under the package root if it is not already."""
    if name == ROOT_LOGGER or name.startswith(f"{ROOT_LOGGER}."):
        return logging.getLogger(name)
    return logging.getLogger(f"{ROOT_LOGGER}.{name}")


def set_level(level: int) -> None:
    root = _package_logger()
    root.setLevel(level)
    for handler in root.handlers:
        handler.setLevel(level)


def disable_logging() -> None:
    _package_logger().setLevel(logging.CRITICAL + 1)


class LoggingContext:
    """
    Temporarily change the package log level.

    Example:
        >>> with LoggingContext(logging.WARNING):
        ...     train_ef(items, val_items, config)  # per-epoch lines hidden
    """

    def __init__(self, level: int):
        self.level = level
        self.original_level = _package_logger().level

    def __enter__(self) -> "LoggingContext":
        set_level(self.level)
        return self

    def __exit__(self, *args: object) -> None:
        set_level(self.original_level)


__all__ = [
    'ROOT_LOGGER',
    'RUN_LOG_FORMAT',
    'setup_logging',
    'attach_run_log',
    'detach_handler',
    'get_logger',
    'set_level',
    'disable_logging',
    'LoggingContext',
    'LogColors',
    'ColoredFormatter',
    'TqdmHandler',
]
