"""
Context Managers
================

Run lifecycle for CLI commands: output-directory guard, run.log capture,
resolved-config provenance and a machine-readable summary.
"""

import json
import logging
import time
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Dict, Optional, Union

import yaml

from ..config import RESOLVED_CONFIG_NAME, RUN_LOG_NAME, SUMMARY_NAME, VERSION
from ..common.exceptions import ConfigError, EchoSynthException, exit_code_for
from ..common.logging_config import attach_run_log, detach_handler

logger = logging.getLogger(__name__)


class RunContext:
    """
    Context manager for one command run.

    On enter the output directory is created (or refused when it already
    holds a successful run and ``force`` is off), a run.log handler is
    attached and the resolved config is written. On exit summary.json
    records status, duration and whatever the command put in ``summary``.

    Example:
        >>> with RunContext("runs/demo/sample", "sample", resolved) as run:
        ...     run.summary["n_clips"] = 8
    """

    def __init__(
        self,
        out_dir: Union[str, Path],
        command: str,
        resolved_config: Dict[str, Any],
        force: bool = False,
    ):
        """
        Args:
            out_dir: Command output directory
            command: Command name recorded in the summary
            resolved_config: Fully merged config, written as YAML
            force: Overwrite a previous run in out_dir
        """
        self.out_dir = Path(out_dir)
        self.command = command
        self.resolved_config = resolved_config
        self.force = force
        self.summary: Dict[str, Any] = {}
        self._handler: Optional[logging.Handler] = None
        self._start_time: Optional[float] = None

    def path(self, *parts: str) -> Path:
        return self.out_dir.joinpath(*parts)

    def _finished(self) -> bool:
        """True when out_dir holds the summary of a successful run."""
        try:
            with open(self.path(SUMMARY_NAME), encoding="utf-8") as f:
                return json.load(f).get("status") == "ok"
        except FileNotFoundError:
            return False
        except (OSError, ValueError, AttributeError):
            return True

    def _guard(self) -> None:
        if not self.force and self._finished():
            raise ConfigError(
                f"{self.out_dir} already holds a {self.command} run; pass --force to overwrite",
                {"out_dir": str(self.out_dir)},
            )

    def __enter__(self) -> "RunContext":
        self._guard()
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.path(SUMMARY_NAME).unlink(missing_ok=True)

        self._handler = attach_run_log(self.path(RUN_LOG_NAME))

        with open(self.path(RESOLVED_CONFIG_NAME), "w", encoding="utf-8") as f:
            yaml.safe_dump(self.resolved_config, f, sort_keys=False)
        self._start_time = time.time()
        logger.info(f"{self.command}: writing to {self.out_dir}")
        return self

    def __exit__(self, exc_type, exc_val, exc_tb) -> bool:
        duration = time.time() - self._start_time if self._start_time else 0.0
        record: Dict[str, Any] = {
            "command": self.command,
            "version": VERSION,
            "status": "ok" if exc_type is None else "failed",
            "duration_s": round(duration, 3),
            **self.summary,
        }
        if exc_val is not None:
            record["exit_code"] = int(exit_code_for(exc_val))
            if isinstance(exc_val, EchoSynthException):
                record["error"] = exc_val.to_dict()
            else:
                record["error"] = {"type": type(exc_val).__name__, "message": str(exc_val)}
            logger.error(f"{self.command} failed after {duration:.3f}s: {exc_val}")
        else:
            logger.info(f"{self.command} completed in {duration:.3f}s")

        try:
            with open(self.path(SUMMARY_NAME), "w", encoding="utf-8") as f:
                json.dump(record, f, indent=2, sort_keys=True, default=str)
        except OSError as e:
            logger.error(f"Error writing summary: {e}")

        if self._handler is not None:
            detach_handler(self._handler)
            self._handler = None
        return False


@contextmanager
def timed_operation(operation_name: str, log_level: int = logging.INFO):
    """
    Log how long a block took.

    Example:
        >>> with timed_operation("sampling"):
        ...     clips = generator.generate_many(a4c, 18, seed)
    """
    start_time = time.time()
    logger.log(log_level, f"Starting {operation_name}")
    try:
        yield
    finally:
        duration = time.time() - start_time
        logger.log(log_level, f"{operation_name} took {duration:.3f}s")


__all__ = [
    'RunContext',
    'timed_operation',
]
