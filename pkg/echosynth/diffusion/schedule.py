"""
Noise Schedules
===============

Variance schedules for the forward process. Arrays are indexed by step
t - 1 for t in [1, T]; the convention alpha_bar_0 = 1 is handled by
``alpha_bar_prev``.
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict

import torch

from ..config import (
    COSINE_MAX_BETA,
    COSINE_SCHEDULE_OFFSET,
    DEFAULT_BETA_END,
    DEFAULT_BETA_START,
    DEFAULT_DIFFUSION_STEPS,
    ScheduleKind,
)
from ..common.exceptions import InvalidScheduleParams

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class NoiseSchedule:
    """
    Immutable float64 schedule.

    Attributes:
        kind: Schedule family
        T: Total number of steps
        beta: beta_t, shape [T]
        alpha: 1 - beta_t, shape [T]
        alpha_bar: cumulative product of alpha, shape [T]
    """
    kind: ScheduleKind
    T: int
    beta: torch.Tensor
    alpha: torch.Tensor
    alpha_bar: torch.Tensor

    @property
    def alpha_bar_prev(self) -> torch.Tensor:
        """alpha_bar_{t-1} for t in [1, T], with alpha_bar_0 = 1."""
        return torch.cat([torch.ones(1, dtype=self.alpha_bar.dtype), self.alpha_bar[:-1]])

    @property
    def posterior_variance(self) -> torch.Tensor:
        """beta_tilde_t = beta_t (1 - alpha_bar_{t-1}) / (1 - alpha_bar_t); zero at t = 1."""
        return self.beta * (1.0 - self.alpha_bar_prev) / (1.0 - self.alpha_bar)

    def to_state(self) -> Dict[str, Any]:
        return {
            "kind": self.kind.value,
            "T": self.T,
            "beta": self.beta.clone(),
        }

    @classmethod
    def from_state(cls, state: Dict[str, Any]) -> "NoiseSchedule":
        return _from_betas(ScheduleKind(state["kind"]), state["beta"].to(torch.float64))


def _from_betas(kind: ScheduleKind, beta: torch.Tensor) -> "NoiseSchedule":
    alpha = 1.0 - beta
    # sequential product so alpha_bar[t] == alpha_bar[t-1] * alpha[t] holds bitwise
    alpha_bar = torch.empty_like(alpha)
    running = torch.tensor(1.0, dtype=torch.float64)
    for index in range(alpha.shape[0]):
        running = running * alpha[index]
        alpha_bar[index] = running
    return NoiseSchedule(kind=kind, T=int(beta.shape[0]), beta=beta, alpha=alpha, alpha_bar=alpha_bar)


def _cosine_betas(T: int, offset: float = COSINE_SCHEDULE_OFFSET) -> torch.Tensor:
    def f(t: float) -> float:
        return math.cos((t / T + offset) / (1.0 + offset) * math.pi / 2.0) ** 2

    betas = [min(1.0 - f(t) / f(t - 1), COSINE_MAX_BETA) for t in range(1, T + 1)]
    return torch.tensor(betas, dtype=torch.float64)


def make_schedule(
    kind: ScheduleKind = ScheduleKind.LINEAR,
    T: int = DEFAULT_DIFFUSION_STEPS,
    beta_start: float = DEFAULT_BETA_START,
    beta_end: float = DEFAULT_BETA_END,
) -> NoiseSchedule:
    """
    Build a noise schedule.

    Args:
        kind: linear (beta evenly spaced in [beta_start, beta_end]) or cosine
        T: Number of steps
        beta_start: First beta (linear only)
        beta_end: Last beta (linear only)

    Returns:
        NoiseSchedule with 0 < beta_t < 1 and strictly decreasing alpha_bar

    Raises:
        InvalidScheduleParams: If T < 1 or the betas are out of range
    """
    kind = ScheduleKind(kind)
    if int(T) < 1:
        raise InvalidScheduleParams(f"T must be >= 1, got {T}", {"T": T})
    T = int(T)

    if kind == ScheduleKind.LINEAR:
        if not (0.0 < beta_start <= beta_end < 1.0):
            raise InvalidScheduleParams(
                "Linear schedule needs 0 < beta_start <= beta_end < 1",
                {"beta_start": beta_start, "beta_end": beta_end},
            )
        beta = torch.linspace(beta_start, beta_end, T, dtype=torch.float64)
    else:
        beta = _cosine_betas(T)
        if not bool(((beta > 0) & (beta < 1)).all()):
            raise InvalidScheduleParams(f"Cosine schedule degenerate for T={T}", {"T": T})

    schedule = _from_betas(kind, beta)
    logger.debug(f"Built {kind.value} schedule: T={T}, alpha_bar_T={schedule.alpha_bar[-1].item():.3e}")
    return schedule


__all__ = [
    'NoiseSchedule',
    'make_schedule',
]
