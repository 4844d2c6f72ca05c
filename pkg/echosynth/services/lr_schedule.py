"""
Learning-Rate Schedule
======================

Linear warmup from 0 to lr_max over warmup_iters, then cosine annealing
from lr_max to lr_min, reaching lr_min at max_iters.
"""

import math

import torch

from ..common.exceptions import OutOfRange
from ..domain.models import TrainConfig


def lr_at(config: TrainConfig, iteration: int) -> float:
    """
    Learning rate for a 0-based iteration.

    Raises:
        OutOfRange: If iteration is outside [0, max_iters)
    """
    if not (0 <= iteration < config.max_iters):
        raise OutOfRange(iteration, config.max_iters)
    if iteration < config.warmup_iters:
        return config.lr_max * iteration / config.warmup_iters
    progress = (iteration - config.warmup_iters) / (config.max_iters - config.warmup_iters)
    if progress == 0.0:
        return config.lr_max
    return config.lr_min + 0.5 * (config.lr_max - config.lr_min) * (1.0 + math.cos(math.pi * progress))


def apply_lr(optimizer: torch.optim.Optimizer, lr: float) -> None:
    for group in optimizer.param_groups:
        group["lr"] = lr


__all__ = [
    'lr_at',
    'apply_lr',
]
