"""
Type Guards
===========

Runtime validation helpers shared by the data, diffusion and metric layers.
Each validator raises the matching echosynth exception.
"""

from typing import Union

import numpy as np
import torch

from .exceptions import ShapeMismatch, StepOutOfRange

ArrayLike = Union[np.ndarray, torch.Tensor]


def validate_same_shape(a: ArrayLike, b: ArrayLike, name: str = "array") -> None:
    """
    Validate that two arrays share a shape.

    Raises:
        ShapeMismatch: If shapes differ
    """
    if tuple(a.shape) != tuple(b.shape):
        raise ShapeMismatch(tuple(a.shape), tuple(b.shape), name)


def validate_step(t: int, total: int) -> None:
    """
    Validate a diffusion step index in [1, total].

    Raises:
        StepOutOfRange: If t is outside the range
    """
    if not (1 <= int(t) <= total):
        raise StepOutOfRange(int(t), total)


__all__ = [
    'ArrayLike',
    'validate_same_shape',
    'validate_step',
]
