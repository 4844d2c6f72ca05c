"""
Diffusion Module
================

Schedules, forward noising, loss and the ancestral sampler.
"""

from .schedule import NoiseSchedule, make_schedule
from .process import (
    DiffusionState,
    forward_diffuse,
    compose_forward_steps,
    noise_prediction_loss,
    ddpm_sample_step,
    sample_loop,
)

__all__ = [
    'NoiseSchedule',
    'make_schedule',
    'DiffusionState',
    'forward_diffuse',
    'compose_forward_steps',
    'noise_prediction_loss',
    'ddpm_sample_step',
    'sample_loop',
]
