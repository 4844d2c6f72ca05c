"""
Diffusion Process
=================

Forward noising, the noise-prediction loss and the ancestral sampler.
Randomness always comes from an explicit ``torch.Generator``.

Step t uses the standard convention: x_t ~ N(sqrt(1 - beta_t) x_{t-1}, beta_t I),
so x_t = sqrt(alpha_bar_t) x0 + sqrt(1 - alpha_bar_t) eps in closed form.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import torch
import torch.nn.functional as F
from tqdm import tqdm

from ..config import ReverseVariance
from ..common.exceptions import ShapeMismatch, StepOutOfRange
from ..common.type_guards import validate_same_shape, validate_step
from .schedule import NoiseSchedule

logger = logging.getLogger(__name__)

Steps = Union[int, torch.Tensor]
Denoiser = Callable[..., torch.Tensor]


@dataclass(frozen=True)
class DiffusionState:
    """A noisy sample x_t at step t in [0, T]."""
    x_t: torch.Tensor
    t: int

    def validate(self, schedule: NoiseSchedule, shape: Optional[Sequence[int]] = None) -> None:
        if not (0 <= self.t <= schedule.T):
            raise StepOutOfRange(self.t, schedule.T)
        if shape is not None and tuple(self.x_t.shape) != tuple(shape):
            raise ShapeMismatch(tuple(shape), tuple(self.x_t.shape), "x_t")


def _check_steps(t: Steps, schedule: NoiseSchedule) -> torch.Tensor:
    steps = torch.as_tensor(t, dtype=torch.long).reshape(-1)
    bad = steps[(steps < 1) | (steps > schedule.T)]
    if bad.numel():
        raise StepOutOfRange(int(bad[0]), schedule.T)
    return steps


def extract(values: torch.Tensor, t: Steps, like: torch.Tensor) -> torch.Tensor:
    """
    Gather schedule entries for step(s) t and broadcast against ``like``.

    A scalar t gives a scalar coefficient; a tensor t of shape [B] gives [B, 1, ..., 1].
    """
    scalar = not isinstance(t, torch.Tensor) or t.ndim == 0
    steps = torch.as_tensor(t, dtype=torch.long).reshape(-1)
    picked = values[steps - 1].to(device=like.device, dtype=like.dtype)
    if scalar:
        return picked.reshape(())
    return picked.reshape(-1, *([1] * (like.ndim - 1)))


def forward_diffuse(x0: torch.Tensor, t: Steps, eps: torch.Tensor, schedule: NoiseSchedule) -> torch.Tensor:
    """
    Closed-form forward marginal sqrt(alpha_bar_t) x0 + sqrt(1 - alpha_bar_t) eps.

    Raises:
        ShapeMismatch: If eps and x0 differ in shape
        StepOutOfRange: If any t is outside [1, T]
    """
    validate_same_shape(x0, eps, "eps")
    _check_steps(t, schedule)
    alpha_bar = extract(schedule.alpha_bar, t, x0)
    return alpha_bar.sqrt() * x0 + (1.0 - alpha_bar).sqrt() * eps


def compose_forward_steps(
    x0: torch.Tensor,
    t: int,
    schedule: NoiseSchedule,
    generator: Optional[torch.Generator] = None,
) -> torch.Tensor:
    """
    Apply the one-step forward kernel t times: x_s = sqrt(1 - beta_s) x_{s-1} + sqrt(beta_s) z.

    Raises:
        StepOutOfRange: If t is outside [1, T]
    """
    validate_step(t, schedule.T)
    x = x0
    for step in range(1, int(t) + 1):
        beta = schedule.beta[step - 1].to(dtype=x0.dtype)
        z = torch.randn(x0.shape, generator=generator, dtype=x0.dtype, device=x0.device)
        x = (1.0 - beta).sqrt() * x + beta.sqrt() * z
    return x


def noise_prediction_loss(eps_hat: torch.Tensor, eps: torch.Tensor) -> torch.Tensor:
    """
    Mean squared error over every element and the batch.

    Raises:
        ShapeMismatch: If shapes differ
    """
    validate_same_shape(eps, eps_hat, "eps_hat")
    return F.mse_loss(eps_hat, eps, reduction="mean")


def ddpm_sample_step(
    x_t: torch.Tensor,
    t: int,
    eps_hat: torch.Tensor,
    schedule: NoiseSchedule,
    generator: Optional[torch.Generator] = None,
    variance: ReverseVariance = ReverseVariance.BETA,
) -> torch.Tensor:
    """
    One ancestral step x_t -> x_{t-1}.

    mu = (x_t - beta_t / sqrt(1 - alpha_bar_t) * eps_hat) / sqrt(alpha_t); noise with
    variance beta_t (or the posterior beta_tilde_t) is added for t > 1 only.

    Raises:
        StepOutOfRange: If t is outside [1, T]
    """
    validate_step(t, schedule.T)
    validate_same_shape(x_t, eps_hat, "eps_hat")
    t = int(t)
    beta = extract(schedule.beta, t, x_t)
    alpha = extract(schedule.alpha, t, x_t)
    alpha_bar = extract(schedule.alpha_bar, t, x_t)
    mean = (x_t - beta / (1.0 - alpha_bar).sqrt() * eps_hat) / alpha.sqrt()
    if t == 1:
        return mean

    if ReverseVariance(variance) == ReverseVariance.POSTERIOR:
        sigma2 = extract(schedule.posterior_variance, t, x_t)
    else:
        sigma2 = beta
    z = torch.randn(x_t.shape, generator=generator, dtype=x_t.dtype, device=x_t.device)
    return mean + sigma2.sqrt() * z


@torch.no_grad()
def sample_loop(
    denoiser: Denoiser,
    schedule: NoiseSchedule,
    shape: Sequence[int],
    control: Optional[torch.Tensor] = None,
    generator: Optional[torch.Generator] = None,
    variance: ReverseVariance = ReverseVariance.BETA,
    dtype: torch.dtype = torch.float32,
    device: Union[str, torch.device] = "cpu",
    progress: bool = False,
    on_step: Optional[Callable[[DiffusionState], None]] = None,
) -> torch.Tensor:
    """
    Ancestral sampling from x_T ~ N(0, I) down to x_0.

    Args:
        denoiser: Called as denoiser(x_t, t_batch) or denoiser(x_t, t_batch, control),
            where t_batch is a LongTensor [B] filled with t
        schedule: Noise schedule
        shape: Output shape [B, C, T, H, W]
        control: Condition passed through to the denoiser
        generator: Source of all randomness
        variance: Reverse-step variance choice
        progress: Show a tqdm bar
        on_step: Callback receiving each DiffusionState after its step

    Returns:
        Sample clipped to [-1, 1]; clipping happens once, after the last step
    """
    x = torch.randn(tuple(shape), generator=generator, dtype=dtype, device=device)
    steps = range(schedule.T, 0, -1)
    for t in tqdm(steps, desc="sampling", disable=not progress, leave=False):
        t_batch = torch.full((x.shape[0],), t, dtype=torch.long, device=x.device)
        eps_hat = denoiser(x, t_batch) if control is None else denoiser(x, t_batch, control)
        x = ddpm_sample_step(x, t, eps_hat.to(dtype), schedule, generator, variance)
        if on_step is not None:
            on_step(DiffusionState(x_t=x, t=t - 1))
    return x.clamp(-1.0, 1.0)


__all__ = [
    'DiffusionState',
    'extract',
    'forward_diffuse',
    'compose_forward_steps',
    'noise_prediction_loss',
    'ddpm_sample_step',
    'sample_loop',
]
