"""
Control Branch
==============

ControlNet-style conditioning of the denoiser on an A4C clip.

The condition is the A4C clip stacked channel-wise with its motion mask.
The branch is a copy of the host's time embedding, entry convolution,
encoder and middle block. Zero-initialised 1x1x1 Conv3d layers connect it
to the host:

* ``cond_zero``      condition (2 channels) -> added to the branch's first activation
* ``skip_zeros.{l}`` branch skip l -> residual for host skip l
* ``middle_zero``    branch middle output -> residual for the host middle output
* ``decoder_zeros.{l}`` branch skip l -> residual for the host decoder after
  upsampling into level l (levels - 1 of them, three at the default depth)
"""

import copy
import logging
from typing import Iterator, List, Union

import numpy as np
import torch
import torch.nn as nn
from scipy.ndimage import gaussian_filter

from ..config import DEFAULT_MASK_SIGMA, DEFAULT_MASK_TRUNCATE, ReverseVariance, View
from ..common.exceptions import BranchMismatch, IncompatibleArchitecture, ShapeMismatch
from ..domain.interfaces import IClipGenerator
from ..domain.models import EchoClip
from ..data.datasets import tensor_to_clip
from ..diffusion.process import sample_loop
from ..diffusion.schedule import NoiseSchedule
from .layers import zero_conv3d
from .unet import ControlResiduals, UNet3D, denoise

logger = logging.getLogger(__name__)

CONDITION_CHANNELS = 2
# |a - b| for a, b in [-1, 1] lies in [0, 2]
MASK_SCALE = 0.5

ClipOrFrames = Union[EchoClip, np.ndarray]


def _frames(clip: ClipOrFrames) -> np.ndarray:
    return np.asarray(clip.frames if isinstance(clip, EchoClip) else clip)


def compute_motion_mask(
    a4c: ClipOrFrames,
    gaussian_sigma: float = DEFAULT_MASK_SIGMA,
    truncate: float = DEFAULT_MASK_TRUNCATE,
) -> np.ndarray:
    """
    Motion mask [T, 1, H, W] in [0, 1].

    mask[t] = blur(|frame[t] - frame[t-1]|) / 2 for t >= 1 with a zero-padded
    spatial Gaussian; mask[0] is all zeros.
    """
    frames = _frames(a4c).astype(np.float64)
    if frames.ndim != 4:
        raise ShapeMismatch("[T, C, H, W]", frames.shape, "a4c")
    mask = np.zeros((frames.shape[0], 1) + frames.shape[2:], dtype=np.float64)
    if frames.shape[0] > 1:
        diff = np.abs(frames[1:] - frames[:-1]).mean(axis=1)
        if gaussian_sigma > 0:
            diff = gaussian_filter(
                diff, sigma=(0.0, gaussian_sigma, gaussian_sigma), truncate=truncate, mode="constant"
            )
        mask[1:, 0] = diff * MASK_SCALE
    return np.clip(mask, 0.0, 1.0).astype(np.float32)


def assemble_condition(a4c: ClipOrFrames, sigma: float = DEFAULT_MASK_SIGMA) -> np.ndarray:
    """
    Condition [T, 2, H, W]: channel 0 the A4C frames, channel 1 the motion mask.

    Raises:
        ShapeMismatch: If the clip is not single-channel [T, 1, H, W]
    """
    frames = _frames(a4c)
    if frames.ndim != 4 or frames.shape[1] != 1:
        raise ShapeMismatch("[T, 1, H, W]", frames.shape, "a4c")
    return np.concatenate([frames.astype(np.float32), compute_motion_mask(frames, sigma)], axis=1)


def condition_to_tensor(condition: np.ndarray, dtype: torch.dtype = torch.float32) -> torch.Tensor:
    """Condition [T, 2, H, W] -> [2, T, H, W]."""
    return torch.from_numpy(np.ascontiguousarray(condition)).permute(1, 0, 2, 3).to(dtype)


class ControlNetBranch(nn.Module):
    """Trainable copy of the host encoder producing ControlResiduals."""

    COPIED = ("time_embed", "input_conv", "encoder", "downsamples", "middle")

    def __init__(self, host: UNet3D):
        super().__init__()
        self.config = host.config
        for name in self.COPIED:
            setattr(self, name, copy.deepcopy(getattr(host, name)))
        ch = host.config.level_channels
        self.cond_zero = zero_conv3d(CONDITION_CHANNELS, ch[0])
        self.skip_zeros = nn.ModuleList([zero_conv3d(c, c) for c in ch])
        self.middle_zero = zero_conv3d(ch[-1], ch[-1])
        self.decoder_zeros = nn.ModuleList([zero_conv3d(ch[l], ch[l + 1]) for l in range(len(ch) - 1)])

    def zero_convs(self) -> Iterator[nn.Conv3d]:
        yield self.cond_zero
        yield from self.skip_zeros
        yield self.middle_zero
        yield from self.decoder_zeros

    def forward(self, x: torch.Tensor, t: torch.Tensor, condition: torch.Tensor) -> ControlResiduals:
        t_emb = self.time_embed(t)
        h = self.input_conv(x) + self.cond_zero(condition)
        skips: List[torch.Tensor] = []
        for level, block in enumerate(self.encoder):
            h = block(h, t_emb)
            skips.append(h)
            if level < len(self.downsamples):
                h = self.downsamples[level](h)
        h = self.middle(h, t_emb)
        return ControlResiduals(
            skips=tuple(conv(s) for conv, s in zip(self.skip_zeros, skips)),
            middle=self.middle_zero(h),
            decoder=tuple(conv(skips[l]) for l, conv in enumerate(self.decoder_zeros)),
        )


def init_control_branch(host: nn.Module) -> ControlNetBranch:
    """
    Copy the host's encoder side and attach zero convolutions.

    Raises:
        IncompatibleArchitecture: If host is not a UNet3D
    """
    if not isinstance(host, UNet3D):
        raise IncompatibleArchitecture(
            f"Control branch needs a UNet3D host, got {type(host).__name__}"
        )
    branch = ControlNetBranch(host)
    branch.to(next(host.parameters()).dtype)
    copied = sum(p.numel() for name in ControlNetBranch.COPIED for p in getattr(branch, name).parameters())
    logger.info(f"Initialised control branch: {copied:,} copied parameters")
    return branch


def validate_branch(host: UNet3D, branch: ControlNetBranch) -> None:
    """
    Raises:
        BranchMismatch: If the branch was built for a differently configured host
    """
    if branch.config != host.config:
        raise BranchMismatch(
            "Control branch does not match host configuration",
            {"host": host.config.model_dump(mode="json"), "branch": branch.config.model_dump(mode="json")},
        )


def control_forward(
    branch: ControlNetBranch,
    x_t: torch.Tensor,
    t: Union[int, torch.Tensor],
    condition: torch.Tensor,
) -> ControlResiduals:
    """
    Residuals for x_t [B, 1, T, H, W] under condition [B, 2, T, H, W].

    Raises:
        ShapeMismatch: If the condition does not align with x_t
    """
    expected = (x_t.shape[0], CONDITION_CHANNELS) + tuple(x_t.shape[2:])
    if tuple(condition.shape) != expected:
        raise ShapeMismatch(expected, tuple(condition.shape), "condition")
    steps = torch.as_tensor(t, dtype=torch.long, device=x_t.device).reshape(-1)
    if steps.numel() == 1:
        steps = steps.expand(x_t.shape[0])
    return branch(x_t, steps, condition)


class ControlledGenerator(IClipGenerator):
    """Samples synthetic A2C clips from a trained host and control branch."""

    def __init__(
        self,
        host: UNet3D,
        branch: ControlNetBranch,
        schedule: NoiseSchedule,
        sigma: float = DEFAULT_MASK_SIGMA,
        variance: ReverseVariance = ReverseVariance.BETA,
        device: Union[str, torch.device] = "cpu",
        progress: bool = False,
    ):
        validate_branch(host, branch)
        self.host = host.eval().to(device)
        self.branch = branch.eval().to(device)
        self.schedule = schedule
        self.sigma = sigma
        self.variance = variance
        self.device = torch.device(device)
        self.progress = progress

    def _denoiser(self, x: torch.Tensor, t: torch.Tensor, condition: torch.Tensor) -> torch.Tensor:
        return denoise(self.host, x, t, control_forward(self.branch, x, t, condition))

    def generate_many(self, a4c: EchoClip, count: int, seed: int) -> List[EchoClip]:
        """Sample ``count`` clips for one conditioning clip as a single batch."""
        condition = condition_to_tensor(assemble_condition(a4c, self.sigma)).to(self.device)
        batch = condition.unsqueeze(0).expand(count, *condition.shape).contiguous()
        shape = (count, 1) + tuple(condition.shape[1:])
        generator = torch.Generator(device=self.device).manual_seed(int(seed))
        samples = sample_loop(
            self._denoiser,
            self.schedule,
            shape,
            control=batch,
            generator=generator,
            variance=self.variance,
            device=self.device,
            progress=self.progress,
        )
        return [tensor_to_clip(sample, View.A2C, a4c.case_id, a4c.frame_rate) for sample in samples]

    def generate(self, a4c: EchoClip, seed: int) -> EchoClip:
        return self.generate_many(a4c, 1, seed)[0]


__all__ = [
    'CONDITION_CHANNELS',
    'compute_motion_mask',
    'assemble_condition',
    'condition_to_tensor',
    'ControlNetBranch',
    'init_control_branch',
    'validate_branch',
    'control_forward',
    'ControlledGenerator',
]
