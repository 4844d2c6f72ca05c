"""
Denoising U-Net
===============

3D U-Net predicting the added noise eps_hat(x_t, t). Each resolution level
holds one ResNet block, optionally followed by temporal attention; the
encoder halves H and W between levels and the decoder mirrors it.

Parameter names are stable and shared with the control branch::

    time_embed.*            sinusoidal step embedding + MLP
    input_conv.*            1 -> C_0 entry convolution
    encoder.{l}.*           level-l encoder block (its output is skip l)
    downsamples.{l}.*       level l -> l+1
    middle.*                bottleneck block
    upsamples.{l}.*         level l+1 -> l
    decoder.{l}.*           level-l decoder block
    out_norm.*, out_conv.*  output head

Control residuals are added to each skip, to the middle-block output and to
the decoder activation right after each upsampling.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple, Union

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..common.exceptions import InvalidConfigError, ShapeMismatch
from ..domain.models import UNetConfig
from .layers import Downsample3D, LevelBlock, MiddleBlock, TimeEmbedding, Upsample3D

logger = logging.getLogger(__name__)

Shape = Tuple[int, ...]


@dataclass(frozen=True)
class ControlResiduals:
    """
    Additive residuals for the host's injection points.

    Attributes:
        skips: One tensor per level, shaped like that level's skip
        middle: Shaped like the middle-block output
        decoder: One tensor per upsampling, indexed by the level upsampled into
    """
    skips: Tuple[torch.Tensor, ...]
    middle: torch.Tensor
    decoder: Tuple[torch.Tensor, ...]

    def shapes(self) -> Tuple[List[Shape], Shape, List[Shape]]:
        return (
            [tuple(s.shape) for s in self.skips],
            tuple(self.middle.shape),
            [tuple(d.shape) for d in self.decoder],
        )


def injection_shapes(config: UNetConfig, batch: int) -> Tuple[List[Shape], Shape, List[Shape]]:
    """Expected (skips, middle, decoder) residual shapes for a batch size."""
    ch = config.level_channels
    sizes = [config.image_size // 2 ** level for level in range(config.levels)]
    skips = [(batch, ch[l], config.frames, sizes[l], sizes[l]) for l in range(config.levels)]
    middle = (batch, ch[-1], config.frames, sizes[-1], sizes[-1])
    decoder = [(batch, ch[l + 1], config.frames, sizes[l], sizes[l]) for l in range(config.levels - 1)]
    return skips, middle, decoder


class UNet3D(nn.Module):
    """Denoiser eps_hat = net(x_t [B, C, T, H, W], t [B], residuals)."""

    def __init__(self, config: UNetConfig):
        super().__init__()
        self.config = config
        ch = config.level_channels
        levels = config.levels
        emb = config.time_embed_dim
        groups = config.norm_groups
        heads = config.attention_heads
        attends = config.attention_levels

        self.time_embed = TimeEmbedding(ch[0], emb)
        self.input_conv = nn.Conv3d(config.in_channels, ch[0], 3, padding=1)
        self.encoder = nn.ModuleList([
            LevelBlock(ch[max(l - 1, 0)], ch[l], emb, groups, heads, l in attends)
            for l in range(levels)
        ])
        self.downsamples = nn.ModuleList([Downsample3D(ch[l]) for l in range(levels - 1)])
        self.middle = MiddleBlock(ch[-1], emb, groups, heads, (levels - 1) in attends)
        self.upsamples = nn.ModuleList([Upsample3D(ch[l + 1]) for l in range(levels - 1)])
        self.decoder = nn.ModuleList([
            LevelBlock((ch[l + 1] if l < levels - 1 else ch[-1]) + ch[l], ch[l], emb, groups, heads, l in attends)
            for l in range(levels)
        ])
        self.out_norm = nn.GroupNorm(groups, ch[0])
        self.out_conv = nn.Conv3d(ch[0], config.in_channels, 3, padding=1)

    def encode(
        self,
        x: torch.Tensor,
        t_emb: torch.Tensor,
        entry: Optional[torch.Tensor] = None,
    ) -> Tuple[torch.Tensor, List[torch.Tensor]]:
        """Run input conv and encoder; ``entry`` is added to the first activation."""
        h = self.input_conv(x)
        if entry is not None:
            h = h + entry
        skips = []
        for level, block in enumerate(self.encoder):
            h = block(h, t_emb)
            skips.append(h)
            if level < len(self.downsamples):
                h = self.downsamples[level](h)
        return h, skips

    def forward(
        self,
        x: torch.Tensor,
        t: torch.Tensor,
        residuals: Optional[ControlResiduals] = None,
    ) -> torch.Tensor:
        t_emb = self.time_embed(t)
        h, skips = self.encode(x, t_emb)
        h = self.middle(h, t_emb)
        if residuals is not None:
            h = h + residuals.middle
            skips = [s + r for s, r in zip(skips, residuals.skips)]

        for level in reversed(range(self.config.levels)):
            if level < self.config.levels - 1:
                h = self.upsamples[level](h)
                if residuals is not None:
                    h = h + residuals.decoder[level]
            h = self.decoder[level](torch.cat([h, skips[level]], dim=1), t_emb)
        return self.out_conv(F.silu(self.out_norm(h)))


def validate_unet_config(config: UNetConfig) -> None:
    """
    Raises:
        InvalidConfigError: If the config cannot produce a consistent network
    """
    if len(config.channel_multipliers) != config.levels:
        raise InvalidConfigError(
            f"channel_multipliers has {len(config.channel_multipliers)} entries for {config.levels} levels",
            {"channel_multipliers": list(config.channel_multipliers), "levels": config.levels},
        )
    if config.image_size % 2 ** (config.levels - 1):
        raise InvalidConfigError(
            f"image_size {config.image_size} not divisible by 2^{config.levels - 1}",
            {"image_size": config.image_size, "levels": config.levels},
        )
    bad_levels = [l for l in config.attention_levels if not 0 <= l < config.levels]
    if bad_levels:
        raise InvalidConfigError(f"attention_levels out of range: {sorted(bad_levels)}")
    for channels in config.level_channels:
        if channels % config.norm_groups:
            raise InvalidConfigError(f"{channels} channels not divisible by norm_groups={config.norm_groups}")
        if channels % config.attention_heads:
            raise InvalidConfigError(f"{channels} channels not divisible by attention_heads={config.attention_heads}")


def parameter_count(net: nn.Module) -> int:
    return sum(p.numel() for p in net.parameters())


def build_unet(config: UNetConfig, seed: int = 0) -> UNet3D:
    """
    Build a U-Net with deterministic initialization.

    Raises:
        InvalidConfigError: If the config is inconsistent
    """
    validate_unet_config(config)
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        net = UNet3D(config)
    logger.info(
        f"Built U-Net: levels={config.levels}, channels={config.level_channels}, "
        f"parameters={parameter_count(net):,}"
    )
    return net


def denoise(
    net: UNet3D,
    x_t: torch.Tensor,
    t: Union[int, torch.Tensor],
    residuals: Optional[ControlResiduals] = None,
) -> torch.Tensor:
    """
    Predict noise for x_t of shape [C, T, H, W] or [B, C, T, H, W].

    Raises:
        ShapeMismatch: If x_t does not match the network's clip shape
    """
    config = net.config
    expected = (config.in_channels, config.frames, config.image_size, config.image_size)
    unbatched = x_t.ndim == 4
    batch = x_t.unsqueeze(0) if unbatched else x_t
    if batch.ndim != 5 or tuple(batch.shape[1:]) != expected:
        raise ShapeMismatch(expected, tuple(x_t.shape), "x_t")
    steps = torch.as_tensor(t, dtype=torch.long, device=batch.device).reshape(-1)
    if steps.numel() == 1:
        steps = steps.expand(batch.shape[0])
    if residuals is not None:
        wanted = injection_shapes(config, batch.shape[0])
        if residuals.shapes() != wanted:
            raise ShapeMismatch(wanted, residuals.shapes(), "residuals")
    out = net(batch, steps, residuals)
    return out.squeeze(0) if unbatched else out


__all__ = [
    'ControlResiduals',
    'injection_shapes',
    'UNet3D',
    'validate_unet_config',
    'parameter_count',
    'build_unet',
    'denoise',
]
