"""
EF Regression Backbones
=======================

Clip-to-EF regressors operating on [B, 1, T, H, W] tensors. All backbones
end in a single linear output per clip; predictions are not clamped here.
"""

from typing import Tuple

import torch
import torch.nn as nn
from einops import rearrange

from ..domain.models import EFBackboneConfig

# Mid-range EF; the head bias starts here.
INITIAL_EF = 50.0


def _norm(channels: int) -> nn.GroupNorm:
    return nn.GroupNorm(min(8, channels), channels)


class EFRegressor(nn.Module):
    """Base class: ``features`` maps clips to [B, F]; ``head`` maps to [B, 1]."""

    def __init__(self, config: EFBackboneConfig, feature_dim: int):
        super().__init__()
        self.config = config
        self.head = nn.Linear(feature_dim, 1)
        nn.init.constant_(self.head.bias, INITIAL_EF)

    def features(self, x: torch.Tensor) -> torch.Tensor:
        raise NotImplementedError

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.head(self.features(x)).squeeze(-1)


class Small3DCNN(EFRegressor):
    """
    Five Conv3d-GroupNorm-ReLU blocks, global average pooling, linear head.

    About 208k parameters at the default width of 16.
    """

    def __init__(self, config: EFBackboneConfig):
        width = config.width
        channels = [width, width * 2, width * 2, width * 4, width * 4]
        super().__init__(config, channels[-1])
        in_channels = config.input_shape[1]
        blocks = []
        for index, out_channels in enumerate(channels):
            # time is halved from the third block on, space from the second
            stride = (2 if index >= 2 else 1, 2 if index >= 1 else 1, 2 if index >= 1 else 1)
            blocks += [
                nn.Conv3d(in_channels, out_channels, 3, stride=stride, padding=1),
                _norm(out_channels),
                nn.ReLU(inplace=True),
            ]
            in_channels = out_channels
        self.body = nn.Sequential(*blocks)

    def features(self, x: torch.Tensor) -> torch.Tensor:
        return self.body(x).mean(dim=(2, 3, 4))


class Conv2Plus1D(nn.Sequential):
    """Spatial 1x3x3 convolution followed by temporal 3x1x1 convolution."""

    def __init__(self, in_channels: int, out_channels: int, stride: Tuple[int, int, int]):
        super().__init__(
            nn.Conv3d(in_channels, out_channels, (1, 3, 3), stride=(1, stride[1], stride[2]), padding=(0, 1, 1)),
            _norm(out_channels),
            nn.ReLU(inplace=True),
            nn.Conv3d(out_channels, out_channels, (3, 1, 1), stride=(stride[0], 1, 1), padding=(1, 0, 0)),
        )


class ResBlock2Plus1D(nn.Module):
    def __init__(self, in_channels: int, out_channels: int, stride: Tuple[int, int, int]):
        super().__init__()
        self.conv = Conv2Plus1D(in_channels, out_channels, stride)
        self.norm = _norm(out_channels)
        self.shortcut = (
            nn.Identity() if in_channels == out_channels and stride == (1, 1, 1)
            else nn.Conv3d(in_channels, out_channels, 1, stride=stride)
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return torch.relu(self.norm(self.conv(x)) + self.shortcut(x))


class ResNet2Plus1DLike(EFRegressor):
    """Compact residual network with factorised (2+1)D convolutions."""

    def __init__(self, config: EFBackboneConfig):
        width = config.width
        super().__init__(config, width * 8)
        self.stem = nn.Sequential(
            nn.Conv3d(config.input_shape[1], width, (3, 5, 5), stride=(1, 2, 2), padding=(1, 2, 2)),
            _norm(width),
            nn.ReLU(inplace=True),
        )
        self.stages = nn.Sequential(
            ResBlock2Plus1D(width, width * 2, (1, 2, 2)),
            ResBlock2Plus1D(width * 2, width * 4, (2, 2, 2)),
            ResBlock2Plus1D(width * 4, width * 8, (2, 2, 2)),
        )

    def features(self, x: torch.Tensor) -> torch.Tensor:
        return self.stages(self.stem(x)).mean(dim=(2, 3, 4))


class TransformerLike(EFRegressor):
    """Per-frame patch embedding, a small transformer encoder over all tokens, mean pooling."""

    def __init__(self, config: EFBackboneConfig, patch: int = 8, depth: int = 2, heads: int = 4):
        dim = config.width * 4
        super().__init__(config, dim)
        frames, channels, height, width = config.input_shape
        self.patch_embed = nn.Conv3d(channels, dim, (1, patch, patch), stride=(1, patch, patch))
        tokens = frames * (height // patch) * (width // patch)
        self.position = nn.Parameter(torch.zeros(1, tokens, dim))
        nn.init.normal_(self.position, std=0.02)
        layer = nn.TransformerEncoderLayer(dim, heads, dim * 2, dropout=0.0, batch_first=True)
        self.encoder = nn.TransformerEncoder(layer, depth)
        self.norm = nn.LayerNorm(dim)

    def features(self, x: torch.Tensor) -> torch.Tensor:
        tokens = rearrange(self.patch_embed(x), "b d t h w -> b (t h w) d") + self.position
        return self.norm(self.encoder(tokens)).mean(dim=1)


def parameter_count(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())


__all__ = [
    'INITIAL_EF',
    'EFRegressor',
    'Small3DCNN',
    'ResNet2Plus1DLike',
    'TransformerLike',
    'parameter_count',
]
