"""
Network Layers
==============

Building blocks shared by the denoising U-Net and its control branch.
Tensors use the [B, C, T, H, W] layout.
"""

import math

import torch
import torch.nn as nn
import torch.nn.functional as F
from einops import rearrange


def timestep_embedding(t: torch.Tensor, dim: int, max_period: float = 10000.0) -> torch.Tensor:
    """Sinusoidal embedding of integer steps t [B] -> [B, dim]."""
    half = dim // 2
    freqs = torch.exp(-math.log(max_period) * torch.arange(half, dtype=torch.float64, device=t.device) / half)
    args = t.to(torch.float64)[:, None] * freqs[None, :]
    emb = torch.cat([torch.sin(args), torch.cos(args)], dim=1)
    if dim % 2:
        emb = F.pad(emb, (0, 1))
    return emb


class TimeEmbedding(nn.Module):
    """Sinusoidal features followed by a two-layer SiLU MLP."""

    def __init__(self, sinusoid_dim: int, embed_dim: int):
        super().__init__()
        self.sinusoid_dim = sinusoid_dim
        self.mlp = nn.Sequential(
            nn.Linear(sinusoid_dim, embed_dim),
            nn.SiLU(),
            nn.Linear(embed_dim, embed_dim),
        )

    def forward(self, t: torch.Tensor) -> torch.Tensor:
        emb = timestep_embedding(t, self.sinusoid_dim)
        return self.mlp(emb.to(self.mlp[0].weight.dtype))


class ResBlock3D(nn.Module):
    """GroupNorm-SiLU-Conv3d twice, with the time embedding added in between."""

    def __init__(self, in_channels: int, out_channels: int, time_embed_dim: int, groups: int):
        super().__init__()
        self.norm1 = nn.GroupNorm(groups, in_channels)
        self.conv1 = nn.Conv3d(in_channels, out_channels, 3, padding=1)
        self.time_proj = nn.Linear(time_embed_dim, out_channels)
        self.norm2 = nn.GroupNorm(groups, out_channels)
        self.conv2 = nn.Conv3d(out_channels, out_channels, 3, padding=1)
        self.skip = nn.Conv3d(in_channels, out_channels, 1) if in_channels != out_channels else nn.Identity()

    def forward(self, x: torch.Tensor, t_emb: torch.Tensor) -> torch.Tensor:
        h = self.conv1(F.silu(self.norm1(x)))
        h = h + self.time_proj(F.silu(t_emb))[:, :, None, None, None]
        h = self.conv2(F.silu(self.norm2(h)))
        return self.skip(x) + h


class TemporalAttention(nn.Module):
    """
    Multi-head self-attention across frames, independently per spatial location.

    Frame positions enter through a sinusoidal embedding on the queries and
    keys, so the block is sensitive to frame order.
    """

    def __init__(self, channels: int, heads: int, groups: int):
        super().__init__()
        self.heads = heads
        self.norm = nn.GroupNorm(groups, channels)
        self.qkv = nn.Linear(channels, channels * 3)
        self.proj = nn.Linear(channels, channels)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        b, c, t, h, w = x.shape
        tokens = rearrange(self.norm(x), "b c t h w -> (b h w) t c")
        position = timestep_embedding(torch.arange(t, device=x.device), c).to(x.dtype)
        q, k, v = self.qkv(tokens).chunk(3, dim=-1)
        q = q + position
        k = k + position
        q, k, v = (rearrange(z, "n t (g d) -> n g t d", g=self.heads) for z in (q, k, v))
        out = F.scaled_dot_product_attention(q, k, v)
        out = self.proj(rearrange(out, "n g t d -> n t (g d)"))
        return x + rearrange(out, "(b h w) t c -> b c t h w", b=b, h=h, w=w)


class Downsample3D(nn.Module):
    """Halve H and W; time is untouched."""

    def __init__(self, channels: int):
        super().__init__()
        self.conv = nn.Conv3d(channels, channels, 3, stride=(1, 2, 2), padding=1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.conv(x)


class Upsample3D(nn.Module):
    """Double H and W by nearest-neighbour interpolation then a Conv3d."""

    def __init__(self, channels: int):
        super().__init__()
        self.conv = nn.Conv3d(channels, channels, 3, padding=1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.conv(F.interpolate(x, scale_factor=(1, 2, 2), mode="nearest"))


class LevelBlock(nn.Module):
    """ResNet block with optional temporal attention, used at every encoder and decoder level."""

    def __init__(self, in_channels: int, out_channels: int, time_embed_dim: int,
                 groups: int, heads: int, attention: bool):
        super().__init__()
        self.res = ResBlock3D(in_channels, out_channels, time_embed_dim, groups)
        self.attn = TemporalAttention(out_channels, heads, groups) if attention else None

    def forward(self, x: torch.Tensor, t_emb: torch.Tensor) -> torch.Tensor:
        h = self.res(x, t_emb)
        if self.attn is not None:
            h = self.attn(h)
        return h


class MiddleBlock(nn.Module):
    """ResNet, optional temporal attention, ResNet at the bottleneck resolution."""

    def __init__(self, channels: int, time_embed_dim: int, groups: int, heads: int, attention: bool = True):
        super().__init__()
        self.res1 = ResBlock3D(channels, channels, time_embed_dim, groups)
        self.attn = TemporalAttention(channels, heads, groups) if attention else None
        self.res2 = ResBlock3D(channels, channels, time_embed_dim, groups)

    def forward(self, x: torch.Tensor, t_emb: torch.Tensor) -> torch.Tensor:
        h = self.res1(x, t_emb)
        if self.attn is not None:
            h = self.attn(h)
        return self.res2(h, t_emb)


def zero_conv3d(in_channels: int, out_channels: int) -> nn.Conv3d:
    """1x1x1 Conv3d with weights and bias set to exact zeros."""
    conv = nn.Conv3d(in_channels, out_channels, 1)
    nn.init.zeros_(conv.weight)
    nn.init.zeros_(conv.bias)
    return conv


__all__ = [
    'timestep_embedding',
    'TimeEmbedding',
    'ResBlock3D',
    'TemporalAttention',
    'Downsample3D',
    'Upsample3D',
    'LevelBlock',
    'MiddleBlock',
    'zero_conv3d',
]
