"""
Torch Datasets
==============

Thin torch.utils.data wrappers over in-memory clips. Network tensors use
the [C, T, H, W] layout expected by Conv3d; EchoClip frames are [T, C, H, W].
"""

from typing import List, Sequence, Tuple

import numpy as np
import torch
from einops import rearrange
from torch.utils.data import Dataset

from ..config import View
from ..domain.models import CaseRecord, EchoClip


def clip_to_tensor(clip: EchoClip, dtype: torch.dtype = torch.float32) -> torch.Tensor:
    """EchoClip frames [T, C, H, W] -> tensor [C, T, H, W]."""
    return rearrange(torch.from_numpy(np.array(clip.frames)), "t c h w -> c t h w").to(dtype)


def clips_to_batch(clips: Sequence[EchoClip], dtype: torch.dtype = torch.float32) -> torch.Tensor:
    """Stack clips into a [B, C, T, H, W] batch."""
    return torch.stack([clip_to_tensor(clip, dtype) for clip in clips])


def tensor_to_frames(tensor: torch.Tensor) -> np.ndarray:
    """Tensor [C, T, H, W] -> float32 frames [T, C, H, W]."""
    return rearrange(tensor.detach().cpu().float(), "c t h w -> t c h w").numpy()


def tensor_to_clip(tensor: torch.Tensor, view: View, case_id: str, frame_rate: float = 0.0) -> EchoClip:
    """Wrap a [C, T, H, W] tensor (already within [-1, 1]) as an EchoClip."""
    return EchoClip(frames=tensor_to_frames(tensor), view=view, case_id=case_id, frame_rate=frame_rate)


class ClipDataset(Dataset):
    """Single-view clips, e.g. A2C clips for unconditional training."""

    def __init__(self, clips: Sequence[EchoClip]):
        self._tensors = [clip_to_tensor(clip) for clip in clips]

    def __len__(self) -> int:
        return len(self._tensors)

    def __getitem__(self, index: int) -> torch.Tensor:
        return self._tensors[index]


class PairedClipDataset(Dataset):
    """(A4C, A2C) clip pairs for conditional training."""

    def __init__(self, cases: Sequence[CaseRecord]):
        pairs = [case for case in cases if case.a2c is not None]
        self._a4c = [clip_to_tensor(case.a4c) for case in pairs]
        self._a2c = [clip_to_tensor(case.a2c) for case in pairs]
        self.a4c_clips: List[EchoClip] = [case.a4c for case in pairs]

    def __len__(self) -> int:
        return len(self._a2c)

    def __getitem__(self, index: int) -> Tuple[torch.Tensor, torch.Tensor]:
        return self._a4c[index], self._a2c[index]


class EFDataset(Dataset):
    """Clips labelled with EF in percent."""

    def __init__(self, items: Sequence[Tuple[EchoClip, float]]):
        self._tensors = [clip_to_tensor(clip) for clip, _ in items]
        self._targets = torch.tensor([float(ef) for _, ef in items], dtype=torch.float32)

    def __len__(self) -> int:
        return len(self._tensors)

    def __getitem__(self, index: int) -> Tuple[torch.Tensor, torch.Tensor]:
        return self._tensors[index], self._targets[index]


__all__ = [
    'clip_to_tensor',
    'clips_to_batch',
    'tensor_to_frames',
    'tensor_to_clip',
    'ClipDataset',
    'PairedClipDataset',
    'EFDataset',
]
