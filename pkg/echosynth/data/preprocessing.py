"""
Clip Preprocessing
==================

Turns raw echo videos [N x C x H0 x W0] into fixed-shape EchoClips:
a 32-frame window, every second frame kept (16 frames), channels averaged
to grayscale, bilinear resize to 64x64, pixels mapped to [-1, 1].
"""

import logging
from typing import List, Optional, Tuple

import numpy as np
import torch
import torch.nn.functional as F

from ..config import (
    CLIP_SIZE,
    DEFAULT_WINDOW_STRIDE,
    PIXEL_MAX,
    PIXEL_MIN,
    TEMPORAL_STRIDE,
    WINDOW_FRAMES,
    View,
)
from ..common.exceptions import InvalidConfigError, OutOfBounds, ShapeMismatch, VideoTooShort
from ..domain.models import EchoClip

logger = logging.getLogger(__name__)


def enumerate_windows(raw_length: int, stride: int = DEFAULT_WINDOW_STRIDE) -> List[int]:
    """
    All window starts s with s + 32 <= raw_length, ascending.

    Raises:
        VideoTooShort: If raw_length < 32
        InvalidConfigError: If stride < 1
    """
    if stride < 1:
        raise InvalidConfigError(f"Window stride must be >= 1, got {stride}", {"stride": stride})
    if raw_length < WINDOW_FRAMES:
        raise VideoTooShort(raw_length, WINDOW_FRAMES)
    return list(range(0, raw_length - WINDOW_FRAMES + 1, stride))


def window_indices(window_start: int) -> np.ndarray:
    """Source frame indices kept for a window: start, start+2, ..., start+30."""
    return np.arange(window_start, window_start + WINDOW_FRAMES, TEMPORAL_STRIDE)


def source_range_for(raw: np.ndarray) -> Tuple[float, float]:
    """
    Intensity range used to map a source to [-1, 1].

    Integer sources use their dtype range (0..255 for 8-bit); float sources
    are taken to be in [0, 1].
    """
    if np.issubdtype(raw.dtype, np.integer):
        info = np.iinfo(raw.dtype)
        return float(max(info.min, 0)), float(info.max)
    return 0.0, 1.0


def to_grayscale(raw: np.ndarray) -> np.ndarray:
    """Average the channel axis of an [N, C, H, W] video, keeping C = 1."""
    if raw.ndim != 4:
        raise ShapeMismatch(("N", "C", "H", "W"), raw.shape, "raw video")
    if raw.shape[1] == 1:
        return raw.astype(np.float64, copy=False)
    return raw.astype(np.float64).mean(axis=1, keepdims=True)


def rescale(frames: np.ndarray, source_range: Tuple[float, float]) -> np.ndarray:
    """Fixed affine map from source_range to [-1, 1], clipped."""
    low, high = source_range
    scaled = (frames - low) / (high - low) * (PIXEL_MAX - PIXEL_MIN) + PIXEL_MIN
    return np.clip(scaled, PIXEL_MIN, PIXEL_MAX)


def to_uint8(frames: np.ndarray) -> np.ndarray:
    """Inverse of the 8-bit rescale, rounding to the nearest level."""
    levels = (np.asarray(frames, dtype=np.float64) - PIXEL_MIN) / (PIXEL_MAX - PIXEL_MIN) * 255.0
    return np.clip(np.rint(levels), 0, 255).astype(np.uint8)


def resize_frames(frames: np.ndarray, size: int = CLIP_SIZE) -> np.ndarray:
    """Bilinear spatial resize of [T, C, H, W] frames to [T, C, size, size]."""
    if frames.shape[-2:] == (size, size):
        return frames
    tensor = torch.from_numpy(np.ascontiguousarray(frames, dtype=np.float64))
    resized = F.interpolate(tensor, size=(size, size), mode="bilinear", align_corners=False)
    return resized.numpy()


def preprocess_clip(
    raw: np.ndarray,
    window_start: int,
    view: View = View.A2C,
    case_id: str = "",
    frame_rate: float = 0.0,
    source_range: Optional[Tuple[float, float]] = None,
) -> EchoClip:
    """
    Cut one 32-frame window from a raw video and normalize it.

    Args:
        raw: Video array [N, C, H0, W0]
        window_start: First source frame of the window
        view: View label of the clip
        case_id: Case identifier
        frame_rate: Source frame rate (metadata only)
        source_range: Intensity range mapped to [-1, 1]; inferred from dtype when None

    Returns:
        EchoClip of shape [16, 1, 64, 64]

    Raises:
        VideoTooShort: If N < 32
        OutOfBounds: If the window exceeds the video
    """
    raw = np.asarray(raw)
    if raw.ndim != 4:
        raise ShapeMismatch(("N", "C", "H", "W"), raw.shape, "raw video")
    length = raw.shape[0]
    if length < WINDOW_FRAMES:
        raise VideoTooShort(length, WINDOW_FRAMES)
    if window_start < 0 or window_start + WINDOW_FRAMES > length:
        raise OutOfBounds(window_start, WINDOW_FRAMES, length)

    source_range = source_range or source_range_for(raw)
    frames = to_grayscale(raw[window_indices(window_start)])
    frames = resize_frames(frames)
    frames = rescale(frames, source_range)

    return EchoClip(
        frames=frames.astype(np.float32),
        view=view,
        case_id=case_id,
        frame_rate=frame_rate,
    )


def preprocess_video(
    raw: np.ndarray,
    view: View,
    case_id: str,
    stride: int = DEFAULT_WINDOW_STRIDE,
    frame_rate: float = 0.0,
) -> List[EchoClip]:
    """Preprocess every window of a raw video in ascending start order."""
    raw = np.asarray(raw)
    starts = enumerate_windows(raw.shape[0], stride)
    logger.debug(f"{case_id}/{view.value}: {len(starts)} window(s) from {raw.shape[0]} frames")
    return [
        preprocess_clip(raw, start, view=view, case_id=case_id, frame_rate=frame_rate)
        for start in starts
    ]


__all__ = [
    'enumerate_windows',
    'window_indices',
    'source_range_for',
    'to_grayscale',
    'rescale',
    'to_uint8',
    'resize_frames',
    'preprocess_clip',
    'preprocess_video',
]
