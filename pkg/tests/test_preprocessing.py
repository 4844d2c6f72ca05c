"""
Window enumeration, temporal subsampling and intensity normalisation.
"""

import numpy as np
import pytest

from echosynth.config import ExitCode, View
from echosynth.common.exceptions import InvalidConfigError, OutOfBounds, VideoTooShort, exit_code_for
from echosynth.data.preprocessing import (
    enumerate_windows,
    preprocess_clip,
    preprocess_video,
    rescale,
    to_uint8,
    window_indices,
)


def ramp_video(length: int, size: int = 64) -> np.ndarray:
    """Float video in [0, 1] whose frame i is constant i / (length - 1)."""
    values = np.arange(length, dtype=np.float64) / (length - 1)
    return np.broadcast_to(values[:, None, None, None], (length, 1, size, size)).copy()


def test_enumerate_windows():
    assert enumerate_windows(32) == [0]
    assert enumerate_windows(64) == [0, 16, 32]
    assert enumerate_windows(70, stride=8) == [0, 8, 16, 24, 32]
    with pytest.raises(VideoTooShort):
        enumerate_windows(31)
    with pytest.raises(InvalidConfigError):
        enumerate_windows(64, stride=0)


def test_window_keeps_every_other_frame():
    assert window_indices(10).tolist() == list(range(10, 42, 2))


def test_clip_frames_follow_the_source():
    """Frame k of the clip is source frame start + 2k, mapped affinely to [-1, 1]."""
    video = ramp_video(64)
    clip = preprocess_clip(video, 16, view=View.A4C, case_id="ramp")
    expected = (np.arange(16, 48, 2) / 63.0) * 2.0 - 1.0
    assert clip.frames.shape == (16, 1, 64, 64)
    assert np.allclose(clip.frames[:, 0, 0, 0], expected, atol=1e-6)
    assert clip.view == View.A4C
    assert clip.case_id == "ramp"


def test_window_bounds():
    video = ramp_video(40)
    with pytest.raises(OutOfBounds):
        preprocess_clip(video, 10)
    with pytest.raises(OutOfBounds):
        preprocess_clip(video, -1)
    with pytest.raises(VideoTooShort):
        preprocess_clip(ramp_video(20), 0)


def test_preprocessing_is_deterministic():
    rng = np.random.default_rng(3)
    video = rng.integers(0, 256, size=(40, 3, 80, 96), dtype=np.uint8)
    first = preprocess_clip(video, 4)
    second = preprocess_clip(video, 4)
    assert first.frames.tobytes() == second.frames.tobytes()
    assert first.frames.min() >= -1.0 and first.frames.max() <= 1.0


def test_uint8_levels_survive_normalisation():
    """8-bit sources at the clip size come back unchanged through to_uint8."""
    rng = np.random.default_rng(0)
    video = rng.integers(0, 256, size=(32, 1, 64, 64), dtype=np.uint8)
    clip = preprocess_clip(video, 0)
    assert np.array_equal(to_uint8(clip.frames), video[window_indices(0)])


def test_rescale_clips_out_of_range_values():
    values = np.array([-0.5, 0.0, 0.5, 1.0, 1.5])
    assert rescale(values, (0.0, 1.0)).tolist() == [-1.0, -1.0, 0.0, 1.0, 1.0]


def test_preprocess_video_yields_every_window():
    clips = preprocess_video(ramp_video(64), View.A2C, "ramp")
    assert len(clips) == 3
    assert all(clip.view == View.A2C for clip in clips)
    assert clips[1].frames[0, 0, 0, 0] == pytest.approx(16 / 63.0 * 2.0 - 1.0, abs=1e-6)


def test_bad_stride_maps_to_configuration_exit_code():
    with pytest.raises(InvalidConfigError) as excinfo:
        enumerate_windows(64, stride=0)
    assert exit_code_for(excinfo.value) == ExitCode.CONFIG_ERROR
