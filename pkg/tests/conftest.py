"""
Shared fixtures
===============

Tiny network configurations, short noise schedules and a handful of
phantom studies. Networks that only see raw tensors use 16x16 frames;
anything that passes through EchoClip needs the full 16x1x64x64 geometry.
"""

import numpy as np
import pytest
import torch

from echosynth.config import View, Split, Provenance
from echosynth.diffusion.schedule import make_schedule
from echosynth.domain.models import CaseRecord, EchoClip, UNetConfig
from echosynth.phantom.generator import generate_phantom_case, phantom_spec_for_ef


def random_clip(seed: int, view: View = View.A4C, case_id: str = "case0") -> EchoClip:
    rng = np.random.default_rng(seed)
    frames = rng.uniform(-1.0, 1.0, size=(16, 1, 64, 64)).astype(np.float32)
    return EchoClip(frames=frames, view=view, case_id=case_id)


def random_case(seed: int, case_id: str, ef: float, split: Split = Split.TRAIN,
                provenance: Provenance = Provenance.PHANTOM, with_a2c: bool = True) -> CaseRecord:
    return CaseRecord(
        a4c=random_clip(seed, View.A4C, case_id),
        a2c=random_clip(seed + 1000, View.A2C, case_id) if with_a2c else None,
        ef_true=ef,
        split=split,
        provenance=provenance,
    )


@pytest.fixture
def tiny_unet_config() -> UNetConfig:
    """Two levels on 4 x 16 x 16 clips."""
    return UNetConfig(
        levels=2,
        base_channels=8,
        channel_multipliers=(1, 2),
        time_embed_dim=16,
        attention_levels=frozenset({1}),
        image_size=16,
        frames=4,
        attention_heads=2,
        norm_groups=2,
    )


@pytest.fixture
def clip_unet_config() -> UNetConfig:
    """Full clip geometry with very narrow layers."""
    return UNetConfig(
        levels=2,
        base_channels=4,
        channel_multipliers=(1, 2),
        time_embed_dim=8,
        attention_levels=frozenset({1}),
        image_size=64,
        frames=16,
        attention_heads=2,
        norm_groups=2,
    )


@pytest.fixture
def short_schedule():
    return make_schedule(T=10)


@pytest.fixture
def tiny_batch(tiny_unet_config) -> torch.Tensor:
    generator = torch.Generator().manual_seed(0)
    shape = (2, 1, tiny_unet_config.frames, tiny_unet_config.image_size, tiny_unet_config.image_size)
    return torch.rand(shape, generator=generator) * 2.0 - 1.0


@pytest.fixture(scope="session")
def phantom_cases():
    """Six rendered phantom studies with distinct EF."""
    efs = [25.0, 35.0, 45.0, 55.0, 65.0, 75.0]
    return [
        generate_phantom_case(phantom_spec_for_ef(ef, 500.0 + 20.0 * i, seed=i), case_id=f"ph{i:02d}")
        for i, ef in enumerate(efs)
    ]
