"""
3D U-Net denoiser.
"""

import pytest
import torch

from echosynth.common.exceptions import InvalidConfigError, ShapeMismatch
from echosynth.domain.models import UNetConfig
from echosynth.models.unet import ControlResiduals, build_unet, denoise, injection_shapes


def test_output_matches_input_shape(tiny_unet_config, tiny_batch):
    net = build_unet(tiny_unet_config)
    t = torch.tensor([3, 500])
    assert denoise(net, tiny_batch, t).shape == tiny_batch.shape
    assert denoise(net, tiny_batch[0], 7).shape == tiny_batch[0].shape


def test_rejects_wrong_clip_shape(tiny_unet_config):
    net = build_unet(tiny_unet_config)
    with pytest.raises(ShapeMismatch):
        denoise(net, torch.zeros(1, 1, 4, 8, 8), 1)
    with pytest.raises(ShapeMismatch):
        denoise(net, torch.zeros(1, 2, 4, 16, 16), 1)


def test_build_is_seeded(tiny_unet_config):
    a = build_unet(tiny_unet_config, seed=3).state_dict()
    b = build_unet(tiny_unet_config, seed=3).state_dict()
    c = build_unet(tiny_unet_config, seed=4).state_dict()
    assert all(torch.equal(a[name], b[name]) for name in a)
    assert any(not torch.equal(a[name], c[name]) for name in a)


def test_build_leaves_global_rng_alone(tiny_unet_config):
    torch.manual_seed(123)
    expected = torch.rand(3)
    torch.manual_seed(123)
    build_unet(tiny_unet_config, seed=9)
    assert torch.equal(torch.rand(3), expected)


@pytest.mark.parametrize(
    "overrides",
    [
        {"channel_multipliers": (1, 2, 4)},
        {"image_size": 18},
        {"attention_levels": frozenset({2})},
        {"norm_groups": 3},
        {"attention_heads": 3},
    ],
)
def test_inconsistent_configs(tiny_unet_config, overrides):
    with pytest.raises(InvalidConfigError):
        build_unet(tiny_unet_config.model_copy(update=overrides))


def test_timestep_changes_prediction(tiny_unet_config, tiny_batch):
    net = build_unet(tiny_unet_config)
    with torch.no_grad():
        assert not torch.allclose(denoise(net, tiny_batch, 1), denoise(net, tiny_batch, 900))


def test_frame_order_matters(tiny_unet_config, tiny_batch):
    net = build_unet(tiny_unet_config)
    order = torch.tensor([3, 2, 1, 0])
    with torch.no_grad():
        permuted_input = denoise(net, tiny_batch[:, :, order], 10)
        permuted_output = denoise(net, tiny_batch, 10)[:, :, order]
    assert not torch.allclose(permuted_input, permuted_output)


def test_injection_shapes(tiny_unet_config):
    skips, middle, decoder = injection_shapes(tiny_unet_config, batch=2)
    assert skips == [(2, 8, 4, 16, 16), (2, 16, 4, 8, 8)]
    assert middle == (2, 16, 4, 8, 8)
    assert decoder == [(2, 16, 4, 16, 16)]


def test_zero_residuals_leave_output_unchanged(tiny_unet_config, tiny_batch):
    net = build_unet(tiny_unet_config)
    skips, middle, decoder = injection_shapes(tiny_unet_config, batch=2)
    zeros = ControlResiduals(
        skips=tuple(torch.zeros(s) for s in skips),
        middle=torch.zeros(middle),
        decoder=tuple(torch.zeros(d) for d in decoder),
    )
    with torch.no_grad():
        assert torch.equal(denoise(net, tiny_batch, 5, zeros), denoise(net, tiny_batch, 5))


def test_residuals_are_shape_checked(tiny_unet_config, tiny_batch):
    net = build_unet(tiny_unet_config)
    skips, middle, decoder = injection_shapes(tiny_unet_config, batch=1)
    wrong_batch = ControlResiduals(
        skips=tuple(torch.zeros(s) for s in skips),
        middle=torch.zeros(middle),
        decoder=tuple(torch.zeros(d) for d in decoder),
    )
    with pytest.raises(ShapeMismatch):
        denoise(net, tiny_batch, 5, wrong_batch)


def test_default_config_is_consistent():
    config = UNetConfig()
    assert config.level_channels == [32, 64, 64, 128]
    skips, middle, decoder = injection_shapes(config, batch=1)
    assert skips[-1] == (1, 128, 16, 8, 8)
    assert len(decoder) == config.levels - 1
