"""
Two-phase diffusion training and checkpoints.
"""

import copy

import pytest
import torch

from echosynth.config import PretrainSource, TrainPhase
from echosynth.common.exceptions import ConfigError, DataEmpty, MissingArtifact, NonFiniteLoss, ParseError
from echosynth.diffusion.schedule import make_schedule
from echosynth.domain.models import TrainConfig
from echosynth.models.control import control_forward, init_control_branch
from echosynth.models.unet import build_unet, denoise
from echosynth.services.checkpointing import CHECKPOINT_FORMAT, Checkpoint
from echosynth.services.diffusion_trainer import (
    ABLATION_ROWS,
    run_ablation,
    smoothed_losses,
    train_conditional,
    train_unconditional,
)


def uncond(**overrides):
    values = dict(max_iters=4, batch_size=2, lr_max=1e-3, lr_min=1e-5, seed=5, log_every=1)
    values.update(overrides)
    return TrainConfig(**values)


def cond(**overrides):
    values = dict(max_iters=4, batch_size=2, warmup_iters=0, seed=5, log_every=1)
    values.update(overrides)
    return TrainConfig.conditional_defaults(**values)


@pytest.fixture
def conditions(tiny_batch):
    generator = torch.Generator().manual_seed(9)
    return torch.rand((tiny_batch.shape[0], 2) + tuple(tiny_batch.shape[2:]), generator=generator) * 2 - 1


def test_smoothed_losses_are_bias_corrected():
    assert smoothed_losses([2.0, 2.0, 2.0]) == pytest.approx([2.0, 2.0, 2.0])
    smoothed = smoothed_losses([1.0, 3.0])
    assert smoothed[0] == pytest.approx(1.0)
    assert smoothed[1] == pytest.approx((0.9 * 0.1 * 1.0 + 0.1 * 3.0) / (1 - 0.81))


def test_unconditional_training_records_history(tiny_unet_config, tiny_batch, short_schedule):
    net = build_unet(tiny_unet_config)
    before = copy.deepcopy(net.state_dict())
    checkpoint = train_unconditional(net, tiny_batch, short_schedule, uncond())
    assert checkpoint.phase == TrainPhase.UNCONDITIONAL
    assert checkpoint.iteration == 4
    assert len(checkpoint.loss_history) == 4
    assert all(loss > 0 for loss in checkpoint.loss_history)
    assert any(not torch.equal(before[k], v) for k, v in net.state_dict().items())


def test_training_is_deterministic(tiny_unet_config, tiny_batch, short_schedule):
    runs = [
        train_unconditional(build_unet(tiny_unet_config), tiny_batch, short_schedule, uncond()).loss_history
        for _ in range(2)
    ]
    assert runs[0] == runs[1]


def test_phase_and_data_checks(tiny_unet_config, tiny_batch, short_schedule, conditions):
    net = build_unet(tiny_unet_config)
    with pytest.raises(ConfigError):
        train_unconditional(net, tiny_batch, short_schedule, cond())
    with pytest.raises(DataEmpty):
        train_unconditional(net, [], short_schedule, uncond())
    with pytest.raises(ConfigError):
        train_conditional(net, init_control_branch(net), (conditions, tiny_batch), short_schedule, uncond())


def test_non_finite_loss_aborts(tiny_unet_config, tiny_batch, short_schedule):
    poisoned = tiny_batch.clone()
    poisoned[:] = float("nan")
    with pytest.raises(NonFiniteLoss):
        train_unconditional(build_unet(tiny_unet_config), poisoned, short_schedule, uncond())


def test_first_conditional_loss_equals_unconditional(tiny_unet_config, tiny_batch, short_schedule, conditions):
    """A fresh control branch contributes nothing, so both phases see the same first loss."""
    plain = train_unconditional(build_unet(tiny_unet_config, seed=1), tiny_batch, short_schedule, uncond(max_iters=1))
    host = build_unet(tiny_unet_config, seed=1)
    controlled = train_conditional(
        host, init_control_branch(host), (conditions, tiny_batch), short_schedule, cond(max_iters=1),
    )
    assert controlled.loss_history[0] == plain.loss_history[0]


def test_frozen_host_stays_fixed(tiny_unet_config, tiny_batch, short_schedule, conditions):
    host = build_unet(tiny_unet_config)
    branch = init_control_branch(host)
    host_before = copy.deepcopy(host.state_dict())
    branch_before = copy.deepcopy(branch.state_dict())

    checkpoint = train_conditional(host, branch, (conditions, tiny_batch), short_schedule, cond(freeze_host=True))
    assert all(torch.equal(host_before[k], v) for k, v in host.state_dict().items())
    assert any(not torch.equal(branch_before[k], v) for k, v in branch.state_dict().items())
    assert all(p.requires_grad for p in host.parameters())
    assert checkpoint.branch_state is not None


def test_resume_reproduces_uninterrupted_run(tiny_unet_config, tiny_batch, short_schedule, tmp_path):
    config = uncond(checkpoint_every=2)
    straight = build_unet(tiny_unet_config)
    final = train_unconditional(straight, tiny_batch, short_schedule, config, checkpoint_dir=tmp_path)

    halfway = Checkpoint.load(tmp_path / "unconditional_iter0000002.pt")
    assert halfway.iteration == 2
    resumed = build_unet(tiny_unet_config, seed=99)
    result = train_unconditional(resumed, tiny_batch, short_schedule, config, resume=halfway)

    assert result.loss_history == pytest.approx(final.loss_history, rel=1e-6)
    for name, tensor in straight.state_dict().items():
        assert torch.allclose(resumed.state_dict()[name], tensor, atol=1e-6), name


def test_checkpoint_restores_networks(tiny_unet_config, tiny_batch, short_schedule, conditions, tmp_path):
    host = build_unet(tiny_unet_config)
    branch = init_control_branch(host)
    checkpoint = train_conditional(host, branch, (conditions, tiny_batch), short_schedule, cond(max_iters=2))
    path = checkpoint.save(tmp_path / "ckpt" / "final.pt")

    loaded = Checkpoint.load(path)
    assert loaded.phase == TrainPhase.CONDITIONAL
    assert loaded.train_config == checkpoint.train_config
    assert torch.equal(loaded.schedule.alpha_bar, short_schedule.alpha_bar)
    restored_host = loaded.build_host().eval()
    restored_branch = loaded.build_branch(restored_host).eval()
    host.eval()
    branch.eval()
    with torch.no_grad():
        expected = denoise(host, tiny_batch, 3, control_forward(branch, tiny_batch, 3, conditions))
        actual = denoise(restored_host, tiny_batch, 3, control_forward(restored_branch, tiny_batch, 3, conditions))
    assert torch.equal(expected, actual)


def test_checkpoint_load_errors(tmp_path):
    with pytest.raises(MissingArtifact):
        Checkpoint.load(tmp_path / "missing.pt")
    garbage = tmp_path / "garbage.pt"
    garbage.write_bytes(b"definitely not a checkpoint")
    with pytest.raises(ParseError):
        Checkpoint.load(garbage)
    future = tmp_path / "future.pt"
    torch.save({"header": {"format": CHECKPOINT_FORMAT, "version": 999}}, future)
    with pytest.raises(ParseError):
        Checkpoint.load(future)


def test_ablation_trains_every_row(tiny_unet_config, tiny_batch, short_schedule, conditions, tmp_path):
    results = run_ablation(
        tiny_unet_config, short_schedule, uncond(max_iters=2), cond(max_iters=2),
        tiny_batch, (conditions, tiny_batch), out_dir=tmp_path,
    )
    assert list(results) == [row for row, _, _ in ABLATION_ROWS]
    assert results["internal_frozen"].train_config.freeze_host
    assert not results["internal_finetune"].train_config.freeze_host
    assert results["scratch"].train_config.pretrain_source == PretrainSource.SCRATCH
    assert all(len(c.loss_history) == 2 for c in results.values())
    assert sorted(p.stem for p in tmp_path.glob("*.pt")) == sorted(results)


@pytest.mark.slow
def test_overfits_a_single_clip(tiny_unet_config, tiny_batch):
    """Training on one clip drives the smoothed loss well below its starting value."""
    schedule = make_schedule(T=100)
    config = TrainConfig(max_iters=500, batch_size=4, lr_max=2e-3, lr_min=1e-5, seed=0, log_every=100)
    checkpoint = train_unconditional(build_unet(tiny_unet_config), tiny_batch[:1], schedule, config)
    smoothed = smoothed_losses(checkpoint.loss_history)
    assert smoothed[-1] <= 0.1 * smoothed[0]


@pytest.mark.slow
def test_overfits_a_single_pair(tiny_unet_config, tiny_batch, conditions):
    """Conditional training on one (clip, condition) pair drives the smoothed loss well below its start."""
    schedule = make_schedule(T=100)
    config = TrainConfig.conditional_defaults(
        max_iters=500, batch_size=4, lr_max=2e-3, lr_min=1e-5, warmup_iters=10, seed=0, log_every=100,
    )
    host = build_unet(tiny_unet_config)
    checkpoint = train_conditional(
        host, init_control_branch(host), (conditions[:1], tiny_batch[:1]), schedule, config,
    )
    assert len(checkpoint.loss_history) == 500
    smoothed = smoothed_losses(checkpoint.loss_history)
    assert smoothed[-1] <= 0.1 * smoothed[0]
