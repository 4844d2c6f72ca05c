"""
Diffusion Trainer
=================

Two-phase training of the clip denoiser.

Phase 1 trains the host U-Net unconditionally on A2C clips. Phase 2
attaches a control branch and trains it (and, unless frozen, the host) to
denoise A2C clips conditioned on the paired A4C clip and its motion mask.

Every step draws, in this order and from one seeded ``torch.Generator``:
batch indices, steps t uniform in [1, T], and Gaussian noise. Both phases
use the same order, so at zero-initialised branch the first conditional
loss equals the unconditional loss on the same draws.
"""

import copy
import logging
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import torch
from tqdm import tqdm

from ..config import (
    DEFAULT_MASK_SIGMA,
    LOSS_SMOOTHING,
    PretrainSource,
    TrainPhase,
)
from ..common.decorators import log_execution, measure_time
from ..common.exceptions import ConfigError, DataEmpty, NonFiniteLoss
from ..domain.models import CaseRecord, EchoClip, TrainConfig, UNetConfig
from ..data.datasets import ClipDataset, PairedClipDataset, clips_to_batch
from ..diffusion.process import forward_diffuse, noise_prediction_loss
from ..diffusion.schedule import NoiseSchedule
from ..models.control import (
    ControlNetBranch,
    assemble_condition,
    condition_to_tensor,
    control_forward,
    init_control_branch,
    validate_branch,
)
from ..models.unet import UNet3D, build_unet, denoise
from .checkpointing import Checkpoint, state_dict_copy
from .lr_schedule import apply_lr, lr_at

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
ClipSource = Union[torch.Tensor, ClipDataset, Sequence[EchoClip]]
PairSource = Union[Tuple[torch.Tensor, torch.Tensor], PairedClipDataset, Sequence[CaseRecord]]

ABLATION_ROWS: Tuple[Tuple[str, PretrainSource, bool], ...] = (
    ("internal_finetune", PretrainSource.INTERNAL, False),
    ("internal_frozen", PretrainSource.INTERNAL, True),
    ("paired_only", PretrainSource.PAIRED_ONLY, False),
    ("scratch", PretrainSource.SCRATCH, False),
)


def smoothed_losses(history: Sequence[float], beta: float = LOSS_SMOOTHING) -> List[float]:
    """Bias-corrected exponential moving average of a loss history."""
    smoothed, running = [], 0.0
    for step, loss in enumerate(history, start=1):
        running = beta * running + (1.0 - beta) * loss
        smoothed.append(running / (1.0 - beta ** step))
    return smoothed


def _clip_tensor(source: ClipSource) -> torch.Tensor:
    if isinstance(source, torch.Tensor):
        return source
    if isinstance(source, ClipDataset):
        items = [source[i] for i in range(len(source))]
        return torch.stack(items) if items else torch.empty(0)
    clips = list(source)
    return clips_to_batch(clips) if clips else torch.empty(0)


def _pair_tensors(source: PairSource, sigma: float) -> Tuple[torch.Tensor, torch.Tensor]:
    """(conditions [N, 2, T, H, W], targets [N, 1, T, H, W])."""
    if isinstance(source, tuple) and len(source) == 2 and isinstance(source[0], torch.Tensor):
        return source
    dataset = source if isinstance(source, PairedClipDataset) else PairedClipDataset(list(source))
    if len(dataset) == 0:
        return torch.empty(0), torch.empty(0)
    conditions = torch.stack([condition_to_tensor(assemble_condition(clip, sigma)) for clip in dataset.a4c_clips])
    targets = torch.stack([dataset[i][1] for i in range(len(dataset))])
    return conditions, targets


def _generator(config: TrainConfig, resume: Optional[Checkpoint]) -> torch.Generator:
    generator = torch.Generator().manual_seed(config.seed)
    if resume is not None and resume.generator_state is not None:
        generator.set_state(resume.generator_state)
    return generator


def _run_loop(
    phase: TrainPhase,
    config: TrainConfig,
    schedule: NoiseSchedule,
    targets: torch.Tensor,
    loss_fn: Callable[[torch.Tensor, torch.Tensor, torch.Tensor, torch.Tensor], torch.Tensor],
    parameters: List[torch.nn.Parameter],
    make_checkpoint: Callable[[int, torch.optim.Optimizer, torch.Generator, List[float]], Checkpoint],
    resume: Optional[Checkpoint],
    checkpoint_dir: Optional[PathLike],
) -> Checkpoint:
    n = targets.shape[0]
    generator = _generator(config, resume)
    optimizer = torch.optim.Adam(parameters, lr=config.lr_max)
    history: List[float] = []
    start = 0
    if resume is not None:
        if resume.optimizer_state is not None:
            optimizer.load_state_dict(resume.optimizer_state)
        history = list(resume.loss_history)
        start = resume.iteration

    iterations = tqdm(range(start, config.max_iters), desc=phase.value, disable=not config.progress)
    for iteration in iterations:
        apply_lr(optimizer, lr_at(config, iteration))
        index = torch.randint(0, n, (config.batch_size,), generator=generator)
        t = torch.randint(1, schedule.T + 1, (config.batch_size,), generator=generator)
        x0 = targets[index]
        eps = torch.randn(x0.shape, generator=generator, dtype=x0.dtype)
        x_t = forward_diffuse(x0, t, eps, schedule)

        optimizer.zero_grad(set_to_none=True)
        loss = loss_fn(x_t, t, eps, index)
        value = float(loss.detach())
        if not np.isfinite(value):
            raise NonFiniteLoss(iteration, value, phase.value)
        loss.backward()
        optimizer.step()
        history.append(value)

        done = iteration + 1
        if done % config.log_every == 0 or done == config.max_iters:
            smoothed = smoothed_losses(history)[-1]
            logger.info(f"[{phase.value}] iter {done}/{config.max_iters} loss={value:.5f} smoothed={smoothed:.5f}")
            iterations.set_postfix(loss=f"{smoothed:.4f}")
        if checkpoint_dir is not None and config.checkpoint_every and done % config.checkpoint_every == 0:
            make_checkpoint(done, optimizer, generator, history).save(
                Path(checkpoint_dir) / f"{phase.value}_iter{done:07d}.pt"
            )

    return make_checkpoint(config.max_iters, optimizer, generator, history)


@log_execution()
@measure_time
def train_unconditional(
    net: UNet3D,
    dataset: ClipSource,
    schedule: NoiseSchedule,
    config: TrainConfig,
    checkpoint_dir: Optional[PathLike] = None,
    resume: Optional[Checkpoint] = None,
) -> Checkpoint:
    """
    Phase 1: minimise the noise-prediction loss on A2C clips.

    Args:
        net: Host U-Net, updated in place
        dataset: A2C clips (EchoClips, a ClipDataset or a [N, 1, T, H, W] tensor)
        schedule: Noise schedule
        config: Training config with phase=unconditional
        checkpoint_dir: Where periodic checkpoints go (every config.checkpoint_every)
        resume: Checkpoint to continue from

    Returns:
        Final checkpoint, loss history included

    Raises:
        DataEmpty: If there are no clips
        NonFiniteLoss: If a loss is NaN or infinite
    """
    if config.phase != TrainPhase.UNCONDITIONAL:
        raise ConfigError(f"train_unconditional needs phase=unconditional, got {config.phase.value}")
    dtype = next(net.parameters()).dtype
    targets = _clip_tensor(dataset).to(dtype)
    if targets.numel() == 0:
        raise DataEmpty("No clips for unconditional training")
    if resume is not None:
        net.load_state_dict(resume.host_state)
    net.train()

    def loss_fn(x_t, t, eps, index):
        return noise_prediction_loss(denoise(net, x_t, t), eps)

    def make_checkpoint(iteration, optimizer, generator, history):
        return Checkpoint(
            phase=TrainPhase.UNCONDITIONAL,
            iteration=iteration,
            unet_config=net.config,
            train_config=config,
            schedule=schedule,
            host_state=state_dict_copy(net),
            optimizer_state=copy.deepcopy(optimizer.state_dict()),
            generator_state=generator.get_state(),
            loss_history=list(history),
        )

    logger.info(f"Unconditional training on {targets.shape[0]} clip(s) for {config.max_iters} iteration(s)")
    return _run_loop(
        TrainPhase.UNCONDITIONAL, config, schedule, targets, loss_fn,
        list(net.parameters()), make_checkpoint, resume, checkpoint_dir,
    )


@log_execution()
@measure_time
def train_conditional(
    host: UNet3D,
    branch: ControlNetBranch,
    pairs: PairSource,
    schedule: NoiseSchedule,
    config: TrainConfig,
    sigma: float = DEFAULT_MASK_SIGMA,
    checkpoint_dir: Optional[PathLike] = None,
    resume: Optional[Checkpoint] = None,
) -> Checkpoint:
    """
    Phase 2: train the control branch (and the host unless freeze_host).

    Args:
        host: Host U-Net
        branch: Control branch initialised from the host
        pairs: Paired cases, a PairedClipDataset, or (conditions, targets) tensors
        schedule: Noise schedule
        config: Training config with phase=conditional
        sigma: Motion-mask blur
        checkpoint_dir: Where periodic checkpoints go
        resume: Checkpoint to continue from

    Raises:
        DataEmpty: If there are no pairs
        BranchMismatch: If the branch does not fit the host
        NonFiniteLoss: If a loss is NaN or infinite
    """
    if config.phase != TrainPhase.CONDITIONAL:
        raise ConfigError(f"train_conditional needs phase=conditional, got {config.phase.value}")
    validate_branch(host, branch)
    dtype = next(host.parameters()).dtype
    conditions, targets = _pair_tensors(pairs, sigma)
    if targets.numel() == 0:
        raise DataEmpty("No A4C/A2C pairs for conditional training")
    conditions, targets = conditions.to(dtype), targets.to(dtype)
    if resume is not None:
        host.load_state_dict(resume.host_state)
        if resume.branch_state is not None:
            branch.load_state_dict(resume.branch_state)

    host.requires_grad_(not config.freeze_host)
    host.train()
    branch.train()
    parameters = list(branch.parameters()) + ([] if config.freeze_host else list(host.parameters()))

    def loss_fn(x_t, t, eps, index):
        residuals = control_forward(branch, x_t, t, conditions[index])
        return noise_prediction_loss(denoise(host, x_t, t, residuals), eps)

    def make_checkpoint(iteration, optimizer, generator, history):
        return Checkpoint(
            phase=TrainPhase.CONDITIONAL,
            iteration=iteration,
            unet_config=host.config,
            train_config=config,
            schedule=schedule,
            host_state=state_dict_copy(host),
            branch_state=state_dict_copy(branch),
            optimizer_state=copy.deepcopy(optimizer.state_dict()),
            generator_state=generator.get_state(),
            loss_history=list(history),
        )

    logger.info(
        f"Conditional training on {targets.shape[0]} pair(s) for {config.max_iters} iteration(s), "
        f"host {'frozen' if config.freeze_host else 'trainable'}"
    )
    try:
        return _run_loop(
            TrainPhase.CONDITIONAL, config, schedule, targets, loss_fn,
            parameters, make_checkpoint, resume, checkpoint_dir,
        )
    finally:
        host.requires_grad_(True)


def pretrain_host(
    source: PretrainSource,
    unet_config: UNetConfig,
    schedule: NoiseSchedule,
    uncond_config: TrainConfig,
    internal_clips: ClipSource,
    pairs: PairSource,
    sigma: float = DEFAULT_MASK_SIGMA,
) -> UNet3D:
    """
    Host U-Net for a pre-training source.

    internal trains on a separate unconditional corpus, paired_only on the
    A2C clips of the training pairs, scratch returns the initialised net.
    """
    host = build_unet(unet_config, seed=uncond_config.seed)
    source = PretrainSource(source)
    if source == PretrainSource.SCRATCH:
        return host
    if source == PretrainSource.INTERNAL:
        clips = internal_clips
    else:
        clips = _pair_tensors(pairs, sigma)[1]
    train_unconditional(host, clips, schedule, uncond_config)
    return host


@log_execution()
def run_ablation(
    unet_config: UNetConfig,
    schedule: NoiseSchedule,
    uncond_config: TrainConfig,
    cond_config: TrainConfig,
    internal_clips: ClipSource,
    pairs: PairSource,
    out_dir: Optional[PathLike] = None,
    sigma: float = DEFAULT_MASK_SIGMA,
) -> Dict[str, Checkpoint]:
    """
    Train one conditional model per ablation row.

    Rows: internal_finetune, internal_frozen, paired_only, scratch.
    Checkpoints are saved as ``<out_dir>/<row>.pt`` when out_dir is given.
    """
    conditions, targets = _pair_tensors(pairs, sigma)
    hosts: Dict[PretrainSource, UNet3D] = {}
    results: Dict[str, Checkpoint] = {}
    for row, source, frozen in ABLATION_ROWS:
        if source not in hosts:
            hosts[source] = pretrain_host(
                source, unet_config, schedule, uncond_config, internal_clips, (conditions, targets), sigma
            )
        host = copy.deepcopy(hosts[source])
        branch = init_control_branch(host)
        config = cond_config.model_copy(update={"freeze_host": frozen, "pretrain_source": source})
        logger.info(f"Ablation row {row}: pretrain={source.value}, freeze_host={frozen}")
        checkpoint = train_conditional(host, branch, (conditions, targets), schedule, config, sigma)
        if out_dir is not None:
            checkpoint.save(Path(out_dir) / f"{row}.pt")
        results[row] = checkpoint
    return results


__all__ = [
    'ABLATION_ROWS',
    'smoothed_losses',
    'train_unconditional',
    'train_conditional',
    'pretrain_host',
    'run_ablation',
]
