"""
Warmup plus cosine-annealing learning rate.
"""

import math

import pytest
import torch

from echosynth.common.exceptions import OutOfRange
from echosynth.domain.models import TrainConfig
from echosynth.services.lr_schedule import apply_lr, lr_at


def test_linear_warmup():
    config = TrainConfig.conditional_defaults(max_iters=100, warmup_iters=10)
    assert lr_at(config, 0) == 0.0
    assert lr_at(config, 5) == pytest.approx(config.lr_max * 0.5)
    assert lr_at(config, 10) == config.lr_max


def test_cosine_decay():
    config = TrainConfig(max_iters=101, lr_max=1e-3, lr_min=1e-5)
    assert lr_at(config, 0) == config.lr_max
    midpoint = config.lr_min + 0.5 * (config.lr_max - config.lr_min) * (1 + math.cos(math.pi * 50 / 101))
    assert lr_at(config, 50) == pytest.approx(midpoint)
    assert lr_at(config, 100) == pytest.approx(config.lr_min, rel=5e-2)
    rates = [lr_at(config, i) for i in range(config.max_iters)]
    assert all(a >= b for a, b in zip(rates, rates[1:]))


def test_iteration_bounds():
    config = TrainConfig(max_iters=5)
    with pytest.raises(OutOfRange):
        lr_at(config, -1)
    with pytest.raises(OutOfRange):
        lr_at(config, 5)


def test_apply_lr_sets_every_group():
    optimizer = torch.optim.Adam([
        {"params": [torch.nn.Parameter(torch.zeros(1))]},
        {"params": [torch.nn.Parameter(torch.zeros(1))], "lr": 0.5},
    ])
    apply_lr(optimizer, 0.01)
    assert [group["lr"] for group in optimizer.param_groups] == [0.01, 0.01]
