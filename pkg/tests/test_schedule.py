"""
Noise schedules.
"""

import pytest
import torch

from echosynth.config import ScheduleKind
from echosynth.common.exceptions import InvalidScheduleParams
from echosynth.diffusion.schedule import NoiseSchedule, make_schedule


def test_linear_schedule_endpoints():
    schedule = make_schedule(ScheduleKind.LINEAR, T=1000)
    assert schedule.T == 1000
    assert schedule.beta.dtype == torch.float64
    assert schedule.beta[0].item() == pytest.approx(1e-4)
    assert schedule.beta[-1].item() == pytest.approx(0.02)


@pytest.mark.parametrize("kind", list(ScheduleKind))
def test_alpha_bar_invariants(kind):
    schedule = make_schedule(kind, T=200)
    assert bool(((schedule.beta > 0) & (schedule.beta < 1)).all())
    assert torch.equal(schedule.alpha, 1.0 - schedule.beta)
    assert bool((schedule.alpha_bar[1:] < schedule.alpha_bar[:-1]).all())
    assert schedule.alpha_bar[0].item() == schedule.alpha[0].item()
    for t in range(1, schedule.T):
        assert schedule.alpha_bar[t].item() == (schedule.alpha_bar[t - 1] * schedule.alpha[t]).item()


def test_posterior_variance():
    schedule = make_schedule(T=50)
    assert schedule.alpha_bar_prev[0].item() == 1.0
    assert schedule.posterior_variance[0].item() == 0.0
    assert bool((schedule.posterior_variance[1:] < schedule.beta[1:]).all())


def test_invalid_parameters():
    with pytest.raises(InvalidScheduleParams):
        make_schedule(T=0)
    with pytest.raises(InvalidScheduleParams):
        make_schedule(beta_start=0.0)
    with pytest.raises(InvalidScheduleParams):
        make_schedule(beta_start=0.01, beta_end=1.0)
    with pytest.raises(InvalidScheduleParams):
        make_schedule(beta_start=0.02, beta_end=0.01)


def test_state_restores_schedule():
    schedule = make_schedule(ScheduleKind.COSINE, T=100)
    restored = NoiseSchedule.from_state(schedule.to_state())
    assert restored.kind == ScheduleKind.COSINE
    assert torch.equal(restored.alpha_bar, schedule.alpha_bar)
