"""Shared fixtures: mixtures, grids, small nets, and session-scoped training runs.

The expensive fixtures (full-size training runs) are session-scoped and lazy, so
the fast unit tests stay fast and the training-dependent tests share one run.
"""

from __future__ import annotations

import numpy as np
import pytest

from flowjump.model import StudentNet
from flowjump.oracle import GaussianMixture, denoiser_t
from flowjump.schedule import ScheduleConfig, TimeGrid, build_time_grid
from flowjump.training import TrainConfig, init_train_state, train_step


def oracle_teacher(mix: GaussianMixture):
    """Wrap a mixture's analytic denoiser as the solver-facing callable."""

    def den(x, t):
        return denoiser_t(mix, x, t)

    return den


@pytest.fixture(scope="session")
def sched() -> ScheduleConfig:
    return ScheduleConfig()


@pytest.fixture(scope="session")
def grid(sched) -> TimeGrid:
    return build_time_grid(sched)


@pytest.fixture(scope="session")
def single_gaussian() -> GaussianMixture:
    return GaussianMixture(weights=[1.0], means=[[0.0]], stds=[1.0])


@pytest.fixture(scope="session")
def two_mode() -> GaussianMixture:
    return GaussianMixture(weights=[0.5, 0.5], means=[[-1.0], [1.0]], stds=[0.2, 0.2])


@pytest.fixture(scope="session")
def mixture_2d() -> GaussianMixture:
    return GaussianMixture(
        weights=[0.3, 0.7],
        means=[[-1.0, 0.5], [1.0, -0.5]],
        stds=[0.3, 0.4],
    )


@pytest.fixture(scope="session")
def tiny_net(sched) -> StudentNet:
    return StudentNet(dim=1, schedule=sched, width=8, depth=2, n_freq=4)


@pytest.fixture(scope="session")
def full_net(sched) -> StudentNet:
    return StudentNet(dim=1, schedule=sched, width=128, depth=3, n_freq=16)


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(0)


def run_training(net, grid, cfg, teacher, mix, seed=0):
    state = init_train_state(net, grid, cfg, seed=seed)
    for _ in range(cfg.total_iters):
        state = train_step(state, cfg, teacher, mix)
    return state


@pytest.fixture(scope="session")
def tiny_trained_state(tiny_net, grid, two_mode):
    """A short oracle-teacher run: enough to exercise the full loop, not to converge."""
    cfg = TrainConfig(total_iters=50, batch_size=16, lambda_gan=1.0, gan_warmup_iters=25)
    return run_training(tiny_net, grid, cfg, oracle_teacher(two_mode), two_mode), cfg
