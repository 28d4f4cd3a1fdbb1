"""Desk-scale trajectory-consistency distillation with analytic Gaussian-mixture teachers.

The package is organized around one idea: a student network G(x, t, s) that maps a
noisy point at noise level t directly to the probability-flow solution at any lower
level s, trained against an analytic teacher whose marginals, scores, and denoisers
are available in closed form.
"""

from flowjump.schedule import ScheduleConfig, TimeGrid, build_time_grid, time_from_fraction
from flowjump.oracle import GaussianMixture

__all__ = [
    "ScheduleConfig",
    "TimeGrid",
    "build_time_grid",
    "time_from_fraction",
    "GaussianMixture",
]
