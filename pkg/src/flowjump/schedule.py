"""Noise-level bookkeeping: the curved discretization grid and training-time samplers.

All times in this package are noise levels (standard deviations of the perturbation
kernel), laid out on the curved grid

    t(xi) = (t_max^(1/rho) + xi * (t_min^(1/rho) - t_max^(1/rho)))^rho,  xi in [0, 1],

which concentrates grid points near t_min. Endpoints are forced exactly so that
downstream code can compare against sigma_max / sigma_min with ==.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ScheduleConfig",
    "TimeGrid",
    "time_from_fraction",
    "build_time_grid",
    "sample_dsm_time",
    "sample_training_triplet",
]


@dataclass(frozen=True, kw_only=True)
class ScheduleConfig:
    """Noise-level conventions shared by every module."""

    sigma_min: float = 0.002
    sigma_max: float = 80.0
    rho: float = 7.0
    sigma_data: float = 0.5
    n_grid: int = 18

    def __post_init__(self) -> None:
        if not (0.0 < self.sigma_min < self.sigma_max):
            raise ValueError(f"need 0 < sigma_min < sigma_max, got ({self.sigma_min}, {self.sigma_max})")
        if self.rho < 1.0:
            raise ValueError(f"rho must be >= 1, got {self.rho}")
        if self.n_grid < 2:
            raise ValueError(f"n_grid must be >= 2, got {self.n_grid}")
        if self.sigma_data <= 0.0:
            raise ValueError(f"sigma_data must be > 0, got {self.sigma_data}")


@dataclass(frozen=True)
class TimeGrid:
    """Descending noise levels t_0 > t_1 > ... > t_{N-1} with exact endpoints."""

    times: np.ndarray
    sigma_min: float
    sigma_max: float

    def __post_init__(self) -> None:
        t = np.asarray(self.times, dtype=np.float64)
        object.__setattr__(self, "times", t)
        if t.ndim != 1 or t.size < 2:
            raise ValueError("need at least two grid levels")
        if not np.all(np.diff(t) < 0.0):
            raise ValueError("grid must be strictly decreasing")
        if t[0] != self.sigma_max or t[-1] != self.sigma_min:
            raise ValueError("grid endpoints must equal sigma_max and sigma_min exactly")

    def __len__(self) -> int:
        return int(self.times.size)


def time_from_fraction(cfg: ScheduleConfig, xi):
    """Map a fraction xi in [0, 1] to a noise level on the curved scale.

    xi may be a scalar or an ndarray. xi=0 returns sigma_max exactly and xi=1
    returns sigma_min exactly.
    """
    xi_arr = np.asarray(xi, dtype=np.float64)
    if np.any(xi_arr < 0.0) or np.any(xi_arr > 1.0):
        raise ValueError(f"fraction must lie in [0, 1], got {xi}")
    inv = 1.0 / cfg.rho
    a = cfg.sigma_max**inv
    b = cfg.sigma_min**inv
    t = (a + xi_arr * (b - a)) ** cfg.rho
    t = np.where(xi_arr == 0.0, cfg.sigma_max, t)
    t = np.where(xi_arr == 1.0, cfg.sigma_min, t)
    return float(t) if np.isscalar(xi) or xi_arr.ndim == 0 else t


def build_time_grid(cfg: ScheduleConfig) -> TimeGrid:
    """Equi-divide [0, 1] into n_grid fractions and map them to noise levels."""
    n = cfg.n_grid
    xi = np.arange(n, dtype=np.float64) / (n - 1)
    return TimeGrid(times=time_from_fraction(cfg, xi), sigma_min=cfg.sigma_min, sigma_max=cfg.sigma_max)


def sample_dsm_time(cfg: ScheduleConfig, rng: np.random.Generator, size: int | None = None):
    """Draw noise levels for denoising-loss regression.

    Each draw is, with probability 1/2, exp(z) with z ~ Normal(-1.2, 1.2^2) clamped
    into [sigma_min, sigma_max]; otherwise time_from_fraction at xi ~ Uniform[0, 0.7].
    The second branch keeps large noise levels in play. Returns a scalar when size
    is None, else an ndarray of shape (size,).
    """
    n = 1 if size is None else int(size)
    pick_lognormal = rng.random(n) < 0.5
    z = rng.normal(-1.2, 1.2, size=n)
    xi = rng.uniform(0.0, 0.7, size=n)
    t = np.where(
        pick_lognormal,
        np.clip(np.exp(z), cfg.sigma_min, cfg.sigma_max),
        np.asarray(time_from_fraction(cfg, xi)),
    )
    return float(t[0]) if size is None else t


_TRIPLET_CACHE: dict[tuple[int, int], np.ndarray] = {}


def _admissible_triplets(n: int, max_ode_steps: int) -> np.ndarray:
    """All index triples (i, j, k) with i < j <= k <= n-1 and j - i <= max_ode_steps."""
    key = (n, max_ode_steps)
    cached = _TRIPLET_CACHE.get(key)
    if cached is None:
        triples = [
            (i, j, k)
            for i in range(n - 1)
            for j in range(i + 1, min(i + max_ode_steps, n - 1) + 1)
            for k in range(j, n)
        ]
        cached = np.asarray(triples, dtype=np.int64)
        _TRIPLET_CACHE[key] = cached
    return cached


def sample_training_triplet(
    grid: TimeGrid, max_ode_steps: int, rng: np.random.Generator
) -> tuple[float, float, float]:
    """Draw (t, s, u) uniformly over admissible grid triples.

    t is the start level, u the solver target, s the prediction target, with
    s <= u < t and at most max_ode_steps grid intervals between t and u. Returns
    the noise levels, not the indices.
    """
    if max_ode_steps < 1:
        raise ValueError(f"max_ode_steps must be >= 1, got {max_ode_steps}")
    triples = _admissible_triplets(len(grid), max_ode_steps)
    i, j, k = triples[rng.integers(len(triples))]
    t = float(grid.times[i])
    u = float(grid.times[j])
    s = float(grid.times[k])
    return t, s, u
