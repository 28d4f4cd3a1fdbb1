"""Samplers over any jump map G(x, t, s): the gamma family, the diffuse-then-solve
stochastic sampler, posterior-ranked rejection, and loss-guided correction.

The gamma family interpolates between fully deterministic jump sampling (gamma=0,
each step lands exactly on the next grid level) and denoise-to-zero-then-renoise
(gamma=1). Grids are descending with a final exact 0; the last jump injects no
noise for any gamma.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from flowjump.schedule import ScheduleConfig, time_from_fraction
from flowjump.solvers import DenoiserInterface, solver_step

__all__ = [
    "GInterface",
    "SamplerSpec",
    "sampler_times",
    "gamma_sample",
    "edm_stochastic_sample",
    "classifier_rejection_sample",
    "guided_trajectory_sample",
]

from typing import Callable, Protocol


class GInterface(Protocol):
    def __call__(self, x: np.ndarray, t: float, s: float) -> np.ndarray: ...


@dataclass(frozen=True)
class SamplerSpec:
    """gamma in [0,1], a descending time grid ending at exactly 0, and a seed."""

    gamma: float
    times: np.ndarray
    variant: str = "ctm_gamma"
    seed: int = 0

    def __post_init__(self) -> None:
        t = np.asarray(self.times, dtype=np.float64)
        object.__setattr__(self, "times", t)
        if not (0.0 <= self.gamma <= 1.0):
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")
        if t.ndim != 1 or t.size < 2 or not np.all(np.diff(t) < 0.0):
            raise ValueError("time grid must be 1D, length >= 2, strictly decreasing")
        if t[-1] != 0.0:
            raise ValueError("time grid must end at exactly 0")
        if self.variant not in ("ctm_gamma", "edm_stochastic"):
            raise ValueError(f"unknown variant {self.variant!r}")


def sampler_times(cfg: ScheduleConfig, nfe: int) -> np.ndarray:
    """Grid for an nfe-step run: curved-scale times at fractions i/nfe plus exact 0."""
    if nfe < 1:
        raise ValueError(f"nfe must be >= 1, got {nfe}")
    levels = [time_from_fraction(cfg, i / nfe) for i in range(nfe)]
    return np.asarray(levels + [0.0], dtype=np.float64)


def gamma_sample(
    G: GInterface,
    spec: SamplerSpec,
    x_T: np.ndarray,
    rng: np.random.Generator,
    record_trace: bool = False,
):
    """Iterate denoise-to-sqrt(1-gamma^2)*t_next, then renoise to t_next.

    x_T is the start batch (..., dim) at level times[0]. Returns (x_0, nfe, trace)
    with nfe counting G evaluations; trace is None unless requested.
    """
    x = np.asarray(x_T, dtype=np.float64)
    gamma = spec.gamma
    shrink = math.sqrt(max(0.0, 1.0 - gamma * gamma))
    trace = [(float(spec.times[0]), x.copy())] if record_trace else None
    nfe = 0
    for t_n, t_next in zip(spec.times[:-1], spec.times[1:]):
        t_mid = shrink * t_next
        x = G(x, float(t_n), float(t_mid))
        nfe += 1
        if gamma > 0.0 and t_next > 0.0:
            x = x + gamma * t_next * rng.standard_normal(x.shape)
        if record_trace:
            trace.append((float(t_next), x.copy()))
    return x, nfe, trace


def edm_stochastic_sample(
    den: DenoiserInterface,
    spec: SamplerSpec,
    x_T: np.ndarray,
    rng: np.random.Generator,
    sigma_max: float = 80.0,
    record_trace: bool = False,
):
    """Per step: diffuse up to (1+gamma) t_n, then integrate down to t_next.

    The downward solve is a single Heun step (Euler onto exactly 0). Diffusion
    targets above sigma_max are clamped with a warning.
    """
    x = np.asarray(x_T, dtype=np.float64)
    gamma = spec.gamma
    trace = [(float(spec.times[0]), x.copy())] if record_trace else None
    nfe = 0
    for t_n, t_next in zip(spec.times[:-1], spec.times[1:]):
        t_hat = (1.0 + gamma) * t_n
        if t_hat > sigma_max:
            warnings.warn(f"diffusion target {t_hat:.6g} clamped to sigma_max={sigma_max}")
            t_hat = sigma_max
        if t_hat > t_n:
            x = x + math.sqrt(t_hat * t_hat - t_n * t_n) * rng.standard_normal(x.shape)
        method = "euler" if t_next == 0.0 else "heun"
        x = solver_step(method, den, x, float(t_hat), float(t_next))
        nfe += 1 if method == "euler" else 2
        if record_trace:
            trace.append((float(t_next), x.copy()))
    return x, nfe, trace


def classifier_rejection_sample(
    G: GInterface,
    spec: SamplerSpec,
    posterior_fn: Callable[[np.ndarray, float], np.ndarray],
    class_k: int,
    rejection_ratio: float,
    n_keep: int,
    rng: np.random.Generator,
    dim: int = 1,
) -> np.ndarray:
    """Oversample by 1/(1-r), rank by class posterior at level 0, keep the top n_keep.

    Average sampler evaluations per kept sample are N/(1-r) with N = len(times)-1.
    """
    if not (0.0 <= rejection_ratio < 1.0):
        raise ValueError(f"rejection ratio must lie in [0, 1), got {rejection_ratio}")
    n_cand = math.ceil(n_keep / (1.0 - rejection_ratio))
    x_T = spec.times[0] * rng.standard_normal((n_cand, dim))
    x0, _, _ = gamma_sample(G, spec, x_T, rng)
    scores = np.asarray(posterior_fn(x0, 0.0))[:, class_k]
    order = np.argsort(-scores, kind="stable")
    return x0[order[:n_keep]]


def guided_trajectory_sample(
    G: GInterface,
    score_fn: Callable[[np.ndarray, float], np.ndarray],
    spec: SamplerSpec,
    x_ref: np.ndarray,
    loss_grad_fn: Callable[[np.ndarray, np.ndarray], np.ndarray] | None,
    M: int,
    zeta: float,
    c_t: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Gamma sampling started from a diffused reference, with M corrector moves
    per level: x += (zeta/2) (score - c_t * dL/dx at a freshly noised reference)
    + sqrt(zeta) * noise. The default loss gradient is x minus the noised reference.
    """
    if M < 0 or zeta < 0.0:
        raise ValueError("need M >= 0 and zeta >= 0")
    if loss_grad_fn is None:
        loss_grad_fn = lambda x, y: x - y  # noqa: E731  (squared-distance gradient)
    x_ref = np.asarray(x_ref, dtype=np.float64)
    gamma = spec.gamma
    shrink = math.sqrt(max(0.0, 1.0 - gamma * gamma))
    x = x_ref + spec.times[0] * rng.standard_normal(x_ref.shape)
    for t_prev, t_n in zip(spec.times[:-1], spec.times[1:]):
        t_mid = shrink * t_n
        x = G(x, float(t_prev), float(t_mid))
        for _ in range(M):
            eps = rng.standard_normal(x.shape)
            eps2 = rng.standard_normal(x.shape)
            drift = score_fn(x, float(t_mid)) - c_t * loss_grad_fn(x, x_ref + t_mid * eps)
            x = x + 0.5 * zeta * drift + math.sqrt(zeta) * eps2
        if gamma > 0.0 and t_n > 0.0:
            x = x + gamma * t_n * rng.standard_normal(x.shape)
    return x
