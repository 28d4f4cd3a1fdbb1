"""Integrators for the probability-flow ODE dx/dt = (x - den(x,t)) / t.

Any callable (x, t) -> denoised point works as the denoiser: the analytic mixture
posterior mean, or a student network's diagonal. Steps land on the curved-scale
restriction of [s, t] (same spacing family as the training grid), and a step that
ends at exactly 0 falls back from Heun to Euler since the Heun form divides by the
target level.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np

__all__ = [
    "DenoiserInterface",
    "SolveTrace",
    "IntegrationError",
    "rho_spaced_times",
    "solver_step",
    "solve_ode",
    "reference_solution",
    "sde_euler_maruyama_step",
    "OrderEstimate",
    "convergence_order_probe",
]


class DenoiserInterface(Protocol):
    def __call__(self, x: np.ndarray, t: float) -> np.ndarray: ...


@dataclass
class SolveTrace:
    """Visited times/states plus denoiser-evaluation accounting."""

    times: list[float] = field(default_factory=list)
    states: list[np.ndarray] = field(default_factory=list)
    nfe: int = 0


class IntegrationError(RuntimeError):
    def __init__(self, message: str, trace: SolveTrace):
        super().__init__(message)
        self.trace = trace


def rho_spaced_times(t: float, s: float, n_steps: int, rho: float = 7.0) -> np.ndarray:
    """n_steps+1 descending times from t to s, spaced on the rho-curved scale.

    Restricting the training grid's spacing law to [s, t] reproduces the grid's own
    interior points when t and s are grid points n_steps indices apart.
    """
    if n_steps < 1:
        raise ValueError(f"n_steps must be >= 1, got {n_steps}")
    frac = np.arange(n_steps + 1, dtype=np.float64) / n_steps
    inv = 1.0 / rho
    times = (t**inv + frac * (s**inv - t**inv)) ** rho
    times[0] = t
    times[-1] = s
    return times


def _euler(den, x, t: float, s: float):
    d = den(x, t)
    c = s / t
    return x * c + d * (1.0 - c)


def solver_step(method: str, den: DenoiserInterface, x, t: float, s: float):
    """One integrator step from level t down to level s.

    euler: (s/t) x + (1 - s/t) den(x, t)
    heun:  x - ((t-s)/2) [(x - den(x,t))/t + (x_E - den(x_E, s))/s],  x_E the euler result
    """
    if method == "euler":
        if not (0.0 <= s < t):
            raise ValueError(f"euler needs 0 <= s < t, got s={s}, t={t}")
        return _euler(den, x, t, s)
    if method == "heun":
        if not (0.0 < s < t):
            raise ValueError(f"heun needs 0 < s < t (it divides by s), got s={s}, t={t}")
        x_e = _euler(den, x, t, s)
        v_t = (x - den(x, t)) / t
        v_s = (x_e - den(x_e, s)) / s
        return x - (0.5 * (t - s)) * (v_t + v_s)
    raise ValueError(f"unknown method {method!r}")


def solve_ode(
    method: str,
    den: DenoiserInterface,
    x,
    t: float,
    s: float,
    n_steps: int,
    rho: float = 7.0,
    record: bool = False,
) -> tuple[np.ndarray, SolveTrace]:
    """Compose solver steps over the curved-scale restriction of [s, t].

    The last step of a heun run onto s=0 is an euler step. Raises IntegrationError
    (with the partial trace attached) if the state leaves the finite range.
    """
    if not (t > s >= 0.0):
        raise ValueError(f"need t > s >= 0, got t={t}, s={s}")
    times = rho_spaced_times(t, s, n_steps, rho=rho)
    trace = SolveTrace(times=[float(t)], states=[np.array(x, dtype=np.float64)] if record else [])
    for a, b in zip(times[:-1], times[1:]):
        step_method = "euler" if (method == "heun" and b == 0.0) else method
        x = solver_step(step_method, den, x, float(a), float(b))
        trace.nfe += 1 if step_method == "euler" else 2
        trace.times.append(float(b))
        if record:
            trace.states.append(np.array(x, dtype=np.float64))
        if not np.all(np.isfinite(x)):
            raise IntegrationError(f"non-finite state at t={b}", trace)
    return x, trace


def _velocity(den: DenoiserInterface, x, t: float):
    """(x - den(x,t)) / t, extended by continuity to 0 at t=0.

    The extension is exact: the numerator shrinks like t^2 times the score, so the
    ratio vanishes as t -> 0 and the endpoint evaluation needs no denoiser call.
    """
    if t == 0.0:
        return np.zeros_like(np.asarray(x, dtype=np.float64))
    return (x - den(x, t)) / t


def reference_solution(den: DenoiserInterface, x, t: float, s: float, n_steps: int = 240):
    """High-accuracy stand-in for an exact solve: fine-grid classical RK4.

    A second-order stepper cannot reach the 1e-6 target on the full [0.002, 80]
    span at any reasonable fixed grid, so the reference uses fourth order. The
    240-step default keeps the closed-form benchmark error below 1e-6 relative
    (worst measured span: ~1e-7) and doubling the grid moves the output by less
    than 1e-7; both are pinned in tests.
    """
    if s == t:
        return np.asarray(x, dtype=np.float64)
    if not (t > s >= 0.0):
        raise ValueError(f"need t > s >= 0, got t={t}, s={s}")
    times = rho_spaced_times(t, s, max(n_steps, 20))
    x = np.asarray(x, dtype=np.float64)
    for a, b in zip(times[:-1], times[1:]):
        h = b - a
        mid = 0.5 * (a + b)
        k1 = _velocity(den, x, a)
        k2 = _velocity(den, x + 0.5 * h * k1, mid)
        k3 = _velocity(den, x + 0.5 * h * k2, mid)
        k4 = _velocity(den, x + h * k3, b)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(x)):
            raise IntegrationError(f"non-finite state at t={b}", SolveTrace(times=[float(b)]))
    return x


def sde_euler_maruyama_step(score_fn, x, t: float, dt: float, rng: np.random.Generator):
    """One reverse-SDE step: x + 2 t dt score(x,t) + sqrt(2 t dt) z, advancing t -> t - dt."""
    if not (t > dt > 0.0):
        raise ValueError(f"need t > dt > 0, got t={t}, dt={dt}")
    x = np.asarray(x, dtype=np.float64)
    z = rng.standard_normal(x.shape)
    return x + (2.0 * t * dt) * score_fn(x, t) + np.sqrt(2.0 * t * dt) * z


@dataclass(frozen=True)
class OrderEstimate:
    order: float
    step_counts: np.ndarray
    errors: np.ndarray
    saturated: bool


def convergence_order_probe(
    method,
    den: DenoiserInterface,
    exact_g: Callable,
    t: float,
    s: float,
    step_counts,
    x0=None,
    rho: float = 7.0,
) -> OrderEstimate:
    """Fit error ~ C * n^(-p) for the solver against a closed-form solution map.

    method may also be a callable (x, t, s) -> point, in which case its error is
    measured directly; machine-noise errors are reported as saturated with order 0.
    """
    x0 = np.asarray([2.0] if x0 is None else x0, dtype=np.float64)
    counts = np.asarray(list(step_counts), dtype=np.int64)
    target = exact_g(x0, t, s)
    errors = []
    for n in counts:
        if callable(method):
            approx = method(x0, t, s)
        else:
            approx, _ = solve_ode(method, den, x0, t, s, n_steps=int(n), rho=rho)
        errors.append(float(np.max(np.abs(approx - target))))
    errors = np.asarray(errors)
    if np.max(errors) < 1e-12:
        return OrderEstimate(order=0.0, step_counts=counts, errors=errors, saturated=True)
    slope = np.polyfit(np.log(counts.astype(np.float64)), np.log(np.maximum(errors, 1e-300)), 1)[0]
    return OrderEstimate(order=float(-slope), step_counts=counts, errors=errors, saturated=False)
