"""Analytic teacher: an isotropic Gaussian mixture with closed-form noisy marginals.

Perturbing a mixture component Normal(mu_k, sigma_k^2 I) with Normal(0, t^2 I) noise
gives Normal(mu_k, (sigma_k^2 + t^2) I), so densities, scores, posterior means, and
component posteriors at every noise level are exact. A single component additionally
admits a closed-form solution map for the probability-flow ODE, which anchors every
solver and sampler test in the package.

Points are arrays whose last axis is the data dimension; all operations broadcast
over leading axes. Noise levels are scalars.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "GaussianMixture",
    "log_density_t",
    "score_t",
    "denoiser_t",
    "sample_marginal",
    "exact_transition_single_gaussian",
    "exact_transition",
    "class_posterior",
]


@dataclass(frozen=True)
class GaussianMixture:
    weights: np.ndarray
    means: np.ndarray
    stds: np.ndarray

    def __post_init__(self) -> None:
        w = np.atleast_1d(np.asarray(self.weights, dtype=np.float64))
        m = np.atleast_2d(np.asarray(self.means, dtype=np.float64))
        s = np.atleast_1d(np.asarray(self.stds, dtype=np.float64))
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", m)
        object.__setattr__(self, "stds", s)
        if abs(float(w.sum()) - 1.0) > 1e-12 or np.any(w < 0.0):
            raise ValueError("weights must be nonnegative and sum to 1 within 1e-12")
        if np.any(s < 0.0):
            raise ValueError("component stds must be >= 0")
        if m.shape[0] != w.size or s.size != w.size:
            raise ValueError("weights, means, stds must agree on the component count")

    @property
    def n_components(self) -> int:
        return int(self.weights.size)

    @property
    def dim(self) -> int:
        return int(self.means.shape[1])


def _component_log_densities(mix: GaussianMixture, x: np.ndarray, t: float) -> np.ndarray:
    """log w_k + log Normal(x; mu_k, (sigma_k^2 + t^2) I), shape (..., K)."""
    x = np.asarray(x, dtype=np.float64)
    diff = x[..., None, :] - mix.means  # (..., K, D)
    var = mix.stds**2 + t * t  # (K,)
    d = mix.dim
    with np.errstate(divide="ignore"):
        logw = np.log(mix.weights)
    if np.any(var == 0.0):
        # Point-mass component at t=0: contributes +inf exactly at its mean, -inf away.
        out = np.empty(diff.shape[:-1])
        for k in range(mix.n_components):
            if var[k] == 0.0:
                at_mean = np.all(diff[..., k, :] == 0.0, axis=-1)
                out[..., k] = np.where(at_mean, np.inf, -np.inf)
            else:
                sq = np.sum(diff[..., k, :] ** 2, axis=-1)
                out[..., k] = logw[k] - 0.5 * d * np.log(2.0 * np.pi * var[k]) - 0.5 * sq / var[k]
        return out
    sq = np.sum(diff**2, axis=-1)  # (..., K)
    return logw - 0.5 * d * np.log(2.0 * np.pi * var) - 0.5 * sq / var


def _logsumexp(a: np.ndarray, axis: int = -1) -> np.ndarray:
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    return np.squeeze(m, axis=axis) + np.log(np.sum(np.exp(a - m), axis=axis))


def log_density_t(mix: GaussianMixture, x, t: float):
    """Log-density of the mixture convolved with Normal(0, t^2 I)."""
    if t < 0.0:
        raise ValueError(f"noise level must be >= 0, got {t}")
    return _logsumexp(_component_log_densities(mix, x, t))


def _responsibilities(mix: GaussianMixture, x, t: float) -> np.ndarray:
    a = _component_log_densities(mix, x, t)
    m = np.max(a, axis=-1, keepdims=True)
    if np.any(~np.isfinite(m)):
        raise FloatingPointError("mixture density vanished (or is degenerate) at the query point")
    r = np.exp(a - m)
    return r / np.sum(r, axis=-1, keepdims=True)


def score_t(mix: GaussianMixture, x, t: float):
    """Exact gradient of log_density_t with respect to x."""
    if t < 0.0:
        raise ValueError(f"noise level must be >= 0, got {t}")
    x = np.asarray(x, dtype=np.float64)
    r = _responsibilities(mix, x, t)  # (..., K)
    var = mix.stds**2 + t * t
    per_comp = (mix.means - x[..., None, :]) / var[:, None]  # (..., K, D)
    return np.sum(r[..., None] * per_comp, axis=-2)


def denoiser_t(mix: GaussianMixture, x, t: float):
    """Posterior mean of the clean point given a noisy observation at level t.

    Computed from per-component posterior means, so the Tweedie identity
    denoiser = x + t^2 * score holds as a genuine cross-check rather than by
    construction.
    """
    if t <= 0.0:
        raise ValueError(f"noise level must be > 0, got {t}")
    x = np.asarray(x, dtype=np.float64)
    r = _responsibilities(mix, x, t)
    var = mix.stds**2 + t * t
    post_mean = (mix.stds**2)[:, None] * x[..., None, :] / var[:, None] + (t * t) * mix.means / var[:, None]
    return np.sum(r[..., None] * post_mean, axis=-2)


def sample_marginal(mix: GaussianMixture, t: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """n i.i.d. draws from the level-t marginal, shape (n, dim)."""
    if t < 0.0:
        raise ValueError(f"noise level must be >= 0, got {t}")
    comp = rng.choice(mix.n_components, size=n, p=mix.weights)
    std = np.sqrt(mix.stds[comp] ** 2 + t * t)
    return mix.means[comp] + std[:, None] * rng.standard_normal((n, mix.dim))


def exact_transition_single_gaussian(mu, sigma0: float, x, t: float, s: float):
    """Closed-form probability-flow solution map for a single Gaussian.

    The flow of dx/dt = (x - E[x|x_t]) / t with a Gaussian data distribution is
    linear, contracting toward the mean by the ratio of marginal stds.
    """
    if t <= 0.0:
        raise ValueError(f"start level must be > 0, got {t}")
    if not (0.0 <= s <= t):
        raise ValueError(f"need 0 <= s <= t, got s={s}, t={t}")
    mu = np.asarray(mu, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    ratio = np.sqrt((sigma0 * sigma0 + s * s) / (sigma0 * sigma0 + t * t))
    return mu + (x - mu) * ratio


def exact_transition(mix: GaussianMixture, x, t: float, s: float):
    """exact_transition_single_gaussian keyed off a one-component mixture."""
    if mix.n_components != 1:
        raise ValueError("closed-form transitions exist only for a single component; use a numerical solver")
    return exact_transition_single_gaussian(mix.means[0], float(mix.stds[0]), x, t, s)


def class_posterior(mix: GaussianMixture, x, t: float) -> np.ndarray:
    """Bayes posterior over components given a noisy observation, shape (..., K)."""
    if t < 0.0:
        raise ValueError(f"noise level must be >= 0, got {t}")
    return _responsibilities(mix, x, t)
