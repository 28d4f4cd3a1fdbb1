"""The student network: an MLP g(x, t, s) with Fourier time embeddings.

Two views of the same map:

    g(x, t, s)   skip(t) * x + out(t) * MLP([in(t) * x, emb(t) + emb(s)])
    G(x, t, s) = (s/t) * x + (1 - s/t) * g(x, t, s)

with skip(t) = sd^2/(t^2+sd^2), out(t) = t*sd/sqrt(t^2+sd^2), in(t) =
1/sqrt(t^2+sd^2), so the raw network always sees unit-variance inputs and a
zero-initialized final layer makes g start at the skip path.

With sd matched to the component spread of a location mixture, the skip path
carries the within-component posterior mean exactly, and the residual the MLP
must express is amplitude(t) * assignment(x,t): bounded, saturating in x, and
pinned by in-distribution data at every level.

G is the long-jump predictor (noise level t down to s); its diagonal G(x,t,t) = x
holds for any parameters because the g-coefficient vanishes, and the diagonal of g
itself is the denoiser estimate. Forward passes run on plain numpy arrays, or on
autodiff Vars when a gradient is needed; parameters enter as a single flat float64
vector either way.

Time embeddings use v(tau) = asinh(tau / sigma_data) / asinh(sigma_max / sigma_data),
a log-like rescaling that is finite at tau = 0, so the generator endpoint s = 0 is a
legal embedding input and lies vanishingly close to s = sigma_min, matching how close
the true maps are at those two levels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from flowjump.autodiff import Var, backward, silu, vconcat, vtanh
from flowjump.schedule import ScheduleConfig

__all__ = [
    "StudentNet",
    "StudentParams",
    "EmaState",
    "mlp_layer_sizes",
    "mlp_param_count",
    "mlp_init",
    "mlp_apply",
    "embed_times",
    "g_forward",
    "big_g_forward",
    "loss_gradient",
    "ema_update",
]


# -- generic flat-vector MLP helpers (shared with the discriminator) --------


def mlp_layer_sizes(sizes: list[int]) -> list[tuple[int, ...]]:
    """Weight/bias shapes for a dense stack sizes[0] -> ... -> sizes[-1]."""
    shapes: list[tuple[int, ...]] = []
    for a, b in zip(sizes[:-1], sizes[1:]):
        shapes.append((a, b))
        shapes.append((b,))
    return shapes


def mlp_param_count(sizes: list[int]) -> int:
    return sum(int(np.prod(s)) for s in mlp_layer_sizes(sizes))


def mlp_init(sizes: list[int], rng: np.random.Generator, zero_final: bool = True) -> np.ndarray:
    """He-style init, optional zero final layer so the map starts at the skip path."""
    chunks = []
    shapes = mlp_layer_sizes(sizes)
    n_layers = len(sizes) - 1
    for layer in range(n_layers):
        w_shape, b_shape = shapes[2 * layer], shapes[2 * layer + 1]
        if zero_final and layer == n_layers - 1:
            chunks.append(np.zeros(int(np.prod(w_shape))))
            chunks.append(np.zeros(b_shape[0]))
        else:
            fan_in = w_shape[0]
            chunks.append(rng.standard_normal(int(np.prod(w_shape))) * np.sqrt(2.0 / fan_in))
            chunks.append(np.zeros(b_shape[0]))
    return np.concatenate(chunks)


def mlp_apply(vec, sizes: list[int], h, activation=True, act: str = "silu"):
    """Run the dense stack; vec and h may each be a Var or a plain ndarray."""
    shapes = mlp_layer_sizes(sizes)
    n_layers = len(sizes) - 1
    offset = 0
    for layer in range(n_layers):
        w_shape = shapes[2 * layer]
        n_w = w_shape[0] * w_shape[1]
        w = vec[offset : offset + n_w].reshape(w_shape)
        offset += n_w
        b = vec[offset : offset + w_shape[1]]
        offset += w_shape[1]
        h = h @ w + b
        if activation and layer < n_layers - 1:
            if act == "tanh":
                h = vtanh(h)
            elif isinstance(h, Var):
                h = silu(h)
            else:
                h = h * (1.0 / (1.0 + np.exp(-h)))
    return h


# -- student architecture ----------------------------------------------------


@dataclass(frozen=True, kw_only=True)
class StudentNet:
    """Architecture spec; holds no trainable state."""

    dim: int
    schedule: ScheduleConfig
    width: int = 128
    depth: int = 3
    n_freq: int = 16
    activation: str = "silu"

    def __post_init__(self) -> None:
        if self.dim < 1 or self.width < 1 or self.depth < 1 or self.n_freq < 1:
            raise ValueError("dim, width, depth, n_freq must all be >= 1")
        if self.activation not in ("silu", "tanh"):
            raise ValueError(f"unknown activation {self.activation!r}")

    @property
    def frequencies(self) -> np.ndarray:
        return np.arange(1, self.n_freq + 1, dtype=np.float64)

    @property
    def sizes(self) -> list[int]:
        return [self.dim + 2 * self.n_freq] + [self.width] * self.depth + [self.dim]

    @property
    def param_count(self) -> int:
        return mlp_param_count(self.sizes)

    def init_params(self, rng: np.random.Generator) -> "StudentParams":
        return StudentParams(vector=mlp_init(self.sizes, rng))


@dataclass
class StudentParams:
    """Flat float64 trainable vector."""

    vector: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.vector, dtype=np.float64)
        if not np.all(np.isfinite(v)):
            raise ValueError("parameters must be finite")
        object.__setattr__(self, "vector", v)


@dataclass(frozen=True)
class EmaState:
    """Exponential moving average of the parameter vector (the frozen copy)."""

    shadow: np.ndarray
    mu: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.mu <= 1.0):
            raise ValueError(f"decay must lie in [0, 1], got {self.mu}")


def _time_scale(cfg: ScheduleConfig, tau):
    norm = np.arcsinh(cfg.sigma_max / cfg.sigma_data)
    return np.arcsinh(np.asarray(tau, dtype=np.float64) / cfg.sigma_data) / norm


def embed_times(net: StudentNet, t, s) -> np.ndarray:
    """Summed Fourier features of the two (log-scaled) time arguments.

    t and s may be scalars or (n,) arrays; output is (2*n_freq,) or (n, 2*n_freq).
    """
    out = None
    for tau in (t, s):
        v = _time_scale(net.schedule, tau)
        ang = 2.0 * np.pi * np.multiply.outer(v, net.frequencies)
        e = np.concatenate([np.sin(ang), np.cos(ang)], axis=-1)
        out = e if out is None else out + e
    return out


def _scales(cfg: ScheduleConfig, t):
    sd2 = cfg.sigma_data**2
    t = np.asarray(t, dtype=np.float64)
    skip = sd2 / (t * t + sd2)
    out = t * cfg.sigma_data / np.sqrt(t * t + sd2)
    c_in = 1.0 / np.sqrt(t * t + sd2)
    return skip, out, c_in


def g_forward(net: StudentNet, params, x, t, s):
    """skip(t)*x + out(t)*MLP([x, emb]); the s=t diagonal is the denoiser estimate.

    params may be StudentParams, a flat ndarray, or a flat Var; x may be an
    ndarray (..., dim) or a 2D Var.
    """
    vec = params.vector if isinstance(params, StudentParams) else params
    is_var = isinstance(x, Var) or isinstance(vec, Var)
    if isinstance(x, Var):
        if x.value.ndim != 2:
            raise ValueError("Var inputs must be 2D (batch, dim)")
        lead_shape = None
        n = x.value.shape[0]
    else:
        x = np.asarray(x, dtype=np.float64)
        lead_shape = x.shape[:-1]
        x = x.reshape(-1, net.dim)
        n = x.shape[0]

    skip, out, c_in = _scales(net.schedule, t)
    if np.ndim(skip) == 1:
        skip, out, c_in = skip[:, None], out[:, None], c_in[:, None]

    emb = np.broadcast_to(embed_times(net, t, s), (n, 2 * net.n_freq))
    x_in = x * c_in
    h = vconcat([x_in, emb]) if is_var else np.concatenate([x_in, emb], axis=-1)
    y = mlp_apply(vec, net.sizes, h, act=net.activation)
    g = x * skip + y * out
    if lead_shape is not None and not isinstance(g, Var):
        g = g.reshape(*lead_shape, net.dim)
    return g


def big_g_forward(net: StudentNet, params, x, t, s):
    """(s/t)*x + (1 - s/t)*g(x,t,s); equals x exactly at s=t for any params."""
    coef = np.asarray(s, dtype=np.float64) / np.asarray(t, dtype=np.float64)
    if coef.ndim == 1:
        coef = coef[:, None]
    g = g_forward(net, params, x, t, s)
    return x * coef + g * (1.0 - coef)


def loss_gradient(net: StudentNet, params: StudentParams, loss_closure) -> np.ndarray:
    """Reverse-mode gradient of a scalar closure over the flat parameter vector."""
    pv = Var(params.vector)
    loss = loss_closure(pv)
    if not isinstance(loss, Var) or loss.value.shape != ():
        raise ValueError("loss_closure must return a scalar Var")
    backward(loss)
    if pv.grad is None:
        return np.zeros_like(params.vector)
    bad = np.flatnonzero(~np.isfinite(pv.grad))
    if bad.size:
        raise FloatingPointError(f"non-finite gradient at parameter index {int(bad[0])}")
    return pv.grad


def ema_update(ema: EmaState, params: StudentParams) -> EmaState:
    if ema.shadow.shape != params.vector.shape:
        raise ValueError("shadow/parameter shape mismatch")
    return EmaState(shadow=ema.mu * ema.shadow + (1.0 - ema.mu) * params.vector, mu=ema.mu)
