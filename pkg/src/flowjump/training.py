"""The three losses and the optimization loop.

Per step, one scalar (t, s, u) triple drives the consistency term: the student
jumps t -> s and a frozen copy carries both routes down to clean space,

    x_est    = G_frozen( G_student(x_t, t, s), s, 0 )
    x_target = G_frozen( G_frozen( Solver(x_t, t -> u), u, s ), s, 0 ),

so gradients reach only the inner student jump. The denoising term regresses the
diagonal g(x,t,t) onto clean data at independently drawn noise levels, and an
optional adversarial term (after a warm-up with the discriminator frozen) pushes
x_est toward the data. The solver's denoiser is either the analytic teacher or,
in pretrained-free mode, the frozen student's own diagonal.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from flowjump.autodiff import Var, backward, sigmoid, vclip, vlog, vmean, vsum
from flowjump.model import (
    EmaState,
    StudentNet,
    StudentParams,
    big_g_forward,
    ema_update,
    g_forward,
    mlp_apply,
    mlp_init,
    mlp_param_count,
)
from flowjump.oracle import GaussianMixture, sample_marginal
from flowjump.schedule import TimeGrid, sample_dsm_time
from flowjump.solvers import DenoiserInterface, solve_ode, solver_step

__all__ = [
    "TrainConfig",
    "TrainState",
    "LossBreakdown",
    "AdamState",
    "adam_step",
    "init_train_state",
    "disc_sizes",
    "disc_forward",
    "consistency_loss",
    "denoising_loss",
    "gan_losses",
    "GanResult",
    "total_loss",
    "train_step",
    "pretrained_free_target",
]

logger = logging.getLogger(__name__)

LOG_CLAMP = 1e-7


@dataclass(frozen=True, kw_only=True)
class TrainConfig:
    lambda_dsm: float = 1.0
    lambda_gan: float = 1.0
    gan_warmup_iters: int = -1  # -1 means total_iters // 2
    lr: float = 4e-4
    disc_lr: float = 2e-3
    lr_schedule: str = "constant"
    batch_size: int = 128
    total_iters: int = 20_000
    teacher_mode: str = "oracle"
    max_ode_steps: int = 17
    ema_mu: float = 0.999
    disc_width: int = 128
    disc_depth: int = 3

    def __post_init__(self) -> None:
        if self.lambda_dsm < 0.0 or self.lambda_gan < 0.0:
            raise ValueError("loss weights must be >= 0")
        if self.lr <= 0.0 or self.disc_lr <= 0.0:
            raise ValueError("learning rates must be > 0")
        if self.teacher_mode not in ("oracle", "pretrained_free"):
            raise ValueError(f"unknown teacher_mode {self.teacher_mode!r}")
        if self.lr_schedule not in ("constant", "cosine"):
            raise ValueError(f"unknown lr_schedule {self.lr_schedule!r}")
        if self.batch_size < 1 or self.total_iters < 0 or self.max_ode_steps < 1:
            raise ValueError("batch_size/total_iters/max_ode_steps out of range")

    @property
    def warmup(self) -> int:
        return self.total_iters // 2 if self.gan_warmup_iters < 0 else self.gan_warmup_iters

    def lr_at(self, iteration: int) -> float:
        """Base rate, optionally annealed to zero on a half-cosine over the run."""
        if self.lr_schedule == "constant" or self.total_iters == 0:
            return self.lr
        frac = min(iteration / self.total_iters, 1.0)
        return self.lr * 0.5 * (1.0 + np.cos(np.pi * frac))


@dataclass(frozen=True)
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0


def adam_step(
    st: AdamState,
    grad: np.ndarray,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> tuple[AdamState, np.ndarray]:
    """One moment update; returns the new state and the descent increment."""
    step = st.step + 1
    m = beta1 * st.m + (1.0 - beta1) * grad
    v = beta2 * st.v + (1.0 - beta2) * grad * grad
    m_hat = m / (1.0 - beta1**step)
    v_hat = v / (1.0 - beta2**step)
    return AdamState(m=m, v=v, step=step), lr * m_hat / (np.sqrt(v_hat) + eps)


@dataclass
class TrainState:
    net: StudentNet
    grid: TimeGrid
    params: StudentParams
    ema: EmaState
    disc: np.ndarray
    adam_theta: AdamState
    adam_eta: AdamState
    iteration: int
    rng: np.random.Generator
    last_loss: "LossBreakdown | None" = None


@dataclass(frozen=True)
class LossBreakdown:
    consistency: float
    denoising: float
    gan_generator: float
    gan_discriminator: float
    total: float


def disc_sizes(dim: int, width: int, depth: int) -> list[int]:
    return [dim] + [width] * depth + [1]


def disc_forward(vec, sizes: list[int], x):
    """Discriminator probability in (0,1); vec/x may be Vars or ndarrays."""
    return sigmoid(mlp_apply(vec, sizes, x))


def init_train_state(net: StudentNet, grid: TimeGrid, cfg: TrainConfig, seed: int) -> TrainState:
    rng = np.random.default_rng(seed)
    params = net.init_params(rng)
    sizes = disc_sizes(net.dim, cfg.disc_width, cfg.disc_depth)
    disc = mlp_init(sizes, rng, zero_final=False)
    zeros_t = np.zeros(params.vector.size)
    zeros_e = np.zeros(mlp_param_count(sizes))
    return TrainState(
        net=net,
        grid=grid,
        params=params,
        ema=EmaState(shadow=params.vector.copy(), mu=cfg.ema_mu),
        disc=disc,
        adam_theta=AdamState(m=zeros_t, v=zeros_t.copy()),
        adam_eta=AdamState(m=zeros_e, v=zeros_e.copy()),
        iteration=0,
        rng=rng,
    )


# -- loss building blocks ----------------------------------------------------


def _grid_index(grid: TimeGrid, level: float) -> int:
    hits = np.flatnonzero(grid.times == level)
    if hits.size != 1:
        raise ValueError(f"noise level {level} is not a grid point")
    return int(hits[0])


def _predict_clean(net: StudentNet, frozen_vec: np.ndarray, x, s: float):
    """Frozen jump from level s to clean space; identity at s=0."""
    if s == 0.0:
        return x
    return big_g_forward(net, frozen_vec, x, s, 0.0)


def _solver_denoiser(state: TrainState, teacher: DenoiserInterface | None, mode: str) -> DenoiserInterface:
    if mode == "oracle":
        if teacher is None:
            raise ValueError("oracle teacher_mode needs a teacher denoiser")
        return teacher
    shadow = state.ema.shadow

    def self_denoiser(x: np.ndarray, t: float) -> np.ndarray:
        return g_forward(state.net, shadow, x, t, t)

    return self_denoiser


def _build_target(
    state: TrainState,
    den: DenoiserInterface,
    x_t: np.ndarray,
    t: float,
    s: float,
    u: float,
) -> np.ndarray:
    """x_target: solve t -> u on the grid restriction, frozen-jump u -> s -> 0."""
    n_steps = _grid_index(state.grid, u) - _grid_index(state.grid, t)
    x_u, _ = solve_ode("heun", den, x_t, t, u, n_steps=n_steps, rho=state.net.schedule.rho)
    x_s = x_u if u == s else big_g_forward(state.net, state.ema.shadow, x_u, u, s)
    return _predict_clean(state.net, state.ema.shadow, x_s, s)


def _consistency_graph(
    state: TrainState,
    teacher: DenoiserInterface | None,
    x_t: np.ndarray,
    triplet: tuple[float, float, float],
    pv,
    mode: str,
):
    """Returns (loss Var/float, x_est Var/ndarray); pv may be a Var or ndarray."""
    t, s, u = triplet
    if not (s <= u < t):
        raise ValueError(f"need s <= u < t, got {triplet}")
    x_target = _build_target(state, _solver_denoiser(state, teacher, mode), x_t, t, s, u)
    x_inner = big_g_forward(state.net, pv, Var(x_t) if isinstance(pv, Var) else x_t, t, s)
    x_est = _predict_clean(state.net, state.ema.shadow, x_inner, s)
    r = x_est - x_target
    loss = vmean(vsum(r * r, axis=1)) if isinstance(r, Var) else float(np.mean(np.sum(r * r, axis=1)))
    return loss, x_est


def _sample_batch_levels(
    grid: TimeGrid, max_ode_steps: int, rng: np.random.Generator, n: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-element level indices (i, j, k) for (t, s, u): i uniform over levels
    with a successor, j uniform below i, k uniform in [i+1, j] capped so the
    solver span k - i never exceeds max_ode_steps."""
    n_levels = grid.times.size
    i_idx = rng.integers(0, n_levels - 1, size=n)
    j_idx = rng.integers(i_idx + 1, n_levels)
    k_hi = np.minimum(j_idx, i_idx + max_ode_steps)
    k_idx = rng.integers(i_idx + 1, k_hi + 1)
    return i_idx, j_idx, k_idx


def _solver_sweep(
    state: TrainState,
    den: DenoiserInterface,
    x_t: np.ndarray,
    i_idx: np.ndarray,
    k_idx: np.ndarray,
) -> np.ndarray:
    """Run each row from its start level i to its stop level k with grid-step
    Heun, sharing one sweep down the grid: rows join the cascade when the sweep
    reaches their start level and drop out at their stop level."""
    times = state.grid.times
    x_u = np.empty_like(x_t)
    carrier = np.empty_like(x_t)
    k_max = int(k_idx.max())
    for lev in range(0, k_max):
        entering = i_idx == lev
        if np.any(entering):
            carrier[entering] = x_t[entering]
        moving = (i_idx <= lev) & (k_idx > lev)
        if np.any(moving):
            carrier[moving] = solver_step(
                "heun", den, carrier[moving], float(times[lev]), float(times[lev + 1])
            )
        arrived = k_idx == lev + 1
        if np.any(arrived):
            x_u[arrived] = carrier[arrived]
    return x_u


def _consistency_batch_graph(
    state: TrainState,
    teacher: DenoiserInterface | None,
    x_t: np.ndarray,
    i_idx: np.ndarray,
    j_idx: np.ndarray,
    k_idx: np.ndarray,
    pv,
    mode: str,
):
    """Per-element variant of the consistency term: every row carries its own
    (t, s, u) triple; one shared solver sweep produces all rows' u-states."""
    times = state.grid.times
    t_arr = times[i_idx]
    s_arr = times[j_idx]
    u_arr = times[k_idx]
    den = _solver_denoiser(state, teacher, mode)
    x_u = _solver_sweep(state, den, x_t, i_idx, k_idx)

    shadow = state.ema.shadow
    zeros = np.zeros(x_t.shape[0])
    x_s = big_g_forward(state.net, shadow, x_u, u_arr, s_arr)
    x_target = big_g_forward(state.net, shadow, x_s, s_arr, zeros)
    x_inner = big_g_forward(state.net, pv, Var(x_t) if isinstance(pv, Var) else x_t, t_arr, s_arr)
    x_est = big_g_forward(state.net, shadow, x_inner, s_arr, zeros)
    r = x_est - x_target
    loss = vmean(vsum(r * r, axis=1)) if isinstance(r, Var) else float(np.mean(np.sum(r * r, axis=1)))
    return loss, x_est


def consistency_loss(
    state: TrainState,
    teacher: DenoiserInterface | None,
    batch: np.ndarray,
    triplet: tuple[float, float, float],
) -> tuple[float, np.ndarray]:
    """Squared clean-space mismatch of the two routes; batch holds noisy x_t points.

    Returns the scalar and its gradient with respect to the student parameters.
    """
    pv = Var(state.params.vector)
    loss, _ = _consistency_graph(state, teacher, batch, triplet, pv, state_mode(state, teacher))
    backward(loss)
    grad = pv.grad if pv.grad is not None else np.zeros_like(state.params.vector)
    return float(loss.value), grad


def state_mode(state: TrainState, teacher: DenoiserInterface | None) -> str:
    return "oracle" if teacher is not None else "pretrained_free"


def _denoising_graph(state: TrainState, x0: np.ndarray, pv, rng: np.random.Generator):
    n = x0.shape[0]
    t = sample_dsm_time(state.net.schedule, rng, size=n)
    x_noisy = x0 + t[:, None] * rng.standard_normal(x0.shape)
    g = g_forward(state.net, pv, Var(x_noisy) if isinstance(pv, Var) else x_noisy, t, t)
    r = g - x0
    if isinstance(r, Var):
        return vmean(vsum(r * r, axis=1))
    return float(np.mean(np.sum(r * r, axis=1)))


def denoising_loss(
    state: TrainState, mix: GaussianMixture, batch: np.ndarray, rng: np.random.Generator
) -> tuple[float, np.ndarray]:
    """Diagonal regression ||x0 - g(x0 + t eps, t, t)||^2; batch holds clean points."""
    pv = Var(state.params.vector)
    loss = _denoising_graph(state, batch, pv, rng)
    backward(loss)
    grad = pv.grad if pv.grad is not None else np.zeros_like(state.params.vector)
    return float(loss.value), grad


@dataclass(frozen=True)
class GanResult:
    generator_loss: float
    discriminator_loss: float
    d_loss_d_generated: np.ndarray
    disc_grad: np.ndarray


def _gan_generator_graph(state: TrainState, cfg: TrainConfig, generated):
    """mean log(1 - d(generated)) with the discriminator frozen."""
    sizes = disc_sizes(state.net.dim, cfg.disc_width, cfg.disc_depth)
    d = disc_forward(state.disc, sizes, generated)
    if isinstance(d, Var):
        return vmean(vlog(vclip(1.0 - d, LOG_CLAMP, 1.0)))
    return float(np.mean(np.log(np.clip(1.0 - d, LOG_CLAMP, 1.0))))


def _gan_discriminator_graph(state: TrainState, cfg: TrainConfig, batch: np.ndarray, generated: np.ndarray, ev):
    """mean log d(data) + mean log(1 - d(generated)), as a function of disc params ev."""
    sizes = disc_sizes(state.net.dim, cfg.disc_width, cfg.disc_depth)
    d_real = disc_forward(ev, sizes, batch)
    d_fake = disc_forward(ev, sizes, generated)
    if isinstance(ev, Var):
        return vmean(vlog(vclip(d_real, LOG_CLAMP, 1.0))) + vmean(vlog(vclip(1.0 - d_fake, LOG_CLAMP, 1.0)))
    return float(
        np.mean(np.log(np.clip(d_real, LOG_CLAMP, 1.0)))
        + np.mean(np.log(np.clip(1.0 - d_fake, LOG_CLAMP, 1.0)))
    )


def gan_losses(state: TrainState, cfg: TrainConfig, batch: np.ndarray, generated: np.ndarray) -> GanResult:
    """Adversarial objectives and their gradients.

    The generator gradient is returned with respect to the generated points
    (the caller owns the chain into the student parameters); the discriminator
    gradient is with respect to its own parameters, for ascent.
    """
    gv = Var(np.asarray(generated, dtype=np.float64))
    gen = _gan_generator_graph(state, cfg, gv)
    backward(gen)
    ev = Var(state.disc)
    disc = _gan_discriminator_graph(state, cfg, batch, np.asarray(generated, dtype=np.float64), ev)
    backward(disc)
    return GanResult(
        generator_loss=float(gen.value),
        discriminator_loss=float(disc.value),
        d_loss_d_generated=gv.grad if gv.grad is not None else np.zeros_like(gv.value),
        disc_grad=ev.grad if ev.grad is not None else np.zeros(state.disc.size),
    )


def effective_lambda_gan(cfg: TrainConfig, iteration: int) -> float:
    return 0.0 if iteration < cfg.warmup else cfg.lambda_gan


def total_loss(
    state: TrainState,
    cfg: TrainConfig,
    teacher: DenoiserInterface | None,
    batch: np.ndarray,
    rng: np.random.Generator,
) -> tuple[LossBreakdown, np.ndarray, np.ndarray]:
    """One draw of the combined objective.

    batch holds clean points; the start level, per-element (s, u) levels, both
    noise injections, and the denoising levels are drawn from rng in a fixed
    order, so reseeding rng makes the value a deterministic function of the
    parameters. Returns the breakdown, the student gradient (descent direction),
    and the discriminator gradient (ascent direction; zeros during warm-up).
    """
    mode = cfg.teacher_mode
    i_idx, j_idx, k_idx = _sample_batch_levels(state.grid, cfg.max_ode_steps, rng, batch.shape[0])
    x_t = batch + state.grid.times[i_idx][:, None] * rng.standard_normal(batch.shape)

    pv = Var(state.params.vector)
    cons, x_est = _consistency_batch_graph(state, teacher, x_t, i_idx, j_idx, k_idx, pv, mode)
    dsm = _denoising_graph(state, batch, pv, rng)
    lam_gan = effective_lambda_gan(cfg, state.iteration)

    total = cons + cfg.lambda_dsm * dsm
    if lam_gan > 0.0:
        gen = _gan_generator_graph(state, cfg, x_est)
        total = total + lam_gan * gen
        gen_value = float(gen.value)
    else:
        gen_value = float(_gan_generator_graph(state, cfg, x_est.value))
    backward(total)
    theta_grad = pv.grad if pv.grad is not None else np.zeros_like(state.params.vector)

    x_est_fixed = x_est.value
    if lam_gan > 0.0:
        ev = Var(state.disc)
        disc = _gan_discriminator_graph(state, cfg, batch, x_est_fixed, ev)
        backward(disc)
        disc_value = float(disc.value)
        disc_grad = ev.grad if ev.grad is not None else np.zeros(state.disc.size)
    else:
        disc_value = _gan_discriminator_graph(state, cfg, batch, x_est_fixed, state.disc)
        disc_grad = np.zeros(state.disc.size)

    breakdown = LossBreakdown(
        consistency=float(cons.value),
        denoising=float(dsm.value),
        gan_generator=gen_value,
        gan_discriminator=disc_value,
        total=float(cons.value) + cfg.lambda_dsm * float(dsm.value) + lam_gan * gen_value,
    )
    return breakdown, theta_grad, disc_grad


def train_step(
    state: TrainState,
    cfg: TrainConfig,
    teacher: DenoiserInterface | None,
    mix: GaussianMixture,
) -> TrainState:
    """One optimizer step on the student (descent) and discriminator (ascent).

    A non-finite loss or gradient rejects the step and returns the state object
    unchanged (callers can detect the rejection by identity).
    """
    batch = sample_marginal(mix, 0.0, cfg.batch_size, state.rng)
    try:
        breakdown, theta_grad, disc_grad = total_loss(state, cfg, teacher, batch, state.rng)
    except FloatingPointError as exc:
        logger.warning("step %d rejected: %s", state.iteration, exc)
        return state
    if not (np.all(np.isfinite(theta_grad)) and np.all(np.isfinite(disc_grad))):
        logger.warning("step %d rejected: non-finite gradient", state.iteration)
        return state

    scale = cfg.lr_at(state.iteration) / cfg.lr
    adam_theta, delta = adam_step(state.adam_theta, theta_grad, cfg.lr * scale)
    new_vector = state.params.vector - delta
    adam_eta = state.adam_eta
    new_disc = state.disc
    if effective_lambda_gan(cfg, state.iteration) > 0.0:
        adam_eta, delta_eta = adam_step(state.adam_eta, -disc_grad, cfg.disc_lr * scale)
        new_disc = state.disc - delta_eta
    if not (np.all(np.isfinite(new_vector)) and np.all(np.isfinite(new_disc))):
        logger.warning("step %d rejected: non-finite parameters", state.iteration)
        return state

    params = StudentParams(vector=new_vector)
    return replace(
        state,
        params=params,
        ema=ema_update(state.ema, params),
        disc=new_disc,
        adam_theta=adam_theta,
        adam_eta=adam_eta,
        iteration=state.iteration + 1,
        last_loss=breakdown,
    )


def pretrained_free_target(
    state: TrainState, batch: np.ndarray, triplet: tuple[float, float, float]
) -> np.ndarray:
    """x_target built entirely from the frozen student (no analytic teacher).

    batch holds noisy x_t points at level triplet[0]; every map involved is
    frozen, so the result carries no dependence on the live parameters.
    """
    t, s, u = triplet
    return _build_target(state, _solver_denoiser(state, None, "pretrained_free"), batch, t, s, u)
