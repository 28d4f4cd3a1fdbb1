"""Config-driven command surface: train / sample / eval / check.

One TOML file describes one run (schedule, mixture, model, training, sampler,
eval blocks plus a global seed and output directory). Commands are pure
functions of (config, seed, checkpoint): reruns produce byte-identical outputs.
Every output file starts with header lines carrying the config hash and seed.

Exit codes: 0 ok, 1 property-check failure, 2 config error, 3 numeric incident.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import struct
import sys
from dataclasses import asdict, dataclass, replace

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import numpy as np

from flowjump.evaluation import (
    accumulation_study,
    nll_pf_ode,
    perturbed_transition,
    variance_probe,
    wasserstein1,
)
from flowjump.model import EmaState, StudentNet, StudentParams, big_g_forward, g_forward
from flowjump.oracle import (
    GaussianMixture,
    denoiser_t,
    exact_transition,
    log_density_t,
    sample_marginal,
    score_t,
)
from flowjump.sampling import SamplerSpec, gamma_sample, sampler_times
from flowjump.schedule import ScheduleConfig, build_time_grid
from flowjump.solvers import IntegrationError, convergence_order_probe, reference_solution
from flowjump.training import (
    TrainConfig,
    TrainState,
    init_train_state,
    train_step,
)

__all__ = [
    "ConfigError",
    "RunConfig",
    "load_config",
    "save_checkpoint",
    "load_checkpoint",
    "cmd_train",
    "cmd_sample",
    "cmd_eval",
    "cmd_check",
    "main",
]

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

OUTPUT_ROOT_ENV = "FLOWJUMP_OUTPUT_ROOT"
CKPT_MAGIC = b"FJCKPT01"

CHECK_SUITES = ("g_limit", "bilipschitz", "variance", "accumulation", "order", "nll")


class ConfigError(ValueError):
    """Invalid or unparsable run configuration."""


@dataclass(frozen=True)
class ModelBlock:
    width: int = 128
    depth: int = 3
    n_freq: int = 16
    activation: str = "silu"


@dataclass(frozen=True)
class SamplerBlock:
    gamma: float = 0.0
    nfe: int = 1
    n: int = 10_000
    variant: str = "ctm_gamma"


@dataclass(frozen=True)
class EvalBlock:
    n_samples: int = 20_000
    n_chains: int = 20_000
    nll: bool = False
    nll_points: int = 20
    nll_steps: int = 300


@dataclass(frozen=True)
class RunConfig:
    seed: int
    output_dir: str
    checkpoint_every: int
    schedule: ScheduleConfig
    mixture: GaussianMixture
    model: ModelBlock
    training: TrainConfig
    sampler: SamplerBlock
    eval: EvalBlock
    config_hash: str


def _take(block: dict, allowed: dict, where: str) -> dict:
    """Validate a config block against allowed keys and return merged kwargs."""
    unknown = set(block) - set(allowed)
    if unknown:
        raise ConfigError(f"[{where}] unknown keys: {sorted(unknown)}")
    merged = dict(allowed)
    merged.update(block)
    return merged


def load_config(path: str) -> RunConfig:
    try:
        with open(path, "rb") as f:
            raw_bytes = f.read()
        data = tomllib.loads(raw_bytes.decode("utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot parse config: {exc}") from exc

    top_known = {"seed", "output_dir", "checkpoint_every", "schedule", "mixture", "model",
                 "training", "sampler", "eval"}
    unknown = set(data) - top_known
    if unknown:
        raise ConfigError(f"[top level] unknown keys: {sorted(unknown)}")

    def block(name: str) -> dict:
        b = data.get(name, {})
        if not isinstance(b, dict):
            raise ConfigError(f"[{name}] must be a table")
        return b

    try:
        schedule = ScheduleConfig(**_take(block("schedule"), {
            "sigma_min": 0.002, "sigma_max": 80.0, "rho": 7.0,
            "sigma_data": 0.5, "n_grid": 18,
        }, "schedule"))
        mix_block = _take(block("mixture"), {
            "weights": [1.0], "means": [[0.0]], "stds": [1.0],
        }, "mixture")
        mixture = GaussianMixture(
            weights=mix_block["weights"], means=mix_block["means"], stds=mix_block["stds"]
        )
        model = ModelBlock(**_take(block("model"), {
            "width": 128, "depth": 3, "n_freq": 16, "activation": "silu",
        }, "model"))
        training = TrainConfig(**_take(block("training"), {
            "lambda_dsm": 1.0, "lambda_gan": 1.0, "gan_warmup_iters": -1,
            "lr": 4e-4, "disc_lr": 2e-3, "lr_schedule": "constant",
            "batch_size": 128, "total_iters": 20_000, "teacher_mode": "oracle",
            "max_ode_steps": 17, "ema_mu": 0.999, "disc_width": 128, "disc_depth": 3,
        }, "training"))
        sampler = SamplerBlock(**_take(block("sampler"), {
            "gamma": 0.0, "nfe": 1, "n": 10_000, "variant": "ctm_gamma",
        }, "sampler"))
        eval_block = EvalBlock(**_take(block("eval"), {
            "n_samples": 20_000, "n_chains": 20_000, "nll": False,
            "nll_points": 20, "nll_steps": 300,
        }, "eval"))
        seed = int(data.get("seed", 0))
        output_dir = str(data.get("output_dir", "runs/out"))
        checkpoint_every = int(data.get("checkpoint_every", 0))
        if checkpoint_every < 0:
            raise ConfigError("[top level] checkpoint_every must be >= 0")
        if not (0.0 <= sampler.gamma <= 1.0):
            raise ConfigError("[sampler] gamma must lie in [0, 1]")
        if sampler.nfe < 1 or sampler.n < 1:
            raise ConfigError("[sampler] nfe and n must be >= 1")
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc

    return RunConfig(
        seed=seed,
        output_dir=output_dir,
        checkpoint_every=checkpoint_every,
        schedule=schedule,
        mixture=mixture,
        model=model,
        training=training,
        sampler=sampler,
        eval=eval_block,
        config_hash=hashlib.sha256(raw_bytes).hexdigest()[:16],
    )


def resolve_output_dir(cfg: RunConfig) -> str:
    root = os.environ.get(OUTPUT_ROOT_ENV)
    out = os.path.join(root, cfg.output_dir) if root else cfg.output_dir
    os.makedirs(out, exist_ok=True)
    return out


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _header_lines(cfg: RunConfig) -> list[str]:
    return [f"# config_sha256={cfg.config_hash}", f"# seed={cfg.seed}"]


# -- checkpoint serialization -------------------------------------------------


def save_checkpoint(path: str, net: StudentNet, state: TrainState) -> None:
    """Version-tagged container: magic, JSON architecture header, float64 payload."""
    sections = [
        ("params", state.params.vector),
        ("ema", state.ema.shadow),
        ("disc", state.disc),
    ]
    header = {
        "version": 1,
        "dim": net.dim,
        "width": net.width,
        "depth": net.depth,
        "n_freq": net.n_freq,
        "activation": net.activation,
        "schedule": asdict(net.schedule),
        "iteration": state.iteration,
        "ema_mu": state.ema.mu,
        "sections": [(name, arr.size) for name, arr in sections],
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as f:
        f.write(CKPT_MAGIC)
        f.write(struct.pack("<Q", len(blob)))
        f.write(blob)
        for _, arr in sections:
            f.write(np.ascontiguousarray(arr, dtype=np.float64).tobytes())


def load_checkpoint(path: str) -> tuple[dict, dict[str, np.ndarray]]:
    try:
        with open(path, "rb") as f:
            magic = f.read(len(CKPT_MAGIC))
            if magic != CKPT_MAGIC:
                raise ConfigError(f"not a checkpoint file: {path}")
            (hlen,) = struct.unpack("<Q", f.read(8))
            header = json.loads(f.read(hlen).decode("utf-8"))
            if header.get("version") != 1:
                raise ConfigError(f"unsupported checkpoint version in {path}")
            arrays = {}
            for name, size in header["sections"]:
                buf = f.read(8 * size)
                if len(buf) != 8 * size:
                    raise ConfigError(f"truncated checkpoint payload in {path}")
                arrays[name] = np.frombuffer(buf, dtype=np.float64).copy()
    except OSError as exc:
        raise ConfigError(f"cannot read checkpoint: {exc}") from exc
    except (KeyError, ValueError, struct.error) as exc:
        raise ConfigError(f"malformed checkpoint {path}: {exc}") from exc
    return header, arrays


def _net_from_checkpoint(header: dict, cfg: RunConfig) -> StudentNet:
    sched = ScheduleConfig(**header["schedule"])
    if asdict(sched) != asdict(cfg.schedule):
        raise ConfigError("checkpoint schedule does not match the config schedule block")
    net = StudentNet(
        dim=header["dim"],
        schedule=sched,
        width=header["width"],
        depth=header["depth"],
        n_freq=header["n_freq"],
        activation=header.get("activation", "silu"),
    )
    if net.dim != cfg.mixture.dim:
        raise ConfigError("checkpoint dimension does not match the mixture block")
    return net


# -- commands ------------------------------------------------------------------


def _curve_rows_to_log(total_iters: int) -> set[int]:
    """Iterations whose loss breakdown lands in the curve CSV (plus the final one)."""
    rows = set(range(1, min(total_iters, 10) + 1))
    rows.update(range(50, total_iters + 1, 50))
    if total_iters >= 1:
        rows.add(total_iters)
    return rows


def cmd_train(config_path: str) -> int:
    cfg = load_config(config_path)
    out = resolve_output_dir(cfg)
    net = StudentNet(
        dim=cfg.mixture.dim,
        schedule=cfg.schedule,
        width=cfg.model.width,
        depth=cfg.model.depth,
        n_freq=cfg.model.n_freq,
        activation=cfg.model.activation,
    )
    grid = build_time_grid(cfg.schedule)
    state = init_train_state(net, grid, cfg.training, cfg.seed)
    mix = cfg.mixture

    if cfg.training.teacher_mode == "oracle":
        def teacher(x, t):
            return denoiser_t(mix, x, t)
    else:
        teacher = None

    log_iters = _curve_rows_to_log(cfg.training.total_iters)
    curve: list[str] = []
    ckpt_path = os.path.join(out, "ckpt_final.bin")
    for _ in range(cfg.training.total_iters):
        new_state = train_step(state, cfg.training, teacher, mix)
        if new_state is state:
            save_checkpoint(ckpt_path, net, state)
            _write_curve(cfg, out, curve)
            print(f"numeric incident at iteration {state.iteration}; "
                  f"last good checkpoint written to {ckpt_path}", file=sys.stderr)
            return EXIT_NUMERIC
        state = new_state
        if state.iteration in log_iters and state.last_loss is not None:
            b = state.last_loss
            curve.append(",".join([
                str(state.iteration), _fmt(b.consistency), _fmt(b.denoising),
                _fmt(b.gan_generator), _fmt(b.gan_discriminator), _fmt(b.total),
            ]))
        if cfg.checkpoint_every and state.iteration % cfg.checkpoint_every == 0:
            save_checkpoint(os.path.join(out, f"ckpt_{state.iteration:07d}.bin"), net, state)

    save_checkpoint(ckpt_path, net, state)
    _write_curve(cfg, out, curve)
    print(f"trained {state.iteration} iterations; checkpoint {ckpt_path}")
    return EXIT_OK


def _write_curve(cfg: RunConfig, out: str, rows: list[str]) -> None:
    path = os.path.join(out, "curve.csv")
    with open(path, "w", encoding="utf-8") as f:
        for line in _header_lines(cfg):
            f.write(line + "\n")
        f.write("iteration,consistency,denoising,gan_generator,gan_discriminator,total\n")
        for row in rows:
            f.write(row + "\n")


def _oracle_g(mix: GaussianMixture):
    """Exact jump map: closed form for one component, fine-solver otherwise."""
    if mix.n_components == 1:
        def G(x, t, s):
            return exact_transition(mix, x, t, s)
    else:
        def den(x, t):
            return denoiser_t(mix, x, t)

        def G(x, t, s):
            return reference_solution(den, x, t, s)
    return G


def _student_g(net: StudentNet, ema_vector: np.ndarray):
    def G(x, t, s):
        return big_g_forward(net, ema_vector, x, t, s)
    return G


def cmd_sample(
    config_path: str,
    checkpoint: str | None,
    oracle: bool,
    gamma: float | None,
    nfe: int | None,
    n: int | None,
    variant: str | None,
) -> int:
    cfg = load_config(config_path)
    out = resolve_output_dir(cfg)
    sampler = cfg.sampler
    if gamma is not None:
        sampler = replace(sampler, gamma=gamma)
    if nfe is not None:
        sampler = replace(sampler, nfe=nfe)
    if n is not None:
        sampler = replace(sampler, n=n)
    if variant is not None:
        sampler = replace(sampler, variant=variant)
    if not (0.0 <= sampler.gamma <= 1.0):
        raise ConfigError(f"gamma must lie in [0, 1], got {sampler.gamma}")
    if sampler.nfe < 1 or sampler.n < 1:
        raise ConfigError("nfe and n must be >= 1")
    if (checkpoint is None) == (not oracle):
        raise ConfigError("exactly one of --checkpoint and --oracle is required")

    if oracle:
        G = _oracle_g(cfg.mixture)
        dim = cfg.mixture.dim
        source = "oracle"
    else:
        header, arrays = load_checkpoint(checkpoint)
        net = _net_from_checkpoint(header, cfg)
        G = _student_g(net, arrays["ema"])
        dim = net.dim
        source = "checkpoint"

    times = sampler_times(cfg.schedule, sampler.nfe)
    spec = SamplerSpec(gamma=sampler.gamma, times=times, variant=sampler.variant, seed=cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    x_T = cfg.schedule.sigma_max * rng.standard_normal((sampler.n, dim))
    x0, nfe_used, _ = gamma_sample(G, spec, x_T, rng)
    if not np.all(np.isfinite(x0)):
        print("non-finite samples produced", file=sys.stderr)
        return EXIT_NUMERIC

    name = f"samples_gamma{_fmt(sampler.gamma)}_nfe{sampler.nfe}.csv"
    path = os.path.join(out, name)
    cols = [f"coord_{i}" for i in range(dim)] + ["seed", "gamma", "nfe"]
    with open(path, "w", encoding="utf-8") as f:
        for line in _header_lines(cfg):
            f.write(line + "\n")
        f.write(",".join(cols) + "\n")
        for row in x0:
            vals = [_fmt(v) for v in row] + [str(cfg.seed), _fmt(sampler.gamma), str(nfe_used)]
            f.write(",".join(vals) + "\n")
    print(f"wrote {sampler.n} samples ({source}) to {path}; "
          f"NFE per sample = {nfe_used}, total evaluations = {nfe_used * sampler.n}")
    return EXIT_OK


def cmd_eval(config_path: str, checkpoint: str | None, oracle: bool) -> int:
    cfg = load_config(config_path)
    out = resolve_output_dir(cfg)
    if (checkpoint is None) == (not oracle):
        raise ConfigError("exactly one of --checkpoint and --oracle is required")
    mix = cfg.mixture
    if oracle:
        G = _oracle_g(mix)
        dim = mix.dim
        score_fn = lambda x, t: score_t(mix, x, t)  # noqa: E731
    else:
        header, arrays = load_checkpoint(checkpoint)
        net = _net_from_checkpoint(header, cfg)
        G = _student_g(net, arrays["ema"])
        dim = net.dim

        def score_fn(x, t):
            return (g_forward(net, arrays["ema"], x, t, t) - x) / (t * t)

    rng = np.random.default_rng(cfg.seed)
    n = cfg.eval.n_samples
    times = sampler_times(cfg.schedule, cfg.sampler.nfe)
    spec = SamplerSpec(gamma=cfg.sampler.gamma, times=times, seed=cfg.seed)
    x0, nfe_used, _ = gamma_sample(G, spec, cfg.schedule.sigma_max * rng.standard_normal((n, dim)), rng)
    data = sample_marginal(mix, 0.0, n, rng)
    w1 = float(np.mean([wasserstein1(x0[:, i], data[:, i]) for i in range(dim)]))
    mean_err = float(np.max(np.abs(x0.mean(axis=0) - data.mean(axis=0))))
    var_err = float(np.max(np.abs(x0.var(axis=0) - data.var(axis=0))))

    nll_val = None
    if cfg.eval.nll:
        lattice = np.linspace(-2.0, 2.0, cfg.eval.nll_points)[:, None] * np.ones((1, dim))
        nll = nll_pf_ode(score_fn, lattice, cfg.schedule.sigma_max,
                         n_steps=cfg.eval.nll_steps, t_min=cfg.schedule.sigma_min)
        nll_val = float(np.mean(nll))

    report = {
        "config_sha256": cfg.config_hash,
        "seed": cfg.seed,
        "n_samples": n,
        "nfe": nfe_used,
        "w1": w1,
        "mean_error": mean_err,
        "var_error": var_err,
        "nll": nll_val,
    }
    path = os.path.join(out, "eval_report.json")
    with open(path, "w", encoding="utf-8") as f:
        json.dump(report, f, sort_keys=True, indent=2)
        f.write("\n")
    print(f"w1={w1:.6f} mean_error={mean_err:.6f} var_error={var_err:.6f} "
          + (f"nll={nll_val:.6f} " if nll_val is not None else "")
          + f"-> {path}")
    return EXIT_OK


# -- property-check suites -----------------------------------------------------


def _single_gaussian(cfg: RunConfig) -> GaussianMixture:
    if cfg.mixture.n_components == 1:
        return cfg.mixture
    return GaussianMixture(weights=[1.0], means=[[0.0]], stds=[1.0])


def _suite_g_limit(cfg: RunConfig) -> dict:
    """As s -> t the implied g recovers the denoiser at a linear rate in (t - s)."""
    mix = _single_gaussian(cfg)
    rng = np.random.default_rng(cfg.seed)
    x = rng.standard_normal((64, mix.dim)) * 2.0
    t = 1.0
    gaps = np.array([0.2, 0.1, 0.05, 0.025, 0.0125])
    errs = []
    for dt in gaps:
        s = t - dt
        G = exact_transition(mix, x, t, s)
        g = (G - (s / t) * x) / (1.0 - s / t)
        errs.append(float(np.max(np.abs(g - denoiser_t(mix, x, t)))))
    slope = float(np.polyfit(np.log(gaps), np.log(errs), 1)[0])
    passed = 0.8 <= slope <= 1.2
    return {"suite": "g_limit", "passed": passed, "slope": slope,
            "gaps": gaps.tolist(), "errors": errs}


def _suite_bilipschitz(cfg: RunConfig) -> dict:
    """Distinct starts stay distinct under the exact jump map, with expansion
    bounded by exp(L |t-s|) two-sidedly (single-Gaussian slope bound L)."""
    mix = _single_gaussian(cfg)
    sigma0 = float(mix.stds[0])
    L = 1.0 / (sigma0 * sigma0)
    rng = np.random.default_rng(cfg.seed)
    t, s = 2.0, 0.5
    x = rng.standard_normal((256, mix.dim)) * 3.0
    y = x + 10.0 ** rng.uniform(-6, 0, size=(256, 1))
    gx = exact_transition(mix, x, t, s)
    gy = exact_transition(mix, y, t, s)
    num = np.linalg.norm(gx - gy, axis=1)
    den_ = np.linalg.norm(x - y, axis=1)
    ratios = num / den_
    lo, hi = math.exp(-L * (t - s)), math.exp(L * (t - s))
    passed = bool(np.all(num > 0.0) and np.all(ratios >= lo) and np.all(ratios <= hi))
    return {"suite": "bilipschitz", "passed": passed,
            "ratio_min": float(ratios.min()), "ratio_max": float(ratios.max()),
            "bound_lo": lo, "bound_hi": hi}


def _suite_variance(cfg: RunConfig) -> dict:
    mix = _single_gaussian(cfg)
    G = _oracle_g(mix)
    times = sampler_times(cfg.schedule, 8)
    rng = np.random.default_rng(cfg.seed)
    reports = {}
    passed = True
    for gamma in (0.0, 0.5, 1.0):
        rep = variance_probe(G, mix, times, gamma, cfg.eval.n_chains, rng)
        reports[str(gamma)] = rep.ok
        passed = passed and rep.ok
    return {"suite": "variance", "passed": passed, "per_gamma": reports,
            "n_chains": cfg.eval.n_chains}


def _suite_accumulation(cfg: RunConfig) -> dict:
    mix = _single_gaussian(cfg)
    G = perturbed_transition(mix, amplitude=0.01, seed=cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    rep = accumulation_study(G, mix, [0.0, 0.5, 1.0], [16], cfg.eval.n_samples, rng,
                             cfg=cfg.schedule)
    rows = {f"gamma={r.gamma}": {"w1": r.w1, "stderr": r.stderr} for r in rep.rows}
    passed = bool(rep.monotone_in_gamma[16])
    return {"suite": "accumulation", "passed": passed, "rows": rows}


def _suite_order(cfg: RunConfig) -> dict:
    mix = _single_gaussian(cfg)

    def den(x, t):
        return denoiser_t(mix, x, t)

    x0 = np.full((4, mix.dim), 1.5)
    results = {}
    passed = True
    for method, lo, hi in (("euler", 0.8, 1.2), ("heun", 1.8, 2.2)):
        est = convergence_order_probe(
            method, den,
            lambda x, t, s: exact_transition(mix, x, t, s),
            2.0, 0.05, [4, 8, 16, 32, 64], x0=x0,
        )
        ok = (lo <= est.order <= hi) or est.saturated
        results[method] = {"order": est.order, "saturated": est.saturated}
        passed = passed and ok
    return {"suite": "order", "passed": passed, "methods": results}


def _suite_nll(cfg: RunConfig) -> dict:
    mix = _single_gaussian(cfg)
    lattice = np.linspace(-2.0, 2.0, cfg.eval.nll_points)[:, None] * np.ones((1, mix.dim))

    def score_fn(x, t):
        return score_t(mix, x, t)

    nll = nll_pf_ode(score_fn, lattice, cfg.schedule.sigma_max,
                     n_steps=cfg.eval.nll_steps, t_min=cfg.schedule.sigma_min)
    exact = -log_density_t(mix, lattice, cfg.schedule.sigma_min)
    gap = float(np.max(np.abs(nll - exact)))
    passed = gap <= 0.01
    return {"suite": "nll", "passed": passed, "max_abs_gap_nats": gap}


_SUITE_FNS = {
    "g_limit": _suite_g_limit,
    "bilipschitz": _suite_bilipschitz,
    "variance": _suite_variance,
    "accumulation": _suite_accumulation,
    "order": _suite_order,
    "nll": _suite_nll,
}


def cmd_check(config_path: str, suite: str) -> int:
    cfg = load_config(config_path)
    if suite != "all" and suite not in _SUITE_FNS:
        raise ConfigError(f"unknown suite {suite!r}; choose from {CHECK_SUITES + ('all',)}")
    out = resolve_output_dir(cfg)
    names = CHECK_SUITES if suite == "all" else (suite,)
    results = []
    for name in names:
        res = _SUITE_FNS[name](cfg)
        results.append(res)
        print(f"{name}: {'PASS' if res['passed'] else 'FAIL'}")
    verdict = {
        "config_sha256": cfg.config_hash,
        "seed": cfg.seed,
        "suites": results,
        "passed": all(r["passed"] for r in results),
    }
    path = os.path.join(out, f"check_{suite}.json")
    with open(path, "w", encoding="utf-8") as f:
        json.dump(verdict, f, sort_keys=True, indent=2)
        f.write("\n")
    print(f"report -> {path}")
    return EXIT_OK if verdict["passed"] else EXIT_CHECK_FAILED


# -- entry point ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="flowjump",
                                description="train/sample/eval/check for jump-map generators")
    sub = p.add_subparsers(dest="command", required=True)

    pt = sub.add_parser("train", help="run the training loop from a config file")
    pt.add_argument("config")

    ps = sub.add_parser("sample", help="draw samples from a checkpoint or the oracle")
    ps.add_argument("config")
    ps.add_argument("--checkpoint")
    ps.add_argument("--oracle", action="store_true")
    ps.add_argument("--gamma", type=float)
    ps.add_argument("--nfe", type=int)
    ps.add_argument("--n", type=int)
    ps.add_argument("--variant")

    pe = sub.add_parser("eval", help="summary metrics for a checkpoint or the oracle")
    pe.add_argument("config")
    pe.add_argument("--checkpoint")
    pe.add_argument("--oracle", action="store_true")

    pc = sub.add_parser("check", help="run oracle property suites")
    pc.add_argument("config")
    pc.add_argument("--suite", default="all")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "train":
            return cmd_train(args.config)
        if args.command == "sample":
            return cmd_sample(args.config, args.checkpoint, args.oracle,
                              args.gamma, args.nfe, args.n, args.variant)
        if args.command == "eval":
            return cmd_eval(args.config, args.checkpoint, args.oracle)
        if args.command == "check":
            return cmd_check(args.config, args.suite)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IntegrationError, FloatingPointError) as exc:
        print(f"numeric incident: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
