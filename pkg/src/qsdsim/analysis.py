"""Replicated runs, convergence traces, CLT checks and the two benchmark experiments."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import rng, schemes
from .chain import AbsorbingChain, exact_qsd, is_irreducible, kernel_K, preset, stationary
from .errors import ConfigError, DimensionMismatch, GridMismatch, InputError, Reducible
from .outputs import write_csv, write_json
from .schedules import GrowthSchedule, StepSchedule, a_of, gamma
from .schemes import RunResult, SchemeConfig
from .theory import clt_covariance, iid_alpha_star, noise_covariance


def tv_distance(p, q) -> float:
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise DimensionMismatch(f"shapes {p.shape} and {q.shape} differ")
    return float(min(1.0, 0.5 * np.abs(p - q).sum()))


def _map(fn, items, parallelism):
    if parallelism <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        # map preserves input order whatever the completion order
        return list(pool.map(fn, items))


@dataclass(frozen=True, eq=False)
class ReplicationSet:
    config: SchemeConfig
    R: int
    master_seed: int
    seeds: tuple
    results: list = field(repr=False)
    starts: tuple | None = None


def replicate(chain: AbsorbingChain, config: SchemeConfig, R: int, master_seed: int,
              parallelism: int = 1, starts=None) -> ReplicationSet:
    """Run ``R`` seeded copies of ``config``.

    Replication ``r`` uses seed ``derive_seed(master_seed, r)``. For the
    one-particle schemes ``starts[r]`` optionally overrides the start state.
    """
    if R < 1:
        raise ConfigError("R must be >= 1")
    if starts is not None:
        if len(starts) != R:
            raise ConfigError("need one start state per replication")
        if config.scheme not in ("single", "branching"):
            raise ConfigError("per-replication starts only apply to single and branching")
        starts = tuple(int(x) for x in starts)
    seeds = tuple(rng.derive_seed(master_seed, r) for r in range(R))

    def one(r):
        cfg = config.with_seed(seeds[r])
        if starts is not None:
            cfg = replace(cfg, initial_states=(starts[r],))
        return schemes.run(chain, cfg)

    results = _map(one, range(R), parallelism)
    return ReplicationSet(config, R, master_seed, seeds, results, starts)


@dataclass(frozen=True, eq=False)
class ConvergenceTrace:
    moves: np.ndarray
    mean_tv: np.ndarray
    median_tv: np.ndarray

    def rows(self):
        return list(zip(self.moves.tolist(), self.mean_tv.tolist(), self.median_tv.tolist()))

    def resample(self, grid) -> "ConvergenceTrace":
        """Step-function view on another movement grid (latest snapshot at or before each point)."""
        grid = np.asarray(grid, dtype=np.int64)
        idx = np.searchsorted(self.moves, grid, side="right") - 1
        if np.any(idx < 0):
            raise GridMismatch("grid starts before the first snapshot")
        return ConvergenceTrace(grid, self.mean_tv[idx], self.median_tv[idx])


def tv_curves(results, theta_star) -> np.ndarray:
    moves = results[0].trace_moves
    for r in results:
        if not np.array_equal(r.trace_moves, moves):
            raise GridMismatch("replications were recorded on different movement grids")
    snaps = np.stack([r.trace_estimates for r in results])
    return np.minimum(1.0, 0.5 * np.abs(snaps - np.asarray(theta_star)).sum(axis=-1))


def aggregate_trace(reps: ReplicationSet, theta_star) -> ConvergenceTrace:
    tv = tv_curves(reps.results, theta_star)
    return ConvergenceTrace(reps.results[0].trace_moves.copy(), tv.mean(axis=0), np.median(tv, axis=0))


def tangent_basis(d: int) -> np.ndarray:
    """Orthonormal basis of ``{x : sum x = 0}`` as columns."""
    B = np.zeros((d, d - 1))
    B[: d - 1] = np.eye(d - 1)
    B[d - 1] = -1.0
    q, _ = np.linalg.qr(B)
    return q


def tangent_rel_error(C, V) -> float:
    d = C.shape[0]
    if d == 1:
        return 0.0
    W = tangent_basis(d)
    Ct = W.T @ C @ W
    Vt = W.T @ V @ W
    denom = np.linalg.norm(Vt)
    return float(np.linalg.norm(Ct - Vt) / denom) if denom > 0 else float("inf")


@dataclass(frozen=True, eq=False)
class CltReport:
    variant: str
    sigma_n: float
    R: int
    scaled_mean: np.ndarray
    empirical_cov: np.ndarray
    theoretical_V: np.ndarray
    frobenius_rel_error: float
    mean_norm_over_se: float
    degenerate: bool
    gamma_star: float
    L: float
    gamma_star_min: float

    def to_dict(self):
        return {
            "variant": self.variant,
            "sigma_n": self.sigma_n,
            "R": self.R,
            "scaled_mean": self.scaled_mean,
            "empirical_cov": self.empirical_cov,
            "theoretical_V": self.theoretical_V,
            "frobenius_rel_error": self.frobenius_rel_error,
            "mean_norm_over_se": self.mean_norm_over_se,
            "degenerate": self.degenerate,
            "gamma_star": self.gamma_star,
            "L": self.L,
            "gamma_star_min": self.gamma_star_min,
        }


def clt_scaling(config: SchemeConfig, steps: int, variant: str) -> float:
    """``sqrt(a(m)/gamma_m)``, or the per-particle ``beta_m`` for ``algII_beta``."""
    g = gamma(config.steps, steps)
    if config.scheme == "branching":
        if variant == "algII_beta":
            inv = math.fsum(1.0 / a_of(config.growth, k) for k in range(1, steps + 1)) / steps
            return 1.0 / math.sqrt(g * inv)
        return math.sqrt(a_of(config.growth, steps) / g)
    return math.sqrt(config.particles / g)


def _moments(samples):
    R = samples.shape[0]
    mean = samples.mean(axis=0)
    if R > 1:
        centred = samples - mean
        cov = centred.T @ centred / (R - 1)
        cov = 0.5 * (cov + cov.T)
    else:
        cov = np.zeros((samples.shape[1],) * 2)
    return mean, cov


def _mean_over_se(mean, cov, R):
    se = math.sqrt(max(np.trace(cov), 0.0) / R)
    norm = float(np.linalg.norm(mean))
    if se == 0:
        return 0.0 if norm == 0 else float("inf")
    return norm / se


def clt_report(chain: AbsorbingChain, config: SchemeConfig, reps: ReplicationSet,
               variant: str | None = None) -> CltReport:
    if config.scheme not in ("interacting", "branching"):
        raise ConfigError("CLT checks apply to the interacting and branching schemes")
    expected = ("algI",) if config.scheme == "interacting" else ("algII", "algII_beta")
    variant = variant or expected[0]
    if variant not in expected:
        raise ConfigError(f"variant {variant!r} does not match scheme {config.scheme!r}")
    qsd = exact_qsd(chain)
    zeta = config.growth.zeta if config.scheme == "branching" else 0.0
    theory = clt_covariance(chain, config.steps.gamma_star, variant, zeta, qsd=qsd)
    steps = {r.steps for r in reps.results}
    if len(steps) != 1:
        raise GridMismatch("replications ran different numbers of steps")
    sigma = clt_scaling(config, steps.pop(), variant)
    samples = sigma * (np.stack([r.estimate for r in reps.results]) - qsd.theta_star)
    mean, cov = _moments(samples)
    return CltReport(
        variant=variant,
        sigma_n=sigma,
        R=reps.R,
        scaled_mean=mean,
        empirical_cov=cov,
        theoretical_V=theory.V,
        frobenius_rel_error=tangent_rel_error(cov, theory.V),
        mean_norm_over_se=_mean_over_se(mean, cov, reps.R),
        degenerate=bool(np.all(np.abs(cov) < 1e-300)),
        gamma_star=theory.gamma_star,
        L=theory.L,
        gamma_star_min=theory.gamma_star_min,
    )


@dataclass(frozen=True)
class LinearGrowth:
    """``a(n) = round(a_star * n)``; only used by the iid demonstration."""

    a_star: float


@dataclass(frozen=True, eq=False)
class IidReport:
    n: int
    particles: int
    R: int
    target: np.ndarray
    scaled_mean: np.ndarray
    se: np.ndarray
    max_z: float
    empirical_cov: np.ndarray
    U: np.ndarray
    cov_rel_error: float

    def to_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def iid_clt_demo(K0, x0: int, growth, n: int, R: int, master_seed: int,
                 parallelism: int = 1) -> IidReport:
    """Scaled occupation error of ``a(n)`` independent ``K0``-chains started at ``x0``.

    With sublinear growth the target mean is 0; with :class:`LinearGrowth` it
    is the drift from :func:`iid_alpha_star` for ``a_star = a(n)/n``.
    """
    K0 = np.ascontiguousarray(K0, dtype=np.float64)
    d = K0.shape[0]
    if not is_irreducible(K0):
        raise Reducible("K0 is not irreducible")
    if not 1 <= x0 <= d:
        raise InputError(f"state {x0} is not in 1..{d}")
    if isinstance(growth, LinearGrowth):
        N = max(1, round(growth.a_star * n))
        target = iid_alpha_star(K0, x0, N / n)
    else:
        N = a_of(growth, n)
        target = np.zeros(d)
    theta = stationary(K0)
    seeds = [rng.derive_seed(master_seed, r) for r in range(R)]
    occ = _map(lambda s: schemes.backend.iid_occupation(K0, x0 - 1, N, n, s), seeds, parallelism)
    samples = math.sqrt(N * n) * (np.stack(occ) / (n * N) - theta)
    mean, cov = _moments(samples)
    se = np.sqrt(np.diag(cov) / R)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, np.abs(mean - target) / se, np.where(mean == target, 0.0, np.inf))
    U = noise_covariance(K0, theta)
    return IidReport(n, N, R, target, mean, se, float(np.max(z)), cov, U, tangent_rel_error(cov, U))


# ---------------------------------------------------------------------------
# benchmark experiments on the ten-state chain

GAMMA_STAR = 4.17


@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    n: int
    zeta: float
    start_choices: tuple
    gamma_star: float = GAMMA_STAR
    stride: int = 5


EXPERIMENTS = {
    "one": ExperimentSpec("one", 1000, 0.75, (4, 5, 6)),
    "two": ExperimentSpec("two", 2000, 0.5, (5,)),
}


def draw_initial_states(choices, count: int, master_seed: int) -> list[int]:
    """One uniform draw per particle from ``choices``, keyed by the master seed."""
    choices = list(choices)
    return [choices[rng.choose(rng.uniform(master_seed, rng.INIT, 0, i), len(choices))]
            for i in range(count)]


def proportional_starts(states, R: int) -> list[int]:
    """Start states for ``R`` one-particle runs in proportion to a particle multiset."""
    ordered = sorted(states)
    N = len(ordered)
    return [ordered[min(N - 1, ((2 * r + 1) * N) // (2 * R))] for r in range(R)]


def experiment_configs(spec: ExperimentSpec, master_seed: int):
    growth = GrowthSchedule.power(spec.zeta)
    steps = StepSchedule(spec.gamma_star)
    N = a_of(growth, spec.n)
    states = draw_initial_states(spec.start_choices, N, master_seed)
    base = dict(horizon_n=spec.n, growth=growth, steps=steps, seed=0)
    configs = {
        "single": SchemeConfig("single", initial_states=(states[0],), trace_stride=spec.stride * N, **base),
        "independent": SchemeConfig("independent", initial_states=states, trace_stride=spec.stride, **base),
        "interacting": SchemeConfig("interacting", initial_states=states, trace_stride=spec.stride, **base),
        "branching": SchemeConfig("branching", initial_states=(states[0],), trace_stride=1, **base),
        "fleming_viot": SchemeConfig("fleming_viot", initial_states=states, trace_stride=spec.stride * N, **base),
    }
    return configs, states


def compare_schemes(chain: AbsorbingChain, configs: dict, R: int, master_seed: int,
                    parallelism: int = 1, starts=None, grid_step: int | None = None):
    """Replicate every scheme and aggregate TV traces on a shared movement grid.

    Returns ``(traces, summary)``; ``summary`` maps scheme name to final TV
    statistics and budget.
    """
    theta_star = exact_qsd(chain).theta_star
    traces = {}
    summary = {}
    for name, cfg in configs.items():
        reps = replicate(chain, cfg, R, master_seed, parallelism,
                         starts=starts if name in ("single", "branching") else None)
        trace = aggregate_trace(reps, theta_star)
        moves_used = reps.results[0].moves_used
        if grid_step:
            grid = np.arange(0, cfg.budget + 1, grid_step, dtype=np.int64)
            if grid[-1] != moves_used:
                grid = np.append(grid, moves_used)
            trace = trace.resample(grid)
        final = np.array([tv_distance(r.estimate, theta_star) for r in reps.results])
        traces[name] = trace
        summary[name] = {
            "final_mean_tv": float(final.mean()),
            "final_median_tv": float(np.median(final)),
            "moves_used": moves_used,
            "seed": master_seed,
            "params": {
                "horizon_n": cfg.horizon_n,
                "growth": {"kind": cfg.growth.kind, "a": cfg.growth.a, "zeta": cfg.growth.zeta},
                "gamma_star": cfg.steps.gamma_star,
                "particles": cfg.particles,
                "trace_stride": cfg.trace_stride,
                "budget_matched": cfg.budget_matched,
                "reps": R,
            },
        }
    return traces, summary


def write_comparison(out_dir, traces, summary):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, trace in traces.items():
        p = out / f"{name}.csv"
        write_csv(p, ["moves", "mean_tv", "median_tv"], trace.rows())
        paths.append(p)
    p = out / "summary.json"
    write_json(p, summary)
    paths.append(p)
    return paths


def run_experiment(which: str, R: int = 50, master_seed: int = 0, parallelism: int = 1):
    spec = EXPERIMENTS[which]
    chain = preset("paper-10state")
    configs, states = experiment_configs(spec, master_seed)
    starts = proportional_starts(states, R)
    N = configs["interacting"].particles
    traces, summary = compare_schemes(chain, configs, R, master_seed, parallelism, starts,
                                      grid_step=spec.stride * N)
    return traces, summary, states


def experiment_one(output_dir, R: int = 50, master_seed: int = 0, parallelism: int = 1):
    traces, summary, _ = run_experiment("one", R, master_seed, parallelism)
    return write_comparison(output_dir, traces, summary)


def experiment_two(output_dir, R: int = 50, master_seed: int = 0, parallelism: int = 1):
    traces, summary, _ = run_experiment("two", R, master_seed, parallelism)
    return write_comparison(output_dir, traces, summary)


# ---------------------------------------------------------------------------
# CLT presets on the three-state chain

CLT_GAMMA_STAR = 3.0


def clt_config(scheme: str = "interacting", n: int = 20000, zeta: float = 0.3,
               gamma_star: float = CLT_GAMMA_STAR, x0: int = 1) -> SchemeConfig:
    growth = GrowthSchedule.power(zeta)
    N = a_of(growth, n)
    states = (x0,) if scheme == "branching" else (x0,) * N
    return SchemeConfig(scheme, n, growth, StepSchedule(gamma_star), states,
                        trace_stride=n, budget_matched=False)


def run_clt(scheme: str = "interacting", R: int = 1000, master_seed: int = 0,
            parallelism: int = 1, **kwargs) -> CltReport:
    chain = preset("paper-3state")
    cfg = clt_config(scheme, **kwargs)
    reps = replicate(chain, cfg, R, master_seed, parallelism)
    return clt_report(chain, cfg, reps)


def qsd_kernel(chain: AbsorbingChain) -> np.ndarray:
    """``K[theta*]``, the kernel whose stationary law is the QSD."""
    return kernel_K(chain, exact_qsd(chain).theta_star)
