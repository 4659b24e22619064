"""The five particle estimators of the QSD, with exact movement accounting.

Each ``run_*`` validates its configuration and delegates the inner loop to the
active kernel backend: the compiled ``_kernels`` extension when it imports,
otherwise the numpy ``_fallback``. Set ``QSDSIM_BACKEND=python`` to force the
fallback. Both backends produce identical bytes for the same inputs.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from . import _fallback, rng
from .chain import AbsorbingChain
from .errors import ConfigError
from .schedules import GrowthSchedule, StepSchedule, a_of, xi_budget

if os.environ.get("QSDSIM_BACKEND", "").lower() == "python":
    backend = _fallback
else:
    try:
        from . import _kernels as backend
    except ImportError:  # extension not built
        backend = _fallback

SCHEMES = ("single", "independent", "interacting", "branching", "fleming_viot")


def set_backend(name: str):
    """Switch kernel backend (``"cython"`` or ``"python"``); returns the previous name."""
    global backend
    previous = backend.NAME
    if name == "python":
        backend = _fallback
    elif name == "cython":
        from . import _kernels

        backend = _kernels
    else:
        raise ValueError(f"unknown backend {name!r}")
    return previous


@dataclass(frozen=True)
class SchemeConfig:
    scheme: str
    horizon_n: int
    growth: GrowthSchedule
    steps: StepSchedule
    initial_states: tuple
    seed: int = 0
    trace_stride: int = 1
    # branching only: run xi(n) steps to match the n*a(n) budget, or exactly n steps
    budget_matched: bool = True

    def __post_init__(self):
        object.__setattr__(self, "initial_states", tuple(int(x) for x in self.initial_states))
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {self.scheme!r}; choose from {SCHEMES}")
        if int(self.horizon_n) != self.horizon_n or self.horizon_n < 1:
            raise ConfigError("horizon_n must be an integer >= 1")
        if int(self.trace_stride) != self.trace_stride or self.trace_stride < 1:
            raise ConfigError("trace_stride must be an integer >= 1")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if not self.initial_states:
            raise ConfigError("initial_states must be nonempty")
        N = self.particles
        if self.scheme == "branching" and self.growth.kind != "power":
            raise ConfigError("branching requires power growth")
        if self.scheme == "fleming_viot" and N < 2:
            raise ConfigError(f"fleming_viot needs at least 2 particles, got {N}")
        want = 1 if self.scheme in ("single", "branching") else N
        if len(self.initial_states) != want:
            raise ConfigError(
                f"{self.scheme} needs {want} initial state(s), got {len(self.initial_states)}"
            )

    @property
    def particles(self) -> int:
        """``a(n)`` at the horizon."""
        return a_of(self.growth, self.horizon_n)

    @property
    def budget(self) -> int:
        return self.horizon_n * self.particles

    def with_seed(self, seed: int) -> "SchemeConfig":
        return replace(self, seed=seed)


@dataclass(frozen=True, eq=False)
class RunResult:
    estimate: np.ndarray
    moves_used: int
    steps: int
    trace_moves: np.ndarray = field(repr=False)
    trace_estimates: np.ndarray = field(repr=False)

    @property
    def trace(self):
        return list(zip(self.trace_moves.tolist(), self.trace_estimates))


def sample_row(row, u: float) -> int:
    """Inverse-CDF draw: the smallest 1-based ``j`` whose cumulative mass exceeds ``u``."""
    c = 0.0
    for j, p in enumerate(row):
        c = c + p
        if u < c:
            return j + 1
    return len(row)


def _check_states(chain: AbsorbingChain, cfg: SchemeConfig, scheme: str):
    if cfg.scheme != scheme:
        raise ConfigError(f"config is for {cfg.scheme!r}, not {scheme!r}")
    bad = [x for x in cfg.initial_states if not 1 <= x <= chain.d]
    if bad:
        raise ConfigError(f"initial states {bad} outside 1..{chain.d}")
    return np.array(cfg.initial_states, dtype=np.int64) - 1


def _arrays(chain):
    return np.ascontiguousarray(chain.sub), np.ascontiguousarray(chain.absorb)


def _result(out, steps):
    theta, moves, snaps = out
    return RunResult(theta, int(moves[-1]), steps, moves, snaps)


def run_interacting(chain: AbsorbingChain, cfg: SchemeConfig) -> RunResult:
    init = _check_states(chain, cfg, "interacting")
    Po, p0 = _arrays(chain)
    n = cfg.horizon_n
    out = backend.interacting(Po, p0, init, n, cfg.steps.gamma_star, cfg.steps.N_star,
                              cfg.seed, cfg.trace_stride)
    return _result(out, n)


def run_single(chain: AbsorbingChain, cfg: SchemeConfig) -> RunResult:
    init = _check_states(chain, cfg, "single")
    Po, p0 = _arrays(chain)
    steps = cfg.budget
    out = backend.interacting(Po, p0, init, steps, cfg.steps.gamma_star, cfg.steps.N_star,
                              cfg.seed, cfg.trace_stride)
    return _result(out, steps)


def copy_seeds(seed: int, copies: int) -> list[int]:
    return [rng.derive_seed(seed, i) for i in range(copies)]


def run_independent(chain: AbsorbingChain, cfg: SchemeConfig, seeds=None) -> RunResult:
    """Average of ``a(n)`` single-particle runs of ``n`` steps each.

    Copy ``i`` uses ``seeds[i]`` (derived from ``cfg.seed`` by default) and
    reproduces :func:`run_single` with that seed and horizon ``n``.
    """
    init = _check_states(chain, cfg, "independent")
    Po, p0 = _arrays(chain)
    seeds = copy_seeds(cfg.seed, len(init)) if seeds is None else list(seeds)
    if len(seeds) != len(init):
        raise ConfigError("need one seed per copy")
    n = cfg.horizon_n
    out = backend.independent(Po, p0, init, n, cfg.steps.gamma_star, cfg.steps.N_star,
                              seeds, cfg.trace_stride)
    return _result(out, n)


def branching_steps(cfg: SchemeConfig) -> int:
    return xi_budget(cfg.growth, cfg.horizon_n) if cfg.budget_matched else cfg.horizon_n


@lru_cache(maxsize=32)
def _particle_counts(growth: GrowthSchedule, steps: int) -> np.ndarray:
    counts = np.array([a_of(growth, m) for m in range(steps + 2)], dtype=np.int64)
    counts.setflags(write=False)
    return counts


def run_branching(chain: AbsorbingChain, cfg: SchemeConfig) -> RunResult:
    init = _check_states(chain, cfg, "branching")
    Po, p0 = _arrays(chain)
    steps = branching_steps(cfg)
    counts = _particle_counts(cfg.growth, steps)
    out = backend.branching(Po, p0, int(init[0]), counts, cfg.steps.gamma_star,
                            cfg.steps.N_star, cfg.seed, cfg.trace_stride)
    return _result(out, steps)


def run_fleming_viot(chain: AbsorbingChain, cfg: SchemeConfig) -> RunResult:
    init = _check_states(chain, cfg, "fleming_viot")
    ticks = cfg.budget
    out = backend.fleming_viot(np.ascontiguousarray(chain.P), init, ticks, cfg.seed,
                               cfg.trace_stride)
    return _result(out, ticks)


RUNNERS = {
    "single": run_single,
    "independent": run_independent,
    "interacting": run_interacting,
    "branching": run_branching,
    "fleming_viot": run_fleming_viot,
}


def run(chain: AbsorbingChain, cfg: SchemeConfig) -> RunResult:
    return RUNNERS[cfg.scheme](chain, cfg)
