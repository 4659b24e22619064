"""Estimate quasi-stationary distributions of finite absorbing Markov chains."""

__version__ = "0.1.0"

from .chain import (  # noqa: E402
    PRESETS,
    AbsorbingChain,
    QsdSolution,
    drift_h,
    exact_qsd,
    invariant_pi,
    kernel_K,
    load_chain,
    poisson_Q,
    preset,
    validate_chain,
)
from .schedules import GrowthSchedule, StepSchedule, a_of, b_of, xi_budget  # noqa: E402
from .schemes import SCHEMES, RunResult, SchemeConfig, run, set_backend  # noqa: E402
from .theory import CltTheory, clt_covariance, jacobian_h, stability_L, u_star  # noqa: E402

__all__ = [
    "PRESETS", "AbsorbingChain", "QsdSolution", "drift_h", "exact_qsd", "invariant_pi",
    "kernel_K", "load_chain", "poisson_Q", "preset", "validate_chain",
    "GrowthSchedule", "StepSchedule", "a_of", "b_of", "xi_budget",
    "SCHEMES", "RunResult", "SchemeConfig", "run", "set_backend",
    "CltTheory", "clt_covariance", "jacobian_h", "stability_L", "u_star",
]
