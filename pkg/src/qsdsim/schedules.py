"""Step sizes and particle-count schedules."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConfigError


@dataclass(frozen=True)
class StepSchedule:
    """``gamma_{k+1} = gamma* / (k + N*)`` with ``N* = floor(gamma*) + 1``."""

    gamma_star: float

    def __post_init__(self):
        if not (self.gamma_star > 0 and math.isfinite(self.gamma_star)):
            raise ConfigError("gamma_star must be a positive finite number")

    @property
    def N_star(self) -> int:
        return math.floor(self.gamma_star) + 1


def gamma(steps: StepSchedule, k: int) -> float:
    """Step size used by the k-th update (k >= 1)."""
    if k < 1:
        raise ValueError("step index starts at 1")
    return steps.gamma_star / (k - 1 + steps.N_star)


@dataclass(frozen=True)
class GrowthSchedule:
    """Particle count law: ``constant`` (``a`` particles) or ``power`` (``floor(m**zeta)``)."""

    kind: str
    a: int = 1
    zeta: float = 0.5

    def __post_init__(self):
        if self.kind == "constant":
            if int(self.a) != self.a or self.a < 1:
                raise ConfigError("constant growth needs an integer a >= 1")
        elif self.kind == "power":
            if not 0.0 < self.zeta < 1.0:
                raise ConfigError("power growth needs 0 < zeta < 1")
        else:
            raise ConfigError(f"unknown growth kind {self.kind!r}")

    @classmethod
    def constant(cls, a: int) -> "GrowthSchedule":
        return cls("constant", a=a)

    @classmethod
    def power(cls, zeta: float) -> "GrowthSchedule":
        return cls("power", zeta=zeta)


def a_of(growth: GrowthSchedule, m: int) -> int:
    if m < 0:
        raise ValueError("time must be non-negative")
    if growth.kind == "constant":
        return growth.a
    return max(1, math.floor(m ** growth.zeta))


def b_of(growth: GrowthSchedule, j: int) -> int:
    """Time at which the j-th particle appears (``b(1) = 0``)."""
    if growth.kind != "power":
        raise ConfigError("branch times need power growth")
    if j < 1:
        raise ValueError("particle index starts at 1")
    if j == 1:
        return 0
    # first m with floor(m**zeta) >= j; start just below the real root and walk
    m = max(1, math.floor(j ** (1.0 / growth.zeta)) - 2)
    while a_of(growth, m) >= j and m > 0:
        m -= 1
    while a_of(growth, m) < j:
        m += 1
    return m


def xi_budget(growth: GrowthSchedule, n: int) -> int:
    """Fewest branching steps whose movement count ``sum_{i<=k} a(i+1)`` reaches ``n a(n)``."""
    if growth.kind != "power":
        raise ConfigError("budget matching needs power growth")
    if n < 1:
        raise ValueError("n must be >= 1")
    target = n * a_of(growth, n)
    total = 0
    k = 0
    while total < target:
        k += 1
        total += a_of(growth, k + 1)
    return k


def branching_moves(growth: GrowthSchedule, steps: int) -> int:
    return sum(a_of(growth, i + 1) for i in range(1, steps + 1))
