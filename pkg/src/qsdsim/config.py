"""Structured run configuration (YAML or JSON) and manifest round-tripping.

A config is a mapping::

    chain: paper-10state          # preset, path to a chain file, or inline rows
    scheme: interacting
    horizon: 1000
    growth: {kind: power, zeta: 0.75}   # or {kind: constant, a: 10}
    gamma_star: 4.17
    initial_states: {uniform-from: [4, 5, 6]}   # or an explicit list
    seed: 7
    reps: 50
    stride: 5
    parallelism: 1
    out: results

A manifest written by the CLI carries the fully resolved config under
``resolved_config`` and can be passed back in place of the original file.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import yaml

from .analysis import draw_initial_states
from .chain import PRESETS, AbsorbingChain, load_chain, parse_chain_text, validate_chain
from .errors import ConfigError, InputError, ParseError
from .schedules import GrowthSchedule, StepSchedule, a_of
from .schemes import SCHEMES, SchemeConfig

KNOWN_KEYS = {
    "chain", "scheme", "schemes", "horizon", "growth", "gamma_star", "initial_states", "seed",
    "reps", "stride", "parallelism", "out", "budget_matched", "variant",
}


def read_config(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputError(f"cannot read config {str(path)!r}: {exc.strerror}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ParseError(f"config {str(path)!r} is not valid YAML/JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    if "resolved_config" in data:
        data = data["resolved_config"]
    return data


@dataclass
class Resolved:
    """Config with every random or file-dependent choice made explicit."""

    chain: AbsorbingChain
    chain_spec: object
    chain_source: str
    scheme: str | None
    schemes: list
    horizon: int
    growth: GrowthSchedule
    gamma_star: float
    states: list
    seed: int
    reps: int
    stride: int
    parallelism: int
    out: str | None
    budget_matched: bool
    variant: str | None

    def scheme_config(self, scheme: str, trace_stride: int | None = None) -> SchemeConfig:
        states = self.states[:1] if scheme in ("single", "branching") else self.states
        return SchemeConfig(
            scheme, self.horizon, self.growth, StepSchedule(self.gamma_star), tuple(states),
            seed=self.seed, trace_stride=trace_stride or self.stride,
            budget_matched=self.budget_matched,
        )

    def to_dict(self) -> dict:
        growth = ({"kind": "power", "zeta": self.growth.zeta} if self.growth.kind == "power"
                  else {"kind": "constant", "a": self.growth.a})
        return {
            "chain": self.chain_spec,
            "chain_source": self.chain_source,
            "scheme": self.scheme,
            "schemes": list(self.schemes),
            "horizon": self.horizon,
            "growth": growth,
            "gamma_star": self.gamma_star,
            "initial_states": list(self.states),
            "seed": self.seed,
            "reps": self.reps,
            "stride": self.stride,
            "parallelism": self.parallelism,
            "out": self.out,
            "budget_matched": self.budget_matched,
            "variant": self.variant,
        }


def _int(data, key, default=None, minimum=None):
    v = data.get(key, default)
    if v is None:
        raise ConfigError(f"{key}: required")
    if isinstance(v, bool) or not isinstance(v, (int, float)) or int(v) != v:
        raise ConfigError(f"{key}: expected an integer, got {v!r}")
    v = int(v)
    if minimum is not None and v < minimum:
        raise ConfigError(f"{key}: must be >= {minimum}, got {v}")
    return v


def _chain(spec, base: Path):
    if isinstance(spec, list):
        return validate_chain(spec), "inline", spec
    if isinstance(spec, dict):
        if "file" in spec:
            spec = spec["file"]
        elif "matrix" in spec:
            return validate_chain(spec["matrix"]), "inline", spec["matrix"]
        else:
            raise ConfigError("chain: expected a preset name, a path, 'file' or 'matrix'")
    if not isinstance(spec, str):
        raise ConfigError("chain: expected a preset name, a path, or a matrix")
    if spec in PRESETS:
        return load_chain(spec), spec, spec
    path = Path(spec)
    if not path.is_absolute():
        path = base / path
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputError(f"chain: cannot read {str(path)!r}: {exc.strerror}") from None
    # keep the unnormalised matrix so a manifest rerun validates to the same bits
    raw = parse_chain_text(text)
    return validate_chain(raw), str(spec), raw.tolist()


def _growth(spec):
    if not isinstance(spec, dict):
        raise ConfigError("growth: expected a mapping with 'kind'")
    kind = spec.get("kind")
    try:
        if kind == "power":
            return GrowthSchedule.power(float(spec["zeta"]))
        if kind == "constant":
            return GrowthSchedule.constant(_int(spec, "a", minimum=1))
    except KeyError as exc:
        raise ConfigError(f"growth: missing {exc.args[0]!r}") from None
    raise ConfigError(f"growth.kind: expected 'power' or 'constant', got {kind!r}")


def resolve(data: dict, base=".", overrides: dict | None = None) -> Resolved:
    data = {**data, **{k: v for k, v in (overrides or {}).items() if v is not None}}
    unknown = set(data) - KNOWN_KEYS - {"chain_source"}
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "chain" not in data:
        raise ConfigError("chain: required")
    chain, source, raw = _chain(data["chain"], Path(base))
    source = data.get("chain_source", source)
    scheme = data.get("scheme")
    if scheme is not None and scheme not in SCHEMES:
        raise ConfigError(f"scheme: expected one of {SCHEMES}, got {scheme!r}")
    schemes = data.get("schemes") or ([scheme] if scheme else list(SCHEMES))
    for s in schemes:
        if s not in SCHEMES:
            raise ConfigError(f"schemes: unknown scheme {s!r}")
    horizon = _int(data, "horizon", minimum=1)
    growth = _growth(data.get("growth", {"kind": "constant", "a": 1}))
    try:
        gamma_star = float(data.get("gamma_star", 4.17))
    except (TypeError, ValueError):
        raise ConfigError("gamma_star: expected a number") from None
    seed = _int(data, "seed", 0, minimum=0)
    if seed >= 2**64:
        raise ConfigError("seed: must fit in 64 bits")
    N = a_of(growth, horizon)
    spec = data.get("initial_states")
    if spec is None:
        raise ConfigError("initial_states: required")
    if isinstance(spec, dict):
        if "uniform-from" not in spec:
            raise ConfigError("initial_states: expected a list or {uniform-from: [...]}")
        choices = spec["uniform-from"]
        if not choices:
            raise ConfigError("initial_states.uniform-from: empty")
        states = draw_initial_states(choices, N, seed)
    elif isinstance(spec, list) and spec:
        states = [int(x) for x in spec]
        if len(states) == 1:
            states = states * N
        elif len(states) != N:
            raise ConfigError(f"initial_states: need 1 or a(n) = {N} entries, got {len(states)}")
    else:
        raise ConfigError("initial_states: expected a nonempty list or {uniform-from: [...]}")
    bad = [x for x in states if not 1 <= x <= chain.d]
    if bad:
        raise ConfigError(f"initial_states: {sorted(set(bad))} outside 1..{chain.d}")
    variant = data.get("variant")
    return Resolved(
        chain=chain,
        chain_spec=raw,
        chain_source=source,
        scheme=scheme,
        schemes=list(schemes),
        horizon=horizon,
        growth=growth,
        gamma_star=gamma_star,
        states=states,
        seed=seed,
        reps=_int(data, "reps", 1, minimum=1),
        stride=_int(data, "stride", 1, minimum=1),
        parallelism=_int(data, "parallelism", 1, minimum=1),
        out=data.get("out"),
        budget_matched=bool(data.get("budget_matched", True)),
        variant=variant,
    )


def load(path, overrides=None) -> Resolved:
    data = read_config(path)
    return resolve(data, Path(path).parent, overrides)
