"""Command-line front end.

Subcommands: ``exact``, ``theory``, ``run``, ``compare``, ``experiment`` and
``clt``. Commands that write files also write ``manifest.json``; passing that
manifest back as the config reproduces the other outputs byte for byte.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from . import __version__, analysis, schemes
from .chain import PRESETS, exact_qsd, load_chain
from .config import load as load_config
from .errors import ConfigError, QsdError
from .outputs import dumps, write_csv, write_json
from .theory import VARIANTS, clt_covariance


def _manifest(command, out: Path, config_path, resolved: dict, seed, outputs, started):
    return {
        "tool": "qsdsim",
        "version": __version__,
        "command": command,
        "config_path": None if config_path is None else str(config_path),
        "chain_source": resolved.get("chain_source"),
        "master_seed": seed,
        "backend": schemes.backend.NAME,
        "wall_clock_seconds": time.perf_counter() - started,
        "outputs": [str(Path(p).name) for p in outputs],
        "resolved_config": resolved,
    }


def _out_dir(args, resolved_out, default):
    out = Path(args.out or resolved_out or default)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _overrides(args):
    keys = {"seed": "seed", "reps": "reps", "parallelism": "parallelism", "stride": "stride",
            "gamma_star": "gamma_star", "variant": "variant"}
    ov = {dst: getattr(args, src, None) for src, dst in keys.items()}
    if getattr(args, "zeta", None) is not None:
        ov["growth"] = {"kind": "power", "zeta": args.zeta}
    return ov


def cmd_exact(args):
    sol = exact_qsd(load_chain(args.chain))
    sys.stdout.write(dumps({"theta_star": sol.theta_star, "lambda": sol.lam,
                            "residual": sol.residual}))


def cmd_theory(args):
    chain = load_chain(args.chain)
    th = clt_covariance(chain, args.gamma_star, args.variant, args.zeta, force=args.force)
    sys.stdout.write(dumps({
        "variant": th.variant,
        "gamma_star": th.gamma_star,
        "zeta": th.zeta,
        "theta_star": th.theta_star,
        "L": th.L,
        "inv_L": th.gamma_star_min,
        "grad_h": th.grad_h,
        "U_star": th.U_star,
        "V": th.V,
        "residual": th.residual,
    }))


def cmd_run(args):
    started = time.perf_counter()
    res = load_config(args.config, _overrides(args))
    if res.scheme is None:
        raise ConfigError("scheme: required for 'run'")
    cfg = res.scheme_config(res.scheme)
    result = schemes.run(res.chain, cfg)
    out = _out_dir(args, res.out, "qsdsim-run")
    d = res.chain.d
    paths = [out / "trace.csv", out / "estimate.json"]
    write_csv(paths[0], ["moves"] + [f"theta_{j}" for j in range(1, d + 1)],
              ([m, *row] for m, row in zip(result.trace_moves.tolist(), result.trace_estimates)))
    write_json(paths[1], {"scheme": cfg.scheme, "estimate": result.estimate,
                          "moves_used": result.moves_used, "steps": result.steps})
    resolved = res.to_dict()
    write_json(out / "manifest.json",
               _manifest("run", out, args.config, resolved, res.seed, paths, started))
    return paths


def _compare_configs(res):
    N = res.scheme_config("interacting").particles
    strides = {"single": res.stride * N, "fleming_viot": res.stride * N, "branching": 1}
    return {s: res.scheme_config(s, strides.get(s, res.stride)) for s in res.schemes}, N


def cmd_compare(args):
    started = time.perf_counter()
    res = load_config(args.config, _overrides(args))
    configs, N = _compare_configs(res)
    starts = analysis.proportional_starts(res.states, res.reps)
    traces, summary = analysis.compare_schemes(res.chain, configs, res.reps, res.seed,
                                               res.parallelism, starts, grid_step=res.stride * N)
    out = _out_dir(args, res.out, "qsdsim-compare")
    paths = analysis.write_comparison(out, traces, summary)
    write_json(out / "manifest.json",
               _manifest("compare", out, args.config, res.to_dict(), res.seed, paths, started))
    return paths


def cmd_experiment(args):
    started = time.perf_counter()
    seed = 0 if args.seed is None else args.seed
    reps = 50 if args.reps is None else args.reps
    par = args.parallelism or 1
    traces, summary, states = analysis.run_experiment(args.which, reps, seed, par)
    out = _out_dir(args, None, f"experiment-{args.which}")
    paths = analysis.write_comparison(out, traces, summary)
    spec = analysis.EXPERIMENTS[args.which]
    resolved = {
        "experiment": args.which,
        "chain_source": "paper-10state",
        "horizon": spec.n,
        "growth": {"kind": "power", "zeta": spec.zeta},
        "gamma_star": spec.gamma_star,
        "initial_states": states,
        "seed": seed,
        "reps": reps,
        "stride": spec.stride,
        "parallelism": par,
    }
    write_json(out / "manifest.json",
               _manifest("experiment", out, None, resolved, seed, paths, started))
    return paths


def cmd_clt(args):
    started = time.perf_counter()
    if args.config in PRESETS:
        scheme = args.scheme or "interacting"
        kw = {"zeta": args.zeta} if args.zeta is not None else {}
        if args.gamma_star is not None:
            kw["gamma_star"] = args.gamma_star
        chain = load_chain(args.config)
        cfg = analysis.clt_config(scheme, **kw)
        reps = 1000 if args.reps is None else args.reps
        seed = 0 if args.seed is None else args.seed
        par = args.parallelism or 1
        resolved = {
            "chain": args.config, "chain_source": args.config, "scheme": scheme,
            "horizon": cfg.horizon_n, "growth": {"kind": "power", "zeta": cfg.growth.zeta},
            "gamma_star": cfg.steps.gamma_star, "initial_states": list(cfg.initial_states[:1]),
            "seed": seed, "reps": reps, "stride": cfg.trace_stride, "parallelism": par,
            "out": args.out, "budget_matched": False, "variant": args.variant,
        }
        config_path = None
        variant = args.variant
    else:
        res = load_config(args.config, _overrides(args))
        scheme = args.scheme or res.scheme or "interacting"
        chain, cfg = res.chain, res.scheme_config(scheme, res.horizon)
        reps, seed, par = res.reps, res.seed, res.parallelism
        resolved = res.to_dict()
        resolved["scheme"] = scheme
        config_path = args.config
        variant = args.variant or res.variant
    rs = analysis.replicate(chain, cfg, reps, seed, par)
    report = analysis.clt_report(chain, cfg, rs, variant)
    out = _out_dir(args, resolved.get("out"), "qsdsim-clt")
    path = out / "clt_report.json"
    write_json(path, report.to_dict())
    write_json(out / "manifest.json",
               _manifest("clt", out, config_path, resolved, seed, [path], started))
    return [path]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qsdsim", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"qsdsim {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("exact", help="exact QSD of a chain (preset name or file)")
    s.add_argument("chain")
    s.set_defaults(func=cmd_exact)

    s = sub.add_parser("theory", help="stability margin and limiting covariance")
    s.add_argument("chain")
    s.add_argument("--gamma-star", type=float, default=analysis.GAMMA_STAR)
    s.add_argument("--variant", choices=VARIANTS, default="algI")
    s.add_argument("--zeta", type=float, default=0.0)
    s.add_argument("--force", action="store_true", help="skip the gamma* > 1/L check")
    s.set_defaults(func=cmd_theory)

    def common(s, reps=True):
        s.add_argument("--seed", type=int)
        if reps:
            s.add_argument("--reps", type=int)
            s.add_argument("--parallelism", type=int)
        s.add_argument("--out")

    s = sub.add_parser("run", help="one run of the configured scheme")
    s.add_argument("config")
    common(s, reps=False)
    s.add_argument("--stride", type=int)
    s.add_argument("--gamma-star", type=float)
    s.add_argument("--zeta", type=float)
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("compare", help="replicate every configured scheme on one grid")
    s.add_argument("config")
    common(s)
    s.add_argument("--stride", type=int)
    s.add_argument("--gamma-star", type=float)
    s.add_argument("--zeta", type=float)
    s.set_defaults(func=cmd_compare)

    s = sub.add_parser("experiment", help="ten-state comparison presets")
    s.add_argument("which", choices=sorted(analysis.EXPERIMENTS))
    common(s)
    s.set_defaults(func=cmd_experiment)

    s = sub.add_parser("clt", help="empirical vs limiting covariance (config or preset)")
    s.add_argument("config")
    s.add_argument("--scheme", choices=("interacting", "branching"))
    common(s)
    s.add_argument("--gamma-star", type=float)
    s.add_argument("--variant", choices=VARIANTS)
    s.add_argument("--zeta", type=float)
    s.set_defaults(func=cmd_clt)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except QsdError as exc:
        print(f"qsdsim: error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
