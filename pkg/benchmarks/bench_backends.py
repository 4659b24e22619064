"""Time every scheme on the compiled and numpy backends and check they agree.

    python3 benchmarks/bench_backends.py [--reps 3]
"""

import argparse
import time

from qsdsim import GrowthSchedule, SchemeConfig, StepSchedule, a_of, preset, run, set_backend
from qsdsim.schemes import SCHEMES

# experiment-one sizes: n = 1000, a(n) = 177, 177000 movements per run
HORIZON = 1000


def config(scheme, n):
    g = GrowthSchedule.power(0.75)
    N = a_of(g, n)
    states = (5,) if scheme in ("single", "branching") else (5,) * N
    return SchemeConfig(scheme, n, g, StepSchedule(4.17), states, seed=1, trace_stride=5)


def best_of(fn, reps):
    times = []
    for _ in range(reps):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--reps", type=int, default=3)
    args = ap.parse_args()
    chain = preset("paper-10state")
    print(f"{'scheme':<14}{'moves':>9}{'cython s':>11}{'python s':>11}{'speedup':>9}  identical")
    for scheme in SCHEMES:
        cfg = config(scheme, HORIZON)
        set_backend("cython")
        tc, rc = best_of(lambda: run(chain, cfg), args.reps)
        set_backend("python")
        tp, rp = best_of(lambda: run(chain, cfg), max(1, args.reps // 3))
        same = rc.trace_estimates.tobytes() == rp.trace_estimates.tobytes()
        print(f"{scheme:<14}{rc.moves_used:>9}{tc:>11.4f}{tp:>11.4f}{tp / tc:>9.1f}  {same}")
    set_backend("cython")


if __name__ == "__main__":
    main()
