"""Compiled vs pure-Python kernels on the default scalar setup.

    python benchmarks/bench_kernels.py [--N 70] [--T 20000] [--repeat 3]

Both backends must return the same policy, gain and episode cost; the script
exits non-zero if they disagree.
"""

import argparse
import sys
import time

import numpy as np

from wncs import kernels
from wncs.config import reference_defaults
from wncs.sim import SimConfig, run_episode
from wncs.smdp import Policy, solve_rvi, transform


def best_of(fn, repeat):
    times, out = [], None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--N", type=int, default=70)
    ap.add_argument("--T", type=int, default=20_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    try:
        kernels.get("compiled")
    except ImportError:
        print("compiled kernels not built; nothing to compare")
        return 1

    cfg = reference_defaults()
    mdp = transform(cfg.smdp_spec(N=args.N))
    sim_cfg = SimConfig(cfg.system_model(), cfg.channel_model(), Policy.fixed(1, 3),
                        horizon=args.T, seeds=(0,), warmup=min(1000, args.T - 1))

    rows, results = [], {}
    for backend in ("compiled", "python"):
        t_rvi, r = best_of(lambda: solve_rvi(mdp, backend=backend), args.repeat)
        t_ep, e = best_of(lambda: run_episode(sim_cfg, 0, backend=backend), args.repeat)
        results[backend] = (r, e)
        rows.append((backend, t_rvi, r.iterations, t_ep))

    print(f"{'backend':<10}{'rvi [s]':>12}{'sweeps':>8}{'episode [s]':>14}   (N={args.N}, T={args.T})")
    for name, t_rvi, it, t_ep in rows:
        print(f"{name:<10}{t_rvi:>12.4f}{it:>8d}{t_ep:>14.4f}")
    c, p = rows
    print(f"{'speedup':<10}{p[1] / c[1]:>11.1f}x{'':>8}{p[3] / c[3]:>13.1f}x")

    (rc, ec), (rp, ep) = results["compiled"], results["python"]
    same = (
        rc.policy.lengths == rp.policy.lengths
        and rc.gain == rp.gain
        and np.isclose(ec.mean_cost, ep.mean_cost, rtol=1e-12, atol=0)
    )
    print("backends agree" if same else "BACKENDS DISAGREE")
    return 0 if same else 2


if __name__ == "__main__":
    sys.exit(main())
