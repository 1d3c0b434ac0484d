"""Compare the compiled kernels against the pure-Python fallback.

Runs the same workloads twice: once in-process (compiled unless
UNCMAP_NO_NUMBA is set) and once in a subprocess with UNCMAP_NO_NUMBA=1.

Usage: python benchmarks/bench_kernels.py [--repeat N]
"""

from __future__ import annotations

import argparse
import json
import math
import os
import subprocess
import sys
import time

import numpy as np


def workloads():
    from uncmap._kernels import raycast, rect_prob_2d_batch, traverse_ray
    from uncmap.belief import apply_fov, derive_prior, PriorSpec
    from uncmap.dispersion import RectangleSpec
    from uncmap.grid import GridGeometry, GridLayer
    from uncmap.sim import LidarSpec, Scan
    from uncmap.dispersion import GaussianBelief

    rng = np.random.default_rng(0)

    def bench_rect_prob():
        n = 20000
        sx = rng.uniform(0.05, 1.0, n)
        sy = rng.uniform(0.05, 1.0, n)
        rho = rng.uniform(-0.9, 0.9, n)
        out = rect_prob_2d_batch(sx ** 2, sy ** 2, rho * sx * sy,
                                 0.05, 0.05)
        return float(out.sum())

    walls = rng.uniform(0.0, 20.0, (40, 4))

    def bench_raycast():
        angles = np.linspace(-math.pi, math.pi, 720, endpoint=False)
        total = 0.0
        for _ in range(20):
            ranges, hits = raycast(10.0, 10.0, angles, walls, 5.0)
            total += float(ranges.sum())
        return total

    geom = GridGeometry(resolution_c=0.1, origin=(0.0, 0.0),
                        width=200, height=120)
    prior = derive_prior(PriorSpec(
        sigma_max_per_axis=np.array([1.0, 1.0]),
        sides=RectangleSpec(np.array([0.1, 0.1]))))
    bearings = np.linspace(-math.pi, math.pi, 360, endpoint=False)
    scan = Scan(ranges=np.full(360, 5.0), bearings=bearings,
                hits=np.zeros(360, dtype=bool))
    belief = GaussianBelief(np.array([10.0, 6.0, 0.0]),
                            np.diag([0.01, 0.01, 1e-4]))
    noise = np.diag([4e-4, 3e-6])

    def bench_apply_fov():
        dp = GridLayer.filled(geom, prior.ell_beta, "log_odds")
        occ = GridLayer.filled(geom, 0.0, "occupancy")
        total = 0
        for _ in range(5):
            total += len(apply_fov(dp, occ, belief, scan, noise, prior))
        return float(total)

    from uncmap._kernels import frontier_jump_mask, siren_accumulate

    n = 600
    ell = np.full((n, n), prior.ell_beta)
    known = rng.random((n, n)) < 0.7
    ell[known] = rng.uniform(prior.ell_beta, 5.0, int(known.sum()))

    def bench_siren():
        total = 0.0
        for _ in range(5):
            tot, _, _, _ = siren_accumulate(ell, prior.ell_beta, 1.5e-5,
                                            2, 0.01)
            total += tot
        return total

    u = 0.1 + 0.08 * (((np.arange(n) // 16) % 2))
    um = np.tile(u, (n, 1))
    clear = np.ones((n, n), dtype=bool)

    def bench_frontier():
        total = 0
        for _ in range(5):
            mask, _ = frontier_jump_mask(um, clear, 0.3, 0.31, 0.1, 1.0)
            total += int(mask.sum())
        return float(total)

    return {"rect_prob_2d_batch[20k]": bench_rect_prob,
            "raycast[20x720 beams]": bench_raycast,
            "apply_fov[5 scans]": bench_apply_fov,
            "siren_accumulate[5x600^2]": bench_siren,
            "frontier_mask[5x600^2]": bench_frontier}


def run_suite(repeat: int) -> dict:
    results = {}
    for name, fn in workloads().items():
        fn()  # warm-up (JIT compile on the compiled path)
        best = math.inf
        for _ in range(repeat):
            t0 = time.perf_counter()
            fn()
            best = min(best, time.perf_counter() - t0)
        results[name] = best
    return results


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--emit-json", action="store_true",
                        help="print raw timings as JSON (subprocess mode)")
    args = parser.parse_args()

    results = run_suite(args.repeat)
    if args.emit_json:
        print(json.dumps(results))
        return 0

    from uncmap._kernels import USING_NUMBA
    label = "numba" if USING_NUMBA else "fallback"
    env = dict(os.environ, UNCMAP_NO_NUMBA="1")
    out = subprocess.run(
        [sys.executable, __file__, "--repeat", str(args.repeat),
         "--emit-json"],
        env=env, capture_output=True, text=True, check=True)
    fallback = json.loads(out.stdout)

    print(f"{'workload':30s} {label:>12s} {'fallback':>12s} {'speedup':>9s}")
    for name, t in results.items():
        ft = fallback[name]
        print(f"{name:30s} {t * 1e3:10.2f}ms {ft * 1e3:10.2f}ms "
              f"{ft / t:8.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
