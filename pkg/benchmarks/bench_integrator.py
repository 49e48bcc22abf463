#!/usr/bin/env python3
"""Compare the numba-jitted integration kernel against the pure-Python
fallback on an identical shooting workload.

Each backend runs in its own subprocess (the backend is fixed at import
time via FIELDLAB_BACKEND).  The workload is a classification scan plus a
full ground-state bisection for the cubic nonlinearity in dimension 3.
"""

import argparse
import json
import os
import subprocess
import sys
import time


def run_workload(scan_points: int) -> dict:
    from fieldlab import kernels
    from fieldlab.nonlinearity import make_power_nonlinearity
    from fieldlab.shooting import find_bound_state, integrate_ivp

    nl = make_power_nonlinearity(1.0, 3.0, 3)
    integrate_ivp(nl, 3, 1.5, store=False)   # warm-up (JIT compile)

    t0 = time.perf_counter()
    s = 0.75
    for _ in range(scan_points):
        integrate_ivp(nl, 3, s, store=False)
        s *= 1.05
    t_scan = time.perf_counter() - t0

    t0 = time.perf_counter()
    u = find_bound_state(nl, 3, 0, (4.0, 4.6))
    t_solve = time.perf_counter() - t0

    return {"backend": kernels.BACKEND, "scan_s": t_scan,
            "solve_s": t_solve, "samples": len(u.radii),
            "shoot_height": u.shoot_height}


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--scan-points", type=int, default=100)
    parser.add_argument("--child", choices=("numba", "numpy"),
                        help=argparse.SUPPRESS)
    args = parser.parse_args()

    if args.child:
        print(json.dumps(run_workload(args.scan_points)))
        return 0

    results = {}
    for backend in ("numba", "numpy"):
        env = dict(os.environ, FIELDLAB_BACKEND=backend)
        proc = subprocess.run(
            [sys.executable, __file__, "--child", backend,
             "--scan-points", str(args.scan_points)],
            capture_output=True, text=True, env=env)
        if proc.returncode != 0:
            print(f"{backend} backend failed:\n{proc.stderr}", file=sys.stderr)
            return 1
        results[backend] = json.loads(proc.stdout.strip().splitlines()[-1])

    a, b = results["numba"], results["numpy"]
    assert abs(a["shoot_height"] - b["shoot_height"]) < 1e-12, \
        "backends disagree on the shoot height"
    print(f"{'workload':<28}{'numba':>12}{'numpy':>12}{'speedup':>10}")
    for key, label in (("scan_s", f"classification scan x{args.scan_points}"),
                       ("solve_s", "ground-state bisection")):
        print(f"{label:<28}{a[key]:>10.3f}s{b[key]:>10.3f}s"
              f"{b[key] / a[key]:>9.1f}x")
    print(f"\nboth backends found s* = {a['shoot_height']:.12f} "
          f"({a['samples']} samples)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
