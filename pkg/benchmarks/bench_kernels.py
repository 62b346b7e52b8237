"""Compare the compiled and numpy sweep backends.

Usage: python benchmarks/bench_kernels.py [--repeat N] [--segments K]

Times the position-level sweep (statics) and the rate sweep (dynamics) on the
conical cantilever, checks that both backends agree, and prints one line per
case.
"""

import argparse
import time

import numpy as np

from plsrod import kernels
from plsrod.kinematics import run_sweep
from plsrod.rod import Material, Partition, RadiusProfile, Rod


def make_rod(segments):
    prof = RadiusProfile(1e-2, 5e-3, 0.2)
    mat = Material(1.1e5, 3.793e4, 2000.0, 10.0)
    return Rod(prof, mat, Partition.from_lengths([0.09, 0.07, 0.04], segments))


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--segments", type=int, default=None, help="segments per section (default ~1 mm)")
    args = ap.parse_args()
    rod = make_rod(args.segments)
    rng = np.random.default_rng(0)
    q = rod.rest_state() + rng.normal(size=rod.n_coords) * np.tile([5, 5, 5, 0.05, 0.05, 0.05], rod.n_nodes)
    qd = rng.normal(size=rod.n_coords)
    print(f"segments={rod.grid.x0.size} coords={rod.n_coords} backends={sorted(kernels.BACKENDS)}")
    results = {}
    for name in sorted(kernels.BACKENDS):
        kernels.use_backend(name)
        run_sweep(rod, q, qd)  # warm-up
        t_pos = best_of(lambda: run_sweep(rod, q), args.repeat)
        t_rate = best_of(lambda: run_sweep(rod, q, qd), args.repeat)
        results[name] = run_sweep(rod, q, qd).data
        print(f"{name:>9}: position sweep {t_pos * 1e3:8.2f} ms   rate sweep {t_rate * 1e3:8.2f} ms")
    if len(results) == 2:
        diff = max(float(np.max(np.abs(results["python"][k] - results["compiled"][k]))) for k in results["python"])
        print(f"max backend difference: {diff:.3e}")
    kernels.use_backend("compiled" if "compiled" in kernels.BACKENDS else "python")


if __name__ == "__main__":
    main()
