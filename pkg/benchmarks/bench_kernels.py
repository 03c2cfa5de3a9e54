"""Time the numba kernels against the pure-numpy fallback.

    python benchmarks/bench_kernels.py [--subdiv 4] [--repeat 5]

Each kernel is run once per backend to warm up (numba compiles lazily),
then timed over ``--repeat`` calls; the table shows the best time per call.
"""

import argparse
import os
import time

import numpy as np

from confspec import kernels
from confspec.mesh import icosphere


def best_time(func, repeat):
    func()
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        func()
        best = min(best, time.perf_counter() - t0)
    return best


def cases(subdiv):
    mesh, phi = icosphere(subdiv)
    P = phi.triangle_images(mesh)
    xi = np.array([0.3, -0.5, 0.6])
    p = np.array([0.0, 0.6, 0.8])
    rng = np.random.default_rng(0)
    atoms = rng.standard_normal((mesh.n_vertices, 3))
    atoms /= np.linalg.norm(atoms, axis=1, keepdims=True)
    weights = mesh.vertex_masses()
    return {
        "weighted_area": lambda: kernels.weighted_area(P, xi),
        "weighted_area_fold": lambda: kernels.weighted_area(P, xi, p, 0.4, fold=True),
        "moebius_sum": lambda: kernels.moebius_sum(atoms, weights, xi),
        "hersch_newton": lambda: kernels.hersch_newton(atoms, weights, -0.1 * xi, 1e-10 * weights.sum(), 200, 1e-6, 1 - 1e-9, 0.25),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--subdiv", type=int, default=4)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    timings = {}
    for backend, flag in (("numba", "0"), ("numpy", "1")):
        os.environ["CONFSPEC_DISABLE_NUMBA"] = flag
        for name, func in cases(args.subdiv).items():
            timings.setdefault(name, {})[backend] = best_time(func, args.repeat)
    print(f"{'kernel':<22}{'numba [ms]':>12}{'numpy [ms]':>12}{'speedup':>10}")
    for name, t in timings.items():
        print(f"{name:<22}{t['numba'] * 1e3:>12.3f}{t['numpy'] * 1e3:>12.3f}{t['numpy'] / t['numba']:>10.1f}")


if __name__ == "__main__":
    main()
