"""Compare the compiled and numpy kernel backends.

    python benchmarks/bench_kernels.py [--dims 64] [--repeat 3]

Times the full dipolar voxel sum (one nucleus, default cutoff) and a batch of
trilinear samples on a synthetic Gaussian grid, and checks that both backends
agree to round-off.
"""
import argparse
import time

import numpy as np

from hfitensor import kernels
from hfitensor.hfi import default_cutoff, default_epsilon
from hfitensor.volumetric import Cell, index_coordinates, synth_gaussian


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        result = fn()
        times.append(time.perf_counter() - t0)
    return min(times), result


def dipolar_job(backend, grid, center):
    cell = np.ascontiguousarray(grid.cell.vectors)
    args = (grid.values, np.ascontiguousarray(grid.steps), grid.origin - center, True, cell,
            np.linalg.inv(cell), default_epsilon(grid), default_cutoff(grid), 0, grid.dims[0])
    return lambda: backend.dipolar_slab(*args)[0]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--dims", type=int, default=64)
    ap.add_argument("--samples", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    box = 12.0
    grid = synth_gaussian([6.0, 6.0, 6.5], 1.0, 1.0, Cell.cubic(box), (args.dims,) * 3)
    center = np.array([6.0, 6.0, 6.0])
    rng = np.random.default_rng(0)
    u = np.ascontiguousarray(index_coordinates(grid, rng.uniform(0, box, size=(args.samples, 3))))

    backends = {"python": kernels.python_backend}
    if kernels.compiled_backend is not None:
        backends["cython"] = kernels.compiled_backend
    else:
        print("compiled backend not built; timing the numpy fallback only")

    print(f"grid {args.dims}^3, {args.samples} trilinear samples, best of {args.repeat}")
    print(f"{'kernel':<10} {'backend':<8} {'seconds':>10}")
    results = {}
    for name, be in backends.items():
        t_dip, r_dip = best_of(dipolar_job(be, grid, center), args.repeat)
        t_tri, r_tri = best_of(lambda: be.trilinear(grid.values, u, True), args.repeat)
        results[name] = (t_dip, t_tri, np.asarray(r_dip), np.asarray(r_tri))
        print(f"{'dipolar':<10} {name:<8} {t_dip:>10.4f}")
        print(f"{'trilinear':<10} {name:<8} {t_tri:>10.4f}")
    if len(results) == 2:
        py, cy = results["python"], results["cython"]
        print(f"speedup dipolar {py[0] / cy[0]:.1f}x, trilinear {py[1] / cy[1]:.1f}x")
        dip_err = np.abs(py[2] - cy[2]).max() / np.abs(py[2]).max()
        tri_err = np.abs(py[3] - cy[3]).max()
        print(f"max relative difference dipolar {dip_err:.1e}, trilinear abs {tri_err:.1e}")


if __name__ == "__main__":
    main()
