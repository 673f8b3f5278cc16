"""Compiled vs numpy assembly kernels on the disk mesh.

    python3 benchmarks/bench_kernels.py [--level 24] [--repeat 50]
"""
import argparse
import time

import numpy as np

from massfree import kernels
from massfree.mesh import Disk, generate_mesh
from massfree.residual import Rotation, SpatialOperator, WeakInflow
from massfree.space import build_space


def _time(fn, repeat):
    fn()
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn()
    return (time.perf_counter() - t0) / repeat


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--level", type=int, default=24)
    p.add_argument("--repeat", type=int, default=50)
    args = p.parse_args()

    space = build_space(generate_mesh(Disk(args.level)), "b2")
    op = SpatialOperator(space, Rotation(), "jump", WeakInflow())
    u = np.random.default_rng(0).standard_normal(space.n_dofs)
    print(f"disk level {args.level}: {space.n_dofs} dofs, "
          f"{len(op.facet_dofs)} jump facets")

    results = {}
    for name in ("python", "cython"):
        if name == "cython" and kernels.compiled_backend is None:
            print("cython  : extension not built, skipped")
            continue
        kernels.use_backend(name)
        results[name] = op.residual(u)
        t = _time(lambda: op.residual(u), args.repeat)
        print(f"{name:8s}: residual {1e3 * t:8.3f} ms")
    if len(results) == 2:
        diff = np.max(np.abs(results["python"] - results["cython"]))
        print(f"max |python - cython| = {diff:.3e}")


if __name__ == "__main__":
    main()
