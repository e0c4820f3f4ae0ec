"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--particles N] [--grid N] [--repeat R]

Also runs a short desk simulation with each backend (in a subprocess,
since the backend is fixed at import time).
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from picbalance import _kernels_py, kernels

try:
    from picbalance import _kernels as _compiled
except ImportError:
    _compiled = None

SIM_SNIPPET = (
    "import time; from picbalance.config import RunConfig; from picbalance.harness import Simulation;"
    "from picbalance.kernels import BACKEND; s = Simulation(RunConfig(n_steps={steps})); t = time.perf_counter();"
    "list(s.steps()); print(BACKEND, time.perf_counter() - t)"
)


def cases(n_particles, n_grid, seed=0):
    rng = np.random.default_rng(seed)
    x, y = rng.random(n_particles), rng.random(n_particles)
    q = rng.normal(size=n_particles)
    h = 1.0 / n_grid
    ex, ey = rng.normal(size=(n_grid, n_grid)), rng.normal(size=(n_grid, n_grid))
    rho = rng.normal(size=(n_grid, n_grid))
    rho -= rho.mean()
    rank = rng.integers(0, 8, size=n_particles)
    cell = n_grid // 16
    return {
        "deposit": lambda impl: kernels.deposit_cic(x, y, q, n_grid, n_grid, h, h, impl=impl),
        "gather": lambda impl: kernels.gather_cic(x, y, ex, ey, h, h, impl=impl),
        "jacobi x200": lambda impl: kernels.jacobi_solve(rho, np.zeros_like(rho), h, h, 0.0, 200, 0.8, impl=impl),
        "touched": lambda impl: kernels.touched_elements(x, y, rank, n_grid, n_grid, h, h, cell, cell, 16, 8,
                                                         impl=impl),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--particles", type=int, default=100_000)
    ap.add_argument("--grid", type=int, default=64)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--sim-steps", type=int, default=50)
    args = ap.parse_args(argv)

    impls = [("python", _kernels_py)] + ([("compiled", _compiled)] if _compiled else [])
    print(f"{args.particles} particles, {args.grid}^2 grid, best of {args.repeat}")
    print(f"{'kernel':<14}" + "".join(f"{name:>12}" for name, _ in impls) + ("     speedup" if _compiled else ""))
    for label, fn in cases(args.particles, args.grid).items():
        times = [min(timeit.repeat(lambda: fn(impl), number=1, repeat=args.repeat)) for _, impl in impls]
        row = f"{label:<14}" + "".join(f"{t * 1e3:>10.2f}ms" for t in times)
        if _compiled:
            row += f"{times[0] / times[1]:>11.1f}x"
        print(row)

    print(f"\ndesk simulation, {args.sim_steps} steps:")
    for force in ("1", "0") if _compiled else ("1",):
        env = dict(os.environ, PICBALANCE_PURE_PYTHON=force)
        out = subprocess.run([sys.executable, "-c", SIM_SNIPPET.format(steps=args.sim_steps)], env=env,
                             capture_output=True, text=True, check=True).stdout.split()
        print(f"  {out[0]:<10}{float(out[1]):8.2f}s")


if __name__ == "__main__":
    main()
