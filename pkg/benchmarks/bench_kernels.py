"""Compiled vs pure-Python transfer kernel.

Times one ``gauss_step`` call on a wide density and a full zero-wall
survival curve with each backend, and checks that the outputs agree.

    python benchmarks/bench_kernels.py [--repeat 5] [--horizon 1024]
"""
import argparse
import math
import timeit

import numpy as np

from quenchwall.engine import kernels
from quenchwall.engine.grid import GridConfig, grid_survival
from quenchwall.rng import RngStream
from quenchwall.walls import WallSpec, realize_wall


def step_args(n=4000, dx=0.02):
    x = np.arange(n) * dx
    m = np.exp(-0.5 * (x - x.mean()) ** 2 / 4.0)
    m /= m.sum()
    sd = math.sqrt(0.25)
    return (m, 0.0, dx, 1.0, 0.0, sd, 8.0, 1.0, 1.0, 1.0, kernels.MODE_BRIDGE, -1.0, n + 200)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--horizon", type=float, default=1024.0)
    args = ap.parse_args()

    impls = kernels.backends()
    if "compiled" not in impls:
        print("compiled kernel not built; only the python fallback is available")
    sa = step_args()
    ref = None
    print(f"{'backend':10s} {'gauss_step (ms)':>16s} {'curve to %g (s)' % args.horizon:>18s}")
    wall = realize_wall(WallSpec("scaled-brownian", grid="graded"), args.horizon, RngStream(1))
    hs = [2.0**k for k in range(2, int(math.log2(args.horizon)) + 1)]
    results = {}
    for name, fn in impls.items():
        out = fn(*sa)
        if ref is None:
            ref = out
        else:
            assert np.allclose(out, ref, rtol=1e-12, atol=1e-300), "backends disagree"
        t_step = min(timeit.repeat(lambda: fn(*sa), number=1, repeat=args.repeat))
        cfg = GridConfig(backend=name)
        t_curve = min(timeit.repeat(lambda: grid_survival(wall, 1.0, hs, config=cfg), number=1,
                                    repeat=max(1, args.repeat // 2)))
        results[name] = (t_step, t_curve)
        print(f"{name:10s} {1e3 * t_step:16.2f} {t_curve:18.3f}")
    if len(results) == 2:
        (ps, pc), (cs, cc) = results["python"], results["compiled"]
        print(f"speedup: kernel x{ps / cs:.1f}, curve x{pc / cc:.1f}")


if __name__ == "__main__":
    main()
