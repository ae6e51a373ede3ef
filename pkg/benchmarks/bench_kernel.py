"""Compare the compiled and pure-Python search kernels on the same queries.

Run with ``python3 benchmarks/bench_kernel.py [--res 8] [--repeat 3]``.
Both kernels must return identical distances; the script reports wall time
per query and the speedup.
"""

import argparse
import time

import numpy as np

from hedlund.curves import build_curve_system
from hedlund.metric import calibrate_constants
from hedlund.polytope import from_vertices
from hedlund.solver.backend import get_search
from hedlund.solver.grid import build_grid
from hedlund.solver.paths import shortest_distance_nodes


def best_of(fn, repeat):
    times, out = [], None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--res", type=int, default=8)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    P = from_vertices([(1, 0, 0), (0, 1, 0), (0, 0, 1)])
    C = build_curve_system(P.classes)
    H = calibrate_constants(P, C, 64)
    g = build_grid(H, args.res, 2)
    x = g.snap(np.array([0.25, 0.5, 0.125]))
    kernels = {"compiled": get_search("compiled"), "python": get_search("python")}

    print(f"res {args.res}, stencil R=2, {len(g.offsets)} offsets")
    print(f"{'w':>10} {'heuristic':>9} {'settled':>8} {'compiled s':>11} {'python s':>9} {'speedup':>8}")
    for w in [(1, 0, 0), (1, 1, 0), (1, 1, 1), (2, 1, 0)]:
        y = x + np.array(w) * g.res
        for heuristic in (True, False):
            res = {}
            for name, k in kernels.items():
                res[name] = best_of(lambda: shortest_distance_nodes(g, x, y, heuristic=heuristic, kernel=k),
                                    args.repeat)
            tc, rc = res["compiled"]
            tp, rp = res["python"]
            assert rc.distance == rp.distance, "kernels disagree"
            print(f"{str(w):>10} {str(heuristic):>9} {rc.settled:>8} {tc:>11.4f} {tp:>9.3f} {tp / tc:>7.0f}x")


if __name__ == "__main__":
    main()
