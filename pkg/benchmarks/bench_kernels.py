"""Time the compiled and numpy kernel backends on a realistic instance.

    python benchmarks/bench_kernels.py [--n 10000] [--repeat 5]
"""

import argparse
import math
import timeit

import numpy as np

from adhoc_capacity.deployment import assign_destinations, deploy
from adhoc_capacity.kernels import compiled_backend, python_backend
from adhoc_capacity.scheduling import build_pi2
from adhoc_capacity.sphere import SphereParams, sample_uniform_units
from adhoc_capacity.tessellation import CellGeometry, build_tessellation


def cases(n: int, seed: int):
    rng = np.random.default_rng(seed)
    sp = SphereParams(n)
    t = build_tessellation(sp, CellGeometry(n, 0.5 * math.sqrt(math.log(n))), rng)
    ns = deploy(n, t, rng)
    tm = assign_destinations(ns, rng, lambda_n=1.0, cap=False)

    p, a, b = (sample_uniform_units(rng, 200_000) for _ in range(3))
    src = rng.choice(n, 2000, replace=False)
    walk = (t.generators, t.nbr_ptr, t.nbr_idx, np.ascontiguousarray(ns.cell_of[src]),
            np.ascontiguousarray(ns.positions[src]), np.ascontiguousarray(ns.positions[tm.dest_of[src]]),
            4 * t.n_cells)

    s = build_pi2(t, n, 10.0)
    color_ptr, color_cells = s.color_classes()
    hops = 5000
    tx = rng.integers(0, t.n_cells, hops)
    rx = rng.integers(0, n, hops)
    col = np.ascontiguousarray(s.color_of[tx])
    u = rng.random(int(np.diff(color_ptr)[col].sum()))
    interf = (ns.positions, ns.cell_ptr, ns.cell_nodes, color_ptr, color_cells, col, tx, rx, u, sp.radius, 10.0)

    pairs = np.ascontiguousarray(rng.integers(0, t.n_cells, (20_000, 2)))
    poly = (t.vertices, t.poly_ptr, t.poly_verts, pairs)
    return {
        "point_arc_angles (2e5 arcs)": ("point_arc_angles", (p, a, b)),
        "walk_routes (2000 routes)": ("walk_routes", walk),
        "hop_interference (5000 hops)": ("hop_interference", interf),
        "polygon_pair_angles (2e4 pairs)": ("polygon_pair_angles", poly),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=10_000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    backends = {"python": python_backend}
    if compiled_backend is not None:
        backends["compiled"] = compiled_backend
    else:
        print("compiled backend not built; timing the numpy fallback only")

    print(f"{'kernel':34s} " + " ".join(f"{b + ' [ms]':>14s}" for b in backends) + f" {'speedup':>8s}")
    for label, (name, call) in cases(args.n, args.seed).items():
        best = {b: min(timeit.repeat(lambda: getattr(m, name)(*call), number=1, repeat=args.repeat)) * 1e3
                for b, m in backends.items()}
        speed = f"{best['python'] / best['compiled']:8.1f}x" if "compiled" in best else f"{'-':>8s}"
        print(f"{label:34s} " + " ".join(f"{v:14.2f}" for v in best.values()) + f" {speed}")


if __name__ == "__main__":
    main()
