"""Compare the compiled and numpy kernel backends on planner-shaped workloads.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 5] [--seed 0]

Each case reports microseconds per call for every available backend and the
speedup of the compiled one. Results are also checked for agreement.
"""
import argparse
import timeit

import numpy as np

from mnplan import _kernels
from mnplan.geometry import generate_scene, scene_class
from mnplan.robots import nlink2d, point2d, rigid2d


def steer_case(model, scene, rng, n=200):
    pairs = []
    for _ in range(n):
        a = model.sample_uniform(rng)
        b = model.clamp(a + rng.normal(size=model.dim) * 0.1 * (model.upper - model.lower))
        pairs.append((a, b))

    def run(mod):
        return [mod.steer_collides(model._code, a, b, model.lower, model.upper, model._scale, model.delta_steer,
                                   model._geom, scene.box_lo, scene.box_hi, scene.workspace.lo, scene.workspace.hi)
                for a, b in pairs]
    return run, n


def nearest_case(rng, n_nodes=5000, n_queries=200, d=2):
    nodes = np.ascontiguousarray(rng.uniform(-1, 1, (n_nodes, d)))
    qs = rng.uniform(-1, 1, (n_queries, d))

    def run(mod):
        return [(mod.nearest(nodes, n_nodes, q), tuple(mod.within_radius(nodes, n_nodes, q, 0.05))) for q in qs]
    return run, n_queries


def points_case(scene, rng, n=2000):
    pts = rng.uniform(scene.workspace.lo, scene.workspace.hi, (n, scene.dim))

    def run(mod):
        return mod.points_collide_mask(pts, scene.box_lo, scene.box_hi, scene.workspace.lo, scene.workspace.hi).tolist()
    return run, 1


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    scene = generate_scene(scene_class("simple2d", cloud_points=10), args.seed)
    ws = scene.workspace
    cases = {
        "steer point2d": steer_case(point2d(ws), scene, rng),
        "steer rigid2d": steer_case(rigid2d(ws), scene, rng),
        "steer nlink2d(3)": steer_case(nlink2d(ws, (2.5, 2.5, 2.5)), scene, rng),
        "nearest+radius 5000": nearest_case(rng),
        "points mask 2000": points_case(scene, rng),
    }
    backends = _kernels.backends()
    print(f"{'case':22s}" + "".join(f"{name:>14s}" for name in backends) + f"{'speedup':>10s}")
    for name, (run, calls) in cases.items():
        results = {b: run(mod) for b, mod in backends.items()}
        if len({repr(r) for r in results.values()}) != 1:
            raise SystemExit(f"backends disagree on {name!r}")
        times = {}
        for b, mod in backends.items():
            t = min(timeit.repeat(lambda: run(mod), number=1, repeat=args.repeat))
            times[b] = t / calls * 1e6
        speed = times["python"] / times["cython"] if "cython" in times else float("nan")
        print(f"{name:22s}" + "".join(f"{times[b]:12.1f}us" for b in backends) + f"{speed:9.1f}x")


if __name__ == "__main__":
    main()
