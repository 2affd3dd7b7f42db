#!/usr/bin/env python3
"""Benchmark the compiled kernel backend against the pure-numpy fallback.

Times the two hot operations (grid neighbor counting, windowed DBSCAN) on
synthetic scenes of growing size, verifies both backends return identical
results, and prints a speedup table. Run from anywhere:

    python benchmarks/bench_kernels.py [--repeat 5]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from radarseg.kernels import available_backends


def make_points(n: int, seed: int) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(seed)
    # a few dense blobs on a clutter carpet, like a filtered scene
    n_blob = n // 3
    blob_centers = rng.uniform(-40, 40, size=(8, 2))
    which = rng.integers(0, 8, n_blob)
    blob = blob_centers[which] + rng.normal(0, 0.6, size=(n_blob, 2))
    carpet = rng.uniform(-60, 60, size=(n - n_blob, 2))
    xy = np.vstack([blob, carpet])
    return {
        "x": np.ascontiguousarray(xy[:, 0]),
        "y": np.ascontiguousarray(xy[:, 1]),
        "vr": rng.normal(0, 2.0, n),
        "t": np.sort(rng.uniform(0, 0.25, n)),
        "nmin": np.full(n, 3.0),
    }


def bench(fn, repeat: int) -> float:
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--sizes", default="1000,5000,20000,50000")
    args = ap.parse_args()

    backends = available_backends()
    if "compiled" not in backends:
        print("compiled backend not built; run pip install -e . first")
        return
    py, cy = backends["python"], backends["compiled"]

    sizes = [int(s) for s in args.sizes.split(",")]
    print(f"{'n':>7} {'op':<10} {'python':>10} {'compiled':>10} {'speedup':>8}")
    for n in sizes:
        p = make_points(n, seed=n)
        for op, pf, cf in [
            (
                "count",
                lambda: py.neighbor_counts(p["x"], p["y"], p["t"], 1.4, 0.25),
                lambda: cy.neighbor_counts(p["x"], p["y"], p["t"], 1.4, 0.25),
            ),
            (
                "dbscan",
                lambda: py.dbscan_labels(p["x"], p["y"], p["vr"], p["t"], p["nmin"], 0.3, 1, 0.8, 5.0, 0.25),
                lambda: cy.dbscan_labels(p["x"], p["y"], p["vr"], p["t"], p["nmin"], 0.3, 1, 0.8, 5.0, 0.25),
            ),
        ]:
            r_py, r_cy = pf(), cf()
            assert np.array_equal(r_py, r_cy), f"backend mismatch at n={n} op={op}"
            t_py = bench(pf, args.repeat)
            t_cy = bench(cf, args.repeat)
            print(f"{n:>7} {op:<10} {t_py*1e3:>8.1f}ms {t_cy*1e3:>8.1f}ms {t_py/t_cy:>7.1f}x")


if __name__ == "__main__":
    main()
