"""Benchmark of the compiled kernels against the pure-Python fallback.

    python benchmarks/bench_kernels.py

Reports per-kernel timings on evaluation-sized workloads (1000-city tours,
5000-item packing streams, NEH-scale makespan batches) plus the speedup.
"""
from __future__ import annotations

import time

import numpy as np

from heurevo import _fallback

try:
    from heurevo import _speedups
except ImportError:
    _speedups = None


def _time(fn, repeat=5):
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def workloads():
    rng = np.random.default_rng(0)
    coords = np.ascontiguousarray(rng.random((1000, 2)))
    dist = _fallback.euclidean_matrix(coords, False)
    dist = np.ascontiguousarray(dist)
    tour = np.ascontiguousarray(rng.permutation(1000), dtype=np.int64)
    items = np.ascontiguousarray(
        np.clip(np.ceil(rng.weibull(3.0, 5000) * 45.0), 1, 100), dtype=np.int64)
    ptimes = np.ascontiguousarray(rng.integers(1, 100, (100, 20)).astype(np.float64))
    order = np.ascontiguousarray(rng.permutation(100), dtype=np.int64)

    yield "euclidean_matrix (1000 cities)", lambda m: m.euclidean_matrix(coords, True)
    yield "nn_tour (1000 cities)", lambda m: m.nn_tour(dist, 0)
    yield "tour_length (1000 cities)", lambda m: m.tour_length(dist, tour)
    yield "pack_stream best-fit (5k items)", lambda m: m.pack_stream(items, 100, 0)
    yield "pack_stream first-fit (5k items)", lambda m: m.pack_stream(items, 100, 1)
    yield "l2_bound (5k items)", lambda m: m.l2_bound(items, 100)
    yield "makespan (100x20)", lambda m: m.makespan(ptimes, order)


def main():
    if _speedups is None:
        print("compiled kernels not built (pip install -e . builds them); "
              "timing the fallback only")
    rows = []
    for name, call in workloads():
        pure = _time(lambda: call(_fallback))
        if _speedups is not None:
            fast = _time(lambda: call(_speedups))
            rows.append((name, pure, fast, pure / fast))
        else:
            rows.append((name, pure, None, None))
    width = max(len(r[0]) for r in rows)
    header = f"{'kernel':<{width}}  {'fallback':>10}  {'compiled':>10}  {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for name, pure, fast, ratio in rows:
        fast_text = "-" if fast is None else f"{fast * 1e3:9.3f}ms"
        ratio_text = "-" if ratio is None else f"{ratio:7.1f}x"
        print(f"{name:<{width}}  {pure * 1e3:9.3f}ms  {fast_text:>10}  {ratio_text:>8}")


if __name__ == "__main__":
    main()
