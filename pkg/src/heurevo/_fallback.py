"""Pure-Python/numpy implementations of the hot kernels.

Mirrors heurevo._speedups function by function. Both implementations must
agree exactly on integer results (bin counts, bounds, rounded tour lengths)
and accumulate floating sums in the same order, so that switching backends
never changes a run.
"""
from __future__ import annotations

import math

import numpy as np


def tour_length(dist, tour):
    total = 0.0
    n = len(tour)
    for i in range(n):
        total += dist[tour[i], tour[(i + 1) % n]]
    return total


def nn_tour(dist, start):
    """Greedy nearest-neighbor tour over a distance matrix; ties by lowest index."""
    n = dist.shape[0]
    tour = np.empty(n, dtype=np.int64)
    visited = np.zeros(n, dtype=bool)
    tour[0] = start
    visited[start] = True
    current = start
    for step in range(1, n):
        row = np.where(visited, np.inf, dist[current])
        current = int(np.argmin(row))  # first minimum == lowest index on ties
        tour[step] = current
        visited[current] = True
    return tour


def pack_stream(items, capacity, rule):
    """Simulate an online packing rule over an arrival stream.

    rule 0 = best fit (feasible bin with least leftover, lowest index on ties),
    rule 1 = first fit. Returns (bins_used, assignment, residuals).
    """
    n = len(items)
    assignment = np.empty(n, dtype=np.int64)
    residuals = np.empty(n, dtype=np.int64)  # at most one bin per item
    n_bins = 0
    for i in range(n):
        size = items[i]
        feas = residuals[:n_bins] >= size
        if not feas.any():
            assignment[i] = n_bins
            residuals[n_bins] = capacity - size
            n_bins += 1
            continue
        if rule == 1:
            chosen = int(np.argmax(feas))
        else:
            leftover = np.where(feas, residuals[:n_bins] - size, np.iinfo(np.int64).max)
            chosen = int(np.argmin(leftover))
        assignment[i] = chosen
        residuals[chosen] -= size
    return n_bins, assignment, residuals[:n_bins].copy()


def l2_bound(items, capacity):
    """Martello-Toth L2 lower bound on the bin count for the given sizes.

    For each threshold a in {0} plus the distinct sizes <= capacity/2, counts
    the bins forced by large items (> capacity - a), adds the halves
    (capacity/2 < s <= capacity - a), and charges the remaining middle mass
    (a <= s <= capacity/2) against the slack left in the half bins. Never
    returns less than ceil(sum / capacity).
    """
    n = len(items)
    if n == 0:
        return 0
    sizes = np.sort(np.asarray(items, dtype=np.int64))
    total = int(sizes.sum())
    best = (total + capacity - 1) // capacity
    prefix = np.concatenate(([0], np.cumsum(sizes)))

    def count_leq(x):
        return int(np.searchsorted(sizes, x, side="right"))

    def sum_leq(x):
        return int(prefix[count_leq(x)])

    half = capacity // 2  # s <= capacity/2  <=>  2s <= capacity  <=>  s <= floor(c/2)
    # threshold 0 charges every half-exceeding item even when no small sizes exist
    thresholds = [0] + [int(a) for a in np.unique(sizes[sizes * 2 <= capacity])]
    for a in thresholds:
        n1 = n - count_leq(capacity - a)
        n2 = count_leq(capacity - a) - count_leq(half)
        sum2 = sum_leq(capacity - a) - sum_leq(half)
        sum3 = sum_leq(half) - sum_leq(a - 1)
        slack2 = n2 * capacity - sum2
        num = sum3 - slack2
        extra = (num + capacity - 1) // capacity if num > 0 else 0
        cand = n1 + n2 + extra
        if cand > best:
            best = cand
    return best


def makespan(ptimes, order):
    """Permutation flow-shop makespan: C(i,j) = max(C(i-1,j), C(i,j-1)) + p(i,j)."""
    m = ptimes.shape[1]
    comp = [0.0] * m
    for j in order:
        prev = 0.0
        for k in range(m):
            c = comp[k]
            if prev > c:
                c = prev
            prev = c + ptimes[j, k]
            comp[k] = prev
    return comp[m - 1]


def euclidean_matrix(coords, rounded):
    """Pairwise Euclidean distances; rounded=True applies nearest-integer rounding."""
    delta = coords[:, None, :] - coords[None, :, :]
    dist = np.sqrt((delta * delta).sum(axis=2))
    if rounded:
        dist = np.floor(dist + 0.5)
    return dist
