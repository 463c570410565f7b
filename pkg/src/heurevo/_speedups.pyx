# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot kernels. Semantics must match heurevo._fallback exactly."""

from libc.math cimport floor, sqrt

import numpy as np


def tour_length(double[:, ::1] dist, long long[::1] tour):
    cdef Py_ssize_t i, n = tour.shape[0]
    cdef double total = 0.0
    for i in range(n):
        total += dist[tour[i], tour[(i + 1) % n]]
    return total


def nn_tour(double[:, ::1] dist, long long start):
    cdef Py_ssize_t n = dist.shape[0]
    out = np.empty(n, dtype=np.int64)
    cdef long long[::1] tour = out
    visited = np.zeros(n, dtype=np.uint8)
    cdef unsigned char[::1] vis = visited
    cdef Py_ssize_t step, j, current = start, nxt
    cdef double best, d
    tour[0] = start
    vis[start] = 1
    for step in range(1, n):
        nxt = -1
        best = 0.0
        for j in range(n):
            if vis[j]:
                continue
            d = dist[current, j]
            if nxt < 0 or d < best:
                nxt = j
                best = d
        tour[step] = nxt
        vis[nxt] = 1
        current = nxt
    return out


def pack_stream(long long[::1] items, long long capacity, int rule):
    cdef Py_ssize_t n = items.shape[0]
    assignment_arr = np.empty(n, dtype=np.int64)
    residual_arr = np.empty(n, dtype=np.int64)
    cdef long long[::1] assignment = assignment_arr
    cdef long long[::1] residuals = residual_arr
    cdef Py_ssize_t i, b, chosen
    cdef long long size, leftover, best_left
    cdef Py_ssize_t n_bins = 0
    for i in range(n):
        size = items[i]
        chosen = -1
        best_left = 0
        for b in range(n_bins):
            if residuals[b] < size:
                continue
            if rule == 1:
                chosen = b
                break
            leftover = residuals[b] - size
            if chosen < 0 or leftover < best_left:
                chosen = b
                best_left = leftover
        if chosen < 0:
            assignment[i] = n_bins
            residuals[n_bins] = capacity - size
            n_bins += 1
        else:
            assignment[i] = chosen
            residuals[chosen] -= size
    return n_bins, assignment_arr, residual_arr[:n_bins].copy()


def l2_bound(items, long long capacity):
    cdef Py_ssize_t n = len(items)
    if n == 0:
        return 0
    sizes_arr = np.sort(np.asarray(items, dtype=np.int64))
    cdef long long[::1] sizes = sizes_arr
    cdef long long total = 0
    cdef Py_ssize_t i
    for i in range(n):
        total += sizes[i]
    cdef long long best = (total + capacity - 1) // capacity
    cdef long long half = capacity // 2
    cdef long long a, prev, n1, n2, sum2, sum3, slack2, num, extra, cand
    cdef Py_ssize_t c_cap_a, c_half, c_below_a

    prev = -1
    for i in range(-1, n):
        a = 0 if i < 0 else sizes[i]  # threshold 0, then each distinct size
        if 2 * a > capacity or a == prev:
            continue
        prev = a
        c_cap_a = _count_leq(sizes, capacity - a)
        c_half = _count_leq(sizes, half)
        c_below_a = _count_leq(sizes, a - 1)
        n1 = n - c_cap_a
        n2 = c_cap_a - c_half
        sum2 = _sum_range(sizes, c_half, c_cap_a)
        sum3 = _sum_range(sizes, c_below_a, c_half)
        slack2 = n2 * capacity - sum2
        num = sum3 - slack2
        extra = (num + capacity - 1) // capacity if num > 0 else 0
        cand = n1 + n2 + extra
        if cand > best:
            best = cand
    return best


cdef Py_ssize_t _count_leq(long long[::1] sizes, long long x):
    cdef Py_ssize_t lo = 0, hi = sizes.shape[0], mid
    while lo < hi:
        mid = (lo + hi) // 2
        if sizes[mid] <= x:
            lo = mid + 1
        else:
            hi = mid
    return lo


cdef long long _sum_range(long long[::1] sizes, Py_ssize_t lo, Py_ssize_t hi):
    cdef long long s = 0
    cdef Py_ssize_t i
    for i in range(lo, hi):
        s += sizes[i]
    return s


def makespan(double[:, ::1] ptimes, long long[::1] order):
    cdef Py_ssize_t m = ptimes.shape[1], n = order.shape[0]
    comp_arr = np.zeros(m, dtype=np.float64)
    cdef double[::1] comp = comp_arr
    cdef Py_ssize_t i, k
    cdef long long j
    cdef double prev, c
    for i in range(n):
        j = order[i]
        prev = 0.0
        for k in range(m):
            c = comp[k]
            if prev > c:
                c = prev
            prev = c + ptimes[j, k]
            comp[k] = prev
    return comp[m - 1]


def euclidean_matrix(double[:, ::1] coords, bint rounded):
    cdef Py_ssize_t n = coords.shape[0], i, j
    out = np.empty((n, n), dtype=np.float64)
    cdef double[:, ::1] dist = out
    cdef double dx, dy, d
    for i in range(n):
        dist[i, i] = 0.0
        for j in range(i + 1, n):
            dx = coords[i, 0] - coords[j, 0]
            dy = coords[i, 1] - coords[j, 1]
            d = sqrt(dx * dx + dy * dy)
            if rounded:
                d = floor(d + 0.5)
            dist[i, j] = d
            dist[j, i] = d
    return out
