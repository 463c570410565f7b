"""Hot-kernel dispatch: compiled extension when built, pure fallback otherwise.

Set HEUREVO_FORCE_FALLBACK=1 to ignore an installed extension (used by the
kernel parity tests and the benchmark).
"""
from __future__ import annotations

import os

import numpy as np

from heurevo import _fallback

if os.environ.get("HEUREVO_FORCE_FALLBACK", "") == "1":
    _impl = _fallback
    HAVE_SPEEDUPS = False
else:
    try:
        from heurevo import _speedups as _impl  # type: ignore[no-redef]

        HAVE_SPEEDUPS = True
    except ImportError:
        _impl = _fallback
        HAVE_SPEEDUPS = False


def _f64_matrix(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def _i64(a):
    return np.ascontiguousarray(a, dtype=np.int64)


def tour_length(dist, tour) -> float:
    return float(_impl.tour_length(_f64_matrix(dist), _i64(tour)))


def nn_tour(dist, start: int = 0):
    return np.asarray(_impl.nn_tour(_f64_matrix(dist), int(start)), dtype=np.int64)


def pack_stream(items, capacity: int, rule: str = "best_fit"):
    """Online packing simulation; returns (bins_used, assignment, residuals)."""
    code = {"best_fit": 0, "first_fit": 1}[rule]
    n_bins, assignment, residuals = _impl.pack_stream(_i64(items), int(capacity), code)
    return int(n_bins), np.asarray(assignment, dtype=np.int64), np.asarray(residuals, dtype=np.int64)


def l2_bound(items, capacity: int) -> int:
    return int(_impl.l2_bound(_i64(items), int(capacity)))


def makespan(ptimes, order) -> float:
    return float(_impl.makespan(_f64_matrix(ptimes), _i64(order)))


def euclidean_matrix(coords, rounded: bool):
    return np.asarray(_impl.euclidean_matrix(_f64_matrix(coords), bool(rounded)))
