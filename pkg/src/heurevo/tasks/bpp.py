"""Online bin packing on Weibull item streams, with the Martello-Toth L2
lower bound as the reference and Best Fit / First Fit baselines."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from heurevo import kernels
from heurevo.tasks.base import (
    FeasibilityError,
    InfeasibleDecisionError,
    InstanceTrace,
    Solution,
)

WEIBULL_SHAPE = 3.0
WEIBULL_SCALE = 45.0


@dataclass
class BppInstance:
    capacity: int
    items: np.ndarray  # int64 sizes in arrival order
    name: str = ""

    def __post_init__(self):
        self.capacity = int(self.capacity)
        self.items = np.ascontiguousarray(self.items, dtype=np.int64)
        if self.capacity < 1:
            raise ValueError("capacity must be >= 1")
        if len(self.items) and (self.items.min() < 1 or self.items.max() > self.capacity):
            raise ValueError("every item must fit in an empty bin")

    @property
    def n(self) -> int:
        return int(len(self.items))


def generate(capacity: int, count: int, seed: int) -> BppInstance:
    """Weibull(3, 45) sizes, rounded up and clamped to [1, min(100, capacity)]."""
    if capacity < 1 or count < 1:
        raise ValueError("capacity and count must be >= 1")
    rng = np.random.default_rng(seed)
    raw = rng.weibull(WEIBULL_SHAPE, count) * WEIBULL_SCALE
    sizes = np.clip(np.ceil(raw).astype(np.int64), 1, min(100, capacity))
    return BppInstance(capacity=capacity, items=sizes, name=f"weibull-{count}-c{capacity}-s{seed}")


def evaluate(instance: BppInstance, assignment) -> float:
    """Bins used; the assignment must respect capacities and open bins in order."""
    assignment = list(int(b) for b in assignment)
    if len(assignment) != instance.n:
        raise FeasibilityError("assignment must cover every item in arrival order")
    loads: list[int] = []
    for i, b in enumerate(assignment):
        if b == len(loads):
            loads.append(0)
        elif not 0 <= b < len(loads):
            raise FeasibilityError(f"item {i} uses bin {b} before it is opened")
        loads[b] += int(instance.items[i])
        if loads[b] > instance.capacity:
            raise FeasibilityError(f"bin {b} overflows at item {i}")
    return float(len(loads))


def l2_lower_bound(items, capacity: int) -> int:
    return kernels.l2_bound(items, capacity)


def reference(instance: BppInstance) -> float:
    return float(l2_lower_bound(instance.items, instance.capacity))


def _pack(instance: BppInstance, rule: str) -> Solution:
    _, assignment, _ = kernels.pack_stream(instance.items, instance.capacity, rule)
    return Solution(kind="bpp_online", values=tuple(int(b) for b in assignment))


def best_fit(instance: BppInstance) -> Solution:
    return _pack(instance, "best_fit")


def first_fit(instance: BppInstance) -> Solution:
    return _pack(instance, "first_fit")


def optimal_bins(items, capacity: int) -> int:
    """Exact minimum bin count by exhaustive assignment; tests only (n <= ~8)."""
    items = [int(x) for x in items]
    if not items:
        return 0
    best = len(items)

    def place(i, loads):
        nonlocal best
        if len(loads) >= best:
            return
        if i == len(items):
            best = len(loads)
            return
        seen = set()
        for b, load in enumerate(loads):
            # identical residuals are symmetric; trying one is enough
            if load + items[i] <= capacity and load not in seen:
                seen.add(load)
                loads[b] += items[i]
                place(i + 1, loads)
                loads[b] -= items[i]
        loads.append(items[i])
        place(i + 1, loads)
        loads.pop()

    place(0, [])
    return best


def drive(instance: BppInstance, policy) -> InstanceTrace:
    """Arrival loop: score feasible bins per item; no feasible bin opens a new one.

    Decisions log the chosen bin index per item. aux["scored_steps"] records,
    for items where the policy actually chose, (rank of chosen bin among
    feasible, feasible count).
    """
    residuals: list[int] = []
    decisions: list[int] = []
    scored_steps: list[tuple[int, int]] = []
    for step in range(instance.n):
        size = int(instance.items[step])
        feasible = [b for b, r in enumerate(residuals) if r >= size]
        if not feasible:
            residuals.append(instance.capacity - size)
            decisions.append(len(residuals) - 1)
            continue
        scores = policy(size, [residuals[b] for b in feasible])
        try:
            scores = [float(s) for s in scores]
        except (TypeError, ValueError):
            raise InfeasibleDecisionError("bin scores must be numeric", step)
        if len(scores) != len(feasible):
            raise InfeasibleDecisionError(
                f"expected {len(feasible)} scores, got {len(scores)}", step)
        if any(math.isnan(s) for s in scores):
            raise InfeasibleDecisionError("bin scores must not be NaN", step)
        pick = 0
        for j in range(1, len(scores)):
            if scores[j] > scores[pick]:
                pick = j
        chosen = feasible[pick]
        scored_steps.append((pick, len(feasible)))
        residuals[chosen] -= size
        decisions.append(chosen)
    return InstanceTrace(
        instance=instance,
        decisions=decisions,
        objective=float(len(residuals)),
        aux={"scored_steps": scored_steps},
    )


def to_payload(instance: BppInstance) -> dict:
    return {
        "kind": "bpp_online",
        "capacity": int(instance.capacity),
        "items": [int(x) for x in instance.items],
    }
