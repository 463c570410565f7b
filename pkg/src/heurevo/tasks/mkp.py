"""Multidimensional knapsack: synthetic instance generation, an exact
branch-and-bound reference for small instances, a surrogate upper bound for
large ones, and the greedy value-density baseline."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from heurevo.tasks.base import (
    FeasibilityError,
    InfeasibleDecisionError,
    InstanceTrace,
    Solution,
)

EXACT_ITEM_LIMIT = 22  # beyond this the exact search is replaced by a surrogate bound


@dataclass
class MkpInstance:
    values: np.ndarray      # (n,) int64
    weights: np.ndarray     # (m, n) int64, one row per constraint
    capacities: np.ndarray  # (m,) int64
    reference: float | None = None
    name: str = ""

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.int64)
        self.weights = np.ascontiguousarray(self.weights, dtype=np.int64)
        self.capacities = np.ascontiguousarray(self.capacities, dtype=np.int64)
        if self.weights.ndim != 2:
            raise ValueError("weights must be a constraints-by-items matrix")
        m, n = self.weights.shape
        if len(self.values) != n or len(self.capacities) != m:
            raise ValueError("inconsistent dimensions")
        if (self.values < 1).any() or (self.weights < 1).any() or (self.capacities < 1).any():
            raise ValueError("all entries must be positive")

    @property
    def n_items(self) -> int:
        return int(self.weights.shape[1])

    @property
    def n_constraints(self) -> int:
        return int(self.weights.shape[0])


def generate(n_items: int, n_constraints: int, seed: int) -> MkpInstance:
    """Values and weights uniform on [1, 100], capacities uniform on [100, 500]."""
    if n_items < 1 or n_constraints < 1:
        raise ValueError("n_items and n_constraints must be >= 1")
    rng = np.random.default_rng(seed)
    values = rng.integers(1, 101, size=n_items, dtype=np.int64)
    weights = rng.integers(1, 101, size=(n_constraints, n_items), dtype=np.int64)
    capacities = rng.integers(100, 501, size=n_constraints, dtype=np.int64)
    return MkpInstance(values=values, weights=weights, capacities=capacities,
                       name=f"mkp-{n_items}x{n_constraints}-s{seed}")


def evaluate(instance: MkpInstance, selection) -> float:
    selection = [int(j) for j in selection]
    if len(set(selection)) != len(selection):
        raise FeasibilityError("selection contains a duplicate item")
    if selection and (min(selection) < 0 or max(selection) >= instance.n_items):
        raise FeasibilityError("selection contains an out-of-range item")
    for i in range(instance.n_constraints):
        load = int(sum(int(instance.weights[i, j]) for j in selection))
        if load > instance.capacities[i]:
            raise FeasibilityError(f"constraint {i} violated ({load} > {instance.capacities[i]})")
    return float(sum(int(instance.values[j]) for j in selection))


def densities(instance: MkpInstance) -> list[float]:
    """value / sum of capacity-normalized weights, per item.

    Plain sequential arithmetic: the guest-side greedy fixture computes the
    same expression and must reproduce these floats exactly.
    """
    out = []
    for j in range(instance.n_items):
        load = 0.0
        for i in range(instance.n_constraints):
            load += instance.weights[i, j] / instance.capacities[i]
        out.append(instance.values[j] / load if load > 0 else float(instance.values[j]))
    return out


def greedy_density(instance: MkpInstance) -> Solution:
    """Admit items by descending value density while all constraints hold."""
    dens = densities(instance)
    order = sorted(range(instance.n_items), key=lambda j: (-dens[j], j))
    residual = [int(c) for c in instance.capacities]
    chosen = []
    for j in order:
        if all(instance.weights[i, j] <= residual[i] for i in range(instance.n_constraints)):
            for i in range(instance.n_constraints):
                residual[i] -= int(instance.weights[i, j])
            chosen.append(j)
    return Solution(kind="mkp", values=tuple(chosen))


def exact_optimum(instance: MkpInstance) -> float:
    """Depth-first branch and bound in descending-density order; exact for
    small item counts (prunes with the remaining-value bound)."""
    n = instance.n_items
    m = instance.n_constraints
    dens = densities(instance)
    order = sorted(range(n), key=lambda j: (-dens[j], j))
    values = [int(instance.values[j]) for j in order]
    weights = [[int(instance.weights[i, j]) for i in range(m)] for j in order]
    suffix = [0] * (n + 1)
    for idx in range(n - 1, -1, -1):
        suffix[idx] = suffix[idx + 1] + values[idx]
    residual = [int(c) for c in instance.capacities]
    best = 0

    def search(idx, value):
        nonlocal best
        if value > best:
            best = value
        if idx == n or value + suffix[idx] <= best:
            return
        w = weights[idx]
        if all(w[i] <= residual[i] for i in range(m)):
            for i in range(m):
                residual[i] -= w[i]
            search(idx + 1, value + values[idx])
            for i in range(m):
                residual[i] += w[i]
        search(idx + 1, value)

    search(0, 0)
    return float(best)


def surrogate_upper_bound(instance: MkpInstance) -> float:
    """Min over constraints of the fractional single-knapsack bound: a cheap,
    LP-free upper bound used when the exact search is out of reach."""
    best = float(instance.values.sum())
    for i in range(instance.n_constraints):
        ratio = instance.values / instance.weights[i]
        order = np.argsort(-ratio, kind="stable")
        cap = int(instance.capacities[i])
        bound = 0.0
        for j in order:
            w = int(instance.weights[i, j])
            if w <= cap:
                cap -= w
                bound += int(instance.values[j])
            else:
                bound += int(instance.values[j]) * (cap / w)
                break
        best = min(best, bound)
    return best


def reference(instance: MkpInstance) -> float:
    if instance.reference is not None:
        return float(instance.reference)
    if instance.n_items <= EXACT_ITEM_LIMIT:
        return exact_optimum(instance)
    return surrogate_upper_bound(instance)


def reference_is_exact(instance: MkpInstance) -> bool:
    return instance.reference is not None or instance.n_items <= EXACT_ITEM_LIMIT


def exhaustive_optimum(instance: MkpInstance) -> float:
    """Full 2^n subset enumeration; independent test oracle for small n."""
    n = instance.n_items
    if n > 20:
        raise ValueError("exhaustive oracle is limited to n <= 20 items")
    masks = np.arange(1 << n, dtype=np.int64)
    bits = (masks[:, None] >> np.arange(n)) & 1  # (2^n, n) membership table
    loads = bits @ instance.weights.T            # (2^n, m)
    feasible = (loads <= instance.capacities).all(axis=1)
    totals = bits @ instance.values
    return float(totals[feasible].max())


def drive(instance: MkpInstance, policy) -> InstanceTrace:
    """Admission loop: highest-priority feasible item wins until none fits."""
    values = [int(v) for v in instance.values]
    weights = [[int(w) for w in row] for row in instance.weights]
    capacities = [int(c) for c in instance.capacities]
    residual = list(capacities)
    admitted: list[int] = []
    taken = set()
    step = 0
    while True:
        feasible = [
            j for j in range(instance.n_items)
            if j not in taken
            and all(weights[i][j] <= residual[i] for i in range(instance.n_constraints))
        ]
        if not feasible:
            break
        scores = policy(values, weights, list(capacities), list(residual), feasible)
        try:
            scores = [float(s) for s in scores]
        except (TypeError, ValueError):
            raise InfeasibleDecisionError("item priorities must be numeric", step)
        if len(scores) != len(feasible):
            raise InfeasibleDecisionError(
                f"expected {len(feasible)} priorities, got {len(scores)}", step)
        pick = 0
        for j in range(1, len(scores)):
            if scores[j] > scores[pick]:
                pick = j
        chosen = feasible[pick]
        taken.add(chosen)
        admitted.append(chosen)
        for i in range(instance.n_constraints):
            residual[i] -= weights[i][chosen]
        step += 1
    objective = float(sum(values[j] for j in admitted))
    return InstanceTrace(instance=instance, decisions=admitted, objective=objective)


def to_payload(instance: MkpInstance) -> dict:
    return {
        "kind": "mkp",
        "values": [int(v) for v in instance.values],
        "weights": [[int(w) for w in row] for row in instance.weights],
        "capacities": [int(c) for c in instance.capacities],
    }
