"""Euclidean TSP construction: TSPLIB EUC_2D parsing, synthetic instances,
tour evaluation, and the nearest-neighbor baseline."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from heurevo import kernels
from heurevo.tasks.base import (
    FeasibilityError,
    InfeasibleDecisionError,
    InstanceTrace,
    ReferenceUnavailableError,
    Solution,
    TaskParseError,
)


@dataclass
class TspInstance:
    coords: np.ndarray  # (n, 2) float64
    reference: float | None = None
    rounded: bool = False  # TSPLIB nearest-integer distances vs exact Euclidean
    name: str = ""
    _dist: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.coords = np.ascontiguousarray(self.coords, dtype=np.float64)
        if self.coords.ndim != 2 or self.coords.shape[1] != 2 or self.coords.shape[0] < 3:
            raise ValueError("need at least 3 cities with 2-D coordinates")

    @property
    def n(self) -> int:
        return int(self.coords.shape[0])

    def distance_matrix(self) -> np.ndarray:
        if self._dist is None:
            self._dist = kernels.euclidean_matrix(self.coords, self.rounded)
        return self._dist


def generate(n: int, seed: int) -> TspInstance:
    """n uniform cities in the unit square; exact Euclidean distances."""
    if n < 3:
        raise ValueError("need n >= 3 cities")
    rng = np.random.default_rng(seed)
    return TspInstance(coords=rng.random((n, 2)), name=f"uniform-{n}-s{seed}")


def parse_tsplib(text: str) -> TspInstance:
    """Parse a TSPLIB document; only EDGE_WEIGHT_TYPE EUC_2D is accepted."""
    name = ""
    dimension = None
    weight_type = None
    coords: list[tuple[float, float]] = []
    lines = text.splitlines()
    i = 0
    while i < len(lines):
        line = lines[i].strip()
        i += 1
        if not line or line == "EOF":
            continue
        if ":" in line or not line.endswith("SECTION"):
            key, _, value = line.partition(":")
            key = key.strip().upper()
            value = value.strip()
            if key == "NAME":
                name = value
            elif key == "DIMENSION":
                try:
                    dimension = int(value)
                except ValueError:
                    raise TaskParseError(f"bad DIMENSION {value!r}", line=i)
            elif key == "EDGE_WEIGHT_TYPE":
                weight_type = value
                if value != "EUC_2D":
                    raise TaskParseError(f"unsupported EDGE_WEIGHT_TYPE {value!r}", line=i)
            continue
        if line == "NODE_COORD_SECTION":
            while i < len(lines):
                row = lines[i].strip()
                i += 1
                if not row or row == "EOF":
                    break
                parts = row.split()
                if len(parts) != 3:
                    raise TaskParseError(f"bad coordinate row {row!r}", line=i)
                try:
                    coords.append((float(parts[1]), float(parts[2])))
                except ValueError:
                    raise TaskParseError(f"bad coordinate row {row!r}", line=i)
            continue
        raise TaskParseError(f"unexpected section {line!r}", line=i)
    if weight_type is None:
        raise TaskParseError("missing EDGE_WEIGHT_TYPE")
    if dimension is None:
        raise TaskParseError("missing DIMENSION")
    if len(coords) != dimension:
        raise TaskParseError(f"DIMENSION {dimension} but {len(coords)} coordinate rows")
    return TspInstance(coords=np.asarray(coords), rounded=True, name=name)


def _check_tour(instance: TspInstance, tour) -> np.ndarray:
    tour = np.asarray(tour, dtype=np.int64)
    if sorted(tour.tolist()) != list(range(instance.n)):
        raise FeasibilityError("tour must visit every city exactly once")
    return tour


def evaluate(instance: TspInstance, tour) -> float:
    return kernels.tour_length(instance.distance_matrix(), _check_tour(instance, tour))


def reference(instance: TspInstance) -> float:
    if instance.reference is None:
        raise ReferenceUnavailableError(f"no stored reference for {instance.name or 'instance'}")
    return float(instance.reference)


def nearest_neighbor(instance: TspInstance) -> Solution:
    tour = kernels.nn_tour(instance.distance_matrix(), start=0)
    return Solution(kind="tsp_construct", values=tuple(int(c) for c in tour))


def brute_force(instance: TspInstance) -> tuple[float, tuple[int, ...]]:
    """Exact optimum by enumerating tours with city 0 fixed; for tests only."""
    import itertools

    dist = instance.distance_matrix()
    best_len, best_tour = float("inf"), None
    for perm in itertools.permutations(range(1, instance.n)):
        tour = (0,) + perm
        length = kernels.tour_length(dist, np.asarray(tour, dtype=np.int64))
        if length < best_len:
            best_len, best_tour = length, tour
    return best_len, best_tour


def drive(instance: TspInstance, policy) -> InstanceTrace:
    """Construction loop: call the policy once per step until the tour closes."""
    dist = instance.distance_matrix()
    current = 0
    unvisited = list(range(1, instance.n))
    decisions: list[int] = []
    for step in range(instance.n - 1):
        choice = policy(current, 0, list(unvisited), dist)
        try:
            choice = int(choice)
        except (TypeError, ValueError):
            raise InfeasibleDecisionError(f"non-integer city choice {choice!r}", step)
        if choice not in unvisited:
            raise InfeasibleDecisionError(f"city {choice} is not unvisited", step)
        unvisited.remove(choice)
        decisions.append(choice)
        current = choice
    tour = np.asarray([0] + decisions, dtype=np.int64)
    return InstanceTrace(instance=instance, decisions=decisions,
                         objective=kernels.tour_length(dist, tour))


def to_payload(instance: TspInstance) -> dict:
    return {
        "kind": "tsp_construct",
        "coords": [[float(x), float(y)] for x, y in instance.coords],
        "rounded": bool(instance.rounded),
    }
