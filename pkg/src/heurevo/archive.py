"""Behavior-indexed elite memory: CVT cells over [0,1]^d, one best incumbent
per occupied cell, diversity-first exemplar retrieval."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from heurevo.core import EvaluatedCandidate, Population

NEW_CELL = "new_cell"
REPLACED = "replaced"
REJECTED = "rejected"

CVT_SAMPLES = 10_000
CVT_ITERATIONS = 50


@dataclass(frozen=True)
class CentroidSet:
    dim: int
    centroids: np.ndarray  # (count, dim) in [0,1]
    seed: int

    @property
    def count(self) -> int:
        return int(self.centroids.shape[0])


def build_centroids(dim: int, count: int, seed: int,
                    samples: int = CVT_SAMPLES, iterations: int = CVT_ITERATIONS) -> CentroidSet:
    """Centroidal Voronoi tessellation of the unit cube via fixed-iteration
    Lloyd k-means on seeded uniform samples; deterministic per (dim, count, seed).

    Initial centroids are the first `count` samples; a cluster that empties is
    re-seeded to the sample currently farthest from its nearest centroid.
    """
    if dim < 1 or count < 1:
        raise ValueError("dim and count must be >= 1")
    if count > samples:
        raise ValueError(f"cannot place {count} centroids from {samples} samples")
    rng = np.random.default_rng(seed)
    points = rng.random((samples, dim))
    centroids = points[:count].copy()
    for _ in range(iterations):
        d2 = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        owner = d2.argmin(axis=1)
        nearest_d2 = d2[np.arange(samples), owner]
        for c in range(count):
            mask = owner == c
            if mask.any():
                centroids[c] = points[mask].mean(axis=0)
            else:
                centroids[c] = points[nearest_d2.argmax()]
    return CentroidSet(dim=dim, centroids=np.clip(centroids, 0.0, 1.0), seed=seed)


def assign_cell(v, cs: CentroidSet) -> int:
    """Index of the Euclidean-nearest centroid; ties go to the lowest index."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (cs.dim,):
        raise ValueError(f"vector has shape {v.shape}, centroids expect ({cs.dim},)")
    d2 = ((cs.centroids - v) ** 2).sum(axis=1)
    return int(d2.argmin())


@dataclass
class Exemplar:
    candidate: EvaluatedCandidate
    cell_id: int  # -1 marks the empty-archive population fallback
    summary: str


@dataclass
class ExemplarSet:
    exemplars: list[Exemplar] = field(default_factory=list)

    def __len__(self):
        return len(self.exemplars)


def _summarize(candidate: EvaluatedCandidate) -> str:
    text = candidate.heuristic.strategy_text.strip()
    first = text.splitlines()[0] if text else "(seed heuristic, no strategy text)"
    return first[:200]


class Archive:
    """One incumbent per behavioral cell; insertions keep the strictly better
    candidate, so occupied cells never regress."""

    def __init__(self, centroids: CentroidSet, capacity: int | None = None):
        self.centroids = centroids
        self.capacity = centroids.count if capacity is None else int(capacity)
        self.cells: dict[int, EvaluatedCandidate] = {}

    def insert(self, candidate: EvaluatedCandidate) -> str:
        if candidate.behavior_norm is None or candidate.fitness is None:
            raise ValueError("cannot insert an unevaluated candidate")
        cell = assign_cell(candidate.behavior_norm, self.centroids)
        incumbent = self.cells.get(cell)
        if incumbent is None:
            if len(self.cells) >= self.capacity:
                return REJECTED  # unreachable with capacity >= cell count
            self.cells[cell] = candidate
            return NEW_CELL
        if candidate.fitness.loss < incumbent.fitness.loss:
            self.cells[cell] = candidate
            return REPLACED
        return REJECTED

    def coverage(self) -> float:
        return len(self.cells) / self.centroids.count

    def best(self) -> EvaluatedCandidate | None:
        if not self.cells:
            return None
        return min(self.cells.values(), key=lambda c: (c.fitness.loss, c.heuristic.id))

    def occupied_cells(self) -> list[int]:
        return sorted(self.cells)


def retrieve_exemplars(archive: Archive, population: Population, r: int) -> ExemplarSet:
    """Diversity-first retrieval of r incumbents from distinct cells.

    Greedy farthest-point over occupied-cell centroids: start from the cell of
    the lowest-loss incumbent, then repeatedly take the cell maximizing the
    minimum distance to the picked set (lower loss, then lower cell id, break
    ties). An empty archive falls back to the population's top elites.
    """
    if r < 0:
        raise ValueError("r must be >= 0")
    if r == 0:
        return ExemplarSet()
    if not archive.cells:
        elites = population.members[:r]
        return ExemplarSet([Exemplar(c, -1, _summarize(c)) for c in elites])

    cells = archive.occupied_cells()
    pts = {c: archive.centroids.centroids[c] for c in cells}
    first = min(cells, key=lambda c: (archive.cells[c].fitness.loss, c))
    picked = [first]
    remaining = [c for c in cells if c != first]
    while remaining and len(picked) < r:
        best_cell, best_key = None, None
        for c in remaining:
            min_d = min(float(np.linalg.norm(pts[c] - pts[p])) for p in picked)
            key = (-min_d, archive.cells[c].fitness.loss, c)
            if best_key is None or key < best_key:
                best_cell, best_key = c, key
        picked.append(best_cell)
        remaining.remove(best_cell)
    return ExemplarSet([Exemplar(archive.cells[c], c, _summarize(archive.cells[c]))
                        for c in picked])


def archive_snapshot(archive: Archive, task_kind: str, coord_names) -> dict:
    """JSON document with centroids and one record per occupied cell."""
    records = []
    for cell in archive.occupied_cells():
        cand = archive.cells[cell]
        records.append({
            "task": task_kind,
            "fitness": cand.fitness.loss,
            "cell": cell,
            "behavior": dict(zip(coord_names, cand.behavior_norm)),
            "behavior_raw": list(cand.behavior_raw),
            "summary": _summarize(cand),
            "source": cand.heuristic.source,
            "id": cand.heuristic.id,
            "generation": cand.heuristic.generation,
        })
    return {
        "dim": archive.centroids.dim,
        "seed": archive.centroids.seed,
        "capacity": archive.capacity,
        "centroids": archive.centroids.centroids.tolist(),
        "cells": records,
    }
