"""Shared primitives: candidate records, gap metric, fitness aggregation,
elite selection, and the quality-efficiency composite score."""
from __future__ import annotations

import math
from dataclasses import dataclass, field


class EvaluationFailedError(RuntimeError):
    """A fitness was requested for something that never produced one."""


@dataclass(frozen=True)
class ObjectiveValue:
    value: float
    direction: str = "minimize"  # or "maximize"

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ValueError(f"objective value must be finite, got {self.value!r}")
        if self.direction not in ("minimize", "maximize"):
            raise ValueError(f"unknown direction {self.direction!r}")


@dataclass(frozen=True)
class FitnessScore:
    """Mean per-instance loss; lower is better for every task."""

    loss: float

    def __post_init__(self):
        if not math.isfinite(self.loss) or self.loss < 0:
            raise ValueError(f"loss must be finite and >= 0, got {self.loss!r}")


@dataclass
class Heuristic:
    """A candidate program: source text plus evolution metadata."""

    id: str
    source: str
    strategy_text: str = ""
    parent_ids: list[str] = field(default_factory=list)
    generation: int = 0

    def __post_init__(self):
        if not self.source:
            raise ValueError("heuristic source must be non-empty")


@dataclass
class EvaluatedCandidate:
    heuristic: Heuristic
    fitness: FitnessScore
    behavior_raw: list[float]
    behavior_norm: list[float] | None = None  # assigned by the reflector update
    eval_seconds: float = 0.0
    tokens_in: int = 0
    tokens_out: int = 0

    @property
    def loss(self) -> float:
        return self.fitness.loss


@dataclass
class Population:
    """Fitness-ordered elite set: ascending loss, at most `capacity` members."""

    members: list[EvaluatedCandidate] = field(default_factory=list)
    capacity: int = 10

    def __len__(self):
        return len(self.members)

    def best(self) -> EvaluatedCandidate | None:
        return self.members[0] if self.members else None


def relative_gap(obj, reference) -> float:
    """Relative suboptimality |value - reference| / |reference| * 100, in percent."""
    value = obj.value if isinstance(obj, ObjectiveValue) else float(obj)
    reference = float(reference)
    if reference == 0 or not math.isfinite(reference):
        raise ValueError(f"reference must be nonzero and finite, got {reference!r}")
    if not math.isfinite(value):
        raise ValueError(f"objective must be finite, got {value!r}")
    return abs(value - reference) / abs(reference) * 100.0


def aggregate_fitness(losses) -> FitnessScore:
    """Mean of per-instance losses."""
    losses = list(losses)
    if not losses:
        raise EvaluationFailedError("no per-instance losses to aggregate")
    for x in losses:
        if not math.isfinite(x) or x < 0:
            raise ValueError(f"per-instance losses must be finite and >= 0, got {x!r}")
    return FitnessScore(sum(losses) / len(losses))


def _selection_key(c: EvaluatedCandidate):
    return (c.fitness.loss, c.heuristic.generation, c.heuristic.id)


def top_n_select(current: Population, newcomers) -> Population:
    """Keep the n lowest-loss candidates of population + newcomers.

    Ties break on (earlier generation, lexicographic id) so replayed runs
    select identically.
    """
    if current.capacity < 1:
        raise ValueError("population capacity must be >= 1")
    merged = {}
    for c in list(current.members) + list(newcomers):
        merged.setdefault(c.heuristic.id, c)
    ranked = sorted(merged.values(), key=_selection_key)
    return Population(members=ranked[: current.capacity], capacity=current.capacity)


def composite_score(obj_norm: float, token_norm: float, time_norm: float) -> float:
    """Weighted quality-efficiency score over block-normalized columns in [0,1]:
    objective + 3 * tokens + time (token cost dominates in practice)."""
    for name, x in (("obj_norm", obj_norm), ("token_norm", token_norm), ("time_norm", time_norm)):
        if not (0.0 <= x <= 1.0):
            raise ValueError(f"{name} must lie in [0, 1], got {x!r}")
    return obj_norm + 3.0 * token_norm + time_norm


def block_scores(rows, basis: str = "best") -> list[float]:
    """Composite scores for a block of (objective, tokens, time) rows.

    basis="best" divides each column by its block minimum (each column's best
    row scores 1.0, so a perfect row totals 5.0); basis="range" min-max
    normalizes each column into [0, 1] and routes through composite_score.
    Column weights are 1 / 3 / 1 either way.
    """
    rows = [tuple(float(x) for x in r) for r in rows]
    if not rows:
        return []
    cols = list(zip(*rows))
    if len(cols) != 3:
        raise ValueError("each row must be (objective, tokens, time)")
    if basis == "best":
        mins = [min(c) for c in cols]
        if any(m <= 0 for m in mins):
            raise ValueError("basis='best' needs strictly positive columns")
        return [o / mins[0] + 3.0 * t / mins[1] + s / mins[2] for o, t, s in rows]
    if basis == "range":
        lo = [min(c) for c in cols]
        span = [max(c) - min(c) for c in cols]

        def norm(x, j):
            return 0.0 if span[j] == 0 else (x - lo[j]) / span[j]

        return [composite_score(norm(o, 0), norm(t, 1), norm(s, 2)) for o, t, s in rows]
    raise ValueError(f"unknown basis {basis!r}")
