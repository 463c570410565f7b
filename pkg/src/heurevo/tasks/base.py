"""Task plumbing shared by the four problem environments: decision contracts,
solution/trace containers, and kind-based dispatch."""
from __future__ import annotations

from dataclasses import dataclass, field

TASK_KINDS = ("tsp_construct", "bpp_online", "mkp", "pfsp")


class ConfigError(ValueError):
    """Invalid task parameters or unknown task/baseline name."""


class TaskParseError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class FeasibilityError(ValueError):
    """A solution violates a hard constraint; it never receives a score."""


class ReferenceUnavailableError(LookupError):
    """No stored or computable reference value for this instance."""


class InfeasibleDecisionError(RuntimeError):
    """A policy returned an invalid construction decision."""

    def __init__(self, message: str, step: int):
        self.step = step
        super().__init__(f"step {step}: {message}")


@dataclass(frozen=True)
class TaskContract:
    """Per-step decision contract an evolved heuristic must satisfy."""

    kind: str
    entry_point: str
    arity: int
    signature: str
    description: str
    direction: str  # objective direction of the underlying task


@dataclass(frozen=True)
class Solution:
    """Task-tagged solution payload.

    tsp_construct: tour as a permutation of city indices.
    bpp_online: bin index per item in arrival order (bins numbered by first use).
    mkp: indices of admitted items.
    pfsp: job permutation.
    """

    kind: str
    values: tuple[int, ...]


@dataclass
class InstanceTrace:
    """Decision log of one policy run on one instance."""

    instance: object
    decisions: list[int]
    objective: float
    aux: dict = field(default_factory=dict)


CONTRACTS: dict[str, TaskContract] = {
    "tsp_construct": TaskContract(
        kind="tsp_construct",
        entry_point="select_next_node",
        arity=4,
        signature=(
            "def select_next_node(current_node, destination_node, "
            "unvisited_nodes, distance_matrix):"
        ),
        description=(
            "Construct a closed traveling-salesman tour city by city. Starting from "
            "city 0, the function is called once per step with the current city, the "
            "city the tour must return to, the sorted list of unvisited city indices, "
            "and the full distance matrix (indexable as distance_matrix[i][j]). "
            "Return the index of the next city to visit; it must come from "
            "unvisited_nodes. Objective: minimize total tour length."
        ),
        direction="minimize",
    ),
    "bpp_online": TaskContract(
        kind="bpp_online",
        entry_point="score_bins",
        arity=2,
        signature="def score_bins(item, residuals):",
        description=(
            "Pack an online stream of items into unit-capacity bins. For each arriving "
            "item that fits in at least one open bin, the function receives the item "
            "size and the residual capacities of the feasible bins (in bin order) and "
            "returns one score per feasible bin; the highest score wins (ties go to "
            "the lowest bin index). When no bin fits, a new bin is opened without "
            "calling the function. Objective: minimize the number of bins used."
        ),
        direction="minimize",
    ),
    "mkp": TaskContract(
        kind="mkp",
        entry_point="item_priority",
        arity=5,
        signature="def item_priority(values, weights, capacities, remaining, candidates):",
        description=(
            "Select items under multiple knapsack constraints. Each round the function "
            "receives the item values, the constraint-by-item weight matrix, the "
            "original capacity and the remaining capacity per constraint, and the "
            "indices of items that still fit; it returns one priority per candidate "
            "index. The highest-priority item is admitted (ties go to the lowest "
            "index) and the loop repeats until no item fits. Objective: maximize "
            "total admitted value."
        ),
        direction="maximize",
    ),
    "pfsp": TaskContract(
        kind="pfsp",
        entry_point="job_priority",
        arity=3,
        signature="def job_priority(processing_times, scheduled, unscheduled):",
        description=(
            "Build a permutation flow-shop schedule job by job. Each step the function "
            "receives the jobs-by-machines processing-time matrix, the jobs scheduled "
            "so far, and the sorted list of unscheduled job indices; it returns one "
            "priority per unscheduled job and the highest is appended (ties go to the "
            "lowest job index). Objective: minimize makespan."
        ),
        direction="minimize",
    ),
}

BASELINES: dict[str, tuple[str, ...]] = {
    "tsp_construct": ("nearest_neighbor",),
    "bpp_online": ("best_fit", "first_fit"),
    "mkp": ("greedy_density",),
    "pfsp": ("neh", "gupta"),
}


def contract_for(kind: str) -> TaskContract:
    try:
        return CONTRACTS[kind]
    except KeyError:
        raise ConfigError(f"unknown task kind {kind!r}") from None


def _module_for(kind: str):
    from heurevo.tasks import bpp, mkp, pfsp, tsp

    try:
        return {"tsp_construct": tsp, "bpp_online": bpp, "mkp": mkp, "pfsp": pfsp}[kind]
    except KeyError:
        raise ConfigError(f"unknown task kind {kind!r}") from None


def generate_instance(kind: str, params: dict, seed: int):
    return _module_for(kind).generate(seed=seed, **params)


def parse_instance(kind: str, text: str, name: str = ""):
    if kind == "tsp_construct":
        return _module_for(kind).parse_tsplib(text)
    if kind == "pfsp":
        return _module_for(kind).parse_taillard(text, name=name)
    raise ConfigError(f"no file format defined for task kind {kind!r}")


def evaluate_solution(kind: str, instance, sol: Solution):
    if sol.kind != kind:
        raise FeasibilityError(f"solution is for {sol.kind!r}, instance is {kind!r}")
    return _module_for(kind).evaluate(instance, sol.values)


def reference_bound(kind: str, instance) -> float:
    return _module_for(kind).reference(instance)


def run_baseline(kind: str, name: str, instance) -> Solution:
    module = _module_for(kind)
    if name not in BASELINES[kind]:
        raise ConfigError(f"unknown baseline {name!r} for task {kind!r}")
    return getattr(module, name)(instance)


def run_policy(kind: str, instance, policy) -> InstanceTrace:
    """Drive the task's construction loop with a per-step decision callable."""
    return _module_for(kind).drive(instance, policy)


def instance_payload(kind: str, instance) -> dict:
    """JSON-safe instance encoding used by the sandbox wire protocol."""
    return _module_for(kind).to_payload(instance)
