"""Permutation flow-shop scheduling: Taillard-format parsing, makespan
evaluation, and the NEH / Gupta constructive baselines."""
from __future__ import annotations

from dataclasses import dataclass

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
class PfspInstance:
    ptimes: np.ndarray  # (jobs, machines) float64, all > 0
    reference: float | None = None
    name: str = ""

    def __post_init__(self):
        self.ptimes = np.ascontiguousarray(self.ptimes, dtype=np.float64)
        if self.ptimes.ndim != 2 or self.ptimes.size == 0:
            raise ValueError("processing times must be a jobs-by-machines matrix")
        if (self.ptimes <= 0).any():
            raise ValueError("all processing times must be positive")

    @property
    def n_jobs(self) -> int:
        return int(self.ptimes.shape[0])

    @property
    def n_machines(self) -> int:
        return int(self.ptimes.shape[1])


def generate(jobs: int, machines: int, seed: int) -> PfspInstance:
    """Uniform integer processing times on [1, 99] (the Taillard convention)."""
    if jobs < 1 or machines < 1:
        raise ValueError("jobs and machines must be >= 1")
    rng = np.random.default_rng(seed)
    ptimes = rng.integers(1, 100, size=(jobs, machines)).astype(np.float64)
    return PfspInstance(ptimes=ptimes, name=f"uniform-{jobs}x{machines}-s{seed}")


def parse_taillard(text: str, name: str = "") -> PfspInstance:
    """Parse the standard Taillard flow-shop layout: a header line starting
    with the job and machine counts, then a machine-major time matrix
    (one row per machine, wrapped lines allowed)."""
    tokens: list[tuple[str, int]] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.lower().startswith("number of jobs"):
            continue
        for tok in stripped.split():
            tokens.append((tok, lineno))
    if len(tokens) < 2:
        raise TaskParseError("missing job/machine counts")
    try:
        jobs = int(tokens[0][0])
        machines = int(tokens[1][0])
    except ValueError:
        raise TaskParseError("job/machine counts must be integers", line=tokens[0][1])
    if jobs < 1 or machines < 1:
        raise TaskParseError("job/machine counts must be positive", line=tokens[0][1])
    # the header may carry extra fields (seed, bounds); the matrix is the
    # final jobs*machines numbers
    need = jobs * machines
    data = tokens[len(tokens) - need:]
    if len(tokens) - 2 < need:
        raise TaskParseError(
            f"expected {need} processing times, found {len(tokens) - 2}",
            line=tokens[-1][1])
    try:
        flat = [float(tok) for tok, _ in data]
    except ValueError as exc:
        raise TaskParseError(f"bad processing time: {exc}", line=data[0][1])
    matrix = np.asarray(flat, dtype=np.float64).reshape(machines, jobs).T
    return PfspInstance(ptimes=matrix, name=name)


def makespan(instance: PfspInstance, order) -> float:
    return kernels.makespan(instance.ptimes, np.asarray(order, dtype=np.int64))


def evaluate(instance: PfspInstance, schedule) -> float:
    schedule = [int(j) for j in schedule]
    if sorted(schedule) != list(range(instance.n_jobs)):
        raise FeasibilityError("schedule must be a permutation of all jobs")
    return makespan(instance, schedule)


def reference(instance: PfspInstance) -> float:
    if instance.reference is None:
        raise ReferenceUnavailableError(f"no stored reference for {instance.name or 'instance'}")
    return float(instance.reference)


def neh(instance: PfspInstance) -> Solution:
    """NEH: order jobs by descending total work, then best-position insertion
    (earliest position wins ties)."""
    totals = instance.ptimes.sum(axis=1)
    order = sorted(range(instance.n_jobs), key=lambda j: (-totals[j], j))
    seq: list[int] = [order[0]]
    for job in order[1:]:
        best_pos, best_make = 0, None
        for pos in range(len(seq) + 1):
            trial = seq[:pos] + [job] + seq[pos:]
            make = makespan(instance, trial)
            if best_make is None or make < best_make:
                best_pos, best_make = pos, make
        seq.insert(best_pos, job)
    return Solution(kind="pfsp", values=tuple(seq))


def gupta_index(instance: PfspInstance, job: int) -> float:
    """Gupta slope index: sign / min adjacent-machine time sum.

    Plain sequential arithmetic so the guest-side fixture reproduces it
    bit for bit.
    """
    p = instance.ptimes
    m = instance.n_machines
    if m == 1:
        return float(-p[job, 0])
    sign = 1.0 if p[job, 0] < p[job, m - 1] else -1.0
    smallest = None
    for k in range(m - 1):
        pair = float(p[job, k]) + float(p[job, k + 1])
        if smallest is None or pair < smallest:
            smallest = pair
    return sign / smallest


def gupta(instance: PfspInstance) -> Solution:
    order = sorted(range(instance.n_jobs),
                   key=lambda j: (-gupta_index(instance, j), j))
    return Solution(kind="pfsp", values=tuple(order))


def brute_force(instance: PfspInstance) -> tuple[float, tuple[int, ...]]:
    """Exact optimum over all job permutations; tests only."""
    import itertools

    best_make, best_order = float("inf"), None
    for perm in itertools.permutations(range(instance.n_jobs)):
        make = makespan(instance, perm)
        if make < best_make:
            best_make, best_order = make, perm
    return best_make, best_order


def drive(instance: PfspInstance, policy) -> InstanceTrace:
    """Dispatch loop: append the highest-priority unscheduled job each step."""
    ptimes = [[float(x) for x in row] for row in instance.ptimes]
    scheduled: list[int] = []
    unscheduled = list(range(instance.n_jobs))
    for step in range(instance.n_jobs):
        scores = policy(ptimes, list(scheduled), list(unscheduled))
        try:
            scores = [float(s) for s in scores]
        except (TypeError, ValueError):
            raise InfeasibleDecisionError("job priorities must be numeric", step)
        if len(scores) != len(unscheduled):
            raise InfeasibleDecisionError(
                f"expected {len(unscheduled)} priorities, got {len(scores)}", step)
        pick = 0
        for j in range(1, len(scores)):
            if scores[j] > scores[pick]:
                pick = j
        job = unscheduled.pop(pick)
        scheduled.append(job)
    return InstanceTrace(instance=instance, decisions=list(scheduled),
                         objective=makespan(instance, scheduled))


def to_payload(instance: PfspInstance) -> dict:
    return {
        "kind": "pfsp",
        "ptimes": [[float(x) for x in row] for row in instance.ptimes],
    }
