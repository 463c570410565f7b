"""Behavior descriptors: six static program-structure features extracted from
candidate source plus five task-specific runtime statistics recomputed from
decision logs, normalized per task into [0,1]^11.

Vector layout: coordinates 0-4 are the runtime statistics, 5-10 the static
features. Runtime statistics are recomputed host-side from (instance,
decisions) so in-process and subprocess sandboxes place candidates in
identical cells.
"""
from __future__ import annotations

import ast
import builtins
import math
from dataclasses import dataclass

import numpy as np

BEHAVIOR_DIM = 11

STATIC_NAMES = (
    "control_flow_depth",
    "branch_density",
    "loop_count",
    "helper_usage",
    "vectorization_density",
    "op_complexity",
)

RUNTIME_NAMES = {
    "tsp_construct": ("nearest_pick_rate", "turn_angle_std", "detour_rate",
                      "edge_var", "greedy_myopia"),
    "bpp_online": ("fill_mean", "frag_rate", "closure_rate",
                   "residual_std", "early_bin_bias"),
    "mkp": ("density_rank_corr", "slack_mean", "slack_min",
            "admit_rate", "util_std"),
    "pfsp": ("idle_concentration", "front_loading", "bottleneck_share",
             "idle_std", "wait_ratio"),
}

# Bulk-array call vocabulary used as a cheap, deterministic proxy for
# vectorized code; callers may pass their own set.
ARRAY_OP_NAMES = frozenset({
    "array", "asarray", "arange", "linspace", "zeros", "ones", "full",
    "argmin", "argmax", "minimum", "maximum", "sum", "prod", "mean", "std",
    "var", "median", "dot", "matmul", "einsum", "cumsum", "cumprod", "sort",
    "argsort", "searchsorted", "partition", "argpartition", "where", "clip",
    "abs", "sqrt", "exp", "log", "power", "add", "subtract", "multiply",
    "divide", "norm", "outer", "inner", "take", "nonzero", "count_nonzero",
    "concatenate", "stack", "vstack", "hstack", "reshape", "repeat", "tile",
})

_BUILTIN_NAMES = frozenset(dir(builtins))
_DEPTH_NODES = (ast.FunctionDef, ast.AsyncFunctionDef, ast.If, ast.For,
                ast.AsyncFor, ast.While)


class FeatureExtractionError(ValueError):
    """Candidate source could not be analyzed."""


@dataclass(frozen=True)
class StaticFeatures:
    control_flow_depth: int
    branch_density: float
    loop_count: int
    helper_usage: int
    vectorization_density: float
    op_complexity: float

    def as_vector(self) -> list[float]:
        return [float(self.control_flow_depth), self.branch_density,
                float(self.loop_count), float(self.helper_usage),
                self.vectorization_density, self.op_complexity]


@dataclass(frozen=True)
class RuntimeFeatures:
    kind: str
    values: tuple[float, float, float, float, float]


def _call_name(node: ast.Call) -> str | None:
    func = node.func
    if isinstance(func, ast.Name):
        return func.id
    if isinstance(func, ast.Attribute):
        return func.attr
    return None


def static_features(source: str, array_ops=ARRAY_OP_NAMES, entry_point: str | None = None) -> StaticFeatures:
    """Deterministic syntax-tree metrics of a candidate program.

    Depth counts nesting of function/branch/loop constructs; helper usage
    counts non-entry function definitions plus distinct non-builtin call
    targets; vectorization counts calls into the bulk-array vocabulary.
    """
    try:
        tree = ast.parse(source)
    except SyntaxError as exc:
        raise FeatureExtractionError(f"source does not parse: {exc}") from exc

    statements = 0
    branches = 0
    loops = 0
    operators = 0
    calls = 0
    array_calls = 0
    call_targets: set[str] = set()
    func_defs: list[str] = []

    for node in ast.walk(tree):
        if isinstance(node, ast.stmt):
            statements += 1
        if isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef)):
            func_defs.append(node.name)
        if isinstance(node, (ast.If, ast.IfExp)):
            branches += 1
        elif isinstance(node, (ast.For, ast.AsyncFor, ast.While)):
            loops += 1
        elif isinstance(node, (ast.BinOp, ast.UnaryOp, ast.AugAssign)):
            operators += 1
        elif isinstance(node, ast.BoolOp):
            operators += len(node.values) - 1
        elif isinstance(node, ast.Compare):
            operators += len(node.ops)
        elif isinstance(node, ast.Call):
            calls += 1
            name = _call_name(node)
            if name is not None:
                if name in array_ops:
                    array_calls += 1
                if name not in _BUILTIN_NAMES:
                    call_targets.add(name)

    def depth(node, current=0):
        bump = current + 1 if isinstance(node, _DEPTH_NODES) else current
        best = bump
        for child in ast.iter_child_nodes(node):
            best = max(best, depth(child, bump))
        return best

    if entry_point is None:
        entry_point = func_defs[0] if func_defs else ""
    helpers = sum(1 for name in func_defs if name != entry_point)
    stmt_div = max(1, statements)
    ops_div = max(1, operators + calls)
    return StaticFeatures(
        control_flow_depth=depth(tree),
        branch_density=branches / stmt_div,
        loop_count=loops,
        helper_usage=helpers + len(call_targets),
        vectorization_density=array_calls / ops_div,
        op_complexity=operators / stmt_div,
    )


def _mean(xs) -> float:
    xs = list(xs)
    return sum(xs) / len(xs) if xs else 0.0


def _std(xs) -> float:
    xs = list(xs)
    if len(xs) < 2:
        return 0.0
    mu = _mean(xs)
    return math.sqrt(sum((x - mu) ** 2 for x in xs) / len(xs))


def _tsp_stats(instance, decisions) -> list[float]:
    dist = instance.distance_matrix()
    coords = instance.coords
    tour = [0] + [int(c) for c in decisions]
    n = instance.n
    unvisited = set(range(1, n))
    nearest_hits = 0
    detours = []
    rank_scores = []
    for step, chosen in enumerate(tour[1:]):
        current = tour[step]
        dists = {j: dist[current, j] for j in unvisited}
        chosen_d = dists[chosen]
        nearest_d = min(dists.values())
        if chosen_d == nearest_d:
            nearest_hits += 1
        detours.append(chosen_d / nearest_d - 1.0 if nearest_d > 0 else 0.0)
        rank = sum(1 for d in dists.values() if d < chosen_d)
        denom = len(dists) - 1
        rank_scores.append(rank / denom if denom > 0 else 0.0)
        unvisited.discard(chosen)
    steps = max(1, len(tour) - 1)

    angles = []
    for i in range(1, len(tour) - 1):
        a, b, c = coords[tour[i - 1]], coords[tour[i]], coords[tour[i + 1]]
        v1, v2 = b - a, c - b
        n1, n2 = math.hypot(*v1), math.hypot(*v2)
        if n1 > 0 and n2 > 0:
            cosang = max(-1.0, min(1.0, float(np.dot(v1, v2)) / (n1 * n2)))
            angles.append(math.acos(cosang))

    edges = [float(dist[tour[i], tour[(i + 1) % n]]) for i in range(n)]
    mean_edge = _mean(edges)
    edge_cv = _std(edges) / mean_edge if mean_edge > 0 else 0.0
    return [
        nearest_hits / steps,
        _std(angles),
        _mean(detours),
        edge_cv,
        1.0 - _mean(rank_scores),
    ]


def _bpp_stats(instance, decisions) -> list[float]:
    cap = instance.capacity
    residuals: list[int] = []
    choice_bias = []
    for i, chosen in enumerate(decisions):
        size = int(instance.items[i])
        feasible = [b for b, r in enumerate(residuals) if r >= size]
        if chosen == len(residuals):
            residuals.append(cap - size)
            continue
        pos = feasible.index(chosen)
        if len(feasible) > 1:
            choice_bias.append(pos / (len(feasible) - 1))
        else:
            choice_bias.append(0.0)
        residuals[chosen] -= size
    bins = max(1, len(residuals))
    fills = [(cap - r) / cap for r in residuals]
    frag = sum(1 for r in residuals if 0 < r <= 0.1 * cap) / bins
    closure = sum(1 for r in residuals if r == 0) / bins
    return [
        _mean(fills),
        frag,
        closure,
        _std(residuals) / cap,
        _mean(choice_bias),
    ]


def _spearman(xs, ys) -> float:
    n = len(xs)
    if n < 2:
        return 1.0
    sx, sy = _std(xs), _std(ys)
    if sx == 0 or sy == 0:
        return 1.0
    mx, my = _mean(xs), _mean(ys)
    cov = sum((x - mx) * (y - my) for x, y in zip(xs, ys)) / n
    return cov / (sx * sy)


def _mkp_stats(instance, decisions) -> list[float]:
    from heurevo.tasks.mkp import densities

    m = instance.n_constraints
    dens = densities(instance)
    admitted = [int(j) for j in decisions]
    residual = [int(c) for c in instance.capacities]
    for j in admitted:
        for i in range(m):
            residual[i] -= int(instance.weights[i, j])
    slack = [residual[i] / int(instance.capacities[i]) for i in range(m)]
    util = [1.0 - s for s in slack]
    if admitted:
        density_rank = {j: r for r, j in enumerate(
            sorted(admitted, key=lambda j: (-dens[j], j)))}
        corr = _spearman(list(range(len(admitted))),
                         [density_rank[j] for j in admitted])
    else:
        corr = 1.0
    return [
        corr,
        _mean(slack),
        min(slack),
        len(admitted) / instance.n_items,
        _std(util),
    ]


def _pfsp_stats(instance, decisions) -> list[float]:
    p = instance.ptimes
    order = [int(j) for j in decisions]
    n, m = instance.n_jobs, instance.n_machines
    comp = np.zeros((n, m))
    for i, j in enumerate(order):
        for k in range(m):
            prev_job = comp[i - 1, k] if i > 0 else 0.0
            prev_mach = comp[i, k - 1] if k > 0 else 0.0
            comp[i, k] = max(prev_job, prev_mach) + p[j, k]
    make = float(comp[-1, -1])
    idles = [float(comp[-1, k] - sum(p[j, k] for j in order)) for k in range(m)]
    total_idle = sum(idles)
    totals = p.sum(axis=1)
    k_short = max(1, int(n * 0.25))
    shortest = sorted(range(n), key=lambda j: (totals[j], j))[:k_short]
    positions = {j: i for i, j in enumerate(order)}
    front = _mean([positions[j] / (n - 1) if n > 1 else 0.0 for j in shortest])
    waits = [float(comp[i, m - 1] - p[order[i]].sum()) for i in range(n)]
    return [
        max(idles) / total_idle if total_idle > 0 else 0.0,
        front,
        float(p.sum(axis=0).max()) / make,
        _std(idles) / make,
        _mean(waits) / make,
    ]


_RUNTIME_FN = {
    "tsp_construct": _tsp_stats,
    "bpp_online": _bpp_stats,
    "mkp": _mkp_stats,
    "pfsp": _pfsp_stats,
}


_REQUIRED_INSTANCE_ATTR = {
    "tsp_construct": "coords",
    "bpp_online": "items",
    "mkp": "weights",
    "pfsp": "ptimes",
}


def runtime_features(task_kind: str, traces) -> RuntimeFeatures:
    """Five task-specific statistics, averaged over per-instance traces."""
    if task_kind not in _RUNTIME_FN:
        raise ValueError(f"unknown task kind {task_kind!r}")
    traces = list(traces)
    if not traces:
        raise ValueError("need at least one instance trace")
    for t in traces:
        if not hasattr(t.instance, _REQUIRED_INSTANCE_ATTR[task_kind]):
            raise ValueError(
                f"trace instance {type(t.instance).__name__} does not belong to "
                f"task {task_kind!r}")
    fn = _RUNTIME_FN[task_kind]
    rows = [fn(t.instance, t.decisions) for t in traces]
    means = [_mean(col) for col in zip(*rows)]
    return RuntimeFeatures(kind=task_kind, values=tuple(means))


def behavior_vector(runtime: RuntimeFeatures, static: StaticFeatures) -> list[float]:
    return list(runtime.values) + static.as_vector()


def coordinate_names(task_kind: str) -> tuple[str, ...]:
    return RUNTIME_NAMES[task_kind] + STATIC_NAMES


@dataclass
class NormalizationBounds:
    mins: np.ndarray | None = None
    maxs: np.ndarray | None = None
    frozen: bool = False

    @property
    def initialized(self) -> bool:
        return self.mins is not None

    def copy(self) -> "NormalizationBounds":
        return NormalizationBounds(
            mins=None if self.mins is None else self.mins.copy(),
            maxs=None if self.maxs is None else self.maxs.copy(),
            frozen=self.frozen,
        )


def normalize(raw, bounds: NormalizationBounds) -> list[float]:
    """Per-coordinate min-max into [0,1], clamped; degenerate coords map to 0.5."""
    if not bounds.initialized:
        raise ValueError("normalization bounds are not initialized")
    raw = np.asarray(raw, dtype=np.float64)
    if raw.shape != bounds.mins.shape:
        raise ValueError(f"raw vector has shape {raw.shape}, bounds {bounds.mins.shape}")
    out = []
    for x, lo, hi in zip(raw, bounds.mins, bounds.maxs):
        if hi == lo:
            out.append(0.5)
        elif x <= lo:
            out.append(0.0)
        elif x >= hi:
            out.append(1.0)
        else:
            out.append(float((x - lo) / (hi - lo)))
    return out


def update_or_freeze_bounds(bounds: NormalizationBounds, batch, generation: int) -> NormalizationBounds:
    """Expand bounds over generations 0 and 1, freeze at the end of
    generation 1, and pass frozen bounds through untouched."""
    if bounds.frozen or generation >= 2:
        return bounds
    new = bounds.copy()
    vectors = [np.asarray(v, dtype=np.float64) for v in batch]
    for v in vectors:
        if new.mins is None:
            new.mins, new.maxs = v.copy(), v.copy()
        else:
            new.mins = np.minimum(new.mins, v)
            new.maxs = np.maximum(new.maxs, v)
    if generation >= 1:
        new.frozen = True
    return new
