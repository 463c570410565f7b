"""Guest-side sandbox harness.

One process serves one candidate heuristic: the host sends handshake / load /
run_instance / shutdown requests as JSON lines on stdin and reads exactly one
JSON-line response per request from stdout. Nothing else is ever written to
stdout (guest print() goes to stderr); the host owns hang handling via its
watchdog.

The module is deliberately standalone: it shares only the wire protocol with
the host engine, and its task drivers must reproduce the host baselines
decision for decision (the cross-process parity tests pin this).
"""
from __future__ import annotations

import ast
import builtins
import json
import math
import sys
import time

PROTOCOL_VERSION = 1

ALLOWED_IMPORTS = frozenset({
    "math", "numpy", "itertools", "functools", "heapq", "bisect",
    "collections", "operator", "statistics",
})

# file/network/process/thread primitives and nondeterminism sources
DENIED_BUILTINS = frozenset({
    "open", "exec", "eval", "compile", "__import__", "input", "breakpoint",
    "globals", "locals", "vars", "exit", "quit",
})

ENTRY_ARITY = {
    "tsp_construct": ("select_next_node", 4),
    "bpp_online": ("score_bins", 2),
    "mkp": ("item_priority", 5),
    "pfsp": ("job_priority", 3),
}


class GuestError(Exception):
    def __init__(self, category: str, message: str):
        self.category = category
        self.message = message
        super().__init__(message)


def _restricted_builtins() -> dict:
    allowed = {}
    for name in dir(builtins):
        if name.startswith("_") or name in DENIED_BUILTINS:
            continue
        allowed[name] = getattr(builtins, name)

    def guarded_import(name, globals=None, locals=None, fromlist=(), level=0):
        if name.split(".")[0] not in ALLOWED_IMPORTS:
            raise ImportError(f"import of {name!r} is denied in the sandbox")
        return __import__(name, globals, locals, fromlist, level)

    def stderr_print(*args, **kwargs):
        kwargs.pop("file", None)
        print(*args, file=sys.stderr, **kwargs)

    allowed["__import__"] = guarded_import
    allowed["print"] = stderr_print  # stdout belongs to the protocol
    return allowed


def _static_check(source: str) -> None:
    try:
        tree = ast.parse(source)
    except SyntaxError as exc:
        raise GuestError("load", f"syntax error: {exc.msg} (line {exc.lineno})")
    except ValueError as exc:
        raise GuestError("load", f"syntax error: {exc}")
    for node in ast.walk(tree):
        if isinstance(node, ast.Import):
            for alias in node.names:
                if alias.name.split(".")[0] not in ALLOWED_IMPORTS:
                    raise GuestError("load", f"deny-list import {alias.name!r}")
        elif isinstance(node, ast.ImportFrom):
            if (node.module or "").split(".")[0] not in ALLOWED_IMPORTS:
                raise GuestError("load", f"deny-list import {node.module!r}")
        elif isinstance(node, ast.Name) and node.id in DENIED_BUILTINS:
            raise GuestError("load", f"deny-list name {node.id!r}")


def load_candidate(source: str, entry_point: str, task_kind: str):
    if task_kind not in ENTRY_ARITY:
        raise GuestError("load", f"unknown task kind {task_kind!r}")
    expected_name, expected_arity = ENTRY_ARITY[task_kind]
    if entry_point != expected_name:
        raise GuestError("load", f"entry point for {task_kind} must be {expected_name!r}")
    _static_check(source)
    namespace = {"__builtins__": _restricted_builtins()}
    try:
        exec(compile(source, "<candidate>", "exec"), namespace)
    except Exception as exc:  # noqa: BLE001 - any load-time failure is a load error
        raise GuestError("load", f"execution of candidate module failed: {exc!r}")
    fn = namespace.get(entry_point)
    if not callable(fn):
        raise GuestError("load", f"entry point {entry_point!r} is missing or not callable")
    code = getattr(fn, "__code__", None)
    if code is None or code.co_argcount != expected_arity or \
            code.co_flags & 0x0C:  # *args / **kwargs
        raise GuestError(
            "load",
            f"entry point must take exactly {expected_arity} positional arguments")
    return fn


# ---------------------------------------------------------------------------
# Task drivers (must mirror the host-side reference loops exactly)
# ---------------------------------------------------------------------------


def _scores(policy, args, expect, step):
    try:
        raw = policy(*args)
    except Exception as exc:  # noqa: BLE001 - candidate runtime failure
        raise GuestError("crash", f"step {step}: {type(exc).__name__}: {exc}")
    try:
        scores = [float(s) for s in raw]
    except (TypeError, ValueError):
        raise GuestError("infeasible_decision", f"step {step}: scores must be numeric")
    if len(scores) != expect:
        raise GuestError("infeasible_decision",
                         f"step {step}: expected {expect} scores, got {len(scores)}")
    if any(math.isnan(s) for s in scores):
        raise GuestError("infeasible_decision", f"step {step}: scores must not be NaN")
    pick = 0
    for j in range(1, len(scores)):
        if scores[j] > scores[pick]:
            pick = j
    return pick


def _drive_tsp(payload, policy):
    coords = payload["coords"]
    rounded = bool(payload.get("rounded", False))
    n = len(coords)
    dist = [[0.0] * n for _ in range(n)]
    for i in range(n):
        xi, yi = coords[i]
        for j in range(i + 1, n):
            dx = xi - coords[j][0]
            dy = yi - coords[j][1]
            d = math.sqrt(dx * dx + dy * dy)
            if rounded:
                d = math.floor(d + 0.5)
            dist[i][j] = d
            dist[j][i] = d
    current = 0
    unvisited = list(range(1, n))
    decisions = []
    for step in range(n - 1):
        try:
            choice = policy(current, 0, list(unvisited), dist)
        except Exception as exc:  # noqa: BLE001
            raise GuestError("crash", f"step {step}: {type(exc).__name__}: {exc}")
        try:
            choice = int(choice)
        except (TypeError, ValueError):
            raise GuestError("infeasible_decision",
                             f"step {step}: non-integer city {choice!r}")
        if choice not in unvisited:
            raise GuestError("infeasible_decision",
                             f"step {step}: city {choice} is not unvisited")
        unvisited.remove(choice)
        decisions.append(choice)
        current = choice
    tour = [0] + decisions
    objective = 0.0
    for i in range(n):
        objective += dist[tour[i]][tour[(i + 1) % n]]
    return objective, decisions, {}


def _drive_bpp(payload, policy):
    capacity = int(payload["capacity"])
    items = [int(x) for x in payload["items"]]
    residuals: list[int] = []
    decisions = []
    for step, size in enumerate(items):
        feasible = [b for b, r in enumerate(residuals) if r >= size]
        if not feasible:
            residuals.append(capacity - size)
            decisions.append(len(residuals) - 1)
            continue
        pick = _scores(policy, (size, [residuals[b] for b in feasible]),
                       len(feasible), step)
        chosen = feasible[pick]
        residuals[chosen] -= size
        decisions.append(chosen)
    return float(len(residuals)), decisions, {}


def _drive_mkp(payload, policy):
    values = [int(v) for v in payload["values"]]
    weights = [[int(w) for w in row] for row in payload["weights"]]
    capacities = [int(c) for c in payload["capacities"]]
    m = len(capacities)
    residual = list(capacities)
    taken = set()
    decisions = []
    step = 0
    while True:
        feasible = [j for j in range(len(values))
                    if j not in taken and all(weights[i][j] <= residual[i] for i in range(m))]
        if not feasible:
            break
        pick = _scores(policy,
                       (values, weights, list(capacities), list(residual), feasible),
                       len(feasible), step)
        chosen = feasible[pick]
        taken.add(chosen)
        decisions.append(chosen)
        for i in range(m):
            residual[i] -= weights[i][chosen]
        step += 1
    objective = float(sum(values[j] for j in decisions))
    return objective, decisions, {}


def _drive_pfsp(payload, policy):
    ptimes = [[float(x) for x in row] for row in payload["ptimes"]]
    n = len(ptimes)
    m = len(ptimes[0])
    scheduled: list[int] = []
    unscheduled = list(range(n))
    for step in range(n):
        pick = _scores(policy, (ptimes, list(scheduled), list(unscheduled)),
                       len(unscheduled), step)
        scheduled.append(unscheduled.pop(pick))
    comp = [0.0] * m
    for j in scheduled:
        prev = 0.0
        for k in range(m):
            c = comp[k]
            if prev > c:
                c = prev
            prev = c + ptimes[j][k]
            comp[k] = prev
    return comp[m - 1], scheduled, {}


DRIVERS = {
    "tsp_construct": _drive_tsp,
    "bpp_online": _drive_bpp,
    "mkp": _drive_mkp,
    "pfsp": _drive_pfsp,
}


def run_instance(task_kind: str, instance_payload: dict, policy):
    driver = DRIVERS.get(task_kind)
    if driver is None:
        raise GuestError("crash", f"no driver for task kind {task_kind!r}")
    start = time.perf_counter()
    objective, decisions, aux = driver(instance_payload, policy)
    return {
        "objective": objective,
        "decisions": decisions,
        "aux": aux,
        "guest_seconds": time.perf_counter() - start,
    }


# ---------------------------------------------------------------------------
# Protocol loop
# ---------------------------------------------------------------------------


def _apply_memory_cap(cap_bytes: int) -> None:
    try:
        import resource

        resource.setrlimit(resource.RLIMIT_AS, (cap_bytes, cap_bytes))
    except (ImportError, ValueError, OSError) as exc:
        raise GuestError("protocol", f"cannot apply memory cap: {exc}")


def serve(stdin=None, stdout=None) -> int:
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout

    def respond(req_id, status, payload):
        stdout.write(json.dumps({"id": req_id, "status": status, "payload": payload}) + "\n")
        stdout.flush()

    policy = None
    task_kind = None
    last_id = -1
    handshaken = False
    for line in stdin:
        if not line.strip():
            continue
        try:
            request = json.loads(line)
            msg = request["msg"]
            req_id = int(request["id"])
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            respond(-1, "error", {"category": "protocol", "message": f"bad request: {exc}"})
            continue
        if req_id <= last_id:
            respond(req_id, "error",
                    {"category": "protocol", "message": "request ids must increase"})
            continue
        last_id = req_id
        payload = request.get("payload") or {}
        try:
            if msg == "handshake":
                if payload.get("version") != PROTOCOL_VERSION:
                    raise GuestError("protocol",
                                     f"unsupported protocol version {payload.get('version')!r}")
                if payload.get("memory_cap_bytes"):
                    _apply_memory_cap(int(payload["memory_cap_bytes"]))
                handshaken = True
                respond(req_id, "ok", {"version": PROTOCOL_VERSION})
            elif msg == "load":
                if not handshaken:
                    raise GuestError("protocol", "load before handshake")
                task_kind = payload.get("task_kind", "")
                policy = load_candidate(payload.get("source", ""),
                                        payload.get("entry_point", ""), task_kind)
                respond(req_id, "ok", {})
            elif msg == "run_instance":
                if policy is None:
                    raise GuestError("protocol", "run_instance before load")
                kind = payload.get("driver", {}).get("task_kind", task_kind)
                respond(req_id, "ok", run_instance(kind, payload.get("instance", {}), policy))
            elif msg == "shutdown":
                respond(req_id, "ok", {})
                return 0
            else:
                raise GuestError("protocol", f"unknown message {msg!r}")
        except GuestError as exc:
            respond(req_id, "error", {"category": exc.category, "message": exc.message})
        except Exception as exc:  # noqa: BLE001 - never crash the protocol loop
            respond(req_id, "error",
                    {"category": "crash", "message": f"{type(exc).__name__}: {exc}"})
    return 0
