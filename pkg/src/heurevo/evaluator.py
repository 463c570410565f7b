"""Candidate evaluation: drives surviving heuristics over the training set in
isolated sandboxes, producing fitness, raw behavior vectors, and cost
accounting, with per-candidate failure containment.

Two sandbox backends share one interface: InProcessSandbox executes trusted
fixture/seed heuristics host-side in a restricted namespace (reference path
used by the test suite; it cannot preempt hangs), and SubprocessSandbox
speaks the line-delimited JSON protocol to an external runner process, one
process per candidate, with a kill-on-timeout watchdog.
"""
from __future__ import annotations

import json
import queue
import subprocess
import sys
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from heurevo import behavior
from heurevo.core import EvaluatedCandidate, Heuristic, aggregate_fitness, relative_gap
from heurevo.screen import ALLOWED_IMPORTS, DENY_CALLS
from heurevo.tasks import base as tasks

WATCHDOG_GRACE_SECONDS = 5.0


@dataclass
class EvalLimits:
    per_candidate_timeout_s: float = 60.0
    memory_cap_bytes: int | None = None
    n_proc: int = 12

    def __post_init__(self):
        if self.per_candidate_timeout_s <= 0 or self.n_proc < 1:
            raise ValueError("timeout must be > 0 and n_proc >= 1")


@dataclass
class EvalFailure:
    heuristic: Heuristic
    category: str  # timeout | crash | infeasible_decision | protocol_error
    message: str
    eval_seconds: float = 0.0


class SandboxError(RuntimeError):
    def __init__(self, category: str, message: str):
        self.category = category
        super().__init__(message)


def _restricted_builtins() -> dict:
    import builtins

    allowed = {}
    for name in dir(builtins):
        if name.startswith("_") or name in DENY_CALLS:
            continue
        allowed[name] = getattr(builtins, name)

    def guarded_import(name, globals=None, locals=None, fromlist=(), level=0):
        root = name.split(".")[0]
        if root not in ALLOWED_IMPORTS:
            raise ImportError(f"import of {name!r} is denied in the sandbox")
        return __import__(name, globals, locals, fromlist, level)

    allowed["__import__"] = guarded_import
    return allowed


def load_guest_callable(source: str, entry_point: str):
    """Compile candidate source in a restricted namespace and return the entry
    callable. Shared by the in-process sandbox and tests."""
    namespace = {"__builtins__": _restricted_builtins()}
    exec(compile(source, "<candidate>", "exec"), namespace)
    fn = namespace.get(entry_point)
    if not callable(fn):
        raise SandboxError("protocol_error", f"entry point {entry_point!r} is not callable")
    return fn


class InProcessSandbox:
    """Host-side reference execution of candidate code (no hang preemption)."""

    def run(self, source: str, contract: tasks.TaskContract, instances, limits: EvalLimits):
        try:
            fn = load_guest_callable(source, contract.entry_point)
        except SandboxError:
            raise
        except Exception as exc:  # noqa: BLE001 - candidate load failure
            raise SandboxError("crash", f"load failed: {exc!r}")
        traces = []
        for inst in instances:
            try:
                traces.append(tasks.run_policy(contract.kind, inst, fn))
            except tasks.InfeasibleDecisionError as exc:
                raise SandboxError("infeasible_decision", str(exc))
            except Exception as exc:  # noqa: BLE001 - candidate runtime failure
                raise SandboxError("crash", f"{type(exc).__name__}: {exc}")
        return traces


class SubprocessSandbox:
    """Client half of the sandbox wire protocol.

    Spawns one runner process per candidate, sends handshake / load /
    run_instance / shutdown requests as JSON lines on stdin, and reads one
    JSON-line response per request from stdout. The host watchdog kills the
    process when a response misses the per-candidate deadline.
    """

    PROTOCOL_VERSION = 1

    def __init__(self, command: list[str] | None = None):
        self.command = list(command) if command else [sys.executable, "-m", "sandbox_runner"]

    def run(self, source: str, contract: tasks.TaskContract, instances, limits: EvalLimits):
        deadline = time.monotonic() + limits.per_candidate_timeout_s
        proc = subprocess.Popen(
            self.command, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
            stderr=subprocess.DEVNULL, text=True)
        lines: queue.Queue = queue.Queue()

        def pump():
            for line in proc.stdout:
                lines.put(line)
            lines.put(None)

        reader = threading.Thread(target=pump, daemon=True)
        reader.start()
        next_id = 0

        def request(msg: str, payload: dict | None = None) -> dict:
            nonlocal next_id
            req_id = next_id
            next_id += 1
            record = {"msg": msg, "id": req_id}
            if payload is not None:
                record["payload"] = payload
            try:
                proc.stdin.write(json.dumps(record) + "\n")
                proc.stdin.flush()
            except (BrokenPipeError, OSError) as exc:
                raise SandboxError("crash", f"runner pipe closed: {exc}")
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise SandboxError("timeout", "per-candidate deadline expired")
            try:
                line = lines.get(timeout=remaining)
            except queue.Empty:
                raise SandboxError("timeout", f"no response to {msg!r} within deadline")
            if line is None:
                raise SandboxError("crash", "runner exited mid-conversation")
            try:
                resp = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SandboxError("protocol_error", f"bad response line: {exc}")
            if resp.get("id") != req_id:
                raise SandboxError("protocol_error",
                                   f"response id {resp.get('id')} != request id {req_id}")
            if resp.get("status") == "error":
                err = resp.get("payload", {})
                raise SandboxError(err.get("category", "crash"), err.get("message", "runner error"))
            return resp.get("payload", {})

        try:
            hello_payload = {"version": self.PROTOCOL_VERSION}
            if limits.memory_cap_bytes:
                hello_payload["memory_cap_bytes"] = int(limits.memory_cap_bytes)
            hello = request("handshake", hello_payload)
            if hello.get("version") != self.PROTOCOL_VERSION:
                raise SandboxError("protocol_error",
                                   f"runner speaks version {hello.get('version')!r}")
            request("load", {
                "source": source,
                "entry_point": contract.entry_point,
                "task_kind": contract.kind,
            })
            traces = []
            for inst in instances:
                payload = request("run_instance", {
                    "instance": tasks.instance_payload(contract.kind, inst),
                    "driver": {"task_kind": contract.kind},
                })
                traces.append(tasks.InstanceTrace(
                    instance=inst,
                    decisions=[int(d) for d in payload["decisions"]],
                    objective=float(payload["objective"]),
                    aux=payload.get("aux", {}),
                ))
            request("shutdown")
            proc.wait(timeout=WATCHDOG_GRACE_SECONDS)
            return traces
        finally:
            if proc.poll() is None:
                proc.kill()
                proc.wait()


def sandbox_for(name: str, runner_command=None):
    if name == "inprocess":
        return InProcessSandbox()
    if name == "subprocess":
        return SubprocessSandbox(runner_command)
    raise ValueError(f"unknown sandbox backend {name!r}")


def evaluate_candidate(heuristic: Heuristic, kind: str, train, limits: EvalLimits,
                       sandbox=None, references=None) -> EvaluatedCandidate | EvalFailure:
    """Run one candidate over the whole training set.

    Per-instance loss is the relative gap to the instance's reference bound,
    as a fraction; fitness is the mean. Failures come back as EvalFailure
    with a category, never as an exception.
    """
    sandbox = sandbox or InProcessSandbox()
    contract = tasks.contract_for(kind)
    if references is None:
        references = [tasks.reference_bound(kind, inst) for inst in train]
    start = time.perf_counter()
    try:
        traces = sandbox.run(heuristic.source, contract, train, limits)
        losses = [relative_gap(t.objective, ref) / 100.0
                  for t, ref in zip(traces, references)]
        fitness = aggregate_fitness(losses)
        static = behavior.static_features(heuristic.source, entry_point=contract.entry_point)
        runtime = behavior.runtime_features(kind, traces)
        raw = behavior.behavior_vector(runtime, static)
    except SandboxError as exc:
        return EvalFailure(heuristic, exc.category, str(exc),
                           eval_seconds=_elapsed_since(start))
    except Exception as exc:  # noqa: BLE001 - analysis failures are contained too
        return EvalFailure(heuristic, "protocol_error", f"{type(exc).__name__}: {exc}",
                           eval_seconds=_elapsed_since(start))
    return EvaluatedCandidate(
        heuristic=heuristic,
        fitness=fitness,
        behavior_raw=raw,
        eval_seconds=_elapsed_since(start),
    )


def _elapsed_since(start: float) -> float:
    return max(time.perf_counter() - start, 1e-9)


@dataclass
class BatchResult:
    evaluated: list[EvaluatedCandidate] = field(default_factory=list)
    failures: list[EvalFailure] = field(default_factory=list)


def evaluate_batch(batch, kind: str, train, limits: EvalLimits, sandbox=None) -> BatchResult:
    """Evaluate up to n_proc candidates concurrently, one sandbox each;
    results keep the original batch order regardless of completion order."""
    sandbox = sandbox or InProcessSandbox()
    references = [tasks.reference_bound(kind, inst) for inst in train]
    results: list = [None] * len(batch)
    if batch:
        with ThreadPoolExecutor(max_workers=limits.n_proc) as pool:
            futures = {
                pool.submit(evaluate_candidate, h, kind, train, limits, sandbox, references): i
                for i, h in enumerate(batch)
            }
            for future, i in futures.items():
                results[i] = future.result()
    out = BatchResult()
    for r in results:
        if isinstance(r, EvaluatedCandidate):
            out.evaluated.append(r)
        elif r is not None:
            out.failures.append(r)
    return out
