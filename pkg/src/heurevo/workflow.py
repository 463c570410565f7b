"""Outer evolutionary loop: seeded initialization, per-generation
retrieve/propose/generate/screen/evaluate/update steps, plateau early
stopping, budget enforcement, JSONL trace persistence, and resume."""
from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from heurevo import agents, behavior, screen
from heurevo.archive import (
    Archive,
    CentroidSet,
    archive_snapshot,
    assign_cell,
    build_centroids,
    retrieve_exemplars,
)
from heurevo.core import EvaluatedCandidate, FitnessScore, Heuristic, Population, top_n_select
from heurevo.evaluator import EvalLimits, evaluate_batch, sandbox_for
from heurevo.seeds import CLASSICAL_SEEDS, SEED_STRATEGY
from heurevo.tasks import base as tasks
from heurevo.tasks.manifest import load_manifest, training_instances

SNAPSHOT_SCHEMA = 1
TRACE_SCHEMA = 1

# Timing fields (and the environment-specific config echo, which carries
# absolute paths) are the only run-to-run nondeterminism in traces; canonical
# comparisons strip them.
VOLATILE_KEYS = frozenset({
    "latency_s", "eval_seconds", "wall_s", "wall_seconds_elapsed", "written_at",
    "config",
})


class BudgetExhaustedError(RuntimeError):
    pass


class InitializationError(RuntimeError):
    pass


class ResumeError(RuntimeError):
    pass


@dataclass
class RunConfig:
    task: str
    manifest: str
    generations: int = 30
    population_size: int = 10
    proposals_per_gen: int = 4
    retrieval_size: int = 2
    archive_capacity: int = 25
    n_centroids: int = 25
    behavior_dim: int = behavior.BEHAVIOR_DIM
    patience: int = 3
    min_improvement: float = 1e-4
    keep_ratio: float = 0.5
    n_proc: int = 12
    time_budget_s: float = 3600.0
    token_budget: int | None = None
    per_candidate_timeout_s: float = 60.0
    memory_cap_bytes: int | None = None
    seed: int = 0
    sandbox: str = "inprocess"
    runner_command: list[str] | None = None
    prompt_char_budget: int = agents.DEFAULT_PROMPT_CHAR_BUDGET
    backend: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.task not in tasks.TASK_KINDS:
            raise tasks.ConfigError(f"unknown task {self.task!r}")
        positive = {
            "generations": self.generations,
            "population_size": self.population_size,
            "proposals_per_gen": self.proposals_per_gen,
            "archive_capacity": self.archive_capacity,
            "n_centroids": self.n_centroids,
            "patience": self.patience,
            "min_improvement": self.min_improvement,
            "n_proc": self.n_proc,
            "time_budget_s": self.time_budget_s,
            "per_candidate_timeout_s": self.per_candidate_timeout_s,
        }
        for name, value in positive.items():
            if value <= 0:
                raise tasks.ConfigError(f"{name} must be positive, got {value!r}")
        if self.retrieval_size < 0:
            raise tasks.ConfigError("retrieval_size must be >= 0")
        if not 0 < self.keep_ratio <= 1:
            raise tasks.ConfigError("keep_ratio must lie in (0, 1]")

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            doc = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise tasks.ConfigError(f"cannot read config {path}: {exc}") from exc
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(doc) - known
        if unknown:
            raise tasks.ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "task" not in doc or "manifest" not in doc:
            raise tasks.ConfigError("config needs at least 'task' and 'manifest'")
        # paths in a config file are relative to the file, not the cwd
        if not Path(doc["manifest"]).is_absolute():
            doc["manifest"] = str((path.parent / doc["manifest"]).resolve())
        backend = doc.get("backend", {})
        if backend.get("kind") == "replay" and "fixtures" in backend \
                and not Path(backend["fixtures"]).is_absolute():
            backend["fixtures"] = str((path.parent / backend["fixtures"]).resolve())
        return cls(**doc)

    def to_json(self) -> dict:
        return asdict(self)


@dataclass
class BudgetLedger:
    tokens_in_total: int = 0
    tokens_out_total: int = 0
    api_queries: int = 0
    wall_seconds_elapsed: float = 0.0
    time_budget_s: float | None = None
    token_budget: int | None = None
    _started: float = field(default_factory=time.monotonic, repr=False)

    def wall_now(self) -> float:
        return self.wall_seconds_elapsed + (time.monotonic() - self._started)

    def check(self) -> None:
        if self.time_budget_s is not None and self.wall_now() >= self.time_budget_s:
            raise BudgetExhaustedError(f"wall-clock budget of {self.time_budget_s}s spent")
        if self.token_budget is not None and (
                self.tokens_in_total + self.tokens_out_total) >= self.token_budget:
            raise BudgetExhaustedError(f"token budget of {self.token_budget} spent")

    def record_call(self, completion) -> None:
        self.tokens_in_total += completion.tokens_in
        self.tokens_out_total += completion.tokens_out
        self.api_queries += 1

    def snapshot(self) -> dict:
        return {
            "tokens_in_total": self.tokens_in_total,
            "tokens_out_total": self.tokens_out_total,
            "api_queries": self.api_queries,
            "wall_seconds_elapsed": self.wall_now(),
        }


class TraceWriter:
    """Append-only JSONL event log; one flush per record so traces survive
    interruption at any point."""

    def __init__(self, path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)

    def write(self, record: dict) -> None:
        with self.path.open("a") as fh:
            fh.write(json.dumps(_json_safe(record), sort_keys=True) + "\n")


def _json_safe(value):
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        value = float(value)
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def strip_volatile(record):
    if isinstance(record, dict):
        return {k: strip_volatile(v) for k, v in record.items() if k not in VOLATILE_KEYS}
    if isinstance(record, list):
        return [strip_volatile(v) for v in record]
    return record


def canonical_trace_lines(trace_path) -> list[str]:
    """Deterministic projection of a trace: volatile timing fields removed."""
    lines = []
    for line in Path(trace_path).read_text().splitlines():
        if not line.strip():
            continue
        lines.append(json.dumps(strip_volatile(json.loads(line)), sort_keys=True))
    return lines


@dataclass
class RunState:
    config: RunConfig
    backend: object
    trace: TraceWriter
    train: list
    contract: tasks.TaskContract
    population: Population
    archive: Archive
    bounds: behavior.NormalizationBounds
    ledger: BudgetLedger
    history: list[float]
    fingerprints: set[str]
    generation: int = 0
    rng_state: dict | None = None
    out_dir: Path | None = None

    def sandbox(self):
        return sandbox_for(self.config.sandbox, self.config.runner_command)

    def limits(self) -> EvalLimits:
        return EvalLimits(per_candidate_timeout_s=self.config.per_candidate_timeout_s,
                          memory_cap_bytes=self.config.memory_cap_bytes,
                          n_proc=self.config.n_proc)


@dataclass
class RunResult:
    best: EvaluatedCandidate | None
    population: Population
    archive: Archive
    ledger: BudgetLedger
    trace_path: Path
    generations_run: int
    stop_reason: str


def build_backend(spec: dict):
    kind = spec.get("kind", "")
    if kind == "replay":
        if "fixtures" not in spec:
            raise tasks.ConfigError("replay backend needs a 'fixtures' path")
        return agents.ScriptedReplayBackend(spec["fixtures"])
    if kind == "http":
        missing = {"base_url", "model"} - set(spec)
        if missing:
            raise tasks.ConfigError(f"http backend config is missing {sorted(missing)}")
        return agents.HttpChatBackend(
            base_url=spec["base_url"],
            model=spec["model"],
            temperature=float(spec.get("temperature", 1.0)),
            api_key_env=spec.get("api_key_env", "HEUREVO_API_KEY"),
        )
    raise tasks.ConfigError(f"unknown backend kind {kind!r}")


# ---------------------------------------------------------------------------
# Candidate/trace record helpers
# ---------------------------------------------------------------------------


def _candidate_record(gen: int, cid: str, status: str, heuristic=None,
                      cand: EvaluatedCandidate | None = None, cell=None,
                      insert_outcome=None, tokens=(0, 0), message="") -> dict:
    record = {
        "event": "candidate",
        "gen": gen,
        "id": cid,
        "status": status,
        "tokens_in": tokens[0],
        "tokens_out": tokens[1],
    }
    if heuristic is not None:
        record["parent_ids"] = list(heuristic.parent_ids)
        record["strategy"] = heuristic.strategy_text
    if cand is not None:
        record.update({
            "loss": cand.fitness.loss,
            "behavior_raw": list(cand.behavior_raw),
            "behavior_norm": list(cand.behavior_norm) if cand.behavior_norm else None,
            "cell": cell,
            "insert_outcome": insert_outcome,
            "eval_seconds": cand.eval_seconds,
        })
    if message:
        record["message"] = message
    return record


def _llm_call_record(gen: int, role: str, completion, ledger: BudgetLedger,
                     truncated_blocks: int = 0) -> dict:
    return {
        "event": "llm_call",
        "gen": gen,
        "role": role,
        "tokens_in": completion.tokens_in,
        "tokens_out": completion.tokens_out,
        "backend": completion.backend_id,
        "query_index": ledger.api_queries,
        "latency_s": completion.latency_seconds,
        "truncated_blocks": truncated_blocks,
    }


def _generation_summary(state: RunState, evaluated: int, kept: int) -> dict:
    best = state.population.best()
    return {
        "event": "generation_summary",
        "gen": state.generation,
        "best_loss": state.history[-1],
        "best_id": best.heuristic.id if best else None,
        "pop_size": len(state.population),
        "archive_cells": len(state.archive.cells),
        "coverage": state.archive.coverage(),
        "evaluated": evaluated,
        "kept": kept,
        "queries_total": state.ledger.api_queries,
        "tokens_in_total": state.ledger.tokens_in_total,
        "tokens_out_total": state.ledger.tokens_out_total,
        "wall_s": state.ledger.wall_now(),
    }


# ---------------------------------------------------------------------------
# Initialization
# ---------------------------------------------------------------------------


def initialize(cfg: RunConfig, backend=None, out_dir=None) -> RunState:
    """Seed the population from backend completions (classical fallback when
    nothing valid comes back), evaluate it, and set up archive and bounds."""
    backend = backend or build_backend(cfg.backend)
    out_dir = Path(out_dir) if out_dir is not None else Path("runs") / f"{cfg.task}-s{cfg.seed}"
    out_dir.mkdir(parents=True, exist_ok=True)
    trace = TraceWriter(out_dir / "trace.jsonl")

    kind, entries = load_manifest(cfg.manifest)
    if kind != cfg.task:
        raise tasks.ConfigError(f"manifest task {kind!r} != config task {cfg.task!r}")
    train = training_instances(entries)
    contract = tasks.contract_for(cfg.task)

    ledger = BudgetLedger(time_budget_s=cfg.time_budget_s, token_budget=cfg.token_budget)
    trace.write({"event": "run_start", "schema": TRACE_SCHEMA, "task": cfg.task,
                 "config": cfg.to_json(), "n_train": len(train)})

    centroids = build_centroids(cfg.behavior_dim, cfg.n_centroids, cfg.seed)
    archive = Archive(centroids, capacity=cfg.archive_capacity)
    rng = np.random.default_rng(cfg.seed)

    batch: list[Heuristic] = []
    tokens_by_id: dict[str, tuple[int, int]] = {}
    discarded: list[dict] = []
    for i in range(cfg.population_size):
        prompt = agents.build_seed_prompt(contract, i)
        try:
            completion = agents.complete(backend, prompt, ledger)
        except (BudgetExhaustedError, agents.FixtureExhaustedError):
            break
        trace.write(_llm_call_record(0, "seed", completion, ledger))
        sid = f"seed-{i:02d}"
        tokens = (completion.tokens_in, completion.tokens_out)
        try:
            source = agents.extract_code(completion.text, contract)
        except agents.GenerationContractError as exc:
            discarded.append(_candidate_record(0, sid, "discarded:missing_entry_point",
                                               tokens=tokens, message=str(exc)))
            continue
        errors = screen.validate_contract(source, contract)
        if errors:
            discarded.append(_candidate_record(0, sid, "discarded:contract",
                                               tokens=tokens, message="; ".join(errors)))
            continue
        batch.append(Heuristic(id=sid, source=source, parent_ids=[], generation=0))
        tokens_by_id[sid] = tokens

    def classical_seed() -> Heuristic:
        return Heuristic(id="seed-classical", source=CLASSICAL_SEEDS[cfg.task],
                         strategy_text=SEED_STRATEGY[cfg.task], parent_ids=[], generation=0)

    used_fallback = False
    if not batch:
        used_fallback = True
        batch = [classical_seed()]

    limits = EvalLimits(per_candidate_timeout_s=cfg.per_candidate_timeout_s,
                        memory_cap_bytes=cfg.memory_cap_bytes, n_proc=cfg.n_proc)
    sandbox = sandbox_for(cfg.sandbox, cfg.runner_command)
    result = evaluate_batch(batch, cfg.task, train, limits, sandbox)
    if not result.evaluated and not used_fallback:
        used_fallback = True
        for fail in result.failures:
            discarded.append(_candidate_record(0, fail.heuristic.id,
                                               f"eval_failed:{fail.category}",
                                               heuristic=fail.heuristic, message=fail.message))
        result = evaluate_batch([classical_seed()], cfg.task, train, limits, sandbox)
    if not result.evaluated:
        raise InitializationError("no valid seed heuristic, even after the classical fallback")

    bounds = behavior.update_or_freeze_bounds(
        behavior.NormalizationBounds(), [c.behavior_raw for c in result.evaluated], 0)
    for cand in result.evaluated:
        cand.behavior_norm = behavior.normalize(cand.behavior_raw, bounds)
        cand.tokens_in, cand.tokens_out = tokens_by_id.get(cand.heuristic.id, (0, 0))

    population = top_n_select(Population(capacity=cfg.population_size), result.evaluated)
    fingerprints = {screen.fingerprint(c.heuristic.source) for c in result.evaluated}

    state = RunState(
        config=cfg, backend=backend, trace=trace, train=train, contract=contract,
        population=population, archive=archive, bounds=bounds, ledger=ledger,
        history=[population.best().fitness.loss], fingerprints=fingerprints,
        generation=0, rng_state=_rng_state(rng), out_dir=out_dir,
    )

    for record in discarded:
        trace.write(record)
    for fail in result.failures:
        trace.write(_candidate_record(0, fail.heuristic.id, f"eval_failed:{fail.category}",
                                      heuristic=fail.heuristic, message=fail.message))
    for cand in result.evaluated:
        trace.write(_candidate_record(0, cand.heuristic.id, "evaluated",
                                      heuristic=cand.heuristic, cand=cand,
                                      tokens=(cand.tokens_in, cand.tokens_out)))
    trace.write(_generation_summary(state, evaluated=len(result.evaluated), kept=len(batch)))
    persist(state, snapshot_path(out_dir, 0))
    return state


def _rng_state(rng) -> dict:
    return json.loads(json.dumps(rng.bit_generator.state))


# ---------------------------------------------------------------------------
# One generation
# ---------------------------------------------------------------------------


def gen_step(state: RunState) -> str | None:
    """Run one generation in place; returns a stop reason when the budget or
    the fixture supply ran out mid-step (the step still finishes cleanly)."""
    cfg = state.config
    t = state.generation + 1
    contract = state.contract
    stop_reason = None
    slots = 1 + cfg.proposals_per_gen  # hard per-generation call budget

    exemplars = retrieve_exemplars(state.archive, state.population, cfg.retrieval_size)

    drafts: list[agents.StrategyDraft] = []
    for _attempt in range(2):  # one resample on a malformed proposal
        if slots <= 0:
            break
        prompt = agents.build_proposer_prompt(
            state.population, exemplars, contract,
            k=cfg.proposals_per_gen, char_budget=cfg.prompt_char_budget)
        try:
            completion = agents.complete(state.backend, prompt, state.ledger)
        except BudgetExhaustedError:
            stop_reason = "budget"
            break
        except agents.FixtureExhaustedError:
            stop_reason = "fixtures"
            break
        slots -= 1
        state.trace.write(_llm_call_record(t, "proposer", completion, state.ledger,
                                           truncated_blocks=prompt.truncated_blocks))
        try:
            drafts = agents.parse_strategies(completion.text, cfg.proposals_per_gen)
            break
        except agents.ProposalParseError:
            continue

    batch: list[Heuristic] = []
    tokens_by_id: dict[str, tuple[int, int]] = {}
    for i, draft in enumerate(drafts):
        if stop_reason is not None or slots <= 0:
            break
        prompt = agents.build_generator_prompt(draft, contract,
                                               char_budget=cfg.prompt_char_budget)
        try:
            completion = agents.complete(state.backend, prompt, state.ledger)
        except BudgetExhaustedError:
            stop_reason = "budget"
            break
        except agents.FixtureExhaustedError:
            stop_reason = "fixtures"
            break
        slots -= 1
        state.trace.write(_llm_call_record(t, "generator", completion, state.ledger))
        cid = f"g{t:02d}-c{i}"
        tokens = (completion.tokens_in, completion.tokens_out)
        try:
            source = agents.extract_code(completion.text, contract)
        except agents.GenerationContractError as exc:
            state.trace.write(_candidate_record(t, cid, "discarded:missing_entry_point",
                                                tokens=tokens, message=str(exc)))
            continue
        h = Heuristic(
            id=cid, source=source, strategy_text=draft.idea,
            parent_ids=[m.heuristic.id for m in state.population.members], generation=t)
        tokens_by_id[cid] = tokens
        batch.append(h)

    kept, decisions = screen.screen_batch(
        batch, contract, state.archive, state.fingerprints, cfg.keep_ratio, state.bounds)
    kept_ids = {h.id for h in kept}
    by_id = {h.id: h for h in batch}
    for decision in decisions:
        state.trace.write({
            "event": "screen_decision", "gen": t, "id": decision.heuristic_id,
            "verdict": decision.verdict, "detail": decision.detail,
            "novelty": decision.novelty,
        })
        if decision.heuristic_id not in kept_ids:
            h = by_id[decision.heuristic_id]
            state.trace.write(_candidate_record(
                t, h.id, f"screened_out:{decision.verdict}", heuristic=h,
                tokens=tokens_by_id.get(h.id, (0, 0))))

    result = evaluate_batch(kept, cfg.task, state.train, state.limits(), state.sandbox())
    for fail in result.failures:
        state.trace.write(_candidate_record(
            t, fail.heuristic.id, f"eval_failed:{fail.category}",
            heuristic=fail.heuristic, tokens=tokens_by_id.get(fail.heuristic.id, (0, 0)),
            message=fail.message))

    # evaluation spent budget on every kept candidate; remember them all
    for h in kept:
        state.fingerprints.add(screen.fingerprint(h.source))

    state.bounds = behavior.update_or_freeze_bounds(
        state.bounds, [c.behavior_raw for c in result.evaluated], t)
    for cand in result.evaluated:
        cand.behavior_norm = behavior.normalize(cand.behavior_raw, state.bounds)
        cand.tokens_in, cand.tokens_out = tokens_by_id.get(cand.heuristic.id, (0, 0))

    state.population = top_n_select(state.population, result.evaluated)
    for cand in result.evaluated:
        outcome = state.archive.insert(cand)
        cell = assign_cell(cand.behavior_norm, state.archive.centroids)
        state.trace.write(_candidate_record(
            t, cand.heuristic.id, "evaluated", heuristic=cand.heuristic, cand=cand,
            cell=cell, insert_outcome=outcome,
            tokens=(cand.tokens_in, cand.tokens_out)))

    state.generation = t
    best = state.population.best()
    prev_best = state.history[-1]
    state.history.append(min(prev_best, best.fitness.loss) if best else prev_best)
    state.trace.write(_generation_summary(state, evaluated=len(result.evaluated),
                                          kept=len(kept)))
    if state.out_dir is not None:
        persist(state, snapshot_path(state.out_dir, t))
    return stop_reason


def no_improvement(history, patience: int, min_improvement: float) -> bool:
    """True when each of the last `patience` best-so-far transitions improved
    by less than min_improvement. An improvement of exactly the threshold
    counts as improvement (compared with a one-ulp tolerance, so a decimal
    threshold like 1e-4 behaves as written)."""
    if patience < 1:
        raise ValueError("patience must be >= 1")
    if len(history) < patience + 1:
        return False
    for i in range(1, patience + 1):
        improvement = history[-i - 1] - history[-i]
        if improvement >= min_improvement or math.isclose(improvement, min_improvement,
                                                          rel_tol=1e-9):
            return False
    return True


def best_overall(state: RunState) -> EvaluatedCandidate | None:
    pool = list(state.population.members) + list(state.archive.cells.values())
    if not pool:
        return None
    return min(pool, key=lambda c: (c.fitness.loss, c.heuristic.generation, c.heuristic.id))


def run(cfg: RunConfig, backend=None, out_dir=None) -> RunResult:
    state = initialize(cfg, backend=backend, out_dir=out_dir)
    return run_from_state(state)


def run_from_state(state: RunState) -> RunResult:
    cfg = state.config
    stop_reason = "generations"
    while state.generation < cfg.generations:
        step_stop = gen_step(state)
        if step_stop is not None:
            stop_reason = step_stop
            break
        if no_improvement(state.history, cfg.patience, cfg.min_improvement):
            stop_reason = "early_stop"
            break
    best = best_overall(state)
    state.trace.write({
        "event": "run_end", "reason": stop_reason, "gen": state.generation,
        "best_id": best.heuristic.id if best else None,
        "best_loss": best.fitness.loss if best else None,
        "queries_total": state.ledger.api_queries,
        "tokens_in_total": state.ledger.tokens_in_total,
        "tokens_out_total": state.ledger.tokens_out_total,
        "wall_s": state.ledger.wall_now(),
    })
    return RunResult(
        best=best, population=state.population, archive=state.archive,
        ledger=state.ledger, trace_path=state.trace.path,
        generations_run=state.generation, stop_reason=stop_reason,
    )


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


def snapshot_path(out_dir, generation: int) -> Path:
    return Path(out_dir) / f"state_gen_{generation:04d}.json"


def _candidate_to_json(cand: EvaluatedCandidate) -> dict:
    h = cand.heuristic
    return {
        "id": h.id, "source": h.source, "strategy_text": h.strategy_text,
        "parent_ids": list(h.parent_ids), "generation": h.generation,
        "loss": cand.fitness.loss, "behavior_raw": list(cand.behavior_raw),
        "behavior_norm": list(cand.behavior_norm) if cand.behavior_norm else None,
        "eval_seconds": cand.eval_seconds,
        "tokens_in": cand.tokens_in, "tokens_out": cand.tokens_out,
    }


def _candidate_from_json(doc: dict) -> EvaluatedCandidate:
    h = Heuristic(id=doc["id"], source=doc["source"],
                  strategy_text=doc.get("strategy_text", ""),
                  parent_ids=list(doc.get("parent_ids", [])),
                  generation=int(doc.get("generation", 0)))
    return EvaluatedCandidate(
        heuristic=h, fitness=FitnessScore(doc["loss"]),
        behavior_raw=list(doc["behavior_raw"]),
        behavior_norm=list(doc["behavior_norm"]) if doc.get("behavior_norm") else None,
        eval_seconds=float(doc.get("eval_seconds", 0.0)),
        tokens_in=int(doc.get("tokens_in", 0)), tokens_out=int(doc.get("tokens_out", 0)),
    )


def persist(state: RunState, path) -> Path:
    """Write one self-contained JSON snapshot of the search state."""
    coord_names = behavior.coordinate_names(state.config.task)
    cells = {}
    for cell, cand in state.archive.cells.items():
        cells[str(cell)] = _candidate_to_json(cand)
    doc = {
        "schema": SNAPSHOT_SCHEMA,
        "config": state.config.to_json(),
        "generation": state.generation,
        "history": list(state.history),
        "population": [_candidate_to_json(c) for c in state.population.members],
        "archive": {
            "centroids": state.archive.centroids.centroids.tolist(),
            "seed": state.archive.centroids.seed,
            "dim": state.archive.centroids.dim,
            "capacity": state.archive.capacity,
            "cells": cells,
        },
        "archive_export": archive_snapshot(state.archive, state.config.task, coord_names),
        "bounds": None if not state.bounds.initialized else {
            "mins": state.bounds.mins.tolist(),
            "maxs": state.bounds.maxs.tolist(),
            "frozen": state.bounds.frozen,
        },
        "ledger": state.ledger.snapshot(),
        "fingerprints": sorted(state.fingerprints),
        "rng_state": state.rng_state,
        "backend_state": state.backend.get_state() if hasattr(state.backend, "get_state") else {},
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_json_safe(doc), sort_keys=True, indent=1) + "\n")
    return path


def resume(path, backend=None, out_dir=None) -> RunState:
    """Rebuild a RunState from a snapshot file (or the latest snapshot in a
    run directory); the backend resumes from its persisted position."""
    path = Path(path)
    if path.is_dir():
        snaps = sorted(path.glob("state_gen_*.json"))
        if not snaps:
            raise ResumeError(f"no snapshots under {path}")
        out_dir = out_dir or path
        path = snaps[-1]
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ResumeError(f"cannot read snapshot {path}: {exc}") from exc
    if doc.get("schema") != SNAPSHOT_SCHEMA:
        raise ResumeError(f"unsupported snapshot schema {doc.get('schema')!r}")
    required = {"config", "generation", "history", "population", "archive", "ledger"}
    missing = required - set(doc)
    if missing:
        raise ResumeError(f"snapshot {path} is missing {sorted(missing)}")

    cfg = RunConfig(**doc["config"])
    backend = backend or build_backend(cfg.backend)
    if hasattr(backend, "set_state"):
        backend.set_state(doc.get("backend_state", {}))

    kind, entries = load_manifest(cfg.manifest)
    train = training_instances(entries)
    arch_doc = doc["archive"]
    centroids = CentroidSet(
        dim=int(arch_doc["dim"]),
        centroids=np.asarray(arch_doc["centroids"], dtype=np.float64),
        seed=int(arch_doc["seed"]))
    archive = Archive(centroids, capacity=int(arch_doc["capacity"]))
    for cell, cand_doc in arch_doc["cells"].items():
        archive.cells[int(cell)] = _candidate_from_json(cand_doc)

    bounds = behavior.NormalizationBounds()
    if doc.get("bounds"):
        bounds = behavior.NormalizationBounds(
            mins=np.asarray(doc["bounds"]["mins"], dtype=np.float64),
            maxs=np.asarray(doc["bounds"]["maxs"], dtype=np.float64),
            frozen=bool(doc["bounds"]["frozen"]))

    ledger = BudgetLedger(
        tokens_in_total=int(doc["ledger"]["tokens_in_total"]),
        tokens_out_total=int(doc["ledger"]["tokens_out_total"]),
        api_queries=int(doc["ledger"]["api_queries"]),
        wall_seconds_elapsed=float(doc["ledger"]["wall_seconds_elapsed"]),
        time_budget_s=cfg.time_budget_s, token_budget=cfg.token_budget)

    out_dir = Path(out_dir) if out_dir is not None else path.parent
    population = Population(
        members=[_candidate_from_json(c) for c in doc["population"]],
        capacity=cfg.population_size)
    return RunState(
        config=cfg, backend=backend, trace=TraceWriter(out_dir / "trace.jsonl"),
        train=train, contract=tasks.contract_for(cfg.task),
        population=population, archive=archive, bounds=bounds, ledger=ledger,
        history=[float(x) for x in doc["history"]],
        fingerprints=set(doc.get("fingerprints", [])),
        generation=int(doc["generation"]), rng_state=doc.get("rng_state"),
        out_dir=out_dir,
    )
