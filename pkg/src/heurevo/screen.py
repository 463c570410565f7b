"""Deterministic pre-evaluation screen: contract validation, a fixed
deny-list, token-stream fingerprints for duplicate rejection, and top-ratio
novelty ranking against the archive's static features."""
from __future__ import annotations

import ast
import hashlib
import io
import math
import tokenize
from dataclasses import dataclass

import numpy as np

from heurevo import behavior
from heurevo.tasks.base import TaskContract

KEPT = "kept"
REJECTED_MALFORMED = "rejected_malformed"
REJECTED_DUPLICATE = "rejected_duplicate"
REJECTED_RANK = "rejected_rank"

# Modules a candidate may import inside the sandbox; everything else is denied.
ALLOWED_IMPORTS = frozenset({
    "math", "numpy", "itertools", "functools", "heapq", "bisect",
    "collections", "operator", "statistics",
})

# File/network/process primitives and nondeterminism sources.
DENY_CALLS = frozenset({
    "open", "exec", "eval", "compile", "__import__", "input", "breakpoint",
    "globals", "locals", "vars", "exit", "quit",
})
DENY_ATTRIBUTES = frozenset({
    "__globals__", "__builtins__", "__subclasses__", "__bases__", "__mro__",
    "__code__", "__loader__", "__spec__",
})


@dataclass
class ScreenDecision:
    heuristic_id: str
    verdict: str
    detail: str = ""
    novelty: float | None = None


def validate_contract(source: str, contract: TaskContract) -> list[str]:
    """Returns the list of violated checks; empty means the candidate is OK."""
    errors: list[str] = []
    try:
        tree = ast.parse(source)
    except SyntaxError as exc:
        return [f"syntax error: {exc.msg} (line {exc.lineno})"]
    except ValueError as exc:  # e.g. null bytes in the source
        return [f"syntax error: {exc}"]

    entry = None
    for node in ast.walk(tree):
        if isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef)) and node.name == contract.entry_point:
            entry = node
            break
    if entry is None:
        errors.append(f"missing entry point {contract.entry_point!r}")
    else:
        args = entry.args
        n_args = len(args.args) + len(args.posonlyargs)
        if n_args != contract.arity or args.vararg or args.kwarg or args.kwonlyargs:
            errors.append(
                f"entry point must take exactly {contract.arity} positional "
                f"arguments, found {n_args}")

    for node in ast.walk(tree):
        if isinstance(node, ast.Import):
            for alias in node.names:
                root = alias.name.split(".")[0]
                if root not in ALLOWED_IMPORTS:
                    errors.append(f"denied import {alias.name!r}")
        elif isinstance(node, ast.ImportFrom):
            root = (node.module or "").split(".")[0]
            if root not in ALLOWED_IMPORTS:
                errors.append(f"denied import {node.module!r}")
        elif isinstance(node, ast.Name) and node.id in DENY_CALLS:
            errors.append(f"denied name {node.id!r}")
        elif isinstance(node, ast.Attribute) and node.attr in DENY_ATTRIBUTES:
            errors.append(f"denied attribute {node.attr!r}")
    return errors


def fingerprint(source: str) -> str:
    """Stable hash of the logical token stream.

    Comments and formatting are dropped, indentation structure is kept as
    bare INDENT/DEDENT markers, and literals are preserved, so reformatted
    copies collide and any literal change separates.
    """
    parts: list[str] = []
    for tok in tokenize.generate_tokens(io.StringIO(source).readline):
        if tok.type in (tokenize.COMMENT, tokenize.NL, tokenize.ENCODING,
                        tokenize.ENDMARKER):
            continue
        if tok.type in (tokenize.NEWLINE, tokenize.INDENT, tokenize.DEDENT):
            parts.append(tokenize.tok_name[tok.type])
        else:
            parts.append(f"{tokenize.tok_name[tok.type]}:{tok.string}")
    digest = hashlib.sha256("\0".join(parts).encode()).hexdigest()
    return digest


def _static_novelty(source: str, archive, bounds) -> float:
    """Distance from the candidate's normalized static features to the nearest
    archive incumbent's static sub-vector; +inf against an empty archive."""
    if not archive.cells:
        return math.inf
    raw = behavior.static_features(source).as_vector()
    static_bounds = behavior.NormalizationBounds(mins=bounds.mins[5:], maxs=bounds.maxs[5:])
    vec = np.asarray(behavior.normalize(raw, static_bounds))
    best = math.inf
    for cand in archive.cells.values():
        other = np.asarray(cand.behavior_norm[5:])
        best = min(best, float(np.linalg.norm(vec - other)))
    return best


def screen_batch(batch, contract: TaskContract, archive, known_fingerprints,
                 keep_ratio: float, bounds) -> tuple[list, list[ScreenDecision]]:
    """Filter a candidate batch before evaluation.

    Drops malformed candidates, then fingerprint duplicates (against both the
    batch and the known set), then keeps the ceil(keep_ratio * survivors) most
    novel by static-feature distance (candidate index breaks ties). Returns
    (kept candidates in batch order, one decision per input candidate).
    """
    if not 0 < keep_ratio <= 1:
        raise ValueError("keep_ratio must lie in (0, 1]")
    decisions: list[ScreenDecision | None] = [None] * len(batch)
    seen = set(known_fingerprints)
    survivors: list[tuple[int, object]] = []
    for idx, h in enumerate(batch):
        errs = validate_contract(h.source, contract)
        if errs:
            decisions[idx] = ScreenDecision(h.id, REJECTED_MALFORMED, "; ".join(errs))
            continue
        fp = fingerprint(h.source)
        if fp in seen:
            decisions[idx] = ScreenDecision(h.id, REJECTED_DUPLICATE, f"fingerprint {fp[:12]}")
            continue
        seen.add(fp)
        survivors.append((idx, h))

    ranked = sorted(
        ((idx, h, _static_novelty(h.source, archive, bounds)) for idx, h in survivors),
        key=lambda t: (-t[2], t[0]),
    )
    n_keep = math.ceil(keep_ratio * len(ranked))
    kept_idx = set()
    for rank, (idx, h, nov) in enumerate(ranked):
        if rank < n_keep:
            kept_idx.add(idx)
            decisions[idx] = ScreenDecision(h.id, KEPT, f"rank {rank}", novelty=nov)
        else:
            decisions[idx] = ScreenDecision(h.id, REJECTED_RANK, f"rank {rank}", novelty=nov)
    kept = [h for idx, h in survivors if idx in kept_idx]
    return kept, [d for d in decisions if d is not None]
