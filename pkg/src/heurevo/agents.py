"""Prompt-facing agents: proposer/generator prompt construction, strict
parsing of structured completions, and the pluggable completion backends
(an OpenAI-compatible HTTP client and a deterministic scripted replay)."""
from __future__ import annotations

import json
import math
import os
import re
import time
from dataclasses import dataclass, field
from pathlib import Path

from heurevo.tasks.base import TaskContract

DEFAULT_PROMPT_CHAR_BUDGET = 24_000


class ProposalParseError(ValueError):
    """No parsable strategies in a proposer completion."""


class GenerationContractError(ValueError):
    """A generator completion does not contain the required entry point."""


class BackendError(RuntimeError):
    """Transport-level completion failure after retries."""


class FixtureExhaustedError(BackendError):
    """The scripted replay backend ran out of fixture responses."""


@dataclass
class Prompt:
    role_tag: str  # proposer | generator | seed
    system_text: str
    user_text: str
    expected_format: str  # json_strategies | code_only
    truncated_blocks: int = 0


@dataclass
class StrategyDraft:
    idea: str
    target_behavior: str = ""


@dataclass
class Completion:
    text: str
    tokens_in: int
    tokens_out: int
    latency_seconds: float
    backend_id: str


def estimate_tokens(text: str) -> int:
    """Fallback token estimate (about four characters per token) used when a
    backend reports no usage."""
    return max(1, math.ceil(len(text) / 4))


# ---------------------------------------------------------------------------
# Prompt construction
# ---------------------------------------------------------------------------

_PROPOSER_SYSTEM = (
    "You are the PROPOSER in a role-specialized heuristic-evolution loop for "
    "combinatorial optimization. You draft candidate strategies in natural "
    "language only; you never write code."
)

_GENERATOR_SYSTEM = (
    "You are the GENERATOR in a role-specialized heuristic-evolution loop. "
    "You translate one strategy into executable Python code that exactly "
    "matches the task contract."
)

_SEED_SYSTEM = (
    "You are initializing a heuristic-evolution run. Write one reasonable, "
    "correct baseline heuristic for the task. Return code only."
)


def _parent_block(candidate) -> str:
    h = candidate.heuristic
    idea = h.strategy_text.strip().splitlines()[0] if h.strategy_text.strip() else "(seed)"
    return (f"- parent id={h.id} gen={h.generation} loss={candidate.fitness.loss:.6f}"
            f" idea: {idea[:200]}")


def _exemplar_block(ex, coord_names) -> str:
    cand = ex.candidate
    highlights = ""
    if cand.behavior_norm is not None and coord_names:
        scored = sorted(
            zip(coord_names, cand.behavior_norm),
            key=lambda nv: (-abs(nv[1] - 0.5), nv[0]),
        )[:3]
        highlights = " behavior: " + ", ".join(f"{n}={v:.2f}" for n, v in scored)
    return (f"- exemplar cell={ex.cell_id} loss={cand.fitness.loss:.6f}"
            f"{highlights}\n  summary: {ex.summary}")


def build_proposer_prompt(parents, exemplars, contract: TaskContract, k: int = 4,
                          char_budget: int = DEFAULT_PROMPT_CHAR_BUDGET) -> Prompt:
    """Deterministic proposer prompt: problem text, entry-point contract,
    parent summaries, exemplar summaries, and the JSON output instructions.

    Over budget, parent blocks are dropped oldest-generation-first, then
    exemplar blocks last-picked-first; drops are counted on the prompt.
    """
    parent_items = list(parents.members)
    exemplar_items = list(exemplars.exemplars)
    coord_names = _coord_names_for(contract.kind)
    truncated = 0
    while True:
        parent_lines = [_parent_block(c) for c in parent_items]
        exemplar_lines = [_exemplar_block(e, coord_names) for e in exemplar_items]
        parents_text = "\n".join(parent_lines) if parent_lines else "(no parents yet)"
        exemplars_text = ("\n".join(exemplar_lines) if exemplar_lines
                          else "No archive exemplars yet.")
        user = (
            f"## Problem\n{contract.description}\n\n"
            f"## Required entry point\n{contract.signature}\n\n"
            f"## Parent heuristics (current population)\n{parents_text}\n\n"
            f"## Archive exemplars (behaviorally distinct)\n{exemplars_text}\n\n"
            "## Instructions\n"
            f"Draft up to {k} strategy candidates in natural language only.\n"
            "- preserve the task IO contract;\n"
            "- change one concrete algorithmic idea at a time;\n"
            "- prefer diverse ideas over near-duplicates;\n"
            "- output structured JSON only.\n"
            'Return exactly: {"strategies": [{"idea": "...", "target_behavior": "..."}]}'
        )
        if len(user) <= char_budget or not (parent_items or exemplar_items):
            return Prompt("proposer", _PROPOSER_SYSTEM, user, "json_strategies",
                          truncated_blocks=truncated)
        if parent_items:
            oldest = min(range(len(parent_items)),
                         key=lambda i: (parent_items[i].heuristic.generation,
                                        parent_items[i].heuristic.id))
            parent_items.pop(oldest)
        else:
            exemplar_items.pop()
        truncated += 1


def _coord_names_for(kind: str):
    from heurevo.behavior import coordinate_names

    try:
        return coordinate_names(kind)
    except KeyError:
        return ()


def build_generator_prompt(draft: StrategyDraft, contract: TaskContract,
                           char_budget: int = DEFAULT_PROMPT_CHAR_BUDGET) -> Prompt:
    if not draft.idea:
        raise ValueError("strategy idea must be non-empty")
    target = f"\nTarget behavior: {draft.target_behavior}" if draft.target_behavior else ""
    user = (
        f"## Problem\n{contract.description}\n\n"
        f"## Strategy to implement\n{draft.idea}{target}\n\n"
        f"## Required entry point\n{contract.signature}\n\n"
        "Constraints:\n"
        "- return code only;\n"
        "- do not change the required function signature;\n"
        "- do not inject new algorithmic content;\n"
        "- keep execution deterministic.\n"
    )
    return Prompt("generator", _GENERATOR_SYSTEM, user[:char_budget], "code_only")


def build_seed_prompt(contract: TaskContract, index: int) -> Prompt:
    user = (
        f"## Problem\n{contract.description}\n\n"
        f"## Required entry point\n{contract.signature}\n\n"
        f"Write seed heuristic #{index + 1}. Vary the algorithmic idea across seeds.\n"
        "Constraints: return code only; exact signature; deterministic execution.\n"
    )
    return Prompt("seed", _SEED_SYSTEM, user, "code_only")


# ---------------------------------------------------------------------------
# Completion parsing
# ---------------------------------------------------------------------------

_FENCE_RE = re.compile(r"```(?:[\w+-]*)\n(.*?)```", re.DOTALL)


def _json_candidates(text: str):
    """Yield decoded JSON objects found in the text: the whole text, fenced
    blocks, then balanced-brace spans containing a strategies key."""
    try:
        yield json.loads(text)
    except json.JSONDecodeError:
        pass
    for block in _FENCE_RE.findall(text):
        try:
            yield json.loads(block)
        except json.JSONDecodeError:
            continue
    for start in [m.start() for m in re.finditer(r"\{", text)]:
        depth = 0
        for end in range(start, len(text)):
            if text[end] == "{":
                depth += 1
            elif text[end] == "}":
                depth -= 1
                if depth == 0:
                    span = text[start:end + 1]
                    if '"strategies"' in span:
                        try:
                            yield json.loads(span)
                        except json.JSONDecodeError:
                            pass
                    break


def parse_strategies(text: str, k: int) -> list[StrategyDraft]:
    """Extract up to k strategy drafts from the first JSON object carrying a
    "strategies" array; prose and code fences around it are tolerated."""
    for doc in _json_candidates(text):
        if not isinstance(doc, dict) or not isinstance(doc.get("strategies"), list):
            continue
        drafts = []
        for row in doc["strategies"]:
            if not isinstance(row, dict):
                continue
            idea = str(row.get("idea", "")).strip()
            if not idea:
                continue
            drafts.append(StrategyDraft(
                idea=idea, target_behavior=str(row.get("target_behavior", "")).strip()))
            if len(drafts) == k:
                break
        if drafts:
            return drafts
    raise ProposalParseError("no parsable strategies in completion")


def extract_code(text: str, contract: TaskContract) -> str:
    """First fenced code block if any, else the whole text; the entry point
    must appear or the candidate is discarded."""
    blocks = _FENCE_RE.findall(text)
    source = blocks[0] if blocks else text
    source = source.strip("\n") + "\n"
    if f"def {contract.entry_point}" not in source:
        raise GenerationContractError(
            f"completion does not define {contract.entry_point!r}")
    return source


# ---------------------------------------------------------------------------
# Backends
# ---------------------------------------------------------------------------


class ScriptedReplayBackend:
    """Deterministic stand-in for a live model: serves fixture completions in
    file order, matched by role_tag. Fixture files are JSONL records
    {role_tag, text, tokens_in, tokens_out}."""

    kind = "scripted_replay"

    def __init__(self, fixtures, identity: str = "replay"):
        if isinstance(fixtures, (str, Path)):
            rows = []
            for line in Path(fixtures).read_text().splitlines():
                if line.strip():
                    rows.append(json.loads(line))
            fixtures = rows
        self.fixtures = list(fixtures)
        self.identity = identity
        self.consumed: set[int] = set()

    def get_state(self) -> dict:
        return {"consumed": sorted(self.consumed)}

    def set_state(self, state: dict) -> None:
        self.consumed = {int(i) for i in state.get("consumed", [])}

    def complete(self, prompt: Prompt) -> Completion:
        for i, row in enumerate(self.fixtures):
            if i in self.consumed or row.get("role_tag") != prompt.role_tag:
                continue
            self.consumed.add(i)
            text = row["text"]
            return Completion(
                text=text,
                tokens_in=int(row.get("tokens_in") or
                              estimate_tokens(prompt.system_text + prompt.user_text)),
                tokens_out=int(row.get("tokens_out") or estimate_tokens(text)),
                latency_seconds=0.0,
                backend_id=self.identity,
            )
        raise FixtureExhaustedError(
            f"no fixture left for role_tag {prompt.role_tag!r} "
            f"({len(self.consumed)}/{len(self.fixtures)} consumed)")


class HttpChatBackend:
    """OpenAI-compatible chat-completion client with bounded retries.

    Request: POST {base_url}/chat/completions with {model, messages,
    temperature}; the API key is read from the environment, never stored in
    config files.
    """

    kind = "http_chat"

    def __init__(self, base_url: str, model: str, temperature: float = 1.0,
                 api_key_env: str = "HEUREVO_API_KEY", timeout: float = 120.0,
                 max_retries: int = 3, session=None):
        import requests

        self.base_url = base_url.rstrip("/")
        self.model = model
        self.temperature = temperature
        self.api_key_env = api_key_env
        self.timeout = timeout
        self.max_retries = max_retries
        self.session = session or requests.Session()
        self.identity = f"http:{model}"

    def get_state(self) -> dict:
        return {}

    def set_state(self, state: dict) -> None:
        pass

    def complete(self, prompt: Prompt) -> Completion:
        payload = {
            "model": self.model,
            "messages": [
                {"role": "system", "content": prompt.system_text},
                {"role": "user", "content": prompt.user_text},
            ],
            "temperature": self.temperature,
        }
        headers = {}
        api_key = os.environ.get(self.api_key_env, "")
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        last_error = None
        for attempt in range(self.max_retries):
            start = time.perf_counter()
            try:
                resp = self.session.post(
                    f"{self.base_url}/chat/completions",
                    json=payload, headers=headers, timeout=self.timeout)
                resp.raise_for_status()
                doc = resp.json()
                text = doc["choices"][0]["message"]["content"]
                usage = doc.get("usage") or {}
                return Completion(
                    text=text,
                    tokens_in=int(usage.get("prompt_tokens") or
                                  estimate_tokens(prompt.system_text + prompt.user_text)),
                    tokens_out=int(usage.get("completion_tokens") or estimate_tokens(text)),
                    latency_seconds=time.perf_counter() - start,
                    backend_id=self.identity,
                )
            except Exception as exc:  # noqa: BLE001 - transport errors retried
                last_error = exc
                if attempt < self.max_retries - 1:
                    time.sleep(2.0 ** attempt)
        raise BackendError(f"completion failed after {self.max_retries} attempts: {last_error}")


def complete(backend, prompt: Prompt, budget) -> Completion:
    """One accounted backend call: the budget is checked before the call and
    the completion's tokens/latency/query count are recorded exactly once."""
    budget.check()
    completion = backend.complete(prompt)
    budget.record_call(completion)
    return completion
