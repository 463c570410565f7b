"""Command-line surface: run/resume evolutions, run classical baselines,
report run metrics, export traces, and generate instance manifests.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from heurevo import agents, core, workflow
from heurevo.tasks import base as tasks
from heurevo.tasks.manifest import load_manifest, write_manifest

USAGE_ERROR = 2
RUNTIME_ERROR = 1


def _parse_backend(spec: str, configured: dict) -> dict:
    if spec == "http":
        # "http" selects the config's http block rather than replacing it
        if configured.get("kind") == "http":
            return configured
        raise tasks.ConfigError("--backend http needs an http backend block in the config")
    if spec.startswith("replay:"):
        return {"kind": "replay", "fixtures": spec.split(":", 1)[1]}
    raise tasks.ConfigError(f"backend must be 'http' or 'replay:<fixtures>', got {spec!r}")


def cmd_run(args) -> int:
    cfg = workflow.RunConfig.from_file(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.backend is not None:
        overrides["backend"] = _parse_backend(args.backend, cfg.backend)
    if overrides:
        doc = cfg.to_json()
        doc.update(overrides)
        cfg = workflow.RunConfig(**doc)
    if not cfg.backend:
        raise tasks.ConfigError("no backend configured (config key 'backend' or --backend)")
    result = workflow.run(cfg, out_dir=args.out)
    _print_summary(result, cfg)
    return 0


def cmd_resume(args) -> int:
    state = workflow.resume(args.snapshot, out_dir=args.out)
    result = workflow.run_from_state(state)
    _print_summary(result, state.config)
    return 0


def _print_summary(result: workflow.RunResult, cfg) -> None:
    best = result.best
    loss = best.fitness.loss if best else float("nan")
    print(f"task={cfg.task} seed={cfg.seed} stop={result.stop_reason} "
          f"generations={result.generations_run}")
    print(f"best_id={best.heuristic.id if best else '-'} "
          f"gap={loss * 100.0:.4f}% "
          f"time_s={result.ledger.wall_now():.1f} "
          f"tokens_in={result.ledger.tokens_in_total} "
          f"tokens_out={result.ledger.tokens_out_total} "
          f"queries={result.ledger.api_queries}")
    print(f"trace={result.trace_path}")


def cmd_baseline(args) -> int:
    kind, entries = load_manifest(args.manifest)
    if args.task != kind:
        raise tasks.ConfigError(f"manifest is for task {kind!r}, not {args.task!r}")
    if args.name not in tasks.BASELINES[kind]:
        raise tasks.ConfigError(
            f"unknown baseline {args.name!r} for {kind!r}; "
            f"choose from {', '.join(tasks.BASELINES[kind])}")
    rows = []
    for entry in entries:
        sol = tasks.run_baseline(kind, args.name, entry.instance)
        objective = tasks.evaluate_solution(kind, entry.instance, sol)
        try:
            ref = tasks.reference_bound(kind, entry.instance)
            gap = core.relative_gap(objective, ref)
        except tasks.ReferenceUnavailableError:
            ref, gap = None, None
        rows.append((entry.id, objective, ref, gap, entry.reference_is_surrogate))
    print(f"{'instance':<24} {'objective':>12} {'reference':>12} {'gap%':>8}")
    gaps = []
    for name, objective, ref, gap, surrogate in rows:
        ref_text = "-" if ref is None else f"{ref:.3f}"
        gap_text = "-" if gap is None else f"{gap:.3f}"
        flag = " (surrogate ref)" if surrogate else ""
        print(f"{name:<24} {objective:>12.3f} {ref_text:>12} {gap_text:>8}{flag}")
        if gap is not None:
            gaps.append(gap)
    if gaps:
        print(f"{'mean':<24} {'':>12} {'':>12} {sum(gaps) / len(gaps):>8.3f}")
    return 0


def _load_trace(run_dir: Path) -> list[dict]:
    trace_path = run_dir / "trace.jsonl"
    if not trace_path.exists():
        raise tasks.ConfigError(f"no trace.jsonl under {run_dir}")
    return [json.loads(line) for line in trace_path.read_text().splitlines() if line.strip()]


def _run_metrics(run_dir: Path) -> dict:
    records = _load_trace(run_dir)
    summaries = [r for r in records if r.get("event") == "generation_summary"]
    calls = [r for r in records if r.get("event") == "llm_call"]
    if not summaries:
        raise tasks.ConfigError(f"{run_dir} has no generation summaries yet")
    last = summaries[-1]
    tokens_in = sum(c["tokens_in"] for c in calls)
    tokens_out = sum(c["tokens_out"] for c in calls)
    return {
        "run_dir": str(run_dir),
        "best_loss": last["best_loss"],
        "gap_percent": last["best_loss"] * 100.0,
        "wall_s": last.get("wall_s"),
        "tokens_in": tokens_in,
        "tokens_out": tokens_out,
        "queries": last["queries_total"],
        "summaries": summaries,
        "calls": calls,
    }


def cmd_report(args) -> int:
    all_metrics = [_run_metrics(Path(d)) for d in args.run_dirs]
    for m in all_metrics:
        wall = "-" if m["wall_s"] is None else f"{m['wall_s']:.1f}"
        print(f"{m['run_dir']}: gap={m['gap_percent']:.4f}% time_s={wall} "
              f"tokens={m['tokens_in'] + m['tokens_out']} queries={m['queries']}")
    for m in all_metrics:
        out = Path(m["run_dir"])
        with (out / "best_vs_generation.csv").open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["generation", "best_loss"])
            for s in m["summaries"]:
                writer.writerow([s["gen"], s["best_loss"]])
        cumulative = 0
        per_gen_tokens = {}
        for call in m["calls"]:
            per_gen_tokens.setdefault(call["gen"], 0)
            per_gen_tokens[call["gen"]] += call["tokens_in"] + call["tokens_out"]
        with (out / "best_vs_tokens.csv").open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["generation", "cumulative_tokens", "best_loss"])
            for s in m["summaries"]:
                cumulative += per_gen_tokens.get(s["gen"], 0)
                writer.writerow([s["gen"], cumulative, s["best_loss"]])
    if args.score:
        rows = [(m["gap_percent"], float(m["tokens_in"] + m["tokens_out"]),
                 float(m["wall_s"] or 0.0)) for m in all_metrics]
        scores = core.block_scores(rows, basis=args.score_basis)
        for m, score in zip(all_metrics, scores):
            print(f"score[{args.score_basis}] {m['run_dir']}: {score:.3f}")
    return 0


def cmd_export_trace(args) -> int:
    run_dir = Path(args.run_dir)
    records = _load_trace(run_dir)
    if args.golden:
        out = run_dir / "trace.golden.jsonl"
        lines = workflow.canonical_trace_lines(run_dir / "trace.jsonl")
        out.write_text("\n".join(lines) + "\n")
        print(f"wrote {out}")
        return 0
    out = run_dir / "trace.csv"
    fields = sorted({key for r in records for key in r})
    with out.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for r in records:
            writer.writerow({k: json.dumps(v) if isinstance(v, (dict, list)) else v
                             for k, v in r.items()})
    print(f"wrote {out}")
    return 0


def _reference_for_generated(kind: str, instance):
    """References stored by make-instances: exact where cheap, otherwise the
    classical baseline objective, flagged as a surrogate."""
    from heurevo.tasks import mkp as mkp_mod

    if kind == "bpp_online":
        return None, False  # L2 is recomputed from the items on demand
    if kind == "mkp":
        if instance.n_items <= mkp_mod.EXACT_ITEM_LIMIT:
            return mkp_mod.exact_optimum(instance), False
        return mkp_mod.surrogate_upper_bound(instance), True
    if kind == "tsp_construct":
        if instance.n <= 9:
            from heurevo.tasks import tsp as tsp_mod

            return tsp_mod.brute_force(instance)[0], False
        sol = tasks.run_baseline(kind, "nearest_neighbor", instance)
        return tasks.evaluate_solution(kind, instance, sol), True
    if kind == "pfsp":
        if instance.n_jobs <= 7:
            from heurevo.tasks import pfsp as pfsp_mod

            return pfsp_mod.brute_force(instance)[0], False
        sol = tasks.run_baseline(kind, "neh", instance)
        return tasks.evaluate_solution(kind, instance, sol), True
    raise tasks.ConfigError(f"unknown task kind {kind!r}")


def cmd_make_instances(args) -> int:
    params = json.loads(args.params)
    rows = []
    for i in range(args.count):
        seed = args.seed + i
        instance = tasks.generate_instance(args.task, params, seed=seed)
        ref, surrogate = _reference_for_generated(args.task, instance)
        row = {
            "id": f"{args.split}-{i}",
            "split": args.split,
            "generator": params,
            "seed": seed,
        }
        if ref is not None:
            row["reference"] = ref
            row["reference_is_surrogate"] = surrogate
        rows.append(row)
    write_manifest(args.out, args.task, rows)
    print(f"wrote {args.out} ({args.count} instances)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="heurevo",
                                     description="Evolve executable heuristics under budget.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an evolution from a config file")
    p.add_argument("config", help="JSON run-config path")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--backend", default=None, help="http | replay:<fixtures.jsonl>")
    p.add_argument("--out", default=None, help="output directory")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("resume", help="resume from a snapshot or run directory")
    p.add_argument("snapshot")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_resume)

    p = sub.add_parser("baseline", help="run a classical baseline over a manifest")
    p.add_argument("task", choices=tasks.TASK_KINDS)
    p.add_argument("name")
    p.add_argument("manifest")
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("report", help="print run metrics and emit plot-data CSVs")
    p.add_argument("run_dirs", nargs="+")
    p.add_argument("--score", action="store_true",
                   help="also print the composite quality-efficiency score")
    p.add_argument("--score-basis", choices=("best", "range"), default="best")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("export-trace", help="export a run trace as CSV (or canonical JSONL)")
    p.add_argument("run_dir")
    p.add_argument("--golden", action="store_true",
                   help="write the canonical (timing-stripped) JSONL instead")
    p.set_defaults(func=cmd_export_trace)

    p = sub.add_parser("make-instances", help="generate a synthetic instance manifest")
    p.add_argument("task", choices=tasks.TASK_KINDS)
    p.add_argument("--params", required=True, help='generator params, e.g. \'{"capacity":100,"count":5000}\'')
    p.add_argument("--count", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--split", choices=("train", "test"), default="train")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_make_instances)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (tasks.ConfigError, workflow.ResumeError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except (workflow.InitializationError, agents.BackendError, tasks.FeasibilityError,
            tasks.ReferenceUnavailableError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_ERROR


if __name__ == "__main__":
    sys.exit(main())
