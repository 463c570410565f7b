"""Instance-set manifests: a JSON document listing, per instance, either a
file path or generator parameters, an optional reference value, and the
train/test split."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from heurevo.tasks import base

MANIFEST_SCHEMA = 1


@dataclass
class ManifestEntry:
    id: str
    split: str  # "train" | "test"
    instance: object
    reference_is_surrogate: bool = False


def load_manifest(path) -> tuple[str, list[ManifestEntry]]:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise base.ConfigError(f"manifest {path} is not valid JSON: {exc}") from exc
    if doc.get("schema") != MANIFEST_SCHEMA:
        raise base.ConfigError(f"manifest {path}: unsupported schema {doc.get('schema')!r}")
    kind = doc.get("task")
    if kind not in base.TASK_KINDS:
        raise base.ConfigError(f"manifest {path}: unknown task {kind!r}")
    entries = []
    for row in doc.get("instances", []):
        split = row.get("split", "train")
        if split not in ("train", "test"):
            raise base.ConfigError(f"manifest {path}: bad split {split!r}")
        if "path" in row:
            text = (path.parent / row["path"]).read_text()
            instance = base.parse_instance(kind, text, name=row.get("id", row["path"]))
        elif "generator" in row:
            instance = base.generate_instance(kind, row["generator"], seed=int(row.get("seed", 0)))
        else:
            raise base.ConfigError(f"manifest {path}: entry needs 'path' or 'generator'")
        if row.get("reference") is not None:
            instance.reference = float(row["reference"])
        entries.append(ManifestEntry(
            id=str(row.get("id", instance.name or f"instance-{len(entries)}")),
            split=split,
            instance=instance,
            reference_is_surrogate=bool(row.get("reference_is_surrogate", False)),
        ))
    if not entries:
        raise base.ConfigError(f"manifest {path}: no instances listed")
    return kind, entries


def training_instances(entries) -> list:
    train = [e.instance for e in entries if e.split == "train"]
    return train if train else [e.instance for e in entries]


def write_manifest(path, kind: str, rows: list[dict]) -> None:
    doc = {"schema": MANIFEST_SCHEMA, "task": kind, "instances": rows}
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
