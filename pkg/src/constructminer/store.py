"""Append-only JSONL stores for construct sets and review decisions."""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Iterable, Iterator

from .constructs import ConstructSet


def dump_jsonl(path: str | Path, records: Iterable[dict]) -> None:
    """Write ``records`` to ``path`` atomically (temp file then rename)."""
    path = Path(path)
    tmp = path.with_name(f".{path.name}.tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True, ensure_ascii=False) + "\n")
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def read_jsonl(path: str | Path) -> Iterator[dict]:
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                yield json.loads(line)


def _append_line(path: Path, record: dict) -> None:
    line = json.dumps(record, sort_keys=True, ensure_ascii=False) + "\n"
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(line)
        fh.flush()
        os.fsync(fh.fileno())


class ConstructStore:
    """One ConstructSet per line; a later revision of an activity supersedes earlier ones."""

    def __init__(self, path: str | Path):
        self.path = Path(path)

    def exists(self) -> bool:
        return self.path.exists()

    def records(self) -> list[dict]:
        return list(read_jsonl(self.path)) if self.path.exists() else []

    def latest_records(self) -> dict[str, dict]:
        latest: dict[str, dict] = {}
        for rec in self.records():
            prev = latest.get(rec["activity"])
            if prev is None or rec["revision"] >= prev["revision"]:
                latest[rec["activity"]] = rec
        return latest

    def latest(self) -> dict[str, ConstructSet]:
        return {label: ConstructSet.from_record(rec) for label, rec in self.latest_records().items()}

    def revision(self, activity: str) -> int:
        rec = self.latest_records().get(activity)
        return rec["revision"] if rec else 0

    def append(self, cset: ConstructSet) -> int:
        revision = self.revision(cset.activity_label) + 1
        self.path.parent.mkdir(parents=True, exist_ok=True)
        _append_line(self.path, {**cset.to_record(), "revision": revision})
        return revision

    def write_initial(self, sets: Iterable[ConstructSet]) -> None:
        """Replace the store with revision-1 records for ``sets``."""
        self.path.parent.mkdir(parents=True, exist_ok=True)
        dump_jsonl(self.path, ({**s.to_record(), "revision": 1} for s in sets))


class DecisionLog:
    def __init__(self, path: str | Path):
        self.path = Path(path)

    def append(self, record: dict) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        _append_line(self.path, record)

    def records(self) -> list[dict]:
        return list(read_jsonl(self.path)) if self.path.exists() else []
