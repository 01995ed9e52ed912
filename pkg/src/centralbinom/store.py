"""Append-only newline-delimited JSON result store."""

from __future__ import annotations

import fcntl
import hashlib
import json
import logging
import os
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterator

log = logging.getLogger(__name__)

STORE_ENV = "CENTRALBINOM_STORE"
DEFAULT_STORE = "centralbinom-results.ndjson"


def default_path() -> Path:
    return Path(os.environ.get(STORE_ENV, DEFAULT_STORE))


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_fingerprint(config: dict) -> str:
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()


def make_record(config: dict, outputs: Any, version: str) -> dict:
    return {
        "fingerprint": config_fingerprint(config),
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "version": version,
        "config": config,
        "outputs": outputs,
    }


def store_append(path: str | Path, record: dict) -> None:
    line = canonical_json(record) + "\n"
    path = Path(path)
    with open(path, "a", encoding="utf-8") as fh:
        fcntl.flock(fh, fcntl.LOCK_EX)
        try:
            fh.write(line)
            fh.flush()
            os.fsync(fh.fileno())
        finally:
            fcntl.flock(fh, fcntl.LOCK_UN)


def iter_records(path: str | Path) -> Iterator[dict]:
    path = Path(path)
    if not path.exists():
        return
    with open(path, encoding="utf-8") as fh:
        fcntl.flock(fh, fcntl.LOCK_SH)
        try:
            lines = fh.readlines()
        finally:
            fcntl.flock(fh, fcntl.LOCK_UN)
    for i, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError:
            log.warning("%s:%d: skipping corrupt record", path, i)
            continue
        if not isinstance(rec, dict):
            log.warning("%s:%d: skipping non-object record", path, i)
            continue
        yield rec


def store_query(path: str | Path, fingerprint: str | None = None) -> list[dict]:
    return [r for r in iter_records(path) if fingerprint is None or r.get("fingerprint") == fingerprint]
