"""Append-only run directories for evaluation and generation outputs."""

from __future__ import annotations

import json
import re
import time
from collections.abc import Iterable
from pathlib import Path

_SAFE_RE = re.compile(r"[^A-Za-z0-9._-]+")


def _slug(label: str) -> str:
    return _SAFE_RE.sub("-", label).strip("-") or "run"


def new_run_dir(results_dir: str | Path, label: str) -> Path:
    """Create a fresh timestamped run directory; never reuses an existing one."""
    results_dir = Path(results_dir)
    results_dir.mkdir(parents=True, exist_ok=True)
    stamp = time.strftime("%Y%m%d-%H%M%S")
    base = f"{stamp}-{_slug(label)}"
    for seq in range(10000):
        candidate = results_dir / (base if seq == 0 else f"{base}-{seq}")
        try:
            candidate.mkdir()
            return candidate
        except FileExistsError:
            continue
    raise RuntimeError(f"could not allocate a run directory under {results_dir}")


def write_jsonl(path: str | Path, records: Iterable[dict]) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def is_safe_run_id(run_id: str) -> bool:
    return bool(run_id) and _SAFE_RE.sub("-", run_id) == run_id and "/" not in run_id
