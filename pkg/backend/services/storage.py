from __future__ import annotations

import os
import re
from pathlib import Path

from backend.services.utils import normalize_text

DEFAULT_RUNS_ROOT = "instance/runs"
RUN_ID_RE = re.compile(r"[^a-zA-Z0-9_-]+")
RUN_FILES = ("results.csv", "manifest.txt")


def runs_root() -> Path:
    return Path(os.getenv("HULLWALK_RUNS_DIR") or DEFAULT_RUNS_ROOT)


def normalize_run_name(value: str | None) -> str:
    name = normalize_text(value)
    cleaned = RUN_ID_RE.sub("_", name)
    if not cleaned:
        raise ValueError("empty run name")
    return cleaned


def default_output_dir(kind: str) -> Path:
    return runs_root() / normalize_run_name(kind)


def ensure_output_dir(path: str | Path) -> Path:
    directory = Path(path)
    directory.mkdir(parents=True, exist_ok=True)
    return directory


def run_file(output_dir: str | Path, filename: str) -> Path:
    if filename not in RUN_FILES:
        raise ValueError(f"Unknown run file: {filename}")
    path = Path(output_dir) / filename
    if not path.is_file():
        raise ValueError(f"Missing run file: {filename}")
    return path
