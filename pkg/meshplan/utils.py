#!/usr/bin/env python3
"""
Utility functions for meshplan.

Provides:
- The common exception base class
- Environment-driven settings (thread cap, log level, slow tests)
- Byte-stable JSON reading and writing
- Seed list and run identifier helpers

Run Identification
==================

Every experiment run is named after the inputs that produced it so that a
rerun over the same output directory lands on the same path:

    seed0003-BA        (seed 3, bipartite topology, allocate all sectors)
    seed0012-FS        (seed 12, free-form topology, one link at a time)

Usage Examples:
    make_run_id(3, "BA")         -> "seed0003-BA"
    parse_seed_list("0-3,7")     -> [0, 1, 2, 3, 7]
"""

import json
import os
import tempfile
from typing import Any, List

# Environment knobs
THREADS_ENV = "MESHPLAN_THREADS"
LOG_LEVEL_ENV = "MESHPLAN_LOG_LEVEL"
SLOW_TESTS_ENV = "MESHPLAN_SLOW_TESTS"

DEFAULT_LOG_LEVEL = "WARNING"

PRESETS_PATH = os.path.join(os.path.dirname(os.path.abspath(__file__)), "presets")


class MeshPlanError(Exception):
    """Base exception for every meshplan failure."""


def get_thread_count() -> int:
    """
    Return the batch concurrency cap.

    MESHPLAN_THREADS wins when set to a positive integer, otherwise the
    CPU count is used.
    """
    raw = os.environ.get(THREADS_ENV, "").strip()
    if raw:
        try:
            value = int(raw)
        except ValueError:
            raise MeshPlanError(f"{THREADS_ENV} must be an integer, got '{raw}'")
        if value < 1:
            raise MeshPlanError(f"{THREADS_ENV} must be >= 1, got {value}")
        return value
    return os.cpu_count() or 1


def get_log_level() -> str:
    """Return the configured log level name."""
    return os.environ.get(LOG_LEVEL_ENV, DEFAULT_LOG_LEVEL).upper()


def slow_tests_enabled() -> bool:
    """Check whether the long grid tests were requested."""
    return os.environ.get(SLOW_TESTS_ENV, "") not in ("", "0", "false", "no")


def dumps_json(data: Any) -> str:
    """Serialize to the canonical on-disk form (sorted keys, 2-space indent)."""
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def read_json(path: str) -> Any:
    """
    Read a JSON document.

    Raises:
        MeshPlanError: If the file is missing or not valid JSON
    """
    if not os.path.exists(path):
        raise MeshPlanError(f"File not found: {path}")
    try:
        with open(path, "r") as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise MeshPlanError(f"Invalid JSON in {path}: {e}")


def write_json(path: str, data: Any) -> None:
    """
    Write a JSON document atomically.

    The document goes to a temporary file in the target directory first and
    is renamed over the destination, so readers never see a partial file.
    """
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".json")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(dumps_json(data))
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise


def make_run_id(seed: int, strategy: str) -> str:
    """Build the directory name of one experiment run."""
    return f"seed{seed:04d}-{strategy}"


def parse_seed_list(text: str) -> List[int]:
    """
    Parse a seed list such as "0-15" or "1,4,9-11".

    Raises:
        MeshPlanError: On malformed ranges or negative seeds
    """
    seeds: List[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            if "-" in part:
                start_str, end_str = part.split("-", 1)
                start, end = int(start_str), int(end_str)
                if end < start:
                    raise MeshPlanError(f"Invalid seed range '{part}'")
                seeds.extend(range(start, end + 1))
            else:
                seeds.append(int(part))
        except ValueError:
            raise MeshPlanError(f"Invalid seed list entry '{part}'")

    if any(seed < 0 for seed in seeds):
        raise MeshPlanError("Seeds must be non-negative")
    if not seeds:
        raise MeshPlanError(f"Empty seed list: '{text}'")
    return seeds
