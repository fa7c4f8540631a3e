#!/usr/bin/env python3
"""
Experiment run records for meshplan.

Every run of a batch owns one directory below the output directory:

    <out>/runs/<run_id>/record.json     RunRecord (status, timestamps, error)
    <out>/runs/<run_id>/config.json     NetworkConfiguration of the run
    <out>/runs/<run_id>/metrics.json    RunMetrics of the run
    <out>/runs/<run_id>/run.log         RunLogger output

A run counts as complete when its record says "done" and its metrics file
exists; the batch runner skips complete runs on resume. Removing a run
directory makes the next resume recompute it.
"""

import os
import shutil
import time
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional

from meshplan.utils import MeshPlanError, make_run_id, read_json, write_json

RUNS_DIR = "runs"
RECORD_FILE = "record.json"
CONFIG_FILE = "config.json"
METRICS_FILE = "metrics.json"

STATUS_PENDING = "pending"
STATUS_RUNNING = "running"
STATUS_DONE = "done"
STATUS_FAILED = "failed"


class StoreError(MeshPlanError):
    """Exception raised for missing experiment directories or runs."""

    pass


@dataclass
class RunRecord:
    """Bookkeeping of one experiment run."""

    id: str = ""
    seed: int = 0
    strategy: str = ""
    status: str = STATUS_PENDING
    created_at: float = field(default_factory=time.time)
    started_at: Optional[float] = None
    finished_at: Optional[float] = None
    runtime_s: Optional[float] = None
    error: Optional[str] = None

    def __post_init__(self):
        if not self.id:
            self.id = make_run_id(self.seed, self.strategy)


def runs_path(out_dir: str) -> str:
    return os.path.join(out_dir, RUNS_DIR)


def run_path(out_dir: str, run_id: str) -> str:
    """Directory of one run."""
    return os.path.join(out_dir, RUNS_DIR, run_id)


def _record_path(out_dir: str, run_id: str) -> str:
    return os.path.join(run_path(out_dir, run_id), RECORD_FILE)


def _list_run_ids(out_dir: str) -> List[str]:
    path = runs_path(out_dir)
    if not os.path.isdir(path):
        return []
    return sorted(os.listdir(path))


def save_run_record(out_dir: str, record: RunRecord) -> str:
    """Save a run record and return its path."""
    path = _record_path(out_dir, record.id)
    write_json(path, asdict(record))
    return path


def load_run_record(out_dir: str, run_id: str) -> Optional[RunRecord]:
    """Load a run record; None if missing or unreadable."""
    path = _record_path(out_dir, run_id)
    if not os.path.exists(path):
        return None
    try:
        return RunRecord(**read_json(path))
    except (MeshPlanError, TypeError):
        return None


def update_run_status(
    out_dir: str,
    run_id: str,
    status: str,
    runtime_s: Optional[float] = None,
    error: Optional[str] = None,
) -> bool:
    """Update the status of an existing run record."""
    record = load_run_record(out_dir, run_id)
    if not record:
        return False

    record.status = status
    if status == STATUS_RUNNING:
        record.started_at = time.time()
        record.finished_at = None
        record.error = None
    if status in (STATUS_DONE, STATUS_FAILED):
        record.finished_at = time.time()
        if runtime_s is not None:
            record.runtime_s = runtime_s
        record.error = error

    save_run_record(out_dir, record)
    return True


def is_complete(out_dir: str, run_id: str) -> bool:
    """Check whether a run finished and left its metrics behind."""
    record = load_run_record(out_dir, run_id)
    if not record or record.status != STATUS_DONE:
        return False
    return os.path.exists(os.path.join(run_path(out_dir, run_id), METRICS_FILE))


def list_runs(out_dir: str, status: Optional[str] = None) -> List[RunRecord]:
    """Run records of an output directory ordered by run id."""
    records = []
    for run_id in _list_run_ids(out_dir):
        record = load_run_record(out_dir, run_id)
        if not record:
            continue
        if status is None or record.status == status:
            records.append(record)
    return records


def delete_run(out_dir: str, run_id: str) -> bool:
    """Delete a run directory."""
    try:
        shutil.rmtree(run_path(out_dir, run_id))
        return True
    except OSError:
        return False


class RunStore:
    """
    Run records of one output directory.

    Args:
        out_dir: Experiment output directory
        create: Create the runs directory; otherwise it must already exist

    Raises:
        StoreError: If create is False and out_dir holds no runs directory
    """

    def __init__(self, out_dir: str, create: bool = True):
        self.out_dir = out_dir
        if create:
            os.makedirs(runs_path(out_dir), exist_ok=True)
        elif not os.path.isdir(runs_path(out_dir)):
            raise StoreError(f"Not an experiment directory: {out_dir}")

    def create(self, seed: int, strategy: str) -> RunRecord:
        record = RunRecord(seed=seed, strategy=strategy)
        save_run_record(self.out_dir, record)
        return record

    def get(self, run_id: str) -> Optional[RunRecord]:
        return load_run_record(self.out_dir, run_id)

    def require(self, run_id: str) -> RunRecord:
        record = self.get(run_id)
        if record is None:
            raise StoreError(f"Run not found: {run_id}")
        return record

    def update_status(self, run_id: str, status: str, **kwargs) -> bool:
        return update_run_status(self.out_dir, run_id, status, **kwargs)

    def path(self, run_id: str) -> str:
        return run_path(self.out_dir, run_id)

    def is_complete(self, run_id: str) -> bool:
        return is_complete(self.out_dir, run_id)

    def delete(self, run_id: str) -> bool:
        return delete_run(self.out_dir, run_id)

    def list(self, status: Optional[str] = None) -> List[RunRecord]:
        return list_runs(self.out_dir, status)

    def summary(self) -> Dict[str, int]:
        """Number of runs per status."""
        counts: Dict[str, int] = {}
        for record in self.list():
            counts[record.status] = counts.get(record.status, 0) + 1
        return counts
