#!/usr/bin/env python3
"""
Run metrics and batch statistics for meshplan.

Provides:
- RunMetrics: every scalar and per-path figure of one planning run
- aggregate(): per-strategy distributions (min, q1, median, q3, max, mean)
- CSV writers and readers with fixed headers

CSV Files
=========

    runs.csv    one row per run, columns RUNS_FIELDS
    delays.csv  one row per evaluated path delay, columns DELAYS_FIELDS
    dist.csv    one row per (strategy, metric, statistic), columns DIST_FIELDS

Quartiles use the nearest-rank convention (the smallest sample with at
least the requested share of samples at or below it); the median is the
usual middle value, the mean of the two middle samples for even counts.

Every column is a function of the topology, strategy and seed alone, except
the wall-clock runtime_s named in VOLATILE_FIELDS: it is a runs.csv column
and a dist.csv metric. Run records hold timestamps and never reach the CSVs.
"""

import csv
import os
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np

from meshplan.netmodel import Topology
from meshplan.pipeline import NetworkConfiguration
from meshplan.routing import alternative_paths, disjointness_report
from meshplan.scheduler import (
    ALTERNATIVE,
    DOWNSTREAM,
    PRIMARY,
    UPSTREAM,
    PathDelay,
    evaluate_paths,
)
from meshplan.tsgen import edge_coloring_ratio, max_degree
from meshplan.utils import MeshPlanError, read_json, write_json

RUNS_CSV = "runs.csv"
DELAYS_CSV = "delays.csv"
DIST_CSV = "dist.csv"

STATISTICS = ("min", "q1", "median", "q3", "max", "mean")

# Distributions built from per-path samples instead of per-run values
PRIMARY_DELAY = "primary_delay"
PRIMARY_DELAY_UP = "primary_delay_up"
PRIMARY_DELAY_DOWN = "primary_delay_down"
ALTERNATIVE_DELAY = "alternative_delay"


class MetricsError(MeshPlanError):
    """Exception raised for malformed metric data."""

    pass


@dataclass
class RunMetrics:
    """Figures of one planning run."""

    run_id: str = ""
    seed: int = 0
    strategy: str = ""
    runtime_s: float = 0.0
    nodes: int = 0
    candidate_links: int = 0
    active_links: int = 0
    selected_link_ratio: float = 0.0
    k_used: int = 0
    trees: int = 0
    tss_length: int = 0
    max_degree: int = 0
    edge_coloring_ratio: float = 0.0
    avg_links_per_slot: float = 0.0
    worst_case_delay: int = 0
    mean_delay: float = 0.0
    avg_disjoint_paths: float = 0.0
    nodes_without_disjoint: int = 0
    unconnected: int = 0
    feedback_rounds: int = 0
    avoid_size: int = 0
    link_reduction: int = 0
    worst_before_feedback: Optional[int] = None
    worst_after_feedback: Optional[int] = None
    paths: List[PathDelay] = field(default_factory=list)

    def delays(self, kind: str = PRIMARY, direction: Optional[str] = None) -> List[int]:
        """Worst-case path delays of one kind, optionally one direction."""
        return [
            p.worst
            for p in self.paths
            if p.kind == kind and (direction is None or p.direction == direction)
        ]

    @property
    def feedback_activated(self) -> bool:
        return self.feedback_rounds > 0


# runs.csv columns: every RunMetrics field except the per-path list
RUNS_FIELDS = tuple(f.name for f in fields(RunMetrics) if f.name != "paths")
DELAYS_FIELDS = (
    "run_id",
    "seed",
    "strategy",
    "node",
    "direction",
    "kind",
    "hops",
    "worst",
    "best",
    "mean",
)
DIST_FIELDS = ("strategy", "metric", "statistic", "value")

_INT_FIELDS = {f.name for f in fields(RunMetrics) if f.type in (int, "int")}
_OPTIONAL_INT_FIELDS = {"worst_before_feedback", "worst_after_feedback"}
_FLOAT_FIELDS = {f.name for f in fields(RunMetrics) if f.type in (float, "float")}


def collect_metrics(
    configuration: NetworkConfiguration,
    topology: Topology,
    runtime_s: float,
    run_id: str = "",
    seed: int = 0,
    include_alternatives: bool = True,
) -> RunMetrics:
    """
    Gather the figures of one finished run.

    Args:
        configuration: Pipeline result
        topology: Candidate topology the run started from
        runtime_s: Wall-clock seconds spent in run_pipeline
        run_id: Run identifier for the CSV rows
        seed: Generator seed of the topology
        include_alternatives: Also evaluate every non-primary tree path
    """
    active = configuration.active
    tss = configuration.tss
    schedule = configuration.schedule

    paths = list(configuration.delays.paths)
    if include_alternatives:
        alternatives = {
            n: p for n, p in alternative_paths(configuration.routing).items() if p
        }
        if alternatives:
            report = evaluate_paths(schedule, tss, {}, alternatives)
            paths.extend(report.paths)

    disjoint = disjointness_report(configuration.routing)
    candidate = len(topology.links)
    set_sizes = [len(ts) for ts in tss.sets]

    rounds = configuration.rounds
    worst_before = rounds[0].worst_before if rounds else None
    worst_after = rounds[-1].worst_after if rounds else None

    return RunMetrics(
        run_id=run_id,
        seed=seed,
        strategy=configuration.strategy,
        runtime_s=float(runtime_s),
        nodes=topology.N,
        candidate_links=candidate,
        active_links=len(active.active_links),
        selected_link_ratio=len(active.active_links) / candidate if candidate else 0.0,
        k_used=active.k_used,
        trees=len(configuration.routing.trees),
        tss_length=len(tss),
        max_degree=max_degree(active),
        edge_coloring_ratio=edge_coloring_ratio(tss, active),
        avg_links_per_slot=sum(set_sizes) / len(set_sizes) if set_sizes else 0.0,
        worst_case_delay=configuration.delays.worst_case,
        mean_delay=configuration.delays.mean,
        avg_disjoint_paths=disjoint.average,
        nodes_without_disjoint=len(disjoint.below_two),
        unconnected=len(active.unconnected),
        feedback_rounds=configuration.feedback_rounds,
        avoid_size=len(configuration.avoid_final),
        link_reduction=configuration.initial_selected - len(active.active_links),
        worst_before_feedback=worst_before,
        worst_after_feedback=worst_after,
        paths=paths,
    )


# =============================================================================
# Statistics
# =============================================================================


def quantiles(values: Sequence[float]) -> Dict[str, float]:
    """
    Summary statistics of a sample.

    Raises:
        MetricsError: On an empty sample
    """
    if len(values) == 0:
        raise MetricsError("Cannot summarize an empty sample")
    data = np.asarray(values, dtype=float)
    return {
        "min": float(data.min()),
        "q1": float(np.percentile(data, 25, method="inverted_cdf")),
        "median": float(np.median(data)),
        "q3": float(np.percentile(data, 75, method="inverted_cdf")),
        "max": float(data.max()),
        "mean": float(data.mean()),
    }


@dataclass
class DistRow:
    strategy: str
    metric: str
    statistic: str
    value: float


VOLATILE_FIELDS = ("runtime_s",)

AGGREGATE_METRICS = (
    "runtime_s",
    "selected_link_ratio",
    "active_links",
    "tss_length",
    "edge_coloring_ratio",
    "avg_links_per_slot",
    "worst_case_delay",
    "mean_delay",
    "avg_disjoint_paths",
    "nodes_without_disjoint",
    "feedback_rounds",
    "avoid_size",
    "link_reduction",
    "worst_before_feedback",
    "worst_after_feedback",
)


def _samples(batch: Sequence[RunMetrics]) -> Dict[str, List[float]]:
    samples: Dict[str, List[float]] = {}
    for metric in AGGREGATE_METRICS:
        values = [getattr(m, metric) for m in batch]
        samples[metric] = [float(v) for v in values if v is not None]
    samples[PRIMARY_DELAY] = [float(d) for m in batch for d in m.delays(PRIMARY)]
    samples[PRIMARY_DELAY_UP] = [
        float(d) for m in batch for d in m.delays(PRIMARY, UPSTREAM)
    ]
    samples[PRIMARY_DELAY_DOWN] = [
        float(d) for m in batch for d in m.delays(PRIMARY, DOWNSTREAM)
    ]
    samples[ALTERNATIVE_DELAY] = [
        float(d) for m in batch for d in m.delays(ALTERNATIVE)
    ]
    return samples


def aggregate(batch: Sequence[RunMetrics], group_by: str = "strategy") -> List[DistRow]:
    """
    Per-group distributions of every metric.

    Per-run metrics use one value per run; the delay distributions pool
    every path of every run in the group. Metrics without any sample in a
    group (for example pre-feedback delays when feedback never fired) are
    left out.

    Raises:
        MetricsError: On an empty batch or unknown group field
    """
    if not batch:
        raise MetricsError("Cannot aggregate an empty batch")
    if group_by not in RUNS_FIELDS:
        raise MetricsError(f"Unknown group field: {group_by}")

    groups: Dict[str, List[RunMetrics]] = {}
    for metrics in batch:
        groups.setdefault(str(getattr(metrics, group_by)), []).append(metrics)

    rows = []
    for group in sorted(groups):
        for metric, values in _samples(groups[group]).items():
            if not values:
                continue
            for statistic, value in quantiles(values).items():
                rows.append(DistRow(group, metric, statistic, value))
    return rows


def iqr_overlap(rows: Iterable[DistRow], metric: str) -> bool:
    """
    Check that the interquartile ranges of every pair of groups overlap.

    Raises:
        MetricsError: If the metric has no quartiles in the rows
    """
    q1: Dict[str, float] = {}
    q3: Dict[str, float] = {}
    for row in rows:
        if row.metric != metric:
            continue
        if row.statistic == "q1":
            q1[row.strategy] = row.value
        elif row.statistic == "q3":
            q3[row.strategy] = row.value
    if not q1:
        raise MetricsError(f"No quartiles for metric {metric}")

    groups = sorted(q1)
    for i, a in enumerate(groups):
        for b in groups[i + 1 :]:
            if q1[a] > q3[b] or q1[b] > q3[a]:
                return False
    return True


# =============================================================================
# CSV files
# =============================================================================


def _format(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_runs_csv(batch: Sequence[RunMetrics], path: str) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=RUNS_FIELDS, lineterminator="\n")
        writer.writeheader()
        for metrics in batch:
            writer.writerow(
                {name: _format(getattr(metrics, name)) for name in RUNS_FIELDS}
            )


def write_delays_csv(batch: Sequence[RunMetrics], path: str) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=DELAYS_FIELDS, lineterminator="\n")
        writer.writeheader()
        for metrics in batch:
            for p in metrics.paths:
                writer.writerow(
                    {
                        "run_id": metrics.run_id,
                        "seed": metrics.seed,
                        "strategy": metrics.strategy,
                        "node": p.node,
                        "direction": p.direction,
                        "kind": p.kind,
                        "hops": p.hops,
                        "worst": p.worst,
                        "best": p.best,
                        "mean": _format(float(p.mean)),
                    }
                )


def write_dist_csv(rows: Sequence[DistRow], path: str) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=DIST_FIELDS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(
                {
                    "strategy": row.strategy,
                    "metric": row.metric,
                    "statistic": row.statistic,
                    "value": _format(float(row.value)),
                }
            )


def _read_rows(path: str, expected: Sequence[str]) -> List[Dict[str, str]]:
    if not os.path.exists(path):
        raise MetricsError(f"CSV file not found: {path}")
    with open(path, "r", newline="") as f:
        reader = csv.DictReader(f)
        if tuple(reader.fieldnames or ()) != tuple(expected):
            raise MetricsError(f"Unexpected header in {path}: {reader.fieldnames}")
        return list(reader)


def _parse_run_value(name: str, text: str) -> Any:
    if name in _OPTIONAL_INT_FIELDS:
        return int(text) if text else None
    if name in _INT_FIELDS:
        return int(text)
    if name in _FLOAT_FIELDS:
        return float(text)
    return text


def read_runs_csv(path: str) -> List[RunMetrics]:
    """
    Read runs.csv back into RunMetrics (without per-path delays).

    Raises:
        MetricsError: On a missing file, wrong header or bad value
    """
    batch = []
    for row in _read_rows(path, RUNS_FIELDS):
        try:
            batch.append(
                RunMetrics(
                    **{name: _parse_run_value(name, row[name]) for name in RUNS_FIELDS}
                )
            )
        except ValueError as e:
            raise MetricsError(f"Bad value in {path}: {e}")
    return batch


def read_delays_csv(path: str) -> Dict[str, List[PathDelay]]:
    """Read delays.csv into run id -> path delays."""
    delays: Dict[str, List[PathDelay]] = {}
    for row in _read_rows(path, DELAYS_FIELDS):
        try:
            delays.setdefault(row["run_id"], []).append(
                PathDelay(
                    node=row["node"],
                    direction=row["direction"],
                    kind=row["kind"],
                    hops=int(row["hops"]),
                    worst=int(row["worst"]),
                    best=int(row["best"]),
                    mean=float(row["mean"]),
                )
            )
        except ValueError as e:
            raise MetricsError(f"Bad value in {path}: {e}")
    return delays


def read_dist_csv(path: str) -> List[DistRow]:
    rows = []
    for row in _read_rows(path, DIST_FIELDS):
        try:
            rows.append(
                DistRow(
                    row["strategy"],
                    row["metric"],
                    row["statistic"],
                    float(row["value"]),
                )
            )
        except ValueError as e:
            raise MetricsError(f"Bad value in {path}: {e}")
    return rows


def load_batch(directory: str) -> List[RunMetrics]:
    """Read runs.csv and delays.csv of an output directory together."""
    batch = read_runs_csv(os.path.join(directory, RUNS_CSV))
    delays_path = os.path.join(directory, DELAYS_CSV)
    if os.path.exists(delays_path):
        delays = read_delays_csv(delays_path)
        for metrics in batch:
            metrics.paths = delays.get(metrics.run_id, [])
    return batch


def write_batch(batch: Sequence[RunMetrics], directory: str) -> List[DistRow]:
    """Write all three CSV files, runs ordered by run id."""
    os.makedirs(directory, exist_ok=True)
    ordered = sorted(batch, key=lambda m: m.run_id)
    write_runs_csv(ordered, os.path.join(directory, RUNS_CSV))
    write_delays_csv(ordered, os.path.join(directory, DELAYS_CSV))
    rows = aggregate(ordered) if ordered else []
    write_dist_csv(rows, os.path.join(directory, DIST_CSV))
    return rows


# =============================================================================
# JSON interchange
# =============================================================================


def metrics_to_dict(metrics: RunMetrics) -> Dict[str, Any]:
    data = {name: getattr(metrics, name) for name in RUNS_FIELDS}
    data["paths"] = [asdict(p) for p in metrics.paths]
    return data


def parse_metrics(data: Dict[str, Any]) -> RunMetrics:
    """
    Parse a metrics.json document.

    Raises:
        MetricsError: On unknown or missing fields
    """
    try:
        values = {name: data[name] for name in RUNS_FIELDS if name in data}
        values["paths"] = [PathDelay(**item) for item in data.get("paths", [])]
        return RunMetrics(**values)
    except TypeError as e:
        raise MetricsError(f"Invalid metrics document: {e}")


def load_metrics(path: str) -> RunMetrics:
    return parse_metrics(read_json(path))


def save_metrics(metrics: RunMetrics, path: str) -> None:
    write_json(path, metrics_to_dict(metrics))
