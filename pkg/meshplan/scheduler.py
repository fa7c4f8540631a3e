#!/usr/bin/env python3
"""
Cyclic link schedule optimization for meshplan.

A schedule is an ordering of the transmission sets, repeated forever:

    slot   0     1     2     0     1     2    ...
    set   TS2   TS0   TS1   TS2   TS0   TS1

Delay semantics (in slots):
- a packet is ready at the start of its injection slot t0
- the first hop may transmit in t0 itself, every later hop in a slot
  strictly after the previous hop
- the delay runs from t0 through the slot of the last hop's transmission

The worst case over all injection slots is the figure of merit. Delay is
rotation invariant, so exhaustive search fixes set 0 in the first slot and
tries the remaining (L-1)! orders. Longer schedules use random shuffles as
starting points for simulated annealing with pairwise swaps.
"""

import itertools
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from meshplan.netmodel import DirectedKey
from meshplan.tsgen import TransmissionSetCollection
from meshplan.utils import MeshPlanError, read_json, write_json

UPSTREAM = "upstream"
DOWNSTREAM = "downstream"
PRIMARY = "primary"
ALTERNATIVE = "alternative"

Objective = Tuple[int, float]


class SchedulerError(MeshPlanError):
    """Exception raised during schedule evaluation or optimization."""

    pass


@dataclass
class Schedule:
    """Cyclic order of transmission set indices."""

    order: List[int] = field(default_factory=list)

    def __post_init__(self):
        self.order = [int(i) for i in self.order]
        if sorted(self.order) != list(range(len(self.order))):
            raise SchedulerError(f"Schedule order is not a permutation: {self.order}")

    @property
    def length(self) -> int:
        return len(self.order)


@dataclass
class PathDelay:
    node: str
    direction: str
    kind: str
    hops: int
    worst: int
    best: int
    mean: float


@dataclass
class DelayReport:
    """Delays of evaluated paths; aggregates cover primary paths only."""

    paths: List[PathDelay] = field(default_factory=list)
    worst_case: int = 0
    mean: float = 0.0

    @property
    def objective(self) -> Objective:
        return (self.worst_case, self.mean)

    def delays(self, direction: Optional[str] = None, kind: str = PRIMARY) -> List[int]:
        """Worst-case delays of one path kind, optionally one direction."""
        return [
            p.worst
            for p in self.paths
            if p.kind == kind and (direction is None or p.direction == direction)
        ]


@dataclass
class AnnealConfig:
    """Simulated annealing parameters (initial temperature defaults to the
    starting objective)."""

    initial_temperature: Optional[float] = None
    cooling: float = 0.995
    steps: int = 2000
    restarts: int = 10
    seed: int = 0
    brute_force_limit: int = 8

    def __post_init__(self):
        if self.initial_temperature is not None and self.initial_temperature <= 0:
            raise SchedulerError("initial_temperature must be > 0")
        if not 0 < self.cooling < 1:
            raise SchedulerError(f"cooling must be in (0, 1), got {self.cooling}")
        if self.steps < 0:
            raise SchedulerError("steps must be >= 0")
        if self.restarts < 1:
            raise SchedulerError("restarts must be >= 1")


def hops_of(path: Sequence[str], direction: str = UPSTREAM) -> List[DirectedKey]:
    """
    Directed hops of a node path given node first, gateway last.

    Downstream hops run from the gateway back to the node.
    """
    nodes = list(path) if direction == UPSTREAM else list(reversed(path))
    return list(zip(nodes, nodes[1:]))


def path_delay(
    schedule: Schedule,
    tss: TransmissionSetCollection,
    path: Sequence[DirectedKey],
    t0: int,
) -> int:
    """
    Slots needed to carry a packet along a directed hop list.

    Args:
        schedule: Cyclic set order
        tss: Transmission sets the order refers to
        path: Directed hops in travel order
        t0: Injection slot, 0 <= t0 < L

    Returns:
        s_m - t0 + 1 where s_m is the slot of the last hop

    Raises:
        SchedulerError: If t0 is out of range or a hop is never scheduled
    """
    length = schedule.length
    if not 0 <= t0 < length:
        raise SchedulerError(f"Injection slot {t0} outside [0, {length})")

    slots = [set(tss.sets[index].links) for index in schedule.order]
    slot = t0
    for i, hop in enumerate(path):
        start = t0 if i == 0 else slot + 1
        for offset in range(length):
            if tuple(hop) in slots[(start + offset) % length]:
                slot = start + offset
                break
        else:
            raise SchedulerError(f"Hop {hop[0]}->{hop[1]} is never scheduled")
    return slot - t0 + 1


class DelayEvaluator:
    """
    Vectorized delay evaluation of many paths over all injection slots.

    Example:
        evaluator = DelayEvaluator(tss, [hops_of(p) for p in paths])
        worst, best, mean = evaluator.evaluate([2, 0, 1])
    """

    def __init__(
        self, tss: TransmissionSetCollection, paths: Sequence[Sequence[DirectedKey]]
    ):
        self.set_count = len(tss)
        self.paths = [[tuple(hop) for hop in path] for path in paths]

        keys = sorted({hop for path in self.paths for hop in path})
        self.link_index = {key: i for i, key in enumerate(keys)}

        self.presence = np.zeros((len(keys), self.set_count), dtype=bool)
        for set_index, ts in enumerate(tss.sets):
            for key in ts.links:
                row = self.link_index.get(tuple(key))
                if row is not None:
                    self.presence[row, set_index] = True

        never = [keys[i] for i in np.flatnonzero(~self.presence.any(axis=1))]
        if never:
            tx, rx = never[0]
            raise SchedulerError(f"Hop {tx}->{rx} is never scheduled")

        self.max_hops = max((len(path) for path in self.paths), default=0)
        self.hop_index = np.full((len(self.paths), self.max_hops), -1, dtype=np.int64)
        for row, path in enumerate(self.paths):
            for col, hop in enumerate(path):
                self.hop_index[row, col] = self.link_index[hop]

    def _waits(self, order: Sequence[int]) -> np.ndarray:
        """wait[link, t]: slots from t until the link's next transmission."""
        present = self.presence[:, list(order)]
        length = present.shape[1]
        wait = np.full(present.shape, length, dtype=np.int64)
        for w in range(length - 1, -1, -1):
            wait[np.roll(present, -w, axis=1)] = w
        return wait

    def delays(self, order: Sequence[int]) -> np.ndarray:
        """Delay matrix of shape (paths, injection slots)."""
        length = len(order)
        t0 = np.arange(length, dtype=np.int64)
        slots = np.tile(t0, (len(self.paths), 1))
        if not self.paths:
            return slots
        wait = self._waits(order)
        for col in range(self.max_hops):
            rows = self.hop_index[:, col] >= 0
            links = self.hop_index[rows, col]
            start = slots[rows] + (1 if col > 0 else 0)
            slots[rows] = start + wait[links[:, None], start % length]
        return slots - t0 + 1

    def evaluate(
        self, order: Sequence[int]
    ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Per-path worst, best and mean delay over injection slots."""
        delays = self.delays(order)
        if not self.paths:
            empty = np.zeros(0)
            return empty.astype(np.int64), empty.astype(np.int64), empty
        return delays.max(axis=1), delays.min(axis=1), delays.mean(axis=1)

    def objective(self, order: Sequence[int]) -> Objective:
        """(max worst-case delay, mean worst-case delay) over all paths."""
        if not self.paths:
            return (0, 0.0)
        worst = self.delays(order).max(axis=1)
        return (int(worst.max()), int(worst.sum()) / len(worst))


def _directed_paths(
    paths: Mapping[str, Sequence[str]], kind: str
) -> List[Tuple[str, str, str, List[DirectedKey]]]:
    rows = []
    for node, path in sorted(paths.items()):
        for direction in (UPSTREAM, DOWNSTREAM):
            rows.append((node, direction, kind, hops_of(path, direction)))
    return rows


def evaluate_paths(
    schedule: Schedule,
    tss: TransmissionSetCollection,
    primaries: Mapping[str, Sequence[str]],
    alternatives: Optional[Mapping[str, Sequence[Sequence[str]]]] = None,
) -> DelayReport:
    """
    Delay report over primaries plus, optionally, alternative paths.

    Worst case and mean are taken over primary paths, both directions
    pooled; alternative paths are reported only.
    """
    rows = _directed_paths(primaries, PRIMARY)
    for node, paths in sorted((alternatives or {}).items()):
        for path in paths:
            for direction in (UPSTREAM, DOWNSTREAM):
                rows.append((node, direction, ALTERNATIVE, hops_of(path, direction)))

    evaluator = DelayEvaluator(tss, [row[3] for row in rows])
    worst, best, mean = evaluator.evaluate(schedule.order)

    report = DelayReport()
    for i, (node, direction, kind, hops) in enumerate(rows):
        report.paths.append(
            PathDelay(
                node=node,
                direction=direction,
                kind=kind,
                hops=len(hops),
                worst=int(worst[i]),
                best=int(best[i]),
                mean=float(mean[i]),
            )
        )

    primary_worst = report.delays(kind=PRIMARY)
    if primary_worst:
        report.worst_case = max(primary_worst)
        report.mean = sum(primary_worst) / len(primary_worst)
    return report


def worst_case_delay(
    schedule: Schedule,
    tss: TransmissionSetCollection,
    paths: Mapping[str, Sequence[str]],
) -> DelayReport:
    """
    Worst-case (over injection slot) delay of every primary path.

    Args:
        schedule: Cyclic set order
        tss: Transmission sets
        paths: Node -> primary node path (node first, gateway last)

    Returns:
        DelayReport with upstream and downstream delays of every path
    """
    return evaluate_paths(schedule, tss, paths)


def _canonical_rotation(order: Sequence[int]) -> Tuple[int, ...]:
    start = list(order).index(0)
    return tuple(order[start:]) + tuple(order[:start])


def _brute_force(evaluator: DelayEvaluator, length: int) -> Tuple[int, ...]:
    best_order: Tuple[int, ...] = tuple(range(length))
    best = evaluator.objective(best_order)
    for tail in itertools.permutations(range(1, length)):
        order = (0,) + tail
        value = evaluator.objective(order)
        if value < best:
            best, best_order = value, order
    return best_order


def _anneal(
    evaluator: DelayEvaluator, length: int, config: AnnealConfig
) -> Tuple[int, ...]:
    rng = np.random.default_rng(config.seed)
    cache: Dict[Tuple[int, ...], Objective] = {}

    def score(order: Sequence[int]) -> Objective:
        key = _canonical_rotation(order)
        if key not in cache:
            cache[key] = evaluator.objective(key)
        return cache[key]

    # mean <= worst <= L * hops, so the scaled mean never outweighs one slot
    scale = length * max(evaluator.max_hops, 1) + 1

    def energy(value: Objective) -> float:
        return value[0] + value[1] / scale

    best_order: Tuple[int, ...] = tuple(range(length))
    best = score(best_order)

    for _ in range(config.restarts):
        current = tuple(int(i) for i in rng.permutation(length))
        current_value = score(current)
        if current_value < best:
            best, best_order = current_value, current

        temperature = config.initial_temperature or max(energy(current_value), 1e-9)
        for _ in range(config.steps):
            if length < 2:
                break
            i, j = rng.choice(length, size=2, replace=False)
            candidate = list(current)
            candidate[i], candidate[j] = candidate[j], candidate[i]
            candidate_value = score(candidate)

            delta = energy(candidate_value) - energy(current_value)
            if delta <= 0 or rng.random() < math.exp(-delta / temperature):
                current, current_value = tuple(candidate), candidate_value
                if current_value < best:
                    best, best_order = current_value, current
            temperature *= config.cooling

    return _canonical_rotation(best_order)


def optimize_schedule(
    tss: TransmissionSetCollection,
    paths: Mapping[str, Sequence[str]],
    config: Optional[AnnealConfig] = None,
    force_anneal: bool = False,
) -> Tuple[Schedule, DelayReport]:
    """
    Find the set order minimizing (worst-case, mean) primary delay.

    Args:
        tss: Transmission sets
        paths: Node -> primary node path
        config: Annealing parameters and brute-force limit
        force_anneal: Anneal even when exhaustive search is possible

    Returns:
        (best schedule, its delay report)

    Raises:
        SchedulerError: If there are no transmission sets or a hop is never
            scheduled
    """
    config = config or AnnealConfig()
    length = len(tss)
    if length < 1:
        raise SchedulerError("Nothing to schedule: no transmission sets")

    primary_rows = [row[3] for row in _directed_paths(paths, PRIMARY)]
    evaluator = DelayEvaluator(tss, primary_rows)

    if length <= config.brute_force_limit and not force_anneal:
        order = _brute_force(evaluator, length)
    else:
        order = _anneal(evaluator, length, config)

    schedule = Schedule(order=list(order))
    return schedule, worst_case_delay(schedule, tss, paths)


# =============================================================================
# JSON interchange
# =============================================================================


def schedule_to_dict(
    schedule: Schedule, report: Optional[DelayReport] = None
) -> Dict[str, Any]:
    data: Dict[str, Any] = {"order": list(schedule.order), "length": schedule.length}
    if report is not None:
        data["delays"] = delay_report_to_dict(report)
    return data


def delay_report_to_dict(report: DelayReport) -> Dict[str, Any]:
    return {
        "worst_case": report.worst_case,
        "mean": report.mean,
        "paths": [
            {
                "node": p.node,
                "direction": p.direction,
                "kind": p.kind,
                "hops": p.hops,
                "worst": p.worst,
                "best": p.best,
                "mean": p.mean,
            }
            for p in report.paths
        ],
    }


def parse_delay_report(data: Dict[str, Any]) -> DelayReport:
    try:
        return DelayReport(
            paths=[PathDelay(**item) for item in data.get("paths", [])],
            worst_case=int(data["worst_case"]),
            mean=float(data["mean"]),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise SchedulerError(f"Invalid delay report: {e}")


def parse_schedule(data: Dict[str, Any]) -> Schedule:
    try:
        return Schedule(order=list(data["order"]))
    except (KeyError, TypeError) as e:
        raise SchedulerError(f"Invalid schedule document: {e}")


def load_schedule(path: str) -> Schedule:
    return parse_schedule(read_json(path))


def save_schedule(schedule: Schedule, report: Optional[DelayReport], path: str) -> None:
    write_json(path, schedule_to_dict(schedule, report))
