#!/usr/bin/env python3
"""
End-to-end network planning for meshplan.

Runs the four planning phases and the feedback loop between transmission
set construction and link selection:

    select ──► route (MDST) ──► transmission sets
      ▲                               │
      │     |TSS| > threshold         │
      └──── avoid troublesome links ◄─┘

    |TSS| <= threshold (or loop exhausted) ──► optimize set order

Strategies combine the link selection shape with the set filling rule:

    BS  bipartite, one link at a time
    BA  bipartite, allocate all sectors
    FS  free form, one link at a time
    FA  free form, allocate all sectors

Feedback rules:
- the avoid list only grows, except for links rolled back because avoiding
  them disconnected a node that the first round connected
- a round whose rollback still leaves nodes disconnected is discarded and
  the longer schedule is accepted
- diagnostics only add the optimized worst-case delay before and after each
  round to its record; the planned network is the same with or without them
"""

import dataclasses
from dataclasses import dataclass, field
from typing import Any, Dict, FrozenSet, List, NamedTuple, Optional, Tuple

from meshplan.logger import RunLogger, get_logger
from meshplan.netmodel import LinkKey, Topology, link_key
from meshplan.routing import RoutingConfig, compute_mdst, parse_routing, routing_to_dict
from meshplan.scheduler import (
    AnnealConfig,
    DelayReport,
    Schedule,
    delay_report_to_dict,
    optimize_schedule,
    parse_delay_report,
    parse_schedule,
    schedule_to_dict,
    worst_case_delay,
)
from meshplan.selection import (
    ActiveTopology,
    AvoidList,
    SelectionConfig,
    active_to_dict,
    parse_active,
    select_active_links,
    weight_links,
)
from meshplan.tsgen import (
    Mode,
    TransmissionSetCollection,
    build_transmission_sets,
    parse_tss,
    schedule_weights,
    tss_to_dict,
)
from meshplan.utils import MeshPlanError, read_json, write_json

logger = get_logger(__name__)


class PipelineError(MeshPlanError):
    """Exception raised during pipeline configuration or execution."""

    pass


@dataclass(frozen=True)
class Strategy:
    """Link selection shape plus transmission set filling rule."""

    bipartite: bool = False
    sector_fill: bool = False

    @property
    def name(self) -> str:
        return ("B" if self.bipartite else "F") + ("A" if self.sector_fill else "S")

    @classmethod
    def from_name(cls, name: str) -> "Strategy":
        """
        Parse BS, BA, FS or FA (case insensitive).

        Raises:
            PipelineError: On any other name
        """
        value = str(name).strip().upper()
        if len(value) != 2 or value[0] not in "BF" or value[1] not in "SA":
            raise PipelineError(
                f"Unknown strategy '{name}' (expected one of BS, BA, FS, FA)"
            )
        return cls(bipartite=value[0] == "B", sector_fill=value[1] == "A")

    def __str__(self) -> str:
        return self.name


STRATEGIES = tuple(Strategy.from_name(name) for name in ("BS", "BA", "FS", "FA"))


@dataclass
class PipelineConfig:
    """Planning parameters of one run."""

    strategy: Strategy = field(default_factory=Strategy)
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    tss_threshold: int = 8
    max_feedback_rounds: int = 8
    anneal: AnnealConfig = field(default_factory=AnnealConfig)
    diagnostics: bool = False
    max_trees: Optional[int] = None

    def __post_init__(self):
        if isinstance(self.strategy, str):
            self.strategy = Strategy.from_name(self.strategy)
        if self.tss_threshold < 2:
            raise PipelineError(f"tss_threshold must be >= 2, got {self.tss_threshold}")
        if self.max_feedback_rounds < 0:
            raise PipelineError("max_feedback_rounds must be >= 0")
        if self.max_trees is not None and self.max_trees < 1:
            raise PipelineError(f"max_trees must be >= 1, got {self.max_trees}")

    def selection_config(self) -> SelectionConfig:
        """Selection parameters with the strategy's bipartite flag applied."""
        return dataclasses.replace(self.selection, bipartite=self.strategy.bipartite)


@dataclass
class FeedbackRound:
    """Diagnostics of one feedback round."""

    round: int
    tss_before: int
    tss_after: int
    avoid_added: int
    avoid_size: int
    selected_before: int
    selected_after: int
    rolled_back: List[LinkKey] = field(default_factory=list)
    worst_before: Optional[int] = None
    worst_after: Optional[int] = None

    @property
    def link_delta(self) -> int:
        return self.selected_after - self.selected_before


@dataclass
class NetworkConfiguration:
    """Everything a planning run decides for the network."""

    active: ActiveTopology
    routing: RoutingConfig
    tss: TransmissionSetCollection
    schedule: Schedule
    delays: DelayReport
    feedback_rounds: int = 0
    avoid_final: AvoidList = frozenset()
    strategy: str = "FS"
    rounds: List[FeedbackRound] = field(default_factory=list)
    initial_tss: int = 0
    initial_selected: int = 0


class _Round(NamedTuple):
    active: ActiveTopology
    routing: RoutingConfig
    tss: TransmissionSetCollection


def _log(run_logger: Optional[RunLogger], message: str, *args) -> None:
    logger.debug(message, *args)
    if run_logger is not None:
        run_logger.write(message % args if args else message)


def _plan_round(
    topology: Topology,
    weights,
    config: PipelineConfig,
    avoid: AvoidList,
) -> _Round:
    """Selection, routing and transmission sets for one avoid list."""
    active = select_active_links(topology, weights, config.selection_config(), avoid)
    routing = compute_mdst(active, max_trees=config.max_trees)
    tss = build_transmission_sets(
        active,
        schedule_weights(active, routing),
        config.strategy.sector_fill,
        threshold=config.tss_threshold,
    )
    return _Round(active, routing, tss)


def _optimize(state: _Round, config: PipelineConfig) -> Tuple[Schedule, DelayReport]:
    return optimize_schedule(state.tss, state.routing.primary_paths(), config.anneal)


def run_pipeline(
    topology: Topology,
    config: Optional[PipelineConfig] = None,
    run_logger: Optional[RunLogger] = None,
) -> NetworkConfiguration:
    """
    Plan a complete network configuration.

    Args:
        topology: Candidate topology with at least one gateway
        config: Planning parameters
        run_logger: Optional per-run log receiving phase and round records

    Returns:
        NetworkConfiguration

    Raises:
        PipelineError: If the topology has no gateway
        MeshPlanError: Propagated from the planning phases
    """
    config = config or PipelineConfig()
    if not topology.gateways():
        raise PipelineError("Topology has no gateway node")

    strategy = config.strategy.name
    weights = weight_links(topology)
    avoid: AvoidList = frozenset()

    current = _plan_round(topology, weights, config, avoid)
    baseline_unconnected = current.active.unconnected
    _log(
        run_logger,
        "%s round 0: %d active links, %d trees, |TSS|=%d",
        strategy,
        len(current.active.active_links),
        len(current.routing.trees),
        len(current.tss),
    )

    initial_tss = len(current.tss)
    initial_selected = len(current.active.active_links)
    rounds: List[FeedbackRound] = []

    optimized: Optional[Tuple[Schedule, DelayReport]] = None
    if config.diagnostics and len(current.tss) > config.tss_threshold:
        optimized = _optimize(current, config)

    while len(current.tss) > config.tss_threshold:
        if len(rounds) >= config.max_feedback_rounds:
            logger.warning(
                "%s: feedback limit of %d round(s) reached, accepting |TSS|=%d",
                strategy,
                config.max_feedback_rounds,
                len(current.tss),
            )
            break

        added = frozenset(current.tss.troublesome) - avoid
        if not added:
            logger.warning(
                "%s: no new troublesome links, accepting |TSS|=%d",
                strategy,
                len(current.tss),
            )
            break

        candidate_avoid = avoid | added
        candidate = _plan_round(topology, weights, config, candidate_avoid)
        rolled_back: List[LinkKey] = []

        newly = candidate.active.unconnected - baseline_unconnected
        if newly:
            culprits = {key for key in added if key[0] in newly or key[1] in newly}
            retry_avoid = candidate_avoid - culprits
            rolled_back = sorted(culprits)
            if culprits and retry_avoid != avoid:
                candidate_avoid = retry_avoid
                candidate = _plan_round(topology, weights, config, candidate_avoid)
                newly = candidate.active.unconnected - baseline_unconnected
            if newly or retry_avoid == avoid:
                logger.warning(
                    "%s: avoiding troublesome links disconnects %s; "
                    "accepting the longer schedule",
                    strategy,
                    ", ".join(sorted(newly)) or "the network",
                )
                _log(run_logger, "%s feedback discarded: disconnects nodes", strategy)
                break
            logger.info(
                "%s: rolled back %d avoided link(s) to keep nodes connected",
                strategy,
                len(rolled_back),
            )

        record = FeedbackRound(
            round=len(rounds) + 1,
            tss_before=len(current.tss),
            tss_after=len(candidate.tss),
            avoid_added=len(candidate_avoid) - len(avoid),
            avoid_size=len(candidate_avoid),
            selected_before=len(current.active.active_links),
            selected_after=len(candidate.active.active_links),
            rolled_back=rolled_back,
        )

        candidate_optimized = None
        if config.diagnostics:
            candidate_optimized = _optimize(candidate, config)
            record.worst_before = optimized[1].worst_case if optimized else None
            record.worst_after = candidate_optimized[1].worst_case

        rounds.append(record)
        _log(
            run_logger,
            "%s feedback round %d: avoid +%d (%d), links %d -> %d, |TSS| %d -> %d",
            strategy,
            record.round,
            record.avoid_added,
            record.avoid_size,
            record.selected_before,
            record.selected_after,
            record.tss_before,
            record.tss_after,
        )

        avoid = candidate_avoid
        current = candidate
        optimized = candidate_optimized

    if optimized is None:
        optimized = _optimize(current, config)
    schedule, delays = optimized
    _log(
        run_logger,
        "%s schedule: L=%d, worst-case %d slots, mean %.3f",
        strategy,
        schedule.length,
        delays.worst_case,
        delays.mean,
    )

    return NetworkConfiguration(
        active=current.active,
        routing=current.routing,
        tss=current.tss,
        schedule=schedule,
        delays=delays,
        feedback_rounds=len(rounds),
        avoid_final=avoid,
        strategy=strategy,
        rounds=rounds,
        initial_tss=initial_tss,
        initial_selected=initial_selected,
    )


def validate_configuration(configuration: NetworkConfiguration) -> List[str]:
    """
    Check the internal consistency of a network configuration.

    Returns:
        List of problems (empty if consistent)
    """
    errors = []
    active = configuration.active
    active_keys = active.active_links
    tss = configuration.tss

    if configuration.schedule.length != len(tss):
        errors.append(
            f"Schedule length {configuration.schedule.length} != |TSS| {len(tss)}"
        )

    for node, path in configuration.routing.primary_paths().items():
        for u, v in zip(path, path[1:]):
            if link_key(u, v) not in active_keys:
                errors.append(f"Primary of {node}: hop {u}-{v} is not an active link")

    for tree in configuration.routing.trees:
        for key in tree.edges():
            if key not in active_keys:
                errors.append(f"Tree {tree.id}: edge {key[0]}-{key[1]} is not active")

    scheduled = set(tss.directed_links())
    for a, b in sorted(active_keys):
        for tx, rx in ((a, b), (b, a)):
            if (tx, rx) not in scheduled:
                errors.append(f"Directed link {tx}->{rx} is never scheduled")

    base = active.base
    for index, ts in enumerate(tss.sets):
        busy = set()
        for tx, rx in ts.links:
            if link_key(tx, rx) not in active_keys:
                errors.append(f"Set {index}: {tx}->{rx} is not an active link")
                continue
            link = base.link_between(tx, rx)
            for sector in (link.sector_at(tx), link.sector_at(rx)):
                if sector in busy:
                    errors.append(f"Set {index}: sector {sector} used twice")
                busy.add(sector)
            if ts.mode.get(tx) != Mode.TX or ts.mode.get(rx) != Mode.RX:
                errors.append(f"Set {index}: {tx}->{rx} disagrees with node modes")

    if not errors:
        recomputed = worst_case_delay(
            configuration.schedule, tss, configuration.routing.primary_paths()
        )
        if recomputed.worst_case != configuration.delays.worst_case:
            errors.append(
                f"Delay report worst case {configuration.delays.worst_case} "
                f"does not match the schedule ({recomputed.worst_case})"
            )

    return errors


# =============================================================================
# JSON interchange
# =============================================================================


def pipeline_config_to_dict(config: PipelineConfig) -> Dict[str, Any]:
    return {
        "strategy": config.strategy.name,
        "selection": dataclasses.asdict(config.selection),
        "tss_threshold": config.tss_threshold,
        "max_feedback_rounds": config.max_feedback_rounds,
        "anneal": dataclasses.asdict(config.anneal),
        "diagnostics": config.diagnostics,
        "max_trees": config.max_trees,
    }


def parse_pipeline_config(data: Dict[str, Any]) -> PipelineConfig:
    """
    Build a PipelineConfig from its JSON form.

    Raises:
        PipelineError: On unknown or invalid fields
    """
    try:
        return PipelineConfig(
            strategy=Strategy.from_name(data.get("strategy", "FS")),
            selection=SelectionConfig(**data.get("selection", {})),
            tss_threshold=int(data.get("tss_threshold", 8)),
            max_feedback_rounds=int(data.get("max_feedback_rounds", 8)),
            anneal=AnnealConfig(**data.get("anneal", {})),
            diagnostics=bool(data.get("diagnostics", False)),
            max_trees=data.get("max_trees"),
        )
    except (TypeError, ValueError) as e:
        raise PipelineError(f"Invalid pipeline config: {e}")


def _round_to_dict(record: FeedbackRound) -> Dict[str, Any]:
    data = dataclasses.asdict(record)
    data["rolled_back"] = [list(key) for key in record.rolled_back]
    return data


def configuration_to_dict(configuration: NetworkConfiguration) -> Dict[str, Any]:
    return {
        "strategy": configuration.strategy,
        "active": active_to_dict(configuration.active),
        "routing": routing_to_dict(configuration.routing),
        "tss": tss_to_dict(configuration.tss),
        "schedule": schedule_to_dict(configuration.schedule),
        "delays": delay_report_to_dict(configuration.delays),
        "feedback_rounds": configuration.feedback_rounds,
        "avoid_final": [list(key) for key in sorted(configuration.avoid_final)],
        "rounds": [_round_to_dict(r) for r in configuration.rounds],
        "initial_tss": configuration.initial_tss,
        "initial_selected": configuration.initial_selected,
    }


def parse_configuration(data: Dict[str, Any]) -> NetworkConfiguration:
    """
    Parse a NetworkConfiguration JSON document.

    Raises:
        PipelineError: On missing sections
    """
    try:
        rounds = []
        for item in data.get("rounds", []):
            item = dict(item)
            rolled_back = item.get("rolled_back", [])
            item["rolled_back"] = [link_key(u, v) for u, v in rolled_back]
            rounds.append(FeedbackRound(**item))
        avoid_final: FrozenSet[LinkKey] = frozenset(
            link_key(u, v) for u, v in data.get("avoid_final", [])
        )
        return NetworkConfiguration(
            active=parse_active(data["active"]),
            routing=parse_routing(data["routing"]),
            tss=parse_tss(data["tss"]),
            schedule=parse_schedule(data["schedule"]),
            delays=parse_delay_report(data["delays"]),
            feedback_rounds=int(data.get("feedback_rounds", 0)),
            avoid_final=avoid_final,
            strategy=str(data.get("strategy", "FS")),
            rounds=rounds,
            initial_tss=int(data.get("initial_tss", 0)),
            initial_selected=int(data.get("initial_selected", 0)),
        )
    except KeyError as e:
        raise PipelineError(f"Configuration document missing section {e}")
    except (TypeError, ValueError) as e:
        raise PipelineError(f"Invalid configuration document: {e}")


def load_configuration(path: str) -> NetworkConfiguration:
    return parse_configuration(read_json(path))


def save_configuration(configuration: NetworkConfiguration, path: str) -> None:
    write_json(path, configuration_to_dict(configuration))


def load_pipeline_config(path: str) -> PipelineConfig:
    return parse_pipeline_config(read_json(path))

