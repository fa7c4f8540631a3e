#!/usr/bin/env python3
"""
Transmission set construction for meshplan.

A transmission set (TS) lists the directed links active in one time slot.
Sets are built round by round until both directions of every active link
have been scheduled at least once. Each round starts with all node modes
cleared and scans the directed links twice, heaviest first:

    pass 1: links not covered by any earlier set
    pass 2: every link, to fill the set up to maximality

A scanned link (u, v) joins the set iff
- neither of its sectors already carries a link in this set, and
- u is not in RX mode and v is not in TX mode;
u then becomes TX and v RX. All radios of a node share one mode per slot.

With sector filling on, every node whose mode a new link just fixed
immediately gets one more link for each of its still free sectors when a
compatible one exists.

Links first covered in the final round are the troublesome ones handed
back to link selection by the feedback loop.
"""

from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Deque, Dict, List, Mapping, Optional, Set, Tuple

from meshplan.netmodel import DirectedKey, DirectedLink, LinkKey, SectorId, link_key
from meshplan.routing import RoutingConfig
from meshplan.selection import ActiveTopology
from meshplan.utils import MeshPlanError, read_json, write_json


class TransmissionSetError(MeshPlanError):
    """Exception raised during transmission set construction."""

    pass


class Mode(str, Enum):
    TX = "TX"
    RX = "RX"


@dataclass
class TransmissionSet:
    """Directed links of one slot and the mode of every node they touch."""

    links: List[DirectedKey] = field(default_factory=list)
    mode: Dict[str, Mode] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.links)

    def __contains__(self, key: DirectedKey) -> bool:
        return key in self.links


@dataclass
class TransmissionSetCollection:
    """Ordered transmission sets covering every active link both ways."""

    sets: List[TransmissionSet] = field(default_factory=list)
    # link -> (first set with a->b, first set with b->a)
    coverage: Dict[LinkKey, Tuple[int, int]] = field(default_factory=dict)
    troublesome: Set[LinkKey] = field(default_factory=set)

    def __len__(self) -> int:
        return len(self.sets)

    def directed_links(self) -> List[DirectedKey]:
        """Every directed link that appears in some set."""
        return sorted({key for ts in self.sets for key in ts.links})


def schedule_weights(
    active: ActiveTopology, routing: RoutingConfig
) -> Dict[DirectedKey, float]:
    """
    Count the primary paths crossing each directed link.

    Upstream traffic follows each primary path toward its gateway and
    downstream traffic follows it back, so a primary u -> ... -> g adds one
    to (u, next) hops and one to their reverses.
    """
    weights: Dict[DirectedKey, float] = {}
    for link in active.links():
        weights[(link.a, link.b)] = 0.0
        weights[(link.b, link.a)] = 0.0

    for entry in routing.primary.values():
        path = entry.path
        for u, v in zip(path, path[1:]):
            weights[(u, v)] = weights.get((u, v), 0.0) + 1.0
            weights[(v, u)] = weights.get((v, u), 0.0) + 1.0
    return weights


class _SetBuilder:
    """Mutable state of one construction round."""

    def __init__(
        self,
        outgoing: Mapping[SectorId, List[DirectedLink]],
        incoming: Mapping[SectorId, List[DirectedLink]],
        sector_counts: Mapping[str, int],
        fill: bool,
        rank,
    ):
        self.outgoing = outgoing
        self.incoming = incoming
        self.sector_counts = sector_counts
        self.fill = fill
        self.rank = rank
        self.mode: Dict[str, Mode] = {}
        self.busy: Set[SectorId] = set()
        self.chosen: List[DirectedKey] = []
        self.chosen_set: Set[DirectedKey] = set()

    def addable(self, dl: DirectedLink) -> bool:
        if dl.key in self.chosen_set:
            return False
        if dl.tx_sector in self.busy or dl.rx_sector in self.busy:
            return False
        return self.mode.get(dl.tx) != Mode.RX and self.mode.get(dl.rx) != Mode.TX

    def _place(self, dl: DirectedLink) -> List[str]:
        """Add a link and return the nodes whose mode it fixed."""
        fixed = []
        if dl.tx not in self.mode:
            self.mode[dl.tx] = Mode.TX
            fixed.append(dl.tx)
        if dl.rx not in self.mode:
            self.mode[dl.rx] = Mode.RX
            fixed.append(dl.rx)
        self.busy.add(dl.tx_sector)
        self.busy.add(dl.rx_sector)
        self.chosen.append(dl.key)
        self.chosen_set.add(dl.key)
        return fixed

    def try_add(self, dl: DirectedLink) -> bool:
        if not self.addable(dl):
            return False
        pending: Deque[str] = deque(self._place(dl))
        while self.fill and pending:
            pending.extend(self._fill_sectors(pending.popleft()))
        return True

    def _fill_sectors(self, node: str) -> List[str]:
        """One compatible link per free sector of a freshly moded node."""
        fixed: List[str] = []
        pool = self.outgoing if self.mode[node] == Mode.TX else self.incoming
        for index in range(self.sector_counts[node]):
            sector = SectorId(node, index)
            if sector in self.busy:
                continue
            for dl in sorted(pool.get(sector, []), key=self.rank):
                if self.addable(dl):
                    fixed.extend(self._place(dl))
                    break
        return fixed

    def result(self) -> TransmissionSet:
        touched = {n for key in self.chosen for n in key}
        return TransmissionSet(
            links=list(self.chosen),
            mode={n: self.mode[n] for n in sorted(touched)},
        )


def build_transmission_sets(
    active: ActiveTopology,
    weights: Mapping[DirectedKey, float],
    per_node_sector_fill: bool = False,
    threshold: Optional[int] = None,
) -> TransmissionSetCollection:
    """
    Build maximal transmission sets until every directed link is covered.

    Args:
        active: Active topology
        weights: Directed link weights, typically from schedule_weights
        per_node_sector_fill: Fill every free sector of a node as soon as
            its mode is fixed
        threshold: Schedule length at or below which no link is troublesome;
            without it the links of the final round are always reported

    Returns:
        TransmissionSetCollection with coverage and troublesome links

    Raises:
        TransmissionSetError: On an empty topology, or if a round cannot
            schedule any uncovered link
    """
    links = active.links()
    if not links:
        raise TransmissionSetError("Active topology has no links to schedule")

    directed: List[DirectedLink] = []
    for link in links:
        directed.append(link.directed(link.a))
        directed.append(link.directed(link.b))

    def weight_rank(dl: DirectedLink) -> Tuple[float, str, str]:
        return (-weights.get(dl.key, 0.0), dl.tx, dl.rx)

    directed.sort(key=weight_rank)

    outgoing: Dict[SectorId, List[DirectedLink]] = {}
    incoming: Dict[SectorId, List[DirectedLink]] = {}
    for dl in directed:
        outgoing.setdefault(dl.tx_sector, []).append(dl)
        incoming.setdefault(dl.rx_sector, []).append(dl)
    sector_counts = {node.id: node.sector_count for node in active.base.nodes}

    first_cover: Dict[DirectedKey, int] = {}
    sets: List[TransmissionSet] = []

    while len(first_cover) < len(directed):
        round_index = len(sets)

        # Uncovered links first, then weight
        def rank(dl: DirectedLink) -> Tuple[bool, float, str, str]:
            return (dl.key in first_cover,) + weight_rank(dl)

        builder = _SetBuilder(
            outgoing, incoming, sector_counts, per_node_sector_fill, rank
        )
        for dl in directed:
            if dl.key not in first_cover:
                builder.try_add(dl)
        for dl in directed:
            builder.try_add(dl)

        newly = [key for key in builder.chosen if key not in first_cover]
        if not newly:
            raise TransmissionSetError(
                f"Round {round_index} scheduled no uncovered link; "
                f"{len(directed) - len(first_cover)} direction(s) unschedulable"
            )
        for key in newly:
            first_cover[key] = round_index
        sets.append(builder.result())

    coverage = {
        link.key: (first_cover[(link.a, link.b)], first_cover[(link.b, link.a)])
        for link in links
    }
    last = len(sets) - 1
    troublesome: Set[LinkKey] = set()
    if threshold is None or len(sets) > threshold:
        troublesome = {key for key, rounds in coverage.items() if last in rounds}

    return TransmissionSetCollection(
        sets=sets, coverage=coverage, troublesome=troublesome
    )


def max_degree(active: ActiveTopology) -> int:
    """Largest node degree of the active topology."""
    degree: Dict[str, int] = {}
    for link in active.links():
        degree[link.a] = degree.get(link.a, 0) + 1
        degree[link.b] = degree.get(link.b, 0) + 1
    return max(degree.values(), default=0)


def edge_coloring_ratio(
    tss: TransmissionSetCollection, active: ActiveTopology
) -> float:
    """|TSS| relative to the 2 * max-degree slots an edge coloring would use."""
    delta = max_degree(active)
    return len(tss) / (2 * delta) if delta else 0.0


# =============================================================================
# JSON interchange
# =============================================================================


def tss_to_dict(tss: TransmissionSetCollection) -> Dict[str, Any]:
    return {
        "sets": [
            {
                "links": [list(key) for key in ts.links],
                "mode": {n: m.value for n, m in sorted(ts.mode.items())},
            }
            for ts in tss.sets
        ],
        "coverage": [
            {"a": a, "b": b, "forward": rounds[0], "reverse": rounds[1]}
            for (a, b), rounds in sorted(tss.coverage.items())
        ],
        "troublesome": [list(key) for key in sorted(tss.troublesome)],
    }


def parse_tss(data: Dict[str, Any]) -> TransmissionSetCollection:
    """
    Parse a TransmissionSetCollection JSON document.

    Raises:
        TransmissionSetError: On malformed sections
    """
    try:
        sets = [
            TransmissionSet(
                links=[(str(tx), str(rx)) for tx, rx in item["links"]],
                mode={str(n): Mode(m) for n, m in item["mode"].items()},
            )
            for item in data["sets"]
        ]
        coverage = {
            link_key(item["a"], item["b"]): (int(item["forward"]), int(item["reverse"]))
            for item in data.get("coverage", [])
        }
        troublesome = {link_key(u, v) for u, v in data.get("troublesome", [])}
    except (KeyError, TypeError, ValueError) as e:
        raise TransmissionSetError(f"Invalid transmission set document: {e}")
    return TransmissionSetCollection(
        sets=sets, coverage=coverage, troublesome=troublesome
    )


def load_tss(path: str) -> TransmissionSetCollection:
    return parse_tss(read_json(path))


def save_tss(tss: TransmissionSetCollection, path: str) -> None:
    write_json(path, tss_to_dict(tss))
