#!/usr/bin/env python3
"""
Active link selection for meshplan.

Chooses the subset of candidate links the network will actually use.
Starting from the gateways, every node fills each of its sectors with the
heaviest eligible links until the sector holds ``k`` active links; nodes
reached this way are processed next, breadth first:

    current = [gateways]
    while current:
        for node in current:
            for sector in node:
                add heaviest links while sector < k and far sector < k
        current = nodes attached in this pass

Optional constraints:
- avoid list: links the feedback loop found hard to schedule
- bipartite: 2-coloring grown with the topology; a link may only join
  differently colored nodes, a colorless end takes the other color

Nodes left without a path to a gateway trigger a rerun with k + 1, up to
``max_k_escalation`` times.
"""

import math
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Dict, FrozenSet, Iterable, List, Mapping, Optional, Set, Union

import networkx as nx

from meshplan.logger import get_logger
from meshplan.netmodel import (
    Link,
    LinkKey,
    SectorId,
    Topology,
    link_key,
    parse_topology,
    topology_to_dict,
)
from meshplan.utils import MeshPlanError, read_json, write_json

logger = get_logger(__name__)

AvoidList = FrozenSet[LinkKey]

# Super-source used for multi-source BFS; node ids are never empty
_SOURCE = ""


class SelectionError(MeshPlanError):
    """Exception raised during active link selection."""

    pass


@dataclass
class SelectionConfig:
    """Link selection parameters."""

    k: int = 2
    bipartite: bool = False
    max_k_escalation: int = 2

    def __post_init__(self):
        if self.k < 1:
            raise SelectionError(f"k must be >= 1, got {self.k}")
        if self.max_k_escalation < 0:
            raise SelectionError("max_k_escalation must be >= 0")


@dataclass(frozen=True)
class LinkWeights:
    """Traffic weights of links plus the nodes that could not be routed."""

    weights: Dict[LinkKey, float]
    disconnected: FrozenSet[str] = frozenset()
    paths: Dict[str, List[str]] = field(default_factory=dict)

    def __getitem__(self, key: LinkKey) -> float:
        return self.weights[key]

    def get(self, key: LinkKey, default: float = 0.0) -> float:
        return self.weights.get(key, default)


@dataclass(frozen=True)
class ActiveTopology:
    """The selected links of one planning round."""

    base: Topology
    active_links: FrozenSet[LinkKey]
    colors: Optional[Dict[str, int]] = None
    unconnected: FrozenSet[str] = frozenset()
    k_used: int = 1
    avoid: AvoidList = frozenset()

    @property
    def bipartite(self) -> bool:
        return self.colors is not None

    def links(self) -> List[Link]:
        """Active links in canonical order."""
        return [self.base.link_map[key] for key in sorted(self.active_links)]

    @cached_property
    def topology(self) -> Topology:
        """The base topology restricted to active links."""
        return self.base.with_links(self.active_links)

    def as_topology(self) -> Topology:
        return self.topology

    def graph(self) -> nx.Graph:
        return self.topology.graph()

    def connected_nodes(self) -> List[str]:
        return sorted(set(self.base.node_map) - self.unconnected)


def shortest_path_parents(graph: nx.Graph, sources: Iterable[str]) -> Dict[str, str]:
    """
    Multi-source BFS parents with a deterministic tie-break.

    Sources are entered in id order and neighbors are scanned in id order, so
    every node keeps the parent that discovers it first. Sources themselves
    are absent from the result.
    """
    augmented = nx.Graph(graph)
    augmented.add_node(_SOURCE)
    for source in sorted(sources):
        augmented.add_edge(_SOURCE, source)

    parents = {}
    for parent, child in nx.bfs_edges(augmented, _SOURCE, sort_neighbors=sorted):
        if parent != _SOURCE:
            parents[child] = parent
    return parents


def weight_links(
    topology: Topology, traffic: Optional[Mapping[str, float]] = None
) -> LinkWeights:
    """
    Weigh links by the demand routed over shortest hop-count paths.

    Each non-gateway node sends its demand (1.0 by default) along one
    shortest path to the nearest gateway, chosen by
    ``shortest_path_parents``; a link weighs the total demand crossing it.

    Args:
        topology: Topology whose links are weighed
        traffic: Optional per-node demand

    Returns:
        LinkWeights with a weight for every link; nodes without any gateway
        path are listed in ``disconnected`` and contribute nothing

    Raises:
        SelectionError: On negative demand
    """
    traffic = traffic or {}
    for node_id, demand in traffic.items():
        if demand < 0:
            raise SelectionError(f"Negative demand {demand} for node {node_id}")

    gateways = topology.gateways()
    parents = shortest_path_parents(topology.graph(), gateways)

    weights = {link.key: 0.0 for link in topology.links}
    paths = {}
    disconnected = set()

    for node in topology.nodes:
        if node.is_gateway:
            continue
        if node.id not in parents:
            disconnected.add(node.id)
            continue

        demand = float(traffic.get(node.id, 1.0))
        path = [node.id]
        while path[-1] in parents:
            parent = parents[path[-1]]
            weights[link_key(path[-1], parent)] += demand
            path.append(parent)
        paths[node.id] = path

    if disconnected:
        logger.debug("weight_links: %d node(s) without gateway path", len(disconnected))

    return LinkWeights(
        weights=weights, disconnected=frozenset(disconnected), paths=paths
    )


def reachable_from_gateways(topology: Topology, links: Iterable[LinkKey]) -> Set[str]:
    """Nodes reachable from any gateway over the given links."""
    graph = topology.with_links(links).graph()
    reachable: Set[str] = set()
    for gateway in topology.gateways():
        if gateway not in reachable:
            reachable |= nx.node_connected_component(graph, gateway)
    return reachable


def _candidate_links(
    topology: Topology, node_id: str, weight_of: Mapping[LinkKey, float]
) -> Dict[int, List[Link]]:
    """Incident links grouped by the node's sector, heaviest first."""
    by_sector: Dict[int, List[Link]] = {}
    for link in topology.adjacency[node_id]:
        by_sector.setdefault(link.sector_at(node_id).index, []).append(link)
    for links in by_sector.values():
        links.sort(key=lambda link: (-weight_of.get(link.key, 0.0), link.key))
    return by_sector


def _colors_allow(colors: Dict[str, int], near: str, far: str) -> bool:
    near_color, far_color = colors.get(near), colors.get(far)
    return near_color is None or far_color is None or near_color != far_color


def _assign_colors(colors: Dict[str, int], near: str, far: str) -> None:
    if near not in colors and far not in colors:
        colors[near] = 0
    if near not in colors:
        colors[near] = 1 - colors[far]
    if far not in colors:
        colors[far] = 1 - colors[near]


def _greedy_select(
    topology: Topology,
    weight_of: Mapping[LinkKey, float],
    k: int,
    bipartite: bool,
    avoid: AvoidList,
) -> ActiveTopology:
    """One breadth-first selection pass with a fixed per-sector cap."""
    degree: Counter = Counter()
    active: Set[LinkKey] = set()
    colors: Optional[Dict[str, int]] = {} if bipartite else None

    gateways = topology.gateways()
    attached = set(gateways)
    current = list(gateways)

    while current:
        newly_attached: Set[str] = set()
        for node_id in current:
            node = topology.node(node_id)
            candidates = _candidate_links(topology, node_id, weight_of)
            for index in range(node.sector_count):
                sector = SectorId(node_id, index)
                for link in candidates.get(index, []):
                    if degree[sector] >= k:
                        break
                    if link.key in active or link.key in avoid:
                        continue
                    far = link.other(node_id)
                    far_sector = link.sector_at(far)
                    if degree[far_sector] >= k:
                        continue
                    if colors is not None:
                        if not _colors_allow(colors, node_id, far):
                            continue
                        _assign_colors(colors, node_id, far)

                    active.add(link.key)
                    degree[sector] += 1
                    degree[far_sector] += 1
                    if far not in attached:
                        attached.add(far)
                        newly_attached.add(far)
        current = sorted(newly_attached)

    reachable = reachable_from_gateways(topology, active)
    unconnected = frozenset(set(topology.node_map) - reachable)
    return ActiveTopology(
        base=topology,
        active_links=frozenset(active),
        colors=colors,
        unconnected=unconnected,
        k_used=k,
        avoid=avoid,
    )


def select_active_links(
    topology: Topology,
    weights: Union[LinkWeights, Mapping[LinkKey, float]],
    config: SelectionConfig,
    avoid: Iterable[LinkKey] = (),
) -> ActiveTopology:
    """
    Select the active topology.

    Args:
        topology: Candidate topology
        weights: Link weights from weight_links on the full topology
        config: Fan-out cap, bipartite mode and escalation budget
        avoid: Links that must not be selected

    Returns:
        ActiveTopology; ``unconnected`` lists nodes left without a gateway
        path after the escalation budget is spent

    Raises:
        SelectionError: If the topology has no gateway
    """
    if not topology.gateways():
        raise SelectionError("Topology has no gateway node")

    weight_of = weights.weights if isinstance(weights, LinkWeights) else weights
    avoid_set = frozenset(link_key(u, v) for u, v in avoid)

    k = config.k
    result = _greedy_select(topology, weight_of, k, config.bipartite, avoid_set)
    escalations = 0
    while result.unconnected and escalations < config.max_k_escalation:
        escalations += 1
        k += 1
        logger.info(
            "selection: %d node(s) unconnected, retrying with k=%d",
            len(result.unconnected),
            k,
        )
        result = _greedy_select(topology, weight_of, k, config.bipartite, avoid_set)

    return result


def sector_degrees(active: ActiveTopology) -> Counter:
    """Number of active links per sector."""
    degree: Counter = Counter()
    for link in active.links():
        degree[link.sector_a] += 1
        degree[link.sector_b] += 1
    return degree


def fanout_delay_bound(k: int, n: int) -> float:
    """
    Approximate worst-case delay bound k * log_k(N).

    Raises:
        SelectionError: If k < 2 or N < 2
    """
    if k < 2:
        raise SelectionError(f"fan-out bound needs k >= 2, got {k}")
    if n < 2:
        raise SelectionError(f"fan-out bound needs N >= 2, got {n}")
    return k * math.log(n) / math.log(k)


def suggest_fanout(n: int, candidates: Iterable[int] = (2, 3)) -> int:
    """Fan-out minimizing the delay bound; ties go to the smaller k."""
    return min(candidates, key=lambda k: (fanout_delay_bound(k, n), k))


# =============================================================================
# JSON interchange
# =============================================================================


def active_to_dict(active: ActiveTopology) -> Dict[str, Any]:
    return {
        "topology": topology_to_dict(active.base),
        "active_links": [list(key) for key in sorted(active.active_links)],
        "colors": (
            dict(sorted(active.colors.items())) if active.colors is not None else None
        ),
        "unconnected": sorted(active.unconnected),
        "k_used": active.k_used,
        "avoid": [list(key) for key in sorted(active.avoid)],
    }


def parse_active(data: Dict[str, Any]) -> ActiveTopology:
    """
    Parse an ActiveTopology JSON document.

    Raises:
        SelectionError: On missing sections
    """
    try:
        base = parse_topology(data["topology"])
        active_links = frozenset(link_key(u, v) for u, v in data["active_links"])
    except (KeyError, TypeError, ValueError) as e:
        raise SelectionError(f"Invalid active topology document: {e}")

    colors = data.get("colors")
    return ActiveTopology(
        base=base,
        active_links=active_links,
        colors=(
            {str(n): int(c) for n, c in colors.items()} if colors is not None else None
        ),
        unconnected=frozenset(data.get("unconnected", [])),
        k_used=int(data.get("k_used", 1)),
        avoid=parse_avoid(data.get("avoid", [])),
    )


def parse_avoid(data: Any) -> AvoidList:
    """Accept a list of [a, b] pairs or {"avoid": [...]}."""
    if isinstance(data, dict):
        data = data.get("avoid", [])
    try:
        return frozenset(link_key(str(u), str(v)) for u, v in data)
    except (TypeError, ValueError) as e:
        raise SelectionError(f"Invalid avoid list: {e}")


def load_active(path: str) -> ActiveTopology:
    return parse_active(read_json(path))


def save_active(active: ActiveTopology, path: str) -> None:
    write_json(path, active_to_dict(active))
