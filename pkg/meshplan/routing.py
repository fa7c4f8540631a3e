#!/usr/bin/env python3
"""
Multiple disjoint spanning tree (MDST) routing for meshplan.

Three phases over the active topology:

1. Weighting: active links are re-weighted by shortest-path demand.
2. Stems: every gateway link seeds a stem. All stems grow at once from a
   single priority queue ordered by (weight, stem, link); a node joins the
   first stem that reaches it and belongs to that stem only.
3. Expansion: each stem grows into a spanning tree rooted at its gateway,
   adding the heaviest link from the tree to a new node. Links touching the
   root are used last so a tree leaves its gateway through its own stem.

    stems                       trees
    g ── a ── c                 g ── a ── c        g ── b ── c
    g ── b                           b ─┘ (via g)       a ─┘ (via c)

Every plain node then gets a primary path: the fewest-hop path to the root
over all trees, equal hop counts going to the tree with fewest primaries.
"""

import heapq
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Set, Tuple

import networkx as nx

from meshplan.logger import get_logger
from meshplan.netmodel import LinkKey, link_key
from meshplan.selection import ActiveTopology, weight_links
from meshplan.utils import MeshPlanError, read_json, write_json

logger = get_logger(__name__)


class RoutingError(MeshPlanError):
    """Exception raised during routing tree construction."""

    pass


@dataclass
class SpanningTree:
    """One routing tree, stored as child -> parent."""

    id: int
    root: str
    parent: Dict[str, str] = field(default_factory=dict)

    def nodes(self) -> List[str]:
        return sorted(set(self.parent) | {self.root})

    def edges(self) -> List[LinkKey]:
        return sorted(link_key(child, parent) for child, parent in self.parent.items())

    def contains(self, node: str) -> bool:
        return node == self.root or node in self.parent

    def path_to_root(self, node: str) -> List[str]:
        """
        Node list from ``node`` to the root.

        Raises:
            RoutingError: If the node is not in the tree or the parent map
                loops
        """
        if not self.contains(node):
            raise RoutingError(f"Node {node} not in tree {self.id}")
        path = [node]
        while path[-1] != self.root:
            path.append(self.parent[path[-1]])
            if len(path) > len(self.parent) + 1:
                raise RoutingError(f"Tree {self.id} parent map contains a cycle")
        return path


@dataclass
class PrimaryPath:
    tree: int
    path: List[str]

    @property
    def hops(self) -> int:
        return len(self.path) - 1


@dataclass
class RoutingConfig:
    """Routing trees, primaries and the weights they were built from."""

    trees: List[SpanningTree] = field(default_factory=list)
    primary: Dict[str, PrimaryPath] = field(default_factory=dict)
    link_weights: Dict[LinkKey, float] = field(default_factory=dict)
    excluded: List[str] = field(default_factory=list)

    def tree(self, tree_id: int) -> SpanningTree:
        for tree in self.trees:
            if tree.id == tree_id:
                return tree
        raise RoutingError(f"Unknown tree id {tree_id}")

    def primary_paths(self) -> Dict[str, List[str]]:
        """Node -> primary path (node first, gateway last)."""
        return {node: entry.path for node, entry in sorted(self.primary.items())}


@dataclass
class DisjointnessReport:
    counts: Dict[str, int] = field(default_factory=dict)
    below_two: List[str] = field(default_factory=list)

    @property
    def average(self) -> float:
        return sum(self.counts.values()) / len(self.counts) if self.counts else 0.0


def _grow_stems(
    graph: nx.Graph,
    gateways: List[str],
    weight_of: Mapping[LinkKey, float],
    max_trees: Optional[int],
) -> Tuple[List[Tuple[str, str]], Dict[str, int], Dict[str, str]]:
    """
    Grow all stems simultaneously.

    Every active link from a gateway to a plain node seeds one stem, heaviest
    first. A plain node claimed by one seed is not seeded again from another
    gateway, so the stem count is the number of distinct plain gateway
    neighbours and can be lower than the number of gateway links.
    Gateway-to-gateway links seed nothing.

    Returns:
        (seeds as (gateway, first node), owner stem per node, stem parents)
    """
    gateway_set = set(gateways)
    seed_links = []
    for gateway in gateways:
        for neighbor in sorted(graph.neighbors(gateway)):
            if neighbor not in gateway_set:
                key = link_key(gateway, neighbor)
                seed_links.append((-weight_of.get(key, 0.0), key, gateway, neighbor))
    seed_links.sort()

    seeds: List[Tuple[str, str]] = []
    owner: Dict[str, int] = {}
    parents: Dict[str, str] = {}
    for _, _, gateway, neighbor in seed_links:
        if max_trees is not None and len(seeds) >= max_trees:
            break
        if neighbor in owner:
            continue
        stem = len(seeds)
        seeds.append((gateway, neighbor))
        owner[neighbor] = stem
        parents[neighbor] = gateway

    heap: List[Tuple[float, int, LinkKey, str, str]] = []

    def push_frontier(stem: int, node: str) -> None:
        for neighbor in graph.neighbors(node):
            if neighbor in owner or neighbor in gateway_set:
                continue
            key = link_key(node, neighbor)
            heapq.heappush(heap, (-weight_of.get(key, 0.0), stem, key, node, neighbor))

    for stem, (_, first) in enumerate(seeds):
        push_frontier(stem, first)

    while heap:
        _, stem, _, node, neighbor = heapq.heappop(heap)
        if neighbor in owner:
            continue
        owner[neighbor] = stem
        parents[neighbor] = node
        push_frontier(stem, neighbor)

    return seeds, owner, parents


def _expand_tree(
    graph: nx.Graph,
    tree_id: int,
    root: str,
    stem_nodes: List[str],
    stem_parents: Mapping[str, str],
    weight_of: Mapping[LinkKey, float],
) -> SpanningTree:
    """Grow one stem into a spanning tree of its connected component."""
    parent = {node: stem_parents[node] for node in stem_nodes}
    in_tree: Set[str] = {root, *stem_nodes}
    heap: List[Tuple[bool, float, LinkKey, str, str]] = []

    def push_frontier(node: str) -> None:
        for neighbor in graph.neighbors(node):
            if neighbor in in_tree:
                continue
            key = link_key(node, neighbor)
            heapq.heappush(
                heap, (node == root, -weight_of.get(key, 0.0), key, node, neighbor)
            )

    for node in sorted(in_tree):
        push_frontier(node)

    while heap:
        _, _, _, node, neighbor = heapq.heappop(heap)
        if neighbor in in_tree:
            continue
        in_tree.add(neighbor)
        parent[neighbor] = node
        push_frontier(neighbor)

    return SpanningTree(id=tree_id, root=root, parent=parent)


def _assign_primaries(
    trees: List[SpanningTree], nodes: List[str]
) -> Dict[str, PrimaryPath]:
    """Fewest-hop tree path per node; equal hops go to the least loaded tree."""
    candidates: Dict[str, List[Tuple[int, List[str]]]] = {}
    for node in nodes:
        options = []
        for tree in trees:
            if tree.contains(node):
                options.append((tree.id, tree.path_to_root(node)))
        if options:
            candidates[node] = options

    load = {tree.id: 0 for tree in trees}
    primary: Dict[str, PrimaryPath] = {}
    order = sorted(candidates, key=lambda n: (min(len(p) for _, p in candidates[n]), n))
    for node in order:
        best_hops = min(len(path) for _, path in candidates[node])
        tree_id, path = min(
            ((tid, path) for tid, path in candidates[node] if len(path) == best_hops),
            key=lambda option: (load[option[0]], option[0]),
        )
        load[tree_id] += 1
        primary[node] = PrimaryPath(tree=tree_id, path=path)
    return primary


def compute_mdst(
    active: ActiveTopology,
    demands: Optional[Mapping[str, float]] = None,
    max_trees: Optional[int] = None,
) -> RoutingConfig:
    """
    Build the routing trees and primary paths of an active topology.

    A topology whose only active gateway links join two gateways gets a
    config without trees; its plain nodes are listed as excluded.

    Args:
        active: Selected topology
        demands: Optional per-node traffic demand (1.0 by default)
        max_trees: Keep only this many of the heaviest stems

    Returns:
        RoutingConfig

    Raises:
        RoutingError: If no active link touches a gateway
    """
    topology = active.topology
    gateways = topology.gateways()
    if not gateways:
        raise RoutingError("Active topology has no gateway node")
    if max_trees is not None and max_trees < 1:
        raise RoutingError(f"max_trees must be >= 1, got {max_trees}")

    excluded = sorted(active.unconnected)
    if excluded:
        logger.warning(
            "routing: excluding %d unconnected node(s): %s",
            len(excluded),
            ", ".join(excluded),
        )

    weights = weight_links(topology, demands).weights
    graph = topology.graph()
    graph.remove_nodes_from(excluded)

    seeds, owner, stem_parents = _grow_stems(graph, gateways, weights, max_trees)
    if not seeds:
        if not any(graph.degree(gateway) for gateway in gateways):
            raise RoutingError("No active gateway links: no stems can be seeded")
        # Only gateway-to-gateway links are active: nothing to route
        unreached = sorted(n for n in graph.nodes if not topology.node(n).is_gateway)
        if unreached:
            logger.warning(
                "routing: no plain node reaches a gateway, excluding %s",
                ", ".join(unreached),
            )
        return RoutingConfig(
            link_weights=weights, excluded=sorted(set(excluded) | set(unreached))
        )

    trees = []
    for stem, (root, _) in enumerate(seeds):
        stem_nodes = sorted(node for node, s in owner.items() if s == stem)
        trees.append(_expand_tree(graph, stem, root, stem_nodes, stem_parents, weights))

    plain = sorted(n for n in graph.nodes if not topology.node(n).is_gateway)
    primary = _assign_primaries(trees, plain)

    return RoutingConfig(
        trees=trees, primary=primary, link_weights=weights, excluded=excluded
    )


# =============================================================================
# Path redundancy
# =============================================================================


def tree_paths(config: RoutingConfig, node: str) -> List[List[str]]:
    """Distinct node-to-root paths of a node, one per tree containing it."""
    paths: List[List[str]] = []
    for tree in config.trees:
        if tree.contains(node):
            path = tree.path_to_root(node)
            if path not in paths:
                paths.append(path)
    return paths


def alternative_paths(config: RoutingConfig) -> Dict[str, List[List[str]]]:
    """Every tree path of every routed node other than its primary."""
    alternatives = {}
    for node, entry in sorted(config.primary.items()):
        alternatives[node] = [p for p in tree_paths(config, node) if p != entry.path]
    return alternatives


def count_disjoint_paths(config: RoutingConfig, node: str) -> int:
    """
    Maximum number of the node's tree paths with pairwise disjoint interiors.

    Identical paths from different trees count once. Endpoints are ignored,
    so paths to different gateways only conflict through relay nodes.

    Raises:
        RoutingError: If the node has no tree path
    """
    paths = tree_paths(config, node)
    if not paths or len(paths[0]) < 2:
        raise RoutingError(f"Unknown or unrouted node: {node}")

    # Largest clique of the "interiors do not intersect" graph
    interiors = [set(path[1:-1]) for path in paths]
    compatible = nx.Graph()
    compatible.add_nodes_from(range(len(paths)))
    for i in range(len(paths)):
        for j in range(i + 1, len(paths)):
            if not interiors[i] & interiors[j]:
                compatible.add_edge(i, j)
    return max(len(clique) for clique in nx.find_cliques(compatible))


def disjointness_report(config: RoutingConfig) -> DisjointnessReport:
    counts = {
        node: count_disjoint_paths(config, node) for node in sorted(config.primary)
    }
    return DisjointnessReport(
        counts=counts, below_two=sorted(n for n, c in counts.items() if c < 2)
    )


# =============================================================================
# JSON interchange
# =============================================================================


def routing_to_dict(config: RoutingConfig) -> Dict[str, Any]:
    return {
        "trees": [
            {"id": t.id, "root": t.root, "parent": dict(sorted(t.parent.items()))}
            for t in config.trees
        ],
        "primary": {
            node: {"tree": entry.tree, "path": entry.path}
            for node, entry in sorted(config.primary.items())
        },
        "link_weights": [
            {"a": a, "b": b, "weight": w}
            for (a, b), w in sorted(config.link_weights.items())
        ],
        "excluded": list(config.excluded),
    }


def parse_routing(data: Dict[str, Any]) -> RoutingConfig:
    """
    Parse a RoutingConfig JSON document.

    Raises:
        RoutingError: On missing or malformed sections
    """
    try:
        trees = [
            SpanningTree(id=int(t["id"]), root=str(t["root"]), parent=dict(t["parent"]))
            for t in data["trees"]
        ]
        primary = {
            str(node): PrimaryPath(tree=int(entry["tree"]), path=list(entry["path"]))
            for node, entry in data["primary"].items()
        }
        weights = {
            link_key(item["a"], item["b"]): float(item["weight"])
            for item in data.get("link_weights", [])
        }
    except (KeyError, TypeError, ValueError) as e:
        raise RoutingError(f"Invalid routing document: {e}")
    return RoutingConfig(
        trees=trees,
        primary=primary,
        link_weights=weights,
        excluded=list(data.get("excluded", [])),
    )


def load_routing(path: str) -> RoutingConfig:
    return parse_routing(read_json(path))


def save_routing(config: RoutingConfig, path: str) -> None:
    write_json(path, routing_to_dict(config))
