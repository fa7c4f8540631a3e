#!/usr/bin/env python3
"""
Independent brute-force checkers for meshplan.

Each checker recomputes a property from first principles, without the data
structures of the module under test, and reports violations as strings:

- transmission sets: conflict freedom, maximality, bidirectional coverage
- delays: slot-by-slot packet simulation
- schedules: exhaustive search over every ordering
- bipartite selections: BFS 2-coloring
- routing trees: union-find acyclicity and spanning
- disjoint paths: exhaustive subset search
"""

import itertools
from collections import deque
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

from meshplan.netmodel import DirectedKey, LinkKey, SectorId, link_key
from meshplan.routing import RoutingConfig, SpanningTree
from meshplan.scheduler import DOWNSTREAM, UPSTREAM, DelayEvaluator, Objective, hops_of
from meshplan.selection import ActiveTopology
from meshplan.tsgen import TransmissionSetCollection


# =============================================================================
# Transmission sets
# =============================================================================


def _sectors(active: ActiveTopology, key: DirectedKey) -> Tuple[SectorId, SectorId]:
    tx, rx = key
    link = active.base.link_between(tx, rx)
    return link.sector_at(tx), link.sector_at(rx)


def set_violations(active: ActiveTopology, links: Sequence[DirectedKey]) -> List[str]:
    """Sector and TX/RX conflicts inside one set of directed links."""
    errors = []
    used: Dict[SectorId, DirectedKey] = {}
    transmitting: Set[str] = set()
    receiving: Set[str] = set()
    for key in links:
        if link_key(*key) not in active.active_links:
            errors.append(f"{key[0]}->{key[1]} is not active")
            continue
        for sector in _sectors(active, key):
            if sector in used:
                errors.append(
                    f"sector {sector.node}/{sector.index} used by "
                    f"{used[sector][0]}->{used[sector][1]} and {key[0]}->{key[1]}"
                )
            used[sector] = key
        transmitting.add(key[0])
        receiving.add(key[1])
    for node in sorted(transmitting & receiving):
        errors.append(f"node {node} both transmits and receives")
    return errors


def can_add(
    active: ActiveTopology, links: Sequence[DirectedKey], key: DirectedKey
) -> bool:
    """Whether a directed link could join a set without any conflict."""
    if key in links:
        return False
    return not set_violations(active, list(links) + [key])


def non_maximal_additions(
    active: ActiveTopology, links: Sequence[DirectedKey]
) -> List[DirectedKey]:
    """Every active directed link that could still be added to the set."""
    additions = []
    for a, b in sorted(active.active_links):
        for key in ((a, b), (b, a)):
            if can_add(active, links, key):
                additions.append(key)
    return additions


def check_transmission_sets(
    active: ActiveTopology, tss: TransmissionSetCollection
) -> List[str]:
    """Conflict freedom and maximality of every set, plus full coverage."""
    errors = []
    covered: Set[DirectedKey] = set()
    for index, ts in enumerate(tss.sets):
        for error in set_violations(active, ts.links):
            errors.append(f"set {index}: {error}")
        for tx, rx in non_maximal_additions(active, ts.links):
            errors.append(f"set {index}: not maximal, {tx}->{rx} fits")
        covered.update(tuple(key) for key in ts.links)
    for a, b in sorted(active.active_links):
        for tx, rx in ((a, b), (b, a)):
            if (tx, rx) not in covered:
                errors.append(f"{tx}->{rx} never scheduled")
    return errors


# =============================================================================
# Delays and schedules
# =============================================================================


def simulate_delay(
    order: Sequence[int],
    tss: TransmissionSetCollection,
    path: Sequence[DirectedKey],
    t0: int,
) -> int:
    """
    Carry a packet one slot at a time.

    The packet waits in slot t until the set active in t holds its next
    hop, transmits, and may take the following hop no earlier than t + 1.

    Raises:
        ValueError: If the packet can never finish
    """
    length = len(order)
    sets = [set(tuple(key) for key in tss.sets[index].links) for index in order]
    limit = t0 + length * (len(path) + 1)
    t = t0
    last = t0 - 1
    hop = 0
    while hop < len(path):
        if t > limit:
            raise ValueError(f"hop {path[hop]} never transmitted")
        if tuple(path[hop]) in sets[t % length]:
            last = t
            hop += 1
        t += 1
    return last - t0 + 1


def brute_force_objective(
    tss: TransmissionSetCollection, paths: Dict[str, Sequence[str]]
) -> Tuple[Objective, Tuple[int, ...]]:
    """Best (worst-case, mean) over every ordering, rotations included."""
    rows = [
        hops_of(path, direction)
        for _, path in sorted(paths.items())
        for direction in (UPSTREAM, DOWNSTREAM)
    ]
    evaluator = DelayEvaluator(tss, rows)
    best: Optional[Objective] = None
    best_order: Tuple[int, ...] = ()
    for order in itertools.permutations(range(len(tss))):
        value = evaluator.objective(order)
        if best is None or value < best:
            best, best_order = value, order
    return best, best_order


# =============================================================================
# Structure
# =============================================================================


def two_coloring(
    nodes: Iterable[str], links: Iterable[LinkKey]
) -> Optional[Dict[str, int]]:
    """BFS 2-coloring of a graph; None if it has an odd cycle."""
    adjacency: Dict[str, List[str]] = {node: [] for node in nodes}
    for a, b in links:
        adjacency.setdefault(a, []).append(b)
        adjacency.setdefault(b, []).append(a)

    color: Dict[str, int] = {}
    for start in sorted(adjacency):
        if start in color:
            continue
        color[start] = 0
        queue = deque([start])
        while queue:
            node = queue.popleft()
            for neighbor in adjacency[node]:
                if neighbor not in color:
                    color[neighbor] = 1 - color[node]
                    queue.append(neighbor)
                elif color[neighbor] == color[node]:
                    return None
    return color


def check_bipartite(active: ActiveTopology) -> List[str]:
    """The active links form a bipartite graph and the stored colors agree."""
    errors = []
    if two_coloring(active.base.node_ids(), active.active_links) is None:
        errors.append("active topology contains an odd cycle")
    if active.colors is not None:
        for a, b in sorted(active.active_links):
            color_a, color_b = active.colors.get(a), active.colors.get(b)
            if color_a is None or color_a == color_b:
                errors.append(f"link {a}-{b} joins equally colored nodes")
    return errors


def check_tree(
    tree: SpanningTree, active: ActiveTopology, expected: Iterable[str]
) -> List[str]:
    """Union-find check that a tree is acyclic, active and spans ``expected``."""
    parent: Dict[str, str] = {}

    def find(node: str) -> str:
        parent.setdefault(node, node)
        while parent[node] != node:
            parent[node] = parent[parent[node]]
            node = parent[node]
        return node

    errors = []
    for child, up in sorted(tree.parent.items()):
        if link_key(child, up) not in active.active_links:
            errors.append(f"tree {tree.id}: edge {child}-{up} is not active")
        root_a, root_b = find(child), find(up)
        if root_a == root_b:
            errors.append(f"tree {tree.id}: edge {child}-{up} closes a cycle")
        else:
            parent[root_a] = root_b

    members = set(tree.parent) | {tree.root}
    missing = sorted(set(expected) - members)
    if missing:
        errors.append(f"tree {tree.id}: does not span {', '.join(missing)}")
    root = find(tree.root)
    detached = sorted(n for n in members if find(n) != root)
    if detached:
        errors.append(f"tree {tree.id}: {', '.join(detached)} not connected to root")
    return errors


def exhaustive_disjoint_count(paths: Sequence[Sequence[str]]) -> int:
    """Largest subset of distinct paths with pairwise disjoint interiors."""
    unique: List[Tuple[str, ...]] = []
    for path in paths:
        if tuple(path) not in unique:
            unique.append(tuple(path))
    for size in range(len(unique), 0, -1):
        for subset in itertools.combinations(unique, size):
            interiors = [set(p[1:-1]) for p in subset]
            if all(
                not interiors[i] & interiors[j]
                for i in range(size)
                for j in range(i + 1, size)
            ):
                return size
    return 0


def check_routing(routing: RoutingConfig, active: ActiveTopology) -> List[str]:
    """Every tree checked against the gateway component it lives in."""
    graph = active.graph()
    errors = []
    for tree in routing.trees:
        component = {tree.root}
        queue = deque([tree.root])
        while queue:
            node = queue.popleft()
            for neighbor in graph.neighbors(node):
                if neighbor not in component:
                    component.add(neighbor)
                    queue.append(neighbor)
        errors.extend(check_tree(tree, active, component))
    return errors
