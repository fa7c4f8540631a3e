#!/usr/bin/env python3
"""
Canonical test networks for meshplan.

    diamond                 star (3 leaves)        chain            path

       a                    b     a
     ╱   ╲                   ╲   ╱
    g     c                    g                g ── a ── b       u ── v ── w
     ╲   ╱                    ╱
       b                     c

All fixtures use 4 sectors per node with links in distinct sectors, except
``diamond(shared_leaf_sector=True)`` where both links of c share one of
its two sectors.
"""

import math
from typing import Callable, Dict, List, Optional

import numpy as np

from meshplan.netmodel import Layer, Node, Topology, make_link
from meshplan.utils import MeshPlanError


def _topology(nodes: List[Node], pairs: List[tuple]) -> Topology:
    by_id = {node.id: node for node in nodes}
    links = [make_link(by_id[u], by_id[v]) for u, v in pairs]
    return Topology(
        nodes=tuple(sorted(nodes, key=lambda n: n.id)),
        links=tuple(sorted(links, key=lambda link: link.key)),
    )


def diamond(shared_leaf_sector: bool = False) -> Topology:
    """Gateway g, relays a and b, leaf c; links g-a, g-b, a-c, b-c."""
    leaf = (
        Node("c", 200.0, 0.0, sector_count=2, sector_offset=90.0)
        if shared_leaf_sector
        else Node("c", 200.0, 0.0)
    )
    nodes = [
        Node("g", 0.0, 0.0, 30.0, layer=Layer.GATEWAY),
        Node("a", 100.0, 100.0, 15.0, layer=Layer.ROOFTOP),
        Node("b", 100.0, -100.0, 15.0, layer=Layer.ROOFTOP),
        leaf,
    ]
    return _topology(nodes, [("g", "a"), ("g", "b"), ("a", "c"), ("b", "c")])


def star(leaves: int = 3, radius: float = 100.0) -> Topology:
    """Gateway g with leaves a, b, c, ... around it, at most 4 leaves."""
    if not 1 <= leaves <= 4:
        raise MeshPlanError("star fixture supports 1 to 4 leaves")
    nodes = [Node("g", 0.0, 0.0, 30.0, layer=Layer.GATEWAY)]
    for i in range(leaves):
        angle = math.radians(45.0 + 90.0 * i)
        nodes.append(
            Node(chr(ord("a") + i), radius * math.cos(angle), radius * math.sin(angle))
        )
    return _topology(nodes, [("g", node.id) for node in nodes[1:]])


def chain(length: int = 2, spacing: float = 100.0) -> Topology:
    """Gateway g followed by ``length`` relays a, b, ... on a line."""
    if not 1 <= length <= 26:
        raise MeshPlanError("chain fixture supports 1 to 26 relays")
    ids = ["g"] + [chr(ord("a") + i) for i in range(length)]
    nodes = [
        Node(node_id, i * spacing, 0.0, layer=Layer.GATEWAY if i == 0 else Layer.STREET)
        for i, node_id in enumerate(ids)
    ]
    return _topology(nodes, list(zip(ids, ids[1:])))


def path() -> Topology:
    """Three nodes u-v-w on a line, u being the gateway."""
    nodes = [
        Node("u", 0.0, 0.0, layer=Layer.GATEWAY),
        Node("v", 100.0, 0.0),
        Node("w", 200.0, 0.0),
    ]
    return _topology(nodes, [("u", "v"), ("v", "w")])


def single_link() -> Topology:
    """Gateway u and one node v."""
    nodes = [Node("u", 0.0, 0.0, layer=Layer.GATEWAY), Node("v", 100.0, 0.0)]
    return _topology(nodes, [("u", "v")])


def random_topology(
    n: int,
    seed: int = 0,
    link_probability: float = 0.4,
    gateways: int = 1,
    size: float = 300.0,
    sector_count: Optional[int] = None,
) -> Topology:
    """
    Small random topology for property checks.

    Nodes n00, n01, ... are placed uniformly in a square, the first
    ``gateways`` of them being gateways. Sector counts are drawn from 1 to 4
    unless fixed. Every pair is linked with ``link_probability``; the result
    may be disconnected.
    """
    if n < 1 or not 0 < gateways <= n:
        raise MeshPlanError("random_topology needs n >= 1 and 1 <= gateways <= n")
    rng = np.random.default_rng(seed)
    nodes = []
    for i in range(n):
        x, y = rng.uniform(0.0, size, size=2)
        count = sector_count or int(rng.integers(1, 5))
        nodes.append(
            Node(
                f"n{i:02d}",
                float(x),
                float(y),
                float(rng.uniform(2.0, 30.0)),
                layer=Layer.GATEWAY if i < gateways else Layer.STREET,
                sector_count=count,
                sector_offset=float(rng.uniform(0.0, 360.0 / count)),
            )
        )
    pairs = [
        (nodes[i].id, nodes[j].id)
        for i in range(n)
        for j in range(i + 1, n)
        if rng.random() < link_probability
    ]
    return _topology(nodes, pairs)


FIXTURES: Dict[str, Callable[[], Topology]] = {
    "diamond": diamond,
    "diamond-shared": lambda: diamond(shared_leaf_sector=True),
    "star": star,
    "chain": chain,
    "path": path,
    "single-link": single_link,
}


def fixture(name: str) -> Topology:
    """Build a named fixture."""
    try:
        return FIXTURES[name]()
    except KeyError:
        raise MeshPlanError(
            f"Unknown fixture '{name}' (choose from {', '.join(sorted(FIXTURES))})"
        )
