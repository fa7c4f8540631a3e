#!/usr/bin/env python3
"""
Network model for meshplan.

Core types shared by every planning phase:
- Node: a backhaul node (WN) with a 3D position, a layer and sectored radios
- SectorId: one radio unit (RU) of a node
- Link / DirectedLink: candidate links, canonical undirected and directed
- Topology: nodes plus candidate links

Sector Model
============

Every node splits the azimuth circle into ``sector_count`` equal half-open
arcs starting at ``sector_offset``:

            90°
             │   sector 1 │ sector 0
    180° ────┼──────────── 0°      (4 sectors, offset 0°)
             │   sector 2 │ sector 3
            270°

An azimuth exactly on a boundary belongs to the arc that starts there, so
45° maps to sector 0 and 90° to sector 1. Antenna planes are vertical, so
only the xy-plane is used.

Topology JSON interchange:
{
    "nodes": [{"id", "x", "y", "z", "layer", "sector_count", "sector_offset"}],
    "links": [{"a", "b", "sector_a", "sector_b", "length"}]
}
Link sectors and lengths are optional and recomputed from geometry.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Any, Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple

import networkx as nx

from meshplan.utils import MeshPlanError, read_json, write_json

# (a, b) with a < b
LinkKey = Tuple[str, str]
# (tx, rx)
DirectedKey = Tuple[str, str]

DEFAULT_SECTOR_COUNT = 4


class NetModelError(MeshPlanError):
    """Exception raised for malformed network model input."""

    pass


class Layer(str, Enum):
    """Deployment layer of a node."""

    STREET = "street"
    ROOFTOP = "rooftop"
    GATEWAY = "gateway"

    @classmethod
    def parse(cls, value: str) -> "Layer":
        try:
            return cls(str(value).lower())
        except ValueError:
            raise NetModelError(f"Unknown layer '{value}'")


class SectorId(NamedTuple):
    """One radio unit: the node it belongs to and its arc index."""

    node: str
    index: int


@dataclass(frozen=True)
class Node:
    """A backhaul node."""

    id: str
    x: float
    y: float
    z: float = 0.0
    layer: Layer = Layer.STREET
    sector_count: int = DEFAULT_SECTOR_COUNT
    sector_offset: float = 0.0

    @property
    def position(self) -> Tuple[float, float, float]:
        return (self.x, self.y, self.z)

    @property
    def is_gateway(self) -> bool:
        return self.layer == Layer.GATEWAY

    def sector_arc(self, index: int) -> Tuple[float, float]:
        """Return the [start, end) azimuth arc of a sector in degrees."""
        width = 360.0 / self.sector_count
        start = (self.sector_offset + index * width) % 360.0
        return (start, start + width)


def link_key(u: str, v: str) -> LinkKey:
    """Canonical key of the undirected link between two nodes."""
    return (u, v) if u < v else (v, u)


def azimuth(origin: Sequence[float], toward: Sequence[float]) -> float:
    """
    Azimuth from origin toward a point, degrees in [0, 360).

    Raises:
        NetModelError: If the two points differ only in height
    """
    dx = toward[0] - origin[0]
    dy = toward[1] - origin[1]
    if dx == 0 and dy == 0:
        raise NetModelError(
            "Vertical-only separation: sector undefined for zero xy displacement"
        )
    return math.degrees(math.atan2(dy, dx)) % 360.0


def sector_of(node: Node, toward: Sequence[float]) -> SectorId:
    """
    Map the direction toward a position to the node's sector.

    Args:
        node: Node whose sectors are used
        toward: Target position (x, y[, z]); only x and y matter

    Returns:
        SectorId of the half-open arc containing the azimuth

    Raises:
        NetModelError: On zero xy displacement or a node without sectors
    """
    if node.sector_count < 1:
        raise NetModelError(f"Node {node.id} has no sectors")
    relative = (azimuth(node.position, toward) - node.sector_offset) % 360.0
    width = 360.0 / node.sector_count
    index = int(relative // width)
    # Float rounding right below 360° can yield sector_count
    return SectorId(node.id, min(index, node.sector_count - 1))


def distance(a: Node, b: Node) -> float:
    """3D distance between two nodes in meters."""
    return math.dist(a.position, b.position)


@dataclass(frozen=True)
class Link:
    """Undirected candidate link, canonical when a < b."""

    a: str
    b: str
    sector_a: SectorId
    sector_b: SectorId
    length: float

    @property
    def key(self) -> LinkKey:
        return (self.a, self.b)

    def canonical(self) -> "Link":
        """Return the record with endpoints in canonical order."""
        if self.a <= self.b:
            return self
        return Link(
            a=self.b,
            b=self.a,
            sector_a=self.sector_b,
            sector_b=self.sector_a,
            length=self.length,
        )

    def other(self, node: str) -> str:
        """Return the opposite endpoint."""
        if node == self.a:
            return self.b
        if node == self.b:
            return self.a
        raise NetModelError(f"Node {node} is not an endpoint of link {self.key}")

    def sector_at(self, node: str) -> SectorId:
        """Return the sector the link uses at one of its endpoints."""
        if node == self.a:
            return self.sector_a
        if node == self.b:
            return self.sector_b
        raise NetModelError(f"Node {node} is not an endpoint of link {self.key}")

    def directed(self, tx: str) -> "DirectedLink":
        """Return the directed link transmitted by ``tx``."""
        return DirectedLink(tx=tx, rx=self.other(tx), link=self)


@dataclass(frozen=True, order=True)
class DirectedLink:
    """A link with defined transmitting and receiving ends."""

    tx: str
    rx: str
    link: Link = field(compare=False, repr=False)

    @property
    def key(self) -> DirectedKey:
        return (self.tx, self.rx)

    @property
    def tx_sector(self) -> SectorId:
        return self.link.sector_at(self.tx)

    @property
    def rx_sector(self) -> SectorId:
        return self.link.sector_at(self.rx)

    def reversed(self) -> "DirectedLink":
        return DirectedLink(tx=self.rx, rx=self.tx, link=self.link)


def make_link(a: Node, b: Node, length: Optional[float] = None) -> Link:
    """
    Build the canonical link between two nodes from their geometry.

    Raises:
        NetModelError: If the nodes are the same or vertically stacked
    """
    if a.id == b.id:
        raise NetModelError(f"Self-link on node {a.id}")
    if a.id > b.id:
        a, b = b, a
    return Link(
        a=a.id,
        b=b.id,
        sector_a=sector_of(a, b.position),
        sector_b=sector_of(b, a.position),
        length=distance(a, b) if length is None else float(length),
    )


@dataclass(frozen=True)
class Topology:
    """Nodes and candidate links of one network."""

    nodes: Tuple[Node, ...]
    links: Tuple[Link, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "links", tuple(self.links))

    @property
    def N(self) -> int:
        return len(self.nodes)

    @cached_property
    def node_map(self) -> Dict[str, Node]:
        return {node.id: node for node in self.nodes}

    @cached_property
    def link_map(self) -> Dict[LinkKey, Link]:
        return {link.key: link for link in self.links}

    @cached_property
    def adjacency(self) -> Dict[str, List[Link]]:
        """Incident links per node, sorted by the neighbor's id."""
        adjacency: Dict[str, List[Link]] = {node.id: [] for node in self.nodes}
        for link in self.links:
            if link.a in adjacency and link.b in adjacency:
                adjacency[link.a].append(link)
                adjacency[link.b].append(link)
        for node_id, incident in adjacency.items():
            incident.sort(key=lambda link, n=node_id: link.other(n))
        return adjacency

    def node(self, node_id: str) -> Node:
        try:
            return self.node_map[node_id]
        except KeyError:
            raise NetModelError(f"Unknown node: {node_id}")

    def node_ids(self) -> List[str]:
        return sorted(self.node_map)

    def gateways(self) -> List[str]:
        """Gateway node ids in canonical order."""
        return sorted(node.id for node in self.nodes if node.is_gateway)

    def neighbors(self, node_id: str) -> List[str]:
        return [link.other(node_id) for link in self.adjacency.get(node_id, [])]

    def link_between(self, u: str, v: str) -> Optional[Link]:
        return self.link_map.get(link_key(u, v))

    def directed_links(self) -> List[DirectedLink]:
        """Both directions of every link, in canonical (tx, rx) order."""
        directed = []
        for link in self.links:
            directed.append(link.directed(link.a))
            directed.append(link.directed(link.b))
        return sorted(directed)

    def with_links(self, keys: Iterable[LinkKey]) -> "Topology":
        """Same nodes, restricted to the given links."""
        wanted = set(keys)
        return Topology(
            nodes=self.nodes,
            links=tuple(link for link in self.links if link.key in wanted),
        )

    def graph(self) -> nx.Graph:
        """
        networkx view of the topology.

        Nodes are inserted in id order and edges in canonical link order so
        neighbor iteration is deterministic. Each edge carries its Link under
        the ``link`` attribute.
        """
        graph = nx.Graph()
        for node_id in self.node_ids():
            graph.add_node(node_id, node=self.node_map[node_id])
        for link in sorted(self.links, key=lambda link: link.key):
            if link.a in self.node_map and link.b in self.node_map:
                graph.add_edge(link.a, link.b, link=link)
        return graph


def validate(topology: Topology) -> List[str]:
    """
    Check the type invariants of a topology.

    Args:
        topology: Topology to check

    Returns:
        List of violations (empty if valid), one per offending entity
    """
    violations = []

    seen_nodes = set()
    for node in topology.nodes:
        if node.id in seen_nodes:
            violations.append(f"Duplicate node id: {node.id}")
        seen_nodes.add(node.id)
        if node.sector_count < 1:
            violations.append(
                f"Node {node.id}: sector_count must be >= 1, got {node.sector_count}"
            )

    seen_links = set()
    for link in topology.links:
        label = f"Link {link.a}-{link.b}"

        if link.a == link.b:
            violations.append(f"{label}: endpoints are the same node")
            continue
        if link.a > link.b:
            violations.append(f"{label}: endpoints not in canonical order")

        key = link_key(link.a, link.b)
        if key in seen_links:
            violations.append(f"{label}: duplicate link for node pair {key}")
            continue
        seen_links.add(key)

        unknown = [n for n in (link.a, link.b) if n not in topology.node_map]
        if unknown:
            violations.append(f"{label}: unknown node(s) {', '.join(unknown)}")
            continue

        violations.extend(_sector_violations(topology, link, label))

    return violations


def _sector_violations(topology: Topology, link: Link, label: str) -> List[str]:
    violations = []
    for end, sector in ((link.a, link.sector_a), (link.b, link.sector_b)):
        node = topology.node_map[end]
        if node.sector_count < 1:
            # reported once per node
            continue
        if sector.node != end:
            violations.append(f"{label}: sector {sector} does not belong to {end}")
            continue
        if not 0 <= sector.index < node.sector_count:
            violations.append(
                f"{label}: sector index {sector.index} out of range at {end}"
            )
            continue
        far = topology.node_map[link.other(end)]
        try:
            expected = sector_of(node, far.position)
        except NetModelError as e:
            violations.append(f"{label}: {e}")
            continue
        if expected != sector:
            violations.append(
                f"{label}: sector {sector.index} at {end} does not face "
                f"{far.id} (expected {expected.index})"
            )
    return violations


# =============================================================================
# JSON interchange
# =============================================================================


def node_to_dict(node: Node) -> Dict[str, Any]:
    return {
        "id": node.id,
        "x": node.x,
        "y": node.y,
        "z": node.z,
        "layer": node.layer.value,
        "sector_count": node.sector_count,
        "sector_offset": node.sector_offset,
    }


def link_to_dict(link: Link) -> Dict[str, Any]:
    return {
        "a": link.a,
        "b": link.b,
        "sector_a": link.sector_a.index,
        "sector_b": link.sector_b.index,
        "length": link.length,
    }


def topology_to_dict(topology: Topology) -> Dict[str, Any]:
    """Serialize a topology into the interchange format."""
    return {
        "nodes": [node_to_dict(n) for n in sorted(topology.nodes, key=lambda n: n.id)],
        "links": [link_to_dict(l) for l in sorted(topology.links, key=lambda l: l.key)],
    }


def parse_node(data: Dict[str, Any]) -> Node:
    try:
        return Node(
            id=str(data["id"]),
            x=float(data["x"]),
            y=float(data["y"]),
            z=float(data.get("z", 0.0)),
            layer=Layer.parse(data.get("layer", Layer.STREET.value)),
            sector_count=int(data.get("sector_count", DEFAULT_SECTOR_COUNT)),
            sector_offset=float(data.get("sector_offset", 0.0)),
        )
    except KeyError as e:
        raise NetModelError(f"Node record missing field {e}: {data}")
    except (TypeError, ValueError) as e:
        raise NetModelError(f"Invalid node record {data}: {e}")


def parse_link(data: Dict[str, Any], node_map: Dict[str, Node]) -> Link:
    """
    Parse one link record, recomputing sectors and length when absent.

    Raises:
        NetModelError: If geometry is needed for an unknown node
    """
    try:
        a, b = str(data["a"]), str(data["b"])
    except KeyError as e:
        raise NetModelError(f"Link record missing field {e}: {data}")

    has_sectors = "sector_a" in data and "sector_b" in data
    needs_geometry = not has_sectors or "length" not in data
    if needs_geometry:
        for end in (a, b):
            if end not in node_map:
                raise NetModelError(
                    f"Link {a}-{b} references unknown node {end}; "
                    "cannot derive sectors or length"
                )
        derived = make_link(node_map[a], node_map[b])
        if a > b:
            a, b = b, a
            data = dict(
                data, sector_a=data.get("sector_b"), sector_b=data.get("sector_a")
            )

    length = float(data["length"]) if "length" in data else derived.length
    if has_sectors:
        sector_a = SectorId(a, int(data["sector_a"]))
        sector_b = SectorId(b, int(data["sector_b"]))
    else:
        sector_a, sector_b = derived.sector_a, derived.sector_b

    link = Link(a=a, b=b, sector_a=sector_a, sector_b=sector_b, length=length)
    return link.canonical()


def parse_topology(data: Dict[str, Any]) -> Topology:
    """
    Parse the interchange dictionary into a Topology.

    Raises:
        NetModelError: On missing sections or malformed records
    """
    if not isinstance(data, dict) or "nodes" not in data:
        raise NetModelError("Topology JSON must be an object with a 'nodes' list")

    nodes = [parse_node(n) for n in data["nodes"]]
    node_map = {node.id: node for node in nodes}
    links = [parse_link(l, node_map) for l in data.get("links", [])]
    return Topology(nodes=tuple(nodes), links=tuple(links))


def load_topology(path: str) -> Topology:
    """Load a topology JSON file."""
    return parse_topology(read_json(path))


def save_topology(topology: Topology, path: str) -> None:
    """Write a topology JSON file."""
    write_json(path, topology_to_dict(topology))
