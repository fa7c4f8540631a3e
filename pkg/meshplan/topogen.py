#!/usr/bin/env python3
"""
Urban test topology generator for meshplan.

Builds dense-urban deployments from three perturbed grids:

    gateway  layer   few nodes, large cells, tall masts
    rooftop  layer   medium cells, roof heights
    street   layer   small cells, lamp-post heights

Every node pair then gets a line-of-sight probability from its distance and
heights, and a uniform draw decides whether the candidate link exists.

Random Stream Contract
======================

One numpy ``Generator`` (PCG64, ``numpy.random.default_rng(seed)``) feeds
every draw, always in this order:

1. Layers in the order gateway, rooftop, street.
2. Within a layer, cells row by row (y outer, x inner); per cell three
   draws: ``uniform(-jitter, jitter)`` for x, the same for y, then
   ``uniform(zmin, zmax)`` for z.
3. Node pairs in canonical order (sorted ids, (u, v) with u < v); exactly
   one ``random()`` draw per pair, drawn even when the probability is 0.

A link exists iff the draw is strictly below the LOS probability. Pairs
stacked exactly above each other (equal x and y) never get a link, since
no sector faces straight up; their draw is still consumed.
"""

import itertools
import math
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from meshplan.netmodel import (
    DEFAULT_SECTOR_COUNT,
    Layer,
    Node,
    Topology,
    distance,
    make_link,
)
from meshplan.utils import PRESETS_PATH, MeshPlanError, read_json, write_json

# Generation order and id prefixes per layer
LAYER_ORDER = (Layer.GATEWAY, Layer.ROOFTOP, Layer.STREET)
LAYER_PREFIX = {Layer.GATEWAY: "g", Layer.ROOFTOP: "r", Layer.STREET: "s"}


class TopologyGenerationError(MeshPlanError):
    """Exception raised for invalid generator configurations."""

    pass


@dataclass
class LayerSpec:
    """Perturbed grid of one layer. ``area`` is (xmin, ymin, xmax, ymax)."""

    layer: Layer
    grid_cell: float
    jitter: float = 0.0
    height_range: Tuple[float, float] = (0.0, 0.0)
    area: Tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)

    def __post_init__(self):
        if not isinstance(self.layer, Layer):
            self.layer = Layer.parse(self.layer)
        self.height_range = (float(self.height_range[0]), float(self.height_range[1]))
        self.area = tuple(float(v) for v in self.area)
        if len(self.area) != 4:
            raise TopologyGenerationError(f"{self.layer.value}: area needs 4 values")
        if self.grid_cell <= 0:
            raise TopologyGenerationError(f"{self.layer.value}: grid_cell must be > 0")
        if self.jitter < 0:
            raise TopologyGenerationError(f"{self.layer.value}: jitter must be >= 0")
        if self.height_range[0] > self.height_range[1]:
            raise TopologyGenerationError(
                f"{self.layer.value}: height_range min exceeds max"
            )

    @property
    def width(self) -> float:
        return self.area[2] - self.area[0]

    @property
    def depth(self) -> float:
        return self.area[3] - self.area[1]

    def cell_counts(self) -> Tuple[int, int]:
        """Number of grid cells along x and y."""
        # Tolerate float noise such as 400 / 100.0000001
        return (
            int(math.floor(self.width / self.grid_cell + 1e-9)),
            int(math.floor(self.depth / self.grid_cell + 1e-9)),
        )


@dataclass
class LosModel:
    """Line-of-sight probability shape."""

    max_range: float = 250.0
    range_decay: float = 2.0
    height_bonus: float = 0.5

    def __post_init__(self):
        if self.max_range < 0:
            raise TopologyGenerationError("los.max_range must be >= 0")
        if self.range_decay <= 0:
            raise TopologyGenerationError("los.range_decay must be > 0")
        if self.height_bonus < 0:
            raise TopologyGenerationError("los.height_bonus must be >= 0")


@dataclass
class GeneratorConfig:
    """Complete generator input."""

    layers: List[LayerSpec] = field(default_factory=list)
    los: LosModel = field(default_factory=LosModel)
    seed: int = 0
    sector_count: int = DEFAULT_SECTOR_COUNT

    def __post_init__(self):
        kinds = [spec.layer for spec in self.layers]
        if sorted(kinds) != sorted(LAYER_ORDER):
            raise TopologyGenerationError(
                "Exactly one LayerSpec per layer kind is required, got "
                + ", ".join(kind.value for kind in kinds)
            )
        if self.sector_count < 1:
            raise TopologyGenerationError("sector_count must be >= 1")

    def layer(self, kind: Layer) -> LayerSpec:
        for spec in self.layers:
            if spec.layer == kind:
                return spec
        raise TopologyGenerationError(f"No LayerSpec for {kind.value}")


def validate_generator_config(config: GeneratorConfig) -> List[str]:
    """
    Report soft problems of a generator configuration.

    Returns:
        List of warnings (empty if the layering looks like a dense urban mix)
    """
    warnings = []
    street = config.layer(Layer.STREET).grid_cell
    rooftop = config.layer(Layer.ROOFTOP).grid_cell
    gateway = config.layer(Layer.GATEWAY).grid_cell
    if not street <= rooftop <= gateway:
        warnings.append(
            "Grid cells should grow from street to rooftop to gateway "
            f"(got {street}, {rooftop}, {gateway})"
        )
    for spec in config.layers:
        nx_cells, ny_cells = spec.cell_counts()
        if nx_cells * ny_cells == 0:
            warnings.append(f"{spec.layer.value}: area holds no grid cell")
    return warnings


def generate_nodes(
    config: GeneratorConfig, rng: Optional[np.random.Generator] = None
) -> List[Node]:
    """
    Place the nodes of every layer on its perturbed grid.

    Args:
        config: Generator configuration
        rng: Random stream to consume; a fresh one seeded from config.seed
            when omitted

    Returns:
        Nodes in generation order

    Raises:
        TopologyGenerationError: If a layer area is empty or smaller than
            one grid cell
    """
    if rng is None:
        rng = np.random.default_rng(config.seed)

    nodes = []
    for kind in LAYER_ORDER:
        spec = config.layer(kind)
        if spec.width <= 0 or spec.depth <= 0:
            raise TopologyGenerationError(f"{kind.value}: empty area {spec.area}")
        nx_cells, ny_cells = spec.cell_counts()
        if nx_cells == 0 or ny_cells == 0:
            raise TopologyGenerationError(
                f"{kind.value}: grid_cell {spec.grid_cell} larger than area {spec.area}"
            )

        zmin, zmax = spec.height_range
        ordinal = 0
        for j in range(ny_cells):
            for i in range(nx_cells):
                cx = spec.area[0] + (i + 0.5) * spec.grid_cell
                cy = spec.area[1] + (j + 0.5) * spec.grid_cell
                dx = rng.uniform(-spec.jitter, spec.jitter)
                dy = rng.uniform(-spec.jitter, spec.jitter)
                z = rng.uniform(zmin, zmax)
                nodes.append(
                    Node(
                        id=f"{LAYER_PREFIX[kind]}{ordinal:03d}",
                        x=float(cx + dx),
                        y=float(cy + dy),
                        z=float(z),
                        layer=kind,
                        sector_count=config.sector_count,
                    )
                )
                ordinal += 1
    return nodes


def los_probability(model: LosModel, a: Node, b: Node) -> float:
    """
    Probability of line of sight between two nodes.

    p = clamp((1 - (d / R)^decay) * (1 + bonus * (z_a + z_b) / R), 0, 1)
    with d the 3D distance and R = max_range; 0 whenever d >= R.
    """
    d = distance(a, b)
    if d >= model.max_range:
        return 0.0
    range_term = 1.0 - (d / model.max_range) ** model.range_decay
    height_term = 1.0 + model.height_bonus * (a.z + b.z) / model.max_range
    return min(1.0, max(0.0, range_term * height_term))


def generate_topology(config: GeneratorConfig) -> Topology:
    """
    Generate a complete candidate topology.

    Deterministic given config.seed (see the module docstring for the
    random stream contract).
    """
    rng = np.random.default_rng(config.seed)
    nodes = generate_nodes(config, rng)

    ordered = sorted(nodes, key=lambda node: node.id)
    links = []
    for a, b in itertools.combinations(ordered, 2):
        draw = rng.random()
        if a.x == b.x and a.y == b.y:
            continue
        if draw < los_probability(config.los, a, b):
            links.append(make_link(a, b))

    return Topology(nodes=tuple(ordered), links=tuple(links))


def topology_summary(topology: Topology) -> Dict[str, int]:
    """Node counts per layer and the candidate link count."""
    summary = {f"{kind.value}_nodes": 0 for kind in LAYER_ORDER}
    for node in topology.nodes:
        summary[f"{node.layer.value}_nodes"] += 1
    summary["nodes"] = topology.N
    summary["links"] = len(topology.links)
    return summary


# =============================================================================
# Configuration files
# =============================================================================


def generator_config_to_dict(config: GeneratorConfig) -> Dict[str, Any]:
    return {
        "layers": [
            {
                "layer": spec.layer.value,
                "grid_cell": spec.grid_cell,
                "jitter": spec.jitter,
                "height_range": list(spec.height_range),
                "area": list(spec.area),
            }
            for spec in config.layers
        ],
        "los": {
            "max_range": config.los.max_range,
            "range_decay": config.los.range_decay,
            "height_bonus": config.los.height_bonus,
        },
        "seed": config.seed,
        "sector_count": config.sector_count,
    }


def parse_generator_config(data: Dict[str, Any]) -> GeneratorConfig:
    """
    Build a GeneratorConfig from its JSON form.

    Raises:
        TopologyGenerationError: On missing or invalid fields
    """
    try:
        layers = [
            LayerSpec(
                layer=Layer.parse(item["layer"]),
                grid_cell=float(item["grid_cell"]),
                jitter=float(item.get("jitter", 0.0)),
                height_range=tuple(item.get("height_range", (0.0, 0.0))),
                area=tuple(item["area"]),
            )
            for item in data["layers"]
        ]
        los = LosModel(**data.get("los", {}))
        return GeneratorConfig(
            layers=layers,
            los=los,
            seed=int(data.get("seed", 0)),
            sector_count=int(data.get("sector_count", DEFAULT_SECTOR_COUNT)),
        )
    except KeyError as e:
        raise TopologyGenerationError(f"Generator config missing field {e}")
    except (TypeError, ValueError) as e:
        raise TopologyGenerationError(f"Invalid generator config: {e}")


def load_generator_config(name_or_path: str) -> GeneratorConfig:
    """
    Load a generator config from a file or a shipped preset name.

    "dense-urban" resolves to presets/dense_urban.json.
    """
    if os.path.exists(name_or_path):
        return parse_generator_config(read_json(name_or_path))

    preset = os.path.join(PRESETS_PATH, name_or_path.replace("-", "_") + ".json")
    if os.path.exists(preset):
        return parse_generator_config(read_json(preset))

    raise TopologyGenerationError(f"Generator config not found: {name_or_path}")


def save_generator_config(config: GeneratorConfig, path: str) -> None:
    write_json(path, generator_config_to_dict(config))


def with_seed(config: GeneratorConfig, seed: int) -> GeneratorConfig:
    """Copy of a config with another seed."""
    return GeneratorConfig(
        layers=list(config.layers),
        los=config.los,
        seed=seed,
        sector_count=config.sector_count,
    )


def layer_specs(
    area: Sequence[float],
    cells: Dict[Layer, float],
    heights: Dict[Layer, Tuple[float, float]],
    jitter: float = 0.0,
) -> List[LayerSpec]:
    """Shorthand for three layers sharing one area and jitter."""
    return [
        LayerSpec(
            layer=kind,
            grid_cell=cells[kind],
            jitter=jitter,
            height_range=heights[kind],
            area=tuple(area),
        )
        for kind in LAYER_ORDER
    ]
