"""
meshplan: network planning for sectorized wireless mesh backhaul networks.

This package implements:
- Urban test topology generation with line-of-sight link probabilities
- Active link selection with a per-sector fan-out cap and optional
  bipartite shape
- Multiple disjoint spanning tree (MDST) routing toward gateways
- Greedy transmission set construction under sector and TX/RX constraints
- Cyclic link schedule optimization for worst-case path delay
- A feedback loop shortening long schedules, batch experiments and metrics

License: MIT
"""

from .netmodel import Topology, load_topology, save_topology
from .pipeline import (
    STRATEGIES,
    NetworkConfiguration,
    PipelineConfig,
    Strategy,
    run_pipeline,
)
from .routing import compute_mdst
from .scheduler import AnnealConfig, optimize_schedule, worst_case_delay
from .selection import SelectionConfig, select_active_links, weight_links
from .topogen import GeneratorConfig, generate_topology, load_generator_config
from .tsgen import build_transmission_sets, schedule_weights
from .utils import MeshPlanError

__version__ = "1.0.0"

__all__ = [
    "Topology",
    "load_topology",
    "save_topology",
    "GeneratorConfig",
    "generate_topology",
    "load_generator_config",
    "SelectionConfig",
    "weight_links",
    "select_active_links",
    "compute_mdst",
    "schedule_weights",
    "build_transmission_sets",
    "AnnealConfig",
    "worst_case_delay",
    "optimize_schedule",
    "Strategy",
    "STRATEGIES",
    "PipelineConfig",
    "NetworkConfiguration",
    "run_pipeline",
    "MeshPlanError",
]
