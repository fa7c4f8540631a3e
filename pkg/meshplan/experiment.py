#!/usr/bin/env python3
"""
Batch experiments for meshplan.

Runs the planning pipeline over a grid of generator seeds and strategies:

    for seed in seeds:                 topology = generate(config, seed)
        for strategy in strategies:    run_pipeline(topology, strategy)

Runs are independent and execute in worker processes, at most
MESHPLAN_THREADS at a time. Each run writes into its own directory (see
meshplan.store), so a batch can be interrupted and resumed; completed runs
are loaded instead of recomputed. A failing run is recorded as failed and
the batch moves on.
"""

import dataclasses
import os
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

from meshplan.logger import RunLogger, get_logger
from meshplan.metrics import (
    DistRow,
    RunMetrics,
    collect_metrics,
    load_metrics,
    save_metrics,
    write_batch,
)
from meshplan.pipeline import (
    STRATEGIES,
    PipelineConfig,
    Strategy,
    parse_pipeline_config,
    pipeline_config_to_dict,
    run_pipeline,
    save_configuration,
)
from meshplan.store import (
    CONFIG_FILE,
    METRICS_FILE,
    STATUS_DONE,
    STATUS_FAILED,
    STATUS_RUNNING,
    RunStore,
)
from meshplan.topogen import (
    GeneratorConfig,
    generate_topology,
    generator_config_to_dict,
    parse_generator_config,
    with_seed,
)
from meshplan.utils import MeshPlanError, get_thread_count, make_run_id, write_json

logger = get_logger(__name__)

BATCH_FILE = "batch.json"


class ExperimentError(MeshPlanError):
    """Exception raised for invalid batch definitions."""

    pass


@dataclass
class BatchSpec:
    """A seeds x strategies grid of planning runs."""

    generator: GeneratorConfig
    seeds: List[int] = field(default_factory=lambda: list(range(16)))
    strategies: List[Strategy] = field(default_factory=lambda: list(STRATEGIES))
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    out_dir: str = "results"
    include_alternatives: bool = True

    def __post_init__(self):
        self.strategies = [
            Strategy.from_name(s) if isinstance(s, str) else s for s in self.strategies
        ]
        if not self.seeds:
            raise ExperimentError("Batch needs at least one seed")
        if not self.strategies:
            raise ExperimentError("Batch needs at least one strategy")
        if len(set(self.seeds)) != len(self.seeds):
            raise ExperimentError("Seed list contains duplicates")

    def runs(self) -> List[Tuple[int, Strategy]]:
        """Grid points in execution order."""
        return [(seed, strategy) for seed in self.seeds for strategy in self.strategies]


@dataclass
class BatchResult:
    metrics: List[RunMetrics] = field(default_factory=list)
    computed: List[str] = field(default_factory=list)
    skipped: List[str] = field(default_factory=list)
    failed: Dict[str, str] = field(default_factory=dict)
    distributions: List[DistRow] = field(default_factory=list)


def batch_to_dict(spec: BatchSpec) -> Dict[str, Any]:
    return {
        "generator": generator_config_to_dict(spec.generator),
        "seeds": list(spec.seeds),
        "strategies": [s.name for s in spec.strategies],
        "pipeline": pipeline_config_to_dict(spec.pipeline),
        "include_alternatives": spec.include_alternatives,
    }


# (generator, pipeline, seed, strategy, out_dir, include_alternatives)
RunJob = Tuple[Dict[str, Any], Dict[str, Any], int, str, str, bool]


def _execute_run(job: RunJob) -> Tuple[str, Optional[str]]:
    """Run one grid point; returns (run_id, error text or None)."""
    generator_data, pipeline_data, seed, strategy, out_dir, include_alternatives = job
    run_id = make_run_id(seed, strategy)
    store = RunStore(out_dir)
    run_dir = store.path(run_id)
    store.update_status(run_id, STATUS_RUNNING)

    with RunLogger(run_dir) as run_logger:
        try:
            generator = with_seed(parse_generator_config(generator_data), seed)
            config = parse_pipeline_config(pipeline_data)
            config = dataclasses.replace(
                config,
                strategy=Strategy.from_name(strategy),
                anneal=dataclasses.replace(config.anneal, seed=seed),
            )

            topology = generate_topology(generator)
            run_logger.write(
                f"{run_id}: {topology.N} nodes, {len(topology.links)} candidate links"
            )

            start = time.perf_counter()
            configuration = run_pipeline(topology, config, run_logger)
            runtime_s = time.perf_counter() - start

            metrics = collect_metrics(
                configuration,
                topology,
                runtime_s,
                run_id=run_id,
                seed=seed,
                include_alternatives=include_alternatives,
            )
            save_configuration(configuration, os.path.join(run_dir, CONFIG_FILE))
            save_metrics(metrics, os.path.join(run_dir, METRICS_FILE))
        except Exception as e:
            run_logger.write(traceback.format_exc())
            store.update_status(run_id, STATUS_FAILED, error=f"{type(e).__name__}: {e}")
            return run_id, f"{type(e).__name__}: {e}"

        run_logger.write(f"{run_id}: done in {runtime_s:.3f}s")
        store.update_status(run_id, STATUS_DONE, runtime_s=runtime_s)
    return run_id, None


def run_batch(
    spec: BatchSpec, resume: bool = True, threads: Optional[int] = None
) -> BatchResult:
    """
    Execute a batch and write runs.csv, delays.csv and dist.csv.

    Args:
        spec: Grid and parameters
        resume: Load runs already complete in spec.out_dir instead of
            recomputing them
        threads: Worker process cap (MESHPLAN_THREADS or the CPU count when
            omitted)

    Returns:
        BatchResult; failed runs are listed with their error text
    """
    store = RunStore(spec.out_dir)
    write_json(os.path.join(spec.out_dir, BATCH_FILE), batch_to_dict(spec))

    generator_data = generator_config_to_dict(spec.generator)
    pipeline_data = pipeline_config_to_dict(spec.pipeline)

    result = BatchResult()
    jobs = []
    for seed, strategy in spec.runs():
        run_id = make_run_id(seed, strategy.name)
        if resume and store.is_complete(run_id):
            result.skipped.append(run_id)
            continue
        if store.get(run_id) is None:
            store.create(seed, strategy.name)
        jobs.append(
            (
                generator_data,
                pipeline_data,
                seed,
                strategy.name,
                spec.out_dir,
                spec.include_alternatives,
            )
        )

    workers = min(threads or get_thread_count(), max(len(jobs), 1))
    logger.info(
        "batch: %d run(s) to compute, %d already complete, %d worker(s)",
        len(jobs),
        len(result.skipped),
        workers,
    )

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            outcomes = list(executor.map(_execute_run, jobs))
    else:
        outcomes = [_execute_run(job) for job in jobs]

    for run_id, error in outcomes:
        if error is None:
            result.computed.append(run_id)
        else:
            logger.warning("batch: run %s failed: %s", run_id, error)
            result.failed[run_id] = error

    for seed, strategy in spec.runs():
        run_id = make_run_id(seed, strategy.name)
        if run_id in result.failed:
            continue
        metrics_path = os.path.join(store.path(run_id), METRICS_FILE)
        result.metrics.append(load_metrics(metrics_path))

    result.distributions = write_batch(result.metrics, spec.out_dir)
    return result
