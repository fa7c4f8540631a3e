"""
End-to-end checks against independent oracles and the dense-urban grid.

The oracle sweeps run with the regular suite. The 64-run grid and the
exhaustive annealing sweep take minutes and only run when
MESHPLAN_SLOW_TESTS is set.
"""

import statistics
import time

import numpy as np
import pytest

from meshplan.experiment import BatchSpec, run_batch
from meshplan.fixtures import random_topology
from meshplan.metrics import PRIMARY_DELAY, iqr_overlap
from meshplan.oracles import (
    brute_force_objective,
    check_bipartite,
    check_routing,
    check_transmission_sets,
    simulate_delay,
)
from meshplan.pipeline import PipelineConfig, run_pipeline
from meshplan.routing import compute_mdst
from meshplan.scheduler import AnnealConfig, Schedule, optimize_schedule, path_delay
from meshplan.selection import SelectionConfig, select_active_links, weight_links
from meshplan.topogen import generate_topology, load_generator_config, with_seed
from meshplan.tsgen import (
    TransmissionSet,
    TransmissionSetCollection,
    build_transmission_sets,
    schedule_weights,
)
from meshplan.utils import slow_tests_enabled

slow = pytest.mark.skipif(
    not slow_tests_enabled(), reason="set MESHPLAN_SLOW_TESTS=1 to run grid tests"
)

CHAIN = ["g", "x0", "x1", "x2", "x3"]


def _random_schedule(rng, length):
    """Random sets over the directed hops of CHAIN, every hop in at least one set."""
    sets = [[] for _ in range(length)]
    for u, v in zip(CHAIN, CHAIN[1:]):
        for key in ((u, v), (v, u)):
            count = int(rng.integers(1, length + 1))
            for slot in rng.choice(length, size=count, replace=False):
                sets[int(slot)].append(key)
    tss = TransmissionSetCollection(sets=[TransmissionSet(links=links) for links in sets])
    order = [int(i) for i in rng.permutation(length)]
    return Schedule(order), tss


def _random_hops(rng):
    start, end = (int(i) for i in rng.choice(len(CHAIN), size=2, replace=False))
    step = 1 if end > start else -1
    nodes = [CHAIN[i] for i in range(start, end + step, step)]
    return list(zip(nodes, nodes[1:]))


class TestOracleSweeps:
    def test_transmission_sets_on_small_topologies(self):
        rng = np.random.default_rng(2024)
        checked = 0
        for seed in range(200):
            n = int(rng.integers(2, 13))
            topology = random_topology(
                n, seed=seed, link_probability=0.5, gateways=min(2, n - 1)
            )
            bipartite = bool(seed % 2)
            fill = bool((seed // 2) % 2)
            config = SelectionConfig(k=int(rng.integers(1, 4)), bipartite=bipartite)
            active = select_active_links(topology, weight_links(topology), config)
            gateways = set(topology.gateways())
            if not any(gateways & set(key) for key in active.active_links):
                continue

            routing = compute_mdst(active)
            tss = build_transmission_sets(active, schedule_weights(active, routing), fill)
            assert check_transmission_sets(active, tss) == [], f"seed {seed}"
            assert check_routing(routing, active) == [], f"seed {seed}"
            if bipartite:
                assert check_bipartite(active) == [], f"seed {seed}"
            checked += 1
        assert checked > 100

    def test_path_delay_matches_slot_simulation(self):
        rng = np.random.default_rng(7)
        for _ in range(1000):
            length = int(rng.integers(1, 7))
            schedule, tss = _random_schedule(rng, length)
            hops = _random_hops(rng)
            t0 = int(rng.integers(0, length))
            assert path_delay(schedule, tss, hops, t0) == simulate_delay(
                schedule.order, tss, hops, t0
            )


class TestDenseUrbanTopologies:
    def test_generator_envelope(self):
        config = load_generator_config("dense-urban")
        for seed in range(16):
            topology = generate_topology(with_seed(config, seed))
            assert len(topology.gateways()) == 4
            assert 60 <= topology.N <= 75
            assert 250 <= len(topology.links) <= 550, f"seed {seed}"


@pytest.mark.slow
@slow
class TestAnnealingSweep:
    def test_forced_annealing_finds_optimum(self):
        rng = np.random.default_rng(11)
        for instance in range(100):
            length = int(rng.integers(2, 7))
            _, tss = _random_schedule(rng, length)
            paths = {node: list(reversed(CHAIN[: i + 1])) for i, node in enumerate(CHAIN) if i}
            config = AnnealConfig(seed=instance)
            _, report = optimize_schedule(tss, paths, config, force_anneal=True)
            best, _ = brute_force_objective(tss, paths)
            assert report.objective == best, f"instance {instance}"


@pytest.mark.slow
@slow
class TestDenseUrbanGrid:
    @pytest.fixture(scope="class")
    def batch(self, tmp_path_factory):
        spec = BatchSpec(
            generator=load_generator_config("dense-urban"),
            seeds=list(range(16)),
            pipeline=PipelineConfig(diagnostics=True),
            out_dir=str(tmp_path_factory.mktemp("grid")),
        )
        return run_batch(spec, resume=False)

    def test_grid_completes(self, batch):
        assert batch.failed == {}
        assert len(batch.metrics) == 64

    def test_feedback_activation(self, batch):
        activated = [m for m in batch.metrics if m.feedback_activated]
        assert len(activated) <= 16
        if activated:
            assert statistics.median(m.feedback_rounds for m in activated) == 1

    def test_feedback_never_worsens_delay(self, batch):
        activated = [m for m in batch.metrics if m.feedback_activated]
        for m in activated:
            assert m.worst_after_feedback <= m.worst_before_feedback, m.run_id
        if activated:
            improved = [m for m in activated if m.worst_after_feedback < m.worst_before_feedback]
            assert len(improved) >= 0.8 * len(activated)

    def test_feedback_removes_at_most_avoided_links(self, batch):
        for m in batch.metrics:
            assert m.link_reduction <= m.avoid_size, m.run_id

    def test_bipartite_selects_fewer_links(self, batch):
        def mean_of(bipartite, field):
            return statistics.mean(
                getattr(m, field)
                for m in batch.metrics
                if m.strategy.startswith("B") == bipartite
            )

        assert mean_of(True, "selected_link_ratio") < mean_of(False, "selected_link_ratio")
        assert mean_of(False, "avg_links_per_slot") >= mean_of(True, "avg_links_per_slot")

    def test_primary_delays_overlap_across_strategies(self, batch):
        assert iqr_overlap(batch.distributions, PRIMARY_DELAY)

    def test_short_schedule_runs_fast(self):
        config = load_generator_config("dense-urban")
        for seed in range(16):
            topology = generate_topology(with_seed(config, seed))
            start = time.perf_counter()
            configuration = run_pipeline(topology, PipelineConfig())
            elapsed = time.perf_counter() - start
            if len(configuration.tss) <= 8:
                assert elapsed < 60.0
                return
        pytest.skip("no seed produced a schedule of at most 8 sets")
