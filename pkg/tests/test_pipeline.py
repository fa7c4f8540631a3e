"""Tests for the planning pipeline and its feedback loop."""

import dataclasses

import pytest

from meshplan.fixtures import diamond, random_topology
from meshplan.logger import RunLogger, read_logs
from meshplan.netmodel import Layer, Node, Topology, make_link
from meshplan.oracles import check_bipartite, check_routing, check_transmission_sets
from meshplan.pipeline import (
    STRATEGIES,
    PipelineConfig,
    PipelineError,
    Strategy,
    configuration_to_dict,
    load_configuration,
    load_pipeline_config,
    pipeline_config_to_dict,
    run_pipeline,
    save_configuration,
    validate_configuration,
)
from meshplan.routing import compute_mdst, routing_to_dict
from meshplan.scheduler import AnnealConfig, Schedule, optimize_schedule
from meshplan.selection import SelectionConfig, select_active_links, weight_links
from meshplan.tsgen import build_transmission_sets, schedule_weights, tss_to_dict
from meshplan.utils import write_json

FAST_ANNEAL = AnnealConfig(steps=200, restarts=2)


def _config(strategy="FS", **kwargs):
    kwargs.setdefault("anneal", FAST_ANNEAL)
    return PipelineConfig(strategy=Strategy.from_name(strategy), **kwargs)


def _single_sector_star():
    """Gateway with one radio and three leaves: one link per slot."""
    gateway = Node("g", 0.0, 0.0, 30.0, layer=Layer.GATEWAY, sector_count=1)
    leaves = [Node(n, x, y) for n, x, y in (("a", 100, 0), ("b", 0, 100), ("c", -100, 0))]
    return Topology(
        nodes=(gateway, *leaves), links=tuple(make_link(gateway, leaf) for leaf in leaves)
    )


def _dense(seed):
    return random_topology(12, seed=seed, link_probability=0.6, gateways=2)


class TestStrategy:
    @pytest.mark.parametrize(
        "name,bipartite,fill",
        [("BS", True, False), ("BA", True, True), ("FS", False, False), ("FA", False, True)],
    )
    def test_names(self, name, bipartite, fill):
        strategy = Strategy.from_name(name.lower())
        assert (strategy.bipartite, strategy.sector_fill) == (bipartite, fill)
        assert strategy.name == name
        assert str(strategy) == name

    @pytest.mark.parametrize("name", ["", "XS", "BAA", "bipartite"])
    def test_unknown(self, name):
        with pytest.raises(PipelineError, match="Unknown strategy"):
            Strategy.from_name(name)

    def test_all_four(self):
        assert [s.name for s in STRATEGIES] == ["BS", "BA", "FS", "FA"]


class TestPipelineConfig:
    def test_defaults(self):
        config = PipelineConfig()
        assert config.tss_threshold == 8
        assert config.max_feedback_rounds == 8
        assert config.strategy.name == "FS"

    def test_strategy_string(self):
        assert PipelineConfig(strategy="ba").strategy == Strategy(True, True)

    @pytest.mark.parametrize(
        "kwargs", [{"tss_threshold": 1}, {"max_feedback_rounds": -1}, {"max_trees": 0}]
    )
    def test_invalid(self, kwargs):
        with pytest.raises(PipelineError):
            PipelineConfig(**kwargs)

    def test_selection_follows_strategy(self):
        config = PipelineConfig(strategy="BS", selection=SelectionConfig(k=3))
        selection = config.selection_config()
        assert selection.bipartite
        assert selection.k == 3
        assert not config.selection.bipartite

    def test_file_round_trip(self, tmp_path):
        config = _config("BA", tss_threshold=5, diagnostics=True, max_trees=2)
        path = str(tmp_path / "pipeline.json")
        write_json(path, pipeline_config_to_dict(config))
        assert load_pipeline_config(path) == config


class TestRunPipeline:
    def test_short_schedule_skips_feedback(self):
        topology = diamond()
        configuration = run_pipeline(topology, _config())

        assert configuration.feedback_rounds == 0
        assert configuration.rounds == []
        assert configuration.avoid_final == frozenset()
        assert configuration.strategy == "FS"

        # Identical to running the four phases once
        active = select_active_links(topology, weight_links(topology), SelectionConfig())
        routing = compute_mdst(active)
        tss = build_transmission_sets(active, schedule_weights(active, routing), threshold=8)
        schedule, report = optimize_schedule(tss, routing.primary_paths(), FAST_ANNEAL)
        assert configuration.active.active_links == active.active_links
        assert routing_to_dict(configuration.routing) == routing_to_dict(routing)
        assert tss_to_dict(configuration.tss) == tss_to_dict(tss)
        assert configuration.schedule.order == schedule.order
        assert configuration.delays.objective == report.objective

    @pytest.mark.parametrize("strategy", ["BS", "BA", "FS", "FA"])
    def test_diamond_is_consistent(self, strategy):
        configuration = run_pipeline(diamond(), _config(strategy))
        assert validate_configuration(configuration) == []
        assert len(configuration.tss) == 2

    def test_no_gateway(self):
        topology = Topology(nodes=(Node("a", 0, 0), Node("b", 10, 0)))
        with pytest.raises(PipelineError, match="no gateway"):
            run_pipeline(topology, _config())

    def test_disconnecting_feedback_is_discarded(self):
        configuration = run_pipeline(_single_sector_star(), _config(tss_threshold=2))
        assert len(configuration.tss) == 6
        assert configuration.feedback_rounds == 0
        assert configuration.rounds == []
        assert configuration.avoid_final == frozenset()
        assert configuration.active.unconnected == frozenset()

    def test_feedback_limit(self):
        configuration = run_pipeline(
            _single_sector_star(), _config(tss_threshold=2, max_feedback_rounds=0)
        )
        assert configuration.feedback_rounds == 0
        assert configuration.initial_tss == len(configuration.tss) == 6

    @pytest.mark.parametrize("seed", range(6))
    @pytest.mark.parametrize("strategy", ["BS", "FA"])
    def test_feedback_invariants(self, seed, strategy):
        topology = _dense(seed)
        config = _config(strategy, tss_threshold=2, max_feedback_rounds=3)
        configuration = run_pipeline(topology, config)

        assert validate_configuration(configuration) == []
        assert check_transmission_sets(configuration.active, configuration.tss) == []
        assert check_routing(configuration.routing, configuration.active) == []
        if strategy == "BS":
            assert check_bipartite(configuration.active) == []

        assert configuration.feedback_rounds <= 3
        assert not configuration.active.active_links & configuration.avoid_final
        assert configuration.avoid_final <= {link.key for link in topology.links}

        rounds = configuration.rounds
        assert len(rounds) == configuration.feedback_rounds
        sizes = [r.avoid_size for r in rounds]
        assert sizes == sorted(sizes)
        if rounds:
            assert rounds[-1].avoid_size == len(configuration.avoid_final)
            assert rounds[-1].tss_after == len(configuration.tss)

    def test_feedback_fires_on_dense_networks(self):
        fired = [
            run_pipeline(_dense(seed), _config(tss_threshold=2, max_feedback_rounds=2)).rounds
            for seed in range(6)
        ]
        assert any(fired)

    @pytest.mark.parametrize("seed", range(4))
    def test_diagnostics_record_worst_cases(self, seed):
        config = _config(tss_threshold=2, max_feedback_rounds=2, diagnostics=True)
        configuration = run_pipeline(_dense(seed), config)
        for record in configuration.rounds:
            assert record.worst_before is not None
            assert record.worst_after is not None
        for before, after in zip(configuration.rounds, configuration.rounds[1:]):
            assert after.worst_before == before.worst_after
        if configuration.rounds:
            assert configuration.rounds[-1].worst_after == configuration.delays.worst_case

    @pytest.mark.parametrize("seed", range(4))
    def test_diagnostics_do_not_change_the_plan(self, seed):
        plain = run_pipeline(_dense(seed), _config(tss_threshold=2, max_feedback_rounds=2))
        observed = run_pipeline(
            _dense(seed), _config(tss_threshold=2, max_feedback_rounds=2, diagnostics=True)
        )
        assert observed.feedback_rounds == plain.feedback_rounds
        assert observed.avoid_final == plain.avoid_final
        assert observed.active.active_links == plain.active.active_links
        assert tss_to_dict(observed.tss) == tss_to_dict(plain.tss)
        assert observed.schedule.order == plain.schedule.order
        assert observed.delays.objective == plain.delays.objective
        assert all(r.worst_after is None for r in plain.rounds)

    def test_gateway_only_links(self):
        g0 = Node("g0", 0.0, 0.0, 30.0, layer=Layer.GATEWAY)
        g1 = Node("g1", 100.0, 0.0, 30.0, layer=Layer.GATEWAY)
        lone = Node("n", 500.0, 500.0)
        topology = Topology(nodes=(g0, g1, lone), links=(make_link(g0, g1),))
        configuration = run_pipeline(topology, _config())

        assert configuration.active.active_links == {("g0", "g1")}
        assert configuration.active.unconnected == {"n"}
        assert configuration.routing.trees == []
        assert configuration.routing.primary == {}
        assert configuration.routing.excluded == ["n"]
        assert len(configuration.tss) == 2
        assert configuration.delays.worst_case == 0
        assert validate_configuration(configuration) == []

    @pytest.mark.parametrize("strategy", ["BA", "FS"])
    def test_reproducible(self, strategy):
        topology = _dense(2)
        config = _config(strategy, tss_threshold=3)
        first = configuration_to_dict(run_pipeline(topology, config))
        second = configuration_to_dict(run_pipeline(topology, config))
        assert first == second

    def test_run_logger(self, tmp_path):
        with RunLogger(str(tmp_path)) as run_logger:
            run_pipeline(diamond(), _config(), run_logger)
        lines = list(read_logs(str(tmp_path), timestamps=False))
        assert lines[0].startswith("FS round 0: 4 active links")
        assert lines[-1].startswith("FS schedule: L=2")


class TestConfigurationFiles:
    def test_save_and_load(self, tmp_path):
        configuration = run_pipeline(_dense(1), _config("BA", tss_threshold=3))
        path = str(tmp_path / "config.json")
        save_configuration(configuration, path)
        loaded = load_configuration(path)
        assert configuration_to_dict(loaded) == configuration_to_dict(configuration)
        assert validate_configuration(loaded) == []

    def test_missing_section(self):
        from meshplan.pipeline import parse_configuration

        with pytest.raises(PipelineError, match="missing section"):
            parse_configuration({"strategy": "FS"})


class TestValidateConfiguration:
    def test_schedule_length_mismatch(self):
        configuration = run_pipeline(diamond(), _config())
        broken = dataclasses.replace(configuration, schedule=Schedule([0]))
        assert any("Schedule length" in e for e in validate_configuration(broken))

    def test_unscheduled_direction(self):
        configuration = run_pipeline(diamond(), _config())
        tss = dataclasses.replace(configuration.tss, sets=configuration.tss.sets[:1])
        broken = dataclasses.replace(configuration, tss=tss, schedule=Schedule([0]))
        assert any("never scheduled" in e for e in validate_configuration(broken))

    def test_wrong_delay_report(self):
        configuration = run_pipeline(diamond(), _config())
        delays = dataclasses.replace(configuration.delays, worst_case=99)
        broken = dataclasses.replace(configuration, delays=delays)
        assert any("does not match" in e for e in validate_configuration(broken))
