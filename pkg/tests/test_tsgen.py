"""Tests for GreedyTwice transmission set construction."""

import pytest

from meshplan.fixtures import diamond, path, random_topology, single_link, star
from meshplan.oracles import check_transmission_sets, non_maximal_additions, set_violations
from meshplan.routing import compute_mdst
from meshplan.selection import ActiveTopology, SelectionConfig, select_active_links, weight_links
from meshplan.tsgen import (
    Mode,
    TransmissionSetError,
    build_transmission_sets,
    edge_coloring_ratio,
    load_tss,
    max_degree,
    parse_tss,
    save_tss,
    schedule_weights,
    tss_to_dict,
)


def _plan(topology, k=2, bipartite=False, fill=False):
    config = SelectionConfig(k=k, bipartite=bipartite)
    active = select_active_links(topology, weight_links(topology), config)
    routing = compute_mdst(active)
    weights = schedule_weights(active, routing)
    return active, routing, build_transmission_sets(active, weights, fill)


class TestScheduleWeights:
    def test_diamond_upstream_counts(self):
        active, routing, _ = _plan(diamond())
        weights = schedule_weights(active, routing)
        assert weights[("c", "a")] == 1.0
        assert weights[("a", "g")] == 2.0
        assert weights[("b", "g")] == 1.0
        assert weights[("c", "b")] == 0.0

    def test_downstream_mirrors_upstream(self):
        active, routing, _ = _plan(diamond())
        weights = schedule_weights(active, routing)
        for (tx, rx), value in weights.items():
            assert weights[(rx, tx)] == value

    def test_leaf_on_gateway(self):
        active, routing, _ = _plan(single_link())
        assert schedule_weights(active, routing) == {("u", "v"): 1.0, ("v", "u"): 1.0}


class TestBuild:
    def test_single_link(self):
        _, _, tss = _plan(single_link())
        assert [ts.links for ts in tss.sets] == [[("u", "v")], [("v", "u")]]
        assert tss.sets[0].mode == {"u": Mode.TX, "v": Mode.RX}
        assert tss.coverage == {("u", "v"): (0, 1)}

    def test_path_two_links_per_slot(self):
        _, _, tss = _plan(path())
        assert len(tss) == 2
        assert sorted(tss.sets[0].links) == [("u", "v"), ("w", "v")]
        assert sorted(tss.sets[1].links) == [("v", "u"), ("v", "w")]
        assert tss.sets[0].mode["v"] == Mode.RX
        assert tss.sets[1].mode["v"] == Mode.TX

    @pytest.mark.parametrize("fill", [False, True])
    def test_diamond_sets_are_maximal(self, fill):
        active, _, tss = _plan(diamond(), fill=fill)
        assert check_transmission_sets(active, tss) == []
        for ts in tss.sets:
            assert non_maximal_additions(active, ts.links) == []

    def test_troublesome_are_last_covered(self):
        active, _, tss = _plan(diamond())
        last = len(tss) - 1
        assert tss.troublesome
        assert tss.troublesome <= active.active_links
        for key in tss.troublesome:
            assert last in tss.coverage[key]
        for key, rounds in tss.coverage.items():
            if key not in tss.troublesome:
                assert max(rounds) < last

    def test_threshold_silences_troublesome(self):
        active, routing, _ = _plan(single_link())
        weights = schedule_weights(active, routing)
        for threshold in (3, 2):
            tss = build_transmission_sets(active, weights, threshold=threshold)
            assert tss.troublesome == set()
        over = build_transmission_sets(active, weights, threshold=1)
        assert over.troublesome == {("u", "v")}
        assert build_transmission_sets(active, weights).troublesome == {("u", "v")}

    def test_empty_topology(self):
        active = ActiveTopology(base=diamond(), active_links=frozenset())
        with pytest.raises(TransmissionSetError, match="no links"):
            build_transmission_sets(active, {})

    def test_star_gateway_alternates(self):
        active, _, tss = _plan(star(3), k=3)
        assert len(tss) == 2
        for ts in tss.sets:
            assert len(ts) == 3

    def test_sector_fill_on_shared_sector_node(self):
        # Fill may only add links that keep the set conflict free
        active, _, tss = _plan(diamond(shared_leaf_sector=True), k=2, fill=True)
        assert check_transmission_sets(active, tss) == []


class TestRandomTopologies:
    @pytest.mark.parametrize("seed", range(10))
    @pytest.mark.parametrize("fill", [False, True])
    @pytest.mark.parametrize("bipartite", [False, True])
    def test_conflict_free_maximal_and_complete(self, seed, fill, bipartite):
        topology = random_topology(10, seed=seed, link_probability=0.5, gateways=2)
        active, _, tss = _plan(topology, bipartite=bipartite, fill=fill)
        assert check_transmission_sets(active, tss) == []

    @pytest.mark.parametrize("seed", range(5))
    def test_modes_cover_touched_nodes(self, seed):
        active, _, tss = _plan(random_topology(10, seed=seed, gateways=2))
        for ts in tss.sets:
            for tx, rx in ts.links:
                assert ts.mode[tx] == Mode.TX
                assert ts.mode[rx] == Mode.RX
            assert set(ts.mode) == {n for key in ts.links for n in key}
            assert set_violations(active, ts.links) == []

    @pytest.mark.parametrize("seed", range(5))
    def test_deterministic(self, seed):
        topology = random_topology(11, seed=seed, gateways=2)
        assert tss_to_dict(_plan(topology)[2]) == tss_to_dict(_plan(topology)[2])

    @pytest.mark.parametrize("seed", range(5))
    def test_at_least_two_sets(self, seed):
        active, _, tss = _plan(random_topology(9, seed=seed, link_probability=0.5, gateways=2))
        assert len(tss) >= 2
        assert edge_coloring_ratio(tss, active) == len(tss) / (2 * max_degree(active))


class TestJson:
    def test_save_and_load(self, tmp_path):
        _, _, tss = _plan(diamond(), fill=True)
        target = str(tmp_path / "tss.json")
        save_tss(tss, target)
        loaded = load_tss(target)
        assert tss_to_dict(loaded) == tss_to_dict(tss)
        assert loaded.troublesome == tss.troublesome

    def test_malformed(self):
        with pytest.raises(TransmissionSetError):
            parse_tss({"sets": [{"links": [["a", "b"]], "mode": {"a": "SEND"}}]})
