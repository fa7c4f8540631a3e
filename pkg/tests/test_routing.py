"""Tests for MDST routing and path redundancy."""

import pytest

from meshplan.fixtures import chain, diamond, random_topology, star
from meshplan.netmodel import Layer, Node, Topology, make_link
from meshplan.oracles import check_routing, exhaustive_disjoint_count
from meshplan.routing import (
    RoutingError,
    SpanningTree,
    alternative_paths,
    compute_mdst,
    count_disjoint_paths,
    disjointness_report,
    load_routing,
    parse_routing,
    routing_to_dict,
    save_routing,
    tree_paths,
)
from meshplan.selection import (
    ActiveTopology,
    SelectionConfig,
    select_active_links,
    weight_links,
)


def _active(topology, k=2, bipartite=False):
    config = SelectionConfig(k=k, bipartite=bipartite)
    return select_active_links(topology, weight_links(topology), config)


class TestDiamond:
    @pytest.fixture
    def routing(self):
        return compute_mdst(_active(diamond()))

    def test_two_trees_rooted_at_gateway(self, routing):
        assert [tree.root for tree in routing.trees] == ["g", "g"]

    def test_stems_claim_heaviest_extension(self, routing):
        first, second = routing.trees
        assert first.parent["a"] == "g"
        assert first.parent["c"] == "a"
        assert second.parent["b"] == "g"

    def test_trees_are_spanning(self, routing):
        for tree in routing.trees:
            assert tree.nodes() == ["a", "b", "c", "g"]
        assert check_routing(routing, _active(diamond())) == []

    def test_trees_leave_gateway_through_own_stem(self, routing):
        first, second = routing.trees
        assert first.parent["b"] == "c"
        assert second.parent["a"] == "c"

    def test_primary_paths(self, routing):
        paths = routing.primary_paths()
        assert paths["a"] == ["a", "g"]
        assert paths["b"] == ["b", "g"]
        assert paths["c"] == ["c", "a", "g"]
        assert routing.primary["c"].tree == 0
        assert routing.primary["c"].hops == 2

    def test_disjoint_paths(self, routing):
        for node in ("a", "b", "c"):
            assert count_disjoint_paths(routing, node) == 2
        report = disjointness_report(routing)
        assert report.below_two == []
        assert report.average == 2.0

    def test_alternatives_exclude_primary(self, routing):
        alternatives = alternative_paths(routing)
        assert alternatives["c"] == [["c", "b", "g"]]
        assert alternatives["a"] == [["a", "c", "b", "g"]]

    def test_max_trees(self):
        routing = compute_mdst(_active(diamond()), max_trees=1)
        assert len(routing.trees) == 1
        assert routing.trees[0].parent["a"] == "g"


class TestSmallShapes:
    def test_star(self):
        routing = compute_mdst(_active(star(3), k=3))
        assert len(routing.trees) == 3
        for leaf in ("a", "b", "c"):
            assert routing.primary[leaf].path == [leaf, "g"]
            assert count_disjoint_paths(routing, leaf) == 1

    def test_star_balances_equal_primaries(self):
        routing = compute_mdst(_active(star(3), k=3))
        assert sorted(entry.tree for entry in routing.primary.values()) == [0, 1, 2]

    def test_chain(self):
        routing = compute_mdst(_active(chain(2)))
        assert len(routing.trees) == 1
        assert routing.primary["a"].hops == 1
        assert routing.primary["b"].hops == 2
        assert count_disjoint_paths(routing, "b") == 1

    def test_unknown_node(self):
        routing = compute_mdst(_active(chain(2)))
        with pytest.raises(RoutingError):
            count_disjoint_paths(routing, "zz")
        with pytest.raises(RoutingError):
            count_disjoint_paths(routing, "g")

    def test_no_gateway_links(self):
        active = ActiveTopology(
            base=diamond(),
            active_links=frozenset({("a", "c")}),
            unconnected=frozenset({"a", "b", "c"}),
        )
        with pytest.raises(RoutingError, match="no stems"):
            compute_mdst(active)

    def test_gateway_to_gateway_links_only(self):
        g0 = Node("g0", 0.0, 0.0, 30.0, layer=Layer.GATEWAY)
        g1 = Node("g1", 100.0, 0.0, 30.0, layer=Layer.GATEWAY)
        lone = Node("n", 500.0, 500.0)
        base = Topology(nodes=(g0, g1, lone), links=(make_link(g0, g1),))
        active = ActiveTopology(
            base=base,
            active_links=frozenset({("g0", "g1")}),
            unconnected=frozenset({"n"}),
        )
        routing = compute_mdst(active)
        assert routing.trees == []
        assert routing.primary == {}
        assert routing.excluded == ["n"]
        assert disjointness_report(routing).counts == {}

    def test_shared_gateway_neighbor_seeds_one_stem(self):
        g0 = Node("g0", 0.0, 0.0, 30.0, layer=Layer.GATEWAY)
        g1 = Node("g1", 200.0, 0.0, 30.0, layer=Layer.GATEWAY)
        relay = Node("a", 100.0, 0.0, 10.0)
        base = Topology(
            nodes=(relay, g0, g1), links=(make_link(g0, relay), make_link(relay, g1))
        )
        active = ActiveTopology(
            base=base, active_links=frozenset({("a", "g0"), ("a", "g1")})
        )
        routing = compute_mdst(active)
        assert len(routing.trees) == 1
        assert routing.primary["a"].path[0] == "a"
        assert len(routing.primary["a"].path) == 2

    def test_unconnected_nodes_excluded(self):
        active = ActiveTopology(
            base=diamond(),
            active_links=frozenset({("a", "g"), ("b", "g")}),
            unconnected=frozenset({"c"}),
        )
        routing = compute_mdst(active)
        assert routing.excluded == ["c"]
        assert "c" not in routing.primary

    def test_invalid_max_trees(self):
        with pytest.raises(RoutingError):
            compute_mdst(_active(diamond()), max_trees=0)


class TestSpanningTree:
    def test_path_to_root(self):
        tree = SpanningTree(id=0, root="g", parent={"a": "g", "b": "a"})
        assert tree.path_to_root("b") == ["b", "a", "g"]
        assert tree.edges() == [("a", "b"), ("a", "g")]

    def test_cycle_detected(self):
        tree = SpanningTree(id=0, root="g", parent={"a": "b", "b": "a"})
        with pytest.raises(RoutingError, match="cycle"):
            tree.path_to_root("a")

    def test_unknown_node(self):
        with pytest.raises(RoutingError):
            SpanningTree(id=0, root="g").path_to_root("x")


class TestRandomTopologies:
    @pytest.mark.parametrize("seed", range(8))
    @pytest.mark.parametrize("bipartite", [False, True])
    def test_tree_and_primary_invariants(self, seed, bipartite):
        topology = random_topology(12, seed=seed, link_probability=0.5, gateways=2)
        active = _active(topology, bipartite=bipartite)
        routing = compute_mdst(active)

        assert check_routing(routing, active) == []

        gateways = set(topology.gateways())
        connected = set(active.connected_nodes()) - gateways
        assert set(routing.primary) == connected

        for node, entry in routing.primary.items():
            assert entry.path[-1] in gateways
            assert len(set(entry.path)) == len(entry.path)
            for path in tree_paths(routing, node):
                assert entry.hops <= len(path) - 1

    @pytest.mark.parametrize("seed", range(6))
    def test_disjoint_count_matches_exhaustive_search(self, seed):
        topology = random_topology(10, seed=seed, link_probability=0.6, gateways=2)
        routing = compute_mdst(_active(topology, k=3))
        for node in routing.primary:
            expected = exhaustive_disjoint_count(tree_paths(routing, node))
            assert count_disjoint_paths(routing, node) == expected
            assert expected >= 1


class TestJson:
    def test_save_and_load(self, tmp_path):
        routing = compute_mdst(_active(diamond()))
        path = str(tmp_path / "routing.json")
        save_routing(routing, path)
        assert routing_to_dict(load_routing(path)) == routing_to_dict(routing)

    def test_malformed(self):
        with pytest.raises(RoutingError):
            parse_routing({"trees": [{"id": 0}], "primary": {}})
