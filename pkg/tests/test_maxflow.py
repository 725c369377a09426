import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from matchforge import Matching, max_cardinality, validate_matching
from matchforge.maxflow import (
    ResidualView,
    augment,
    build_flow_network,
    find_augmenting_path,
)
from helpers import complete_graph, graph_instances, make_graph, max_matching_brute


def reroute_fixture():
    """Two treated, the first holding the only edge into the shared control."""
    g = make_graph(2, 2, {(0, 0): 1.0, (0, 1): 1.0, (1, 1): 1.0})
    net = build_flow_network(g)
    net.match_t[0] = 1
    net.match_c[1] = 0
    return net


class TestNetworkShape:
    def test_complete_five_by_five(self):
        g = complete_graph(np.ones((5, 5)))
        net = build_flow_network(g)
        assert net.n_nodes == 12
        assert net.source == 0 and net.sink == 11
        pair_edges = sum(len(row) for row in net.adj)
        assert pair_edges == 25
        assert net.n_treated + pair_edges + net.n_control == 35

    def test_node_classification(self):
        net = build_flow_network(make_graph(2, 3, {(0, 0): 1.0}))
        assert net.describe(0) == ("s", 0)
        assert net.describe(1) == ("T", 0)
        assert net.describe(2) == ("T", 1)
        assert net.describe(3) == ("C", 0)
        assert net.describe(5) == ("C", 2)
        assert net.describe(6) == ("t", 0)
        with pytest.raises(ValueError, match="outside"):
            net.describe(7)

    def test_costs_must_align_with_edges(self):
        g = make_graph(1, 2, {(0, 0): 1.0, (0, 1): 2.0})
        with pytest.raises(ValueError, match="align"):
            build_flow_network(g, costs=[1])

    def test_fresh_network_has_zero_flow(self):
        net = build_flow_network(complete_graph([[1, 2], [3, 4]]))
        assert net.flow_value() == 0
        assert net.pairs() == []
        assert net.check_flow() == []


class TestAugmentingPath:
    def test_single_edge_path(self):
        net = build_flow_network(make_graph(1, 1, {(0, 0): 1.0}))
        assert find_augmenting_path(net) == [0, 1, 2, 3]

    def test_rerouting_uses_a_backward_hop(self):
        net = reroute_fixture()
        # free T2 reaches the sink only by displacing T1 from C2 to C1
        assert find_augmenting_path(net) == [0, 2, 4, 1, 3, 5]

    def test_path_after_reroute_is_exhausted(self):
        net = reroute_fixture()
        augment(net, [0, 2, 4, 1, 3, 5])
        assert net.pairs() == [(0, 0), (1, 1)]
        assert net.flow_value() == 2
        assert net.check_flow() == []
        assert find_augmenting_path(net) is None

    def test_no_path_when_saturated(self):
        net = build_flow_network(make_graph(2, 1, {(0, 0): 1.0, (1, 0): 1.0}))
        augment(net, find_augmenting_path(net))
        assert find_augmenting_path(net) is None

    def test_no_path_in_edgeless_network(self):
        net = build_flow_network(make_graph(2, 2, {}))
        assert find_augmenting_path(net) is None


class TestResidualView:
    def test_capacities_around_a_preset_flow(self):
        view = ResidualView(reroute_fixture())
        assert view.capacity(0, 1) == 0  # T1 already matched
        assert view.capacity(0, 2) == 1  # T2 free
        assert view.capacity(1, 0) == 1
        assert view.capacity(1, 4) == 0  # T1 -> C2 carries flow
        assert view.capacity(4, 1) == 1  # so the reverse hop opens
        assert view.capacity(1, 3) == 1
        assert view.capacity(3, 1) == 0
        assert view.capacity(2, 4) == 1
        assert view.capacity(2, 3) == 0  # no such edge
        assert view.capacity(3, 5) == 1  # C1 free into the sink
        assert view.capacity(4, 5) == 0
        assert view.capacity(5, 4) == 1
        assert view.capacity(0, 5) == 0

    def test_every_hop_of_a_found_path_has_capacity(self):
        net = reroute_fixture()
        path = find_augmenting_path(net)
        view = ResidualView(net)
        assert all(view.capacity(u, v) == 1 for u, v in zip(path, path[1:]))


class TestAugment:
    def test_rejects_paths_not_spanning_source_to_sink(self):
        net = build_flow_network(make_graph(1, 1, {(0, 0): 1.0}))
        with pytest.raises(ValueError, match="source to the sink"):
            augment(net, [1, 2, 3])
        with pytest.raises(ValueError, match="source to the sink"):
            augment(net, [0, 3])

    def test_rejects_matched_entry_node(self):
        net = reroute_fixture()
        with pytest.raises(ValueError, match="free treated"):
            augment(net, [0, 1, 3, 5])

    def test_rejects_missing_forward_capacity(self):
        net = build_flow_network(make_graph(2, 2, {(0, 0): 1.0, (1, 1): 1.0}))
        with pytest.raises(ValueError, match="no forward residual"):
            augment(net, [0, 1, 4, 5])

    def test_rejects_missing_backward_capacity(self):
        net = build_flow_network(
            make_graph(2, 2, {(0, 0): 1.0, (0, 1): 1.0, (1, 1): 1.0}))
        with pytest.raises(ValueError, match="no backward residual"):
            augment(net, [0, 2, 4, 1, 3, 5])

    def test_rejects_occupied_exit_node(self):
        net = build_flow_network(
            make_graph(2, 2, {(0, 0): 1.0, (1, 0): 1.0, (1, 1): 1.0}))
        augment(net, [0, 1, 3, 5])
        with pytest.raises(ValueError, match="free control"):
            augment(net, [0, 2, 3, 5])


class TestMaxCardinality:
    def test_contested_control(self):
        g = make_graph(2, 1, {(0, 0): 1.0, (1, 0): 2.0})
        result = max_cardinality(g)
        assert result.value == 1
        assert result.augmentations == 1

    def test_edgeless(self):
        result = max_cardinality(make_graph(3, 2, {}))
        assert result.value == 0 and result.augmentations == 0

    def test_complete_square_saturates(self):
        result = max_cardinality(complete_graph(np.ones((4, 4))))
        assert result.value == 4
        assert result.network.pairs() == [(0, 0), (1, 1), (2, 2), (3, 3)]

    @given(graph_instances(max_side=6))
    @settings(max_examples=80, deadline=None)
    def test_agrees_with_exhaustive_search(self, graph):
        result = max_cardinality(graph)
        assert result.value == max_matching_brute(graph)
        assert result.augmentations == result.value
        assert result.network.check_flow() == []

    @given(graph_instances(max_side=5))
    @settings(max_examples=50, deadline=None)
    def test_flow_stays_sound_after_every_augmentation(self, graph):
        net = build_flow_network(graph)
        while (path := find_augmenting_path(net)) is not None:
            before = net.flow_value()
            augment(net, path)
            assert net.flow_value() == before + 1
            assert net.check_flow() == []

    @given(graph_instances(max_side=6))
    @settings(max_examples=50, deadline=None)
    def test_pairs_form_a_valid_matching(self, graph):
        result = max_cardinality(graph)
        matching = Matching(tuple(result.network.pairs()))
        assert validate_matching(graph, matching) == []
