import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from matchforge import (
    WITH_REPLACEMENT,
    WITHOUT_REPLACEMENT,
    BipartiteGraph,
    Matching,
    Unit,
    build_graph_from_edges,
    graph_from_adjacency,
    graph_from_cost_matrix,
    matching_total_cost,
    to_adjacency_list,
    to_cost_matrix,
    validate_matching,
)
from helpers import graph_instances, make_graph

# 5x5 ring-shaped sparse graph reused across the storage tests:
# each treated unit sees two controls, wrapping around at the ends.
RING_CELLS = {
    (0, 0): 1.0, (0, 1): 2.0,
    (1, 1): 3.0, (1, 2): 4.0,
    (2, 2): 5.0, (2, 3): 6.0,
    (3, 3): 7.0, (3, 4): 8.0,
    (4, 0): 9.0, (4, 4): 10.0,
}


class TestUnit:
    def test_holds_fields(self):
        u = Unit("a", 1, [1.0, 2.0], score=0.3, response=7.0)
        assert u.id == "a" and u.treatment == 1
        assert u.covariates.tolist() == [1.0, 2.0]
        assert u.score == 0.3 and u.response == 7.0

    def test_rejects_bad_treatment(self):
        with pytest.raises(ValueError, match="treatment"):
            Unit("a", 2, [1.0])

    def test_rejects_non_vector_covariates(self):
        with pytest.raises(ValueError, match="one-dimensional"):
            Unit("a", 0, [[1.0, 2.0]])

    def test_rejects_non_finite_covariates(self):
        with pytest.raises(ValueError, match="finite"):
            Unit("a", 0, [np.nan])

    def test_covariates_read_only(self):
        u = Unit("a", 0, [1.0])
        with pytest.raises(ValueError):
            u.covariates[0] = 2.0


class TestBuildGraph:
    def test_single_edge(self):
        g = build_graph_from_edges(["T1"], ["C1"], [("T1", "C1", 2.5)])
        assert g.n_edges == 1
        assert list(g.edges()) == [(0, 0, 2.5)]

    def test_complete_two_by_two(self):
        edges = [("T1", "C1", 1.0), ("T1", "C2", 2.0),
                 ("T2", "C1", 3.0), ("T2", "C2", 4.0)]
        g = build_graph_from_edges(["T1", "T2"], ["C1", "C2"], edges)
        assert g.n_edges == 4
        assert g.edge_cost.tolist() == [1.0, 2.0, 3.0, 4.0]

    def test_rejects_treated_id_as_control(self):
        with pytest.raises(ValueError, match="unknown control id"):
            build_graph_from_edges(["T1"], ["C1"], [("T1", "T1", 1.0)])

    def test_rejects_unknown_treated(self):
        with pytest.raises(ValueError, match="unknown treated id"):
            build_graph_from_edges(["T1"], ["C1"], [("T9", "C1", 1.0)])

    def test_rejects_duplicate_ids(self):
        with pytest.raises(ValueError, match="duplicate treated ids"):
            build_graph_from_edges(["T1", "T1"], ["C1"], [])
        with pytest.raises(ValueError, match="duplicate control ids"):
            build_graph_from_edges(["T1"], ["C1", "C1"], [])

    def test_rejects_duplicate_edge(self):
        with pytest.raises(ValueError, match="duplicate edge"):
            build_graph_from_edges(["T1"], ["C1"],
                                   [("T1", "C1", 1.0), ("T1", "C1", 2.0)])

    def test_rejects_negative_and_non_finite_costs(self):
        with pytest.raises(ValueError, match="finite and non-negative"):
            build_graph_from_edges(["T1"], ["C1"], [("T1", "C1", -1.0)])
        with pytest.raises(ValueError, match="finite and non-negative"):
            build_graph_from_edges(["T1"], ["C1"], [("T1", "C1", np.inf)])

    def test_edges_canonically_sorted(self):
        edges = [("T2", "C2", 4.0), ("T1", "C2", 2.0),
                 ("T2", "C1", 3.0), ("T1", "C1", 1.0)]
        g = build_graph_from_edges(["T1", "T2"], ["C1", "C2"], edges)
        assert [(i, j) for i, j, _ in g.edges()] == [(0, 0), (0, 1), (1, 0), (1, 1)]

    def test_out_of_range_indices(self):
        with pytest.raises(ValueError, match="out of range"):
            BipartiteGraph.from_indices(["T1"], ["C1"], [1], [0], [1.0])
        with pytest.raises(ValueError, match="out of range"):
            BipartiteGraph.from_indices(["T1"], ["C1"], [0], [5], [1.0])


class TestCostMatrix:
    def test_sparse_ring_pattern(self):
        g = make_graph(5, 5, RING_CELLS)
        cm = to_cost_matrix(g)
        assert cm.mask.sum() == 10
        assert (~cm.mask).sum() == 15
        assert cm.sentinel == 11.0
        assert np.all(cm.values[~cm.mask] == 11.0)
        expected_mask = np.zeros((5, 5), dtype=bool)
        for i, j in RING_CELLS:
            expected_mask[i, j] = True
            assert cm.values[i, j] == RING_CELLS[(i, j)]
        assert np.array_equal(cm.mask, expected_mask)

    def test_complete_graph_all_finite(self):
        g = make_graph(2, 2, {(0, 0): 1, (0, 1): 2, (1, 0): 3, (1, 1): 4})
        cm = to_cost_matrix(g)
        assert cm.mask.all()

    def test_edgeless_graph_all_sentinel_one(self):
        g = make_graph(2, 2, {})
        cm = to_cost_matrix(g)
        assert not cm.mask.any()
        assert cm.sentinel == 1.0
        assert np.all(cm.values == 1.0)

    def test_sentinel_strictly_above_every_cost(self):
        g = make_graph(5, 5, RING_CELLS)
        cm = to_cost_matrix(g)
        assert cm.sentinel > cm.values[cm.mask].max()


class TestAdjacencyList:
    def test_sparse_ring_pattern(self):
        g = make_graph(5, 5, RING_CELLS)
        adj = to_adjacency_list(g)
        assert [nb.tolist() for nb in adj.neighbors] == [
            [0, 1], [1, 2], [2, 3], [3, 4], [0, 4]]
        assert [c.tolist() for c in adj.costs] == [
            [1.0, 2.0], [3.0, 4.0], [5.0, 6.0], [7.0, 8.0], [9.0, 10.0]]

    def test_edgeless(self):
        adj = to_adjacency_list(make_graph(3, 2, {}))
        assert all(nb.size == 0 for nb in adj.neighbors)
        assert adj.n_edges == 0

    def test_memory_is_edge_proportional(self):
        adj = to_adjacency_list(make_graph(5, 5, RING_CELLS))
        assert adj.n_edges == 10


class TestRoundTrips:
    @given(graph_instances())
    @settings(max_examples=60, deadline=None)
    def test_cost_matrix_round_trip(self, g):
        back = graph_from_cost_matrix(to_cost_matrix(g), g.treated_ids, g.control_ids)
        assert list(back.edges()) == list(g.edges())

    @given(graph_instances())
    @settings(max_examples=60, deadline=None)
    def test_adjacency_round_trip(self, g):
        back = graph_from_adjacency(to_adjacency_list(g), g.treated_ids, g.control_ids)
        assert list(back.edges()) == list(g.edges())

    @given(graph_instances())
    @settings(max_examples=60, deadline=None)
    def test_sentinel_never_collides_with_a_cost(self, g):
        cm = to_cost_matrix(g)
        finite = cm.values[cm.mask]
        assert not np.isin(cm.sentinel, finite)


class TestMatching:
    def test_pairs_canonicalized(self):
        m = Matching(((2, 1), (0, 0), (1, 2)))
        assert m.pairs == ((0, 0), (1, 2), (2, 1))
        assert m.cardinality == 3

    def test_mode_and_k_validation(self):
        with pytest.raises(ValueError, match="mode"):
            Matching((), mode="sometimes")
        with pytest.raises(ValueError, match="k must be"):
            Matching((), k=0)

    def test_matched_sets(self):
        m = Matching(((0, 1), (2, 1)), mode=WITH_REPLACEMENT)
        assert m.matched_treated() == {0, 2}
        assert m.matched_controls() == {1}

    def test_total_cost(self):
        g = make_graph(2, 2, {(0, 0): 1.5, (1, 1): 2.5})
        assert matching_total_cost(g, Matching(((0, 0), (1, 1)))) == 4.0


class TestValidateMatching:
    def test_empty_matching_valid(self):
        g = make_graph(2, 2, {(0, 0): 1})
        assert validate_matching(g, Matching(())) == []

    def test_control_reuse_without_replacement(self):
        g = make_graph(2, 2, {(0, 0): 1, (1, 0): 2})
        problems = validate_matching(g, Matching(((0, 0), (1, 0))))
        assert any("reused" in p for p in problems)

    def test_control_reuse_fine_with_replacement(self):
        g = make_graph(2, 2, {(0, 0): 1, (1, 0): 2})
        m = Matching(((0, 0), (1, 0)), mode=WITH_REPLACEMENT)
        assert validate_matching(g, m) == []

    def test_non_edge_pair(self):
        g = make_graph(2, 3, {(0, 0): 1})
        problems = validate_matching(g, Matching(((0, 2),)))
        assert any("not an edge" in p for p in problems)

    def test_out_of_range_pair(self):
        g = make_graph(1, 1, {(0, 0): 1})
        problems = validate_matching(g, Matching(((5, 0),)))
        assert any("out of range" in p for p in problems)

    def test_k_limit(self):
        g = make_graph(1, 3, {(0, 0): 1, (0, 1): 2, (0, 2): 3})
        m = Matching(((0, 0), (0, 1), (0, 2)), mode=WITH_REPLACEMENT, k=2)
        problems = validate_matching(g, m)
        assert any("1:2 limit" in p for p in problems)
        ok = Matching(((0, 0), (0, 1)), mode=WITHOUT_REPLACEMENT, k=2)
        assert validate_matching(g, ok) == []
