"""Bipartite statistical matching: exact solvers, greedy baselines, and
balance diagnostics for treated/control study designs."""

from __future__ import annotations

from .greedy import ORDER_POLICIES, GreedyConfig, GreedyTrace, greedy_match
from .hungarian import hungarian_solve, solve_luap
from .maxflow import MaxCardResult, max_cardinality
from .metrics import (
    METRIC_KINDS,
    IntegerCosts,
    MetricSpec,
    fit_metric,
    integerize,
    integerize_values,
    pairwise_costs,
)
from .mincostflow import MinCostTrace, min_cost_matching
from .model import (
    WITH_REPLACEMENT,
    WITHOUT_REPLACEMENT,
    AdjacencyList,
    BipartiteGraph,
    CostMatrix,
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
from .pipeline import (
    METHODS,
    BalanceReport,
    CovariateBalance,
    MatchRequest,
    MatchResult,
    SolveTrace,
    balance_report,
    brute_force_oracle,
    optimal_match,
    run_request,
)
from .transforms import PaddedProblem, apply_caliper, pad_with_dummies

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "ORDER_POLICIES",
    "GreedyConfig",
    "GreedyTrace",
    "greedy_match",
    "hungarian_solve",
    "solve_luap",
    "MaxCardResult",
    "max_cardinality",
    "METRIC_KINDS",
    "IntegerCosts",
    "MetricSpec",
    "fit_metric",
    "integerize",
    "integerize_values",
    "pairwise_costs",
    "MinCostTrace",
    "min_cost_matching",
    "WITH_REPLACEMENT",
    "WITHOUT_REPLACEMENT",
    "AdjacencyList",
    "BipartiteGraph",
    "CostMatrix",
    "Matching",
    "Unit",
    "build_graph_from_edges",
    "graph_from_adjacency",
    "graph_from_cost_matrix",
    "matching_total_cost",
    "to_adjacency_list",
    "to_cost_matrix",
    "validate_matching",
    "METHODS",
    "BalanceReport",
    "CovariateBalance",
    "MatchRequest",
    "MatchResult",
    "SolveTrace",
    "balance_report",
    "brute_force_oracle",
    "optimal_match",
    "run_request",
    "PaddedProblem",
    "apply_caliper",
    "pad_with_dummies",
]
