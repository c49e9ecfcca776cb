"""Hamilton decompositions of regular bipartite tournaments at desk scale."""

from .digraph import (
    BipartiteDigraph,
    Digraph,
    Params,
    flip_edges,
    is_regular,
    make_blowup_cycle,
    one_flipped_c4,
    random_regular_bitournament,
    tripartite_counterexample,
)
from .errors import HypothesisError, Infeasible, InvalidArgument, InvariantViolation, SizeLimit, StageFailure
from .hamilton import (
    classify_two_cases,
    decompose_tournament,
    exact_hamilton,
    exhaustive_decomposition,
    verify_decomposition,
)
from .partition import QuadPartition, exceptional_set, optimal_partition

__all__ = [
    "BipartiteDigraph",
    "Digraph",
    "Params",
    "flip_edges",
    "is_regular",
    "make_blowup_cycle",
    "one_flipped_c4",
    "random_regular_bitournament",
    "tripartite_counterexample",
    "HypothesisError",
    "Infeasible",
    "InvalidArgument",
    "InvariantViolation",
    "SizeLimit",
    "StageFailure",
    "classify_two_cases",
    "decompose_tournament",
    "exact_hamilton",
    "exhaustive_decomposition",
    "verify_decomposition",
    "QuadPartition",
    "exceptional_set",
    "optimal_partition",
]
