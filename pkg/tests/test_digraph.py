from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from bitour import (
    Digraph,
    InvalidArgument,
    Params,
    flip_edges,
    is_regular,
    make_blowup_cycle,
    one_flipped_c4,
    random_regular_bitournament,
    tripartite_counterexample,
)
from bitour.partition import backward_edges, natural_partition
from oracles import arc_list


def test_blowup_c4_n1_is_directed_4_cycle():
    D = make_blowup_cycle(4, 1)
    assert sorted(arc_list(D)) == [(0, 1), (1, 2), (2, 3), (3, 0)]
    assert is_regular(D) == 1


@pytest.mark.parametrize("K,n", [(3, 1), (3, 2), (4, 2), (4, 3), (5, 2), (6, 3)])
def test_blowup_edge_count_and_degrees(K, n):
    D = make_blowup_cycle(K, n)
    assert D.n_arcs() == K * n * n
    assert is_regular(D) == n
    for u, v in arc_list(D):
        assert D.classes[v] == D.classes[u] % K + 1


@pytest.mark.parametrize("K,n", [(2, 1), (4, 0)])
def test_blowup_rejects_small(K, n):
    with pytest.raises(InvalidArgument):
        make_blowup_cycle(K, n)


def test_blowup_c4_is_bipartite_tournament():
    D = make_blowup_cycle(4, 3)
    assert D.tournament and D.is_bipartite


def test_flip_empty_is_identity():
    D = make_blowup_cycle(4, 2)
    assert flip_edges(D, []) == D


def test_one_flipped_has_one_backward_arc_per_pair():
    T = one_flipped_c4(2)
    U = natural_partition(T)
    back = backward_edges(T, U)
    assert len(back) == 4
    assert sorted(T.classes[u] for u, _ in back) == [1, 2, 3, 4]
    assert is_regular(T) == 2


def test_flip_rejects_missing_or_doubled_arcs():
    D = make_blowup_cycle(4, 2)
    with pytest.raises(InvalidArgument):
        flip_edges(D, [(2, 0)])
    with pytest.raises(InvalidArgument):
        flip_edges(D, [(0, 2), (0, 2)])


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 4), st.data())
def test_flip_is_involution(n, data):
    D = make_blowup_cycle(4, n)
    arcs = arc_list(D)
    chosen = data.draw(st.lists(st.sampled_from(arcs), unique=True, max_size=6))
    E = flip_edges(D, chosen)
    assert flip_edges(E, [(v, u) for u, v in chosen]) == D


def test_tripartite_counterexample_counts():
    T = tripartite_counterexample(2)
    assert T.n_vertices == 6 and T.n_arcs() == 12
    assert is_regular(T) == 2
    back = [(u, v) for u, v in arc_list(T) if T.classes[u] == T.classes[v] % 3 + 1]
    assert len(back) == 3
    with pytest.raises(InvalidArgument):
        tripartite_counterexample(1)


def test_is_regular_examples():
    assert is_regular(make_blowup_cycle(4, 3)) == 3
    assert is_regular(Digraph.from_arcs(2, [(0, 1)], [1, 2])) is None


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 5), st.integers(0, 8), st.integers(0, 10**6))
def test_random_regular_bitournament(n, flips, seed):
    T = random_regular_bitournament(n, flips, seed)
    assert is_regular(T) == n
    assert T.tournament and T.is_bipartite
    assert random_regular_bitournament(n, flips, seed) == T


def test_random_regular_zero_flips_is_blowup():
    assert random_regular_bitournament(3, 0, 7) == make_blowup_cycle(4, 3)


def test_digraph_rejects_loops_and_duplicates():
    with pytest.raises(InvalidArgument):
        Digraph.from_arcs(2, [(0, 0)], [1, 2])
    with pytest.raises(InvalidArgument):
        Digraph.from_arcs(2, [(0, 1), (0, 1)], [1, 2])
    with pytest.raises(InvalidArgument):
        Digraph.from_arcs(2, [(0, 1)], [1, 3], n_classes=2)
    with pytest.raises(InvalidArgument):
        Digraph.from_arcs(3, [(0, 1)], [1, 1, 2])


def test_opposite_arcs_allowed_outside_tournaments():
    D = Digraph.from_arcs(2, [(0, 1), (1, 0)], [1, 2])
    assert D.has_arc(0, 1) and D.has_arc(1, 0)
    with pytest.raises(InvalidArgument):
        Digraph.from_arcs(2, [(0, 1), (1, 0)], [1, 2], tournament=True)


def test_tournament_flag_checks_completeness():
    with pytest.raises(InvalidArgument):
        Digraph.from_arcs(4, [(0, 1), (1, 2), (2, 3)], [1, 2, 3, 4], tournament=True)


def test_params_defaults_and_validation():
    p = Params()
    assert p.eps == Fraction(1, 10) and p.tau == Fraction(3, 10)
    assert Params(eps=0.1).eps == Fraction(1, 10)
    for bad in ({"nu": 0.5}, {"eps": 0.3}, {"gamma": 0.6}, {"nu_prime": 0}, {"tau": 1}):
        with pytest.raises(InvalidArgument):
            Params(**bad)
