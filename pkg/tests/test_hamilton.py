import itertools
import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from bitour import (
    Digraph,
    InvalidArgument,
    Params,
    SizeLimit,
    classify_two_cases,
    decompose_tournament,
    exact_hamilton,
    exhaustive_decomposition,
    make_blowup_cycle,
    one_flipped_c4,
    random_regular_bitournament,
    tripartite_counterexample,
    verify_decomposition,
)
from bitour.feasible import FeasibilityContext
from bitour.hamilton import blowup_c4_hamilton, cycle_arcs, hamilton_cycles, is_bip_robust_outexpander, robust_out_nbhd
from bitour.partition import ExceptionalSet, backward_count, natural_partition
from oracles import all_hamilton_cycles, arc_list, has_decomposition, has_hamilton_cycle


def plain_ctx(T):
    return FeasibilityContext(T, natural_partition(T), ExceptionalSet.empty(), Fraction(1, 4))


# exact_hamilton -------------------------------------------------------------
def test_exact_hamilton_directed_cycle():
    arcs = [(0, 3), (3, 1), (1, 4), (4, 2), (2, 0)]
    assert exact_hamilton(arcs) == [0, 3, 1, 4, 2]


def test_exact_hamilton_required_arcs():
    T = make_blowup_cycle(4, 2)
    req = [(0, 2), (2, 4), (4, 6), (6, 1)]
    C = exact_hamilton(T, required=req)
    assert C is not None and set(req) <= cycle_arcs(C)
    full = [(0, 2), (2, 5), (5, 7), (7, 1), (1, 3), (3, 4), (4, 6), (6, 0)]
    assert cycle_arcs(exact_hamilton([], required=full)) == set(full)
    with pytest.raises(InvalidArgument):
        exact_hamilton(T, required=[(0, 2), (1, 2)])
    with pytest.raises(InvalidArgument):
        exact_hamilton(T, required=[(0, 2), (2, 4), (4, 6), (6, 0)])
    # the only cycle through 0 and 1 runs 0->1, so 1->0 cannot be used
    assert exact_hamilton([(0, 1), (1, 2), (2, 0)], required=[(1, 0)]) is None


def test_exact_hamilton_small_and_cap():
    assert exact_hamilton([], vertices=[0]) is None
    assert exact_hamilton([(0, 1), (1, 0)]) == [0, 1]
    with pytest.raises(SizeLimit):
        exact_hamilton(make_blowup_cycle(4, 11))


@settings(max_examples=300, deadline=None)
@given(st.integers(2, 7), st.floats(0.1, 0.9), st.integers(0, 10**6))
def test_exact_hamilton_matches_permutations(m, p, seed):
    rng = random.Random(seed)
    arcs = [(u, v) for u in range(m) for v in range(m) if u != v and rng.random() < p]
    C = exact_hamilton(arcs, vertices=range(m), seed=seed)
    assert (C is not None) == has_hamilton_cycle(range(m), arcs)
    if C is not None:
        assert sorted(C) == list(range(m)) and cycle_arcs(C) <= set(arcs)


@settings(max_examples=60, deadline=None)
@given(st.integers(3, 6), st.integers(0, 10**6))
def test_hamilton_cycles_enumeration_count(m, seed):
    rng = random.Random(seed)
    arcs = [(u, v) for u in range(m) for v in range(m) if u != v and rng.random() < 0.6]
    mine = {frozenset(cycle_arcs(C)) for C in hamilton_cycles(arcs, vertices=range(m))}
    assert mine == set(all_hamilton_cycles(range(m), arcs))


# expansion -------------------------------------------------------------------
def test_robust_out_nbhd_examples():
    T = make_blowup_cycle(4, 3)
    U = natural_partition(T)
    assert robust_out_nbhd(T, [], Fraction(1, 10)) == frozenset()
    # threshold ceil(nu * 2n) <= n holds for nu <= 1/2
    for nu in (Fraction(1, 20), Fraction(1, 3), Fraction(1, 2)):
        assert robust_out_nbhd(T, U.parts[0], nu) == U.parts[1]
    assert robust_out_nbhd(T, U.parts[0], Fraction(3, 4)) == frozenset()


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10**6), st.fractions(Fraction(1, 50), 1))
def test_robust_out_nbhd_recount(seed, nu):
    rng = random.Random(seed)
    n = rng.randint(1, 5)
    classes = [1] * n + [2] * n
    arcs = [(u, v) for u in range(2 * n) for v in range(2 * n) if classes[u] != classes[v] and rng.random() < 0.5]
    D = Digraph.from_arcs(2 * n, arcs, classes)
    S = {v for v in range(2 * n) if rng.random() < 0.5}
    thr = math.ceil(nu * n)
    expect = {v for v in range(2 * n) if sum(1 for u in S if (u, v) in set(arcs)) >= thr}
    assert robust_out_nbhd(D, S, nu) == expect


def test_blowup_is_not_expander():
    T = make_blowup_cycle(4, 3)
    res = is_bip_robust_outexpander(T, Fraction(1, 20), Fraction(3, 10))
    assert not res.expander and res.proof
    assert res.rn_size < len(res.witness) + Fraction(1, 20) * 6


def test_sampled_mode_is_not_a_proof():
    T = random_regular_bitournament(4, 40, 1)
    res = is_bip_robust_outexpander(T, Fraction(1, 20), Fraction(3, 10), mode="sampled", samples=50)
    if res.expander:
        assert not res.proof
    res = is_bip_robust_outexpander(make_blowup_cycle(4, 3), Fraction(1, 20), Fraction(3, 10), mode="sampled")
    assert not res.expander


def expands(D, nu, tau) -> bool:
    """Direct subset enumeration of the expansion condition."""
    n = D.n_vertices // 2
    arcs = set(arc_list(D))
    thr = math.ceil(nu * n)
    for side in (0, 1):
        X = [v for v in range(D.n_vertices) if D.side_of(v) == side]
        for k in range(math.ceil(tau * n), math.floor((1 - tau) * n) + 1):
            for S in itertools.combinations(X, k):
                rn = sum(1 for v in range(D.n_vertices) if sum(1 for u in S if (u, v) in arcs) >= thr)
                if rn < k + thr:
                    return False
    return True


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_expander_test_matches_enumeration(seed):
    rng = random.Random(seed)
    n = rng.randint(2, 6)
    classes = [1] * n + [2] * n
    p = rng.uniform(0.3, 0.95)
    arcs = [(u, v) for u in range(2 * n) for v in range(2 * n) if classes[u] != classes[v] and rng.random() < p]
    D = Digraph.from_arcs(2 * n, arcs, classes)
    nu, tau = Fraction(1, 10), Fraction(1, 4)
    assert is_bip_robust_outexpander(D, nu, tau).expander == expands(D, nu, tau)


# classifier --------------------------------------------------------------------
def test_classify_blowup_close():
    T = make_blowup_cycle(4, 3)
    cert = classify_two_cases(T, Fraction(1, 100), Fraction(3, 10))
    assert cert.kind == "close" and cert.backward == 0


def test_classify_one_flipped():
    T = one_flipped_c4(4)
    cert = classify_two_cases(T, Fraction(1, 5), Fraction(3, 10))
    assert cert.kind == "close" and cert.backward == 4
    assert backward_count(T, cert.partition.masks) == 4
    # at the default nu' the flipped class vertices spoil every witness
    assert classify_two_cases(T, Fraction(1, 100), Fraction(3, 10)).kind == "expander"


def test_classify_heavily_flipped_is_expander():
    T = random_regular_bitournament(4, 60, 0)
    cert = classify_two_cases(T, Fraction(1, 20), Fraction(3, 10))
    assert cert.kind == "expander" and cert.proof


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 4), st.integers(0, 30), st.integers(0, 10**6))
def test_classifier_dichotomy(n, flips, seed):
    T = random_regular_bitournament(n, flips, seed)
    p = Params()
    cert = classify_two_cases(T, p.nu_prime, p.tau)
    assert cert.kind in ("close", "expander")
    if cert.kind == "close":
        b = backward_count(T, cert.partition.masks)
        assert b == cert.backward
        assert b * b <= 16 * p.nu_prime * n**4
    else:
        assert expands(T, p.nu_prime, p.tau)


def test_classifier_rejects_non_tournament():
    with pytest.raises(InvalidArgument):
        classify_two_cases(tripartite_counterexample(2), Fraction(1, 100), Fraction(3, 10))


# verification -------------------------------------------------------------------
def test_verify_detects_missing_arc():
    T = make_blowup_cycle(4, 1)
    rep = verify_decomposition(T, [[(0, 1), (1, 2), (2, 3)]])
    assert not rep.ok and any("3->0 is not covered" in v for v in rep.violations)
    assert verify_decomposition(T, [[(0, 1), (1, 2), (2, 3), (3, 0)]]).ok


def test_verify_reversed_cycle_is_balanced():
    U = natural_partition(make_blowup_cycle(4, 1))
    T = Digraph.from_arcs(4, [(0, 3), (3, 2), (2, 1), (1, 0)], [1, 2, 3, 4])
    assert verify_decomposition(T, [[(0, 3), (3, 2), (2, 1), (1, 0)]], U).ok


def test_verify_single_backward_arc_fails_balance():
    # U1={0,1}, U2={2,3}, U3={4,5}, U4={6,7}; one arc 2->0 runs backward
    T = Digraph.from_arcs(
        8, [(2, 0), (0, 3), (3, 4), (4, 6), (6, 1), (1, 2)] + [(2, 5), (5, 7), (7, 0)], [1, 1, 2, 2, 3, 3, 4, 4]
    )
    U = natural_partition(make_blowup_cycle(4, 2))
    C = [(2, 0), (0, 3), (3, 4), (4, 6), (6, 1), (1, 2)]
    rep = verify_decomposition(T, [C], U)
    assert not rep.ok
    assert any("e(U" in v for v in rep.violations)


# exhaustive decomposition ---------------------------------------------------------
def test_exhaustive_directed_four_cycle():
    T = make_blowup_cycle(4, 1)
    assert exhaustive_decomposition(T) == [[0, 1, 2, 3]]


def test_exhaustive_tripartite_absent():
    T = tripartite_counterexample(2)
    assert exhaustive_decomposition(T) is None
    assert not has_decomposition(range(6), arc_list(T))


def test_exhaustive_blowup_c3_n2_absent():
    # four Hamilton cycles, any two of which share an arc (brute-force values)
    T = make_blowup_cycle(3, 2)
    assert len(all_hamilton_cycles(range(6), arc_list(T))) == 4
    assert not has_decomposition(range(6), arc_list(T))
    assert exhaustive_decomposition(T) is None


def test_exhaustive_blowup_c3_n3_present():
    T = make_blowup_cycle(3, 3)
    res = exhaustive_decomposition(T)
    assert res is not None and len(res) == 3
    assert verify_decomposition(T, [cycle_arcs(C) for C in res]).ok


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_exhaustive_matches_brute_force(seed):
    rng = random.Random(seed)
    m = rng.randint(3, 6)
    # union of random Hamilton cycles, possibly overlapping (then not regular-simple)
    arcs = set()
    for _ in range(rng.randint(1, 3)):
        p = list(range(m))
        rng.shuffle(p)
        arcs |= {(p[i], p[(i + 1) % m]) for i in range(m)}
    assert (exhaustive_decomposition(sorted(arcs), vertices=range(m)) is not None) == has_decomposition(range(m), arcs)


def test_exhaustive_cap():
    with pytest.raises(SizeLimit):
        exhaustive_decomposition(make_blowup_cycle(4, 4))


# blow-up assembly -----------------------------------------------------------------
def test_blowup_hamilton_no_requirements():
    T = make_blowup_cycle(4, 2)
    C = blowup_c4_hamilton(arc_list(T), plain_ctx(T))
    assert len(C) == 8 and cycle_arcs(C) <= set(arc_list(T))


def test_blowup_hamilton_with_backward_system():
    n = 2
    T = one_flipped_c4(n)
    ctx = plain_ctx(T)
    F1 = {(n, 0), (3 * n, 2 * n)}
    fwd = [e for e in arc_list(T) if ctx.is_forward(e)]
    C = blowup_c4_hamilton(fwd, ctx, F1)
    assert C is not None and F1 <= cycle_arcs(C) and sorted(C) == list(range(4 * n))
    with pytest.raises(InvalidArgument):
        blowup_c4_hamilton(fwd, ctx, {(0, 3 * n)})


# decomposition driver ------------------------------------------------------------
@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_decompose_blowup(n):
    T = make_blowup_cycle(4, n)
    rep = decompose_tournament(T)
    assert rep.status == "complete" and len(rep.cycles) == n
    assert verify_decomposition(T, rep.cycles, rep.partition).ok


def test_decompose_rejects_tripartite():
    with pytest.raises(InvalidArgument):
        decompose_tournament(tripartite_counterexample(2))


def test_decompose_cap():
    with pytest.raises(SizeLimit):
        decompose_tournament(make_blowup_cycle(4, 9))


@settings(max_examples=10, deadline=None)
@given(st.integers(1, 3), st.integers(0, 12), st.integers(0, 10**6))
def test_decompose_reports_are_verified(n, flips, seed):
    T = random_regular_bitournament(n, flips, seed)
    rep = decompose_tournament(T, seed=seed)
    assert rep.status in ("complete", "infeasible")
    if rep.status == "complete":
        assert verify_decomposition(T, rep.cycles, rep.partition).ok
    elif n <= 2:
        assert not has_decomposition(range(4 * n), arc_list(T))
    else:
        # permutation enumeration is too slow at 12 vertices
        assert exhaustive_decomposition(T) is None
