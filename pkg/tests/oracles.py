"""Independent brute-force references used by the tests.

Nothing here imports the search or matching code under test; each function
works from plain arc lists by enumeration.
"""

from __future__ import annotations

import itertools
import random
from collections import Counter


def arc_list(D) -> list[tuple[int, int]]:
    return [(u, v) for u in range(D.n_vertices) for v in range(D.n_vertices) if D.out_adj[u] >> v & 1]


def has_hamilton_cycle(vertices, arcs) -> bool:
    """Permutation enumeration with the first vertex fixed."""
    vs = sorted(vertices)
    if len(vs) < 2:
        return False
    A = set(arcs)
    first, rest = vs[0], vs[1:]
    for p in itertools.permutations(rest):
        order = (first,) + p
        if all((order[i], order[(i + 1) % len(order)]) in A for i in range(len(order))):
            return True
    return False


def all_hamilton_cycles(vertices, arcs) -> list[frozenset]:
    """Arc sets of all Hamilton cycles, one per cycle."""
    vs = sorted(vertices)
    A = set(arcs)
    first, rest = vs[0], vs[1:]
    out = []
    for p in itertools.permutations(rest):
        order = (first,) + p
        cyc = [(order[i], order[(i + 1) % len(order)]) for i in range(len(order))]
        if all(e in A for e in cyc):
            out.append(frozenset(cyc))
    return out


def has_decomposition(vertices, arcs) -> bool:
    """Exact cover of the arc set by Hamilton cycles, by plain recursion."""
    cycles = all_hamilton_cycles(vertices, arcs)
    A = frozenset(arcs)
    n = len(vertices)
    if not A or len(A) % n:
        return False

    def rec(left: frozenset) -> bool:
        if not left:
            return True
        e = min(left)
        return any(rec(left - c) for c in cycles if e in c and c <= left)

    return rec(A)


def min_backward_count(T) -> int:
    """Fewest backward arcs over every split of both sides into equal halves."""
    A = [v for v in range(T.n_vertices) if T.side_of(v) == 0]
    B = [v for v in range(T.n_vertices) if T.side_of(v) == 1]
    arcs = arc_list(T)
    best = None
    for U1 in itertools.combinations(A, len(A) // 2):
        U3 = [a for a in A if a not in U1]
        for U2 in itertools.combinations(B, len(B) // 2):
            U4 = [b for b in B if b not in U2]
            idx = {}
            for i, part in enumerate((U1, U2, U3, U4)):
                for v in part:
                    idx[v] = i
            c = sum(1 for u, v in arcs if (idx[u] - idx[v]) % 4 == 1)
            best = c if best is None else min(best, c)
    return best


def max_matching_size(edges) -> int:
    """Largest set of disjoint edges, by include/exclude recursion on left vertices."""
    by_left = {}
    for a, b in set(edges):
        by_left.setdefault(a, []).append(b)
    lefts = sorted(by_left, key=repr)

    def rec(i: int, used: frozenset) -> int:
        if i == len(lefts):
            return 0
        best = rec(i + 1, used)
        for b in by_left[lefts[i]]:
            if b not in used:
                best = max(best, 1 + rec(i + 1, used | {b}))
        return best

    return rec(0, frozenset())


def simple_cycles(n: int, arcs, limit: int | None = None) -> list[list[int]]:
    """Every directed cycle (or the first ``limit``), listed once from its smallest vertex."""
    succ = {v: [] for v in range(n)}
    for u, v in arcs:
        succ[u].append(v)
    out = []
    for s in range(n):
        stack = [(s, [s])]
        while stack:
            v, path = stack.pop()
            for w in succ[v]:
                if w == s:
                    out.append(path)
                    if limit is not None and len(out) >= limit:
                        return out
                elif w > s and w not in path:
                    stack.append((w, path + [w]))
    return out


def linear_forest_ok(arcs) -> bool:
    """Every vertex has in- and out-degree at most one and there is no cycle."""
    outd = Counter(u for u, _ in arcs)
    ind = Counter(v for _, v in arcs)
    if any(c > 1 for c in outd.values()) or any(c > 1 for c in ind.values()):
        return False
    succ = dict(arcs)
    for s in succ:
        seen = set()
        v = s
        while v in succ:
            if v in seen:
                return False
            seen.add(v)
            v = succ[v]
    return True


def random_bipartite_arcs(rng: random.Random, A, B, p: float) -> list[tuple[int, int]]:
    """Each ordered cross pair independently with probability p."""
    arcs = []
    for a in A:
        for b in B:
            if rng.random() < p:
                arcs.append((a, b))
            if rng.random() < p:
                arcs.append((b, a))
    return arcs
