"""Feasible and pseudo-feasible systems, and the pipeline that decomposes the
backward and exceptional edges of a regular bipartite tournament into
feasible systems.

A system is a set of arcs (a ``frozenset`` of ``(u, v)`` pairs). Vertices of a
system are the endpoints of its arcs; isolated vertices carry no information
for any predicate here, so they are never stored.

Parts are 0-based: pair ``i`` is the backward pair ``U_i -> U_{i-1}``, so
pair 0 is U1 -> U4, pair 1 is U2 -> U1, pair 2 is U3 -> U2 and pair 3 is
U4 -> U3.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .digraph import Arc, Digraph, bits, popcount
from .errors import HypothesisError, InvalidArgument, InvariantViolation, StageFailure
from .matching import greedy_list_color, has_cycle, is_linear_forest, konig_equal_split, max_degree, max_matching
from .partition import (
    ExceptionalSet,
    QuadPartition,
    build_optimal_H,
    gamma_sets,
    ratio,
    rotate_for_H,
)

System = frozenset[Arc]


# context ----------------------------------------------------------------
@dataclass(frozen=True)
class FeasibilityContext:
    """The frame (T, U, U*, gamma) that every predicate is evaluated against."""

    tournament: Digraph
    partition: QuadPartition
    exceptional: ExceptionalSet
    gamma: Fraction
    _part: tuple[int, ...] = field(init=False, repr=False, compare=False)
    _masks: tuple[int, int, int, int] = field(init=False, repr=False, compare=False)
    _high: frozenset[int] = field(init=False, repr=False, compare=False)
    _low: frozenset[int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        g = ratio(self.gamma)
        object.__setattr__(self, "gamma", g)
        if not 0 < g <= Fraction(1, 2):
            raise InvalidArgument("gamma must lie in (0, 1/2]")
        T, U, X = self.tournament, self.partition, self.exceptional
        U.validate(T)
        for i in range(4):
            if X.slices[i] != X.members & U.parts[i]:
                raise InvalidArgument(f"exceptional slice {i + 1} does not match U{i + 1}")
        if not X.members <= frozenset(range(T.n_vertices)):
            raise InvalidArgument("exceptional set leaves the vertex set")
        part = [0] * T.n_vertices
        for i, p in enumerate(U.parts):
            for v in p:
                part[v] = i
        object.__setattr__(self, "_part", tuple(part))
        object.__setattr__(self, "_masks", U.masks)
        high = gamma_sets(T, U, 1 - g).all
        if not high <= X.members:
            raise InvalidArgument("vertices of backward degree > (1-gamma)n must be exceptional")
        object.__setattr__(self, "_high", high)
        object.__setattr__(self, "_low", gamma_sets(T, U, g).all)

    @property
    def n(self) -> int:
        return self.partition.n

    @property
    def star(self) -> frozenset[int]:
        return self.exceptional.members

    @property
    def high(self) -> frozenset[int]:
        """U^{1-gamma}(T)."""
        return self._high

    @property
    def low(self) -> frozenset[int]:
        """U^{gamma}(T)."""
        return self._low

    @property
    def masks(self) -> tuple[int, int, int, int]:
        return self._masks

    def part(self, v: int) -> int:
        return self._part[v]

    def is_forward(self, e: Arc) -> bool:
        return self._part[e[1]] == (self._part[e[0]] + 1) % 4

    def is_backward(self, e: Arc) -> bool:
        return self._part[e[1]] == (self._part[e[0]] - 1) % 4

    def pair(self, e: Arc) -> int | None:
        """Backward pair index of ``e``, or None for a forward arc."""
        return self._part[e[0]] if self.is_backward(e) else None

    def rotated(self, k: int) -> "FeasibilityContext":
        R = self.partition.rotate(k)
        return FeasibilityContext(self.tournament, R, ExceptionalSet.from_members(R, self.star), self.gamma)


@dataclass(frozen=True)
class Verdict:
    ok: bool
    violation: str | None = None

    def __bool__(self) -> bool:
        return self.ok


def vertices_of(F: Iterable[Arc]) -> set[int]:
    return {x for e in F for x in e}


def starts_of(F: Iterable[Arc]) -> set[int]:
    """Starting points of the non-trivial components of a linear forest."""
    arcs = list(F)
    heads = {v for _, v in arcs}
    return {u for u, _ in arcs if u not in heads}


def ends_of(F: Iterable[Arc]) -> set[int]:
    arcs = list(F)
    tails = {u for u, _ in arcs}
    return {v for _, v in arcs if v not in tails}


def pair_counts(F: Iterable[Arc], ctx: FeasibilityContext) -> list[int]:
    c = [0, 0, 0, 0]
    for e in F:
        p = ctx.pair(e)
        if p is not None:
            c[p] += 1
    return c


# predicates -------------------------------------------------------------
def is_placeholder(e: Arc, ctx: FeasibilityContext) -> bool:
    u, v = e
    T = ctx.tournament
    star = ctx.star
    bound = ctx.gamma * ctx.n
    m = ctx.masks
    if u in star and v not in star:
        res = popcount(T.out_adj[u] & m[ctx.part(v)]) > bound
    elif u not in star and v in star:
        res = popcount(T.in_adj[v] & m[ctx.part(u)]) > bound
    else:
        return False
    if res and ctx.is_forward(e) and (u in ctx.high or v in ctx.high):
        raise InvariantViolation(f"forward placeholder {u}->{v} touches U^(1-gamma)")
    return res


def _balance_violation(F: Sequence[Arc], ctx: FeasibilityContext) -> str | None:
    c = pair_counts(F, ctx)
    if c[0] != c[2]:
        return f"F1: e(U1,U4)={c[0]} != e(U3,U2)={c[2]}"
    if c[3] != c[1]:
        return f"F1: e(U4,U3)={c[3]} != e(U2,U1)={c[1]}"
    return None


def _in_tournament(F: Sequence[Arc], ctx: FeasibilityContext) -> str | None:
    T = ctx.tournament
    for u, v in F:
        if not (0 <= u < T.n_vertices and 0 <= v < T.n_vertices) or not T.has_arc(u, v):
            return f"arc {u}->{v} is not an arc of T"
    return None


def check_feasible(F: Iterable[Arc], ctx: FeasibilityContext) -> Verdict:
    arcs = sorted(set(F))
    bad = _in_tournament(arcs, ctx) or _balance_violation(arcs, ctx)
    if bad:
        return Verdict(False, bad)
    dout: dict[int, int] = defaultdict(int)
    din: dict[int, int] = defaultdict(int)
    for u, v in arcs:
        dout[u] += 1
        din[v] += 1
    for v in sorted(ctx.star):
        if dout[v] != 1 or din[v] != 1:
            return Verdict(False, f"F2: exceptional vertex {v} has out/in degree {dout[v]}/{din[v]}")
    if not is_linear_forest(arcs):
        return Verdict(False, "F3: not a linear forest")
    return Verdict(True)


def check_pseudo_feasible(F: Iterable[Arc], ctx: FeasibilityContext) -> Verdict:
    arcs = sorted(set(F))
    bad = _in_tournament(arcs, ctx) or _balance_violation(arcs, ctx)
    if bad:
        return Verdict(False, bad)
    star = ctx.star
    dout: dict[int, int] = defaultdict(int)
    din: dict[int, int] = defaultdict(int)
    for u, v in arcs:
        dout[u] += 1
        din[v] += 1
    for v in sorted(star):
        if dout[v] > 1 or din[v] > 1:
            return Verdict(False, f"F2': exceptional vertex {v} has out/in degree {dout[v]}/{din[v]}")
        if v in ctx.high and (dout[v] != 1 or din[v] != 1):
            return Verdict(False, f"F2': vertex {v} of U^(1-gamma) has out/in degree {dout[v]}/{din[v]}")
    plain = [e for e in arcs if not is_placeholder(e, ctx)]
    pout: dict[int, int] = defaultdict(int)
    pin: dict[int, int] = defaultdict(int)
    for u, v in plain:
        pout[u] += 1
        pin[v] += 1
    for v in sorted(set(pout) | set(pin)):
        if v not in star and (pout[v] > 1 or pin[v] > 1):
            return Verdict(False, f"F3': vertex {v} has {pout[v]} non-placeholder out-arcs and {pin[v]} in-arcs")
    # Non-placeholder arcs now have out- and in-degree <= 1 everywhere, so a
    # cycle avoiding placeholders is a cycle of this functional graph.
    if has_cycle(dict(plain)):
        return Verdict(False, "F4': a cycle contains no placeholder")
    return Verdict(True)


def is_feasible(F: Iterable[Arc], ctx: FeasibilityContext) -> bool:
    return check_feasible(F, ctx).ok


def is_pseudo_feasible(F: Iterable[Arc], ctx: FeasibilityContext) -> bool:
    return check_pseudo_feasible(F, ctx).ok


def cycle_ell(C: Sequence[int], U: QuadPartition) -> int:
    """The integer l with |V(C) & U_i| = l + e_C(U_{i+1}, U_i) + e_C(U_i, U_{i-1}).

    ``C`` is the vertex sequence of a directed cycle (closing arc implied).
    """
    k = len(C)
    if k < 2 or len(set(C)) != k:
        raise InvalidArgument("cycle must list at least two distinct vertices")
    part = {v: U.index_of(v) for v in C}
    size = [0, 0, 0, 0]
    back = [0, 0, 0, 0]
    for idx, u in enumerate(C):
        v = C[(idx + 1) % k]
        size[part[u]] += 1
        d = (part[v] - part[u]) % 4
        if d == 3:
            back[part[u]] += 1
        elif d != 1:
            raise InvalidArgument(f"arc {u}->{v} does not join adjacent parts")
    ells = {size[i] - back[(i + 1) % 4] - back[i] for i in range(4)}
    if len(ells) != 1:
        raise InvariantViolation(f"cycle identities disagree: {sorted(ells)}")
    return ells.pop()


def balanced_special_cover_check(F: Iterable[Arc], ctx: FeasibilityContext) -> bool:
    """Recount n_i^+ = n_{i+1}^- for a feasible system whose internal vertices are U*."""
    arcs = frozenset(F)
    v = check_feasible(arcs, ctx)
    if not v:
        raise InvalidArgument(f"system is not feasible: {v.violation}")
    verts = vertices_of(arcs)
    internal = verts - starts_of(arcs) - ends_of(arcs)
    if internal != set(ctx.star):
        raise InvalidArgument("internal vertices of the system must be exactly U*")
    succ = dict(arcs)
    n_plus = [0, 0, 0, 0]
    n_minus = [0, 0, 0, 0]
    for s in sorted(starts_of(arcs)):
        x = s
        while x in succ:
            x = succ[x]
        n_plus[ctx.part(s)] += 1
        n_minus[ctx.part(x)] += 1
    for i in range(4):
        if n_plus[i] != n_minus[(i + 1) % 4]:
            raise InvariantViolation(
                f"components starting in U{i + 1} ({n_plus[i]}) != ending in U{(i + 1) % 4 + 1} ({n_minus[(i + 1) % 4]})"
            )
    return True


# extending linear forests ----------------------------------------------
@dataclass(frozen=True)
class ExtendRequest:
    """Demands for extend_linear_forests on a bipartite host with classes A, B.

    ``check`` enables the degree hypothesis; with it off, a request that
    lacks the slack the hypothesis guarantees may fail with StageFailure.
    """

    host: frozenset[Arc]
    A: frozenset[int]
    B: frozenset[int]
    S_plus: tuple[frozenset[int], ...]
    S_minus: tuple[frozenset[int], ...]
    T: tuple[frozenset[int], ...]
    N: Fraction
    check: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "N", ratio(self.N))
        if self.A & self.B:
            raise InvalidArgument("A and B overlap")
        for u, v in self.host:
            if not ((u in self.A and v in self.B) or (u in self.B and v in self.A)):
                raise InvalidArgument(f"host arc {u}->{v} does not join A and B")
        ell = len(self.S_plus)
        if len(self.S_minus) != ell or len(self.T) != ell:
            raise InvalidArgument("S+, S- and T must have one entry per forest")
        for i in range(ell):
            if not (self.S_plus[i] <= self.A and self.S_minus[i] <= self.A):
                raise InvalidArgument(f"demand set {i} leaves A")
            if not self.T[i] <= self.B:
                raise InvalidArgument(f"avoid set {i} leaves B")
        if not 1 <= self.N <= max(1, 2 * len(self.A)):
            raise InvalidArgument("N must lie in [1, 2|A|]")
        if self.check:
            for i, d, v, need, have in self.degree_table():
                if have < need:
                    raise InvalidArgument(
                        f"degree hypothesis fails at forest {i}, side {d}, vertex {v}: d={have} < {need}"
                    )

    @property
    def ell(self) -> int:
        return len(self.S_plus)

    def degree_table(self) -> list[tuple[int, str, int, Fraction, int]]:
        """(i, side, v, required degree, host degree) for every demand."""
        dout: dict[int, int] = defaultdict(int)
        din: dict[int, int] = defaultdict(int)
        for u, v in self.host:
            dout[u] += 1
            din[v] += 1
        nw: dict[int, int] = defaultdict(int)
        for t in self.T:
            for w in t:
                nw[w] += 1
        max_n = max(nw.values(), default=0)
        total = sum(len(a) + len(b) for a, b in zip(self.S_plus, self.S_minus))
        mult = {"+": defaultdict(int), "-": defaultdict(int)}
        for i in range(self.ell):
            for v in self.S_plus[i]:
                mult["+"][v] += 1
            for v in self.S_minus[i]:
                mult["-"][v] += 1
        extra = Fraction(0) if self.N == 2 * len(self.A) else Fraction(total, math.floor(self.N))
        rows = []
        for i in range(self.ell):
            own = 2 * (len(self.S_plus[i]) + len(self.S_minus[i]) + len(self.T[i]))
            for d, S, deg in (("+", self.S_plus[i], dout), ("-", self.S_minus[i], din)):
                for v in sorted(S):
                    c = max(mult[d][v], own, 2 * (max_n + self.N))
                    rows.append((i, d, v, extra + c, deg[v]))
        return rows


def extend_linear_forests(
    req: ExtendRequest,
    forests: Sequence[Iterable[Arc]] | None = None,
    stage: str = "extend",
) -> list[System]:
    """Edge-disjoint linear forests Q_i covering each S_i^+ with an out-arc
    and each S_i^- with an in-arc, avoiding T_i and each other in B.

    Demands are processed as (sign, vertex) pairs, out-demands first, each by
    a maximum matching between the forests needing the vertex and its
    available arcs.
    """
    ell = req.ell
    if forests is not None:
        forests = [frozenset(f) for f in forests]
        if len(forests) != ell:
            raise InvalidArgument("one forest per demand index is required")
        _check_forest_hypotheses(req, forests)
    out_arcs: dict[int, list[Arc]] = defaultdict(list)
    in_arcs: dict[int, list[Arc]] = defaultdict(list)
    for u, v in sorted(req.host):
        out_arcs[u].append((u, v))
        in_arcs[v].append((u, v))
    Q: list[set[Arc]] = [set() for _ in range(ell)]
    QB: list[set[int]] = [set() for _ in range(ell)]
    usage: dict[int, int] = defaultdict(int)
    used: set[Arc] = set()
    cap = math.floor(req.N)
    tuples = sorted({("+", v) for S in req.S_plus for v in S}) + sorted({("-", v) for S in req.S_minus for v in S})
    for d, v in tuples:
        if d == "+":
            Y = [i for i in range(ell) if v in req.S_plus[i]]
            Z = [e for e in out_arcs[v] if usage[e[1]] < cap and e not in used]
            bend = 1
        else:
            Y = [i for i in range(ell) if v in req.S_minus[i]]
            Z = [e for e in in_arcs[v] if usage[e[0]] < cap and e not in used]
            bend = 0
        adj = {i: [e for e in Z if e[bend] not in QB[i] and e[bend] not in req.T[i]] for i in Y}
        M = max_matching(Y, adj)
        if len(M) != len(Y):
            missing = [i for i in Y if i not in M]
            msg = f"no arc available at vertex {v} ({d}) for forests {missing}"
            if req.check:
                raise InvariantViolation(msg)
            raise StageFailure(stage, msg)
        for i in Y:
            e = M[i]
            Q[i].add(e)
            QB[i].add(e[bend])
            usage[e[bend]] += 1
            used.add(e)
    out = [frozenset(q) for q in Q]
    _check_extend_conclusions(req, out, forests)
    return out


def _check_forest_hypotheses(req: ExtendRequest, forests: Sequence[System]) -> None:
    seen: set[Arc] = set()
    for i, F in enumerate(forests):
        if not is_linear_forest(F):
            raise InvalidArgument(f"forest {i} is not a linear forest")
        if F & seen or F & req.host:
            raise InvalidArgument(f"forest {i} shares arcs with another forest or the host")
        seen |= F
        V = vertices_of(F)
        if not (req.S_plus[i] & V) <= ends_of(F) or not (req.S_minus[i] & V) <= starts_of(F):
            raise InvalidArgument(f"forest {i}: demand vertices must be path ends/starts")
        if not (V & req.B) <= req.T[i]:
            raise InvalidArgument(f"forest {i}: its B-vertices must be avoided")


def _check_extend_conclusions(req: ExtendRequest, Q: Sequence[System], forests) -> None:
    seen: set[Arc] = set()
    mult: dict[int, int] = defaultdict(int)
    for i, q in enumerate(Q):
        if q & seen:
            raise InvariantViolation("extension forests share an arc")
        seen |= q
        if not q <= req.host:
            raise InvariantViolation("extension uses an arc outside the host")
        outs = [e for e in q if e[0] in req.A]
        ins = [e for e in q if e[1] in req.A]
        if sorted(u for u, _ in outs) != sorted(req.S_plus[i]) or sorted(v for _, v in ins) != sorted(req.S_minus[i]):
            raise InvariantViolation(f"forest {i}: cover conclusion fails")
        bverts = [e[1] for e in outs] + [e[0] for e in ins]
        if len(set(bverts)) != len(bverts):
            raise InvariantViolation(f"forest {i}: a B-vertex has degree 2")
        if set(bverts) & req.T[i]:
            raise InvariantViolation(f"forest {i}: uses an avoided vertex")
        for w in set(bverts):
            mult[w] += 1
    if any(c > req.N for c in mult.values()):
        raise InvariantViolation("a B-vertex lies in more than N extension forests")
    if forests is not None:
        for i, F in enumerate(forests):
            if not is_linear_forest(F | Q[i]):
                raise InvariantViolation(f"forest {i} plus its extension is not a linear forest")


# moving degree-2 vertices between matchings ------------------------------
def _copy_of(x) -> tuple[object, int] | None:
    return x if isinstance(x, tuple) else None


def _edge_key(e) -> tuple:
    return tuple(sorted((repr(x) for x in e)))


def move_degree2(M1: Sequence[tuple], M2: Sequence[tuple]) -> tuple[list[tuple], list[tuple]]:
    """Equal-size sub-matchings M1' and M2' that split every doubled vertex.

    Nodes are plain vertices or copies ``(w, 1)`` / ``(w, 2)``. Returns
    (M1', M2') with |M1'| = |M2'|, one of them entirely incident to second
    copies, and every w having at most one copy in each of M_i' and
    M_i minus M_i'.
    """
    L1 = [tuple(e) for e in M1]
    L2 = [tuple(e) for e in M2]
    if len(L1) != len(L2):
        raise InvalidArgument("matchings must have equal size")
    for name, L in (("M1", L1), ("M2", L2)):
        seen: set = set()
        for e in L:
            if len(e) != 2 or e[0] == e[1]:
                raise InvalidArgument(f"{name} has a malformed edge {e}")
            for x in e:
                if x in seen:
                    raise InvalidArgument(f"{name} is not a matching")
                seen.add(x)
                c = _copy_of(x)
                if c is not None and c[1] not in (1, 2):
                    raise InvalidArgument(f"copy index of {x!r} must be 1 or 2")
            a, b = _copy_of(e[0]), _copy_of(e[1])
            if a and b and (a[1] == 2 or b[1] == 2):
                raise InvalidArgument(f"{name} has edge {e} joining a second copy to a copy")
    A1, A2 = _move(L1, L2)
    _check_move(L1, L2, A1, A2)
    return A1, A2


def _move(M1: list[tuple], M2: list[tuple]) -> tuple[list[tuple], list[tuple]]:
    if len(M1) <= 1:
        return [], []
    Ms = (M1, M2)
    at = []
    for M in Ms:
        d = {}
        for e in M:
            d[e[0]] = e
            d[e[1]] = e
        at.append(d)
    X = [sorted({c[0] for c in map(_copy_of, at[i]) if c and c[1] == 1 and (c[0], 2) in at[i]}, key=repr) for i in range(2)]
    if not X[0] and not X[1]:
        return [], []

    def partner(i, x):
        e = at[i][x]
        return e[1] if e[0] == x else e[0]

    Y, Z = [], []
    for i in range(2):
        Xi = set(X[i])
        y = []
        for w in X[i]:
            p = _copy_of(partner(i, (w, 1)))
            if p and p[1] == 1 and p[0] in Xi:
                y.append(w)
        Y.append(y)
        Z.append([w for w in X[i] if w not in set(y)])

    if Y[0] and Y[1]:
        rest, keep = [], []
        for i in range(2):
            w = Y[i][0]
            f = at[i][(w, 1)]
            v = _copy_of(partner(i, (w, 1)))[0]  # type: ignore[index]
            e, e2 = at[i][(v, 2)], at[i][(w, 2)]
            drop = {f, e, e2}
            rest.append([x for x in Ms[i] if x not in drop])
            keep.append([e, e2])
        r1, r2 = _move(rest[0], rest[1])
        return r1 + keep[0], r2 + keep[1]
    if Z[0] and Z[1]:
        rest, keep = [], []
        for i in range(2):
            w = Z[i][0]
            e1, e2 = at[i][(w, 1)], at[i][(w, 2)]
            rest.append([x for x in Ms[i] if x not in (e1, e2)])
            keep.append([e2])
        r1, r2 = _move(rest[0], rest[1])
        return r1 + keep[0], r2 + keep[1]

    def at_second(i, ws) -> list[tuple]:
        return [at[i][(w, 2)] for w in ws]

    def avoiding(i, ws) -> list[tuple]:
        bad = {(w, k) for w in ws for k in (1, 2)}
        return [e for e in Ms[i] if e[0] not in bad and e[1] not in bad]

    y = max(len(Y[0]), len(Y[1]))
    z = max(len(Z[0]), len(Z[1]))
    for i in range(2):
        if not X[i]:
            o = 1 - i
            out: list[list[tuple]] = [[], []]
            out[i] = Ms[i][: y + z]
            out[o] = at_second(o, X[o])
            return out[0], out[1]
    s = 0 if Y[0] else 1  # side with the Y-vertices; the other side has only Z
    t = 1 - s
    out = [[], []]
    if z >= y:
        out[s] = at_second(s, X[s]) + avoiding(s, X[s])[: z - y]
        out[t] = at_second(t, X[t])
    elif y >= 2 * z:
        out[s] = at_second(s, X[s])
        out[t] = at_second(t, X[t]) + avoiding(t, X[t])[: y - z]
    else:
        ys = set(Y[s])
        inner = [e for e in Ms[s] if all((c := _copy_of(x)) and c[1] == 1 and c[0] in ys for x in e)]
        S1 = inner[: y - z]
        S2 = {_copy_of(x)[0] for e in S1 for x in e}  # type: ignore[index]
        out[s] = S1 + at_second(s, [w for w in X[s] if w not in S2])
        out[t] = at_second(t, X[t])
    return out[0], out[1]


def _check_move(M1, M2, A1, A2) -> None:
    if len(A1) != len(A2):
        raise InvariantViolation("moved sub-matchings differ in size")
    if not set(A1) <= set(M1) or not set(A2) <= set(M2):
        raise InvariantViolation("moved edges are not sub-matchings")

    def second(e) -> bool:
        return any((c := _copy_of(x)) and c[1] == 2 for x in e)

    if not (all(second(e) for e in A1) or all(second(e) for e in A2)):
        raise InvariantViolation("neither moved sub-matching lies on second copies")
    for M, A in ((M1, A1), (M2, A2)):
        sa = set(A)
        for part in (A, [e for e in M if e not in sa]):
            ws = [c[0] for e in part for x in e if (c := _copy_of(x))]
            if len(ws) != len(set(ws)):
                raise InvariantViolation("a sub-matching contains both copies of a vertex")


# decomposing backward edges ---------------------------------------------
def decompose_backward_all(D: Iterable[Arc], ctx: FeasibilityContext, r: int) -> list[System]:
    """Split a balanced backward digraph into 2r pseudo-feasible systems."""
    arcs = sorted(set(D))
    T = ctx.tournament
    for e in arcs:
        if not T.has_arc(*e) or not ctx.is_backward(e):
            raise InvalidArgument(f"arc {e[0]}->{e[1]} is not a backward arc of T")
    if r < 0:
        raise InvalidArgument("r must be non-negative")
    c = pair_counts(arcs, ctx)
    if c[0] != c[2] or c[1] != c[3]:
        raise HypothesisError("pair balance", f"pair counts {c}")
    if r == 0:
        if arcs:
            raise HypothesisError("Delta^0(D) <= 2r", "r = 0 but D is non-empty")
        return []
    dout: dict[int, int] = defaultdict(int)
    din: dict[int, int] = defaultdict(int)
    for u, v in arcs:
        dout[u] += 1
        din[v] += 1
    for v in sorted(set(dout) | set(din)):
        if dout[v] > 2 * r or din[v] > 2 * r:
            raise HypothesisError("Delta^0(D) <= 2r", f"vertex {v} has degrees {dout[v]}/{din[v]}")
    for v in sorted(ctx.high):
        if dout[v] != 2 * r or din[v] != 2 * r:
            raise HypothesisError("d^pm = 2r on U^(1-gamma)", f"vertex {v} has degrees {dout[v]}/{din[v]}")

    by_pair: list[list[Arc]] = [[], [], [], []]
    for e in arcs:
        by_pair[ctx.pair(e)].append(e)  # type: ignore[index]
    star = ctx.star
    splits: list[list[list[tuple]]] = []
    back: dict[tuple, Arc] = {}
    for i in range(4):
        P = by_pair[i]
        deg: dict[int, int] = defaultdict(int)
        nbrs: dict[int, list[int]] = defaultdict(list)
        for u, v in P:
            deg[u] += 1
            deg[v] += 1
            nbrs[u].append(v)
            nbrs[v].append(u)
        W = {w for w, d in deg.items() if d >= r}
        if not W <= (star & ctx.low):
            bad = sorted(W - (star & ctx.low))
            raise HypothesisError("heavy vertices lie in U* and U^gamma", f"pair {i + 1}: {bad}")
        first: dict[int, set[int]] = {}
        for w in sorted(W):
            nb = sorted(nbrs[w])
            forced = [x for x in nb if x in star or x in W]
            if len(forced) > r:
                raise HypothesisError("|U*| <= r", f"vertex {w} has {len(forced)} exceptional neighbours > r = {r}")
            k = max(len(forced), -(-len(nb) // 2))
            fill = [x for x in nb if x not in set(forced)]
            first[w] = set(forced) | set(fill[: k - len(forced)])

        def node(x: int, other: int):
            if x not in W:
                return x
            if other in W:
                return (x, 1)
            return (x, 1) if other in first[x] else (x, 2)

        H = []
        for u, v in P:
            h = (node(u, v), node(v, u))
            H.append(h)
            back[h] = (u, v)
        if max_degree(H) > r:
            raise InvariantViolation("split graph has degree above r")
        parts = konig_equal_split(H, r)
        parts.sort(key=len, reverse=True)
        splits.append(parts)
    for j in range(r):
        if len(splits[0][j]) != len(splits[2][j]) or len(splits[1][j]) != len(splits[3][j]):
            raise InvariantViolation("paired matchings differ in size")
    systems: list[set[Arc]] = [set() for _ in range(2 * r)]
    for j in range(r):
        moved = {}
        for a, b in ((0, 2), (1, 3)):
            Ma, Mb = move_degree2(splits[a][j], splits[b][j])
            moved[a], moved[b] = set(Ma), set(Mb)
        for i in range(4):
            M = splits[i][j]
            stay = [back[h] for h in M if h not in moved[i]]
            go = [back[h] for h in M if h in moved[i]]
            if i in (0, 2):
                systems[j].update(stay)
                systems[r + j].update(go)
            else:
                systems[j].update(go)
                systems[r + j].update(stay)
    out = [frozenset(s) for s in systems]
    union: set[Arc] = set()
    for s in out:
        if s & union:
            raise InvariantViolation("backward systems overlap")
        union |= s
    if union != set(arcs):
        raise InvariantViolation("backward systems do not partition D")
    bound = 4 * -(-max(c) // r)
    for idx, s in enumerate(out):
        v = check_pseudo_feasible(s, ctx)
        if not v:
            raise InvariantViolation(f"backward system {idx} is not pseudo-feasible: {v.violation}")
        if len(s) > bound:
            raise InvariantViolation(f"backward system {idx} has {len(s)} arcs > {bound}")
    return out


def select_backward_matchings(
    H: Iterable[Arc],
    ctx: FeasibilityContext,
    S: Sequence[Sequence[Iterable[int]]],
    m: Sequence[Sequence[int]],
    ell: int,
    gamma=None,
    check: bool = True,
) -> list[System]:
    """ell linear forests of backward arcs: prescribed matching sizes off
    U^{1-g}, plus one out-arc and one in-arc per pair at each vertex of
    U^{1-g} not listed in the avoid sets. ``S[j][i]`` and ``m[j][i]`` are the
    avoid set and matching size for forest j and pair i.
    """
    g = ctx.gamma if gamma is None else ratio(gamma)
    T, U = ctx.tournament, ctx.partition
    n = U.n
    Harcs = sorted(set(H))
    for e in Harcs:
        if not T.has_arc(*e) or not ctx.is_backward(e):
            raise InvalidArgument(f"arc {e[0]}->{e[1]} is not a backward arc of T")
    if len(S) != ell or len(m) != ell:
        raise InvalidArgument("S and m need one entry per forest")
    Sset = [[frozenset(S[j][i]) for i in range(4)] for j in range(ell)]
    hi = gamma_sets(T, U, 1 - g).sets
    A = hi[0] | hi[1] | hi[2] | hi[3]
    parts = U.parts
    for j in range(ell):
        for i in range(4):
            if not Sset[j][i] <= parts[i] | parts[(i - 1) % 4]:
                raise InvalidArgument(f"avoid set ({j}, {i + 1}) leaves U_i and U_(i-1)")
            if m[j][i] < 0:
                raise InvalidArgument("matching sizes must be non-negative")
    dout: dict[int, int] = defaultdict(int)
    din: dict[int, int] = defaultdict(int)
    for u, v in Harcs:
        dout[u] += 1
        din[v] += 1
    if check:
        if ell > g * n:
            raise HypothesisError("ell <= gamma n", f"ell = {ell}")
        for v in range(T.n_vertices):
            if v in A and (dout[v] < 2 * g * n or din[v] < 2 * g * n):
                raise HypothesisError("d_H >= 2 gamma n on U^(1-gamma)", f"vertex {v}")
            if v not in A and (dout[v] > 2 * g * n or din[v] > 2 * g * n):
                raise HypothesisError("d_H <= 2 gamma n off U^(1-gamma)", f"vertex {v}")
        for i in range(4):
            far = len(hi[(i - 2) % 4] | hi[(i - 3) % 4])
            cnt = sum(1 for e in Harcs if ctx.pair(e) == i and e[0] not in A and e[1] not in A)
            if cnt < 109 * g * n * far:
                raise HypothesisError("edge floor off U^(1-gamma)", f"pair {i + 1}: {cnt} < {float(109 * g * n * far)}")
            for j in range(ell):
                if len(Sset[j][i] - A) > far:
                    raise HypothesisError("avoid-set size bound", f"forest {j}, pair {i + 1}")
                if m[j][i] > far:
                    raise HypothesisError("matching-size bound", f"forest {j}, pair {i + 1}")

    def fail(msg: str):
        if check:
            raise InvariantViolation(msg)
        raise StageFailure("backwardmatchings", msg)

    cap = math.floor(g * n / 6)
    used: set[Arc] = set()
    deg: dict[int, int] = defaultdict(int)
    Q: list[set[Arc]] = [set() for _ in range(ell)]
    Qv: list[set[int]] = [set() for _ in range(ell)]
    order = sorted(((m[j][i], j, i) for j in range(ell) for i in range(4)))
    for size, j, i in order:
        if size == 0:
            continue
        avoid = Sset[j][i] | Qv[j] | A
        cand = [
            (u, v)
            for (u, v) in Harcs
            if ctx.pair((u, v)) == i
            and (u, v) not in used
            and u not in avoid
            and v not in avoid
            and deg[u] < cap
            and deg[v] < cap
        ]
        left = sorted({u for u, _ in cand})
        adj: dict[int, list[int]] = defaultdict(list)
        for u, v in cand:
            adj[u].append(v)
        M = max_matching(left, adj)
        if len(M) < size:
            fail(f"pair {i + 1}, forest {j}: matching of size {size} needed, {len(M)} found")
        for u in sorted(M)[:size]:
            e = (u, M[u])
            used.add(e)
            Q[j].add(e)
            Qv[j].update(e)
            deg[e[0]] += 1
            deg[e[1]] += 1
    F = [frozenset(q) for q in Q]
    if A:
        Sj = [set().union(*(Sset[j][i] - A for i in range(4))) for j in range(ell)]
        X = {v for v in range(T.n_vertices) if v not in A and deg[v] >= Fraction(g * n, 7)}
        cnt: dict[int, int] = defaultdict(int)
        for s in Sj:
            for v in s:
                cnt[v] += 1
        Y = {v for v, c in cnt.items() if c >= Fraction(g * n, 7)}
        B = frozenset(range(T.n_vertices)) - A - X - Y
        host = frozenset(e for e in Harcs if (e[0] in A and e[1] in B) or (e[0] in B and e[1] in A))
        Sp = tuple(frozenset().union(*(hi[i] - Sset[j][i] for i in range(4))) for j in range(ell))
        Sm = tuple(frozenset().union(*(hi[(i - 1) % 4] - Sset[j][i] for i in range(4))) for j in range(ell))
        Tj = tuple(frozenset((vertices_of(F[j]) | Sj[j]) & B) for j in range(ell))
        req = ExtendRequest(host, frozenset(A), B, Sp, Sm, Tj, 2 * len(A), check=check)
        ext = extend_linear_forests(req, F, stage="backwardmatchings")
        F = [F[j] | ext[j] for j in range(ell)]
    # recount the conclusions
    total: dict[int, int] = defaultdict(int)
    for j, f in enumerate(F):
        if not is_linear_forest(f):
            fail(f"forest {j} is not a linear forest")
        local: dict[int, int] = defaultdict(int)
        for u, v in f:
            for x in (u, v):
                local[x] += 1
                total[x] += 1
        for x, c in local.items():
            if x not in A and c > 1:
                raise InvariantViolation(f"forest {j}: vertex {x} has degree {c} off U^(1-gamma)")
        for i in range(4):
            P = [e for e in f if ctx.pair(e) == i]
            plain = [e for e in P if e[0] not in A and e[1] not in A]
            if len(plain) != m[j][i]:
                raise InvariantViolation(f"forest {j}, pair {i + 1}: {len(plain)} arcs off U^(1-gamma), expected {m[j][i]}")
            tails = sorted(e[0] for e in P if e[0] in A)
            heads = sorted(e[1] for e in P if e[1] in A)
            if tails != sorted(hi[i] - Sset[j][i]) or heads != sorted(hi[(i - 1) % 4] - Sset[j][i]):
                raise InvariantViolation(f"forest {j}, pair {i + 1}: U^(1-gamma) cover fails")
            for e in P:
                if (e[0] in A and e[1] in A) or (set(e) - A) & Sset[j][i]:
                    raise InvariantViolation(f"forest {j}: arc {e} touches an avoided vertex")
    if check:
        for x, c in total.items():
            if x not in A and c > g * n / 6:
                raise InvariantViolation(f"vertex {x} lies in {c} forests, above gamma n / 6")
    return F


def cover_forward_exceptional(T: Digraph, ctx: FeasibilityContext, t_prime: int, check: bool = True) -> list[System]:
    """t' pseudo-feasible systems covering the forward arcs inside U* and
    every forward arc at U^{1-gamma}, with each vertex of U^{1-2gamma}
    given one in- and one out-arc in every system."""
    if T is not ctx.tournament and T != ctx.tournament:
        raise InvalidArgument("T differs from the context tournament")
    g = ctx.gamma
    n = ctx.n
    base = math.floor(g * n)
    if t_prime not in (base, base + 1):
        raise InvalidArgument(f"t' must be floor(gamma n) or floor(gamma n)+1, got {t_prime}")
    g2 = min(2 * g, Fraction(1, 2))
    _, k = rotate_for_H(T, ctx.partition, g2)
    rc = ctx.rotated(k)
    R = rc.partition
    parts = R.parts
    star = ctx.star
    hi1 = gamma_sets(T, R, 1 - g).sets
    hi2 = gamma_sets(T, R, 1 - g2).sets
    high1 = hi1[0] | hi1[1] | hi1[2] | hi1[3]
    high2 = hi2[0] | hi2[1] | hi2[2] | hi2[3]
    if hi2[2] or hi2[3]:
        raise InvariantViolation("rotation left U^(1-2gamma) in U3 or U4")
    if not high2 <= star:
        raise HypothesisError("U^(1-2gamma) inside U*", f"{sorted(high2 - star)}")
    m = R.masks
    Mup: list[list[list[Arc]]] = []
    for i in range(4):
        nxt = (i + 1) % 4
        E = set()
        for u in sorted(parts[i]):
            for v in bits(T.out_adj[u] & m[nxt]):
                if (
                    u in hi1[i]
                    or v in hi1[nxt]
                    or (u in hi2[i] and v in star)
                    or (u in star and v in hi2[nxt])
                ):
                    E.add((u, v))
        E = sorted(E)
        if max_degree(E) > t_prime:
            raise HypothesisError("forward degree at U^(1-gamma) <= t'", f"pair U{i + 1}->U{nxt + 1} has degree {max_degree(E)}")
        Mup.append(konig_equal_split(E, t_prime) if t_prime > 0 else [])
    if t_prime == 0:
        if high1 or any(T.out_adj[u] & m[(rc.part(u) + 1) % 4] & ctx.exceptional.mask for u in star):
            raise HypothesisError("t' > 0", "forward arcs in U* need at least one system")
        return []

    Hopt = build_optimal_H(T, R, g2)
    Hp = set(Hopt.arcs)
    for u in range(T.n_vertices):
        for v in bits(T.out_adj[u]):
            e = (u, v)
            if rc.is_backward(e) and ((u in high2 and v not in star) or (v in high2 and u not in star)):
                Hp.add(e)
    Sdown = []
    for j in range(t_prime):
        row = []
        for i in range(4):
            verts = vertices_of(Mup[i][j]) | vertices_of(Mup[(i - 2) % 4][j])
            row.append(frozenset(verts & (parts[i] | parts[(i - 1) % 4])))
        Sdown.append(row)
    mdown = [
        [len((hi2[(i - 2) % 4] | hi2[(i - 3) % 4]) - Sdown[j][(i - 2) % 4]) for i in range(4)] for j in range(t_prime)
    ]
    Fp = select_backward_matchings(Hp, rc, Sdown, mdown, t_prime, gamma=g2, check=check)
    Fpp = [frozenset(set().union(*(Mup[i][j] for i in range(4))) | Fp[j]) for j in range(t_prime)]
    # list-colour the forward arcs inside U* away from U^{1-2gamma}
    inner = sorted(
        (u, v)
        for u in sorted(star - high2)
        for v in bits(T.out_adj[u] & m[(rc.part(u) + 1) % 4])
        if v in star and v not in high2
    )
    used_v = [vertices_of(F) for F in Fpp]
    lists = {e: [j for j in range(t_prime) if e[0] not in used_v[j] and e[1] not in used_v[j]] for e in inner}
    try:
        colour = greedy_list_color(inner, lists)
    except InvalidArgument as exc:
        if check:
            raise HypothesisError("list sizes for the forward arcs in U*", str(exc)) from exc
        raise StageFailure("forwardUstar", str(exc)) from exc
    out = [set(F) for F in Fpp]
    for e, c in colour.items():
        out[c].add(e)
    systems = [frozenset(s) for s in out]
    _check_forward_cover(T, ctx, rc, systems, high1, high2, t_prime)
    return systems


def _check_forward_cover(T, ctx, rc, systems, high1, high2, t_prime) -> None:
    star = ctx.star
    union: set[Arc] = set()
    for idx, s in enumerate(systems):
        if s & union:
            raise InvariantViolation("forward-cover systems overlap")
        union |= s
        v = check_pseudo_feasible(s, ctx)
        if not v:
            raise InvariantViolation(f"forward-cover system {idx} is not pseudo-feasible: {v.violation}")
        dout: dict[int, int] = defaultdict(int)
        din: dict[int, int] = defaultdict(int)
        for a, b in s:
            dout[a] += 1
            din[b] += 1
        for x in high2:
            if dout[x] != 1 or din[x] != 1:
                raise InvariantViolation(f"system {idx} does not cover {x} of U^(1-2gamma)")
        bound = 6 * len(high2) + len(star - high2)
        if len(s) > bound:
            raise InvariantViolation(f"forward-cover system {idx} has {len(s)} arcs > {bound}")
    for u in star:
        for w in bits(T.out_adj[u]):
            if w in star and rc.is_forward((u, w)) and (u, w) not in union:
                raise InvariantViolation(f"forward arc {u}->{w} inside U* is uncovered")
    for x in high1:
        for w in bits(T.out_adj[x]):
            if rc.is_forward((x, w)) and (x, w) not in union:
                raise InvariantViolation(f"forward arc {x}->{w} at U^(1-gamma) is uncovered")
        for w in bits(T.in_adj[x]):
            if rc.is_forward((w, x)) and (w, x) not in union:
                raise InvariantViolation(f"forward arc {w}->{x} at U^(1-gamma) is uncovered")


# pseudo-feasible to feasible -------------------------------------------
def _disjoint_union(systems: Sequence[System], what: str) -> set[Arc]:
    union: set[Arc] = set()
    for s in systems:
        if s & union:
            raise InvariantViolation(f"{what}: systems share an arc")
        union |= s
    return union


def _require_all(systems: Sequence[System], ctx: FeasibilityContext, stage: str, pseudo: bool = False) -> None:
    for idx, s in enumerate(systems):
        v = check_pseudo_feasible(s, ctx) if pseudo else check_feasible(s, ctx)
        if not v:
            raise InvariantViolation(f"{stage}: system {idx} fails: {v.violation}")


def prune_forward(systems: Sequence[System], ctx: FeasibilityContext) -> list[System]:
    """Drop forward arcs that avoid U* or are placeholders."""
    out = []
    for s in systems:
        out.append(
            frozenset(
                e for e in s if not (ctx.is_forward(e) and (not (set(e) & ctx.star) or is_placeholder(e, ctx)))
            )
        )
    _require_all(out, ctx, "prune", pseudo=True)
    return out


def redistribute_placeholders(systems: Sequence[System], ctx: FeasibilityContext) -> list[System]:
    """Reassign the (backward) placeholder arcs so every system is a linear forest."""
    systems = [frozenset(s) for s in systems]
    star = ctx.star
    E_all = {e for s in systems for e in s if is_placeholder(e, ctx)}
    for e in E_all:
        if not ctx.is_backward(e):
            raise InvalidArgument(f"forward placeholder {e} must be pruned first")
    if not E_all:
        for idx, s in enumerate(systems):
            if not is_linear_forest(s):
                raise InvariantViolation(f"redistribute: system {idx} has no placeholder but is not a linear forest")
        return systems
    A = frozenset(star)
    B = frozenset(range(ctx.tournament.n_vertices)) - A
    base = [s - E_all for s in systems]
    Sp = tuple(frozenset(u for u, _ in s & E_all if u in A) for s in systems)
    Sm = tuple(frozenset(v for _, v in s & E_all if v in A) for s in systems)
    Tj = tuple(frozenset(vertices_of(b) & B) for b in base)
    req = ExtendRequest(frozenset(E_all), A, B, Sp, Sm, Tj, 2 * len(A), check=False)
    Q = extend_linear_forests(req, base, stage="redistribute")
    out = [base[i] | Q[i] for i in range(len(systems))]
    if _disjoint_union(out, "redistribute") != _disjoint_union(systems, "redistribute"):
        raise InvariantViolation("redistribute changed the arc set")
    for i in range(len(out)):
        if len(out[i]) != len(systems[i]):
            raise InvariantViolation("redistribute changed a system size")
        if not is_linear_forest(out[i]):
            raise InvariantViolation(f"redistribute: system {i} is not a linear forest")
    _require_all(out, ctx, "redistribute", pseudo=True)
    return out


def _free_forward(D: Iterable[Arc], systems: Sequence[System], ctx: FeasibilityContext) -> set[Arc]:
    taken = set().union(*systems) if systems else set()
    return {e for e in D if ctx.is_forward(e) and e not in taken}


def cover_exceptional(systems: Sequence[System], ctx: FeasibilityContext, D: Iterable[Arc]) -> list[System]:
    """Add forward arcs so every exceptional vertex gets one in- and one out-arc."""
    systems = [frozenset(s) for s in systems]
    star = ctx.star
    if not star:
        _require_all(systems, ctx, "coverU*")
        return systems
    A = frozenset(star)
    B = frozenset(range(ctx.tournament.n_vertices)) - A
    host = frozenset(
        e
        for e in _free_forward(D, systems, ctx)
        if not (set(e) & ctx.high) and ((e[0] in A) != (e[1] in A))
    )
    Sp, Sm = [], []
    for s in systems:
        outs = {u for u, _ in s}
        ins = {v for _, v in s}
        Sp.append(frozenset(A - outs))
        Sm.append(frozenset(A - ins))
    Tj = tuple(frozenset(vertices_of(s) & B) for s in systems)
    req = ExtendRequest(host, A, B, tuple(Sp), tuple(Sm), Tj, 2 * len(A), check=False)
    Q = extend_linear_forests(req, systems, stage="coverU*")
    out = [systems[i] | Q[i] for i in range(len(systems))]
    _disjoint_union(out, "coverU*")
    _require_all(out, ctx, "coverU*")
    return out


def incorporate_prescribed(systems: Sequence[System], ctx: FeasibilityContext, E: Iterable[Arc]) -> list[System]:
    """Distribute the prescribed forward arcs E over the systems (five per system at most)."""
    systems = [frozenset(s) for s in systems]
    r = len(systems)
    taken = set().union(*systems) if systems else set()
    extra: list[set[Arc]] = [set() for _ in range(r)]
    for i in range(4):
        Ai = sorted(e for e in E if e not in taken and ctx.part(e[0]) == i and ctx.is_forward(e))
        if not Ai:
            continue
        group = [j for j in range(r) if j % 4 == i]
        slots = [(j, c) for j in group for c in range(5)]
        adj = {e: [(j, c) for j, c in slots if not (set(e) & vertices_of(systems[j]))] for e in Ai}
        M = max_matching(Ai, adj)
        if len(M) != len(Ai):
            raise StageFailure("incorporateE", f"{len(Ai) - len(M)} prescribed arcs from U{i + 1} found no system")
        for e, (j, _) in M.items():
            extra[j].add(e)
    out = [systems[j] | frozenset(extra[j]) for j in range(r)]
    _disjoint_union(out, "incorporateE")
    _require_all(out, ctx, "incorporateE")
    for j in range(r):
        if len(out[j]) > len(systems[j]) + 5:
            raise InvariantViolation("incorporateE added more than five arcs to a system")
    return out


def _endpoint_N(ctx: FeasibilityContext, A: frozenset[int], eps) -> Fraction:
    top = max(1, 2 * len(A))
    if eps is None:
        return Fraction(top)
    N = Fraction(math.isqrt(int(ratio(eps) * ctx.n * ctx.n * 10**6)), 1000)  # sqrt(eps) n, rounded down
    return min(max(Fraction(1), N), Fraction(top))


def extend_endpoints(systems: Sequence[System], ctx: FeasibilityContext, D: Iterable[Arc], eps=None) -> list[System]:
    """Extend path ends forward, U1 -> U2 -> U3 -> U4, until every path ends in U4."""
    D = set(D)
    cur = [frozenset(s) for s in systems]
    B_all = ctx.partition.parts
    for s in range(3):
        A = frozenset(B_all[s] - ctx.star)
        B = frozenset(B_all[s + 1] - ctx.star)
        host = frozenset(e for e in _free_forward(D, cur, ctx) if e[0] in A and e[1] in B)
        Sp = tuple(frozenset(ends_of(f) & A) for f in cur)
        Sm = tuple(frozenset() for _ in cur)
        Tj = tuple(frozenset(vertices_of(f) & B) for f in cur)
        req = ExtendRequest(host, A, B, Sp, Sm, Tj, _endpoint_N(ctx, A, eps), check=False)
        Q = extend_linear_forests(req, cur, stage="endpoints")
        cur = [cur[j] | Q[j] for j in range(len(cur))]
    _disjoint_union(cur, "endpoints")
    _require_all(cur, ctx, "endpoints")
    for idx, f in enumerate(cur):
        if not ends_of(f) <= ctx.partition.parts[3]:
            raise InvariantViolation(f"endpoints: system {idx} has a path ending outside U4")
    return cur


def extend_startpoints(systems: Sequence[System], ctx: FeasibilityContext, D: Iterable[Arc], eps=None) -> list[System]:
    """Extend path starts backward, U4 <- U3 <- U2 <- U1, until every path starts in U1."""
    D = set(D)
    cur = [frozenset(s) for s in systems]
    P = ctx.partition.parts
    for s in range(3):
        A = frozenset(P[3 - s] - ctx.star)
        B = frozenset(P[2 - s] - ctx.star)
        host = frozenset(e for e in _free_forward(D, cur, ctx) if e[0] in B and e[1] in A)
        Sp = tuple(frozenset() for _ in cur)
        Sm = tuple(frozenset(starts_of(f) & A) for f in cur)
        Tj = tuple(frozenset(vertices_of(f) & B) for f in cur)
        req = ExtendRequest(host, A, B, Sp, Sm, Tj, _endpoint_N(ctx, A, eps), check=False)
        Q = extend_linear_forests(req, cur, stage="start-points")
        cur = [cur[j] | Q[j] for j in range(len(cur))]
    _disjoint_union(cur, "start-points")
    _require_all(cur, ctx, "start-points")
    for idx, f in enumerate(cur):
        if not starts_of(f) <= P[0] or not ends_of(f) <= P[3]:
            raise InvariantViolation(f"start-points: system {idx} has a path outside U1 -> U4")
    return cur


def pseudo_to_feasible(
    systems: Sequence[Iterable[Arc]],
    ctx: FeasibilityContext,
    D: Iterable[Arc],
    E: Iterable[Arc] = (),
    eps=None,
) -> list[System]:
    """Turn r pseudo-feasible systems into r feasible ones whose paths run U1 -> U4.

    Stages: prune, redistribute, coverU*, incorporateE, endpoints,
    start-points. ``eps`` sets the per-vertex cap sqrt(eps) n used while
    extending endpoints; without it the cap is 2|A|.
    """
    T = ctx.tournament
    Dset = set(D)
    Eset = set(E)
    sys0 = [frozenset(s) for s in systems]
    r = len(sys0)
    for e in Dset:
        if not T.has_arc(*e):
            raise InvalidArgument(f"host arc {e} is not in T")
    dout: dict[int, int] = defaultdict(int)
    din: dict[int, int] = defaultdict(int)
    for u, v in Dset:
        dout[u] += 1
        din[v] += 1
    for v in range(T.n_vertices):
        if dout[v] < r or din[v] < r:
            raise HypothesisError("delta^0(D) >= r", f"vertex {v} has degrees {dout[v]}/{din[v]} < {r}")
    union = _disjoint_union(sys0, "input")
    if not union <= Dset:
        raise HypothesisError("systems inside D", "a system uses an arc outside D")
    for idx, s in enumerate(sys0):
        v = check_pseudo_feasible(s, ctx)
        if not v:
            raise InvalidArgument(f"input system {idx} is not pseudo-feasible: {v.violation}")
    star = ctx.star
    for e in Dset:
        if (ctx.is_backward(e) or (e[0] in star and e[1] in star)) and e not in union:
            raise HypothesisError("backward and U*-internal arcs of D covered", f"arc {e} is uncovered")
    eout: dict[int, int] = defaultdict(int)
    ein: dict[int, int] = defaultdict(int)
    for e in Eset:
        if e not in Dset or not ctx.is_forward(e) or set(e) & star:
            raise HypothesisError("E is forward in D - U*", f"arc {e}")
        eout[e[0]] += 1
        ein[e[1]] += 1
        if eout[e[0]] > 1 or ein[e[1]] > 1:
            raise HypothesisError("d_E <= 1 off U*", f"arc {e}")
    s1 = prune_forward(sys0, ctx)
    s2 = redistribute_placeholders(s1, ctx)
    s3 = cover_exceptional(s2, ctx, Dset)
    s4 = incorporate_prescribed(s3, ctx, Eset)
    s5 = extend_endpoints(s4, ctx, Dset, eps)
    s6 = extend_startpoints(s5, ctx, Dset, eps)
    final = _disjoint_union(s6, "final")
    if not final <= Dset:
        raise InvariantViolation("feasible systems leave D")
    for e in Dset:
        if ctx.is_backward(e) and e not in final:
            raise InvariantViolation(f"backward arc {e} lost")
    if not Eset <= final:
        raise InvariantViolation("a prescribed arc is missing")
    for j in range(r):
        if len(s6[j]) > 7 * len(s4[j]):
            raise InvariantViolation(f"system {j} grew beyond seven times its size")
    return s6


def decompose_backward_and_exceptional(
    T: Digraph, ctx: FeasibilityContext, E: Iterable[Arc] = (), eps=None
) -> list[System]:
    """n edge-disjoint feasible systems covering every backward arc, every arc
    inside U* and the prescribed forward arcs E."""
    n = ctx.n
    base = math.floor(ctx.gamma * n)
    t_prime = base if (n - base) % 2 == 0 else base + 1
    r = (n - t_prime) // 2
    if r < 0:
        raise HypothesisError("t' <= n", f"t' = {t_prime}, n = {n}")
    fwd = cover_forward_exceptional(T, ctx, t_prime, check=False)
    taken = set().union(*fwd) if fwd else set()
    rest = [e for e in T.arcs() if e not in taken and ctx.is_backward(e)]
    bwd = decompose_backward_all(rest, ctx, r)
    systems = fwd + bwd
    if len(systems) != n:
        raise InvariantViolation(f"expected {n} pseudo-feasible systems, got {len(systems)}")
    out = pseudo_to_feasible(systems, ctx, T.arcs(), E, eps)
    final = _disjoint_union(out, "decomposition")
    for u, v in T.arcs():
        if (ctx.is_backward((u, v)) or (u in ctx.star and v in ctx.star)) and (u, v) not in final:
            raise InvariantViolation(f"arc {u}->{v} is not covered")
    for idx, f in enumerate(out):
        if not is_feasible(f, ctx):
            raise InvariantViolation(f"system {idx} is not feasible")
    return out
