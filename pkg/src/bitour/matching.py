"""Bipartite matchings, König colourings, list colouring and matching contraction.

Bipartite graphs are given as edge lists ``[(a, b), ...]`` with ``a`` on the
left and ``b`` on the right; left and right labels may overlap as Python
values since the side is always implied by position.
"""

from __future__ import annotations

from collections import defaultdict, deque
from dataclasses import dataclass
from typing import Hashable, Iterable, Mapping, Sequence

from .errors import InvalidArgument, InvariantViolation

Node = Hashable
Edge = tuple[Node, Node]


# maximum matching ------------------------------------------------------
def max_matching(
    left: Sequence[Node],
    adj: Mapping[Node, Sequence[Node]],
) -> dict[Node, Node]:
    """Hopcroft-Karp. Returns left -> right for a maximum matching.

    Left vertices and their neighbour lists are scanned in the given order,
    so the result is deterministic in that order.
    """
    match_l: dict[Node, Node] = {}
    match_r: dict[Node, Node] = {}
    INF = float("inf")
    while True:
        dist: dict[Node, float] = {}
        q: deque = deque()
        for u in left:
            if u not in match_l:
                dist[u] = 0
                q.append(u)
            else:
                dist[u] = INF
        found = INF
        while q:
            u = q.popleft()
            if dist[u] >= found:
                continue
            for w in adj.get(u, ()):
                x = match_r.get(w)
                if x is None:
                    found = min(found, dist[u] + 1)
                elif dist[x] == INF:
                    dist[x] = dist[u] + 1
                    q.append(x)
        if found == INF:
            break
        it = {u: iter(adj.get(u, ())) for u in left}

        def augment(u) -> bool:
            # iterative DFS along the layered graph
            stack = [u]
            path: list[tuple[Node, Node]] = []
            while stack:
                x = stack[-1]
                advanced = False
                for w in it[x]:
                    y = match_r.get(w)
                    if y is None:
                        if dist[x] + 1 == found:
                            path.append((x, w))
                            for a, b in path:
                                match_l[a] = b
                                match_r[b] = a
                            return True
                    elif dist[y] == dist[x] + 1:
                        path.append((x, w))
                        stack.append(y)
                        advanced = True
                        break
                if not advanced:
                    dist[x] = INF
                    stack.pop()
                    if path:
                        path.pop()
            return False

        progress = False
        for u in left:
            if u not in match_l and augment(u):
                progress = True
        if not progress:
            break
    return match_l


def adjacency(edges: Iterable[Edge]) -> tuple[list[Node], dict[Node, list[Node]]]:
    adj: dict[Node, list[Node]] = defaultdict(list)
    order: list[Node] = []
    for a, b in edges:
        if a not in adj:
            order.append(a)
        adj[a].append(b)
    return order, dict(adj)


def hall_cover(left: Sequence[Node], right: Sequence[Node], edges: Iterable[Edge]) -> dict[Node, Node]:
    """Matching covering ``left`` under the minimum-degree condition of Hall type.

    Requires |left| <= |right|, every left vertex of degree >= |right|/2 and
    every right vertex of degree >= |left| - |right|/2.
    """
    E = [(a, b) for a, b in edges]
    if len(left) > len(right):
        raise InvalidArgument("left side larger than right side")
    deg: dict[Node, int] = defaultdict(int)
    for a, b in E:
        deg[("L", a)] += 1
        deg[("R", b)] += 1
    for a in left:
        if 2 * deg[("L", a)] < len(right):
            raise InvalidArgument(f"left vertex {a!r} has degree {deg[('L', a)]} < |B|/2")
    for b in right:
        if 2 * deg[("R", b)] < 2 * len(left) - len(right):
            raise InvalidArgument(f"right vertex {b!r} has degree {deg[('R', b)]} < |A| - |B|/2")
    _, adj = adjacency(E)
    M = max_matching(list(left), adj)
    if len(M) != len(left):
        raise InvariantViolation("degree condition held but no covering matching was found")
    return M


# König colourings -------------------------------------------------------
def konig_equal_split(edges: Sequence[Edge], Delta: int) -> list[list[Edge]]:
    """Split a bipartite multigraph of max degree <= Delta into Delta matchings.

    The matchings partition the edge list (with multiplicity) and their sizes
    differ by at most one.
    """
    E = list(edges)
    if Delta < 0:
        raise InvalidArgument("Delta must be non-negative")
    deg: dict = defaultdict(int)
    for a, b in E:
        deg[("L", a)] += 1
        deg[("R", b)] += 1
    if deg and max(deg.values()) > Delta:
        raise InvalidArgument(f"maximum degree {max(deg.values())} exceeds Delta={Delta}")
    if Delta == 0:
        return []
    # at[x][c] = index of the edge of colour c at vertex x
    at: dict = defaultdict(dict)
    colour = [-1] * len(E)

    def free(x) -> int:
        used = at[x]
        for c in range(Delta):
            if c not in used:
                return c
        raise InvariantViolation("no free colour at a vertex of degree < Delta")

    for idx, (a, b) in enumerate(E):
        u, v = ("L", a), ("R", b)
        alpha = free(u)
        beta = free(v)
        if alpha not in at[v]:
            c = alpha
        else:
            # swap alpha/beta along the path starting at v; it cannot reach u
            path = []
            x, c_next = v, alpha
            while c_next in at[x]:
                e = at[x][c_next]
                path.append(e)
                ea, eb = E[e]
                x = ("R", eb) if x == ("L", ea) else ("L", ea)
                c_next = beta if c_next == alpha else alpha
            for e in path:
                ea, eb = E[e]
                old = colour[e]
                del at[("L", ea)][old]
                del at[("R", eb)][old]
            for e in path:
                ea, eb = E[e]
                new = beta if colour[e] == alpha else alpha
                colour[e] = new
                at[("L", ea)][new] = e
                at[("R", eb)][new] = e
            c = alpha
        colour[idx] = c
        at[u][c] = idx
        at[v][c] = idx

    classes = [[i for i in range(len(E)) if colour[i] == c] for c in range(Delta)]
    _equalise(E, colour, classes)
    return [[E[i] for i in cls] for cls in classes]


def _equalise(E: list[Edge], colour: list[int], classes: list[list[int]]) -> None:
    while True:
        sizes = [len(c) for c in classes]
        hi = max(range(len(classes)), key=lambda c: (sizes[c], -c))
        lo = min(range(len(classes)), key=lambda c: (sizes[c], c))
        if sizes[hi] - sizes[lo] <= 1:
            return
        # components of hi u lo are alternating paths/cycles; some path has one more hi edge
        inc: dict = defaultdict(list)
        for i in classes[hi] + classes[lo]:
            a, b = E[i]
            inc[("L", a)].append(i)
            inc[("R", b)].append(i)
        seen: set[int] = set()
        done = False
        for start in sorted(classes[hi]):
            if start in seen:
                continue
            comp: list[int] = []
            stack = [start]
            seen.add(start)
            while stack:
                e = stack.pop()
                comp.append(e)
                a, b = E[e]
                for x in (("L", a), ("R", b)):
                    for f in inc[x]:
                        if f not in seen:
                            seen.add(f)
                            stack.append(f)
            n_hi = sum(1 for e in comp if colour[e] == hi)
            if n_hi > len(comp) - n_hi:
                for e in comp:
                    colour[e] = lo if colour[e] == hi else hi
                done = True
                break
        if not done:
            raise InvariantViolation("no alternating path found while equalising colour classes")
        classes[hi] = sorted(i for i in range(len(E)) if colour[i] == hi)
        classes[lo] = sorted(i for i in range(len(E)) if colour[i] == lo)


def max_degree(edges: Iterable[Edge]) -> int:
    deg: dict = defaultdict(int)
    for a, b in edges:
        deg[("L", a)] += 1
        deg[("R", b)] += 1
    return max(deg.values(), default=0)


def konig_large(edges: Sequence[Edge]) -> list[Edge]:
    """A matching of size at least e(G)/Delta(G): the largest König class."""
    E = list(edges)
    if not E:
        return []
    parts = konig_equal_split(E, max_degree(E))
    return max(parts, key=len)


# list colouring ---------------------------------------------------------
def greedy_list_color(edges: Sequence[tuple[int, int]], lists: Mapping[tuple[int, int], Iterable[int]]) -> dict:
    """Proper edge colouring from lists of size >= d(u) + d(v) + 1.

    Edges are coloured in ascending order, each with the smallest listed
    colour not used on an adjacent edge.
    """
    E = sorted(set(edges))
    deg: dict = defaultdict(int)
    for u, v in E:
        deg[u] += 1
        deg[v] += 1
    for e in E:
        L = set(lists.get(e, ()))
        if len(L) < deg[e[0]] + deg[e[1]] + 1:
            raise InvalidArgument(f"list of edge {e} has {len(L)} colours, needs {deg[e[0]] + deg[e[1]] + 1}")
    used: dict = defaultdict(set)
    out = {}
    for e in E:
        u, v = e
        c = min(set(lists[e]) - used[u] - used[v])
        out[e] = c
        used[u].add(c)
        used[v].add(c)
    return out


# contraction ------------------------------------------------------------
@dataclass(frozen=True)
class ContractionMap:
    """Perfect matching from B to A, stored as b -> partner(b)."""

    arcs: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        bs = [b for b, _ in self.arcs]
        as_ = [a for _, a in self.arcs]
        if len(set(bs)) != len(bs) or len(set(as_)) != len(as_):
            raise InvalidArgument("contraction map is not a matching")

    @classmethod
    def from_pairs(cls, pairs: Mapping[int, int] | Iterable[tuple[int, int]]) -> "ContractionMap":
        items = pairs.items() if isinstance(pairs, Mapping) else pairs
        return cls(tuple(sorted((int(b), int(a)) for b, a in items)))

    @property
    def partner(self) -> dict[int, int]:
        return dict(self.arcs)

    @property
    def inverse(self) -> dict[int, int]:
        return {a: b for b, a in self.arcs}

    def check_perfect(self, A: Iterable[int], B: Iterable[int]) -> None:
        if set(self.partner) != set(B) or set(self.inverse) != set(A):
            raise InvalidArgument("contraction map is not a perfect matching between the classes")


def contract(G: Iterable[tuple[int, int]], M: ContractionMap, A=None, B=None) -> frozenset[tuple[int, int]]:
    """M-contraction: arc a'->a whenever a'b is an edge and b's partner is a != a'."""
    if A is not None and B is not None:
        M.check_perfect(A, B)
    p = M.partner
    out = set()
    for a2, b in G:
        if b not in p:
            raise InvalidArgument(f"vertex {b} has no partner in the contraction map")
        a = p[b]
        if a != a2:
            out.add((a2, a))
    return frozenset(out)


def expand(D: Iterable[tuple[int, int]], M: ContractionMap) -> frozenset[tuple[int, int]]:
    """M-expansion: edge a'b for every arc a'->a with a = partner(b)."""
    inv = M.inverse
    return frozenset((a2, inv[a]) for a2, a in D)


def close_hamilton(C: Sequence[int], M: ContractionMap) -> list[int]:
    """Lift a Hamilton cycle on A (vertex order) to one on A u B."""
    inv = M.inverse
    if sorted(C) != sorted(inv) or len(set(C)) != len(C):
        raise InvalidArgument("cycle is not Hamiltonian on the matched class")
    out: list[int] = []
    k = len(C)
    for i, a in enumerate(C):
        out.append(a)
        out.append(inv[C[(i + 1) % k]])
    # verify: a -> b and b -> partner(b) alternate
    p = M.partner
    for i in range(1, len(out), 2):
        if p[out[i]] != out[(i + 1) % len(out)]:
            raise InvariantViolation("lifted cycle does not follow the matching")
    return out


# linear forests ---------------------------------------------------------
@dataclass(frozen=True)
class LinearForest:
    """Vertex-disjoint directed paths on an explicit vertex set.

    Isolated vertices count as both starting and ending points.
    """

    vertices: frozenset[int]
    arcs: frozenset[tuple[int, int]]

    def __post_init__(self) -> None:
        outs: dict[int, int] = {}
        ins: dict[int, int] = {}
        for u, v in self.arcs:
            if u not in self.vertices or v not in self.vertices:
                raise InvalidArgument(f"arc {u}->{v} leaves the vertex set")
            if u in outs or v in ins:
                raise InvalidArgument(f"arc {u}->{v} creates a vertex of in- or out-degree 2")
            outs[u] = v
            ins[v] = u
        if has_cycle(outs):
            raise InvalidArgument("arcs contain a directed cycle")

    @classmethod
    def of(cls, arcs: Iterable[tuple[int, int]], vertices: Iterable[int] | None = None) -> "LinearForest":
        A = frozenset(arcs)
        V = frozenset(vertices) if vertices is not None else frozenset(x for e in A for x in e)
        return cls(V, A)

    @property
    def starts(self) -> frozenset[int]:
        heads = {v for _, v in self.arcs}
        return frozenset(self.vertices - heads)

    @property
    def ends(self) -> frozenset[int]:
        tails = {u for u, _ in self.arcs}
        return frozenset(self.vertices - tails)

    @property
    def internal(self) -> frozenset[int]:
        return frozenset(self.vertices - self.starts - self.ends)

    def paths(self) -> list[list[int]]:
        succ = dict(self.arcs)
        out = []
        for s in sorted(self.starts):
            p = [s]
            while p[-1] in succ:
                p.append(succ[p[-1]])
            out.append(p)
        return out


def has_cycle(succ: Mapping[int, int]) -> bool:
    """True if a functional graph given by successor map (partial) has a cycle."""
    state: dict[int, int] = {}
    for s in succ:
        if s in state:
            continue
        path = []
        x = s
        while x in succ and x not in state:
            state[x] = 1
            path.append(x)
            x = succ[x]
        if x in state and state[x] == 1:
            return True
        for y in path:
            state[y] = 2
    return False


def is_linear_forest(arcs: Iterable[tuple[int, int]]) -> bool:
    succ: dict[int, int] = {}
    pred: dict[int, int] = {}
    for u, v in arcs:
        if u in succ or v in pred or u == v:
            return False
        succ[u] = v
        pred[v] = u
    return not has_cycle(succ)


def contract_linear_forest(F: LinearForest, A: Iterable[int], B: Iterable[int]) -> tuple[LinearForest, ContractionMap]:
    """Contract F[A, B] along the matching F[B, A] and check the endpoint identities."""
    A, B = frozenset(A), frozenset(B)
    if F.vertices != A | B:
        raise InvalidArgument("forest must live on A u B")
    back = [(b, a) for b, a in F.arcs if b in B and a in A]
    fwd = [(a, b) for a, b in F.arcs if a in A and b in B]
    if len(back) + len(fwd) != len(F.arcs):
        raise InvalidArgument("forest has an arc inside a class")
    if {b for b, _ in back} != B or {a for _, a in back} != A:
        raise InvalidArgument("F[B, A] is not a perfect matching")
    M = ContractionMap.from_pairs(back)
    D = LinearForest(A, contract(fwd, M))
    p = M.partner
    NM_starts = frozenset(p[x] for x in F.starts if x in p)
    if D.starts != NM_starts:
        raise InvariantViolation("contracted starts differ from matched starts")
    if D.ends != F.ends:
        raise InvariantViolation("contracted ends differ from original ends")
    if D.internal != (F.internal & A) - NM_starts:
        raise InvariantViolation("contracted internal vertices differ")
    return D, M
