"""Digraph representation, generators and degree checks.

Vertices are dense integers ``0..N-1``. Out-neighbourhoods are stored as
Python ints used as bitsets. Every vertex carries a class label in
``1..n_classes``; a digraph is bipartite when the classes split into two
sides with every edge crossing between them.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Sequence

from .errors import InvalidArgument

Arc = tuple[int, int]


def bits(mask: int) -> Iterator[int]:
    """Yield the set bits of ``mask`` in ascending order."""
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def mask_of(vertices: Iterable[int]) -> int:
    m = 0
    for v in vertices:
        m |= 1 << v
    return m


def popcount(mask: int) -> int:
    return mask.bit_count()


@dataclass(frozen=True)
class Digraph:
    """Loop-free digraph with labelled vertex classes.

    At most one arc per ordered pair; opposite arcs u->v and v->u may both
    be present unless the digraph is a tournament.

    ``tournament`` asserts completeness: every pair of vertices in different
    sides (bipartite case) or different classes (otherwise) is joined by
    exactly one arc. It is validated on construction.
    """

    n_vertices: int
    classes: tuple[int, ...]
    out_adj: tuple[int, ...]
    n_classes: int
    tournament: bool = False
    in_adj: tuple[int, ...] = field(init=False, repr=False, compare=False)
    _sides: tuple[int, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if len(self.classes) != self.n_vertices or len(self.out_adj) != self.n_vertices:
            raise InvalidArgument("classes/out_adj length must equal n_vertices")
        for c in self.classes:
            if not 1 <= c <= self.n_classes:
                raise InvalidArgument(f"class index {c} outside 1..{self.n_classes}")
        full = (1 << self.n_vertices) - 1
        ins = [0] * self.n_vertices
        for u, m in enumerate(self.out_adj):
            if m & ~full:
                raise InvalidArgument(f"vertex {u} has an out-neighbour outside the vertex set")
            if m >> u & 1:
                raise InvalidArgument(f"loop at vertex {u}")
            for v in bits(m):
                ins[v] |= 1 << u
        object.__setattr__(self, "in_adj", tuple(ins))
        same = [0] * (self.n_classes + 1)
        for v, c in enumerate(self.classes):
            same[c] |= 1 << v
        for u, m in enumerate(self.out_adj):
            if m & same[self.classes[u]]:
                v = next(bits(m & same[self.classes[u]]))
                raise InvalidArgument(f"arc {u}->{v} joins two vertices of class {self.classes[u]}")
        sides = [0, 0]
        for v, c in enumerate(self.classes):
            sides[(c - 1) % 2] |= 1 << v
        object.__setattr__(self, "_sides", (sides[0], sides[1]))
        if self.tournament:
            for u in range(self.n_vertices):
                need = self.cross_mask(u)
                if (self.out_adj[u] | ins[u]) != need:
                    raise InvalidArgument(f"tournament flag set but vertex {u} is not complete")
                if self.out_adj[u] & ins[u]:
                    v = next(bits(self.out_adj[u] & ins[u]))
                    raise InvalidArgument(f"tournament has both arcs {u}->{v} and {v}->{u}")

    # construction -----------------------------------------------------
    @classmethod
    def from_arcs(
        cls,
        n_vertices: int,
        arcs: Iterable[Arc],
        classes: Sequence[int],
        n_classes: int | None = None,
        tournament: bool = False,
    ) -> "Digraph":
        out = [0] * n_vertices
        for u, v in arcs:
            if not (0 <= u < n_vertices and 0 <= v < n_vertices):
                raise InvalidArgument(f"arc {u}->{v} outside vertex range")
            if out[u] >> v & 1:
                raise InvalidArgument(f"duplicate arc {u}->{v}")
            out[u] |= 1 << v
        k = n_classes if n_classes is not None else (max(classes) if classes else 1)
        return cls(n_vertices, tuple(classes), tuple(out), k, tournament)

    def with_arcs(self, arcs: Iterable[Arc], tournament: bool | None = None) -> "Digraph":
        """Same vertices and classes, different arc set."""
        flag = self.tournament if tournament is None else tournament
        return Digraph.from_arcs(self.n_vertices, arcs, self.classes, self.n_classes, flag)

    # structure --------------------------------------------------------
    @property
    def is_bipartite(self) -> bool:
        if self.n_classes % 2:
            return self.n_classes == 1 and self.n_vertices == 0
        for u in range(self.n_vertices):
            if self.out_adj[u] & self.side_mask(self.side_of(u)):
                return False
        return True

    def side_of(self, v: int) -> int:
        """0 for side A (odd class labels), 1 for side B (even labels)."""
        return (self.classes[v] - 1) % 2

    def side_mask(self, side: int) -> int:
        return self._sides[side]

    def class_mask(self, c: int) -> int:
        return mask_of(v for v in range(self.n_vertices) if self.classes[v] == c)

    def cross_mask(self, u: int) -> int:
        """Vertices that a complete (multipartite) tournament joins to ``u``."""
        if self.n_classes % 2 == 0:
            return self.side_mask(1 - self.side_of(u))
        return mask_of(v for v in range(self.n_vertices) if self.classes[v] != self.classes[u])

    def bipartition(self) -> tuple[int, int]:
        """Masks of sides A and B; raises if some arc stays inside a side."""
        if not self.is_bipartite:
            raise InvalidArgument("digraph is not bipartite")
        return self.side_mask(0), self.side_mask(1)

    def has_arc(self, u: int, v: int) -> bool:
        return bool(self.out_adj[u] >> v & 1)

    def arcs(self) -> list[Arc]:
        return [(u, v) for u in range(self.n_vertices) for v in bits(self.out_adj[u])]

    def n_arcs(self) -> int:
        return sum(popcount(m) for m in self.out_adj)

    def out_degree(self, v: int) -> int:
        return popcount(self.out_adj[v])

    def in_degree(self, v: int) -> int:
        return popcount(self.in_adj[v])


BipartiteDigraph = Digraph


def ratio(x) -> Fraction:
    """Exact rational value of a user-supplied parameter such as 0.1."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    return Fraction(str(x))


@dataclass(frozen=True)
class Params:
    """Constants of the construction, as exact ratios."""

    eps: Fraction = Fraction(1, 10)
    eps_prime: Fraction = Fraction(1, 5)
    gamma: Fraction = Fraction(1, 4)
    nu: Fraction = Fraction(1, 20)
    nu_prime: Fraction = Fraction(1, 100)
    tau: Fraction = Fraction(3, 10)

    def __post_init__(self) -> None:
        for name in ("eps", "eps_prime", "gamma", "nu", "nu_prime", "tau"):
            v = ratio(getattr(self, name))
            object.__setattr__(self, name, v)
            if not 0 < v < 1:
                raise InvalidArgument(f"{name} must lie in (0, 1)")
        if not self.nu_prime <= self.nu <= self.tau:
            raise InvalidArgument("need nu_prime <= nu <= tau")
        if not self.eps <= self.eps_prime:
            raise InvalidArgument("need eps <= eps_prime")
        if self.gamma > Fraction(1, 2):
            raise InvalidArgument("gamma must be at most 1/2")

    def as_dict(self) -> dict[str, str]:
        return {k: str(getattr(self, k)) for k in ("eps", "eps_prime", "gamma", "nu", "nu_prime", "tau")}


# generators -----------------------------------------------------------
def make_blowup_cycle(K: int, n: int) -> Digraph:
    """n-fold blow-up of the directed K-cycle; class i holds ids i*n..i*n+n-1."""
    if K < 3:
        raise InvalidArgument("K must be at least 3")
    if n < 1:
        raise InvalidArgument("n must be at least 1")
    classes = [i // n + 1 for i in range(K * n)]
    out = []
    for i in range(K):
        nxt = ((1 << n) - 1) << (((i + 1) % K) * n)
        out.extend([nxt] * n)
    complete = K == 3 or K == 4
    return Digraph(K * n, tuple(classes), tuple(out), K, complete)


def flip_edges(D: Digraph, arcs: Iterable[Arc]) -> Digraph:
    out = list(D.out_adj)
    flips = list(arcs)
    seen = set()
    for u, v in flips:
        if (u, v) in seen:
            raise InvalidArgument(f"arc {u}->{v} listed twice")
        seen.add((u, v))
        if not D.has_arc(u, v):
            raise InvalidArgument(f"arc {u}->{v} not in digraph")
        if D.has_arc(v, u):
            raise InvalidArgument(f"reversing {u}->{v} would create a parallel pair")
    for u, v in flips:
        if (v, u) in seen:
            raise InvalidArgument(f"reversing {u}->{v} would create a parallel pair")
    for u, v in flips:
        out[u] &= ~(1 << v)
    for u, v in flips:
        out[v] |= 1 << u
    return Digraph(D.n_vertices, D.classes, tuple(out), D.n_classes, D.tournament)


def one_flipped_c4(n: int) -> Digraph:
    """Complete blow-up C4 with the transversal 4-cycle on the first vertex of each class reversed."""
    T = make_blowup_cycle(4, n)
    return flip_edges(T, [(0, n), (n, 2 * n), (2 * n, 3 * n), (3 * n, 0)])


def tripartite_counterexample(n: int) -> Digraph:
    """Blow-up of the directed triangle with one transversal triangle reversed."""
    if n < 2:
        raise InvalidArgument("n must be at least 2")
    T = make_blowup_cycle(3, n)
    return flip_edges(T, [(0, n), (n, 2 * n), (2 * n, 0)])


def random_regular_bitournament(n: int, flips: int, seed: int) -> Digraph:
    """Random n-regular bipartite tournament on 4n vertices.

    Starts from the complete blow-up C4 and reverses ``flips`` alternating
    4-cycles a->b->a'->b'->a (a, a' in side A). Attempts that do not hit such
    a cycle are skipped; at most 100*flips attempts are made.
    """
    if n < 1:
        raise InvalidArgument("n must be at least 1")
    if flips < 0:
        raise InvalidArgument("flips must be non-negative")
    T = make_blowup_cycle(4, n)
    out = list(T.out_adj)
    rng = random.Random(seed)
    A = [v for v in range(4 * n) if T.side_of(v) == 0]
    B = [v for v in range(4 * n) if T.side_of(v) == 1]
    done = 0
    for _ in range(100 * flips):
        if done == flips:
            break
        a, a2 = rng.sample(A, 2)
        b, b2 = rng.sample(B, 2)
        cyc = [(a, b), (b, a2), (a2, b2), (b2, a)]
        if all(out[u] >> v & 1 for u, v in cyc):
            for u, v in cyc:
                out[u] &= ~(1 << v)
                out[v] |= 1 << u
            done += 1
    return Digraph(4 * n, T.classes, tuple(out), 4, True)


def is_regular(D: Digraph) -> int | None:
    if D.n_vertices == 0:
        return 0
    r = D.out_degree(0)
    for v in range(D.n_vertices):
        if D.out_degree(v) != r or D.in_degree(v) != r:
            return None
    return r
