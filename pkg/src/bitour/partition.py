"""Quad partitions of regular bipartite tournaments.

A quad partition (U1, U2, U3, U4) splits side A into U1, U3 and side B into
U2, U4 (or the other way round, so that every rotation is again a quad
partition). Arcs U_i -> U_{i+1} are forward, arcs U_{i+1} -> U_i backward.
Indices are 0-based internally and taken mod 4.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

from .digraph import Arc, Digraph, bits, is_regular, mask_of, popcount, ratio
from .errors import HypothesisError, Infeasible, InvalidArgument, InvariantViolation, SizeLimit


@dataclass(frozen=True)
class QuadPartition:
    parts: tuple[frozenset[int], frozenset[int], frozenset[int], frozenset[int]]

    def __post_init__(self) -> None:
        if len(self.parts) != 4:
            raise InvalidArgument("a quad partition has four parts")
        sizes = {len(p) for p in self.parts}
        if len(sizes) != 1:
            raise InvalidArgument(f"parts have unequal sizes {[len(p) for p in self.parts]}")
        seen: set[int] = set()
        for p in self.parts:
            if seen & p:
                raise InvalidArgument("parts overlap")
            seen |= p

    @classmethod
    def of(cls, parts) -> "QuadPartition":
        return cls(tuple(frozenset(p) for p in parts))  # type: ignore[arg-type]

    @property
    def n(self) -> int:
        return len(self.parts[0])

    @property
    def masks(self) -> tuple[int, int, int, int]:
        return tuple(mask_of(p) for p in self.parts)  # type: ignore[return-value]

    def index_of(self, v: int) -> int:
        for i, p in enumerate(self.parts):
            if v in p:
                return i
        raise InvalidArgument(f"vertex {v} not covered by partition")

    def rotate(self, k: int) -> "QuadPartition":
        """Partition whose i-th part is the (i+k)-th part of this one."""
        return QuadPartition(tuple(self.parts[(i + k) % 4] for i in range(4)))  # type: ignore[arg-type]

    def validate(self, T: Digraph) -> None:
        """Check that the parts cover V(T) and respect its bipartition."""
        if sum(len(p) for p in self.parts) != T.n_vertices:
            raise InvalidArgument("partition does not cover the vertex set")
        A, B = T.bipartition()
        m = self.masks
        if {m[0] | m[2], m[1] | m[3]} != {A, B}:
            raise InvalidArgument("U1 and U3 must form one side of the bipartition")

    def as_lists(self) -> list[list[int]]:
        return [sorted(p) for p in self.parts]


def natural_partition(T: Digraph) -> QuadPartition:
    """Classes 1..4 of a digraph labelled with four classes."""
    if T.n_classes != 4:
        raise InvalidArgument("natural partition needs four labelled classes")
    return QuadPartition.of([[v for v in range(T.n_vertices) if T.classes[v] == c] for c in range(1, 5)])


# arc classification ---------------------------------------------------
def forward_edges(T: Digraph, U: QuadPartition) -> list[Arc]:
    m = U.masks
    out = []
    for i in range(4):
        for u in bits(m[i]):
            out.extend((u, v) for v in bits(T.out_adj[u] & m[(i + 1) % 4]))
    return sorted(out)


def backward_edges(T: Digraph, U: QuadPartition) -> list[Arc]:
    m = U.masks
    out = []
    for i in range(4):
        for u in bits(m[i]):
            out.extend((u, v) for v in bits(T.out_adj[u] & m[(i - 1) % 4]))
    return sorted(out)


def pair_count(T: Digraph, Ui: int, Uj: int) -> int:
    """Number of arcs from mask Ui to mask Uj."""
    return sum(popcount(T.out_adj[u] & Uj) for u in bits(Ui))


def backward_count(T: Digraph, masks) -> int:
    return sum(pair_count(T, masks[i], masks[(i - 1) % 4]) for i in range(4))


def backward_out_degree(T: Digraph, U: QuadPartition, v: int) -> int:
    i = U.index_of(v)
    return popcount(T.out_adj[v] & U.masks[(i - 1) % 4])


def backward_in_degree(T: Digraph, U: QuadPartition, v: int) -> int:
    i = U.index_of(v)
    return popcount(T.in_adj[v] & U.masks[(i + 1) % 4])


@dataclass(frozen=True)
class BalanceReport:
    ok: bool
    backward_count: int | None
    forward_count: int | None
    violation: str | None = None


def check_regular_balance(T: Digraph, U: QuadPartition) -> BalanceReport:
    """Per-vertex forward/backward degree symmetry and equal pair counts."""
    U.validate(T)
    m = U.masks
    for i in range(4):
        for v in bits(m[i]):
            fo = popcount(T.out_adj[v] & m[(i + 1) % 4])
            fi = popcount(T.in_adj[v] & m[(i - 1) % 4])
            bo = popcount(T.out_adj[v] & m[(i - 1) % 4])
            bi = popcount(T.in_adj[v] & m[(i + 1) % 4])
            if fo != fi:
                return BalanceReport(False, None, None, f"vertex {v}: forward out {fo} != forward in {fi}")
            if bo != bi:
                return BalanceReport(False, None, None, f"vertex {v}: backward out {bo} != backward in {bi}")
    back = [pair_count(T, m[i], m[(i - 1) % 4]) for i in range(4)]
    fwd = [pair_count(T, m[i], m[(i + 1) % 4]) for i in range(4)]
    if len(set(back)) != 1:
        return BalanceReport(False, None, None, f"backward pair counts differ: {back}")
    if len(set(fwd)) != 1:
        return BalanceReport(False, None, None, f"forward pair counts differ: {fwd}")
    return BalanceReport(True, back[0], fwd[0])


def eps4_check(T: Digraph, U: QuadPartition, eps) -> bool:
    m = U.masks
    bound = ratio(eps) * U.n * U.n
    return all(pair_count(T, m[i], m[(i - 1) % 4]) <= bound for i in range(4))


# optimal partitions ---------------------------------------------------
def _require_regular_bitournament(T: Digraph) -> int:
    if not T.is_bipartite:
        raise InvalidArgument("digraph is not bipartite")
    if not T.tournament:
        raise InvalidArgument("digraph is not a bipartite tournament")
    r = is_regular(T)
    if r is None:
        raise InvalidArgument("bipartite tournament is not regular")
    A, B = T.bipartition()
    if popcount(A) != popcount(B) or popcount(A) % 2 or 2 * r != popcount(A):
        raise InvalidArgument("sides must have size 2n for an n-regular tournament on 4n vertices")
    return r


def _best_b_split(T: Digraph, U1: int, U3: int, B: list[int], n: int) -> tuple[int, int, int]:
    # each B-vertex's backward contribution depends only on where it goes
    diffs = []
    base = 0
    for b in B:
        c2 = popcount(T.out_adj[b] & U1) + popcount(T.in_adj[b] & U3)
        c4 = popcount(T.out_adj[b] & U3) + popcount(T.in_adj[b] & U1)
        base += c4
        diffs.append((c2 - c4, b))
    diffs.sort()
    U2 = mask_of(b for _, b in diffs[:n])
    total = base + sum(d for d, _ in diffs[:n])
    U4 = mask_of(B) & ~U2
    return total, U2, U4


def _from_masks(masks) -> QuadPartition:
    return QuadPartition.of([list(bits(m)) for m in masks])


def optimal_partition(T: Digraph, mode: str = "exact") -> QuadPartition:
    """Quad partition minimising the number of backward arcs.

    ``exact`` enumerates every balanced split of side A and, for each, places
    side B optimally (the cost of a B-vertex depends only on its own part), so
    the search is exhaustive. ``local`` runs first-improvement single swaps.
    """
    n = _require_regular_bitournament(T)
    A_mask, B_mask = T.bipartition()
    A, B = list(bits(A_mask)), list(bits(B_mask))
    if mode == "exact":
        if len(A) > 12:
            raise SizeLimit(f"exact partition search needs class size <= 12, got {len(A)}")
        best = None
        for combo in itertools.combinations(A, n):
            U1 = mask_of(combo)
            U3 = A_mask & ~U1
            total, U2, U4 = _best_b_split(T, U1, U3, B, n)
            if best is None or total < best[0]:
                best = (total, (U1, U2, U3, U4))
        assert best is not None
        U = _from_masks(best[1])
    elif mode == "local":
        U = _local_search(T, A, B, n)
    else:
        raise InvalidArgument(f"unknown mode {mode!r}")
    if gamma_optimal_choice(T, U) is None:
        raise InvariantViolation("optimal partition violates the threshold-set dichotomy")
    return U


def _local_search(T: Digraph, A: list[int], B: list[int], n: int) -> QuadPartition:
    starts = []
    for a_lo, b_lo in itertools.product((True, False), repeat=2):
        U1 = mask_of(A[:n] if a_lo else A[n:])
        U2 = mask_of(B[:n] if b_lo else B[n:])
        starts.append([U1, U2, mask_of(A) & ~U1, mask_of(B) & ~U2])
    best = None
    for masks in starts:
        cur = backward_count(T, masks)
        improved = True
        while improved:
            improved = False
            for x, y in itertools.combinations(range(T.n_vertices), 2):
                ix = next(i for i in range(4) if masks[i] >> x & 1)
                iy = next(i for i in range(4) if masks[i] >> y & 1)
                if (ix - iy) % 4 != 2:
                    continue
                trial = list(masks)
                trial[ix] ^= (1 << x) | (1 << y)
                trial[iy] ^= (1 << x) | (1 << y)
                val = backward_count(T, trial)
                if val < cur:
                    masks, cur, improved = trial, val, True
                    break
        if best is None or cur < best[0]:
            best = (cur, masks)
    assert best is not None
    return _from_masks(best[1])


# threshold sets --------------------------------------------------------
@dataclass(frozen=True)
class ThresholdSets:
    gamma: Fraction
    sets: tuple[frozenset[int], frozenset[int], frozenset[int], frozenset[int]]

    @property
    def all(self) -> frozenset[int]:
        return self.sets[0] | self.sets[1] | self.sets[2] | self.sets[3]

    @property
    def masks(self) -> tuple[int, int, int, int]:
        return tuple(mask_of(s) for s in self.sets)  # type: ignore[return-value]


def gamma_sets(T: Digraph, U: QuadPartition, gamma) -> ThresholdSets:
    g = ratio(gamma)
    m = U.masks
    bound = g * U.n
    sets = []
    for i in range(4):
        sets.append(frozenset(v for v in bits(m[i]) if popcount(T.out_adj[v] & m[(i - 1) % 4]) > bound))
    return ThresholdSets(g, tuple(sets))  # type: ignore[arg-type]


def _dichotomy_choices(T: Digraph, U: QuadPartition, gamma) -> list[list[int]]:
    """For each pair {i, i+2}, the indices j allowed by the threshold dichotomy.

    j is allowed when U_j^gamma is empty, or when both U_i^{1-gamma} and
    U_{i+2}^{1-gamma} are empty.
    """
    low = gamma_sets(T, U, gamma).sets
    high = gamma_sets(T, U, 1 - ratio(gamma)).sets
    out = []
    for i in range(2):
        both_empty = not high[i] and not high[i + 2]
        out.append([j for j in (i, i + 2) if both_empty or not low[j]])
    return out


def gamma_optimal_choice(T: Digraph, U: QuadPartition, gammas=None) -> tuple[int, int] | None:
    """Check the threshold dichotomy for every relevant gamma in (0, 1/2].

    Returns the pair (j1, j2) found for the largest gamma checked, or None if
    some gamma has an empty choice for some pair.
    """
    n = U.n
    if gammas is None:
        gammas = [Fraction(k, 4 * n) for k in range(1, 2 * n + 1)]
    last = None
    for g in gammas:
        ch = _dichotomy_choices(T, U, g)
        if not ch[0] or not ch[1]:
            return None
        last = (ch[0][0], ch[1][0])
    return last


# exceptional sets ------------------------------------------------------
@dataclass(frozen=True)
class ExceptionalSet:
    members: frozenset[int]
    slices: tuple[frozenset[int], frozenset[int], frozenset[int], frozenset[int]]

    def __post_init__(self) -> None:
        if len({len(s) for s in self.slices}) != 1:
            raise InvalidArgument("exceptional set slices must have equal size")

    @classmethod
    def empty(cls) -> "ExceptionalSet":
        e: frozenset[int] = frozenset()
        return cls(e, (e, e, e, e))

    @classmethod
    def from_members(cls, U: QuadPartition, members) -> "ExceptionalSet":
        mem = frozenset(members)
        return cls(mem, tuple(mem & p for p in U.parts))  # type: ignore[arg-type]

    @property
    def mask(self) -> int:
        return mask_of(self.members)


def exceptional_set(T: Digraph, U: QuadPartition, eps_prime) -> ExceptionalSet:
    """Smallest balanced set containing every vertex of backward degree > eps' n.

    Each slice is padded up to the largest threshold slice with the vertices
    of highest backward degree, ties broken by smallest id.
    """
    e = ratio(eps_prime)
    core = gamma_sets(T, U, e).sets
    size = max(len(s) for s in core)
    if size > e * U.n:
        i = max(range(4), key=lambda k: len(core[k]))
        raise Infeasible(f"class U{i + 1} has {size} vertices of backward degree > eps' n, exceeding eps' n = {float(e * U.n)}")
    m = U.masks
    slices = []
    for i in range(4):
        rest = [v for v in bits(m[i]) if v not in core[i]]
        rest.sort(key=lambda v: (-popcount(T.out_adj[v] & m[(i - 1) % 4]), v))
        slices.append(frozenset(core[i]) | frozenset(rest[: size - len(core[i])]))
    return ExceptionalSet(frozenset().union(*slices), tuple(slices))  # type: ignore[arg-type]


# balancing subgraph ----------------------------------------------------
@dataclass(frozen=True)
class OptimalH:
    arcs: frozenset[Arc]
    partition: QuadPartition  # rotated so that U3 and U4 avoid U^{1-gamma}
    rotation: int


def rotate_for_H(T: Digraph, U: QuadPartition, gamma) -> tuple[QuadPartition, int]:
    """Rotate U so that, for each pair, U_{i+2} is an allowed dichotomy index."""
    ch = _dichotomy_choices(T, U, gamma)
    for k in range(4):
        for j1 in ch[0]:
            for j2 in ch[1]:
                if {(2 + k) % 4, (3 + k) % 4} == {j1, j2}:
                    return U.rotate(k), k
    raise InvalidArgument("partition admits no rotation with U3, U4 free of high backward degree; it is not optimal")


def build_optimal_H(T: Digraph, U: QuadPartition, gamma) -> OptimalH:
    g = ratio(gamma)
    if g > Fraction(1, 2):
        raise InvalidArgument("gamma must be at most 1/2")
    R, k = rotate_for_H(T, U, g)
    n = R.n
    m = R.masks
    hi = gamma_sets(T, R, 1 - g).sets
    for i in range(4):
        if len(hi[i]) > g * n:
            raise HypothesisError(
                "|U_i^{1-gamma}| <= gamma n",
                f"U{i + 1} has {len(hi[i])} vertices of backward degree > (1-gamma)n, gamma n = {float(g * n)}",
            )
    hi_all = hi[0] | hi[1] | hi[2] | hi[3]
    him = [mask_of(s) for s in hi]
    E: dict[int, list[Arc]] = {}
    for v in range(T.n_vertices):
        if v in hi_all:
            continue
        i = R.index_of(v)
        if i == 0:
            size = popcount(T.in_adj[v] & him[1])
            E[v] = [(v, w) for w in bits(T.out_adj[v] & m[3])][:size]
        elif i == 3:
            size = popcount(T.in_adj[v] & him[0])
            E[v] = [(v, w) for w in bits(T.out_adj[v] & m[2])][:size]
        elif i == 1:
            size = popcount(T.out_adj[v] & him[0])
            E[v] = [(w, v) for w in bits(T.in_adj[v] & m[2])][:size]
        else:
            size = popcount(T.out_adj[v] & him[1])
            E[v] = [(w, v) for w in bits(T.in_adj[v] & m[3])][:size]
    arcs: set[Arc] = set()
    for v in bits(m[0]):
        arcs.update(E.get(v, ()))
    for v in bits(m[1]):
        arcs.update(E.get(v, ()))
    if hi[0] and hi[1]:
        arcs.update((u, w) for u in bits(m[3]) for w in bits(T.out_adj[u] & m[2]))
    elif hi[0]:
        for v in bits(m[3]):
            arcs.update(E.get(v, ()))
    elif hi[1]:
        for v in bits(m[2]):
            arcs.update(E.get(v, ()))
    H = OptimalH(frozenset(arcs), R, k)
    check_optimal_H(T, H, g)
    return H


def check_optimal_H(T: Digraph, H: OptimalH, gamma) -> None:
    """Recount the three balancing properties; raise on any failure."""
    g = ratio(gamma)
    R = H.partition
    n = R.n
    m = R.masks
    hi = gamma_sets(T, R, 1 - g).sets
    hi_all = hi[0] | hi[1] | hi[2] | hi[3]
    dout = [0] * T.n_vertices
    din = [0] * T.n_vertices
    for u, v in H.arcs:
        if not T.has_arc(u, v):
            raise InvariantViolation(f"arc {u}->{v} of H is not in T")
        iu, iv = R.index_of(u), R.index_of(v)
        if (iu - iv) % 4 != 1:
            raise InvariantViolation(f"arc {u}->{v} of H is not backward")
        dout[u] += 1
        din[v] += 1
    for v in range(T.n_vertices):
        if max(dout[v], din[v]) > g * n:
            raise InvariantViolation(f"vertex {v} has H-degree above gamma n")
        if v in hi_all and dout[v] + din[v]:
            raise InvariantViolation(f"vertex {v} in U^(1-gamma) touches H")
    for i in range(4):
        cnt = sum(1 for u, v in H.arcs if R.index_of(u) == i and R.index_of(v) == (i - 1) % 4
                  and u not in hi_all and v not in hi_all)
        need = (1 - 2 * g) * n * len(hi[(i - 2) % 4] | hi[(i - 3) % 4])
        if cnt < need:
            raise InvariantViolation(f"H has {cnt} arcs U{i + 1}->U{(i - 1) % 4 + 1}, needs {float(need)}")
