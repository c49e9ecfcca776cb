"""Hamilton cycles and decompositions: exact search, blow-up assembly, the
decomposition driver, verification, robust outexpansion and the
expander/close classifier.

Cycles are handled in two forms: a vertex sequence (closing arc implied) or
a set of arcs. ``cycle_arcs`` and ``cycle_order`` convert between them.
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Sequence

import numpy as np

from .digraph import Arc, Digraph, Params, bits, is_regular, mask_of, popcount, ratio
from .errors import HypothesisError, Infeasible, InvalidArgument, InvariantViolation, SizeLimit, StageFailure
from .feasible import FeasibilityContext, check_feasible, cycle_ell, decompose_backward_and_exceptional
from .matching import ContractionMap, close_hamilton, contract, is_linear_forest, max_matching
from .partition import QuadPartition, backward_count, exceptional_set, optimal_partition

EXPANDER = "expander"
CLOSE = "close"


class BudgetExhausted(Exception):
    """Raised inside a search when its node budget runs out."""


class SearchBudget:
    def __init__(self, limit: int | None):
        self.limit = limit
        self.used = 0

    def tick(self, k: int = 1) -> None:
        self.used += k
        if self.limit is not None and self.used > self.limit:
            raise BudgetExhausted


# cycle helpers ----------------------------------------------------------
def cycle_arcs(C: Sequence[int]) -> frozenset[Arc]:
    k = len(C)
    return frozenset((C[i], C[(i + 1) % k]) for i in range(k))


def cycle_order(arcs: Iterable[Arc]) -> list[int] | None:
    """Vertex sequence of a single directed cycle starting at its smallest vertex, else None."""
    succ: dict[int, int] = {}
    heads = set()
    for u, v in arcs:
        if u in succ or v in heads:
            return None
        succ[u] = v
        heads.add(v)
    if not succ or set(succ) != heads:
        return None
    s = min(succ)
    order = [s]
    x = succ[s]
    while x != s:
        order.append(x)
        x = succ[x]
    return order if len(order) == len(succ) else None


# robust outexpansion ----------------------------------------------------
def _class_size(D: Digraph) -> int:
    if D.is_bipartite:
        return popcount(D.side_mask(0))
    return D.n_vertices


def robust_out_nbhd(D: Digraph, S: Iterable[int], nu) -> frozenset[int]:
    """Vertices with at least ceil(nu * n) in-neighbours in S (n = class size)."""
    thr = math.ceil(ratio(nu) * _class_size(D))
    s = mask_of(S)
    return frozenset(v for v in range(D.n_vertices) if popcount(D.in_adj[v] & s) >= thr)


@dataclass(frozen=True)
class ExpanderTest:
    """Outcome of an expansion test; ``proof`` only in exhaustive mode."""

    expander: bool
    proof: bool
    nu: Fraction
    tau: Fraction
    witness: frozenset[int] | None = None
    rn_size: int | None = None


def _side_table(D: Digraph, side: int):
    X = list(bits(D.side_mask(side)))
    Y = list(bits(D.side_mask(1 - side)))
    adj = np.zeros((len(X), len(Y)), dtype=np.int32)
    col = {y: j for j, y in enumerate(Y)}
    for i, x in enumerate(X):
        for y in bits(D.out_adj[x]):
            if y in col:
                adj[i, col[y]] = 1
    return X, Y, adj


def _failing_codes(D: Digraph, side: int, nu: Fraction, tau: Fraction) -> tuple[list[int], np.ndarray]:
    """Boolean array over subset codes of one side: True where S fails to expand."""
    N = _class_size(D)
    thr = math.ceil(nu * N)  # also the bound below: |RN| - |S| < nu N iff it is < ceil(nu N)
    X, _, adj = _side_table(D, side)
    k = len(X)
    lo, hi = math.ceil(tau * N), math.floor((1 - tau) * N)
    fail = np.zeros(1 << k, dtype=bool)
    chunk = 1 << 16
    shifts = np.arange(k, dtype=np.int64)
    for start in range(0, 1 << k, chunk):
        codes = np.arange(start, min(1 << k, start + chunk), dtype=np.int64)
        M = ((codes[:, None] >> shifts) & 1).astype(np.int32)
        size = M.sum(axis=1)
        rn = ((M @ adj) >= thr).sum(axis=1)
        ok_size = (size >= lo) & (size <= hi)
        fail[start : start + len(codes)] = ok_size & (rn - size < thr)
    return X, fail


def _witnesses(D: Digraph, nu: Fraction, tau: Fraction) -> Iterator[tuple[int, frozenset[int]]]:
    """Failing sets, side A first, then by size, then lexicographically."""
    for side in (0, 1):
        X, fail = _failing_codes(D, side, nu, tau)
        if not fail.any():
            continue
        for r in range(len(X) + 1):
            for combo in itertools.combinations(range(len(X)), r):
                code = 0
                for i in combo:
                    code |= 1 << i
                if fail[code]:
                    yield side, frozenset(X[i] for i in combo)


def is_bip_robust_outexpander(D: Digraph, nu, tau, mode: str = "exhaustive", samples: int = 2000, seed: int = 0) -> ExpanderTest:
    nu, tau = ratio(nu), ratio(tau)
    if not D.is_bipartite:
        raise InvalidArgument("digraph is not bipartite")
    N = _class_size(D)
    if mode == "exhaustive":
        if N > 20:
            raise SizeLimit(f"exhaustive expansion test needs class size <= 20, got {N}")
        for _, S in _witnesses(D, nu, tau):
            return ExpanderTest(False, True, nu, tau, S, len(robust_out_nbhd(D, S, nu)))
        return ExpanderTest(True, True, nu, tau)
    if mode == "sampled":
        rng = random.Random(seed)
        lo, hi = math.ceil(tau * N), math.floor((1 - tau) * N)
        if lo > hi:
            return ExpanderTest(True, False, nu, tau)
        sides = [list(bits(D.side_mask(0))), list(bits(D.side_mask(1)))]
        for _ in range(samples):
            X = sides[rng.randrange(2)]
            S = frozenset(rng.sample(X, rng.randint(lo, hi)))
            rn = len(robust_out_nbhd(D, S, nu))
            if rn < len(S) + nu * N:
                return ExpanderTest(False, True, nu, tau, S, rn)
        return ExpanderTest(True, False, nu, tau)
    raise InvalidArgument(f"unknown mode {mode!r}")


@dataclass(frozen=True)
class ExpansionCertificate:
    kind: str
    nu: Fraction
    tau: Fraction
    proof: bool = False
    witness: frozenset[int] | None = None
    partition: QuadPartition | None = None
    backward: int | None = None

    def as_dict(self) -> dict:
        out: dict = {"kind": self.kind, "nu": str(self.nu), "tau": str(self.tau), "proof": self.proof}
        if self.kind == CLOSE:
            out["witness"] = sorted(self.witness or ())
            out["partition"] = self.partition.as_lists() if self.partition else None
            out["backward"] = self.backward
        return out


def _require_bitournament(T: Digraph) -> int:
    if not T.is_bipartite:
        raise InvalidArgument("digraph is not bipartite")
    if not T.tournament:
        raise InvalidArgument("digraph is not a bipartite tournament")
    r = is_regular(T)
    A, B = T.bipartition()
    if r is None or popcount(A) != popcount(B) or popcount(A) != 2 * r:
        raise InvalidArgument("bipartite tournament is not regular on classes of size 2n")
    return r


def close_partition(T: Digraph, S: frozenset[int], nu_prime) -> QuadPartition:
    """Quad partition from a non-expanding set: U1 ~ S, U2 ~ RN(S), each padded or truncated to size n."""
    n = T.n_vertices // 4
    side = T.side_of(next(iter(S)))
    X = list(bits(T.side_mask(side)))
    Y = list(bits(T.side_mask(1 - side)))
    Bp = robust_out_nbhd(T, S, nu_prime) & frozenset(Y)
    U1 = sorted(X, key=lambda v: (v not in S, v))[:n]
    U2 = sorted(Y, key=lambda v: (v not in Bp, v))[:n]
    U3 = [v for v in X if v not in set(U1)]
    U4 = [v for v in Y if v not in set(U2)]
    return QuadPartition.of([U1, U2, U3, U4])


def classify_two_cases(T: Digraph, nu_prime, tau) -> ExpansionCertificate:
    """Expander certificate (exhaustive) or a close certificate with few backward arcs."""
    nu_prime, tau = ratio(nu_prime), ratio(tau)
    n = _require_bitournament(T)
    if 2 * n > 20:
        raise SizeLimit(f"classifier needs class size <= 20, got {2 * n}")
    bound2 = 16 * nu_prime * n**4  # backward <= 4 sqrt(nu') n^2, squared
    found = False
    for _, S in _witnesses(T, nu_prime, tau):
        found = True
        U = close_partition(T, S, nu_prime)
        b = backward_count(T, U.masks)
        if b * b <= bound2:
            return ExpansionCertificate(CLOSE, nu_prime, tau, True, S, U, b)
    if not found:
        return ExpansionCertificate(EXPANDER, nu_prime, tau, True)
    raise SizeLimit("no non-expanding set yields a partition within the closeness bound")


# exact Hamilton search ---------------------------------------------------
def _normalise(D, vertices) -> tuple[list[int], set[Arc]]:
    if isinstance(D, Digraph):
        V = list(range(D.n_vertices)) if vertices is None else sorted(vertices)
        return V, set(D.arcs())
    arcs = {(int(u), int(v)) for u, v in D}
    V = sorted(vertices) if vertices is not None else sorted({x for e in arcs for x in e})
    return V, arcs


def _dfs_cycles(
    m: int,
    out: list[int],
    inn: list[int],
    start: int,
    first: int | None,
    prio: list[int] | None,
    budget: SearchBudget | None,
) -> Iterator[list[int]]:
    """All Hamilton cycles on nodes 0..m-1 starting at ``start`` (and stepping to ``first``)."""
    full = (1 << m) - 1
    sbit = 1 << start
    path = [start]

    def order(mask: int) -> list[int]:
        vs = list(bits(mask))
        if prio is not None:
            vs.sort(key=lambda v: prio[v])
        return vs

    def rec(cur: int, visited: int) -> Iterator[list[int]]:
        if budget is not None:
            budget.tick()
        unvis = full & ~visited
        if not unvis:
            if out[cur] & sbit:
                yield list(path)
            return
        if not inn[start] & unvis:
            return
        pool_in = unvis | (1 << cur)
        pool_out = unvis | sbit
        forced = -1
        cbit = 1 << cur
        for w in bits(unvis):
            ia = inn[w] & pool_in
            if not ia or not out[w] & pool_out:
                return
            if ia == cbit:
                if forced >= 0:
                    return
                forced = w
        cand = out[cur] & unvis
        if forced >= 0:
            cand &= 1 << forced
        if len(path) == 1 and first is not None:
            cand &= 1 << first
        if not cand:
            return
        # every unvisited node must be reachable from cur inside unvis
        reach = 0
        frontier = out[cur] & unvis
        while frontier:
            reach |= frontier
            nxt = 0
            for x in bits(frontier):
                nxt |= out[x]
            frontier = nxt & unvis & ~reach
        if reach != unvis:
            return
        for v in order(cand):
            path.append(v)
            yield from rec(v, visited | (1 << v))
            path.pop()

    yield from rec(start, sbit)


def _prepare(V: list[int], arcs: set[Arc], required: Iterable[Arc], seed):
    """Contract required paths into single nodes; returns the search tables."""
    req = sorted(set(required))
    vset = set(V)
    for u, v in req:
        if u not in vset or v not in vset:
            raise InvalidArgument(f"required arc {u}->{v} leaves the vertex set")
    if not is_linear_forest(req):
        raise InvalidArgument("required arcs do not form a linear forest")
    succ = dict(req)
    heads = {v for _, v in req}
    chains: list[list[int]] = []
    for v in V:
        if v in heads:
            continue
        ch = [v]
        while ch[-1] in succ:
            ch.append(succ[ch[-1]])
        chains.append(ch)
    m = len(chains)
    entry = {ch[0]: i for i, ch in enumerate(chains)}
    out = [0] * m
    inn = [0] * m
    by_tail: dict[int, list[int]] = {}
    for u, v in arcs:
        by_tail.setdefault(u, []).append(v)
    for i, ch in enumerate(chains):
        for v in by_tail.get(ch[-1], ()):
            j = entry.get(v)
            if j is not None and j != i:
                out[i] |= 1 << j
                inn[j] |= 1 << i
    prio = None
    if seed is not None:
        p = list(range(m))
        random.Random(seed).shuffle(p)
        prio = p
    return chains, out, inn, prio, arcs


def _expand(chains: list[list[int]], order: Sequence[int]) -> list[int]:
    C = [v for i in order for v in chains[i]]
    s = C.index(min(C))
    return C[s:] + C[:s]


def exact_hamilton(
    D,
    required: Iterable[Arc] = (),
    vertices: Iterable[int] | None = None,
    cap: int = 40,
    seed: int | None = None,
    budget: SearchBudget | None = None,
) -> list[int] | None:
    """A Hamilton cycle of D through every required arc, or None if none exists.

    ``D`` is a Digraph or an iterable of arcs (2-cycles allowed). Required
    arcs need not belong to D. The search is complete; with a budget it may
    raise BudgetExhausted instead of answering.
    """
    req = {(int(u), int(v)) for u, v in required}
    V, arcs = _normalise(D, vertices)
    if vertices is None and not isinstance(D, Digraph):
        V = sorted(set(V) | {x for e in req for x in e})
    if len(V) > cap:
        raise SizeLimit(f"exact Hamilton search capped at {cap} vertices, got {len(V)}")
    if len(V) < 2:
        return None
    if len(req) == len(V) and len(dict(req)) == len(V):
        # the required arcs already close up; accept them only as one cycle
        C = cycle_order(req)
        if C is not None and sorted(C) == V:
            return _expand([C], [0])
        raise InvalidArgument("required arcs do not form a linear forest")
    chains, out, inn, prio, _ = _prepare(V, arcs, req, seed)
    if len(chains) == 1:
        ch = chains[0]
        return _expand(chains, [0]) if (ch[-1], ch[0]) in arcs else None
    for order in _dfs_cycles(len(chains), out, inn, 0, None, prio, budget):
        C = _expand(chains, order)
        _check_cycle(C, V, arcs | req, req)
        return C
    return None


def hamilton_cycles(
    D,
    through: Arc | None = None,
    vertices: Iterable[int] | None = None,
    budget: SearchBudget | None = None,
) -> Iterator[list[int]]:
    """Enumerate Hamilton cycles, optionally only those using arc ``through``."""
    V, arcs = _normalise(D, vertices)
    if len(V) < 2:
        return
    idx = {v: i for i, v in enumerate(V)}
    m = len(V)
    out = [0] * m
    inn = [0] * m
    for u, v in arcs:
        out[idx[u]] |= 1 << idx[v]
        inn[idx[v]] |= 1 << idx[u]
    if through is None:
        start, first = 0, None
    else:
        if through not in arcs:
            return
        start, first = idx[through[0]], idx[through[1]]
    for order in _dfs_cycles(m, out, inn, start, first, None, budget):
        yield [V[i] for i in order]


def _check_cycle(C: Sequence[int], V: Sequence[int], arcs: set[Arc], req: set[Arc]) -> None:
    if sorted(C) != sorted(V):
        raise InvariantViolation("search returned a cycle that is not spanning")
    E = cycle_arcs(C)
    if not E <= arcs:
        raise InvariantViolation("search returned a cycle using a non-arc")
    if not req <= E:
        raise InvariantViolation("search returned a cycle missing a required arc")


# exhaustive decomposition -----------------------------------------------
def _regular_degree(V: Sequence[int], arcs: set[Arc]) -> int | None:
    dout = {v: 0 for v in V}
    din = {v: 0 for v in V}
    for u, v in arcs:
        dout[u] += 1
        din[v] += 1
    degs = set(dout.values()) | set(din.values())
    return degs.pop() if len(degs) == 1 else None


def _decompose_exhaustive(V: list[int], arcs: frozenset[Arc], dead: set, budget: SearchBudget | None) -> list[list[int]] | None:
    if not arcs:
        return []
    if arcs in dead:
        return None
    pivot = min(arcs)
    for C in hamilton_cycles(arcs, through=pivot, vertices=V, budget=budget):
        rest = _decompose_exhaustive(V, arcs - cycle_arcs(C), dead, budget)
        if rest is not None:
            return [C] + rest
    dead.add(arcs)
    return None


def exhaustive_decomposition(D, cap: int = 14, vertices: Iterable[int] | None = None, budget: SearchBudget | None = None) -> list[list[int]] | None:
    """A Hamilton decomposition found by complete search, or None if none exists.

    Each level enumerates the Hamilton cycles through the smallest remaining
    arc; the residual must then decompose. None is a proof of
    non-decomposability (unless a budget is given and runs out, which raises).
    """
    V, arcs = _normalise(D, vertices)
    if len(V) > cap:
        raise SizeLimit(f"exhaustive decomposition capped at {cap} vertices, got {len(V)}")
    if not arcs:
        return []
    if len(V) < 2 or _regular_degree(V, arcs) is None:
        return None
    res = _decompose_exhaustive(V, frozenset(arcs), set(), budget)
    if res is not None:
        _check_decomposition(V, arcs, res)
    return res


def _check_decomposition(V, arcs, cycles) -> None:
    seen: set[Arc] = set()
    for C in cycles:
        E = cycle_arcs(C)
        if sorted(C) != sorted(V) or E & seen or not E <= arcs:
            raise InvariantViolation("decomposition search returned an invalid cycle")
        seen |= E
    if seen != set(arcs):
        raise InvariantViolation("decomposition search left arcs uncovered")


# verification -----------------------------------------------------------
@dataclass(frozen=True)
class VerifyReport:
    ok: bool
    violations: tuple[str, ...]
    balance: tuple[tuple[int, int, int, int], ...] = ()
    ells: tuple[int | None, ...] = ()

    def as_dict(self) -> dict:
        return {
            "ok": self.ok,
            "violations": list(self.violations),
            "balance": [list(b) for b in self.balance],
            "ell": list(self.ells),
        }


def cycle_balance(C: Iterable[Arc], U: QuadPartition) -> tuple[int, int, int, int]:
    """(e_C(U_i, U_{i-1}) for i = 1..4)."""
    idx = {v: i for i, p in enumerate(U.parts) for v in p}
    c = [0, 0, 0, 0]
    for u, v in C:
        if (idx[u] - idx[v]) % 4 == 1:
            c[idx[u]] += 1
    return tuple(c)  # type: ignore[return-value]


def verify_decomposition(T: Digraph, cycles: Sequence[Iterable[Arc]], U: QuadPartition | None = None) -> VerifyReport:
    """Check that the cycles are Hamilton cycles partitioning E(T), and the balance laws under U."""
    viol: list[str] = []
    E = set(T.arcs())
    V = list(range(T.n_vertices))
    seen: dict[Arc, int] = {}
    balance = []
    ells: list[int | None] = []
    for k, C in enumerate(cycles):
        arcs = [tuple(e) for e in C]
        for e in arcs:
            if e not in E:
                viol.append(f"cycle {k}: arc {e[0]}->{e[1]} is not an arc of T")
            if e in seen:
                viol.append(f"cycle {k}: arc {e[0]}->{e[1]} already used by cycle {seen[e]}")
            seen.setdefault(e, k)  # type: ignore[arg-type]
        order = cycle_order(arcs) if len(set(arcs)) == len(arcs) else None
        if order is None or sorted(order) != V:
            viol.append(f"cycle {k}: not a Hamilton cycle")
            order = None
        if U is not None:
            b = cycle_balance(arcs, U)
            balance.append(b)
            if b[0] != b[2]:
                viol.append(f"cycle {k}: e(U1,U4)={b[0]} != e(U3,U2)={b[2]}")
            if b[3] != b[1]:
                viol.append(f"cycle {k}: e(U4,U3)={b[3]} != e(U2,U1)={b[1]}")
            ell = None
            if order is not None:
                try:
                    ell = cycle_ell(order, U)
                except (InvalidArgument, InvariantViolation) as exc:
                    viol.append(f"cycle {k}: {exc}")
            ells.append(ell)
    for e in sorted(E - set(seen)):
        viol.append(f"arc {e[0]}->{e[1]} is not covered")
    return VerifyReport(not viol, tuple(viol), tuple(balance), tuple(ells))


# blow-up C4 assembly ----------------------------------------------------
def blowup_c4_hamilton(
    D: Iterable[Arc],
    ctx: FeasibilityContext,
    F: Iterable[Arc] = (),
    seed: int = 0,
    restarts: int = 20,
    budget: SearchBudget | None = None,
) -> list[int] | None:
    """A Hamilton cycle containing the feasible system F, using forward arcs of D otherwise.

    Matchings U1->U2, U2->U3, U3->U4 complete F to paths from U1 to U4; the
    paths are contracted onto their ends and joined by arcs U4->U1 through an
    exact Hamilton search. Each restart reshuffles the matching order.
    """
    F = frozenset(F)
    v = check_feasible(F, ctx)
    if not v:
        raise InvalidArgument(f"required system is not feasible: {v.violation}")
    Dset = set(D)
    for e in Dset:
        if not ctx.is_forward(e):
            raise InvalidArgument(f"host arc {e} is not forward")
    if Dset & F:
        raise InvalidArgument("host and required system share arcs")
    U = ctx.partition.parts
    rng = random.Random(seed)
    for _ in range(max(1, restarts)):
        if budget is not None:
            budget.tick()
        C = _assemble(Dset, F, U, rng, budget)
        if C is not None:
            if not F <= cycle_arcs(C) or not cycle_arcs(C) <= Dset | F:
                raise InvariantViolation("assembled cycle leaves the host or misses F")
            return C
    return None


def _assemble(D: set[Arc], F: frozenset[Arc], U, rng: random.Random, budget) -> list[int] | None:
    succ = dict(F)
    pred = {v: u for u, v in F}
    for j in range(3):
        left = [u for u in sorted(U[j]) if u not in succ]
        right = {v for v in U[j + 1] if v not in pred}
        if len(left) != len(right):
            return None
        rng.shuffle(left)
        adj = {}
        for u in left:
            nb = [v for v in sorted(right) if (u, v) in D]
            rng.shuffle(nb)
            adj[u] = nb
        M = max_matching(left, adj)
        if len(M) != len(left):
            return None
        for u, v in M.items():
            succ[u] = v
            pred[v] = u
    arcs = list(succ.items())
    if not is_linear_forest(arcs):
        return None
    heads = set(pred)
    starts = [v for v in sorted(set().union(*U)) if v not in heads]
    # each path must run from U1 to U4
    ends_of: dict[int, int] = {}
    for s in starts:
        x = s
        while x in succ:
            x = succ[x]
        ends_of[s] = x
    if any(s not in U[0] for s in ends_of) or any(e not in U[3] for e in ends_of.values()):
        return None
    paths = {}
    for s in starts:
        p = [s]
        while p[-1] in succ:
            p.append(succ[p[-1]])
        paths[ends_of[s]] = p
    # contract: start b is matched to the end a of its path
    M = ContractionMap.from_pairs({s: ends_of[s] for s in starts})
    links = [(a, b) for a in sorted(ends_of.values()) for b in sorted(starts) if (a, b) in D or (a, b) in F]
    H = contract(links, M)
    ends = sorted(ends_of.values())
    if len(ends) == 1:
        a = ends[0]
        s = paths[a][0]
        if (a, s) not in D and (a, s) not in F:
            return None
        cyc = paths[a]
    else:
        order = exact_hamilton(H, vertices=ends, seed=rng.randrange(1 << 30), budget=budget)
        if order is None:
            return None
        lifted = close_hamilton(order, M)  # a0, b1, a1, b2, ...
        cyc = []
        for i in range(1, len(lifted), 2):
            cyc.extend(paths[M.partner[lifted[i]]])
    s = cyc.index(min(cyc))
    return cyc[s:] + cyc[:s]


# decomposition driver ---------------------------------------------------
@dataclass
class DecompositionReport:
    cycles: list[frozenset[Arc]]
    status: str
    diagnostics: dict = field(default_factory=dict)
    residual: frozenset[Arc] = frozenset()
    systems: list[frozenset[Arc]] = field(default_factory=list)
    certificate: ExpansionCertificate | None = None
    partition: QuadPartition | None = None


def _peel_expander(
    R: frozenset[Arc],
    A: list[int],
    B: list[int],
    rng: random.Random,
    budget: SearchBudget,
    attempts: int,
    found: list[list[int]],
) -> bool:
    """Remove Hamilton cycles one at a time; True once R is empty."""
    if not R:
        return True
    V = sorted(A + B)
    deg = len(R) // len(V)
    if deg <= 3:
        for C in hamilton_cycles(R, through=min(R), vertices=V, budget=budget):
            found.append(C)
            if _peel_expander(R - cycle_arcs(C), A, B, rng, budget, attempts, found):
                return True
            found.pop()
        return False
    Aset = set(A)
    for _ in range(attempts):
        budget.tick()
        left = list(B)
        rng.shuffle(left)
        adj = {}
        for b in left:
            nb = [a for a in A if (b, a) in R]
            rng.shuffle(nb)
            adj[b] = nb
        M = max_matching(left, adj)
        if len(M) != len(B):
            return False
        cm = ContractionMap.from_pairs(M)
        H = contract([(a, b) for a, b in R if a in Aset], cm)
        order = exact_hamilton(H, vertices=A, seed=rng.randrange(1 << 30), budget=budget)
        if order is None:
            continue
        C = close_hamilton(order, cm)
        E = cycle_arcs(C)
        if not E <= R:
            raise InvariantViolation("lifted cycle leaves the residual digraph")
        found.append(C)
        if _peel_expander(R - E, A, B, rng, budget, attempts, found):
            return True
        found.pop()
    return False


def _close_branch(T: Digraph, params: Params, mode: str, seed: int, budget: SearchBudget, diag: dict):
    U = optimal_partition(T, mode)
    X = exceptional_set(T, U, params.eps_prime)
    ctx = FeasibilityContext(T, U, X, params.gamma)
    systems = decompose_backward_and_exceptional(T, ctx, eps=params.eps)
    diag["exceptional"] = sorted(X.members)
    reserved = set().union(*systems) if systems else set()
    forward = {e for e in T.arcs() if ctx.is_forward(e)} - reserved
    rng = random.Random(seed)
    cycles: list[list[int]] = []

    def rec(i: int, avail: set[Arc]) -> bool:
        if i == len(systems):
            return not avail
        if i == len(systems) - 1:
            C = cycle_order(set(avail) | systems[i])
            if C is not None and len(C) == T.n_vertices:
                cycles.append(C)
                return True
            return False
        for _ in range(8):
            C = blowup_c4_hamilton(avail, ctx, systems[i], seed=rng.randrange(1 << 30), restarts=4, budget=budget)
            if C is None:
                return False
            cycles.append(C)
            if rec(i + 1, avail - cycle_arcs(C)):
                return True
            cycles.pop()
        return False

    ok = rec(0, forward)
    return ok, cycles, systems, U


def decompose_tournament(
    T: Digraph,
    params: Params | None = None,
    seed: int = 0,
    cap: int = 32,
    fallback: int = 16,
    budget: int = 10**5,
    mode: str | None = None,
) -> DecompositionReport:
    """Hamilton decomposition of a regular bipartite tournament by the two-case strategy.

    The classifier picks the branch; either branch searches with a shared
    node budget, and instances with at most ``fallback`` vertices fall back
    to complete search, which can also certify that no decomposition exists.
    """
    params = params or Params()
    n = _require_bitournament(T)
    if T.n_vertices > cap:
        raise SizeLimit(f"decomposition capped at {cap} vertices, got {T.n_vertices}")
    mode = mode or ("exact" if 2 * n <= 12 else "local")
    cert = classify_two_cases(T, params.nu_prime, params.tau)
    diag: dict = {"branch": cert.kind, "notes": []}
    B = SearchBudget(budget)
    cycles: list[list[int]] = []
    systems: list[frozenset[Arc]] = []
    U = None
    ok = False
    try:
        if cert.kind == CLOSE:
            ok, cycles, systems, U = _close_branch(T, params, mode, seed, B, diag)
        else:
            A = list(bits(T.side_mask(0)))
            Bs = list(bits(T.side_mask(1)))
            ok = _peel_expander(frozenset(T.arcs()), A, Bs, random.Random(seed), B, 12, cycles)
    except (HypothesisError, StageFailure, Infeasible) as exc:
        diag["notes"].append(f"{type(exc).__name__}: {exc}")
        cycles, ok = [], False
    except BudgetExhausted:
        diag["notes"].append(f"search budget of {budget} nodes exhausted")
        ok = False
    diag["budget_used"] = B.used
    if U is None:
        U = optimal_partition(T, mode)
    status = "complete" if ok else "partial"
    if not ok and T.n_vertices <= fallback:
        diag["notes"].append("whole-instance exhaustive search")
        diag["fallback"] = True
        res = exhaustive_decomposition(T, cap=fallback)
        if res is None:
            status, cycles = "infeasible", []
        else:
            status, cycles = "complete", res
    cyc_sets = [cycle_arcs(C) for C in cycles]
    used = set().union(*cyc_sets) if cyc_sets else set()
    residual = frozenset(set(T.arcs()) - used)
    rep = verify_decomposition(T, cyc_sets, U) if status == "complete" else None
    if rep is not None and not rep.ok:
        raise InvariantViolation("decomposition failed verification: " + "; ".join(rep.violations))
    diag["balance"] = [list(cycle_balance(c, U)) for c in cyc_sets]
    diag["ell"] = [cycle_ell(C, U) for C in cycles]
    return DecompositionReport(
        cycles=cyc_sets,
        status=status,
        diagnostics=diag,
        residual=residual if status == "partial" else frozenset(),
        systems=systems,
        certificate=cert,
        partition=U,
    )
