"""Command-line front end: ``bitour gen`` and ``bitour run``.

Exit codes: 0 success, 1 verification failed, 2 usage or parse error,
3 unmet hypothesis / infeasible instance / stage failure / size limit,
4 internal invariant violation.
"""

from __future__ import annotations

import hashlib
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import click

from .digraph import (
    Digraph,
    Params,
    make_blowup_cycle,
    one_flipped_c4,
    random_regular_bitournament,
    tripartite_counterexample,
)
from .errors import HypothesisError, Infeasible, InvalidArgument, InvariantViolation, SizeLimit, StageFailure
from .feasible import FeasibilityContext, decompose_backward_and_exceptional
from .hamilton import classify_two_cases, cycle_order, decompose_tournament, verify_decomposition
from .partition import QuadPartition, backward_edges, check_regular_balance, exceptional_set, optimal_partition


class ParseError(InvalidArgument):
    """Malformed edge-list or report file."""


# edge-list files ----------------------------------------------------------
def parse_edge_list(text: str) -> Digraph:
    header = None
    classes: dict[int, int] = {}
    arcs: list[tuple[int, int]] = []
    seen: set[tuple[int, int]] = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        try:
            if header is None:
                if tok[0] != "bitour" or len(tok) != 3:
                    raise ParseError(f"line {lineno}: expected 'bitour <n_vertices> <n_classes>'")
                header = (int(tok[1]), int(tok[2]))
                if header[0] < 0 or header[1] < 1:
                    raise ParseError(f"line {lineno}: bad header values")
            elif tok[0] == "class":
                if len(tok) != 3:
                    raise ParseError(f"line {lineno}: expected 'class <vertex> <class>'")
                v, c = int(tok[1]), int(tok[2])
                if v in classes:
                    raise ParseError(f"line {lineno}: class of vertex {v} given twice")
                classes[v] = c
            else:
                if len(tok) != 2:
                    raise ParseError(f"line {lineno}: expected '<u> <v>'")
                u, v = int(tok[0]), int(tok[1])
                if u == v:
                    raise ParseError(f"line {lineno}: loop at vertex {u}")
                if (u, v) in seen:
                    raise ParseError(f"line {lineno}: duplicate edge {u} {v}")
                seen.add((u, v))
                arcs.append((u, v))
        except ValueError as exc:
            if isinstance(exc, ParseError):
                raise
            raise ParseError(f"line {lineno}: {exc}") from exc
    if header is None:
        raise ParseError("missing header line")
    n, k = header
    if sorted(classes) != list(range(n)):
        raise ParseError("every vertex 0..N-1 needs exactly one class line")
    for v, c in classes.items():
        if not 1 <= c <= k:
            raise ParseError(f"class {c} of vertex {v} outside 1..{k}")
    try:
        D = Digraph.from_arcs(n, arcs, [classes[v] for v in range(n)], k)
    except InvalidArgument as exc:
        raise ParseError(str(exc)) from exc
    complete = n > 0 and all((D.out_adj[u] | D.in_adj[u]) == D.cross_mask(u) for u in range(n))
    return D.with_arcs(arcs, tournament=True) if complete else D


def format_edge_list(D: Digraph) -> str:
    lines = [f"bitour {D.n_vertices} {D.n_classes}"]
    lines += [f"class {v} {c}" for v, c in enumerate(D.classes)]
    lines += [f"{u} {v}" for u, v in D.arcs()]
    return "\n".join(lines) + "\n"


def instance_hash(D: Digraph) -> str:
    """Stable 64-bit hash of the canonical edge list, as 16 hex digits."""
    return hashlib.sha256(format_edge_list(D).encode()).hexdigest()[:16]


# tasks --------------------------------------------------------------------
def _arcs_json(arcs) -> list[list[int]]:
    return [[int(u), int(v)] for u, v in sorted(arcs)]


def _cycle_json(arcs) -> list[list[int]]:
    order = cycle_order(arcs)
    if order is None:
        return _arcs_json(arcs)
    k = len(order)
    return [[order[i], order[(i + 1) % k]] for i in range(k)]


def _report(T: Digraph, params: Params, seed: int, task: str) -> dict:
    return {
        "instance_hash": instance_hash(T),
        "params": {**params.as_dict(), "seed": seed, "task": task},
        "certificate": None,
        "systems": [],
        "cycles": [],
        "diagnostics": {},
    }


def run_task(task: str, T: Digraph, params: Params, seed: int = 0, mode: str | None = None, cap: int = 32, prior: dict | None = None) -> tuple[dict, int]:
    """Run one task on one instance; returns (report, exit code)."""
    rep = _report(T, params, seed, task)
    d = rep["diagnostics"]
    code = 0
    n = T.n_vertices // 4
    pmode = mode or ("exact" if 2 * n <= 12 else "local")
    if task == "partition":
        U = optimal_partition(T, pmode)
        bal = check_regular_balance(T, U)
        d["partition"] = U.as_lists()
        d["backward"] = len(backward_edges(T, U))
        d["backward_edges"] = _arcs_json(backward_edges(T, U))
        d["balance"] = {"ok": bal.ok, "backward_per_pair": bal.backward_count, "violation": bal.violation}
    elif task == "classify":
        rep["certificate"] = classify_two_cases(T, params.nu_prime, params.tau).as_dict()
    elif task == "systems":
        U = optimal_partition(T, pmode)
        X = exceptional_set(T, U, params.eps_prime)
        ctx = FeasibilityContext(T, U, X, params.gamma)
        systems = decompose_backward_and_exceptional(T, ctx, eps=params.eps)
        rep["systems"] = [_arcs_json(s) for s in systems]
        d["partition"] = U.as_lists()
        d["exceptional"] = sorted(X.members)
    elif task == "decompose":
        res = decompose_tournament(T, params, seed=seed, cap=cap, mode=mode)
        rep["certificate"] = res.certificate.as_dict() if res.certificate else None
        rep["systems"] = [_arcs_json(s) for s in res.systems]
        rep["cycles"] = [_cycle_json(c) for c in res.cycles]
        d.update(res.diagnostics)
        d["status"] = res.status
        d["partition"] = res.partition.as_lists() if res.partition else None
        d["residual"] = _arcs_json(res.residual)
        if res.status != "complete":
            code = 3
    elif task == "verify":
        if prior is None:
            raise click.UsageError("verify needs --report with a prior report file")
        viol = []
        if prior.get("instance_hash") != rep["instance_hash"]:
            viol.append("instance hash does not match the report")
        try:
            cycles = [[(int(a[0]), int(a[1])) for a in c] for c in prior.get("cycles", [])]
            parts = (prior.get("diagnostics") or {}).get("partition")
            U = QuadPartition.of(parts) if parts else None
        except (TypeError, ValueError, IndexError) as exc:
            raise ParseError(f"malformed report: {exc}") from exc
        vr = verify_decomposition(T, cycles, U)
        viol.extend(vr.violations)
        d["verify"] = {**vr.as_dict(), "ok": not viol, "violations": viol}
        if viol:
            code = 1
    else:
        raise click.UsageError(f"unknown task {task!r}")
    return rep, code


def _dump(rep: dict) -> str:
    return json.dumps(rep, sort_keys=True, indent=2) + "\n"


def _run_file(args) -> tuple[str, int, str]:
    """Worker: returns (json text, exit code, error message)."""
    task, path, params, seed, mode, cap, prior = args
    try:
        T = parse_edge_list(Path(path).read_text())
        rep, code = run_task(task, T, params, seed, mode, cap, prior)
        return _dump(rep), code, ""
    except ParseError as exc:
        return "", 2, f"parse error: {exc}"
    except HypothesisError as exc:
        return "", 3, f"hypothesis failed: {exc.hypothesis}: {exc.detail}"
    except StageFailure as exc:
        return "", 3, f"stage {exc.stage} failed: {exc.detail}"
    except (Infeasible, SizeLimit) as exc:
        return "", 3, f"{type(exc).__name__}: {exc}"
    except InvalidArgument as exc:
        return "", 3, f"invalid input: {exc}"
    except InvariantViolation as exc:
        return "", 4, f"internal invariant violated: {exc}"
    except Exception as exc:  # any other escape is a bug in the package
        return "", 4, f"internal error: {type(exc).__name__}: {exc}"


# click wiring -------------------------------------------------------------
@click.group()
def main() -> None:
    """Hamilton decompositions of regular bipartite tournaments."""


@main.command()
@click.argument("kind", type=click.Choice(["blowup", "flipped", "random", "tripartite"]))
@click.option("--n", "n", type=int, required=True, help="class size")
@click.option("--flips", type=int, default=0, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="output file (default stdout)")
def gen(kind: str, n: int, flips: int, seed: int, out: str | None) -> None:
    """Write an instance as an edge-list file."""
    try:
        if kind == "blowup":
            D = make_blowup_cycle(4, n)
        elif kind == "flipped":
            D = one_flipped_c4(n)
        elif kind == "random":
            D = random_regular_bitournament(n, flips, seed)
        else:
            D = tripartite_counterexample(n)
    except InvalidArgument as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    text = format_edge_list(D)
    if out:
        Path(out).write_text(text)
    else:
        click.echo(text, nl=False)


@main.command()
@click.argument("task", type=click.Choice(["partition", "classify", "decompose", "verify", "systems"]))
@click.argument("inputs", nargs=-1, required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(), default=None, help="report file, or directory for several inputs")
@click.option("--report", "prior_path", type=click.Path(exists=True, dir_okay=False), default=None, help="prior report (verify)")
@click.option("--eps", default="1/10", show_default=True)
@click.option("--eps-prime", default="1/5", show_default=True)
@click.option("--gamma", default="1/4", show_default=True)
@click.option("--nu", default="1/20", show_default=True)
@click.option("--nu-prime", default="1/100", show_default=True)
@click.option("--tau", default="3/10", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--jobs", type=int, default=1, show_default=True)
@click.option("--cap", type=int, default=32, show_default=True, help="vertex cap for decomposition")
@click.option("--mode", type=click.Choice(["exact", "local"]), default=None, help="partition search mode")
def run(task, inputs, out, prior_path, eps, eps_prime, gamma, nu, nu_prime, tau, seed, jobs, cap, mode) -> None:
    """Run TASK on one or more edge-list files and emit JSON reports."""
    from fractions import Fraction

    try:
        params = Params(*(Fraction(x) for x in (eps, eps_prime, gamma, nu, nu_prime, tau)))
    except (ValueError, ZeroDivisionError, InvalidArgument) as exc:
        raise click.UsageError(f"bad parameter: {exc}")
    prior = None
    if task == "verify":
        if prior_path is None:
            raise click.UsageError("verify needs --report")
        try:
            prior = json.loads(Path(prior_path).read_text())
        except json.JSONDecodeError as exc:
            click.echo(f"error: parse error: report is not JSON: {exc}", err=True)
            sys.exit(2)
    jobs_args = [(task, p, params, seed, mode, cap, prior) for p in inputs]
    if jobs > 1 and len(inputs) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_run_file, jobs_args))
    else:
        results = [_run_file(a) for a in jobs_args]
    worst = 0
    multi = len(inputs) > 1
    if multi and out:
        Path(out).mkdir(parents=True, exist_ok=True)
    for path, (text, code, err) in zip(inputs, results):
        if err:
            click.echo(f"error: {path}: {err}" if multi else f"error: {err}", err=True)
        if text:
            if out:
                target = Path(out) / (Path(path).stem + ".json") if multi else Path(out)
                target.write_text(text)
            else:
                click.echo(text, nl=False)
        if code == 1:
            click.echo(f"verification failed for {path}", err=True)
        worst = max(worst, code)
    sys.exit(worst)


if __name__ == "__main__":
    main()
