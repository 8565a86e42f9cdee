"""Command-line interface.

Exit codes: 0 success, 1 infeasible result or refused by a guard, 2 bad input,
130 interrupted before a search started.
"""

from __future__ import annotations

import argparse
import signal
import sys
from pathlib import Path

import numpy as np

from . import bench, milp, network
from .errors import (
    BoundsError,
    ConstantColumnError,
    FormatError,
    InstanceTooLarge,
    MalformedCode,
    MissingVariable,
    NotAKTree,
    ParseError,
    TreewidthExceeded,
    TreewidthTooLarge,
)
from .graph import UndirectedGraph
from .ktree import KTree, count_ktrees, decode, encode, format_code, parse_code, sample_code
from .oracle import brute_force_learn
from .scoring import ScoringConfig, build_score_cache, load_csv, read_scores, write_scores
from .search import learn

EXIT_OK, EXIT_GUARD, EXIT_INPUT = 0, 1, 2

INPUT_ERRORS = (FileNotFoundError, IsADirectoryError, ParseError, FormatError, ConstantColumnError,
                MalformedCode, BoundsError, NotAKTree, MissingVariable)
GUARD_ERRORS = (TreewidthTooLarge, InstanceTooLarge, TreewidthExceeded)


class _Fail(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def _config(args) -> ScoringConfig:
    return ScoringConfig(ess=args.ess, max_in_degree=args.max_parents)


def _scores_from(args):
    if args.scores is not None:
        return read_scores(args.scores)
    data = load_csv(args.data, binarize=args.binarize)
    return build_score_cache(data, _config(args), workers=args.workers)


def _add_input(p, data_too=True):
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--scores", type=Path, help="score cache file")
    if data_too:
        src.add_argument("--data", type=Path, help="CSV data (scores computed on the fly)")
        p.add_argument("--binarize", action="store_true")
        p.add_argument("--ess", type=float, default=1.0)
        p.add_argument("--max-parents", type=int, default=3)


# --------------------------------------------------------------------------
# scores


def cmd_scores(args) -> int:
    data = load_csv(args.data, binarize=args.binarize)
    cache = build_score_cache(data, _config(args), workers=args.workers)
    write_scores(cache, args.out)
    print(f"wrote {cache.family_count()} families for {cache.n} variables to {args.out}")
    return EXIT_OK


# --------------------------------------------------------------------------
# learn


def _terminate(signum, frame):
    raise KeyboardInterrupt


def cmd_learn(args) -> int:
    if args.treewidth < 1:
        raise _Fail(EXIT_INPUT, "treewidth bound must be at least 1")
    scores = _scores_from(args)
    names = scores.names
    if args.method == "milp-emit":
        if args.out is None:
            raise _Fail(EXIT_INPUT, "--out is required for milp-emit")
        milp.export_lp(milp.build_learning_model(scores, args.treewidth), args.out)
        print(f"wrote LP model to {args.out}")
        return EXIT_OK
    if args.method == "oracle":
        res = brute_force_learn(scores, args.treewidth)
        doc = network.from_dag(res.dag, scores, names, args.treewidth, "oracle",
                               iterations=res.enumerated_count)
    else:
        if args.seconds is None and args.iterations is None:
            args.seconds = 60.0
        previous = signal.signal(signal.SIGTERM, _terminate)
        try:
            res = learn(scores, args.treewidth, args.method, iterations=args.iterations,
                        seconds=args.seconds, seed=args.seed, workers=args.workers)
        finally:
            signal.signal(signal.SIGTERM, previous)
        doc = network.from_result(res, scores, names)
    if args.out is not None:
        network.write_network(doc, args.out)
    note = " (interrupted)" if doc.interrupted else ""
    print(f"score {doc.total_score:.6f} iterations {doc.iterations}{note}")
    return EXIT_OK


# --------------------------------------------------------------------------
# milp


def _read_edges(path):
    lines = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines:
        raise FormatError("empty edge-list file", line=1)
    try:
        head = [int(x) for x in lines[0]]
        edges = [(int(a), int(b)) for a, b in lines[1:]]
    except ValueError:
        raise FormatError("edge list must hold integers: 'n [k]' then 'u v' lines") from None
    return head, edges


def _print_dag(dag, names):
    for i in range(dag.n):
        ps = ", ".join(names[p] for p in dag.parent_tuple(i))
        print(f"  {names[i]} <- {{{ps}}}")


def cmd_milp(args) -> int:
    if args.graph is not None:
        (n, *_), edges = _read_edges(args.graph)
        model = milp.build_treewidth_model(UndirectedGraph(n, edges), args.treewidth)
        names = [str(i) for i in range(n)]
        scores = None
    else:
        scores = read_scores(args.scores)
        names = scores.names
        model = milp.build_learning_model(scores, args.treewidth)

    if args.action == "emit":
        if args.out is None:
            sys.stdout.write(milp.lp_text(model))
        else:
            milp.export_lp(model, args.out)
            counts = model.row_counts()
            print(f"wrote {args.out}: {len(model.var_names)} variables, {sum(counts.values())} rows")
            for fam, c in counts.items():
                print(f"  {fam} {c}")
        return EXIT_OK

    if args.action == "check":
        if args.solution is None:
            raise _Fail(EXIT_INPUT, "--solution is required for check")
        a = milp.read_solution(args.solution, model)
        report = milp.check_assignment(model, a)
        print(report.text())
        if not report.feasible:
            return EXIT_GUARD
        if model.kind == milp.LEARNING:
            dag, order = milp.decode_solution(model, a)
            print(f"objective {report.objective:.6f}")
            _print_dag(dag, names)
            if args.out is not None:
                network.write_network(network.from_dag(dag, scores, names, args.treewidth, "milp",
                                                       elimination_order=order), args.out)
        return EXIT_OK

    # solve-tiny
    res = milp.solve_tiny(model, limit=args.limit)
    if res is None:
        print("infeasible")
        return EXIT_GUARD
    a, obj = res
    if args.out is not None:
        milp.write_solution(a, model, args.out)
    if model.kind == milp.LEARNING:
        dag, _ = milp.decode_solution(model, a)
        print(f"objective {obj:.6f}")
        _print_dag(dag, names)
    else:
        chordal, order = milp.decode_chordalization(model, a)
        print("feasible")
        print("order " + " ".join(map(str, order)))
    return EXIT_OK


# --------------------------------------------------------------------------
# ktree


def cmd_ktree(args) -> int:
    if args.action == "count":
        print(count_ktrees(args.n, args.k))
    elif args.action == "sample":
        print(format_code(sample_code(args.n, args.k, np.random.default_rng(args.seed))))
    elif args.action == "decode":
        text = args.code if args.code != "-" else sys.stdin.read()
        t = decode(parse_code(text))
        print(f"{t.n} {t.k}")
        for u, v in sorted(t.graph.edges):
            print(f"{u} {v}")
    else:  # encode
        head, edges = _read_edges(args.edges)
        if len(head) != 2:
            raise FormatError("first line must be 'n k'", line=1)
        n, k = head
        print(format_code(encode(KTree(UndirectedGraph(n, edges), k))))
    return EXIT_OK


# --------------------------------------------------------------------------
# bench


def cmd_bench(args) -> int:
    rows = bench.run_suite(args.suite, progress=(lambda s: print(s, file=sys.stderr)) if args.verbose else None)
    table = bench.format_table(rows)
    sys.stdout.write(table)
    if args.out is not None:
        Path(args.out).write_text(bench.rows_to_json(rows))
    if args.text is not None:
        Path(args.text).write_text(table)
    return EXIT_OK


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="twlearn", description="Bounded-treewidth Bayesian network learning")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scores", help="compute a BDeu score cache from CSV data")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--ess", type=float, default=1.0)
    p.add_argument("--max-parents", type=int, default=3)
    p.add_argument("--binarize", action="store_true")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_scores)

    p = sub.add_parser("learn", help="learn a network under a treewidth bound")
    _add_input(p)
    p.add_argument("--treewidth", type=int, required=True)
    p.add_argument("--method", choices=["v1", "v2", "oracle", "milp-emit"], default="v2")
    budget = p.add_mutually_exclusive_group()
    budget.add_argument("--seconds", type=float)
    budget.add_argument("--iterations", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("milp", help="emit, check or solve the MILP model")
    p.add_argument("action", choices=["emit", "check", "solve-tiny"])
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--scores", type=Path)
    src.add_argument("--graph", type=Path, help="edge list: treewidth-check model instead")
    p.add_argument("--treewidth", type=int, required=True)
    p.add_argument("--solution", type=Path)
    p.add_argument("--out", type=Path)
    p.add_argument("--limit", type=int, default=milp.SOLVE_TINY_LIMIT, help="max binaries for solve-tiny")
    p.set_defaults(func=cmd_milp)

    p = sub.add_parser("ktree", help="k-tree codes")
    ks = p.add_subparsers(dest="action", required=True)
    q = ks.add_parser("count")
    q.add_argument("n", type=int)
    q.add_argument("k", type=int)
    q = ks.add_parser("sample")
    q.add_argument("n", type=int)
    q.add_argument("k", type=int)
    q.add_argument("--seed", type=int, default=0)
    q = ks.add_parser("decode")
    q.add_argument("code", help="'n k | Q | (a,b) ...' or '-' for stdin")
    q = ks.add_parser("encode")
    q.add_argument("edges", type=Path, help="file with 'n k' then one 'u v' per line")
    p.set_defaults(func=cmd_ktree)

    p = sub.add_parser("bench", help="run a benchmark suite")
    p.add_argument("--suite", type=Path, required=True)
    p.add_argument("--out", type=Path, help="JSON table")
    p.add_argument("--text", type=Path, help="plain-text table")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _Fail as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except GUARD_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except KeyboardInterrupt:
        # only reached outside a search; learn itself returns its best so far
        print("interrupted", file=sys.stderr)
        return 130


if __name__ == "__main__":
    sys.exit(main())
