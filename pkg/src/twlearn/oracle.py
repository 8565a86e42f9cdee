"""Brute-force ground truth for tiny instances.

Plain enumeration of one family per node, nodes in index order and each
node's families in sorted order. The first combination reaching the best
score is kept, so ties go to the lexicographically smallest assignment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InstanceTooLarge
from .graph import Dag, UndirectedGraph, treewidth_exact
from .ktree import KTree

ORACLE_LIMIT = 10 ** 8


@dataclass
class OracleResult:
    dag: Dag
    total_score: float
    enumerated_count: int


def _creates_cycle(parents: list, i: int, ps: tuple) -> bool:
    # a cycle through i needs i among the ancestors of one of its new parents
    stack = list(ps)
    seen = set()
    while stack:
        u = stack.pop()
        if u == i:
            return True
        if u in seen or parents[u] is None:
            continue
        seen.add(u)
        stack.extend(parents[u])
    return False


def _moral_edges(i: int, ps: tuple):
    out = [(min(i, j), max(i, j)) for j in ps]
    out.extend((a, b) for k, a in enumerate(ps) for b in ps[k + 1:])
    return out


def _search(cache, allowed, accept):
    """Enumerate acyclic combinations of ``allowed[i]`` families.

    ``accept(edges)`` is asked about the moral edge set of each partial
    combination and must be monotone (a rejected set stays rejected when
    edges are added).
    """
    n = cache.n
    total = 1
    for fams in allowed:
        total *= len(fams)
    if total > ORACLE_LIMIT:
        raise InstanceTooLarge(f"{total} family combinations exceed the oracle limit {ORACLE_LIMIT}")
    parents: list = [None] * n
    best = [-math.inf, None]
    count = 0

    def rec(i, score, edges):
        nonlocal count
        if i == n:
            count += 1
            if score > best[0]:
                best[0], best[1] = score, list(parents)
            return
        for ps, s in allowed[i]:
            if _creates_cycle(parents, i, ps):
                continue
            new_edges = edges.union(_moral_edges(i, ps))
            if new_edges != edges and not accept(new_edges):
                continue
            parents[i] = ps
            rec(i + 1, score + s, new_edges)
            parents[i] = None

    rec(0, 0.0, frozenset())
    dag = Dag(n, best[1])
    return OracleResult(dag, cache.total(dag), count)


def brute_force_learn(cache, w: int) -> OracleResult:
    """Best DAG over the cache whose moral graph has treewidth at most ``w``."""
    n = cache.n
    widths: dict = {}

    def accept(edges):
        if w >= n - 1:
            return True
        tw = widths.get(edges)
        if tw is None:
            tw = widths[edges] = treewidth_exact(UndirectedGraph(n, edges))[0]
        return tw <= w

    allowed = [sorted(fams) for fams in cache.families]
    return _search(cache, allowed, accept)


def brute_force_learn_in_ktree(cache, t: KTree) -> OracleResult:
    """Best DAG over the cache whose moral graph is a subgraph of ``t``."""
    g = t.graph
    allowed = [sorted((ps, s) for ps, s in cache.families[i] if g.is_clique(ps + (i,)))
               for i in range(cache.n)]
    return _search(cache, allowed, lambda edges: edges <= g.edges)
