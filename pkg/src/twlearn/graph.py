"""Graph types and treewidth machinery.

Nodes are dense integer indices ``0..n-1``. Every value here is immutable
once constructed; operations return new objects.
"""

from __future__ import annotations

from itertools import combinations
from typing import Iterable, Sequence

from .errors import InstanceTooLarge

TREEWIDTH_EXACT_LIMIT = 16


def _norm_edge(u: int, v: int) -> tuple[int, int]:
    return (u, v) if u < v else (v, u)


class UndirectedGraph:
    """Simple undirected graph on ``range(n)``."""

    __slots__ = ("n", "edges", "adj")

    def __init__(self, n: int, edges: Iterable[tuple[int, int]] = ()):
        if n < 0:
            raise ValueError("node count must be non-negative")
        norm = set()
        adj = [set() for _ in range(n)]
        for u, v in edges:
            u, v = int(u), int(v)
            if u == v:
                raise ValueError(f"self-loop on node {u}")
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"edge ({u}, {v}) out of range for n={n}")
            norm.add(_norm_edge(u, v))
            adj[u].add(v)
            adj[v].add(u)
        self.n = n
        self.edges = frozenset(norm)
        self.adj = tuple(frozenset(a) for a in adj)

    @classmethod
    def complete(cls, n: int) -> "UndirectedGraph":
        return cls(n, combinations(range(n), 2))

    def has_edge(self, u: int, v: int) -> bool:
        return v in self.adj[u]

    def degree(self, u: int) -> int:
        return len(self.adj[u])

    def is_clique(self, nodes: Iterable[int]) -> bool:
        nodes = list(nodes)
        return all(b in self.adj[a] for a, b in combinations(nodes, 2))

    def is_subgraph_of(self, other: "UndirectedGraph") -> bool:
        return self.n == other.n and self.edges <= other.edges

    def __eq__(self, other):
        if not isinstance(other, UndirectedGraph):
            return NotImplemented
        return self.n == other.n and self.edges == other.edges

    def __hash__(self):
        return hash((self.n, self.edges))

    def __repr__(self):
        return f"UndirectedGraph(n={self.n}, edges={sorted(self.edges)})"


class Dag:
    """Directed acyclic graph stored as one parent set per node."""

    __slots__ = ("n", "parents")

    def __init__(self, n: int, parents: Sequence[Iterable[int]] | None = None):
        if parents is None:
            parents = [()] * n
        if len(parents) != n:
            raise ValueError("need exactly one parent set per node")
        ps = []
        for i, p in enumerate(parents):
            p = frozenset(int(j) for j in p)
            if i in p:
                raise ValueError(f"node {i} is its own parent")
            if any(not (0 <= j < n) for j in p):
                raise ValueError(f"parent index out of range for node {i}")
            ps.append(p)
        self.n = n
        self.parents = tuple(ps)
        if topological_order(self) is None:
            raise ValueError("parent relation contains a directed cycle")

    def arcs(self) -> list[tuple[int, int]]:
        """Arcs as ``(parent, child)`` pairs, sorted."""
        return sorted((j, i) for i in range(self.n) for j in self.parents[i])

    def parent_tuple(self, i: int) -> tuple[int, ...]:
        return tuple(sorted(self.parents[i]))

    def __eq__(self, other):
        if not isinstance(other, Dag):
            return NotImplemented
        return self.n == other.n and self.parents == other.parents

    def __hash__(self):
        return hash((self.n, self.parents))

    def __repr__(self):
        return f"Dag(n={self.n}, arcs={self.arcs()})"


def topological_order(d) -> list[int] | None:
    """Kahn's algorithm over ``d.parents``; ``None`` when a cycle exists.

    Accepts anything with ``n`` and ``parents`` so callers can test a
    candidate parent assignment before building a :class:`Dag`.
    """
    n = d.n
    children = [[] for _ in range(n)]
    indeg = [0] * n
    for i in range(n):
        for j in d.parents[i]:
            children[j].append(i)
            indeg[i] += 1
    ready = [i for i in range(n) if indeg[i] == 0]
    ready.reverse()
    out = []
    while ready:
        u = ready.pop()
        out.append(u)
        for c in sorted(children[u], reverse=True):
            indeg[c] -= 1
            if indeg[c] == 0:
                ready.append(c)
    return out if len(out) == n else None


def moral_graph(d: Dag) -> UndirectedGraph:
    edges = set()
    for i in range(d.n):
        ps = sorted(d.parents[i])
        for j in ps:
            edges.add(_norm_edge(i, j))
        for a, b in combinations(ps, 2):
            edges.add((a, b))
    return UndirectedGraph(d.n, edges)


def _check_order(g: UndirectedGraph, order: Sequence[int]) -> list[int]:
    order = [int(v) for v in order]
    if sorted(order) != list(range(g.n)):
        raise ValueError("elimination order must be a permutation of the nodes")
    return order


def eliminate(g: UndirectedGraph, order: Sequence[int]) -> tuple[UndirectedGraph, int]:
    """Eliminate nodes in ``order``; return the filled (chordal) graph and its width.

    The width is the largest number of higher-ordered neighbours any node has
    when it is eliminated.
    """
    order = _check_order(g, order)
    pos = [0] * g.n
    for p, v in enumerate(order):
        pos[v] = p
    adj = [set(a) for a in g.adj]
    fill = set(g.edges)
    width = 0
    for v in order:
        higher = [u for u in adj[v] if pos[u] > pos[v]]
        width = max(width, len(higher))
        for a, b in combinations(higher, 2):
            if b not in adj[a]:
                adj[a].add(b)
                adj[b].add(a)
                fill.add(_norm_edge(a, b))
    return UndirectedGraph(g.n, fill), width


def is_perfect_elimination_order(g: UndirectedGraph, order: Sequence[int]) -> bool:
    order = _check_order(g, order)
    pos = [0] * g.n
    for p, v in enumerate(order):
        pos[v] = p
    for v in order:
        higher = [u for u in g.adj[v] if pos[u] > pos[v]]
        if not g.is_clique(higher):
            return False
    return True


def treewidth_exact(g: UndirectedGraph, limit: int = TREEWIDTH_EXACT_LIMIT) -> tuple[int, list[int]]:
    """Exact treewidth by dynamic programming over elimination prefixes.

    ``TW(S) = min_{v in S} max(TW(S - v), Q(S - v, v))`` where ``Q(S, v)`` is
    the number of nodes outside ``S + v`` reachable from ``v`` through ``S``
    (the degree of ``v`` when it is eliminated right after ``S``). Runs in
    ``O(2^n n^2)``; ``limit`` caps ``n``.
    """
    n = g.n
    if n > limit:
        raise InstanceTooLarge(f"treewidth_exact: n={n} exceeds limit {limit}")
    if n == 0:
        return 0, []
    adjm = [0] * n
    for u in range(n):
        for v in g.adj[u]:
            adjm[u] |= 1 << v

    def q_value(s: int, v: int) -> int:
        # nodes outside s+v reachable from v via paths whose interior lies in s
        seen = 1 << v
        frontier = adjm[v]
        out = 0
        while frontier:
            low = frontier & -frontier
            frontier ^= low
            if seen & low:
                continue
            seen |= low
            if s & low:
                frontier |= adjm[low.bit_length() - 1] & ~seen
            else:
                out |= low
        return bin(out).count("1")

    full = (1 << n) - 1
    tw = [0] * (1 << n)
    choice = [0] * (1 << n)
    tw[0] = -1
    for s in range(1, full + 1):
        best = n + 1
        best_v = -1
        rest = s
        while rest:
            low = rest & -rest
            rest ^= low
            v = low.bit_length() - 1
            prev = s ^ low
            val = max(tw[prev], q_value(prev, v))
            if val < best:
                best, best_v = val, v
        tw[s] = best
        choice[s] = best_v
    order = []
    s = full
    while s:
        v = choice[s]
        order.append(v)
        s ^= 1 << v
    order.reverse()
    return max(tw[full], 0), order


def dag_treewidth_at_most(
    d: Dag,
    w: int,
    witness: Sequence[int] | None = None,
    limit: int = TREEWIDTH_EXACT_LIMIT,
) -> bool:
    """Whether the moral graph of ``d`` has treewidth at most ``w``.

    A supplied elimination order that achieves width ``<= w`` settles the
    question without search. Otherwise exact search is used, which raises
    :class:`InstanceTooLarge` above ``limit`` nodes.
    """
    if w >= d.n - 1:
        return True
    mg = moral_graph(d)
    if not mg.edges:
        return w >= 0
    if witness is not None:
        if eliminate(mg, witness)[1] <= w:
            return True
    if d.n > limit:
        raise InstanceTooLarge(
            f"treewidth check on n={d.n} needs a witness order (exact limit {limit})"
        )
    return treewidth_exact(mg, limit=limit)[0] <= w


def max_clique_size_chordal(g: UndirectedGraph, peo: Sequence[int]) -> int:
    """Largest clique of a chordal graph given a perfect elimination order."""
    pos = {v: p for p, v in enumerate(peo)}
    best = 1 if g.n else 0
    for v in peo:
        best = max(best, 1 + sum(1 for u in g.adj[v] if pos[u] > pos[v]))
    return best
