"""k-trees, their Dandelion-style codes, and clique trees.

Code space
----------
A code for a k-tree on ``n`` nodes is ``(Q, S)``: ``Q`` is a k-subset of the
nodes and ``S`` a list of ``n-k-2`` pairs, each either ``(0, EPS)`` or
``(a, b)`` with ``1 <= a <= n-k`` and ``1 <= b <= k``. ``EPS`` is stored as
``n``. There are ``C(n,k) * (k(n-k)+1)^(n-k-2)`` codes, one per k-tree.

The map goes through the characteristic tree of the k-tree rooted at ``Q``:

* ``Q`` is the neighbourhood of the largest leaf (degree-k node).
* Nodes outside ``Q`` are renumbered ``1..n-k`` in increasing order; the
  root clique ``Q`` is node 0.
* Node ``v`` hangs below the youngest node ``p`` of the k-clique it was
  attached to (below 0 when that clique is ``Q``). The edge label is the
  1-based position, in the sorted parent clique of ``p``, of the single
  member that ``v``'s clique drops; edges below the root carry ``EPS``.
* The labelled tree is written as a Pruefer sequence that removes the
  largest leaf first. That leaf is always the largest k-tree leaf, whose
  entry is always ``(0, EPS)``; it is dropped, leaving ``n-k-2`` pairs.

Decoding prepends ``(0, EPS)``, inverts the Pruefer sequence and rebuilds the
cliques top-down. Both directions run in ``O(nk log n)``.
"""

from __future__ import annotations

import heapq
import math
import re
from dataclasses import dataclass
from itertools import combinations, product

import numpy as np

from .errors import BoundsError, InstanceTooLarge, MalformedCode, NotAKTree
from .graph import UndirectedGraph

ENUMERATION_LIMIT = 10 ** 5


@dataclass(frozen=True)
class DandelionCode:
    n: int
    k: int
    Q: tuple
    S: tuple

    @property
    def eps(self) -> int:
        return self.n

    def validate(self) -> None:
        n, k = self.n, self.k
        if k < 1 or n < k + 2:
            raise MalformedCode(f"codes need 1 <= k <= n-2 (n={n}, k={k})")
        if len(self.Q) != k or len(set(self.Q)) != k:
            raise MalformedCode("Q must hold k distinct nodes")
        if any(not (0 <= q < n) for q in self.Q):
            raise MalformedCode("Q node out of range")
        if tuple(sorted(self.Q)) != tuple(self.Q):
            raise MalformedCode("Q must be sorted")
        if len(self.S) != n - k - 2:
            raise MalformedCode(f"S must hold n-k-2 = {n - k - 2} pairs")
        for a, b in self.S:
            if a == 0:
                if b != n:
                    raise MalformedCode("pairs with first component 0 must be (0, eps)")
            elif not (1 <= a <= n - k and 1 <= b <= k):
                raise MalformedCode(f"pair ({a}, {b}) outside the code alphabet")

    def __str__(self):
        return format_code(self)


def make_code(n: int, k: int, Q, S) -> DandelionCode:
    c = DandelionCode(int(n), int(k), tuple(sorted(int(q) for q in Q)),
                      tuple((int(a), int(b)) for a, b in S))
    c.validate()
    return c


def format_code(c: DandelionCode) -> str:
    def comp(x):
        return "eps" if x == c.n else str(x)

    q = " ".join(str(x) for x in c.Q)
    s = " ".join(f"({comp(a)},{comp(b)})" for a, b in c.S)
    return f"{c.n} {c.k} | {q} | {s}".rstrip()


_PAIR = re.compile(r"\(\s*([0-9]+|eps)\s*,\s*([0-9]+|eps)\s*\)")


def parse_code(text: str) -> DandelionCode:
    """Parse ``"n k | q1 ... qk | (a1,b1) ... (am,bm)"`` with ``eps`` for epsilon."""
    parts = text.strip().split("|")
    if len(parts) != 3:
        raise MalformedCode("expected 'n k | Q | S'")
    head = parts[0].split()
    if len(head) != 2:
        raise MalformedCode("expected 'n k' before the first '|'")
    try:
        n, k = int(head[0]), int(head[1])
        Q = [int(x) for x in parts[1].split()]
    except ValueError:
        raise MalformedCode("non-integer in code header or Q") from None
    pairs_text = parts[2].strip()
    S = []
    for a, b in _PAIR.findall(pairs_text):
        S.append((n if a == "eps" else int(a), n if b == "eps" else int(b)))
    if _PAIR.sub("", pairs_text).strip():
        raise MalformedCode("unparseable text in S")
    return make_code(n, k, Q, S)


class KTree:
    """A k-tree: a maximal graph of treewidth k."""

    __slots__ = ("graph", "k")

    def __init__(self, graph: UndirectedGraph, k: int, check: bool = True):
        if check and not is_ktree(graph, k):
            raise NotAKTree(f"graph is not a {k}-tree")
        self.graph = graph
        self.k = k

    @property
    def n(self) -> int:
        return self.graph.n

    def __eq__(self, other):
        if not isinstance(other, KTree):
            return NotImplemented
        return self.k == other.k and self.graph == other.graph

    def __hash__(self):
        return hash((self.k, self.graph))

    def __repr__(self):
        return f"KTree(n={self.n}, k={self.k}, edges={len(self.graph.edges)})"


@dataclass(frozen=True)
class CliqueTree:
    """Rooted clique tree of a k-tree.

    ``bags[0]`` is the root (the lexicographically smallest maximal clique);
    bag ``b > 0`` is ``attach_order[b-1][0]`` plus the clique it attaches to.
    Parents always precede their children.
    """

    bags: tuple
    parent: tuple
    attach_order: tuple
    vertex_bags: tuple

    @property
    def children(self):
        ch = [[] for _ in self.bags]
        for b, p in enumerate(self.parent):
            if p is not None:
                ch[p].append(b)
        return ch

    def elimination_order(self) -> list[int]:
        """A perfect elimination order of the k-tree (last attached first)."""
        order = [v for v, _ in reversed(self.attach_order)]
        order.extend(self.bags[0])
        return order


def ktree_edge_count(n: int, k: int) -> int:
    return k * n - k * (k + 1) // 2


def is_ktree(g: UndirectedGraph, k: int) -> bool:
    """Reverse the recursive construction: strip simplicial degree-k nodes."""
    n = g.n
    if k < 0 or n < k + 1:
        return False
    if len(g.edges) != ktree_edge_count(n, k):
        return False
    deg = [len(a) for a in g.adj]
    alive = [True] * n
    heap = [v for v in range(n) if deg[v] == k]
    heapq.heapify(heap)
    remaining = n
    while remaining > k + 1:
        v = None
        while heap:
            cand = heapq.heappop(heap)
            if alive[cand] and deg[cand] == k:
                nb = [u for u in g.adj[cand] if alive[u]]
                if g.is_clique(nb):
                    v = cand
                    break
        if v is None:
            return False
        alive[v] = False
        remaining -= 1
        for u in g.adj[v]:
            if alive[u]:
                deg[u] -= 1
                if deg[u] == k:
                    heapq.heappush(heap, u)
    rest = [v for v in range(n) if alive[v]]
    return g.is_clique(rest)


def count_ktrees(n: int, k: int) -> int:
    """Number of labelled k-trees on n nodes."""
    if k < 0 or n < k + 1:
        raise BoundsError(f"no k-trees for n={n}, k={k}")
    if n == k + 1:
        return 1
    return math.comb(n, k) * (k * (n - k) + 1) ** (n - k - 2)


def _check_nk(n: int, k: int) -> None:
    if k < 1 or k > n - 2:
        raise BoundsError(f"codes need 1 <= k <= n-2 (n={n}, k={k})")


def pair_alphabet_size(n: int, k: int) -> int:
    return k * (n - k) + 1


def pair_from_index(r: int, n: int, k: int) -> tuple[int, int]:
    if r == 0:
        return (0, n)
    r -= 1
    return (r // k + 1, r % k + 1)


def sample_code(n: int, k: int, rng: np.random.Generator) -> DandelionCode:
    """Uniform draw from the code space (hence a uniform k-tree)."""
    _check_nk(n, k)
    Q = tuple(sorted(int(x) for x in rng.choice(n, size=k, replace=False)))
    idx = rng.integers(0, pair_alphabet_size(n, k), size=n - k - 2)
    S = tuple(pair_from_index(int(r), n, k) for r in idx)
    return DandelionCode(n, k, Q, S)


def iter_codes(n: int, k: int):
    """Every code of the space, in a fixed order."""
    _check_nk(n, k)
    alphabet = [pair_from_index(r, n, k) for r in range(pair_alphabet_size(n, k))]
    for Q in combinations(range(n), k):
        for S in product(alphabet, repeat=n - k - 2):
            yield DandelionCode(n, k, Q, S)


def decode(c: DandelionCode) -> KTree:
    c.validate()
    n, k = c.n, c.k
    m = n - k
    Q = c.Q
    qset = set(Q)
    outside = [v for v in range(n) if v not in qset]  # node r <-> outside[r-1]

    seq = [(0, n)] + list(c.S)
    nchild = [0] * (m + 1)
    for a, _ in seq:
        nchild[a] += 1
    heap = [-v for v in range(1, m + 1) if nchild[v] == 0]
    heapq.heapify(heap)
    parent = [0] * (m + 1)
    label = [n] * (m + 1)
    for a, b in seq:
        v = -heapq.heappop(heap)
        parent[v] = a
        label[v] = b
        nchild[a] -= 1
        if a != 0 and nchild[a] == 0:
            heapq.heappush(heap, -a)
    last = -heapq.heappop(heap)
    parent[last] = 0
    label[last] = n

    children = [[] for _ in range(m + 1)]
    for v in range(1, m + 1):
        children[parent[v]].append(v)
    clique = [()] * (m + 1)  # sorted clique each node attaches to (original ids)
    edges = list(combinations(Q, 2))
    stack = [0]
    while stack:
        p = stack.pop()
        for v in children[p]:
            if p == 0:
                cl = Q
            else:
                base = clique[p]
                j = label[v] - 1
                cl = tuple(sorted(base[:j] + base[j + 1:] + (outside[p - 1],)))
            clique[v] = cl
            ov = outside[v - 1]
            edges.extend((ov, u) for u in cl)
            stack.append(v)
    return KTree(UndirectedGraph(n, edges), k, check=False)


def _prune_rooted(g: UndirectedGraph, k: int, root: set):
    """Remove degree-k nodes outside ``root`` until only ``root`` is left.

    Returns the removal order and, for each removed node, the sorted clique
    of neighbours it had when removed. Raises :class:`NotAKTree` when the
    graph does not reduce to ``root``.
    """
    n = g.n
    deg = [len(a) for a in g.adj]
    alive = [True] * n
    heap = [v for v in range(n) if deg[v] == k and v not in root]
    heapq.heapify(heap)
    order = []
    attach = {}
    while heap:
        v = heapq.heappop(heap)
        if not alive[v] or deg[v] != k:
            continue
        nb = tuple(sorted(u for u in g.adj[v] if alive[u]))
        alive[v] = False
        order.append(v)
        attach[v] = nb
        for u in nb:
            deg[u] -= 1
            if deg[u] == k and u not in root:
                heapq.heappush(heap, u)
    if len(order) != n - len(root):
        raise NotAKTree("graph does not reduce to the root clique")
    return order, attach


def encode(t: KTree) -> DandelionCode:
    g, k = t.graph, t.k
    n = g.n
    _check_nk(n, k)
    if not is_ktree(g, k):
        raise NotAKTree(f"graph is not a {k}-tree")
    leaves = [v for v in range(n) if g.degree(v) == k]
    lmax = max(leaves)
    Q = tuple(sorted(g.adj[lmax]))
    qset = set(Q)
    order, attach = _prune_rooted(g, k, qset)
    when = {v: i for i, v in enumerate(order)}
    outside = [v for v in range(n) if v not in qset]
    rank = {v: r for r, v in enumerate(outside, start=1)}
    m = n - k

    parent = [0] * (m + 1)
    label = [n] * (m + 1)
    for v in order:
        cl = attach[v]
        young = [u for u in cl if u not in qset]
        rv = rank[v]
        if not young:
            parent[rv], label[rv] = 0, n
            continue
        p = min(young, key=when.__getitem__)
        base = attach[p]
        dropped = [u for u in base if u not in cl]
        if len(dropped) != 1 or p not in cl:
            raise NotAKTree("inconsistent clique structure")
        parent[rv] = rank[p]
        label[rv] = base.index(dropped[0]) + 1

    nchild = [0] * (m + 1)
    for v in range(1, m + 1):
        nchild[parent[v]] += 1
    heap = [-v for v in range(1, m + 1) if nchild[v] == 0]
    heapq.heapify(heap)
    seq = []
    for _ in range(m - 1):
        v = -heapq.heappop(heap)
        a = parent[v]
        seq.append((a, label[v]))
        nchild[a] -= 1
        if a != 0 and nchild[a] == 0:
            heapq.heappush(heap, -a)
    if seq[0] != (0, n):
        raise AssertionError("largest leaf must hang below the root")
    return DandelionCode(n, k, Q, tuple(seq[1:]))


def complete_ktree(n: int) -> KTree:
    """The (n-1)-tree on n nodes."""
    return KTree(UndirectedGraph.complete(n), n - 1, check=False)


def clique_tree(t: KTree, check: bool = True) -> CliqueTree:
    """Rooted clique tree; ``check=False`` skips re-validating a trusted k-tree."""
    g, k = t.graph, t.k
    n = g.n
    if n == k + 1:
        if not g.is_clique(range(n)):
            raise NotAKTree("graph is not a clique")
        bags = (tuple(range(n)),)
        return CliqueTree(bags, (None,), (), tuple((0,) for _ in range(n)))
    if check and not is_ktree(g, k):
        raise NotAKTree(f"graph is not a {k}-tree")
    # all maximal cliques first, to pick the root
    order, attach = _prune_free(g, k)
    all_bags = [tuple(sorted(attach[v] + (v,))) for v in order]
    rest = tuple(sorted(set(range(n)) - set(order)))
    all_bags.append(rest)
    root = min(all_bags)
    order, attach = _prune_rooted(g, k, set(root))
    when = {v: i for i, v in enumerate(order)}
    bag_of = {}
    bags = [root]
    parent = [None]
    steps = []
    for v in reversed(order):
        cl = attach[v]
        young = [u for u in cl if u not in root]
        pb = bag_of[min(young, key=when.__getitem__)] if young else 0
        bag_of[v] = len(bags)
        bags.append(tuple(sorted(cl + (v,))))
        parent.append(pb)
        steps.append((v, cl))
    vb = [[] for _ in range(n)]
    for b, bag in enumerate(bags):
        for v in bag:
            vb[v].append(b)
    return CliqueTree(tuple(bags), tuple(parent), tuple(steps), tuple(tuple(x) for x in vb))


def _prune_free(g: UndirectedGraph, k: int):
    """Strip smallest degree-k nodes until k+1 nodes are left."""
    n = g.n
    deg = [len(a) for a in g.adj]
    alive = [True] * n
    heap = [v for v in range(n) if deg[v] == k]
    heapq.heapify(heap)
    order = []
    attach = {}
    while len(order) < n - k - 1:
        v = heapq.heappop(heap)
        if not alive[v] or deg[v] != k:
            continue
        nb = tuple(sorted(u for u in g.adj[v] if alive[u]))
        alive[v] = False
        order.append(v)
        attach[v] = nb
        for u in nb:
            deg[u] -= 1
            if deg[u] == k:
                heapq.heappush(heap, u)
    return order, attach


def enumerate_ktrees(n: int, k: int, limit: int = ENUMERATION_LIMIT) -> list[KTree]:
    """All labelled k-trees on n nodes, each exactly once."""
    total = count_ktrees(n, k)
    if total > limit:
        raise InstanceTooLarge(f"{total} k-trees exceed the enumeration limit {limit}")
    if n == k + 1:
        return [complete_ktree(n)]
    return [decode(c) for c in iter_codes(n, k)]


def ktree_for_bound(n: int, k: int) -> int:
    """Clamp a treewidth bound to ``n-1`` (the complete graph)."""
    return min(k, max(n - 1, 0))
