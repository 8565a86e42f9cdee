"""Anytime structure search over sampled k-trees.

Each iteration draws a uniform code, decodes it into a k-tree ``t`` and
then either

* ``v1``: finds the best DAG whose moral graph lies inside ``t``
  (:func:`best_dag_in_ktree_exact`), or
* ``v2``: samples an acyclic orientation of ``t`` (:func:`sample_order`) and
  picks every node's best admissible parent set on its own
  (:func:`greedy_dag_given_order`).

The best structure seen so far is kept; ties keep the earlier one.
"""

from __future__ import annotations

import math
import time
import warnings
import multiprocessing
import signal
from concurrent.futures import ProcessPoolExecutor, wait
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations, permutations, product
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .errors import TreewidthTooLarge
from .graph import Dag
from .kernels import insert_bit
from .ktree import (
    CliqueTree,
    DandelionCode,
    KTree,
    clique_tree,
    complete_ktree,
    decode,
    iter_codes,
    sample_code,
)

EXACT_K_LIMIT = 8


# --------------------------------------------------------------------------
# Partial orders (acyclic orientations of a k-tree)


@dataclass(frozen=True, eq=False)
class PartialOrder:
    """Acyclic orientation of every edge of ``base``.

    ``pred[i]`` holds the neighbours of ``i`` that precede it.
    """

    base: KTree
    pred: tuple

    def arcs(self) -> frozenset:
        return frozenset((u, v) for v in range(self.base.n) for u in self.pred[v])

    def precedes(self, u: int, v: int) -> bool:
        return u in self.pred[v]

    def __eq__(self, other):
        if not isinstance(other, PartialOrder):
            return NotImplemented
        return self.base == other.base and self.pred == other.pred

    def __hash__(self):
        return hash(self.pred)


def _orient(t: KTree, ct: CliqueTree, root_perm: Sequence[int], positions: Sequence[int]) -> PartialOrder:
    root = ct.bags[0]
    pred = [set() for _ in range(t.n)]
    ranked_root = [root[p] for p in root_perm]
    for r, v in enumerate(ranked_root):
        pred[v].update(ranked_root[:r])
    for (v, clique), pos in zip(ct.attach_order, positions):
        members = set(clique)
        ranked = sorted(clique, key=lambda u: len(pred[u] & members))
        pred[v].update(ranked[:pos])
        for u in ranked[pos:]:
            pred[u].add(v)
    return PartialOrder(t, tuple(frozenset(p) for p in pred))


def sample_order(t: KTree, ct: CliqueTree, rng: np.random.Generator) -> PartialOrder:
    """Random acyclic orientation built along the clique tree.

    The root clique gets a uniform total order; every later node is placed
    uniformly among the ``k+1`` slots of the ordered clique it attaches to.
    """
    k1 = len(ct.bags[0])
    root_perm = rng.permutation(k1)
    positions = rng.integers(0, t.k + 1, size=len(ct.attach_order))
    return _orient(t, ct, root_perm, positions)


def enumerate_orders(t: KTree, ct: CliqueTree):
    """All ``(k+1)! (k+1)^(n-k-1)`` orientations :func:`sample_order` can return."""
    k1 = len(ct.bags[0])
    for root_perm in permutations(range(k1)):
        for positions in product(range(t.k + 1), repeat=len(ct.attach_order)):
            yield _orient(t, ct, root_perm, positions)


def order_space_size(n: int, k: int) -> int:
    return math.factorial(k) * (k + 1) ** (n - k)


# --------------------------------------------------------------------------
# Greedy selection for a fixed orientation


def _candidate_sets(i: int, t: KTree, ct: CliqueTree, sigma: PartialOrder, max_size: int):
    pred = sigma.pred[i]
    seen = set()
    for b in ct.vertex_bags[i]:
        pool = tuple(u for u in ct.bags[b] if u in pred)
        for size in range(min(max_size, len(pool)) + 1):
            for ps in combinations(pool, size):
                if ps not in seen:
                    seen.add(ps)
                    yield ps


def admissible_families(i: int, t: KTree, sigma: PartialOrder, scores, ct: CliqueTree | None = None):
    """Candidate parent sets of ``i`` that sit in a clique of ``t`` with ``i``
    and precede ``i`` under ``sigma``, as sorted ``(parents, score)`` pairs."""
    if ct is None:
        ct = clique_tree(t)
    out = []
    for ps in _candidate_sets(i, t, ct, sigma, scores.max_in_degree):
        s = scores.local(i, ps)
        if s is not None:
            out.append((ps, s))
    out.sort()
    return out


def _better(s: float, ps: tuple, best_s: float, best_ps) -> bool:
    return s > best_s or (s == best_s and (best_ps is None or ps < best_ps))


def _admissible(ps: tuple, pred: frozenset, adj) -> bool:
    for a in ps:
        if a not in pred:
            return False
    for a, b in combinations(ps, 2):
        if b not in adj[a]:
            return False
    return True


def greedy_dag_given_order(t: KTree, sigma: PartialOrder, scores, ct: CliqueTree | None = None):
    """Best admissible parent set for every node independently.

    With a full cache the families are scanned best first and the first
    admissible one is taken: a set of predecessors that is pairwise adjacent
    is a clique of ``t`` together with the node.
    """
    ranked = getattr(scores, "ranked", None)
    if ranked is None and ct is None:
        ct = clique_tree(t)
    adj = t.graph.adj
    parents = []
    total = 0.0
    for i in range(t.n):
        pred = sigma.pred[i]
        if ranked is not None:
            for ps, best_s in ranked(i):
                if _admissible(ps, pred, adj):
                    best_ps = ps
                    break
        else:
            best_s, best_ps = -math.inf, None
            for ps in _candidate_sets(i, t, ct, sigma, scores.max_in_degree):
                s = scores.local(i, ps)
                if s is not None and _better(s, ps, best_s, best_ps):
                    best_s, best_ps = s, ps
        parents.append(best_ps)
        total += best_s
    return Dag(t.n, parents), total


# --------------------------------------------------------------------------
# Exact best DAG inside a k-tree


@lru_cache(maxsize=None)
def _dp_tables(k: int):
    k1 = k + 1
    nmask = 1 << k1
    perms1 = list(permutations(range(k1)))
    permsk = {p: i for i, p in enumerate(permutations(range(k)))}
    nf = len(perms1)
    # pm[f, p]: mask of bag positions ranked before position p under order f
    pm = np.zeros((nf, k1), dtype=np.int64)
    for f, order in enumerate(perms1):
        mask = 0
        for pos in order:
            pm[f, pos] = mask
            mask |= 1 << pos
    # restrict[a, f]: index of order f with position a removed (k-element order)
    restrict = np.zeros((k1, nf), dtype=np.int64)
    for a in range(k1):
        for f, order in enumerate(perms1):
            sub = tuple(p if p < a else p - 1 for p in order if p != a)
            restrict[a, f] = permsk[sub]
    groups = np.stack([np.argsort(restrict[a], kind="stable").reshape(len(permsk), k1) for a in range(k1)])
    with_bit = np.array([[insert_bit(g, a, 1) for g in range(1 << k)] for a in range(k1)], dtype=np.int64)
    # submasks[M] lists every submask of M, padded with the sentinel slot nmask
    submasks = np.full((nmask, nmask), nmask, dtype=np.int64)
    for mask in range(nmask):
        subs = [x for x in range(mask + 1) if x & mask == x]
        submasks[mask, :len(subs)] = subs
    bits = np.array([[(m >> p) & 1 for m in range(nmask)] for p in range(k1)], dtype=float)
    return perms1, pm, restrict, groups, with_bit, submasks, bits


@lru_cache(maxsize=None)
def _position_subsets(k1: int, p: int, max_size: int):
    others = [q for q in range(k1) if q != p]
    out = []
    for size in range(min(max_size, len(others)) + 1):
        for sub in combinations(others, size):
            out.append((sum(1 << q for q in sub), sub))
    return tuple(out)


def _subset_table(scores, v: int, bag: tuple, p: int, max_size: int, submasks) -> np.ndarray:
    """``tab[mask]`` = best score of ``v`` over candidate parent sets inside ``mask``."""
    k1 = len(bag)
    raw = np.full((1 << k1) + 1, -np.inf)
    local = scores.local
    for mask, sub in _position_subsets(k1, p, max_size):
        s = local(v, tuple([bag[q] for q in sub]))
        if s is not None:
            raw[mask] = s
    return raw[submasks].max(axis=1)


def _best_within(scores, v: int, bag: tuple, pred_mask: int, max_size: int):
    pool = [bag[q] for q in range(len(bag)) if pred_mask >> q & 1]
    best_s, best_ps = -math.inf, None
    for size in range(min(max_size, len(pool)) + 1):
        for ps in combinations(pool, size):
            s = scores.local(v, ps)
            if s is not None and _better(s, ps, best_s, best_ps):
                best_s, best_ps = s, ps
    return best_ps, best_s


def best_dag_in_ktree_exact(t: KTree, ct: CliqueTree | None, scores, k_limit: int = EXACT_K_LIMIT):
    """Highest-scoring DAG whose moral graph is a subgraph of ``t``.

    Dynamic programming over the clique tree, leaves first. A bag state is a
    total order of the bag plus the set of bag nodes whose parent set has
    already been charged somewhere in the subtree. Every node is charged
    exactly once, at some bag that contains it, with a parent set drawn from
    its predecessors in that bag's order. Adjacent bags agree on the order of
    their shared nodes, so the bag orders glue into one acyclic orientation
    of ``t``.
    """
    k = t.k
    if k > k_limit:
        raise TreewidthTooLarge(
            f"exact search inside a {k}-tree exceeds the limit k <= {k_limit}; use method v2"
        )
    if ct is None:
        ct = clique_tree(t)
    d = scores.max_in_degree
    perms1, pm, restrict, groups, with_bit, submasks, bits = _dp_tables(k)
    k1 = k + 1
    nmask = 1 << k1
    nbags = len(ct.bags)
    children = ct.children

    def missing_pos(bag, other):
        other = set(other)
        for p, v in enumerate(bag):
            if v not in other:
                return p
        raise AssertionError("adjacent bags must differ in one node")

    folds = [[] for _ in range(nbags)]
    msg = [None] * nbags
    msg_arg = [None] * nbags
    up_pos = [None] * nbags
    root_table = None
    for x in reversed(range(nbags)):
        bag = ct.bags[x]
        own = np.empty((len(perms1), k1))
        for p, v in enumerate(bag):
            own[:, p] = _subset_table(scores, v, bag, p, d, submasks)[pm[:, p]]
        acc = own @ bits
        for c in children[x]:
            b = missing_pos(bag, ct.bags[c])
            acc, arg = kernels.fold_child(acc, msg[c][restrict[b]], b)
            folds[x].append((c, b, arg))
            msg[c] = None
        if x == 0:
            root_table = acc
        else:
            a = missing_pos(bag, ct.bags[ct.parent[x]])
            vals = acc[groups[a]][:, :, with_bit[a]]
            am = vals.argmax(axis=1)
            msg[x] = vals.max(axis=1)
            msg_arg[x] = am
            up_pos[x] = a

    full = nmask - 1
    f0 = int(np.argmax(root_table[:, full]))
    best_value = float(root_table[f0, full])
    parents: list = [None] * t.n
    stack = [(0, f0, full)]
    while stack:
        x, f, mask = stack.pop()
        for c, b, arg in reversed(folds[x]):
            g = int(arg[f, mask])
            mask ^= insert_bit(g, b, 0)
            s = int(restrict[b, f])
            a = up_pos[c]
            fc = int(groups[a][s, msg_arg[c][s, g]])
            stack.append((c, fc, insert_bit(g, a, 1)))
        bag = ct.bags[x]
        for p in range(k1):
            if mask >> p & 1:
                parents[bag[p]], _ = _best_within(scores, bag[p], bag, int(pm[f, p]), d)
    dag = Dag(t.n, parents)
    total = scores.total(dag)
    if not math.isclose(total, best_value, rel_tol=1e-9, abs_tol=1e-9):
        raise AssertionError(f"traceback score {total} disagrees with table value {best_value}")
    return dag, total


# --------------------------------------------------------------------------
# Anytime loop


METHODS = ("v1", "v2")


@dataclass
class LearnResult:
    dag: Dag
    total_score: float
    method: str
    k: int
    seed: int | None
    iteration: int | None  # index of the winning iteration; None = initial empty DAG
    code: DandelionCode | None
    iterations_run: int
    elimination_order: list
    interrupted: bool = False
    trace: list | None = field(default=None, repr=False)


def _draw_ktree(n: int, k: int, rng):
    if k >= n - 1:
        return None, complete_ktree(n)
    code = sample_code(n, k, rng)
    return code, decode(code)


def _search_in(t: KTree, ct: CliqueTree, scores, method: str, rng, k_limit: int):
    if method == "v1":
        return best_dag_in_ktree_exact(t, ct, scores, k_limit=k_limit)
    sigma = sample_order(t, ct, rng)
    return greedy_dag_given_order(t, sigma, scores, ct)


def _iteration_rng(seed: int, it: int) -> np.random.Generator:
    return np.random.default_rng([seed, it])


@dataclass
class _Best:
    score: float
    iteration: int | None
    dag: Dag
    code: DandelionCode | None
    order: list

    def offer(self, score, it, dag, code, order):
        if score > self.score or (score == self.score and self.iteration is not None
                                  and it < self.iteration):
            self.score, self.iteration, self.dag, self.code, self.order = score, it, dag, code, order
            return True
        return False


def _initial_best(scores) -> _Best:
    n = scores.n
    return _Best(scores.empty_score(), None, Dag(n), None, list(range(n)))


def _run_stream(scores, n, k, method, seed, start, step, iterations, deadline,
                record_trace, k_limit, should_stop=None):
    best = _initial_best(scores)
    trace = [] if record_trace else None
    it = start
    ran = 0
    interrupted = False
    try:
        while True:
            if iterations is not None and it >= iterations:
                break
            if deadline is not None and ran > 0 and time.perf_counter() >= deadline:
                break
            if should_stop is not None and should_stop():
                interrupted = True
                break
            rng = _iteration_rng(seed, it)
            code, t = _draw_ktree(n, k, rng)
            ct = clique_tree(t, check=False)
            dag, score = _search_in(t, ct, scores, method, rng, k_limit)
            if score > best.score:
                best.offer(score, it, dag, code, ct.elimination_order())
            ran += 1
            if trace is not None:
                trace.append(best.score)
            it += step
    except KeyboardInterrupt:
        interrupted = True
    return best, ran, trace, interrupted


_STOP = None


def _init_worker(event):
    global _STOP
    _STOP = event
    # the parent owns Ctrl-C and relays it through the event
    signal.signal(signal.SIGINT, signal.SIG_IGN)


def _worker(args):
    best, ran, _, interrupted = _run_stream(*args, should_stop=_STOP.is_set)
    return best, ran, interrupted


def learn(
    scores,
    k: int,
    method: str = "v2",
    iterations: int | None = None,
    seconds: float | None = None,
    seed: int = 0,
    workers: int = 1,
    record_trace: bool = False,
    should_stop: Callable[[], bool] | None = None,
    k_limit: int = EXACT_K_LIMIT,
    exhaustive: bool = False,
) -> LearnResult:
    """Sample k-trees until the budget runs out and return the best DAG.

    Exactly one of ``iterations`` and ``seconds`` must be given. Iteration
    ``i`` draws from its own stream seeded by ``(seed, i)``, so an iteration
    budget gives the same result for any ``workers``. The clock is checked
    between iterations only. Ctrl-C (or ``should_stop`` returning true) ends
    the run early and still returns the best structure found.

    ``exhaustive=True`` ignores the budget and enumerates every k-tree (and
    every orientation for v2) instead of sampling; see :func:`learn_exhaustive`.
    """
    if exhaustive:
        return learn_exhaustive(scores, k, method, k_limit=k_limit)
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}")
    if (iterations is None) == (seconds is None):
        raise ValueError("give exactly one of iterations and seconds")
    if iterations is not None and iterations < 1:
        raise ValueError("iterations must be positive")
    if seconds is not None and not seconds > 0:
        raise ValueError("seconds must be positive")
    if k < 1:
        raise ValueError("treewidth bound must be at least 1")
    n = scores.n
    if k > n - 1:
        warnings.warn(f"treewidth bound {k} clamped to n-1 = {n - 1}", stacklevel=2)
        k = max(n - 1, 0)
    if method == "v1" and k > k_limit:
        raise TreewidthTooLarge(
            f"v1 is limited to k <= {k_limit} (exponential in k); use v2 for k={k}"
        )
    if n == 1:
        best = _initial_best(scores)
        return LearnResult(best.dag, best.score, method, k, seed, None, None, 0, [0])

    deadline = None if seconds is None else time.perf_counter() + seconds
    if workers <= 1:
        best, ran, trace, interrupted = _run_stream(
            scores, n, k, method, seed, 0, 1, iterations, deadline, record_trace, k_limit, should_stop)
    else:
        jobs = [(scores, n, k, method, seed, w, workers, iterations, deadline, False, k_limit)
                for w in range(workers)]
        best = _initial_best(scores)
        ran = 0
        interrupted = False
        trace = None
        stop = multiprocessing.get_context().Event()
        with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker, initargs=(stop,)) as ex:
            pending = {ex.submit(_worker, job) for job in jobs}
            while pending:
                try:
                    done, pending = wait(pending, timeout=0.2)
                except KeyboardInterrupt:
                    # workers notice the flag between iterations and return their best
                    stop.set()
                    interrupted = True
                    continue
                if should_stop is not None and should_stop():
                    stop.set()
                for fut in done:
                    b, r, intr = fut.result()
                    ran += r
                    interrupted |= intr
                    if b.iteration is not None:
                        best.offer(b.score, b.iteration, b.dag, b.code, b.order)
    return LearnResult(best.dag, best.score, method, k, seed, best.iteration, best.code,
                       ran, best.order, interrupted, trace)


def learn_exhaustive(scores, k: int, method: str = "v2", k_limit: int = EXACT_K_LIMIT) -> LearnResult:
    """Replace sampling by enumeration of every k-tree (and every orientation for v2).

    Only sensible for tiny ``n``; used to check the samplers' coverage.
    """
    n = scores.n
    k = min(k, n - 1)
    best = _initial_best(scores)
    it = 0
    if k >= n - 1:
        codes = [None]
    else:
        codes = iter_codes(n, k)
    for code in codes:
        t = complete_ktree(n) if code is None else decode(code)
        ct = clique_tree(t)
        if method == "v1":
            dag, score = best_dag_in_ktree_exact(t, ct, scores, k_limit=k_limit)
            if score > best.score:
                best.offer(score, it, dag, code, ct.elimination_order())
            it += 1
        else:
            for sigma in enumerate_orders(t, ct):
                dag, score = greedy_dag_given_order(t, sigma, scores, ct)
                if score > best.score:
                    best.offer(score, it, dag, code, ct.elimination_order())
                it += 1
    return LearnResult(best.dag, best.score, method, k, None, best.iteration, best.code,
                       it, best.order)
