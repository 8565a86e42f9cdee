from itertools import permutations

import numpy as np
import pytest

from twlearn.errors import InstanceTooLarge
from twlearn.graph import Dag, UndirectedGraph, dag_treewidth_at_most, moral_graph, topological_order
from twlearn.ktree import KTree, complete_ktree, enumerate_ktrees
from twlearn.oracle import brute_force_learn, brute_force_learn_in_ktree
from twlearn.scoring import ScoreCache
from twlearn.synthetic import random_integer_cache


def test_two_nodes_pick_one_arc():
    cache = ScoreCache(["a", "b"], [[((), -2.0), ((1,), -1.0)], [((), -2.0), ((0,), -1.0)]])
    res = brute_force_learn(cache, 1)
    assert res.total_score == -3
    assert res.dag == Dag(2, [[], [0]])  # first node keeps the empty set on the tie
    assert res.enumerated_count == 3


def test_v_structure_rejected_at_width_one():
    fams = [[((), -5.0)], [((), -5.0)], [((), -10.0), ((0,), -9.0), ((1,), -9.0), ((0, 1), -1.0)]]
    cache = ScoreCache(list("abc"), fams)
    assert brute_force_learn(cache, 2).dag == Dag(3, [[], [], [0, 1]])
    res = brute_force_learn(cache, 1)
    assert res.total_score == -19
    assert res.dag == Dag(3, [[], [], [0]])


def test_loose_bound_is_unconstrained():
    rng = np.random.default_rng(0)
    for _ in range(10):
        cache = random_integer_cache(4, 3, rng)
        assert brute_force_learn(cache, 3).total_score == brute_force_learn(cache, 9).total_score


@pytest.mark.parametrize("w", [1, 2])
def test_result_invariants(w):
    rng = np.random.default_rng(w)
    for _ in range(10):
        cache = random_integer_cache(5, 3, rng)
        res = brute_force_learn(cache, w)
        assert dag_treewidth_at_most(res.dag, w)
        assert res.total_score == cache.total(res.dag)


def test_size_guard():
    cache = random_integer_cache(9, 3, np.random.default_rng(0))
    with pytest.raises(InstanceTooLarge):
        brute_force_learn(cache, 2)


def test_in_ktree_single_clique_is_best_clique_order():
    rng = np.random.default_rng(1)
    for _ in range(10):
        cache = random_integer_cache(4, 3, rng)
        best = max(sum(max(s for ps, s in cache.families[v] if set(ps) <= set(o[:r]))
                       for r, v in enumerate(o)) for o in permutations(range(4)))
        assert brute_force_learn_in_ktree(cache, complete_ktree(4)).total_score == best


def test_in_ktree_result_stays_inside():
    rng = np.random.default_rng(2)
    for t in enumerate_ktrees(5, 2)[::5]:
        res = brute_force_learn_in_ktree(random_integer_cache(5, 3, rng), t)
        assert moral_graph(res.dag).is_subgraph_of(t.graph)


def test_in_tree_gives_forest_along_the_tree():
    g = UndirectedGraph(5, [(0, 1), (1, 2), (1, 3), (3, 4)])
    res = brute_force_learn_in_ktree(random_integer_cache(5, 3, np.random.default_rng(3)), KTree(g, 1))
    assert all(len(res.dag.parents[i]) <= 1 for i in range(5))
    assert {tuple(sorted(a)) for a in res.dag.arcs()} <= g.edges
    assert topological_order(res.dag) is not None


@pytest.mark.parametrize("n, k", [(4, 1), (5, 2)])
def test_ktree_cover(n, k):
    rng = np.random.default_rng(n)
    trees = enumerate_ktrees(n, k)
    for _ in range(3):
        cache = random_integer_cache(n, 2, rng)
        best = max(brute_force_learn_in_ktree(cache, t).total_score for t in trees)
        assert best == brute_force_learn(cache, k).total_score
