"""Random score caches for tests and benchmarks."""

from __future__ import annotations

from itertools import combinations

import numpy as np

from .scoring import Dataset, ScoreCache


def random_integer_cache(n: int, max_in_degree: int, rng, low: int = -30, high: int = 0,
                         keep: float = 1.0) -> ScoreCache:
    """Every parent set up to ``max_in_degree`` with an integer score.

    ``keep`` < 1 drops non-empty parent sets at random. Integer scores make
    exact equality tests meaningful.
    """
    fams = []
    for i in range(n):
        others = [j for j in range(n) if j != i]
        fam = [((), float(rng.integers(low, high + 1)))]
        for size in range(1, max_in_degree + 1):
            for ps in combinations(others, size):
                if keep >= 1.0 or rng.random() < keep:
                    fam.append((ps, float(rng.integers(low, high + 1))))
        fams.append(fam)
    return ScoreCache([f"X{i}" for i in range(n)], fams)


def random_sparse_cache(n: int, rng, pool_size: int = 8, max_in_degree: int = 3,
                        empty_low: float = -120.0, empty_high: float = -60.0) -> ScoreCache:
    """BDeu-like cache for larger ``n``.

    Each node draws a pool of likely parents; every subset of the pool up to
    ``max_in_degree`` becomes a candidate. Scores start from the empty-set
    score and add a gain per parent (pairs and triples get an interaction
    term) minus a size penalty, so larger sets only sometimes win.
    """
    fams = []
    for i in range(n):
        others = np.array([j for j in range(n) if j != i])
        pool = sorted(int(x) for x in rng.choice(others, size=min(pool_size, n - 1), replace=False))
        base = float(rng.uniform(empty_low, empty_high))
        gain = {p: float(rng.gamma(1.5, 4.0)) for p in pool}
        fam = [((), base)]
        for size in range(1, max_in_degree + 1):
            for ps in combinations(pool, size):
                s = base + sum(gain[p] for p in ps) - 5.0 * size
                if size > 1:
                    s += float(rng.normal(0.0, 3.0))
                fam.append((ps, round(s, 6)))
        fams.append(fam)
    return ScoreCache([f"V{i}" for i in range(n)], fams)


def sample_network_data(n: int, m: int, rng, max_parents: int = 3, arc_prob: float = 0.5) -> Dataset:
    """Binary samples from a random Bayesian network.

    Nodes follow a random topological order; each draws up to
    ``max_parents`` parents from a window of recent predecessors. Each
    parent configuration gets a Beta(0.5, 0.5) probability of state 1,
    which keeps dependencies strong enough to show up in the scores.
    """
    order = rng.permutation(n)
    cells = np.zeros((m, n), dtype=np.int64)
    for pos, v in enumerate(order):
        window = order[max(0, pos - 8):pos]
        count = min(len(window), int(rng.binomial(max_parents, arc_prob)))
        parents = rng.choice(window, size=count, replace=False) if count else np.empty(0, dtype=np.int64)
        cfg = np.zeros(m, dtype=np.int64)
        for p in parents:
            cfg = cfg * 2 + cells[:, p]
        prob = rng.beta(0.5, 0.5, size=1 << count)
        cells[:, v] = (rng.random(m) < prob[cfg]).astype(np.int64)
    # a constant column is unusable; flip one cell so every arity is 2
    for v in range(n):
        if cells[:, v].min() == cells[:, v].max():
            cells[0, v] = 1 - cells[0, v]
    return Dataset.from_array(cells, arities=[2] * n, names=[f"A{v}" for v in range(n)])
