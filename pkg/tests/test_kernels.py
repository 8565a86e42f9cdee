import os
import subprocess
import sys

import numpy as np
import pytest

from twlearn import kernels


def fold_reference(acc, msgm, b):
    nf, nm = acc.shape
    out = np.full((nf, nm), -np.inf)
    arg = np.full((nf, nm), -1)
    for f in range(nf):
        for mask in range(nm):
            for g in range(msgm.shape[1]):
                xg = kernels.insert_bit(g, b, 0)
                if mask & xg == xg and acc[f, mask ^ xg] + msgm[f, g] > out[f, mask]:
                    out[f, mask] = acc[f, mask ^ xg] + msgm[f, g]
                    arg[f, mask] = g
    return out, arg


def test_insert_bit():
    assert kernels.insert_bit(0b11, 1, 0) == 0b101
    assert kernels.insert_bit(0b11, 0, 1) == 0b111
    assert kernels.insert_bit(0b1, 1, 1) == 0b11


@pytest.mark.parametrize("k", [1, 2, 3])
def test_fold_paths_agree_with_reference(k):
    rng = np.random.default_rng(k)
    nm = 1 << (k + 1)
    for _ in range(20):
        b = int(rng.integers(0, k + 1))
        # small integers force ties; some -inf entries mimic unreachable states
        acc = rng.integers(-3, 1, size=(6, nm)).astype(float)
        acc[rng.random(acc.shape) < 0.2] = -np.inf
        msgm = rng.integers(-3, 1, size=(6, nm // 2)).astype(float)
        ref_out, ref_arg = fold_reference(acc, msgm, b)
        for fn in (kernels.fold_child_numpy, kernels.fold_child_numba):
            out, arg = fn(acc, msgm, b)
            assert np.array_equal(out, ref_out)
            assert np.array_equal(arg, ref_arg)


def test_bdeu_paths_agree_on_ties_and_edges():
    config = np.array([0, 0, 0, 1], dtype=np.int64)
    child = np.array([0, 1, 1, 0], dtype=np.int64)
    a = kernels.bdeu_from_keys_numpy(config, child, 2, 2.0, 1.0)
    b = kernels.bdeu_from_keys_numba(config, child, 2, 2.0, 1.0)
    assert a == pytest.approx(b, rel=1e-13)


def _backend(flag):
    env = dict(os.environ)
    env.pop("TWLEARN_DISABLE_NUMBA", None)
    if flag is not None:
        env["TWLEARN_DISABLE_NUMBA"] = flag
    out = subprocess.run([sys.executable, "-c", "from twlearn import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    return out.stdout.strip()


def test_env_flag_selects_numpy():
    pytest.importorskip("numba")
    assert _backend(None) == "numba"
    assert _backend("0") == "numba"
    assert _backend("1") == "numpy"
    assert _backend("yes") == "numpy"


def test_search_agrees_across_backends():
    code = ("import numpy as np; from twlearn.search import learn; "
            "from twlearn.synthetic import random_sparse_cache; "
            "c = random_sparse_cache(15, np.random.default_rng(1)); "
            "r = learn(c, 3, 'v1', iterations=5, seed=2); print(repr(r.total_score), r.dag.arcs())")
    outs = []
    for flag in ("0", "1"):
        env = dict(os.environ, TWLEARN_DISABLE_NUMBA=flag)
        outs.append(subprocess.run([sys.executable, "-c", code], env=env, capture_output=True,
                                   text=True, check=True).stdout)
    assert outs[0] == outs[1]


@pytest.mark.parametrize("q", [3, 50, 10 ** 6])
def test_bdeu_dense_and_sorted_counting_agree(q):
    # q * r beyond the dense-table threshold takes the sorting branch
    rng = np.random.default_rng(q)
    config = rng.integers(0, q, size=300).astype(np.int64)
    child = rng.integers(0, 3, size=300).astype(np.int64)
    a = kernels.bdeu_from_keys_numpy(config, child, 3, float(q), 1.0)
    b = kernels.bdeu_from_keys_numba(config, child, 3, float(q), 1.0)
    assert a == pytest.approx(b, rel=1e-12)
