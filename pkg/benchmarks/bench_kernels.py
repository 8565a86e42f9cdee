"""Compare the numba and pure-numpy kernels.

    python3 benchmarks/bench_kernels.py [--repeat 7]

Times each kernel on typical shapes, then one end-to-end v1 run per
backend (selected through TWLEARN_DISABLE_NUMBA in a child process).
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from twlearn import kernels


def best_of(fn, repeat, number):
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def bench_bdeu(repeat):
    rng = np.random.default_rng(0)
    print("bdeu_from_keys            m      q   numpy us   numba us  speedup")
    for m, q in [(200, 8), (2000, 8), (12960, 64), (100000, 256)]:
        config = rng.integers(0, q, size=m).astype(np.int64)
        child = rng.integers(0, 3, size=m).astype(np.int64)
        kernels.bdeu_from_keys_numba(config, child, 3, float(q), 1.0)  # compile
        number = max(1, 20000 // m)
        a = best_of(lambda: kernels.bdeu_from_keys_numpy(config, child, 3, float(q), 1.0), repeat, number)
        b = best_of(lambda: kernels.bdeu_from_keys_numba(config, child, 3, float(q), 1.0), repeat, number)
        print(f"{'':20s}{m:7d}{q:7d}{a * 1e6:11.1f}{b * 1e6:11.1f}{a / b:9.1f}x")


def bench_fold(repeat):
    rng = np.random.default_rng(1)
    print("fold_child                k     states   numpy us   numba us  speedup")
    for k in (2, 3, 4, 5):
        nf = 1
        for i in range(2, k + 2):
            nf *= i
        nm = 1 << (k + 1)
        acc = rng.normal(size=(nf, nm))
        msgm = rng.normal(size=(nf, nm // 2))
        kernels.fold_child_numba(acc, msgm, 1)
        number = 20 if k < 5 else 3
        a = best_of(lambda: kernels.fold_child_numpy(acc, msgm, 1), repeat, number)
        b = best_of(lambda: kernels.fold_child_numba(acc, msgm, 1), repeat, number)
        print(f"{'':20s}{k:7d}{nf * nm:11d}{a * 1e6:11.1f}{b * 1e6:11.1f}{a / b:9.1f}x")


END_TO_END = """
import time, numpy as np
from twlearn.search import learn
from twlearn.synthetic import random_sparse_cache
c = random_sparse_cache(60, np.random.default_rng(0))
learn(c, 4, "v1", iterations=2, seed=0)
t = time.perf_counter()
r = learn(c, 4, "v1", iterations=50, seed=1)
print((time.perf_counter() - t) / 50, r.total_score)
"""


def bench_end_to_end():
    print("v1 iteration, n=60 k=4    backend    ms/iter  score")
    for flag, label in (("0", "numba"), ("1", "numpy")):
        env = dict(os.environ, TWLEARN_DISABLE_NUMBA=flag)
        out = subprocess.run([sys.executable, "-c", END_TO_END], env=env, capture_output=True,
                             text=True, check=True).stdout.split()
        print(f"{'':26s}{label:8s}{float(out[0]) * 1e3:10.2f}  {float(out[1]):.3f}")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=7)
    args = parser.parse_args()
    bench_bdeu(args.repeat)
    print()
    bench_fold(args.repeat)
    print()
    bench_end_to_end()


if __name__ == "__main__":
    main()
