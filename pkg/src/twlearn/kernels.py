"""Hot numeric kernels with numba and pure-numpy implementations.

Two kernels dominate runtime:

* ``bdeu_from_keys`` - the contingency pass behind every BDeu local score.
* ``fold_child`` - the max-plus subset merge of a child message into a bag
  table in the exact in-k-tree dynamic program.

Both implementations are always importable (``*_numpy`` and ``*_numba``);
the public names point at numba unless it is missing or disabled through
``TWLEARN_DISABLE_NUMBA``. The two paths give identical results, including
argmax tie-breaking.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy.special import gammaln

from ._accel import USE_NUMBA, njit


# --------------------------------------------------------------------------
# BDeu contingency pass


def bdeu_from_keys_numpy(config, child, r, q, ess):
    key = config * r + child
    uk, cnt = np.unique(key, return_counts=True)
    a_j = ess / q
    a_jk = ess / (q * r)
    js = uk // r
    starts = np.flatnonzero(np.r_[True, js[1:] != js[:-1]])
    n_j = np.add.reduceat(cnt, starts)
    total = np.sum(gammaln(a_jk + cnt)) - cnt.size * gammaln(a_jk)
    total += n_j.size * gammaln(a_j) - np.sum(gammaln(a_j + n_j))
    return float(total)


@njit
def bdeu_from_keys_numba(config, child, r, q, ess):  # pragma: no cover - jitted
    m = config.shape[0]
    a_j = ess / q
    a_jk = ess / (q * r)
    lg_aj = math.lgamma(a_j)
    lg_ajk = math.lgamma(a_jk)
    total = 0.0
    cells = q * r
    if cells <= 4.0 * m + 1024.0:
        # small table: count densely, no sort
        nq = int(q)
        counts = np.zeros(nq * r, dtype=np.int64)
        for i in range(m):
            counts[config[i] * r + child[i]] += 1
        for j in range(nq):
            n_j = 0
            for kk in range(r):
                c = counts[j * r + kk]
                if c > 0:
                    total += math.lgamma(a_jk + c) - lg_ajk
                    n_j += c
            if n_j > 0:
                total += lg_aj - math.lgamma(a_j + n_j)
        return total
    key = np.sort(config * r + child)
    i = 0
    while i < m:
        j = key[i] // r
        n_j = 0
        while i < m and key[i] // r == j:
            kk = key[i]
            c = 0
            while i < m and key[i] == kk:
                c += 1
                i += 1
            total += math.lgamma(a_jk + c) - lg_ajk
            n_j += c
        total += lg_aj - math.lgamma(a_j + n_j)
    return total


# --------------------------------------------------------------------------
# Max-plus subset merge


@lru_cache(maxsize=None)
def _supersets(nbits: int):
    masks = np.arange(1 << nbits)
    return [masks[(masks & x) == x] for x in range(1 << nbits)]


def insert_bit(g: int, pos: int, bit: int) -> int:
    """Insert ``bit`` at position ``pos`` of ``g``, shifting higher bits up."""
    low = g & ((1 << pos) - 1)
    return low | (bit << pos) | ((g >> pos) << (pos + 1))


def fold_child_numpy(acc, msgm, b):
    """``out[f, M] = max_{g: ins(g, b) <= M} acc[f, M - ins(g, b)] + msgm[f, g]``.

    ``acc`` has one column per mask over the bag's ``k+1`` positions and
    ``msgm`` one column per mask over the ``k`` shared positions; ``b`` is the
    bag position missing from the child. Returns the merged table and the
    chosen ``g`` (smallest ``g`` on ties, -1 when no ``g`` fits).
    """
    nf, nm = acc.shape
    nbits = nm.bit_length() - 1
    sup = _supersets(nbits)
    out = np.full((nf, nm), -np.inf)
    arg = np.full((nf, nm), -1, dtype=np.int16)
    for g in range(msgm.shape[1]):
        xg = insert_bit(g, b, 0)
        cols = sup[xg]
        cand = acc[:, cols ^ xg] + msgm[:, g:g + 1]
        cur = out[:, cols]
        better = cand > cur
        out[:, cols] = np.where(better, cand, cur)
        arg[:, cols] = np.where(better, np.int16(g), arg[:, cols])
    return out, arg


@njit
def fold_child_numba(acc, msgm, b):  # pragma: no cover - jitted
    nf, nm = acc.shape
    ng = msgm.shape[1]
    out = np.full((nf, nm), -np.inf)
    arg = np.full((nf, nm), -1, dtype=np.int16)
    low = (1 << b) - 1
    for g in range(ng):
        xg = (g & low) | ((g >> b) << (b + 1))
        for mask in range(nm):
            if mask & xg != xg:
                continue
            rest = mask ^ xg
            for f in range(nf):
                v = acc[f, rest] + msgm[f, g]
                if v > out[f, mask]:
                    out[f, mask] = v
                    arg[f, mask] = g
    return out, arg


if USE_NUMBA:
    bdeu_from_keys = bdeu_from_keys_numba
    fold_child = fold_child_numba
else:
    bdeu_from_keys = bdeu_from_keys_numpy
    fold_child = fold_child_numpy

BACKEND = "numba" if USE_NUMBA else "numpy"
