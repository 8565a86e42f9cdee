"""Datasets, BDeu local scores and the score-cache file format.

Every learner consumes a :class:`ScoreCache` (or the on-demand
:class:`LazyScores`), never the raw data.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from decimal import Decimal
from itertools import combinations
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .errors import ConstantColumnError, FormatError, ParseError

ParentSet = tuple  # sorted tuple of node indices


@dataclass(frozen=True)
class ScoringConfig:
    ess: float = 1.0
    max_in_degree: int = 3

    def __post_init__(self):
        if not self.ess > 0:
            raise ValueError("ess must be positive")
        if self.max_in_degree < 0:
            raise ValueError("max_in_degree must be >= 0")


@dataclass(frozen=True, eq=False)
class Dataset:
    """Discrete data: ``cells[row, var]`` holds a state index below ``arities[var]``."""

    names: tuple
    arities: tuple
    cells: np.ndarray

    def __post_init__(self):
        cells = np.ascontiguousarray(self.cells, dtype=np.int64)
        if cells.ndim != 2 or cells.shape[0] < 1:
            raise ValueError("dataset needs at least one row")
        if cells.shape[1] != len(self.names) or len(self.arities) != len(self.names):
            raise ValueError("names, arities and columns disagree")
        for v, r in enumerate(self.arities):
            col = cells[:, v]
            if col.min() < 0 or col.max() >= r:
                raise ValueError(f"column {self.names[v]!r} has values outside [0, {r})")
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)

    @property
    def n(self) -> int:
        return len(self.names)

    @property
    def m(self) -> int:
        return self.cells.shape[0]

    @classmethod
    def from_array(cls, cells, arities=None, names=None) -> "Dataset":
        cells = np.asarray(cells, dtype=np.int64)
        if cells.ndim == 1:
            cells = cells[:, None]
        if arities is None:
            arities = tuple(max(2, int(c.max()) + 1) for c in cells.T)
        if names is None:
            names = tuple(f"X{i}" for i in range(cells.shape[1]))
        return cls(tuple(names), tuple(int(a) for a in arities), cells)


# --------------------------------------------------------------------------
# CSV ingestion


def _as_number(text: str):
    try:
        return float(text)
    except ValueError:
        return None


def _binarize_column(values: list[str]) -> list[int]:
    """Split a column at its median.

    Numeric columns are split on their values. Other columns are coded by
    order of first appearance and split on the codes. Values at or below the
    median go to state 0.
    """
    nums = [_as_number(v) for v in values]
    if all(x is not None for x in nums):
        arr = np.asarray(nums)
    else:
        codes: dict[str, int] = {}
        arr = np.asarray([codes.setdefault(v, len(codes)) for v in values], dtype=float)
    med = float(np.median(arr))
    return [0 if x <= med else 1 for x in arr]


def load_csv(path, binarize: bool = False) -> Dataset:
    """Read a comma-separated file with a header row of variable names."""
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError("empty file", row=1)
    header = [h.strip() for h in rows[0]]
    if any(h == "" for h in header):
        raise ParseError("blank variable name in header", row=1)
    if len(set(header)) != len(header):
        raise ParseError("duplicate variable name in header", row=1)
    body = [r for r in rows[1:] if r and any(c.strip() for c in r)]
    if not body:
        raise ParseError("no data rows", row=2)
    ncol = len(header)
    columns: list[list[str]] = [[] for _ in range(ncol)]
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or not any(c.strip() for c in row):
            continue
        if len(row) != ncol:
            raise ParseError(f"expected {ncol} fields, found {len(row)}", row=lineno)
        for c, cell in enumerate(row):
            cell = cell.strip()
            if cell == "" or cell == "?":
                raise ParseError("missing value", row=lineno, column=c + 1)
            columns[c].append(cell)

    coded = []
    arities = []
    for c, values in enumerate(columns):
        states: dict[str, int] = {}
        codes = [states.setdefault(v, len(states)) for v in values]
        if binarize and len(states) > 2:
            codes = _binarize_column(values)
            states = {s: s for s in set(codes)}
        if len(states) < 2:
            raise ConstantColumnError(f"column {header[c]!r} is constant after preprocessing")
        coded.append(codes)
        arities.append(len(states))
    cells = np.asarray(coded, dtype=np.int64).T
    return Dataset(tuple(header), tuple(arities), cells)


# --------------------------------------------------------------------------
# BDeu


def _config_index(data: Dataset, parents: Sequence[int]) -> tuple[np.ndarray, float]:
    """Dense index of each row's parent configuration, plus ``q`` (as float)."""
    q = 1.0
    for p in parents:
        q *= data.arities[p]
    if not parents:
        return np.zeros(data.m, dtype=np.int64), 1.0
    r_child_max = max(data.arities)
    if q * r_child_max < 2.0 ** 62:
        idx = np.zeros(data.m, dtype=np.int64)
        for p in parents:
            idx = idx * data.arities[p] + data.cells[:, p]
        return idx, q
    _, inv = np.unique(data.cells[:, list(parents)], axis=0, return_inverse=True)
    return inv.astype(np.int64).ravel(), q


def bdeu_local_score(data: Dataset, i: int, parents: Iterable[int], ess: float = 1.0) -> float:
    """Log BDeu marginal likelihood of node ``i`` given ``parents``.

    Only observed parent configurations are visited; unobserved ones
    contribute zero.
    """
    parents = tuple(sorted(int(p) for p in parents))
    if i in parents:
        raise ValueError("a node cannot be its own parent")
    if not ess > 0:
        raise ValueError("ess must be positive")
    config, q = _config_index(data, parents)
    r = data.arities[i]
    return float(kernels.bdeu_from_keys(config, data.cells[:, i], r, q, float(ess)))


def enumerate_parent_sets(i: int, n: int, cfg: ScoringConfig) -> list[ParentSet]:
    """Subsets of the other nodes up to ``max_in_degree``, by size then lexicographic."""
    others = [j for j in range(n) if j != i]
    out = []
    for size in range(min(cfg.max_in_degree, len(others)) + 1):
        out.extend(combinations(others, size))
    return out


def count_parent_sets(n: int, max_in_degree: int) -> int:
    return sum(math.comb(n - 1, s) for s in range(min(max_in_degree, n - 1) + 1))


# --------------------------------------------------------------------------
# Score cache


class ScoreCache:
    """Candidate parent sets with local scores for every node.

    ``families[i]`` is a tuple of ``(parent_set, score)`` pairs where each
    parent set is a sorted tuple. ``lookup[i]`` maps parent set to score.
    """

    def __init__(self, names: Sequence[str], families: Sequence[Iterable[tuple]]):
        self.names = tuple(str(x) for x in names)
        n = len(self.names)
        fams = []
        lookups = []
        for i, fam in enumerate(families):
            entries = []
            table = {}
            for ps, s in fam:
                ps = tuple(sorted(int(p) for p in ps))
                s = float(s)
                if i in ps or any(not (0 <= p < n) for p in ps):
                    raise ValueError(f"invalid parent set {ps} for node {i}")
                if ps in table:
                    raise ValueError(f"duplicate parent set {ps} for node {i}")
                if not math.isfinite(s):
                    raise ValueError(f"non-finite score for node {i}, parents {ps}")
                table[ps] = s
                entries.append((ps, s))
            if () not in table:
                raise ValueError(f"node {i} lacks the empty parent set")
            fams.append(tuple(entries))
            lookups.append(table)
        if len(fams) != n:
            raise ValueError("one family list per variable is required")
        self.families = tuple(fams)
        self.lookup = tuple(lookups)
        self.max_in_degree = max((len(ps) for fam in fams for ps, _ in fam), default=0)
        self._ranked = None

    @property
    def n(self) -> int:
        return len(self.names)

    def local(self, i: int, parents: ParentSet):
        """Score of ``parents`` for node ``i``, or ``None`` when not a candidate."""
        return self.lookup[i].get(parents)

    def total(self, dag) -> float:
        return float(sum(self.lookup[i][dag.parent_tuple(i)] for i in range(self.n)))

    def empty_score(self) -> float:
        return float(sum(t[()] for t in self.lookup))

    def family_count(self) -> int:
        return sum(len(f) for f in self.families)

    def ranked(self, i: int) -> tuple:
        """Families of ``i`` best first; equal scores by smallest parent set."""
        if self._ranked is None:
            self._ranked = [None] * self.n
        r = self._ranked[i]
        if r is None:
            r = self._ranked[i] = tuple(sorted(self.families[i], key=lambda e: (-e[1], e[0])))
        return r

    def __eq__(self, other):
        if not isinstance(other, ScoreCache):
            return NotImplemented
        return self.names == other.names and self.families == other.families

    def allclose(self, other: "ScoreCache", rel: float = 1e-11) -> bool:
        if self.names != other.names:
            return False
        for a, b in zip(self.families, other.families):
            if len(a) != len(b):
                return False
            for (pa, sa), (pb, sb) in zip(a, b):
                if pa != pb or not math.isclose(sa, sb, rel_tol=rel, abs_tol=1e-12):
                    return False
        return True

    def __repr__(self):
        return f"ScoreCache(n={self.n}, families={self.family_count()})"


def _score_node(args):
    data, i, parent_sets, ess = args
    return [(ps, bdeu_local_score(data, i, ps, ess)) for ps in parent_sets]


def build_score_cache(data: Dataset, cfg: ScoringConfig = ScoringConfig(), workers: int = 1) -> ScoreCache:
    """BDeu score of every allowed parent set of every node.

    Work is split per node; the result does not depend on ``workers``.
    """
    jobs = [(data, i, enumerate_parent_sets(i, data.n, cfg), cfg.ess) for i in range(data.n)]
    if workers > 1 and data.n > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            fams = list(ex.map(_score_node, jobs))
    else:
        fams = [_score_node(j) for j in jobs]
    return ScoreCache(data.names, fams)


def prune_cache(cache: ScoreCache) -> ScoreCache:
    """Drop parent sets beaten or tied by one of their strict subsets.

    Optimal bounded-treewidth structures survive: replacing a parent set by a
    subset never increases the treewidth.
    """
    fams = []
    for i in range(cache.n):
        table = cache.lookup[i]
        kept = []
        for ps, s in cache.families[i]:
            dominated = False
            for size in range(len(ps)):
                for sub in combinations(ps, size):
                    t = table.get(sub)
                    if t is not None and t >= s:
                        dominated = True
                        break
                if dominated:
                    break
            if not dominated:
                kept.append((ps, s))
        fams.append(kept)
    return ScoreCache(cache.names, fams)


class LazyScores:
    """BDeu scores computed on first request and memoised.

    Entries are written once and never changed, so concurrent readers see
    either nothing or the final value.
    """

    def __init__(self, data: Dataset, cfg: ScoringConfig = ScoringConfig()):
        self.data = data
        self.cfg = cfg
        self.names = data.names
        self.max_in_degree = cfg.max_in_degree
        self._memo: list[dict] = [dict() for _ in range(data.n)]

    @property
    def n(self) -> int:
        return self.data.n

    def local(self, i: int, parents: ParentSet):
        if len(parents) > self.max_in_degree:
            return None
        memo = self._memo[i]
        s = memo.get(parents)
        if s is None:
            s = memo.setdefault(parents, bdeu_local_score(self.data, i, parents, self.cfg.ess))
        return s

    def total(self, dag) -> float:
        return float(sum(self.local(i, dag.parent_tuple(i)) for i in range(self.n)))

    def empty_score(self) -> float:
        return float(sum(self.local(i, ()) for i in range(self.n)))

    def computed(self) -> int:
        return sum(len(m) for m in self._memo)


# --------------------------------------------------------------------------
# Score file I/O


def format_score(x: float, digits: int = 12) -> str:
    """Decimal text with ``digits`` significant digits, no exponent below 1e9."""
    s = format(x, f".{digits}g")
    if ("e" in s or "E" in s) and abs(x) < 1e9:
        s = format(Decimal(s), "f")
    return s


def write_scores(cache: ScoreCache, path) -> None:
    for name in cache.names:
        if not name or any(ch.isspace() for ch in name):
            raise ValueError(f"variable name {name!r} cannot be written (whitespace)")
    lines = [str(cache.n)]
    for i, name in enumerate(cache.names):
        lines.append(f"{name} {len(cache.families[i])}")
        for ps, s in cache.families[i]:
            parts = [format_score(s), str(len(ps))] + [cache.names[p] for p in ps]
            lines.append(" ".join(parts))
    Path(path).write_text("\n".join(lines) + "\n")


def read_scores(path) -> ScoreCache:
    raw = Path(path).read_text().splitlines()
    lines = [(no, ln.split()) for no, ln in enumerate(raw, start=1) if ln.strip()]
    if not lines:
        raise FormatError("empty score file", line=1)
    pos = 0

    def take():
        nonlocal pos
        if pos >= len(lines):
            last = lines[-1][0] if lines else 1
            raise FormatError("unexpected end of file", line=last + 1)
        item = lines[pos]
        pos += 1
        return item

    no, toks = take()
    if len(toks) != 1:
        raise FormatError("first line must hold the variable count", line=no)
    try:
        n = int(toks[0])
    except ValueError:
        raise FormatError("variable count is not an integer", line=no) from None
    if n < 1:
        raise FormatError("variable count must be positive", line=no)

    names = []
    raw_blocks = []
    for _ in range(n):
        no, toks = take()
        if len(toks) != 2:
            raise FormatError("expected '<name> <family-count>'", line=no)
        name, cnt = toks
        try:
            cnt = int(cnt)
        except ValueError:
            raise FormatError("family count is not an integer", line=no) from None
        if cnt < 1:
            raise FormatError("family count must be positive", line=no)
        block = []
        for _ in range(cnt):
            fno, ftoks = take()
            if len(ftoks) < 2:
                raise FormatError("expected '<score> <#parents> <parents...>'", line=fno)
            try:
                score = float(ftoks[0])
                k = int(ftoks[1])
            except ValueError:
                raise FormatError("malformed score or parent count", line=fno) from None
            if not math.isfinite(score):
                raise FormatError("score must be finite", line=fno)
            if k != len(ftoks) - 2:
                raise FormatError(f"declared {k} parents but found {len(ftoks) - 2}", line=fno)
            block.append((fno, score, ftoks[2:]))
        names.append(name)
        raw_blocks.append((no, block))
    if pos != len(lines):
        raise FormatError("more content than the declared variable count", line=lines[pos][0])
    if len(set(names)) != n:
        raise FormatError("duplicate variable name", line=1)

    index = {name: i for i, name in enumerate(names)}
    families = []
    for i, (hno, block) in enumerate(raw_blocks):
        fam = []
        seen = set()
        for fno, score, pnames in block:
            try:
                ps = tuple(sorted(index[p] for p in pnames))
            except KeyError as exc:
                raise FormatError(f"unknown parent {exc.args[0]!r}", line=fno) from None
            if i in ps or len(set(ps)) != len(ps):
                raise FormatError("invalid parent set", line=fno)
            if ps in seen:
                raise FormatError("duplicate parent set", line=fno)
            seen.add(ps)
            fam.append((ps, score))
        if () not in seen:
            raise FormatError(f"variable {names[i]!r} lacks the empty parent set", line=hno)
        families.append(fam)
    return ScoreCache(names, families)
