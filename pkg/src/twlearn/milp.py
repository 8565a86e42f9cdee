"""Mixed-integer models for bounded-treewidth structure learning.

Two model kinds share one variable layout:

* ``treewidth-check`` decides whether an undirected graph has treewidth at
  most ``w`` by searching for an elimination order.
* ``learning`` adds one binary per cached family, chosen exactly once per
  node, plus ordering variables that keep the chosen DAG acyclic and its
  moral graph inside the chordalization.

Variables: ``y_i_j`` (binary, i != j) says j is a higher-ordered neighbour
of i in the chordal graph; ``z_i`` in [0, n] is i's elimination position;
``v_i`` in [0, n] is a topological potential; ``pi_i_t`` (binary) selects
family t of node i.

Rows follow the index conventions below (vacuous rows are omitted):

=================  ==========================================  ==============
name               row                                         count
=================  ==========================================  ==============
tw_deg_i           sum_j y_ij <= w                             n
tw_ord_i_j         (n+1) y_ij - z_j + z_i <= n                 n(n-1)
tw_edge_i_j        y_ij + y_ji = 1, {i,j} an edge, i < j       |E|
tw_fill_i_j_k      y_ij + y_ik - y_jk - y_kj <= 1, j < k       n C(n-1, 2)
pick_i             sum_t pi_it = 1                             n
acyc_i_t_j         (n+1) pi_it - v_j + v_i <= n, j in F_it
moral1_i_t_j       pi_it - y_ij - y_ji <= 0, j in F_it
moral2_i_t_j_k     pi_it - y_jk - y_kj <= 0, {j<k} in F_it
=================  ==========================================  ==============

``tw_edge`` rows appear only in the treewidth-check model.
"""

from __future__ import annotations

import math
from collections.abc import Mapping
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path

from .errors import FormatError, InfeasibleInput, InstanceTooLarge, MissingVariable, TreewidthExceeded
from .graph import Dag, UndirectedGraph, eliminate, moral_graph, topological_order, treewidth_exact

TOL = 1e-6
SOLVE_TINY_LIMIT = 24

TREEWIDTH_CHECK = "treewidth-check"
LEARNING = "learning"


@dataclass(frozen=True)
class Row:
    name: str
    family: str
    terms: tuple  # ((variable index, coefficient), ...)
    sense: str  # "<=", ">=" or "="
    rhs: float


@dataclass(frozen=True, eq=False)
class MilpModel:
    n: int
    w: int
    kind: str
    var_names: tuple
    binary: frozenset  # variable indices
    bounds: dict  # real variable index -> (low, high)
    objective: dict  # variable index -> coefficient
    rows: tuple
    families: tuple = ()  # learning kind: per node, the parent sets behind pi_i_t
    graph: UndirectedGraph | None = None
    index: dict = field(default_factory=dict)

    def var(self, name: str) -> int:
        return self.index[name]

    def row_counts(self) -> dict:
        out: dict = {}
        for r in self.rows:
            out[r.family] = out.get(r.family, 0) + 1
        return out

    @property
    def binary_count(self) -> int:
        return len(self.binary)


class _Builder:
    def __init__(self, n: int):
        self.n = n
        self.names: list[str] = []
        self.index: dict[str, int] = {}
        self.binary: set[int] = set()
        self.bounds: dict[int, tuple] = {}
        self.rows: list[Row] = []

    def add_var(self, name, binary=False, bounds=None):
        idx = len(self.names)
        self.names.append(name)
        self.index[name] = idx
        if binary:
            self.binary.add(idx)
        else:
            self.bounds[idx] = bounds
        return idx

    def row(self, name, family, terms, sense, rhs):
        self.rows.append(Row(name, family, tuple(terms), sense, rhs))


def _ordering_block(b: _Builder, n: int, w: int):
    """Variables y and z with the degree, order and fill-in rows."""
    y = {}
    for i in range(n):
        for j in range(n):
            if i != j:
                y[i, j] = b.add_var(f"y_{i}_{j}", binary=True)
    z = [b.add_var(f"z_{i}", bounds=(0, n)) for i in range(n)]
    return y, z


def _ordering_rows(b: _Builder, n: int, w: int, y, z, edges=()):
    for i in range(n):
        b.row(f"tw_deg_{i}", "tw_deg", [(y[i, j], 1) for j in range(n) if j != i], "<=", w)
    for i in range(n):
        for j in range(n):
            if i != j:
                b.row(f"tw_ord_{i}_{j}", "tw_ord", [(y[i, j], n + 1), (z[j], -1), (z[i], 1)], "<=", n)
    for i, j in sorted(edges):
        b.row(f"tw_edge_{i}_{j}", "tw_edge", [(y[i, j], 1), (y[j, i], 1)], "=", 1)
    for i in range(n):
        others = [j for j in range(n) if j != i]
        for j, k in combinations(others, 2):
            b.row(f"tw_fill_{i}_{j}_{k}", "tw_fill",
                  [(y[i, j], 1), (y[i, k], 1), (y[j, k], -1), (y[k, j], -1)], "<=", 1)


def _finish(b: _Builder, n, w, kind, objective, families=(), graph=None) -> MilpModel:
    return MilpModel(n, w, kind, tuple(b.names), frozenset(b.binary), dict(b.bounds),
                     dict(objective), tuple(b.rows), tuple(families), graph, dict(b.index))


def build_treewidth_model(g: UndirectedGraph, w: int) -> MilpModel:
    """Feasible iff ``g`` has treewidth at most ``w``."""
    if w < 0:
        raise ValueError("treewidth bound must be non-negative")
    n = g.n
    b = _Builder(n)
    y, z = _ordering_block(b, n, w)
    _ordering_rows(b, n, w, y, z, edges=g.edges)
    return _finish(b, n, w, TREEWIDTH_CHECK, {}, graph=g)


def build_learning_model(cache, w: int) -> MilpModel:
    """Best DAG over the cache's families with moral treewidth at most ``w``."""
    if w < 0:
        raise ValueError("treewidth bound must be non-negative")
    n = cache.n
    for i in range(n):
        if cache.local(i, ()) is None:
            raise ValueError(f"node {i} lacks the empty parent set; the model could be infeasible")
    b = _Builder(n)
    y, z = _ordering_block(b, n, w)
    v = [b.add_var(f"v_{i}", bounds=(0, n)) for i in range(n)]
    pi = []
    objective = {}
    fams = []
    for i in range(n):
        row = []
        node_fams = []
        for t, (ps, s) in enumerate(cache.families[i]):
            idx = b.add_var(f"pi_{i}_{t}", binary=True)
            objective[idx] = s
            row.append(idx)
            node_fams.append(ps)
        pi.append(row)
        fams.append(tuple(node_fams))
    _ordering_rows(b, n, w, y, z)
    for i in range(n):
        b.row(f"pick_{i}", "pick", [(x, 1) for x in pi[i]], "=", 1)
    for i in range(n):
        for t, ps in enumerate(fams[i]):
            for j in ps:
                b.row(f"acyc_{i}_{t}_{j}", "acyc", [(pi[i][t], n + 1), (v[j], -1), (v[i], 1)], "<=", n)
    for i in range(n):
        for t, ps in enumerate(fams[i]):
            for j in ps:
                b.row(f"moral1_{i}_{t}_{j}", "moral1", [(pi[i][t], 1), (y[i, j], -1), (y[j, i], -1)], "<=", 0)
    for i in range(n):
        for t, ps in enumerate(fams[i]):
            for j, k in combinations(ps, 2):
                b.row(f"moral2_{i}_{t}_{j}_{k}", "moral2",
                      [(pi[i][t], 1), (y[j, k], -1), (y[k, j], -1)], "<=", 0)
    return _finish(b, n, w, LEARNING, objective, families=fams)


def fill_row_count(n: int) -> int:
    return n * math.comb(n - 1, 2)


# --------------------------------------------------------------------------
# LP text export


def _num(x) -> str:
    x = float(x)
    if x.is_integer() and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def _expr(model: MilpModel, terms, per_line: int = 8) -> list[str]:
    parts = []
    for idx, c in terms:
        sign = "-" if c < 0 else "+"
        mag = abs(c)
        name = model.var_names[idx]
        parts.append(f"{sign} {name}" if mag == 1 else f"{sign} {_num(mag)} {name}")
    if parts and parts[0].startswith("+ "):
        parts[0] = parts[0][2:]
    return [" ".join(parts[k:k + per_line]) for k in range(0, len(parts), per_line)] or [""]


def lp_text(model: MilpModel) -> str:
    out = []
    if model.kind == LEARNING:
        out.append("Maximize")
        chunks = _expr(model, sorted(model.objective.items()))
    else:
        out.append("Minimize")
        chunks = [""]
    out.append(" obj: " + chunks[0] if chunks[0] else " obj:")
    out.extend("   " + c for c in chunks[1:])
    out.append("Subject To")
    for r in model.rows:
        chunks = _expr(model, r.terms)
        sense = "=" if r.sense == "=" else r.sense
        chunks[-1] = f"{chunks[-1]} {sense} {_num(r.rhs)}"
        out.append(f" {r.name}: {chunks[0]}")
        out.extend("   " + c for c in chunks[1:])
    out.append("Bounds")
    for idx in sorted(model.bounds):
        lo, hi = model.bounds[idx]
        out.append(f" {_num(lo)} <= {model.var_names[idx]} <= {_num(hi)}")
    out.append("Binary")
    names = [model.var_names[i] for i in sorted(model.binary)]
    for k in range(0, len(names), 10):
        out.append(" " + " ".join(names[k:k + 10]))
    out.append("End")
    return "\n".join(out) + "\n"


def export_lp(model: MilpModel, path) -> None:
    Path(path).write_text(lp_text(model))


# --------------------------------------------------------------------------
# Assignments


class MilpAssignment(Mapping):
    """Variable values by name."""

    def __init__(self, values: Mapping):
        self._values = {str(k): float(v) for k, v in values.items()}

    def __getitem__(self, name):
        return self._values[name]

    def __iter__(self):
        return iter(self._values)

    def __len__(self):
        return len(self._values)

    def __repr__(self):
        return f"MilpAssignment({len(self)} values)"


def read_solution(path, model: MilpModel | None = None) -> MilpAssignment:
    """Parse ``name value`` lines; binaries within 1e-6 of 0 or 1 are snapped.

    Blank lines and lines starting with ``#`` are skipped. With a model,
    unknown variable names are rejected.
    """
    values = {}
    for no, line in enumerate(Path(path).read_text().splitlines(), start=1):
        text = line.strip()
        if not text or text.startswith("#"):
            continue
        toks = text.split()
        if len(toks) != 2:
            raise FormatError("expected '<name> <value>'", line=no)
        name, raw = toks
        try:
            val = float(raw)
        except ValueError:
            raise FormatError(f"value of {name} is not a number", line=no) from None
        if name in values:
            raise FormatError(f"variable {name} given twice", line=no)
        if model is not None:
            if name not in model.index:
                raise FormatError(f"unknown variable {name}", line=no)
            if model.index[name] in model.binary:
                for target in (0.0, 1.0):
                    if abs(val - target) <= TOL:
                        val = target
        values[name] = val
    return MilpAssignment(values)


def write_solution(a: MilpAssignment, model: MilpModel, path) -> None:
    lines = [f"{name} {_num(a[name])}" for name in model.var_names]
    Path(path).write_text("\n".join(lines) + "\n")


def _values(model: MilpModel, a: Mapping) -> list[float]:
    vals = []
    for name in model.var_names:
        if name not in a:
            raise MissingVariable(f"assignment lacks variable {name}")
        vals.append(float(a[name]))
    return vals


@dataclass
class FamilyReport:
    family: str
    rows: int
    violations: int
    first: str | None  # name of the first violated row (or variable)
    detail: str | None

    @property
    def ok(self) -> bool:
        return self.violations == 0


@dataclass
class CheckReport:
    families: list
    objective: float | None

    @property
    def feasible(self) -> bool:
        return all(f.ok for f in self.families)

    def first_violation(self) -> str | None:
        for f in self.families:
            if not f.ok:
                return f.first
        return None

    def text(self) -> str:
        lines = []
        for f in self.families:
            status = "ok" if f.ok else f"FAIL {f.violations}/{f.rows}, first {f.first}: {f.detail}"
            lines.append(f"{f.family:8s} {status}")
        lines.append("feasible" if self.feasible else "infeasible")
        return "\n".join(lines)


def check_assignment(model: MilpModel, a: Mapping, tol: float = TOL) -> CheckReport:
    """Evaluate every row, bound and integrality condition."""
    vals = _values(model, a)
    order = []
    reports: dict = {}

    def note(fam, name, bad, detail):
        if fam not in reports:
            reports[fam] = FamilyReport(fam, 0, 0, None, None)
            order.append(fam)
        rep = reports[fam]
        rep.rows += 1
        if bad:
            rep.violations += 1
            if rep.first is None:
                rep.first, rep.detail = name, detail

    for idx in sorted(model.binary):
        x = vals[idx]
        note("binary", model.var_names[idx], not (abs(x) <= tol or abs(x - 1) <= tol), f"value {x}")
    for idx in sorted(model.bounds):
        lo, hi = model.bounds[idx]
        x = vals[idx]
        note("bounds", model.var_names[idx], x < lo - tol or x > hi + tol, f"value {x} outside [{lo}, {hi}]")
    for r in model.rows:
        lhs = sum(c * vals[i] for i, c in r.terms)
        if r.sense == "<=":
            bad = lhs > r.rhs + tol
        elif r.sense == ">=":
            bad = lhs < r.rhs - tol
        else:
            bad = abs(lhs - r.rhs) > tol
        note(r.family, r.name, bad, f"lhs {lhs:g} {r.sense} {_num(r.rhs)}")
    obj = None
    if model.kind == LEARNING:
        obj = float(sum(c * vals[i] for i, c in model.objective.items()))
    return CheckReport([reports[f] for f in order], obj)


def _z_order(model: MilpModel, a: Mapping) -> list[int]:
    z = [float(a[f"z_{i}"]) for i in range(model.n)]
    return sorted(range(model.n), key=lambda i: (z[i], i))


def decode_solution(model: MilpModel, a: Mapping):
    """Chosen DAG and the elimination order given by ascending ``z``."""
    if model.kind != LEARNING:
        raise ValueError("decode_solution needs a learning model")
    report = check_assignment(model, a)
    if not report.feasible:
        raise InfeasibleInput(f"assignment violates {report.first_violation()}")
    parents = []
    for i in range(model.n):
        chosen = [t for t in range(len(model.families[i])) if a[f"pi_{i}_{t}"] > 0.5]
        parents.append(model.families[i][chosen[0]])
    return Dag(model.n, parents), _z_order(model, a)


def decode_chordalization(model: MilpModel, a: Mapping):
    """Graph of all pairs with ``y`` set, plus the ascending-``z`` order."""
    report = check_assignment(model, a)
    if not report.feasible:
        raise InfeasibleInput(f"assignment violates {report.first_violation()}")
    n = model.n
    edges = [(i, j) for i in range(n) for j in range(n) if i != j and a[f"y_{i}_{j}"] > 0.5]
    return UndirectedGraph(n, edges), _z_order(model, a)


def encode_witness(model: MilpModel, d: Dag, order=None) -> MilpAssignment:
    """Feasible assignment describing ``d``.

    ``order`` is an elimination order of the moral graph with width at most
    ``w``; by default a minimum-width one is computed.
    """
    if model.kind != LEARNING:
        raise ValueError("encode_witness needs a learning model")
    n = model.n
    if d.n != n:
        raise ValueError("DAG size does not match the model")
    mg = moral_graph(d)
    if order is None:
        _, order = treewidth_exact(mg)
    chordal, width = eliminate(mg, order)
    if width > model.w:
        raise TreewidthExceeded(f"DAG has treewidth above {model.w}")
    pos = {v: p for p, v in enumerate(order)}
    vals = {}
    for i in range(n):
        for j in range(n):
            if i != j:
                vals[f"y_{i}_{j}"] = 1.0 if chordal.has_edge(i, j) and pos[i] < pos[j] else 0.0
    for i in range(n):
        vals[f"z_{i}"] = float(pos[i])
    topo = topological_order(d)
    for p, v in enumerate(topo):
        vals[f"v_{v}"] = float(n - 1 - p)
    for i in range(n):
        ps = d.parent_tuple(i)
        if ps not in model.families[i]:
            raise ValueError(f"parent set {ps} of node {i} is not a candidate")
        for t, f in enumerate(model.families[i]):
            vals[f"pi_{i}_{t}"] = 1.0 if f == ps else 0.0
    return MilpAssignment(vals)


# --------------------------------------------------------------------------
# Exact search for tiny models


class _Tiny:
    """Depth-first search over the binaries with row propagation.

    Rows over binaries only are propagated (a row that can no longer hold
    fails, a variable whose other value would break a row is fixed). Rows
    ``sum c b + x_p - x_q <= rhs`` mixing binaries with two reals become
    difference constraints once their binaries are fixed; a cycle of strict
    precedences fails early and every leaf is settled by Bellman-Ford.
    """

    def __init__(self, model: MilpModel):
        self.m = model
        nv = len(model.var_names)
        self.bins = sorted(model.binary, key=self._branch_key)
        self.val = [-1] * nv
        self.pure = []
        self.mixed = []
        for r in model.rows:
            reals = [(i, c) for i, c in r.terms if i not in model.binary]
            binterms = [(i, c) for i, c in r.terms if i in model.binary]
            if not reals:
                if r.sense in ("<=", "="):
                    self.pure.append((binterms, r.rhs))
                if r.sense in (">=", "="):
                    self.pure.append(([(i, -c) for i, c in binterms], -r.rhs))
                continue
            if r.sense != "<=" or len(reals) != 2 or sorted(c for _, c in reals) != [-1, 1]:
                raise ValueError(f"row {r.name} has a shape the tiny solver does not handle")
            p = next(i for i, c in reals if c == 1)
            q = next(i for i, c in reals if c == -1)
            self.mixed.append((binterms, p, q, r.rhs))
        self.rows_of = [[] for _ in range(nv)]
        for k, (terms, _) in enumerate(self.pure):
            for i, _ in terms:
                self.rows_of[i].append(k)
        self.mixed_of = [[] for _ in range(nv)]
        for k, (terms, _, _, _) in enumerate(self.mixed):
            for i, _ in terms:
                self.mixed_of[i].append(k)
        # objective bound: exactly-one groups take their best free member
        self.obj = model.objective
        self.groups = []
        grouped = set()
        for r in model.rows:
            if (r.sense == "=" and r.rhs == 1 and all(c == 1 for _, c in r.terms)
                    and all(i in model.binary for i, _ in r.terms)):
                members = [i for i, _ in r.terms]
                if grouped.isdisjoint(members):
                    self.groups.append(members)
                    grouped.update(members)
        self.loose = [i for i in self.obj if i not in grouped]
        self.reals = sorted(model.bounds)
        self.best = None
        self.best_obj = -math.inf

    def _branch_key(self, idx):
        # objective variables first (best coefficient first), then the rest
        c = self.m.objective.get(idx)
        return (0, -c, idx) if c is not None else (1, 0, idx)

    def _minact(self, k):
        terms, rhs = self.pure[k]
        s = 0.0
        for i, c in terms:
            v = self.val[i]
            if v >= 0:
                s += c * v
            elif c < 0:
                s += c
        return s, rhs

    def _propagate(self, start, trail):
        queue = list(start)
        while queue:
            var = queue.pop()
            for k in self.rows_of[var]:
                s, rhs = self._minact(k)
                if s > rhs + TOL:
                    return False
                for i, c in self.pure[k][0]:
                    if self.val[i] < 0 and abs(c) > rhs - s + TOL:
                        self.val[i] = 0 if c > 0 else 1
                        trail.append(i)
                        queue.append(i)
            for k in self.mixed_of[var]:
                if not self._mixed_ok(k):
                    return False
        return True

    def _mixed_bound(self, k):
        terms, p, q, rhs = self.mixed[k]
        s = 0.0
        for i, c in terms:
            v = self.val[i]
            if v < 0:
                return None
            s += c * v
        return rhs - s

    def _mixed_ok(self, k):
        bound = self._mixed_bound(k)
        if bound is None or bound >= 0:
            return True
        # x_p - x_q <= bound < 0 means q must exceed p; look for a strict cycle
        _, p, q, _ = self.mixed[k]
        return not self._strict_path(q, p)

    def _strict_path(self, src, dst):
        # is there a chain src < ... < dst of strict precedences?
        succ = {}
        for k in range(len(self.mixed)):
            b = self._mixed_bound(k)
            if b is not None and b < 0:
                _, p, q, _ = self.mixed[k]
                succ.setdefault(p, []).append(q)
        stack, seen = [src], {src}
        while stack:
            u = stack.pop()
            if u == dst:
                return True
            for x in succ.get(u, ()):
                if x not in seen:
                    seen.add(x)
                    stack.append(x)
        return False

    def _reals(self):
        """Bellman-Ford over the difference constraints; None on a negative cycle."""
        origin = -1
        edges = []
        for idx in self.reals:
            lo, hi = self.m.bounds[idx]
            edges.append((origin, idx, hi))  # x - 0 <= hi
            edges.append((idx, origin, -lo))  # 0 - x <= -lo
        for k in range(len(self.mixed)):
            _, p, q, _ = self.mixed[k]
            edges.append((q, p, self._mixed_bound(k)))  # x_p - x_q <= bound
        dist = {origin: 0.0}
        nodes = [origin] + self.reals
        for _ in range(len(nodes)):
            changed = False
            for u, v, wt in edges:
                if u in dist and dist[u] + wt < dist.get(v, math.inf) - 1e-12:
                    dist[v] = dist[u] + wt
                    changed = True
            if not changed:
                break
        else:
            return None
        base = dist[origin]
        return {idx: dist[idx] - base for idx in self.reals}

    def _bound(self):
        s = 0.0
        for i, c in self.obj.items():
            if self.val[i] == 1:
                s += c
        for members in self.groups:
            if any(self.val[i] == 1 for i in members):
                continue
            free = [self.obj.get(i, 0.0) for i in members if self.val[i] < 0]
            if not free:
                return -math.inf
            s += max(free)
        for i in self.loose:
            if self.val[i] < 0:
                s += max(self.obj[i], 0.0)
        return s

    def _assignment(self, reals):
        vals = {}
        for idx, name in enumerate(self.m.var_names):
            vals[name] = float(self.val[idx]) if idx in self.m.binary else float(reals[idx])
        return MilpAssignment(vals)

    def _undo(self, trail, mark):
        while len(trail) > mark:
            self.val[trail.pop()] = -1

    def leaves(self, optimise: bool):
        """Yield ``(assignment, objective)`` for feasible leaves.

        With ``optimise`` the search prunes on the objective bound and only
        yields strict improvements.
        """
        yield from self._dfs(0, [], optimise)

    def _dfs(self, pos, trail, optimise):
        while pos < len(self.bins) and self.val[self.bins[pos]] >= 0:
            pos += 1
        if optimise and self._bound() <= self.best_obj:
            return
        if pos == len(self.bins):
            reals = self._reals()
            if reals is None:
                return
            obj = float(sum(c * self.val[i] for i, c in self.obj.items()))
            if optimise:
                if obj <= self.best_obj:
                    return
                self.best_obj = obj
            yield self._assignment(reals), obj
            return
        var = self.bins[pos]
        first = 1 if var in self.obj else 0
        for value in (first, 1 - first):
            mark = len(trail)
            self.val[var] = value
            trail.append(var)
            if self._propagate([var], trail):
                yield from self._dfs(pos + 1, trail, optimise)
            self._undo(trail, mark)


def solve_tiny(model: MilpModel, limit: int = SOLVE_TINY_LIMIT):
    """Exact optimum (or any feasible point for a check model) by enumeration.

    Returns ``(assignment, objective)``, or ``None`` when infeasible. The
    first optimal leaf in branching order wins ties.
    """
    if model.binary_count > limit:
        raise InstanceTooLarge(f"{model.binary_count} binaries exceed the tiny-solver limit {limit}")
    best = None
    for leaf in _Tiny(model).leaves(optimise=True):
        best = leaf
    return best


def enumerate_feasible(model: MilpModel, limit: int = SOLVE_TINY_LIMIT):
    """Every feasible binary assignment, each with a completion of the reals."""
    if model.binary_count > limit:
        raise InstanceTooLarge(f"{model.binary_count} binaries exceed the tiny-solver limit {limit}")
    for a, _ in _Tiny(model).leaves(optimise=False):
        yield a
