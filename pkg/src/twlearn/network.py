"""JSON document describing a learned network."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .errors import FormatError
from .graph import Dag, eliminate, moral_graph
from .ktree import format_code

FORMAT = "twlearn-network/1"


@dataclass
class NetworkDocument:
    variables: list
    treewidth: int
    method: str
    total_score: float
    nodes: list  # [{"name", "parents": [names], "local_score"}]
    seed: int | None = None
    iterations: int | None = None
    code: str | None = None
    elimination_order: list | None = None
    interrupted: bool = False
    extra: dict = field(default_factory=dict)

    def to_json(self) -> str:
        body = {"format": FORMAT}
        body.update(asdict(self))
        return json.dumps(body, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "NetworkDocument":
        try:
            body = json.loads(text)
        except json.JSONDecodeError as exc:
            raise FormatError(f"not valid JSON: {exc.msg}", line=exc.lineno) from None
        if not isinstance(body, dict) or body.pop("format", None) != FORMAT:
            raise FormatError(f"not a {FORMAT} document")
        try:
            return cls(**body)
        except TypeError as exc:
            raise FormatError(f"unexpected document fields: {exc}") from None

    def dag(self) -> Dag:
        index = {name: i for i, name in enumerate(self.variables)}
        return Dag(len(self.variables), [[index[p] for p in node["parents"]] for node in self.nodes])


def from_dag(dag: Dag, scores, names, treewidth: int, method: str, **meta) -> NetworkDocument:
    nodes = []
    total = 0.0
    for i in range(dag.n):
        ps = dag.parent_tuple(i)
        s = scores.local(i, ps)
        total += s
        nodes.append({"name": names[i], "parents": [names[p] for p in ps], "local_score": s})
    order = meta.pop("elimination_order", None)
    if order is not None:
        order = [names[v] for v in order]
    return NetworkDocument(list(names), treewidth, method, total, nodes, elimination_order=order, **meta)


def from_result(result, scores, names) -> NetworkDocument:
    return from_dag(
        result.dag, scores, names, result.k, result.method,
        seed=result.seed,
        iterations=result.iterations_run,
        code=format_code(result.code) if result.code is not None else None,
        elimination_order=result.elimination_order,
        interrupted=result.interrupted,
    )


def write_network(doc: NetworkDocument, path) -> None:
    Path(path).write_text(doc.to_json())


def read_network(path) -> NetworkDocument:
    return NetworkDocument.from_json(Path(path).read_text())


def verify_network(doc: NetworkDocument, scores=None, rel: float = 1e-9) -> list[str]:
    """Problems found in ``doc``; an empty list means it checks out.

    Checks names, acyclicity, the score sum and, when an elimination order is
    present, that it witnesses the declared treewidth. With ``scores`` the
    local scores are also compared with the cache.
    """
    problems = []
    names = list(doc.variables)
    if len(set(names)) != len(names):
        return ["duplicate variable names"]
    if [node.get("name") for node in doc.nodes] != names:
        return ["node list does not match the variable list"]
    declared = set(names)
    for node in doc.nodes:
        for p in node["parents"]:
            if p not in declared:
                problems.append(f"{node['name']}: undeclared parent {p}")
    if problems:
        return problems
    try:
        dag = doc.dag()
    except ValueError as exc:
        return [str(exc)]
    total = sum(float(node["local_score"]) for node in doc.nodes)
    if not math.isclose(total, doc.total_score, rel_tol=rel, abs_tol=1e-9):
        problems.append(f"local scores sum to {total}, document says {doc.total_score}")
    if doc.elimination_order is not None:
        if sorted(doc.elimination_order) != sorted(names):
            problems.append("elimination order is not a permutation of the variables")
        else:
            index = {name: i for i, name in enumerate(names)}
            _, width = eliminate(moral_graph(dag), [index[v] for v in doc.elimination_order])
            if width > doc.treewidth:
                problems.append(f"elimination order has width {width} > {doc.treewidth}")
    if scores is not None:
        for i, node in enumerate(doc.nodes):
            s = scores.local(i, dag.parent_tuple(i))
            if s is None:
                problems.append(f"{node['name']}: parent set not in the score cache")
            elif not math.isclose(s, float(node["local_score"]), rel_tol=rel, abs_tol=1e-9):
                problems.append(f"{node['name']}: local score {node['local_score']} differs from cache {s}")
    return problems
