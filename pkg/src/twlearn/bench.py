"""Benchmark harness: methods x datasets x seeds.

A suite is a JSON file::

    {
      "treewidth": 4,
      "seeds": 10,                      # or an explicit list
      "methods": ["v1", "v2"],
      "budget": {"seconds": 60},        # or {"iterations": N}
      "method_budgets": {"v1": {"seconds": 60}},   # optional overrides
      "datasets": [
        {"name": "nursery", "scores": "nursery.scores"},
        {"name": "zoo", "data": "zoo.csv", "binarize": true, "ess": 1, "max_parents": 3}
      ],
      "imported": [
        {"dataset": "nursery", "method": "milp-3h", "score": -72159.27},
        {"dataset": "zoo", "method": "milp-10m", "solution": "zoo.sol"}
      ]
    }

Relative columns divide the median score of ``v2`` by each value, in
percent. Scores are negative log-likelihoods in practice, so a value above
100 beats the v2 median.
"""

from __future__ import annotations

import json
import statistics
from dataclasses import asdict, dataclass
from pathlib import Path

from .milp import build_learning_model, check_assignment, read_solution
from .scoring import ScoringConfig, build_score_cache, load_csv, read_scores
from .search import learn

REFERENCE = "v2"


@dataclass
class BenchRow:
    dataset: str
    method: str
    runs: int
    min: float
    median: float
    max: float
    rel_min: float | None = None
    rel_median: float | None = None
    rel_max: float | None = None


def relative(value: float, reference: float) -> float:
    """Percent score relative to ``reference``; higher is better for negative scores."""
    return 100.0 * reference / value


def _load_dataset(entry: dict, base: Path):
    if "scores" in entry:
        return read_scores(base / entry["scores"])
    data = load_csv(base / entry["data"], binarize=bool(entry.get("binarize", False)))
    cfg = ScoringConfig(ess=float(entry.get("ess", 1.0)), max_in_degree=int(entry.get("max_parents", 3)))
    return build_score_cache(data, cfg)


def _seeds(value) -> list[int]:
    if isinstance(value, int):
        return list(range(value))
    return [int(s) for s in value]


def _imported_score(entry: dict, cache, w: int, base: Path) -> float:
    if "score" in entry:
        return float(entry["score"])
    model = build_learning_model(cache, w)
    report = check_assignment(model, read_solution(base / entry["solution"], model))
    if not report.feasible:
        raise ValueError(f"imported solution violates {report.first_violation()}")
    return report.objective


def summarize(dataset: str, method: str, scores: list[float]) -> BenchRow:
    return BenchRow(dataset, method, len(scores), min(scores), statistics.median(scores), max(scores))


def add_relative(rows: list[BenchRow]) -> None:
    ref = {r.dataset: r.median for r in rows if r.method == REFERENCE}
    for r in rows:
        m = ref.get(r.dataset)
        if m is not None:
            r.rel_min = relative(r.min, m)
            r.rel_median = relative(r.median, m)
            r.rel_max = relative(r.max, m)


def run_suite(path, progress=None) -> list[BenchRow]:
    path = Path(path)
    suite = json.loads(path.read_text())
    base = path.parent
    w = int(suite["treewidth"])
    seeds = _seeds(suite.get("seeds", 10))
    methods = suite.get("methods", ["v1", "v2"])
    budget = suite.get("budget", {"seconds": 60})
    overrides = suite.get("method_budgets", {})
    rows = []
    caches = {}
    for entry in suite["datasets"]:
        name = entry["name"]
        cache = caches[name] = _load_dataset(entry, base)
        for method in methods:
            b = overrides.get(method, budget)
            scores = []
            for seed in seeds:
                res = learn(cache, w, method, iterations=b.get("iterations"), seconds=b.get("seconds"),
                            seed=seed, workers=int(suite.get("workers", 1)))
                scores.append(res.total_score)
                if progress:
                    progress(f"{name} {method} seed {seed}: {res.total_score:.6f} ({res.iterations_run} it)")
            rows.append(summarize(name, method, scores))
    for entry in suite.get("imported", []):
        name = entry["dataset"]
        s = _imported_score(entry, caches[name], w, base)
        rows.append(summarize(name, entry["method"], [s]))
    add_relative(rows)
    return rows


def _fmt(x, pct=False):
    if x is None:
        return "-"
    return f"{x:.1f}%" if pct else f"{x:.2f}"


def format_table(rows: list[BenchRow]) -> str:
    header = ["dataset", "method", "runs", "min", "median", "max", "rel min", "rel median", "rel max"]
    body = [[r.dataset, r.method, str(r.runs), _fmt(r.min), _fmt(r.median), _fmt(r.max),
             _fmt(r.rel_min, True), _fmt(r.rel_median, True), _fmt(r.rel_max, True)] for r in rows]
    widths = [max(len(h), *(len(b[c]) for b in body)) if body else len(h) for c, h in enumerate(header)]
    lines = ["  ".join(h.ljust(wd) for h, wd in zip(header, widths))]
    lines.append("  ".join("-" * wd for wd in widths))
    for b in body:
        lines.append("  ".join(x.ljust(wd) if c < 2 else x.rjust(wd) for c, (x, wd) in enumerate(zip(b, widths))))
    return "\n".join(lines) + "\n"


def rows_to_json(rows: list[BenchRow]) -> str:
    return json.dumps([asdict(r) for r in rows], indent=2) + "\n"
