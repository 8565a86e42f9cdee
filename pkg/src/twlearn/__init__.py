"""Bayesian network structure learning under a hard treewidth bound."""

from .graph import Dag, UndirectedGraph, dag_treewidth_at_most, eliminate, moral_graph, treewidth_exact
from .ktree import CliqueTree, DandelionCode, KTree, clique_tree, count_ktrees, decode, encode, sample_code
from .scoring import Dataset, ScoreCache, ScoringConfig, build_score_cache, load_csv, read_scores, write_scores
from .search import LearnResult, learn

__version__ = "0.1.0"

__all__ = [
    "CliqueTree",
    "Dag",
    "DandelionCode",
    "Dataset",
    "KTree",
    "LearnResult",
    "ScoreCache",
    "ScoringConfig",
    "UndirectedGraph",
    "build_score_cache",
    "clique_tree",
    "count_ktrees",
    "dag_treewidth_at_most",
    "decode",
    "eliminate",
    "encode",
    "learn",
    "load_csv",
    "moral_graph",
    "read_scores",
    "sample_code",
    "treewidth_exact",
    "write_scores",
]
