import json

import numpy as np
import pytest

from twlearn.errors import FormatError
from twlearn.graph import Dag
from twlearn.network import (
    NetworkDocument,
    from_dag,
    from_result,
    read_network,
    verify_network,
    write_network,
)
from twlearn.search import learn
from twlearn.synthetic import random_sparse_cache


@pytest.fixture(scope="module")
def cache():
    return random_sparse_cache(12, np.random.default_rng(0))


@pytest.fixture(scope="module")
def result(cache):
    return learn(cache, 2, "v2", iterations=20, seed=3)


def test_round_trip(tmp_path, cache, result):
    doc = from_result(result, cache, cache.names)
    write_network(doc, tmp_path / "n.json")
    again = read_network(tmp_path / "n.json")
    assert again == doc
    assert again.dag() == result.dag
    assert verify_network(again, cache) == []
    body = json.loads((tmp_path / "n.json").read_text())
    assert body["format"] == "twlearn-network/1"
    assert body["code"] is None or body["code"].startswith("12 2 |")


def test_verify_flags_tampering(cache, result):
    doc = from_result(result, cache, cache.names)
    doc.total_score += 1
    assert any("sum" in p for p in verify_network(doc))

    doc = from_result(result, cache, cache.names)
    doc.nodes[0]["local_score"] -= 0.5
    doc.total_score -= 0.5
    assert verify_network(doc) == []
    assert any("differs" in p for p in verify_network(doc, cache))

    doc = from_result(result, cache, cache.names)
    doc.treewidth = 0
    if result.dag.arcs():
        assert any("width" in p for p in verify_network(doc))

    doc = from_result(result, cache, cache.names)
    doc.nodes[1]["parents"] = ["nope"]
    assert verify_network(doc) == ["V1: undeclared parent nope"]


def test_verify_catches_cycles_and_orders(cache):
    names = cache.names[:3]
    doc = NetworkDocument(list(names), 1, "v2", 0.0,
                          [{"name": "V0", "parents": ["V1"], "local_score": 0.0},
                           {"name": "V1", "parents": ["V0"], "local_score": 0.0},
                           {"name": "V2", "parents": [], "local_score": 0.0}])
    assert verify_network(doc)
    doc = from_dag(Dag(3), cache, names, 1, "oracle", elimination_order=[0, 1])
    assert verify_network(doc) == ["elimination order is not a permutation of the variables"]


@pytest.mark.parametrize("text", ["not json", "[]", '{"format": "other"}',
                                  '{"format": "twlearn-network/1", "bogus": 1}'])
def test_read_rejects_bad_documents(tmp_path, text):
    (tmp_path / "bad.json").write_text(text)
    with pytest.raises(FormatError):
        read_network(tmp_path / "bad.json")
