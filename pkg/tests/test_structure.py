import json

import numpy as np
import pytest

from multivariance.centering import Dataset
from multivariance.independence import UsageError
from multivariance.simulate import generate
from multivariance.special import Rng, chi2_1_cdf
from multivariance.structure import (DependencyGraph, DetectionOptions, detect_clustered,
                                     detect_full, from_json, to_dot, to_json, type_i_bound)

COINS = {(3, frozenset({1, 2, 3}))}


def test_type_i_bound():
    assert type_i_bound(0, 100, 0.5, 2) == 0.0
    assert type_i_bound(10, 100, 0.5, 2) == pytest.approx(7.7e-5, rel=0.01)
    ref = 1 - chi2_1_cdf(20.0) ** 10
    assert type_i_bound(10, 100, 0.5, 2) == pytest.approx(ref, rel=1e-6)
    vals = [type_i_bound(k, 50, 0.6, 1.5) for k in range(30)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))


def test_options_validation():
    with pytest.raises(UsageError):
        DetectionOptions(decision="conservative", alpha=0.3)
    with pytest.raises(UsageError):
        DetectionOptions(mode="partial")
    with pytest.raises(UsageError):
        DetectionOptions(decision="consistent", beta=1.0)


@pytest.mark.parametrize("decision", ["conservative", "resampling", "consistent"])
def test_full_coins(decision):
    d = generate("coins:2", 300, 11)
    g = detect_full(d, options=DetectionOptions(decision=decision, L=99), rng=Rng(1))
    assert g.structure() == COINS
    assert len(g.edges) == 3
    assert sorted(g.neighbours("d1")) == ["v1", "v2", "v3"]


def test_full_modal_run_conservative_n100():
    hits = sum(detect_full(generate("coins:2", 100, s)).structure() == COINS for s in range(20))
    assert hits >= 15


def test_independent_mostly_empty():
    empty = sum(not detect_full(generate("normal:4", 60, s)).dependency_nodes for s in range(40))
    assert empty >= 36


def test_n2_graph():
    r = np.random.default_rng(0)
    x = r.normal(size=80)
    g = detect_full(Dataset(np.c_[x, x + 0.1 * r.normal(size=80)]))
    assert g.structure() == {(2, frozenset({1, 2}))}
    g = detect_full(Dataset(r.normal(size=(80, 2))))
    assert len(g.dependency_nodes) <= 1


def _check_invariants(g, n, full):
    variables = [nd for nd in g.nodes if nd.kind == "variable"]
    assert [nd.members for nd in variables] == [(i + 1,) for i in range(n)]
    ids = {nd.id: nd for nd in g.nodes}
    for nd in g.dependency_nodes:
        ends = [e for e in g.neighbours(nd.id) if ids[e].kind in ("variable", "cluster")
                and not (ids[e].kind == "cluster" and set(ids[e].members) > set(nd.members))]
        assert len(set(ends)) == nd.order
    if full:
        sets = [frozenset(nd.members) for nd in g.dependency_nodes]
        assert not any(a < b for a in sets for b in sets)
    clusters = [set(c.members) for c in g.cluster_nodes]
    for a in clusters:
        for b in clusters:
            assert a == b or not (a & b) or a < b or b < a


def test_clustered_disjoint_clusters():
    d = generate("coins:2+7*normal:1", 200, 4)
    g = detect_clustered(d, options=DetectionOptions("clustered", "conservative"))
    assert g.structure() == COINS
    _check_invariants(g, 10, False)


def test_clustered_star():
    d = generate("copies:3:coins:2", 100, 5)
    g = detect_clustered(d, options=DetectionOptions("clustered", "conservative"))
    pairs = {s for o, s in g.structure() if o == 2}
    assert pairs == {frozenset(p) for p in [(1, 4), (1, 7), (4, 7), (2, 5), (2, 8), (5, 8),
                                             (3, 6), (3, 9), (6, 9)]}
    top = [nd for nd in g.dependency_nodes if nd.order == 3]
    assert len(top) == 1 and set(top[0].members) == set(range(1, 10))
    assert sorted(g.neighbours(top[0].id)) == ["c1", "c2", "c3"]
    _check_invariants(g, 9, False)


def test_clustered_independent():
    d = generate("normal:5", 80, 6)
    g = detect_clustered(d, options=DetectionOptions("clustered", "consistent"))
    assert not g.dependency_nodes and not g.cluster_nodes


def test_full_invariants_random():
    for s in range(5):
        d = generate("coins:2+pcoins:2:0.3+normal:1", 120, s)
        g = detect_full(d, options=DetectionOptions(decision="conservative", alpha=0.1))
        _check_invariants(g, 7, True)


def test_determinism():
    d = generate("coins:2+normal:2", 60, 9)
    opts = DetectionOptions("clustered", "resampling", L=50)
    assert detect_clustered(d, options=opts, seed=3) == detect_clustered(d, options=opts, seed=3)


def test_labels():
    d = generate("coins:2", 100, 1)
    g = detect_full(d, options=DetectionOptions(label="order"))
    assert g.dependency_nodes[0].label == "3"
    g = detect_full(d, options=DetectionOptions(label="p_value"))
    assert float(g.dependency_nodes[0].label) < 0.05
    g = detect_full(d)
    assert g.dependency_nodes[0].label == f"{g.dependency_nodes[0].statistic:.1f}"


def test_export():
    empty = DependencyGraph.with_variables(["a", "b", "c"])
    dot = to_dot(empty)
    assert dot.count("shape=circle") == 3 and "--" not in dot
    doc = json.loads(to_json(empty))
    assert doc["edges"] == [] and doc["schema_version"] == 1 and len(doc["nodes"]) == 3
    g = detect_full(generate("coins:2", 100, 1), seed=1)
    dot = to_dot(g)
    assert dot.count("[") == 4 and dot.count(" -- ") == 3 and "shape=none" in dot
    back = from_json(to_json(g))
    assert back == g and back.metadata["tests_performed"] == 4
    with pytest.raises(ValueError):
        from_json(json.dumps({"schema_version": 99, "nodes": [], "edges": []}))
