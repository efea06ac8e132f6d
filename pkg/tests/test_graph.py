import json

import numpy as np
import pytest
from hypothesis import given, settings

from lvlingam import catalog
from lvlingam.graph import (CanonicalDag, CycleDetected, GraphFormatError, LatentWithFewChildren,
                            LatentWithParent, LvDag, NodeSet, NotCanonical, UnknownNode,
                            WeightedModel, canonicalize, dag_from_json, dag_to_json, dumps_graph,
                            is_canonical, model_from_json, model_to_json,
                            reduce_weights_to_canonical, validate)
from lvlingam.mixing import build_mixing
from lvlingam.sem import sample_weights

from conftest import canonical_dags


def brute_descendants(dag, v):
    seen, stack = {v}, [v]
    while stack:
        for c in dag.children(stack.pop()):
            if c not in seen:
                seen.add(c)
                stack.append(c)
    return seen


def test_cycle_rejected():
    with pytest.raises(CycleDetected):
        LvDag((0, 1, 2), (), frozenset({(0, 1), (1, 2), (2, 0)}))


def test_self_loop_and_unknown_node():
    with pytest.raises(CycleDetected):
        LvDag((0, 1), (), frozenset({(0, 0)}))
    with pytest.raises(UnknownNode):
        LvDag((0, 1), (), frozenset({(0, 5)}))


def test_overlapping_partition_rejected():
    with pytest.raises(GraphFormatError):
        LvDag((0, 1), (1,), frozenset())


def test_validate_reports_every_violation():
    dag = LvDag((0, 1, 2), (3, 4), frozenset({(3, 4), (4, 0), (4, 1)}))
    with pytest.raises(NotCanonical) as info:
        validate(dag)
    kinds = {type(v) for v in info.value.violations}
    assert kinds == {LatentWithParent, LatentWithFewChildren}
    assert not is_canonical(dag)


def test_topological_order_is_deterministic_min_id():
    dag = LvDag((0, 1, 2, 3), (), frozenset({(3, 1), (2, 0)}))
    assert dag.topological_order == (2, 0, 3, 1)


def test_first_child_and_cut():
    dag = validate(catalog.iv())
    t, y, l = dag.node("T"), dag.node("Y"), dag.node("L")
    assert dag.first_child(l) == t
    assert set(dag.observed_descendants(l)) == {t, y}
    assert set(dag.observed_descendants_cut(l, t)) == {y}
    assert set(dag.observed_descendants(dag.node("I"))) == {0, 1, 2}


@settings(max_examples=60, deadline=None)
@given(canonical_dags())
def test_descendants_match_bruteforce(dag):
    for v in range(dag.p):
        desc = brute_descendants(dag, v)
        assert set(dag.observed_descendants(v)) == {u for u in desc if dag.is_observed(u)}
    for l in dag.latent:
        j = dag.first_child(l)
        seen, stack = set(), [c for c in dag.children(l) if c != j]
        while stack:
            u = stack.pop()
            if u in seen:
                continue
            seen.add(u)
            stack += [c for c in dag.children(u) if c != j]
        assert set(dag.observed_descendants_cut(l, j)) == {u for u in seen if dag.is_observed(u)}


@settings(max_examples=60, deadline=None)
@given(canonical_dags())
def test_topological_order_respects_edges(dag):
    pos = dag.position
    assert all(pos[u] < pos[v] for u, v in dag.edges)
    assert sorted(dag.topological_order) == list(range(dag.p))


def test_nodeset_operations():
    a, b = NodeSet.of([1, 3, 5]), NodeSet.of([3, 4])
    assert list(a | b) == [1, 3, 4, 5]
    assert list(a & b) == [3]
    assert list(a - b) == [1, 5]
    assert len(a) == 3 and 3 in a and 2 not in a
    assert NodeSet.of([3]) <= a


def test_canonicalize_removes_latent_parents_and_small_latents():
    # L1 -> L2, L2 -> {A, B}, L1 -> {A}, L3 -> {B}
    dag = LvDag.from_names("AB", ["L1", "L2", "L3"],
                           [("L1", "L2"), ("L2", "A"), ("L2", "B"), ("L1", "A"), ("L3", "B")])
    c = canonicalize(dag)
    assert isinstance(c, CanonicalDag) and is_canonical(c)
    assert c.p_o == 2 and c.p_l == 2
    assert c.reduction_log
    names = [c.name(v) for v in c.latent]
    assert "L3" not in names


def test_canonicalize_is_identity_on_canonical():
    dag = validate(catalog.g4())
    c = canonicalize(dag)
    assert c.edges == dag.edges and c.original_ids == tuple(range(dag.p))


def test_reduction_preserves_observed_distribution():
    rng = np.random.default_rng(0)
    dag = catalog.proxy()
    weights = {e: rng.uniform(0.5, 1.0) for e in dag.edges}
    model = WeightedModel(dag, weights)
    cdag, bprime = reduce_weights_to_canonical(model)
    a = model.adjacency()
    full = np.linalg.inv(np.eye(dag.p) - a)[list(dag.observed)]
    assert bprime.shape == (cdag.p_o, cdag.p)
    np.testing.assert_allclose(bprime[:, :cdag.p_o], full[:, list(dag.observed)], atol=1e-12)


def test_json_roundtrip_and_unknown_keys():
    dag = catalog.iv()
    obj = dag_to_json(dag)
    back = dag_from_json(json.loads(dumps_graph(obj)))
    assert back.edges == dag.edges and back.names == dag.names
    with pytest.raises(GraphFormatError):
        dag_from_json({**obj, "bogus": 1})
    with pytest.raises(GraphFormatError):
        dag_from_json({**obj, "p_o": 7})


def test_model_json_roundtrip():
    dag = validate(catalog.g1())
    model = sample_weights(dag, 3)
    back = model_from_json(json.loads(json.dumps(model_to_json(model))))
    assert back.weights == model.weights


def test_scaling_edge_must_be_one():
    dag = validate(catalog.g1())
    model = sample_weights(dag, 3)
    l = dag.latent[0]
    bad = dict(model.weights)
    bad[(l, dag.first_child(l))] = 0.7
    with pytest.raises(ValueError):
        WeightedModel(dag, bad)


def test_mixing_matches_inverse():
    dag = validate(catalog.g4())
    model = sample_weights(dag, 1)
    b = build_mixing(model)
    inv = np.linalg.inv(np.eye(dag.p) - model.adjacency())
    np.testing.assert_allclose(b.values, inv[np.ix_(b.rows, b.columns)], atol=1e-12)
