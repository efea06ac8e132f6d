import pytest
from hypothesis import given, settings

from lvlingam import catalog
from lvlingam.certify import (IdQuery, Kind, NotObserved, SameNode, Setting, certify, dce_known,
                              dce_unknown, matrix_known, matrix_unknown, tce_known, tce_unknown)
from lvlingam.graph import CanonicalDag, canonicalize, validate

from conftest import canonical_dags

CHECKS = {("tce", "known"): tce_known, ("dce", "known"): dce_known,
          ("tce", "unknown"): tce_unknown, ("dce", "unknown"): dce_unknown}


def verdict(dag, kind, setting, src, dst):
    return CHECKS[kind, setting](dag, dag.node(src), dag.node(dst))


@pytest.mark.parametrize("edge, expected", [
    (("I", "T"), (True, True, True, True)),
    (("I", "Y"), (True, True, True, False)),
    (("T", "Y"), (True, True, False, False)),
])
def test_iv_table(edge, expected):
    dag = validate(catalog.iv())
    got = tuple(verdict(dag, k, s, *edge).identifiable
                for s, k in [("known", "tce"), ("known", "dce"), ("unknown", "tce"), ("unknown", "dce")])
    assert got == expected


def test_iv_witness_is_the_confounder():
    dag = validate(catalog.iv())
    v = tce_unknown(dag, dag.node("T"), dag.node("Y"))
    assert v.witness == (dag.node("L"),)
    assert v.to_json(dag)["witness"] == {"latent": "L"}


def test_proxy_graph():
    dag = canonicalize(catalog.proxy())
    assert verdict(dag, "tce", "known", "T", "Y").identifiable
    assert not verdict(dag, "tce", "known", "W", "T").identifiable
    assert not verdict(dag, "tce", "known", "W", "Y").identifiable


@pytest.mark.parametrize("kind", ["tce", "dce"])
def test_longitudinal_blue_and_red(kind):
    for builder in (catalog.longitudinal, catalog.longitudinal_varying):
        dag = canonicalize(builder())
        for u, v in [("T1", "T2"), ("T1", "Y1"), ("T2", "Y2")]:
            assert verdict(dag, kind, "known", u, v).identifiable, (builder.__name__, u, v)
        names = set(dag.names)
        for u, v in [(a, b) for a in ("C", "C1", "C2") for b in ("C2", "T1", "T2", "Y1", "Y2")]:
            if {u, v} <= names and (dag.node(u), dag.node(v)) in dag.edges:
                assert not verdict(dag, kind, "known", u, v).identifiable, (builder.__name__, u, v)


def test_underspecified_iv():
    dag = validate(catalog.underspecified_iv())
    assert verdict(dag, "tce", "known", "T1", "Y").identifiable
    assert verdict(dag, "tce", "known", "T2", "Y").identifiable


def test_proxy_g_graphs():
    # every confounder also reaches the proxy W, which comes first in the order
    for name in ("g1", "g2", "g3", "g4"):
        dag = validate(catalog.get(name))
        for setting in ("known", "unknown"):
            assert verdict(dag, "tce", setting, "T", "Y").identifiable, (name, setting)


def test_chained_swaps_break_direct_effect():
    # 0 -> 1 -> 2 -> 3, 0 -> 3, latents 4 -> {0, 2}, 5 -> {2, 3}
    edges = {(0, 1), (0, 3), (1, 2), (2, 3), (4, 0), (4, 2), (5, 2), (5, 3)}
    dag = CanonicalDag((0, 1, 2, 3), (4, 5), frozenset(edges))
    v = dce_unknown(dag, 0, 3)
    assert not v.identifiable
    assert v.chain == ((0, 4), (2, 5))
    assert v.witness_dict()["chain"] == [[0, 4], [2, 5]]
    assert dce_known(dag, 0, 3).identifiable


def test_matrix_checks():
    iv = validate(catalog.iv())
    v = matrix_unknown(iv)
    assert not v.identifiable and v.witness == (iv.node("Y"), iv.node("T"), iv.node("L"))
    assert matrix_known(iv).identifiable
    assert matrix_known(validate(catalog.underspecified_iv())).identifiable


def test_structurally_zero_flag():
    dag = validate(catalog.iv())
    v = tce_known(dag, dag.node("Y"), dag.node("T"))
    assert v.identifiable and v.structurally_zero
    v = dce_known(dag, dag.node("I"), dag.node("Y"))
    assert v.identifiable and v.structurally_zero


def test_errors():
    dag = validate(catalog.iv())
    with pytest.raises(NotObserved):
        tce_known(dag, dag.node("L"), dag.node("Y"))
    with pytest.raises(SameNode):
        tce_known(dag, 1, 1)
    with pytest.raises(SameNode):
        IdQuery(Kind.TOTAL, Setting.KNOWN, 2, 2)


def test_certify_dispatch():
    dag = validate(catalog.iv())
    q = IdQuery("tce", "unknown", dag.node("T"), dag.node("Y"))
    assert certify(dag, q) == tce_unknown(dag, dag.node("T"), dag.node("Y"))
    assert certify(dag, IdQuery("matrix", "known")) == matrix_known(dag)


@settings(max_examples=80, deadline=None)
@given(canonical_dags(max_obs=7, max_lat=4))
def test_known_graph_never_weaker(dag):
    for j in dag.observed:
        for i in dag.observed:
            if i == j:
                continue
            if tce_unknown(dag, j, i).identifiable:
                assert tce_known(dag, j, i).identifiable
            if dce_unknown(dag, j, i).identifiable:
                assert dce_known(dag, j, i).identifiable


@settings(max_examples=80, deadline=None)
@given(canonical_dags(max_obs=7, max_lat=4))
def test_no_latents_means_identifiable(dag):
    obs_only = CanonicalDag(dag.observed, (), frozenset(e for e in dag.edges if dag.is_observed(e[0])))
    for j in obs_only.observed:
        for i in obs_only.observed:
            if i != j:
                assert tce_unknown(obs_only, j, i).identifiable
                assert dce_unknown(obs_only, j, i).identifiable
    assert matrix_unknown(obs_only).identifiable


@settings(max_examples=80, deadline=None)
@given(canonical_dags(max_obs=7, max_lat=4))
def test_witness_satisfies_conditions(dag):
    for j in dag.observed:
        for i in dag.observed:
            if i == j:
                continue
            v = tce_unknown(dag, j, i)
            if not v.identifiable:
                (l,) = v.witness
                assert dag.first_child(l) == j
                assert dag.observed_descendants(l) == dag.observed_descendants(j)
                assert i in dag.observed_descendants_cut(l, j)


@settings(max_examples=40, deadline=None)
@given(canonical_dags(max_obs=7, max_lat=4))
def test_matrix_unidentifiable_iff_some_swap(dag):
    swap = any(dag.observed_descendants(l) == dag.observed_descendants(dag.first_child(l))
               for l in dag.latent)
    assert matrix_unknown(dag).identifiable == (not swap)
