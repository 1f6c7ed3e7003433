import pytest

from tropmorph.elmap import determinant, edge_length_matrix
from tropmorph.errors import BalancingViolation, GenusDrops, UnknownEdge
from tropmorph.gluing_datum import GluingDatum, all_trees, canonical_key, enumerate_datums
from tropmorph.graph_core import path_graph
from tropmorph.limits_regrow import (
    LimitDatum,
    base_trees,
    induced_labellings,
    limit_at,
    regrow,
    transport_labelling,
    verify_balancing,
)

from conftest import M1_LABELLING, WORKED_DETS, load_worked
from property_suite import SuiteReport, check_regrow_completeness


def test_limit_of_m1_is_m2(m1):
    lim = limit_at(m1, "t1")
    golden, _ = load_worked(2)
    assert canonical_key(lim.datum) == canonical_key(golden.datum)
    assert lim.merged_vertex == golden.merged_vertex and lim.edge == "t1"
    assert lim.datum.quotient.genus == 4


def test_limit_of_m5_is_m6():
    m5, _ = load_worked(5)
    golden, _ = load_worked(6)
    assert canonical_key(limit_at(m5, golden.edge).datum) == canonical_key(golden.datum)


def test_limit_errors(m1):
    with pytest.raises(UnknownEdge):
        limit_at(m1, "zz")
    # a leaf edge whose two sheets form a cycle over it
    m = GluingDatum(path_graph(1), 2, {"p0": [[1, 2]], "p1": [[1, 2]]})
    assert m.quotient.genus == 1
    with pytest.raises(GenusDrops):
        limit_at(m, "pe1")


def test_limits_preserve_genus_and_dangling():
    # a limit class is dangling exactly when every class contracting to it is
    for t in all_trees(3):
        for m in enumerate_datums(t, 2):
            q = m.quotient
            if q.genus < 1:
                continue
            for e in t.edges:
                try:
                    lim = limit_at(m, e)
                except GenusDrops:
                    continue
                q0 = lim.datum.quotient
                assert q0.genus == q.genus
                u, v = t.ends[e]
                for b in lim.datum.relations[lim.merged_vertex]:
                    parts = [q.class_of(x, i) for x in (u, v) for i in b]
                    assert q0.is_dangling(q0.class_of(lim.merged_vertex, b[0])) == all(
                        q.is_dangling(c) for c in parts)


@pytest.mark.parametrize("k,sizes", [(2, [(2, 2)] * 3), (4, [(0, 2), (1, 1)]),
                                     (6, [(1, 2)] * 3), (8, [(0, 2), (1, 1)])])
def test_base_trees(k, sizes):
    # merged vertices of valency 4, 2, 3 and 2 along the worked chain
    lim, _ = load_worked(k)
    trees = base_trees(lim)
    assert [(len(bt.split[0]), len(bt.split[1])) for bt in trees] == sizes
    for bt in trees:
        assert len(bt.tree.edges) == len(lim.datum.tree.edges) + 1
        assert set(bt.tree.ends[lim.edge]) == {bt.u, bt.v}


def test_regrow_m2():
    lim, lab = load_worked(2)
    cands = regrow(lim, lab)
    assert sorted(c.det for c in cands) == [-64, -64, 128]
    assert all(c.K == 1 for c in cands)
    assert verify_balancing(lim, cands) == 0
    keys = {canonical_key(c.datum) for c in cands}
    assert canonical_key(load_worked(1)[0]) in keys and canonical_key(load_worked(3)[0]) in keys


@pytest.mark.parametrize("k,dets", [(4, [(-64, 1), (0, 1), (16, 4)]),
                                    (6, [(-16, 1), (0, 2), (0, 2), (16, 1)]),
                                    (8, [(-16, 1), (0, 4), (16, 1)])])
def test_regrow_balances(k, dets):
    lim, lab = load_worked(k)
    cands = regrow(lim, lab)
    assert sorted((c.det, c.K) for c in cands) == dets
    assert verify_balancing(lim, cands) == 0
    # the datums either side of the limit in the chain are among the candidates
    keys = {canonical_key(c.datum) for c in cands}
    assert {canonical_key(load_worked(k - 1)[0]), canonical_key(load_worked(k + 1)[0])} <= keys
    found = {canonical_key(c.datum): c.det for c in cands if c.det}
    assert found[canonical_key(load_worked(k - 1)[0])] in (WORKED_DETS[k - 1], -WORKED_DETS[k - 1])


def test_incomplete_candidate_list_fails_balancing():
    lim, lab = load_worked(2)
    cands = regrow(lim, lab)
    with pytest.raises(BalancingViolation):
        verify_balancing(lim, cands[:1])


def test_two_labellings_of_m3(m1):
    # M3 is regrown twice from M2, once per way of identifying its limit with M2
    m3, _ = load_worked(3)
    lim, lab = load_worked(2)
    twins = [c for c in regrow(lim, lab) if canonical_key(c.datum) == canonical_key(m3)]
    assert len(twins) == 2 and twins[0].datum != twins[1].datum
    assert [c.det for c in twins] == [-64, -64]
    # every labelling of M3 induced from M1 through the common limit gives the same sign
    labs = induced_labellings(m1, "t1", M1_LABELLING, m3, "t1")
    assert {determinant(edge_length_matrix(m3, x)) for x in labs} == {-64}
    assert transport_labelling(m1, M1_LABELLING, "t1") in induced_labellings(m1, "t1", M1_LABELLING, m1, "t1")


def test_regrow_completeness_on_worked_chain():
    report = SuiteReport()
    for k in (1, 3, 5, 7, 9):
        check_regrow_completeness(load_worked(k)[0], report)
    assert report.ok and report.checked["g_regrow_completeness"] > 0


def test_limit_json_round_trip(m1):
    lim = limit_at(m1, "t1")
    back = LimitDatum.from_json(lim.to_json())
    assert back.datum == lim.datum and back.parent == m1 and back.ends == lim.ends
