from collections import Counter

import pytest

from tropmorph import props
from tropmorph.errors import PreconditionViolated
from tropmorph.gluing_datum import GluingDatum, all_trees, enumerate_datums
from tropmorph.graph_core import path_graph

from conftest import load_worked


def core(g):
    """Vertices and edges left after repeatedly stripping vertices of valency one."""
    verts, edges = set(g.vertices), set(g.edges)
    while True:
        val = Counter()
        for e in edges:
            a, b = g.ends[e]
            val[a] += 1
            val[b] += 1
        leaves = {v for v in verts if val[v] <= 1}
        if not leaves:
            return verts, edges
        verts -= leaves
        edges = {e for e in edges if not set(g.ends[e]) & leaves}


def oracle_conditions(m):
    q = m.quotient
    g = q.graph
    cv, ce = core(g)
    tree = m.tree
    leaf = {v for v in tree.vertices if len(tree.incident(v)) == 1}
    dng = all(q.index[x] == 1 for x in list(g.vertices) + list(g.edges) if x not in cv | ce)
    no_return = True
    for a in cv:
        if q.element[a] in leaf:
            continue
        images = {q.element[e] for e in g.incident(a) if e in ce}
        no_return &= len(images) >= 2
    # skeleton paths: chains of core edges between core vertices of core valency >= 3
    cval = Counter()
    for e in ce:
        for x in g.ends[e]:
            cval[x] += 1
    branch = {a for a in cv if cval[a] >= 3}
    leafy = {t for t in tree.edges if set(tree.ends[t]) & leaf}
    pass_once, used = True, set()
    for a in branch:
        for e in g.incident(a):
            if e not in ce or e in used:
                continue
            path, cur, prev = [e], g.other_end(e, a), e
            while cur not in branch:
                prev = next(f for f in g.incident(cur) if f in ce and f != prev)
                path.append(prev)
                cur = g.other_end(prev, cur)
            used.update(path)
            over = [q.element[x] for x in path if q.element[x] not in leafy]
            pass_once &= len(over) == len(set(over))
    return dng, no_return, pass_once


def test_worked_example_conditions(m1):
    table = props.condition_table(m1)
    assert all(v["ok"] for v in table.values())


def test_trivial_path_not_change_minimal():
    m = GluingDatum(path_graph(2), 1)
    assert not props.check_change_minimal(m)
    # change is zero everywhere, so the interior vertex has change plus valency 2
    assert all(props.change_of(m, v) == 0 for v in m.tree.vertices)
    assert props.check_no_return(GluingDatum(path_graph(2), 1))


def test_limit_is_not_possibly_full_dimensional():
    lim = load_worked(2)[0].datum
    res = props.check_possibly_full_dimensional(lim)
    assert not res and res.witness["condition"] == "change_minimal"


@pytest.mark.parametrize("d,n", [(2, 4), (3, 3)])
def test_conditions_against_oracle(d, n):
    seen = Counter()
    for k in range(1, n + 1):
        for t in all_trees(k):
            for m in enumerate_datums(t, d):
                if m.quotient.genus < 2:
                    continue
                got = (bool(props.check_dangling_no_glue(m)), bool(props.check_no_return(m)),
                       bool(props.check_pass_once(m)))
                assert got == oracle_conditions(m)
                seen[got] += 1
    # both outcomes of every condition occur
    for i in range(3):
        assert {key[i] for key in seen} == {True, False}


def test_classify_worked_example(m1):
    q = m1.quotient
    tags = Counter(props.classify_local(m1, a) for a in q.graph.vertices if not q.is_dangling(a))
    assert tags == {"r0-nd3": 6, "r2-nd2": 6, "r0-nd2": 3}
    case = props.classify_local_detail(m1, "v4[1,2]")
    assert case.r == 2 and [q.index[e] for e in case.edges] == [1, 1]


def test_classify_needs_preconditions():
    m = load_worked(2)[0].datum
    a = next(a for a in m.quotient.graph.vertices if not m.quotient.is_dangling(a))
    with pytest.raises(PreconditionViolated):
        props.classify_local(m, a)


def test_full_dimensional_implies_conditions():
    from tropmorph.elmap import is_full_dimensional

    hits = 0
    for t in all_trees(3):
        for m in enumerate_datums(t, 2):
            if m.quotient.genus >= 2 and is_full_dimensional(m):
                hits += 1
                assert all(v["ok"] for v in props.condition_table(m).values())
    assert hits > 0
