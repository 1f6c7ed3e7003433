from fractions import Fraction

import pytest

from tropmorph import dtm
from tropmorph.dtm import DiscreteTropicalMorphism
from tropmorph.errors import NonPositiveLength
from tropmorph.gluing_datum import all_trees, enumerate_datums
from tropmorph.graph_core import Graph, genus, path_graph

from conftest import theta


def test_identity():
    f = dtm.identity(theta())
    assert dtm.check(f).ok
    assert dtm.degree(f) == 1
    assert dtm.riemann_hurwitz_check(f)
    assert all(dtm.change(f, v) == 0 for v in theta().vertices)
    assert dtm.is_combinatorial_type(f)
    lhs, rhs = dtm.dimension_formula(f)
    assert lhs == rhs == 3


def test_raised_index_breaks_balancing():
    t = path_graph(1)
    f = dtm.identity(t)
    bad = DiscreteTropicalMorphism(f.source, f.target, f.vertex_map, f.edge_map,
                                   {**f.index, "pe1": 2})
    rep = dtm.check(bad)
    assert not rep.ok and rep.failures[0][0] == "balancing"
    assert rep.failures[0][1]["target_edge"] == "pe1"


def test_loops_rejected():
    g = Graph(["a"], {"l": ("a", "a")})
    rep = dtm.check(dtm.identity(g))
    assert not rep.ok and rep.failures[0][0] == "morphism"


def test_worked_example_quotient(m1):
    f = m1.quotient.to_dtm()
    assert dtm.check(f).ok
    assert dtm.degree(f) == 3
    # total change 2g - 2g'd + 2d - 2 with g = 4, g' = 0, d = 3
    assert sum(dtm.r_phi(f, a) for a in f.source.vertices) == 12
    assert sum(dtm.change(f, v) for v in f.target.vertices) == 12
    assert dtm.riemann_hurwitz_check(f)
    assert dtm.dimension_formula(f) == (9, 9)


def test_ramified_leaf_vertex(m1):
    # two sheets glued over a leaf, each incident edge of index 1: r = 2
    f = m1.quotient.to_dtm()
    assert f.index["v4[1,2]"] == 2
    assert dtm.r_phi(f, "v4[1,2]") == 2
    assert dtm.r_phi(f, "c[1]") == 0


def test_tropicalize():
    t = path_graph(1)
    src = Graph(["a", "b"], {"e": ("a", "b")})
    f = DiscreteTropicalMorphism(src, t, {"a": "p0", "b": "p1"}, {"e": "pe1"},
                                 {"a": 2, "b": 2, "e": 2})
    r = dtm.tropicalize(f, {"pe1": 3})
    assert r.source_lengths == {"e": Fraction(3, 2)}
    with pytest.raises(NonPositiveLength):
        dtm.tropicalize(f, {"pe1": 0})


def test_tropicalize_identity():
    t = path_graph(2)
    r = dtm.tropicalize(dtm.identity(t), {"pe1": 2, "pe2": Fraction(1, 3)})
    assert r.source_lengths == {"pe1": 2, "pe2": Fraction(1, 3)}


def test_delete_dangling_fibres(m1):
    f = m1.quotient.to_dtm()
    g = dtm.delete_dangling_fibres(f)
    assert dtm.delete_dangling_fibres(g) is g
    assert genus(g.source) == 4 and not dtm.has_dangling_fibres(g)


def test_enumerated_quotients():
    # degree, cross-formula agreement and idempotence on every datum with d <= 3, |E(T)| <= 3
    for d in (1, 2, 3):
        for n in range(1, 4):
            for t in all_trees(n):
                for m in enumerate_datums(t, d):
                    f = m.quotient.to_dtm()
                    assert dtm.check(f).ok and dtm.degree(f) == d
                    for a in f.source.vertices:
                        assert dtm._ramification_local(f, a) == dtm._ramification_defining(f, a)
                    if genus(f.source) >= 2:
                        g = dtm.delete_dangling_fibres(f)
                        assert dtm.delete_dangling_fibres(g) is g


def test_json_round_trip(m1):
    f = m1.quotient.to_dtm()
    back = DiscreteTropicalMorphism.from_json(f.to_json())
    assert back.to_json() == f.to_json()
