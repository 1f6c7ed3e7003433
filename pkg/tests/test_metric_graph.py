from fractions import Fraction

import pytest

from tropmorph.errors import NonPositiveLength, UnknownEdge
from tropmorph.graph_core import Graph, is_isomorphic
from tropmorph.metric_graph import (
    MetricGraph,
    ModuliPoint,
    canonicalize,
    fraction_str,
    is_in_closed_cone,
    isometric,
    to_fraction,
)

from conftest import dumbbell, theta


def cycle_with_pendant():
    g = Graph(["a", "b", "p"], {"c1": ("a", "b"), "c2": ("b", "a"), "q": ("a", "p")})
    return MetricGraph(g, {"c1": 1, "c2": 1, "q": 5})


def test_exact_lengths_only():
    assert to_fraction("3/4") == Fraction(3, 4)
    with pytest.raises(TypeError):
        to_fraction(0.5)
    assert fraction_str(Fraction(6, 3)) == "2" and fraction_str(Fraction(1, 2)) == "1/2"


def test_lengths_validated():
    with pytest.raises(NonPositiveLength):
        MetricGraph(theta(), {"e1": 0, "e2": 1, "e3": 1})
    with pytest.raises(UnknownEdge):
        MetricGraph(theta(), {"e1": 1, "e2": 1})
    with pytest.raises(UnknownEdge):
        MetricGraph(theta(), {"e1": 1, "e2": 1, "e3": 1, "zz": 1})


def test_canonicalize_suppresses_and_prunes():
    p = canonicalize(MetricGraph(theta(), {"e1": 1, "e2": 2, "e3": 3}))
    assert sorted(p.lengths.values()) == [1, 2, 3]
    g = Graph(["a", "b", "m", "x"], {"e1": ("a", "b"), "e2a": ("a", "m"), "e2b": ("m", "b"),
                                     "e3": ("a", "b"), "pend": ("m", "x")})
    q = canonicalize(MetricGraph(g, {"e1": 1, "e2a": Fraction(1, 2), "e2b": Fraction(3, 2),
                                     "e3": 3, "pend": 5}))
    assert is_isomorphic(q.type_graph, theta())
    assert sorted(q.lengths.values()) == [1, 2, 3]


def test_canonicalize_invariant_under_modification():
    base = MetricGraph(dumbbell(), {"l1": 2, "br": Fraction(1, 3), "l2": 7})
    g = dumbbell()
    g = Graph(list(g.vertices) + ["x", "y"], {**g.ends, "p1": ("a", "x"), "p2": ("x", "y")})
    modified = MetricGraph(g, {"l1": 2, "br": Fraction(1, 3), "l2": 7, "p1": 4, "p2": 9})
    assert isometric(canonicalize(base), canonicalize(modified))


def test_closed_cone():
    assert is_in_closed_cone(theta(), {"e1": 1, "e2": 1, "e3": 1})
    assert not is_in_closed_cone(theta(), {"e1": 0, "e2": 0, "e3": 1})
    assert is_in_closed_cone(dumbbell(), {"l1": 1, "br": 0, "l2": 1})


def test_contracted_point():
    p = ModuliPoint(dumbbell(), {"l1": 1, "br": 0, "l2": 2})
    c = p.contracted()
    assert len(c.model.vertices) == 1 and c.genus == 2


def test_isometric_distinguishes_lengths():
    p = ModuliPoint(theta(), {"e1": 1, "e2": 2, "e3": 3})
    q = ModuliPoint(theta(), {"e1": 3, "e2": 1, "e3": 2})
    r = ModuliPoint(theta(), {"e1": 1, "e2": 2, "e3": 4})
    assert isometric(p, q) and not isometric(p, r)


def test_json_round_trip():
    m = MetricGraph(theta(), {"e1": Fraction(1, 2), "e2": 2, "e3": 3})
    back = MetricGraph.from_json(m.to_json())
    assert back.model == m.model and dict(back.lengths) == dict(m.lengths)
