import networkx as nx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tropmorph.errors import DisconnectedGraph, GenusZero, MetricLoop, UnknownEdge
from tropmorph.graph_core import (
    Graph,
    canonical_form,
    combinatorial_type,
    contract_edges,
    delete_dangling,
    essential_model,
    genus,
    is_connected,
    is_dangling,
    is_isomorphic,
    path_graph,
    subdivide_edge,
    valency,
)

from conftest import dumbbell, m1_datum, theta, tree_t1


def cycle(n):
    return Graph([f"c{i}" for i in range(n)], {f"k{i}": (f"c{i}", f"c{(i + 1) % n}") for i in range(n)})


def cycle_with_pendant():
    g = cycle(3)
    return Graph(list(g.vertices) + ["p1", "p2"],
                 {**g.ends, "q1": ("c0", "p1"), "q2": ("p1", "p2")})


def test_genus_examples(h_graph):
    assert genus(Graph(["v"], {})) == 0
    assert genus(theta()) == 2
    assert len(h_graph.vertices) == 6 and len(h_graph.edges) == 9
    assert genus(h_graph) == 4


def test_valency_counts_loops_twice(h_graph):
    assert valency(Graph(["v"], {}), "v") == 0
    assert valency(Graph(["v"], {"l": ("v", "v")}), "v") == 2
    assert all(valency(h_graph, v) == 3 for v in h_graph.vertices)


def test_unknown_endpoint_rejected():
    with pytest.raises(Exception):
        Graph(["a"], {"e": ("a", "b")})


def test_is_dangling():
    g = cycle(4)
    assert not any(is_dangling(g, e) for e in g.edges)
    g2 = cycle_with_pendant()
    assert is_dangling(g2, "q2") and is_dangling(g2, "q1") and is_dangling(g2, "p2")
    assert not is_dangling(g2, "c0")


def test_dangling_in_quotient_matches_pendant_classes():
    # the singleton sheets over the leaves of the worked datum hang off the skeleton
    q = m1_datum().quotient
    assert "v4[3]" in q.dangling[0]
    assert "t4[3]" in q.dangling[1]
    assert "t4[1,2]" not in q.dangling[1]


def test_delete_dangling():
    assert canonical_form(delete_dangling(cycle_with_pendant())) == canonical_form(cycle(3))
    assert delete_dangling(theta()) == theta()
    with pytest.raises(GenusZero):
        delete_dangling(path_graph(3))


def test_contract_edges():
    g = contract_edges(theta(), ["e1"])
    assert len(g.vertices) == 1 and all(g.is_loop(e) for e in g.edges)
    assert contract_edges(theta(), []) == theta()
    t2 = contract_edges(tree_t1(), ["t1"])
    assert len(t2.edges) == 8 and len(t2.vertices) == 9
    assert sorted(valency(t2, v) for v in t2.vertices).count(4) == 1


def test_essential_model():
    p = essential_model(path_graph(3))
    assert len(p.edges) == 1
    g = theta()
    g = subdivide_edge(g, "e1", "m", ("e1a", "e1b"))
    assert is_isomorphic(essential_model(g), theta())
    with pytest.raises(MetricLoop):
        essential_model(cycle(3))


def test_combinatorial_type():
    g = dumbbell()
    g = subdivide_edge(g, "br", "m", ("b1", "b2"))
    g = Graph(list(g.vertices) + ["x"], {**g.ends, "pend": ("m", "x")})
    assert is_isomorphic(combinatorial_type(g), dumbbell())
    assert combinatorial_type(theta()) == theta()


def test_isomorphism():
    assert is_isomorphic(theta(), theta()) is not None
    assert is_isomorphic(theta(), dumbbell()) is None
    relabelled = Graph(["x", "y"], {"f1": ("y", "x"), "f2": ("x", "y"), "f3": ("y", "x")})
    iso = is_isomorphic(theta(), relabelled)
    assert set(iso.edge_map.values()) == {"f1", "f2", "f3"}


def test_disconnected_graph_is_queryable_but_rejected_by_dangling():
    g = Graph(["a", "b"], {})
    assert not is_connected(g)
    with pytest.raises(DisconnectedGraph):
        delete_dangling(g)


def test_subdivide_unknown_edge():
    with pytest.raises(UnknownEdge):
        subdivide_edge(theta(), "zz", "m", ("a", "b"))


def test_json_round_trip(h_graph):
    assert Graph.from_json(h_graph.to_json()) == h_graph


@st.composite
def multigraphs(draw, max_vertices=6, max_edges=12):
    n = draw(st.integers(1, max_vertices))
    pairs = draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=max_edges))
    return Graph([f"v{i}" for i in range(n)], {f"e{k}": (f"v{a}", f"v{b}") for k, (a, b) in enumerate(pairs)})


def to_nx(g):
    h = nx.MultiGraph()
    h.add_nodes_from(g.vertices)
    h.add_edges_from(g.ends.values())
    return h


@settings(max_examples=200, deadline=None)
@given(multigraphs())
def test_genus_against_networkx(g):
    h = to_nx(g)
    assert is_connected(g) == nx.is_connected(h)
    if is_connected(g):
        assert genus(g) == h.number_of_edges() - h.number_of_nodes() + 1
        assert all(valency(g, v) == h.degree(v) for v in g.vertices)


@settings(max_examples=200, deadline=None)
@given(multigraphs(), st.data())
def test_genus_invariant_under_subdivision_and_contraction(g, data):
    if not is_connected(g) or not g.edges:
        return
    e = data.draw(st.sampled_from(sorted(g.edges)))
    assert genus(subdivide_edge(g, e, "new", ("n1", "n2"))) == genus(g)
    # contracting a non-loop edge that closes no cycle keeps the genus
    forest = nx.minimum_spanning_tree(to_nx(g))
    tree_edges = [x for x in g.edges if not g.is_loop(x)
                  and forest.has_edge(*g.ends[x])
                  and sum(1 for y in g.edges if set(g.ends[y]) == set(g.ends[x])) == 1]
    if tree_edges:
        assert genus(contract_edges(g, [tree_edges[0]])) == genus(g)


@settings(max_examples=150, deadline=None)
@given(multigraphs(max_vertices=5, max_edges=8), multigraphs(max_vertices=5, max_edges=8),
       st.randoms(use_true_random=False))
def test_isomorphism_against_networkx(g, k, rnd):
    verts = list(g.vertices)
    shuffled = verts[:]
    rnd.shuffle(shuffled)
    ren = dict(zip(verts, shuffled))
    h = Graph(shuffled, {f"f{i}": (ren[a], ren[b]) for i, (a, b) in enumerate(g.ends.values())})
    assert is_isomorphic(g, h) is not None
    assert canonical_form(g) == canonical_form(h)
    expected = nx.is_isomorphic(to_nx(g), to_nx(k))
    assert (is_isomorphic(g, k) is not None) == expected
    assert (canonical_form(g) == canonical_form(k)) == expected
