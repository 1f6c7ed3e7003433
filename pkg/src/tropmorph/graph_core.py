"""Finite multigraphs with loops and the structural operations on them.

A graph is stored as an incidence multiset: every edge id maps to the (unordered)
pair of its end vertices; a loop repeats its vertex.  Ids are opaque hashables
(strings in every file format).  Nothing here depends on id ordering except the
tie-breaking helper :func:`natural_key`, which only picks representative names.
"""
from __future__ import annotations

import itertools
import re
from collections import Counter, defaultdict
from dataclasses import dataclass
from functools import lru_cache
from types import MappingProxyType
from typing import Hashable, Iterable, Iterator, Mapping

from .errors import (
    DisconnectedGraph,
    GenusDrops,
    GenusTooSmall,
    GenusZero,
    MetricLoop,
    UnknownEdge,
    UnknownVertex,
)

Id = Hashable

_DIGITS = re.compile(r"(\d+)")


@lru_cache(maxsize=1 << 16)
def natural_key(x: object) -> tuple:
    """Sort key that orders ``t2`` before ``t10``."""
    parts = _DIGITS.split(str(x))
    return tuple((0, int(p)) if p.isdigit() else (1, p) for p in parts)


def nsorted(items: Iterable) -> list:
    return sorted(items, key=natural_key)


class Graph:
    """Immutable multigraph with loops."""

    __slots__ = ("_vertices", "_ends", "_incident", "_memo")

    def __init__(self, vertices: Iterable[Id], ends: Mapping[Id, tuple[Id, Id]]):
        verts = tuple(dict.fromkeys(vertices))
        vset = set(verts)
        norm: dict[Id, tuple[Id, Id]] = {}
        for e, pair in ends.items():
            a, b = pair
            for x in (a, b):
                if x not in vset:
                    raise UnknownVertex(f"edge {e!r} has undeclared end {x!r}")
            norm[e] = (a, b)
        self._vertices = verts
        self._ends = MappingProxyType(norm)
        inc: dict[Id, list[Id]] = {v: [] for v in verts}
        for e, (a, b) in norm.items():
            inc[a].append(e)
            if b != a:
                inc[b].append(e)
        self._incident = MappingProxyType({v: tuple(es) for v, es in inc.items()})
        self._memo: dict = {}

    # -- basic accessors -------------------------------------------------
    @property
    def vertices(self) -> tuple:
        return self._vertices

    @property
    def edges(self) -> tuple:
        return tuple(self._ends)

    @property
    def ends(self) -> Mapping[Id, tuple[Id, Id]]:
        return self._ends

    def incident(self, v: Id) -> tuple:
        """Edges incident to ``v`` (a loop is listed once)."""
        try:
            return self._incident[v]
        except KeyError:
            raise UnknownVertex(repr(v)) from None

    def has_vertex(self, v: Id) -> bool:
        return v in self._incident

    def has_edge(self, e: Id) -> bool:
        return e in self._ends

    def is_loop(self, e: Id) -> bool:
        a, b = self._ends[e]
        return a == b

    def other_end(self, e: Id, v: Id) -> Id:
        a, b = self._ends[e]
        return b if a == v else a

    def memo(self, key, compute):
        """Derived data cached on this instance; safe because graphs are immutable."""
        try:
            return self._memo[key]
        except KeyError:
            value = self._memo[key] = compute(self)
            return value

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        if set(self._vertices) != set(other._vertices):
            return False
        if set(self._ends) != set(other._ends):
            return False
        return all(Counter(self._ends[e]) == Counter(other._ends[e]) for e in self._ends)

    def __hash__(self) -> int:
        return hash((frozenset(self._vertices), frozenset(self._ends)))

    def __repr__(self) -> str:
        return f"Graph(|V|={len(self._vertices)}, |E|={len(self._ends)})"

    # -- serialization ---------------------------------------------------
    def to_json(self) -> dict:
        return {
            "vertices": [str(v) for v in self._vertices],
            "edges": [{"id": str(e), "ends": [str(a), str(b)]} for e, (a, b) in self._ends.items()],
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "Graph":
        ends = {}
        for item in data.get("edges", []):
            a, b = item["ends"]
            if item["id"] in ends:
                raise UnknownEdge(f"duplicate edge id {item['id']!r}")
            ends[item["id"]] = (a, b)
        return cls(data["vertices"], ends)

    # -- derived graphs --------------------------------------------------
    def subgraph(self, vertices: Iterable[Id], edges: Iterable[Id]) -> "Graph":
        return Graph(vertices, {e: self._ends[e] for e in edges})


@dataclass(frozen=True)
class EdgeLabelling:
    """Bijection from edges to 1..|E| given by an explicit order."""

    order: tuple

    def label(self, e: Id) -> int:
        return self.order.index(e) + 1

    def to_json(self) -> dict:
        return {"edge_order": [str(e) for e in self.order]}

    @classmethod
    def from_json(cls, data: Mapping, g: Graph | None = None) -> "EdgeLabelling":
        order = tuple(data["edge_order"])
        if g is not None:
            if len(set(order)) != len(order) or set(order) != set(g.edges):
                raise UnknownEdge("edge_order must list every edge exactly once")
        return cls(order)


def path_graph(n_edges: int, prefix: str = "p") -> Graph:
    verts = [f"{prefix}{i}" for i in range(n_edges + 1)]
    return Graph(verts, {f"{prefix}e{i + 1}": (verts[i], verts[i + 1]) for i in range(n_edges)})


# -- connectivity --------------------------------------------------------

def components(g: Graph) -> list[set]:
    seen: set = set()
    comps = []
    for v in g.vertices:
        if v in seen:
            continue
        comp = {v}
        stack = [v]
        while stack:
            x = stack.pop()
            for e in g.incident(x):
                y = g.other_end(e, x)
                if y not in comp:
                    comp.add(y)
                    stack.append(y)
        seen |= comp
        comps.append(comp)
    return comps


def is_connected(g: Graph) -> bool:
    return g.memo("connected", lambda h: len(components(h)) <= 1)


def _require_connected(g: Graph) -> None:
    if not is_connected(g):
        raise DisconnectedGraph(f"{g!r} has more than one component")


def genus(g: Graph) -> int:
    """First Betti number ``|E| - |V| + 1`` of a connected graph."""
    _require_connected(g)
    return len(g.edges) - len(g.vertices) + 1


def valency(g: Graph, v: Id) -> int:
    """Number of edge-ends at ``v``; loops count twice."""
    table = g.memo("valency", _valencies)
    try:
        return table[v]
    except KeyError:
        raise UnknownVertex(repr(v)) from None


def _valencies(g: Graph) -> dict:
    return {v: sum(2 if g.is_loop(e) else 1 for e in g.incident(v)) for v in g.vertices}


def is_tree(g: Graph) -> bool:
    return len(g.vertices) > 0 and is_connected(g) and len(g.edges) == len(g.vertices) - 1


# -- dangling elements ---------------------------------------------------

def dangling_elements(g: Graph) -> tuple[frozenset, frozenset]:
    """Return ``(dangling vertices, dangling edges)`` of a connected graph.

    An edge is dangling when deleting it separates off a tree.  Iteratively
    stripping vertices of valency one removes exactly those edges.
    """
    _require_connected(g)
    val = {v: valency(g, v) for v in g.vertices}
    alive_e = set(g.edges)
    alive_v = set(g.vertices)
    stack = [v for v in g.vertices if val[v] <= 1]
    while stack:
        v = stack.pop()
        if v not in alive_v or val[v] > 1:
            continue
        if val[v] == 0 and len(alive_v) == 1:
            break
        alive_v.discard(v)
        for e in g.incident(v):
            if e in alive_e:
                alive_e.discard(e)
                w = g.other_end(e, v)
                val[w] -= 1
                if val[w] <= 1:
                    stack.append(w)
    dang_e = frozenset(e for e in g.edges if e not in alive_e)
    dang_v = frozenset(v for v in g.vertices if all(e in dang_e for e in g.incident(v)))
    return dang_v, dang_e


def is_dangling(g: Graph, x: Id) -> bool:
    dv, de = dangling_elements(g)
    if g.has_edge(x):
        return x in de
    if g.has_vertex(x):
        return x in dv
    raise UnknownVertex(repr(x))


def delete_dangling(g: Graph) -> Graph:
    """Remove every dangling vertex and edge; genus is preserved."""
    dv, de = dangling_elements(g)
    if len(g.edges) - len(g.vertices) + 1 < 1:
        raise GenusZero("deleting dangling elements of a tree leaves nothing")
    return g.subgraph([v for v in g.vertices if v not in dv], [e for e in g.edges if e not in de])


# -- contraction and suppression -----------------------------------------

def contract_with_map(g: Graph, s: Iterable[Id], names: Mapping | None = None) -> tuple[Graph, dict]:
    """Contract the edge set ``s``; return the new graph and the vertex projection.

    ``names`` may map a frozenset of merged vertices to the id of the merged vertex;
    by default the naturally least id of the block is used.  Contracting a loop, or
    a set containing a cycle, is rejected since it lowers the genus.
    """
    s = list(dict.fromkeys(s))
    for e in s:
        if not g.has_edge(e):
            raise UnknownEdge(repr(e))
    parent = {v: v for v in g.vertices}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for e in s:
        a, b = g.ends[e]
        ra, rb = find(a), find(b)
        if ra == rb:
            raise GenusDrops(f"contracting {e!r} would contract a cycle")
        parent[ra] = rb
    blocks: dict = defaultdict(list)
    for v in g.vertices:
        blocks[find(v)].append(v)
    proj = {}
    new_vertices = []
    for v in g.vertices:
        r = find(v)
        if r not in proj:
            block = frozenset(blocks[r])
            if names and block in names:
                rep = names[block]
            else:
                rep = nsorted(block)[0]
            proj[r] = rep
            new_vertices.append(rep)
    vmap = {v: proj[find(v)] for v in g.vertices}
    sset = set(s)
    ends = {e: (vmap[a], vmap[b]) for e, (a, b) in g.ends.items() if e not in sset}
    return Graph(new_vertices, ends), vmap


def contract_edges(g: Graph, s: Iterable[Id]) -> Graph:
    return contract_with_map(g, s)[0]


def subdivide_edge(g: Graph, e: Id, new_vertex: Id, new_edges: tuple[Id, Id]) -> Graph:
    if not g.has_edge(e):
        raise UnknownEdge(repr(e))
    a, b = g.ends[e]
    ends = {x: p for x, p in g.ends.items() if x != e}
    ends[new_edges[0]] = (a, new_vertex)
    ends[new_edges[1]] = (new_vertex, b)
    return Graph(list(g.vertices) + [new_vertex], ends)


def essential_model_map(g: Graph) -> tuple[Graph, dict]:
    """Suppress all divalent vertices.

    Returns the essential model and, for each of its edges, the tuple of original
    edges it is made of, listed along the path (useful for summing lengths).
    """
    _require_connected(g)
    ends = dict(g.ends)
    comp = {e: (e,) for e in ends}
    alive = list(g.vertices)
    while True:
        inc: dict = {v: [] for v in alive}
        for e, (a, b) in ends.items():
            inc[a].append(e)
            if b != a:
                inc[b].append(e)
        target = None
        for v in nsorted(alive):
            val = sum(2 if ends[e][0] == ends[e][1] else 1 for e in inc[v])
            if val == 2:
                target = v
                break
        if target is None:
            break
        v = target
        es = inc[v]
        if len(es) == 1:
            raise MetricLoop("graph is a single cycle; it has no essential model")
        e1, e2 = nsorted(es)
        a = ends[e1][0] if ends[e1][1] == v else ends[e1][1]
        b = ends[e2][1] if ends[e2][0] == v else ends[e2][0]
        p1 = comp[e1] if ends[e1][1] == v else tuple(reversed(comp[e1]))
        p2 = comp[e2] if ends[e2][0] == v else tuple(reversed(comp[e2]))
        del ends[e2], comp[e2]
        ends[e1] = (a, b)
        comp[e1] = p1 + p2
        alive.remove(v)
    return Graph(alive, ends), comp


def essential_model(g: Graph) -> Graph:
    return essential_model_map(g)[0]


def combinatorial_type_map(g: Graph) -> tuple[Graph, dict]:
    if genus(g) < 2:
        raise GenusTooSmall("combinatorial type needs genus at least two")
    return essential_model_map(delete_dangling(g))


def combinatorial_type(g: Graph) -> Graph:
    return combinatorial_type_map(g)[0]


# -- isomorphism -----------------------------------------------------------

@dataclass(frozen=True)
class Isomorphism:
    vertex_map: Mapping
    edge_map: Mapping


def _pair_counts(g: Graph) -> dict:
    cnt: dict = defaultdict(list)
    for e, (a, b) in g.ends.items():
        cnt[frozenset((a, b))].append(e)
    return cnt


def refined_colors(g: Graph, initial: Mapping | None = None) -> dict:
    """Colour refinement by (valency, loops, neighbour colour multiset).

    Colours are canonical integers (independent of ids) so they can be compared
    across graphs when both are refined from comparable initial colours.
    """
    nbr: dict = {v: [] for v in g.vertices}
    loops = Counter()
    for e, (a, b) in g.ends.items():
        if a == b:
            loops[a] += 1
        else:
            nbr[a].append(b)
            nbr[b].append(a)
    col = {v: (initial[v] if initial else 0, valency(g, v), loops[v]) for v in g.vertices}
    while True:
        sig = {v: (col[v], tuple(sorted(col[w] for w in nbr[v]))) for v in g.vertices}
        new = {v: sig[v] for v in g.vertices}
        if len(set(new.values())) == len(set(col.values())):
            return new
        col = new


def find_isomorphism(g1: Graph, g2: Graph, colors1: Mapping | None = None,
                     colors2: Mapping | None = None) -> Isomorphism | None:
    """Backtracking search for a vertex bijection preserving edge multiplicities."""
    if len(g1.vertices) != len(g2.vertices) or len(g1.edges) != len(g2.edges):
        return None
    c1 = refined_colors(g1, colors1)
    c2 = refined_colors(g2, colors2)
    if Counter(c1.values()) != Counter(c2.values()):
        return None
    p1, p2 = _pair_counts(g1), _pair_counts(g2)
    mult1 = {k: len(v) for k, v in p1.items()}
    mult2 = {k: len(v) for k, v in p2.items()}
    by_color2: dict = defaultdict(list)
    for v in g2.vertices:
        by_color2[c2[v]].append(v)
    class_size = Counter(c1.values())
    order = sorted(g1.vertices, key=lambda v: (class_size[c1[v]], natural_key(v)))
    # prefer an order where each vertex is adjacent to an earlier one
    ordered: list = []
    placed: set = set()
    remaining = list(order)
    while remaining:
        pick = None
        for v in remaining:
            if any(g1.other_end(e, v) in placed for e in g1.incident(v)):
                pick = v
                break
        if pick is None:
            pick = remaining[0]
        ordered.append(pick)
        placed.add(pick)
        remaining.remove(pick)

    fmap: dict = {}
    used: set = set()

    def consistent(v, w) -> bool:
        if mult1.get(frozenset((v,)), 0) != mult2.get(frozenset((w,)), 0):
            return False
        for x, y in fmap.items():
            if mult1.get(frozenset((v, x)), 0) != mult2.get(frozenset((w, y)), 0):
                return False
        return True

    def bt(i: int) -> bool:
        if i == len(ordered):
            return True
        v = ordered[i]
        for w in by_color2[c1[v]]:
            if w in used or not consistent(v, w):
                continue
            fmap[v] = w
            used.add(w)
            if bt(i + 1):
                return True
            del fmap[v]
            used.discard(w)
        return False

    if not bt(0):
        return None
    emap = {}
    for key, es in p1.items():
        img = frozenset(fmap[x] for x in key)
        for e, f in zip(nsorted(es), nsorted(p2[img])):
            emap[e] = f
    return Isomorphism(dict(fmap), emap)


def is_isomorphic(g1: Graph, g2: Graph) -> Isomorphism | None:
    return find_isomorphism(g1, g2)


def canonical_form(g: Graph) -> tuple:
    """A complete isomorphism invariant for small graphs.

    Minimises the edge-multiplicity table over all vertex orders compatible with
    the refined colour classes.  Intended for skeleton-sized graphs.
    """
    col = refined_colors(g)
    cells: dict = defaultdict(list)
    for v in g.vertices:
        cells[col[v]].append(v)
    keys = sorted(cells)
    mult = {k: len(v) for k, v in _pair_counts(g).items()}
    best = None
    for perms in itertools.product(*(itertools.permutations(cells[k]) for k in keys)):
        order = [v for p in perms for v in p]
        table = tuple(
            mult.get(frozenset((order[i], order[j])), 0)
            for i in range(len(order)) for j in range(i, len(order))
        )
        if best is None or table < best:
            best = table
    return (tuple(keys), tuple(len(cells[k]) for k in keys), best)


def iter_edge_pairs(g: Graph) -> Iterator[tuple[Id, Id, Id]]:
    for e, (a, b) in g.ends.items():
        yield e, a, b
