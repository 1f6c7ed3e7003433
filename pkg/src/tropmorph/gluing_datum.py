"""Gluing datums ``(T, d, ~)``: validation, the quotient graph, its skeleton,
conversion from tree-target morphisms, isomorphism and enumeration."""
from __future__ import annotations

import itertools
from collections import defaultdict
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from types import MappingProxyType
from typing import Callable, Iterator, Mapping

from . import partitions as P
from .errors import (
    GenusTooSmall,
    InvalidDatum,
    MalformedPartition,
    SearchSpaceTooLarge,
    TargetNotTree,
    UnknownEdge,
    UnknownVertex,
)
from .graph_core import (
    Graph,
    dangling_elements,
    is_tree,
    natural_key,
    nsorted,
    valency,
)

ENUMERATE_MAX_DEGREE = 4
ENUMERATE_MAX_EDGES = 9


@lru_cache(maxsize=1 << 18)
def class_id(x, block) -> str:
    return f"{x}[{','.join(str(i) for i in block)}]"


class GluingDatum:
    """A base tree, a degree and one partition of ``{1..d}`` per tree element.

    Relations omitted at construction are discrete.  Instances are immutable;
    derived objects (quotient, skeleton) are cached on first use.
    """

    def __init__(self, tree: Graph, degree: int, relations: Mapping | None = None):
        if degree < 1:
            raise MalformedPartition("degree must be positive")
        if set(tree.vertices) & set(tree.edges):
            raise InvalidDatum("tree vertex and edge ids must be distinct")
        self.tree = tree
        self.degree = degree
        rel = {}
        relations = dict(relations or {})
        for x, blocks in relations.items():
            if not (tree.has_vertex(x) or tree.has_edge(x)):
                raise UnknownVertex(f"relation given for unknown tree element {x!r}")
            rel[x] = P.check_partition(blocks, degree)
        disc = P.discrete(degree)
        full = {x: rel.get(x, disc) for x in self.elements}
        self.relations = MappingProxyType(full)

    @property
    def elements(self) -> tuple:
        return tuple(self.tree.vertices) + tuple(self.tree.edges)

    def relation(self, x) -> tuple:
        return self.relations[x]

    def block(self, x, i: int) -> tuple:
        return P.block_of(self.relations[x], i)

    def with_relations(self, updates: Mapping) -> "GluingDatum":
        rel = dict(self.relations)
        rel.update(updates)
        return GluingDatum(self.tree, self.degree, rel)

    @cached_property
    def key(self) -> tuple:
        return (
            self.degree,
            tuple(sorted(((str(x), self.relations[x]) for x in self.elements), key=lambda p: natural_key(p[0]))),
            tuple(sorted((str(e), tuple(sorted(map(str, ab)))) for e, ab in self.tree.ends.items())),
        )

    def __eq__(self, other):
        return isinstance(other, GluingDatum) and self.key == other.key

    def __hash__(self):
        return hash(self.key)

    def __repr__(self):
        return f"GluingDatum(d={self.degree}, |E(T)|={len(self.tree.edges)})"

    # -- json ------------------------------------------------------------
    def to_json(self) -> dict:
        disc = P.discrete(self.degree)
        return {
            "tree": self.tree.to_json(),
            "degree": self.degree,
            "relations": {
                str(x): P.to_json(p) for x, p in self.relations.items() if p != disc
            },
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "GluingDatum":
        return cls(Graph.from_json(data["tree"]), int(data["degree"]), data.get("relations", {}))

    # -- derived ---------------------------------------------------------
    @cached_property
    def quotient(self) -> "QuotientGraph":
        return quotient(self)


# -- validation ------------------------------------------------------------

@dataclass
class ValidationReport:
    ok: bool
    failures: list = field(default_factory=list)  # (axiom, witness)

    def to_json(self) -> dict:
        return {"ok": self.ok, "failures": [{"axiom": a, "witness": w} for a, w in self.failures]}


def class_ramification(m: GluingDatum, v, block: tuple) -> int:
    """``r(A) = 2(|A|-1) - sum over edges at A of (|e|-1)`` for the class ``block`` at ``v``."""
    bset = set(block)
    total = 2 * (len(block) - 1)
    for t in m.tree.incident(v):
        for c in m.relations[t]:
            if set(c) <= bset:
                total -= len(c) - 1
    return total


def validate(m: GluingDatum) -> ValidationReport:
    failures = []
    if not is_tree(m.tree):
        failures.append(("tree", "base graph is not a tree"))
        return ValidationReport(False, failures)
    for v in m.tree.vertices:
        for t in m.tree.incident(v):
            if not P.refines(m.relations[t], m.relations[v]):
                failures.append(("refinement", {"edge": str(t), "vertex": str(v)}))
    if failures:
        return ValidationReport(False, failures)
    for v in m.tree.vertices:
        for b in m.relations[v]:
            if class_ramification(m, v, b) < 0:
                failures.append(("riemann_hurwitz", {"vertex": str(v), "class": list(b)}))
    n_comp = quotient_components(m)
    if n_comp > 1:
        failures.append(("connectedness", {"components": n_comp}))
    return ValidationReport(not failures, failures)


def quotient_components(m: GluingDatum) -> int:
    """Number of connected components of the quotient, by union-find on sheets."""
    t, d = m.tree, m.degree
    parent = {(v, i): (v, i) for v in t.vertices for i in range(1, d + 1)}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    n = len(parent)
    for v in t.vertices:
        for b in m.relations[v]:
            for i in b[1:]:
                ra, rb = find((v, b[0])), find((v, i))
                if ra != rb:
                    parent[ra] = rb
                    n -= 1
    for e, (a, b) in t.ends.items():
        for i in range(1, d + 1):
            ra, rb = find((a, i)), find((b, i))
            if ra != rb:
                parent[ra] = rb
                n -= 1
    return n


def require_valid(m: GluingDatum) -> None:
    rep = validate(m)
    if not rep.ok:
        raise InvalidDatum(f"invalid gluing datum: {rep.failures[0]}")


# -- the quotient graph ---------------------------------------------------

def _raw_quotient_graph(m: GluingDatum):
    element, block = {}, {}
    verts = []
    for v in m.tree.vertices:
        for b in m.relations[v]:
            cid = class_id(v, b)
            verts.append(cid)
            element[cid] = v
            block[cid] = b
    ends = {}
    for t, (a, b_) in m.tree.ends.items():
        for c in m.relations[t]:
            cid = class_id(t, c)
            element[cid] = t
            block[cid] = c
            ends[cid] = (class_id(a, m.block(a, c[0])), class_id(b_, m.block(b_, c[0])))
    return Graph(verts, ends), element, block


@dataclass(frozen=True)
class Skeleton:
    graph: Graph
    membership: Mapping  # non-dangling G-edge -> skeleton edge id
    paths: Mapping  # skeleton edge id -> ordered tuple of G-edges

    def edge_of(self, e) -> str:
        return self.membership[e]


class QuotientGraph:
    """The graph ``G`` of classes with the natural map to the base tree."""

    def __init__(self, m: GluingDatum):
        self.datum = m
        self.graph, element, block = _raw_quotient_graph(m)
        self.element = MappingProxyType(element)
        self.block = MappingProxyType(block)
        self.index = MappingProxyType({c: len(b) for c, b in block.items()})

    def class_of(self, x, i: int) -> str:
        return class_id(x, self.datum.block(x, i))

    def above(self, x) -> list:
        return [class_id(x, b) for b in self.datum.relations[x]]

    @cached_property
    def genus(self) -> int:
        return len(self.graph.edges) - len(self.graph.vertices) + 1

    @cached_property
    def dangling(self) -> tuple[frozenset, frozenset]:
        return dangling_elements(self.graph)

    def is_dangling(self, c) -> bool:
        dv, de = self.dangling
        return c in dv or c in de

    @cached_property
    def nd_valency(self) -> Mapping:
        de = self.dangling[1]
        return MappingProxyType({
            a: sum(1 for e in self.graph.incident(a) if e not in de) for a in self.graph.vertices
        })

    def nd_edges(self, a) -> list:
        de = self.dangling[1]
        return [e for e in self.graph.incident(a) if e not in de]

    def valency(self, a) -> int:
        return valency(self.graph, a)

    @cached_property
    def skeleton(self) -> Skeleton:
        if self.genus < 2:
            raise GenusTooSmall("skeleton needs genus at least two")
        g = self.graph
        de = self.dangling[1]
        ndv = self.nd_valency
        svert = [a for a in g.vertices if ndv[a] >= 3]
        sset = set(svert)
        membership: dict = {}
        paths: dict = {}
        ends: dict = {}

        def walk(start_vertex, edge):
            """Follow a chain from ``start_vertex`` through ``edge`` to a skeleton vertex."""
            seq = [edge]
            cur = g.other_end(edge, start_vertex)
            prev = edge
            while cur not in sset:
                nxt = [e for e in g.incident(cur) if e not in de and e != prev]
                if len(nxt) != 1:
                    raise InvalidDatum("malformed non-dangling chain")
                prev = nxt[0]
                seq.append(prev)
                cur = g.other_end(prev, cur)
            return seq, cur

        for a in nsorted(svert):
            for e in nsorted(g.incident(a)):
                if e in de or e in membership:
                    continue
                seq, b = walk(a, e)
                hid = "h:" + nsorted(seq)[0]
                for x in seq:
                    membership[x] = hid
                paths[hid] = tuple(seq)
                ends[hid] = (a, b)
        nd_edges = [e for e in g.edges if e not in de]
        if len(membership) != len(nd_edges):
            raise InvalidDatum("skeleton does not cover the non-dangling edges")
        return Skeleton(Graph(svert, ends), MappingProxyType(membership), MappingProxyType(paths))

    def to_dtm(self):
        from .dtm import DiscreteTropicalMorphism

        g = self.graph
        vmap = {c: self.element[c] for c in g.vertices}
        emap = {c: self.element[c] for c in g.edges}
        index = dict(self.index)
        return DiscreteTropicalMorphism(g, self.datum.tree, vmap, emap, index)


def quotient(m: GluingDatum) -> QuotientGraph:
    require_valid(m)
    return QuotientGraph(m)


def skeleton(q: QuotientGraph) -> Graph:
    return q.skeleton.graph


# -- from a morphism --------------------------------------------------------

def from_dtm(f) -> GluingDatum:
    """Build a gluing datum whose quotient is isomorphic to ``f`` over the same tree.

    Tree elements are processed breadth first from the naturally least leaf; sheets
    are handed out to fibre elements in natural id order.
    """
    tree = f.target
    if not is_tree(tree):
        raise TargetNotTree("target of the morphism is not a tree")
    src = f.source
    fib_v: dict = defaultdict(list)
    fib_e: dict = defaultdict(list)
    for a in src.vertices:
        fib_v[f.vertex_map[a]].append(a)
    for e in src.edges:
        fib_e[f.edge_map[e]].append(e)
    d = sum(f.index[a] for a in fib_v[tree.vertices[0]])
    leaves = [v for v in tree.vertices if valency(tree, v) <= 1]
    root = nsorted(leaves)[0] if leaves else tree.vertices[0]
    sheets: dict = {}
    nxt = 1
    for a in nsorted(fib_v[root]):
        sheets[a] = tuple(range(nxt, nxt + f.index[a]))
        nxt += f.index[a]
    if nxt - 1 != d:
        raise InvalidDatum("fibre indices are inconsistent")
    seen = {root}
    queue = [root]
    while queue:
        v = queue.pop(0)
        for t in nsorted(tree.incident(v)):
            w = tree.other_end(t, v)
            if w in seen:
                continue
            seen.add(w)
            for a in nsorted(fib_v[v]):
                pool = list(sheets[a])
                for e in nsorted(x for x in fib_e[t] if a in src.ends[x]):
                    k = f.index[e]
                    sheets[e], pool = tuple(pool[:k]), pool[k:]
                if pool:
                    raise InvalidDatum(f"balancing fails at {a!r} over {t!r}")
            for b in fib_v[w]:
                got = sorted(i for e in fib_e[t] if b in src.ends[e] for i in sheets[e])
                sheets[b] = tuple(got)
            queue.append(w)
    rel = {}
    for v in tree.vertices:
        rel[v] = [list(sheets[a]) for a in fib_v[v]]
    for t in tree.edges:
        rel[t] = [list(sheets[e]) for e in fib_e[t]]
    return GluingDatum(tree, d, rel)


# -- isomorphism -------------------------------------------------------------

@dataclass(frozen=True)
class DatumIsomorphism:
    tree_map: Mapping  # tree element -> tree element
    class_map: Mapping  # G1 class id -> G2 class id
    permutations: Mapping  # tree element -> permutation tuple

    def to_json(self) -> dict:
        return {
            "tree_map": {str(k): str(v) for k, v in self.tree_map.items()},
            "permutations": {str(k): list(v) for k, v in self.permutations.items()},
        }


def _invariant(m: GluingDatum) -> tuple:
    t = m.tree
    prof = sorted(
        (valency(t, v), tuple(sorted(len(b) for b in m.relations[v]))) for v in t.vertices
    )
    eprof = sorted(tuple(sorted(len(b) for b in m.relations[e])) for e in t.edges)
    return (m.degree, len(t.vertices), tuple(prof), tuple(eprof))


def find_datum_isomorphism(
    m1: GluingDatum,
    m2: GluingDatum,
    tree_map: Mapping | None = None,
    edge_color1: Mapping | None = None,
    edge_color2: Mapping | None = None,
) -> DatumIsomorphism | None:
    """Search an isomorphism of datums (equivalently of the induced morphisms).

    ``tree_map`` optionally fixes the tree isomorphism; ``edge_color*`` optionally
    assign colours to classes above tree edges that the class map must respect.
    """
    return next(iter_datum_isomorphisms(m1, m2, tree_map, edge_color1, edge_color2), None)


def iter_datum_isomorphisms(
    m1: GluingDatum,
    m2: GluingDatum,
    tree_map: Mapping | None = None,
    edge_color1: Mapping | None = None,
    edge_color2: Mapping | None = None,
) -> Iterator[DatumIsomorphism]:
    """Every isomorphism from ``m1`` to ``m2`` (see :func:`find_datum_isomorphism`)."""
    if m1.degree != m2.degree or len(m1.tree.edges) != len(m2.tree.edges):
        return
    if tree_map is None and _invariant(m1) != _invariant(m2):
        return
    t1, t2 = m1.tree, m2.tree
    col1 = edge_color1 or {}
    col2 = edge_color2 or {}

    def cls(m, x):
        return [(x, b) for b in m.relations[x]]

    # DFS order of T1 from a root
    if tree_map is not None:
        root1 = nsorted(t1.vertices)[0]
        root_cands = [tree_map[root1]]
    else:
        best = None
        for v in t1.vertices:
            cands = [w for w in t2.vertices if valency(t2, w) == valency(t1, v)
                     and sorted(map(len, m2.relations[w])) == sorted(map(len, m1.relations[v]))]
            if best is None or len(cands) < len(best[1]):
                best = (v, cands)
        root1, root_cands = best
    order = []  # (edge, parent, child)

    def dfs(v, parent_edge):
        for t in nsorted(t1.incident(v)):
            if t == parent_edge:
                continue
            w = t1.other_end(t, v)
            order.append((t, v, w))
            dfs(w, t)

    dfs(root1, None)

    tau: dict = {}
    gamma: dict = {}  # (x, block) -> (y, block)

    def block_bijections(src, dst):
        """All size-preserving bijections between two lists of (x, block)."""
        if sorted(len(b) for _, b in src) != sorted(len(b) for _, b in dst):
            return
        for perm in itertools.permutations(dst):
            if all(len(a[1]) == len(b[1]) for a, b in zip(src, perm)):
                yield dict(zip(src, perm))

    def end_block(m, t, v, c):
        return (v, m.block(v, c[0]))

    def extend(k: int):
        if k == len(order):
            yield True
            return
        t, a1, b1 = order[k]
        a2 = tau[a1]
        if tree_map is not None:
            cand_t = [tree_map[t]] if tree_map[t] in t2.incident(a2) else []
        else:
            used = set(tau.values())
            cand_t = [x for x in t2.incident(a2) if x not in used]
        for t2e in cand_t:
            b2 = t2.other_end(t2e, a2)
            if tree_map is not None and tree_map.get(b1, b2) != b2:
                continue
            if b2 in tau.values() and tree_map is None:
                continue
            if valency(t1, b1) != valency(t2, b2):
                continue
            src_e = cls(m1, t)
            dst_e = cls(m2, t2e)
            # edge classes must map consistently with the parent-end classes
            for bij in block_bijections(src_e, dst_e):
                ok = True
                for e1, e2 in bij.items():
                    if gamma[end_block(m1, t, a1, e1[1])] != end_block(m2, t2e, a2, e2[1]):
                        ok = False
                        break
                    if col1.get(class_id(*e1)) != col2.get(class_id(*e2)):
                        ok = False
                        break
                if not ok:
                    continue
                vmap = {}
                for e1, e2 in bij.items():
                    s = end_block(m1, t, b1, e1[1])
                    img = end_block(m2, t2e, b2, e2[1])
                    if vmap.setdefault(s, img) != img:
                        ok = False
                        break
                if not ok:
                    continue
                if sorted(len(b) for _, b in vmap) != sorted(len(b) for _, b in vmap.values()):
                    continue
                if any(len(s[1]) != len(i[1]) for s, i in vmap.items()):
                    continue
                if len(set(vmap.values())) != len(vmap) or len(vmap) != len(m1.relations[b1]):
                    continue
                tau[t], tau[b1] = t2e, b2
                gamma.update(bij)
                gamma.update(vmap)
                yield from extend(k + 1)
                for key in list(bij) + list(vmap):
                    del gamma[key]
                del tau[t], tau[b1]

    for r2 in root_cands:
        tau.clear()
        gamma.clear()
        tau[root1] = r2
        for bij in block_bijections(cls(m1, root1), cls(m2, r2)):
            gamma.update(bij)
            for _ in extend(0):
                class_map = {class_id(*k): class_id(*v) for k, v in gamma.items()}
                perms = {}
                for x in m1.elements:
                    img = [0] * m1.degree
                    for b in m1.relations[x]:
                        y, b2 = gamma[(x, b)]
                        for i, j in zip(b, b2):
                            img[i - 1] = j
                    perms[x] = tuple(img)
                yield DatumIsomorphism(dict(tau), class_map, perms)
            for key in bij:
                gamma.pop(key, None)


def is_isomorphic(m1: GluingDatum, m2: GluingDatum) -> DatumIsomorphism | None:
    return find_datum_isomorphism(m1, m2)


def tree_centres(t: Graph) -> tuple:
    """The one or two vertices of minimum eccentricity."""
    return t.memo("centres", _tree_centres)


def _tree_centres(t: Graph) -> tuple:
    deg = {v: valency(t, v) for v in t.vertices}
    layer = [v for v in t.vertices if deg[v] <= 1]
    remaining = len(t.vertices)
    removed: set = set()
    while remaining > 2:
        remaining -= len(layer)
        nxt = []
        for v in layer:
            removed.add(v)
            for e in t.incident(v):
                w = t.other_end(e, v)
                if w not in removed:
                    deg[w] -= 1
                    if deg[w] == 1:
                        nxt.append(w)
        layer = nxt
    return tuple(nsorted(v for v in t.vertices if v not in removed))


_CODE_IDS: dict = {}
_BRANCH_TABLES: dict = {}
_VERTEX_CODES: dict = {}


def _code_id(code: tuple) -> int:
    return _CODE_IDS.setdefault(code, len(_CODE_IDS))


def canonical_key(m: GluingDatum) -> tuple:
    """A complete isomorphism invariant of a datum, comparable within one process.

    The tree is rooted at a centre and encoded bottom up.  A branch below an edge
    is encoded for every ordering of that edge's classes (its ports), and a vertex
    for every ordering of its classes; with at most ``d`` classes per element the
    minimisation over orderings is a small brute force.  Codes are interned as
    integers and branch tables are shared between datums, so the key is cheap
    inside an enumeration.
    """
    cached = m.__dict__.get("_canonical_key")
    if cached is not None:
        return cached
    t, rel = m.tree, m.relations

    def vertex_codes(cls, kids) -> list:
        hit = _VERTEX_CODES.get((cls, kids))
        if hit is not None:
            return hit
        out = []
        for sigma in itertools.permutations(range(len(cls))):
            rank = {cls[j]: k for k, j in enumerate(sigma)}
            contrib = sorted(
                min(((tuple(rank[P.block_of(cls, ports[i][0])] for i in pi), code)
                     for pi, code in table), key=lambda c: c)
                for ports, table in kids
            )
            out.append((sigma, _code_id((tuple(len(cls[j]) for j in sigma), tuple(contrib)))))
        _VERTEX_CODES[(cls, kids)] = out
        return out

    def kids_of(w, parent_edge) -> tuple:
        return tuple(sorted((rel[f], branch(f, t.other_end(f, w)))
                            for f in t.incident(w) if f != parent_edge))

    def branch(e, w) -> tuple:
        ports, cls = rel[e], rel[w]
        kids = kids_of(w, e)
        memo_key = (ports, cls, kids)
        hit = _BRANCH_TABLES.get(memo_key)
        if hit is not None:
            return hit
        vc = vertex_codes(cls, kids)
        table = []
        for pi in itertools.permutations(range(len(ports))):
            best = None
            for sigma, code in vc:
                rank = {cls[j]: k for k, j in enumerate(sigma)}
                att = tuple((len(ports[i]), rank[P.block_of(cls, ports[i][0])]) for i in pi)
                cand = _code_id((att, code))
                if best is None or cand < best:
                    best = cand
            table.append((pi, best))
        hit = tuple(table)
        _BRANCH_TABLES[memo_key] = hit
        return hit

    best = min(code for r in tree_centres(t) for _, code in vertex_codes(rel[r], kids_of(r, None)))
    m.__dict__["_canonical_key"] = (m.degree, best)
    return m.__dict__["_canonical_key"]


def tree_swap(m: GluingDatum, perm: tuple) -> GluingDatum:
    """Apply one sheet permutation to every relation."""
    return GluingDatum(m.tree, m.degree, {x: P.apply(perm, p) for x, p in m.relations.items()})


# -- enumeration ---------------------------------------------------------------

def vertex_change(m_rel: Mapping, tree: Graph, v, d: int) -> int:
    """``ch(v) = 2(d - n_v) - sum_t (d - n_t)`` with ``n`` the number of blocks."""
    return 2 * (d - len(m_rel[v])) - sum(d - len(m_rel[t]) for t in tree.incident(v))


def _classes_ok(rel: Mapping, tree: Graph, v) -> bool:
    for b in rel[v]:
        bset = set(b)
        total = 2 * (len(b) - 1)
        for t in tree.incident(v):
            for c in rel[t]:
                if set(c) <= bset:
                    total -= len(c) - 1
        if total < 0:
            return False
    return True


def enumerate_datums(
    t: Graph,
    d: int,
    filter: Callable[[GluingDatum], bool] | None = None,
    *,
    change_minimal: bool = False,
    prune: Callable[[Mapping, Graph, object], bool] | None = None,
    override: bool = False,
    dedupe: bool = True,
    tree_symmetry: bool | None = None,
) -> Iterator[GluingDatum]:
    """Yield one representative per isomorphism class of valid datums over ``t``.

    Relations are assigned depth first from the naturally least vertex; each new
    relation is only chosen up to the branch-swap symmetry available at that point,
    and remaining duplicates are removed by :func:`canonical_key`.
    ``change_minimal`` prunes vertices as soon as their change is known; ``prune``
    is called as ``prune(relations, tree, completed_vertex)`` and may reject.
    ``tree_symmetry`` (default: same as ``dedupe``) roots the tree at a centre and
    only keeps branches below isomorphic sibling subtrees in non-decreasing order.
    """
    if not is_tree(t):
        raise TargetNotTree("enumeration needs a tree")
    if not override and (d > ENUMERATE_MAX_DEGREE or len(t.edges) > ENUMERATE_MAX_EDGES):
        raise SearchSpaceTooLarge(f"d={d}, |E(T)|={len(t.edges)} exceeds the enumeration guard")
    if tree_symmetry is None:
        tree_symmetry = dedupe
    root = tree_centres(t)[0] if tree_symmetry else nsorted(t.vertices)[0]
    steps = [("v", root, None, None)]
    shape: dict = {}

    def code(v, parent_edge):
        kids = [e for e in t.incident(v) if e != parent_edge]
        return "(" + "".join(sorted(code(t.other_end(e, v), e) for e in kids)) + ")"

    # (start, end) step ranges of consecutive isomorphic sibling branches
    sibling_pairs: list = []

    def dfs(v, parent_edge):
        kids = [e for e in nsorted(t.incident(v)) if e != parent_edge]
        if tree_symmetry:
            for e in kids:
                shape[e] = code(t.other_end(e, v), e)
            kids.sort(key=lambda e: shape[e])
        prev = None
        for e in kids:
            w = t.other_end(e, v)
            start = len(steps)
            steps.append(("e", e, None, v))
            steps.append(("v", w, e, v))
            dfs(w, e)
            rng = (start, len(steps))
            if tree_symmetry and prev is not None and shape[prev[0]] == shape[e]:
                sibling_pairs.append((prev[1], rng))
            prev = (e, rng)

    dfs(root, None)
    order_checks: dict = defaultdict(list)
    for a, b in sibling_pairs:
        order_checks[b[1] - 1].append((a, b))
    choice: list = [0] * len(steps)
    pos = {s[1]: k for k, s in enumerate(steps)}
    complete_at: dict = defaultdict(list)
    for v in t.vertices:
        k = max([pos[v]] + [pos[e] for e in t.incident(v)])
        complete_at[k].append(v)

    rel: dict = {}
    seen: set = set()
    max_val_ok = (not change_minimal) or all(valency(t, v) <= 3 for v in t.vertices)
    if not max_val_ok:
        return

    def options(k):
        kind, x, pe, pv = steps[k]
        if kind == "v" and pe is None:
            return P.type_representatives(d)
        if kind == "e":
            pr = rel[pv]
            return P.orbit_representatives(P.refinements(pr), P.young_subgroup(pr))
        grp = P.stabilizer_in(P.young_subgroup(rel[pv]), rel[pe])
        return P.orbit_representatives(P.coarsenings(rel[pe]), grp)

    def ok_after(k) -> bool:
        for a, b in order_checks.get(k, ()):
            if choice[a[0]:a[1]] > choice[b[0]:b[1]]:
                return False
        for v in complete_at.get(k, ()):
            if not _classes_ok(rel, t, v):
                return False
            if change_minimal and vertex_change(rel, t, v, d) + valency(t, v) != 3:
                return False
            if prune is not None and not prune(rel, t, v):
                return False
        return True

    def rec(k):
        if k == len(steps):
            m = GluingDatum(t, d, dict(rel))
            if quotient_components(m) > 1:
                return
            if filter is not None and not filter(m):
                return
            if dedupe:
                key = canonical_key(m)
                if key in seen:
                    return
                seen.add(key)
            yield m
            return
        x = steps[k][1]
        for j, p in enumerate(options(k)):
            choice[k] = j
            rel[x] = p
            if ok_after(k):
                yield from rec(k + 1)
            del rel[x]

    yield from rec(0)


def all_trees(n_edges: int, max_valency: int | None = None) -> list[Graph]:
    """All unlabelled trees with ``n_edges`` edges, grown leaf by leaf and deduplicated
    by their centre-rooted codes."""
    trees: list[Graph] = [Graph(["x0"], {})]
    for n in range(1, n_edges + 1):
        nxt: dict = {}
        for tr in trees:
            for v in tr.vertices:
                if max_valency is not None and valency(tr, v) >= max_valency:
                    continue
                nv = f"x{n}"
                ends = dict(tr.ends)
                ends[f"s{n}"] = (v, nv)
                g = Graph(list(tr.vertices) + [nv], ends)
                key = _tree_code(g)
                nxt.setdefault(key, g)
        trees = [nxt[k] for k in sorted(nxt)]
    return [_relabel_tree(tr) for tr in trees]


def _tree_code(g: Graph) -> str:
    """Canonical code of an unlabelled tree (AHU encoding rooted at the centre)."""
    adj = {v: [g.other_end(e, v) for e in g.incident(v)] for v in g.vertices}
    if len(adj) == 1:
        return "()"
    # find centre(s)
    deg = {v: len(a) for v, a in adj.items()}
    layer = [v for v in adj if deg[v] <= 1]
    remaining = len(adj)
    removed = set()
    while remaining > 2:
        remaining -= len(layer)
        nxt = []
        for v in layer:
            removed.add(v)
            for w in adj[v]:
                if w not in removed:
                    deg[w] -= 1
                    if deg[w] == 1:
                        nxt.append(w)
        layer = nxt
    centres = [v for v in adj if v not in removed]

    def code(v, parent):
        return "(" + "".join(sorted(code(w, v) for w in adj[v] if w != parent)) + ")"

    return min(
        (code(c, None) if len(centres) == 1 else
         "".join(sorted([code(centres[0], centres[1]), code(centres[1], centres[0])])))
        for c in centres
    )


def _relabel_tree(g: Graph) -> Graph:
    """Rename vertices v1.. and edges t1.. in breadth-first order from the least vertex."""
    start = nsorted(g.vertices)[0]
    order = [start]
    seen = {start}
    eorder = []
    i = 0
    while i < len(order):
        v = order[i]
        i += 1
        for e in nsorted(g.incident(v)):
            w = g.other_end(e, v)
            if w not in seen:
                seen.add(w)
                order.append(w)
                eorder.append(e)
    vname = {v: f"v{k + 1}" for k, v in enumerate(order)}
    ename = {e: f"t{k + 1}" for k, e in enumerate(eorder)}
    return Graph([vname[v] for v in order],
                 {ename[e]: (vname[g.ends[e][0]], vname[g.ends[e][1]]) for e in eorder})
