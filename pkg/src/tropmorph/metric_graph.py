"""Metric graphs with exact rational lengths and points of the tropical moduli space."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from types import MappingProxyType
from typing import Mapping

from .errors import NonPositiveLength, UnknownEdge
from .graph_core import (
    Graph,
    combinatorial_type_map,
    contract_with_map,
    find_isomorphism,
    genus,
    nsorted,
)


def to_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        raise TypeError("lengths must be exact; pass ints, Fractions or 'p/q' strings")
    return Fraction(x)


def fraction_str(x: Fraction) -> str:
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def _lengths(g: Graph, lengths: Mapping, allow_zero: bool) -> dict:
    out = {}
    for e in g.edges:
        if e not in lengths:
            raise UnknownEdge(f"no length for edge {e!r}")
        v = to_fraction(lengths[e])
        if v < 0 or (v == 0 and not allow_zero):
            raise NonPositiveLength(f"edge {e!r} has length {v}")
        out[e] = v
    extra = set(lengths) - set(g.edges)
    if extra:
        raise UnknownEdge(f"lengths given for unknown edges {nsorted(extra)!r}")
    return out


class MetricGraph:
    """A model graph together with a positive rational length per edge."""

    def __init__(self, model: Graph, lengths: Mapping):
        self.model = model
        self.lengths = MappingProxyType(_lengths(model, lengths, allow_zero=False))

    @property
    def genus(self) -> int:
        return genus(self.model)

    def to_json(self) -> dict:
        return {"graph": self.model.to_json(),
                "lengths": {str(e): fraction_str(v) for e, v in self.lengths.items()}}

    @classmethod
    def from_json(cls, data: Mapping) -> "MetricGraph":
        return cls(Graph.from_json(data["graph"]), data["lengths"])


@dataclass(frozen=True)
class ModuliPoint:
    """A point of the closed cone over a combinatorial type ``type_graph``."""

    type_graph: Graph
    lengths: Mapping

    def __post_init__(self):
        object.__setattr__(self, "lengths",
                           MappingProxyType(_lengths(self.type_graph, self.lengths, allow_zero=True)))

    def contracted(self) -> MetricGraph:
        """The semantic metric graph: zero-length edges contracted."""
        zero = [e for e, v in self.lengths.items() if v == 0]
        g, _ = contract_with_map(self.type_graph, zero)
        return MetricGraph(g, {e: self.lengths[e] for e in g.edges})

    def to_json(self) -> dict:
        return {"graph": self.type_graph.to_json(),
                "lengths": {str(e): fraction_str(v) for e, v in self.lengths.items()}}


def canonicalize(m: MetricGraph) -> ModuliPoint:
    """Delete dangling trees and suppress divalent points, adding up lengths."""
    h, comp = combinatorial_type_map(m.model)
    return ModuliPoint(h, {e: sum((m.lengths[x] for x in comp[e]), Fraction(0)) for e in h.edges})


def is_in_closed_cone(g: Graph, lengths: Mapping) -> bool:
    """True iff contracting the zero-length edges keeps the genus, i.e. no cycle has length 0."""
    ls = _lengths(g, lengths, allow_zero=True)
    zero = [e for e, v in ls.items() if v == 0]
    parent = {v: v for v in g.vertices}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for e in zero:
        a, b = g.ends[e]
        ra, rb = find(a), find(b)
        if ra == rb:
            return False
        parent[ra] = rb
    return True


def isometric(p: ModuliPoint, q: ModuliPoint) -> bool:
    """Exact check that two moduli points define isometric metric graphs.

    Both sides are contracted and re-canonicalized; then an isomorphism of the
    underlying graphs matching lengths edge by edge is searched for.  Lengths are
    folded into the search as edge colours on parallel classes.
    """
    a = canonicalize(p.contracted()) if p.contracted().genus >= 2 else None
    b = canonicalize(q.contracted()) if q.contracted().genus >= 2 else None
    if a is None or b is None:
        return a is None and b is None
    return _isometric_models(a, b)


def _isometric_models(a: ModuliPoint, b: ModuliPoint) -> bool:
    ga, gb = a.type_graph, b.type_graph
    if sorted(a.lengths.values()) != sorted(b.lengths.values()):
        return False
    # subdivide every edge with a midpoint coloured by its length; then plain
    # coloured isomorphism of the subdivisions is exactly length-preserving isomorphism
    def subdivided(m: ModuliPoint):
        verts = [("v", v) for v in m.type_graph.vertices]
        ends = {}
        colors = {("v", v): ("v",) for v in m.type_graph.vertices}
        for e, (x, y) in m.type_graph.ends.items():
            mid = ("m", e)
            verts.append(mid)
            colors[mid] = ("m", m.lengths[e])
            ends[(e, 0)] = (("v", x), mid)
            ends[(e, 1)] = (mid, ("v", y))
        return Graph(verts, ends), colors

    sa, ca = subdivided(a)
    sb, cb = subdivided(b)
    return find_isomorphism(sa, sb, ca, cb) is not None
