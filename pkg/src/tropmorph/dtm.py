"""Discrete tropical morphisms: validity, ramification, degree, change,
the Riemann-Hurwitz and dimension formulas, tropicalization and modification."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from types import MappingProxyType
from typing import Mapping

from .errors import GenusTooSmall, InconsistentDegree, InvalidDatum, NonPositiveLength
from .graph_core import Graph, components, dangling_elements, genus, is_tree, nsorted, valency
from .metric_graph import MetricGraph, fraction_str, to_fraction


class DiscreteTropicalMorphism:
    """A non-degenerate map of loopless graphs with a positive index per source element."""

    def __init__(self, source: Graph, target: Graph, vertex_map: Mapping, edge_map: Mapping,
                 index: Mapping):
        self.source = source
        self.target = target
        self.vertex_map = MappingProxyType(dict(vertex_map))
        self.edge_map = MappingProxyType(dict(edge_map))
        self.index = MappingProxyType({k: int(v) for k, v in index.items()})

    def image(self, x):
        return self.vertex_map[x] if x in self.vertex_map else self.edge_map[x]

    def fibre(self, y) -> list:
        if self.target.has_vertex(y):
            return [a for a in self.source.vertices if self.vertex_map[a] == y]
        return [e for e in self.source.edges if self.edge_map[e] == y]

    def to_json(self) -> dict:
        return {
            "source": self.source.to_json(),
            "target": self.target.to_json(),
            "vertex_map": {str(k): str(v) for k, v in self.vertex_map.items()},
            "edge_map": {str(k): str(v) for k, v in self.edge_map.items()},
            "index": {str(k): v for k, v in self.index.items()},
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "DiscreteTropicalMorphism":
        return cls(Graph.from_json(data["source"]), Graph.from_json(data["target"]),
                   data["vertex_map"], data["edge_map"], data["index"])

    def __repr__(self):
        return (f"DiscreteTropicalMorphism(|V|={len(self.source.vertices)}, "
                f"|E|={len(self.source.edges)} -> |E'|={len(self.target.edges)})")


@dataclass
class MorphismReport:
    ok: bool
    failures: list = field(default_factory=list)  # (condition, witness)

    def to_json(self) -> dict:
        return {"ok": self.ok, "failures": [{"condition": c, "witness": w} for c, w in self.failures]}


def _ramification_local(f: DiscreteTropicalMorphism, a) -> int:
    m = f.index[a]
    return 2 * (m - 1) - sum(f.index[e] - 1 for e in f.source.incident(a))


def _ramification_defining(f: DiscreteTropicalMorphism, a) -> int:
    return (valency(f.source, a) - 2) - (valency(f.target, f.vertex_map[a]) - 2) * f.index[a]


def check(f: DiscreteTropicalMorphism) -> MorphismReport:
    fails = []
    src, tgt = f.source, f.target
    for e, (a, b) in src.ends.items():
        if a == b:
            fails.append(("morphism", {"loop": str(e)}))
    for e, (a, b) in tgt.ends.items():
        if a == b:
            fails.append(("morphism", {"target_loop": str(e)}))
    for a in src.vertices:
        if a not in f.vertex_map or not tgt.has_vertex(f.vertex_map[a]):
            fails.append(("morphism", {"vertex": str(a)}))
    for e in src.edges:
        if e not in f.edge_map or not tgt.has_edge(f.edge_map[e]):
            fails.append(("morphism", {"edge": str(e)}))
    if fails:
        return MorphismReport(False, fails)
    for e, (a, b) in src.ends.items():
        img = {f.vertex_map[a], f.vertex_map[b]}
        if img != set(tgt.ends[f.edge_map[e]]):
            fails.append(("morphism", {"edge": str(e)}))
    for x in list(src.vertices) + list(src.edges):
        if f.index.get(x, 0) < 1:
            fails.append(("non_degenerate", {"element": str(x)}))
    if fails:
        return MorphismReport(False, fails)
    for a in src.vertices:
        v = f.vertex_map[a]
        for t in tgt.incident(v):
            s = sum(f.index[e] for e in src.incident(a) if f.edge_map[e] == t)
            if s != f.index[a]:
                fails.append(("balancing", {"vertex": str(a), "target_edge": str(t),
                                            "index": f.index[a], "sum": s}))
    if fails:
        return MorphismReport(False, fails)
    for a in src.vertices:
        if _ramification_local(f, a) < 0:
            fails.append(("riemann_hurwitz", {"vertex": str(a), "r": _ramification_local(f, a)}))
    return MorphismReport(not fails, fails)


def r_phi(f: DiscreteTropicalMorphism, a) -> int:
    """Ramification at a source vertex, computed two ways and cross-checked."""
    loc = _ramification_local(f, a)
    dfn = _ramification_defining(f, a)
    assert loc == dfn, f"ramification formulas disagree at {a!r}: {loc} != {dfn}"
    return loc


def degree(f: DiscreteTropicalMorphism) -> int:
    degs = {v: sum(f.index[a] for a in f.fibre(v)) for v in f.target.vertices}
    values = set(degs.values())
    if len(values) != 1:
        raise InconsistentDegree(f"fibre degrees differ: {degs}")
    return values.pop()


def change(f: DiscreteTropicalMorphism, v) -> int:
    return sum(r_phi(f, a) for a in f.fibre(v))


def riemann_hurwitz_check(f: DiscreteTropicalMorphism) -> bool:
    lhs = 2 * genus(f.source) - 2
    rhs = degree(f) * (2 * genus(f.target) - 2) + sum(r_phi(f, a) for a in f.source.vertices)
    assert lhs == rhs, f"Riemann-Hurwitz fails: {lhs} != {rhs}"
    return True


def dimension_formula(f: DiscreteTropicalMorphism) -> tuple[int, int]:
    """Both sides of ``|E'| + sum_v (ch v + val v - 3) = 2g - g'(2d-3) + 2d - 5``."""
    tgt = f.target
    lhs = len(tgt.edges) + sum(change(f, v) + valency(tgt, v) - 3 for v in tgt.vertices)
    g, g2, d = genus(f.source), genus(tgt), degree(f)
    rhs = 2 * g - g2 * (2 * d - 3) + 2 * d - 5
    assert lhs == rhs, f"dimension formula fails: {lhs} != {rhs}"
    return lhs, rhs


@dataclass(frozen=True)
class TropicalMorphismRealization:
    model: DiscreteTropicalMorphism
    target_lengths: Mapping

    @property
    def source_lengths(self) -> dict:
        return {e: self.target_lengths[self.model.edge_map[e]] / self.model.index[e]
                for e in self.model.source.edges}

    def source_metric(self) -> MetricGraph:
        return MetricGraph(self.model.source, self.source_lengths)

    def fibre_count(self, point) -> int:
        """Index-weighted number of preimages of a target vertex or edge interior point."""
        f = self.model
        return sum(f.index[x] for x in f.fibre(point))

    def to_json(self) -> dict:
        return {
            "morphism": self.model.to_json(),
            "target_lengths": {str(k): fraction_str(v) for k, v in self.target_lengths.items()},
            "source_lengths": {str(k): fraction_str(v) for k, v in self.source_lengths.items()},
        }


def tropicalize(f: DiscreteTropicalMorphism, target_lengths: Mapping) -> TropicalMorphismRealization:
    if not is_tree(f.target):
        raise InvalidDatum("tropicalization is only supported for tree targets")
    ls = {}
    for t in f.target.edges:
        v = to_fraction(target_lengths[t])
        if v <= 0:
            raise NonPositiveLength(f"target edge {t!r} has length {v}")
        ls[t] = v
    return TropicalMorphismRealization(f, MappingProxyType(ls))


def _restrict(f: DiscreteTropicalMorphism, src_v, src_e, tgt_v, tgt_e) -> DiscreteTropicalMorphism:
    src = f.source.subgraph(src_v, src_e)
    tgt = f.target.subgraph(tgt_v, tgt_e)
    return DiscreteTropicalMorphism(
        src, tgt,
        {a: f.vertex_map[a] for a in src.vertices},
        {e: f.edge_map[e] for e in src.edges},
        {x: f.index[x] for x in list(src.vertices) + list(src.edges)},
    )


def delete_dangling_fibres(f: DiscreteTropicalMorphism) -> DiscreteTropicalMorphism:
    """Remove target edges whose whole fibre is dangling, with everything above
    them, and keep the positive-genus component; repeat until stable."""
    if genus(f.source) < 2:
        raise GenusTooSmall("deleting dangling fibres needs genus at least two")
    while True:
        _, de = dangling_elements(f.source)
        cut = [t for t in f.target.edges if all(e in de for e in f.fibre(t))]
        if not cut:
            return f
        cut_set = set(cut)
        src_e = [e for e in f.source.edges if f.edge_map[e] not in cut_set]
        tgt_e = [t for t in f.target.edges if t not in cut_set]
        tmp_src = f.source.subgraph(f.source.vertices, src_e)
        keep = None
        for comp in components(tmp_src):
            ce = [e for e in src_e if f.source.ends[e][0] in comp]
            if len(ce) - len(comp) + 1 >= 1:
                keep = (comp, ce)
                break
        comp, ce = keep
        img_v = {f.vertex_map[a] for a in comp}
        tmp_tgt = f.target.subgraph(f.target.vertices, tgt_e)
        tcomp = next(c for c in components(tmp_tgt) if img_v <= c)
        te = [t for t in tgt_e if f.target.ends[t][0] in tcomp]
        f = _restrict(f, [a for a in f.source.vertices if a in comp], ce,
                      [v for v in f.target.vertices if v in tcomp], te)


def has_dangling_fibres(f: DiscreteTropicalMorphism) -> bool:
    _, de = dangling_elements(f.source)
    return any(all(e in de for e in f.fibre(t)) for t in f.target.edges)


def is_combinatorial_type(f: DiscreteTropicalMorphism) -> bool:
    if has_dangling_fibres(f):
        return False
    ch = {v: change(f, v) for v in f.target.vertices}
    if any(valency(f.target, v) == 2 and ch[v] < 1 for v in f.target.vertices):
        return False
    for v in f.target.vertices:
        assert ch[v] + valency(f.target, v) >= 3, f"change plus valency below 3 at {v!r}"
    return True


def identity(g: Graph) -> DiscreteTropicalMorphism:
    return DiscreteTropicalMorphism(
        g, g, {v: v for v in g.vertices}, {e: e for e in g.edges},
        {x: 1 for x in list(g.vertices) + list(g.edges)},
    )
