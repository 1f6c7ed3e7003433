"""The deformation engine: an initial full-dimensional datum for a trivalent type,
a generic start point, the straight-line walk through cones with regrow steps at
limits, and the lollipop reduction for odd genus."""
from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from importlib import resources
from typing import Mapping, Sequence

from . import props
from .dtm import (
    DiscreteTropicalMorphism,
    TropicalMorphismRealization,
    _restrict,
    check,
    degree,
    tropicalize,
)
from .elmap import (
    DatumLabelling,
    RationalMatrix,
    determinant,
    edge_length_matrix,
    is_full_dimensional,
    solve,
)
from .errors import (
    GenusTooSmall,
    LollipopViolation,
    NonTrivalentSkeleton,
    PerturbationFailed,
    PreconditionViolated,
    SearchExhausted,
    SearchSpaceTooLarge,
    StepLimitExceeded,
)
from .gluing_datum import GluingDatum, all_trees, enumerate_datums
from .graph_core import (
    Graph,
    canonical_form,
    find_isomorphism,
    genus,
    nsorted,
    valency,
)
from .limits_regrow import limit_at, regrow, transport_labelling, verify_balancing
from .metric_graph import MetricGraph, ModuliPoint, canonicalize, fraction_str, isometric, to_fraction

SUPPORTED_GENERA = (2, 4)
MAX_RETRIES = 64
DEFAULT_MAX_STEPS = 500


# -- initial datum ---------------------------------------------------------

def _search(h: Graph) -> GluingDatum | None:
    """First full-dimensional datum with skeleton of type ``h``, in the order of
    :func:`all_trees` and then of :func:`enumerate_datums`."""
    g = genus(h)
    d, n = g // 2 + 1, 3 * g - 3
    target = canonical_form(h)
    for tree in all_trees(n, 3):
        for m in enumerate_datums(tree, d, change_minimal=True, dedupe=False):
            if not props.is_possibly_full_dimensional(m):
                continue
            if canonical_form(m.quotient.skeleton.graph) != target:
                continue
            if is_full_dimensional(m):
                return m
    return None


@lru_cache(maxsize=None)
def _table() -> dict:
    """Precomputed results of :func:`_search`, keyed by canonical form of the type."""
    text = resources.files("tropmorph").joinpath("data/initial_datums.json").read_text()
    out = {}
    for row in json.loads(text):
        m = GluingDatum.from_json(row["datum"])
        out[canonical_form(Graph.from_json(row["type"]))] = m
    return out


def _require_trivalent(h: Graph) -> None:
    if any(valency(h, v) != 3 for v in h.vertices):
        raise NonTrivalentSkeleton("the combinatorial type must be trivalent")


def initial_datum(h: Graph, *, use_table: bool = True, allow_large: bool = False) -> GluingDatum:
    g = genus(h)
    if g < 2:
        raise GenusTooSmall("genus must be at least two")
    _require_trivalent(h)
    if g % 2:
        raise PreconditionViolated("initial datums exist only for even genus")
    if g not in SUPPORTED_GENERA and not allow_large:
        raise SearchSpaceTooLarge(f"genus {g} is outside the supported search range {SUPPORTED_GENERA}")
    if use_table:
        hit = _table().get(canonical_form(h))
        if hit is not None:
            return hit
    m = _search(h)
    if m is None:
        raise SearchExhausted("no full-dimensional datum found for this type")
    return m


# -- rows of A_M as edges of h ---------------------------------------------

def row_identification(m: GluingDatum, lab: DatumLabelling, h: Graph) -> list:
    """The edge of ``h`` that each row of ``A_M`` (in labelling order) stands for."""
    sk = m.quotient.skeleton.graph
    rows = lab.rows_for(m)
    if sk == h:
        return list(rows)
    iso = find_isomorphism(sk, h)
    if iso is None:
        raise PreconditionViolated("the datum's skeleton is not of the requested type")
    return [iso.edge_map[r] for r in rows]


# -- start point -----------------------------------------------------------

def _sub(a: Sequence, b: Sequence) -> list:
    return [x - y for x, y in zip(a, b)]


def _events(l0: Sequence, dl: Sequence, after: Fraction) -> list:
    """``(s, j)`` where coordinate ``j`` of ``l0 + s dl`` reaches zero, for ``s > after``."""
    out = []
    for j, (x, v) in enumerate(zip(l0, dl)):
        if v < 0:
            s = -x / v
            if s > after:
                out.append((s, j))
    return sorted(out)


def _is_generic(a: RationalMatrix, y: Sequence, y1: Sequence) -> bool:
    l0 = solve(a, y)
    if any(x <= 0 for x in l0):
        return False
    ev = [s for s, _ in _events(l0, solve(a, _sub(y1, y)), Fraction(0)) if s <= 1]
    return len(ev) == len(set(ev))


def perturb_start(a: RationalMatrix, y: Sequence, y1: Sequence, seed: int = 0,
                  attempt: int = 0) -> list:
    """A point near ``y`` inside the cone of ``a`` from which the segment to ``y1``
    meets no two walls at once inside the current cone.

    Attempt ``k`` draws a deterministic rational offset of size ``2**-k`` times the
    smallest coordinate of ``y``; attempt 0 returns ``y`` itself when it is generic.
    """
    y = [to_fraction(v) for v in y]
    y1 = [to_fraction(v) for v in y1]
    if attempt == 0 and _is_generic(a, y, y1):
        return y
    rng = random.Random(f"{seed}:{attempt}")
    scale = min(y) / 2 ** max(attempt, 1)
    for k in range(MAX_RETRIES):
        cand = [v + scale * Fraction(rng.randint(-997, 997), 997 * 2 ** k) for v in y]
        if _is_generic(a, cand, y1):
            return cand
    raise PerturbationFailed("no generic start point found near y")


# -- walk ------------------------------------------------------------------

@dataclass
class WalkStep:
    datum: GluingDatum
    labelling: DatumLabelling
    det: Fraction
    entry: Fraction
    exit: Fraction
    event: dict | None = None

    def to_json(self) -> dict:
        return {
            "datum": self.datum.to_json(),
            "labelling": self.labelling.to_json(),
            "det": fraction_str(self.det),
            "entry": fraction_str(self.entry),
            "exit": fraction_str(self.exit),
            "event": self.event,
        }


@dataclass
class DeformationTrace:
    rows: list  # edge of the type for each row
    start: list
    target: list
    steps: list = field(default_factory=list)
    perturbations: int = 0

    def point(self, s: Fraction) -> list:
        return [a + s * (b - a) for a, b in zip(self.start, self.target)]

    def to_json(self) -> dict:
        return {
            "rows": [str(r) for r in self.rows],
            "start": [fraction_str(v) for v in self.start],
            "target": [fraction_str(v) for v in self.target],
            "perturbations": self.perturbations,
            "steps": [s.to_json() for s in self.steps],
        }


class _Degenerate(Exception):
    """Two walls are crossed at once; the start point must be perturbed again."""


def _successor_key(c) -> tuple:
    return (json.dumps(c.datum.to_json(), sort_keys=True), json.dumps(c.labelling.to_json()))


def _walk_segment(m: GluingDatum, lab: DatumLabelling, ystar: list, y1: list,
                  max_steps: int) -> tuple:
    trace_steps = []
    s = Fraction(0)
    dy = _sub(y1, ystar)
    for _ in range(max_steps):
        a = edge_length_matrix(m, lab)
        det = determinant(a)
        l0 = solve(a, ystar)
        dl = solve(a, dy)
        ev = [(t, j) for t, j in _events(l0, dl, s) if t <= 1]
        if not ev:
            lt = [x + y for x, y in zip(l0, dl)]
            trace_steps.append(WalkStep(m, lab, det, s, Fraction(1)))
            return m, lab, dict(zip(a.col_labels, lt)), trace_steps
        t_next, j = ev[0]
        if t_next == 1:
            # The target sits on a wall: it lies in a face of this cone, realized by
            # the limit datum with the zero-length tree edges contracted.
            lt = [x + y for x, y in zip(l0, dl)]
            trace_steps.append(WalkStep(m, lab, det, s, Fraction(1)))
            lengths = dict(zip(a.col_labels, lt))
            for t in [e for e, v in lengths.items() if v == 0]:
                moved = transport_labelling(m, lab, t)
                m = limit_at(m, t).datum
                lab = DatumLabelling(tuple(x for x in moved.tree if x != t), moved.skeleton)
                del lengths[t]
            return m, lab, lengths, trace_steps
        if len(ev) > 1 and ev[1][0] == t_next:
            raise _Degenerate()
        edge = a.col_labels[j]
        lim = limit_at(m, edge)
        cands = regrow(lim, transport_labelling(m, lab, edge))
        verify_balancing(lim, cands)
        flip = [c for c in cands if c.det * det < 0]
        if not flip:
            raise PreconditionViolated("no candidate of opposite sign at a limit")
        nxt = min(flip, key=_successor_key)
        trace_steps.append(WalkStep(m, lab, det, s, t_next, {
            "edge": str(edge),
            "limit": lim.datum.to_json(),
            "merged_vertex": str(lim.merged_vertex),
            "case_tag": nxt.case_tag,
            "successor_det": fraction_str(nxt.det),
            "candidates": len(cands),
        }))
        m, lab, s = nxt.datum, nxt.labelling, t_next
    raise StepLimitExceeded(f"more than {max_steps} cones visited")


def walk(h: Graph, y1: Mapping, *, start: tuple | None = None, origin: Mapping | None = None,
         seed: int = 0, max_steps: int = DEFAULT_MAX_STEPS) -> tuple:
    """Walk from a point of an initial cone to ``y1`` (lengths on the edges of ``h``).

    Returns ``(datum, labelling, tree lengths, trace)`` with ``A_M l_T = y1`` and ``l_T > 0``.
    ``start`` optionally fixes the initial ``(datum, labelling)`` and ``origin``
    the starting lengths, which must lie inside that datum's cone.
    """
    _require_trivalent(h)
    if start is None:
        m0 = initial_datum(h)
        lab0 = DatumLabelling.default(m0)
    else:
        m0, lab0 = start
    rows = row_identification(m0, lab0, h)
    target = [to_fraction(y1[r]) for r in rows]
    if any(v <= 0 for v in target):
        raise PreconditionViolated("target lengths must be strictly positive")
    a0 = edge_length_matrix(m0, lab0)
    if determinant(a0) == 0:
        raise PreconditionViolated("the initial datum is not full-dimensional")
    if origin is None:
        y0 = a0.apply([Fraction(1)] * a0.cols)
    else:
        y0 = [to_fraction(origin[r]) for r in rows]
        if any(v <= 0 for v in solve(a0, y0)):
            raise PreconditionViolated("the origin is not inside the initial cone")
    for attempt in range(MAX_RETRIES):
        ystar = perturb_start(a0, y0, target, seed, attempt)
        try:
            m, lab, lt, steps = _walk_segment(m0, lab0, ystar, target, max_steps)
        except _Degenerate:
            continue
        trace = DeformationTrace(rows, ystar, target, steps, attempt)
        return m, lab, lt, trace
    raise PerturbationFailed("every perturbed start met a degenerate crossing")


# -- realization -----------------------------------------------------------

@dataclass
class LollipopReport:
    attach_edge: str
    leaf_edge: str
    middle_edge: str
    loop: str
    bridge: str

    def to_json(self) -> dict:
        return dict(self.__dict__)


@dataclass
class Realization:
    realization: TropicalMorphismRealization
    target: ModuliPoint
    datum: GluingDatum
    tree_lengths: dict
    trace: DeformationTrace
    lollipop: LollipopReport | None = None

    @property
    def degree(self) -> int:
        return degree(self.realization.model)

    def to_json(self) -> dict:
        return {
            "realization": self.realization.to_json(),
            "degree": self.degree,
            "datum": self.datum.to_json(),
            "tree_lengths": {str(k): fraction_str(v) for k, v in self.tree_lengths.items()},
            "lollipop": self.lollipop.to_json() if self.lollipop else None,
        }


LOLLIPOP = ("lollipop:x", "lollipop:y", "lollipop:bridge", "lollipop:loop")


def attach_lollipop(p: ModuliPoint) -> tuple[ModuliPoint, str]:
    """Attach a bridge and a loop, both of length 1, at the midpoint of the naturally
    least edge (keeping the type trivalent)."""
    g = p.type_graph
    e = nsorted(g.edges)[0]
    a, b = g.ends[e]
    x, y, br, lp = LOLLIPOP
    ends = {k: v for k, v in g.ends.items() if k != e}
    ends[f"{e}:a"] = (a, x)
    ends[f"{e}:b"] = (x, b)
    ends[br] = (x, y)
    ends[lp] = (y, y)
    lengths = {k: v for k, v in p.lengths.items() if k != e}
    lengths[f"{e}:a"] = lengths[f"{e}:b"] = p.lengths[e] / 2
    lengths[br] = lengths[lp] = Fraction(1)
    return ModuliPoint(Graph(list(g.vertices) + [x, y], ends), lengths), e


def _remove_lollipop(m: GluingDatum, rows: list, lab: DatumLabelling, f: DiscreteTropicalMorphism,
                     attach: str) -> tuple[DiscreteTropicalMorphism, LollipopReport]:
    q = m.quotient
    sk = q.skeleton
    by_row = dict(zip(rows, lab.rows_for(m)))
    h_loop, h_bridge = by_row[LOLLIPOP[3]], by_row[LOLLIPOP[2]]
    under = {h: {q.element[e] for e in sk.paths[h]} for h in (h_loop, h_bridge)}
    t = m.tree
    path = under[h_loop] | under[h_bridge]
    leafy = [x for x in path if any(valency(t, v) == 1 for v in t.ends[x])]
    if len(path) != 2 or len(leafy) != 1:
        raise LollipopViolation(f"loop and bridge lie above {sorted(map(str, path))}")
    leaf_edge = leafy[0]
    mid_edge = next(x for x in path if x != leaf_edge)
    leaf = next(v for v in t.ends[leaf_edge] if valency(t, v) == 1)
    mid = t.other_end(leaf_edge, leaf)
    if mid not in t.ends[mid_edge] or valency(t, mid) != 2:
        raise LollipopViolation("loop and bridge are not above a path of length two to a leaf")
    others = {h for e, h in sk.membership.items() if q.element[e] in path} - {h_loop, h_bridge}
    if others:
        raise LollipopViolation(f"other skeleton edges {sorted(others)} lie above the path")
    drop_t = {leaf_edge, mid_edge, leaf, mid}
    keep_tv = [v for v in t.vertices if v not in drop_t]
    keep_te = [x for x in t.edges if x not in drop_t]
    keep_sv = [a for a in f.source.vertices if f.vertex_map[a] not in drop_t]
    keep_se = [e for e in f.source.edges if f.edge_map[e] not in drop_t]
    f2 = _restrict(f, keep_sv, keep_se, keep_tv, keep_te)
    rep = LollipopReport(attach, str(leaf_edge), str(mid_edge), h_loop, h_bridge)
    return f2, rep


def realize(metric: MetricGraph, *, seed: int = 0, max_steps: int = DEFAULT_MAX_STEPS) -> Realization:
    """A tropical morphism of degree ``ceil(g/2) + 1`` from a modification of ``metric`` to a tree."""
    g = metric.genus
    if g < 2:
        raise GenusTooSmall("realization needs genus at least two")
    target = canonicalize(metric)
    _require_trivalent(target.type_graph)
    if g % 2 == 0:
        m, _, lt, trace = walk(target.type_graph, target.lengths, seed=seed, max_steps=max_steps)
        f = m.quotient.to_dtm()
        r = tropicalize(f, lt)
        return Realization(r, target, m, lt, trace)
    big, attach = attach_lollipop(target)
    m, lab, lt, trace = walk(big.type_graph, big.lengths, seed=seed, max_steps=max_steps)
    f, rep = _remove_lollipop(m, trace.rows, lab, m.quotient.to_dtm(), attach)
    r = tropicalize(f, {k: v for k, v in lt.items() if f.target.has_edge(k)})
    return Realization(r, target, m, lt, trace, rep)


@dataclass
class VerificationReport:
    ok: bool
    problems: list = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.ok

    def to_json(self) -> dict:
        return {"ok": self.ok, "problems": list(self.problems)}


def verify_realization(r: TropicalMorphismRealization, target: ModuliPoint) -> VerificationReport:
    """Independent check: the morphism is valid and its source, with the lengths it
    induces, canonicalizes to a metric graph isometric to ``target``."""
    problems = []
    rep = check(r.model)
    if not rep.ok:
        problems.append({"morphism": rep.to_json()})
    if any(v <= 0 for v in r.target_lengths.values()):
        problems.append({"target_lengths": "not strictly positive"})
    if not problems:
        src = MetricGraph(r.model.source, r.source_lengths)
        if src.genus != genus(target.type_graph):
            problems.append({"genus": [src.genus, genus(target.type_graph)]})
        elif not isometric(canonicalize(src), target):
            problems.append({"isometry": "source is not isometric to the target"})
    return VerificationReport(not problems, problems)


def build_initial_table(genera: Sequence[int] = SUPPORTED_GENERA) -> list:
    """Recompute the rows of the shipped initial-datum table: for every trivalent type
    that occurs, the first full-dimensional datum in search order."""
    rows = []
    for g in genera:
        d, n = g // 2 + 1, 3 * g - 3
        found: dict = {}
        for tree in all_trees(n, 3):
            for m in enumerate_datums(tree, d, change_minimal=True, dedupe=False):
                if not props.is_possibly_full_dimensional(m):
                    continue
                h = m.quotient.skeleton.graph
                cf = canonical_form(h)
                if cf not in found and is_full_dimensional(m):
                    found[cf] = m
                    rows.append({"genus": g, "type": h.to_json(), "datum": m.to_json()})
    return rows
