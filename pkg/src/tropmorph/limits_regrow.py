"""Limits of gluing datums under edge contraction, and the regrow step that
lists the possibly full-dimensional datums contracting to a given limit,
together with the multiplicities that make their determinants balance."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from . import partitions as P
from .elmap import DatumLabelling, adjugate_row, determinant, edge_length_matrix
from .errors import (
    BalancingViolation,
    CaseDispatchFailure,
    GenusDrops,
    InvalidDatum,
    InvalidLimit,
    InvalidMergedValency,
    LimitsNotIsomorphic,
    NonTrivalentSkeleton,
    PreconditionViolated,
    UnknownEdge,
)
from .gluing_datum import (
    GluingDatum,
    _classes_ok,
    class_id,
    class_ramification,
    iter_datum_isomorphisms,
    find_datum_isomorphism,
    validate,
)
from .graph_core import Graph, contract_with_map, nsorted, valency
from . import props


# -- limits ----------------------------------------------------------------

@dataclass(frozen=True)
class LimitDatum:
    """A datum obtained by contracting the tree edge ``edge`` with ends ``ends``
    into the vertex ``merged_vertex``."""

    datum: GluingDatum
    merged_vertex: str
    edge: str
    ends: tuple
    parent: GluingDatum | None = None

    def to_json(self) -> dict:
        out = {
            "datum": self.datum.to_json(),
            "merged_vertex": str(self.merged_vertex),
            "edge": str(self.edge),
            "ends": [str(x) for x in self.ends],
        }
        if self.parent is not None:
            out["parent"] = self.parent.to_json()
        return out

    @classmethod
    def from_json(cls, data: Mapping) -> "LimitDatum":
        datum = GluingDatum.from_json(data["datum"])
        w0 = data["merged_vertex"]
        ends = tuple(data.get("ends") or (f"{w0}u", f"{w0}v"))
        parent = GluingDatum.from_json(data["parent"]) if data.get("parent") else None
        return cls(datum, w0, data.get("edge", "t1"), ends, parent)


def limit_at(m: GluingDatum, t) -> LimitDatum:
    """Contract ``t``; the merged vertex carries the join of the two end relations."""
    if not m.tree.has_edge(t):
        raise UnknownEdge(repr(t))
    q = m.quotient
    u, v = m.tree.ends[t]
    tree0, vmap = contract_with_map(m.tree, [t])
    w0 = vmap[u]
    rel = {x: p for x, p in m.relations.items() if x not in (u, v, t)}
    rel[w0] = P.join(m.relations[u], m.relations[v])
    m0 = GluingDatum(tree0, m.degree, rel)
    rep = validate(m0)
    if not rep.ok:
        raise InvalidDatum(f"limit is not a valid datum: {rep.failures[0]}")
    q0 = m0.quotient
    if q0.genus != q.genus:
        raise GenusDrops(f"contracting {t!r} contracts a cycle of the quotient")
    for b in m0.relations[w0]:
        r0 = class_ramification(m0, w0, b)
        parts = [c for x in (u, v) for c in m.relations[x] if set(c) <= set(b)]
        rs = sum(class_ramification(m, x, c) for x in (u, v) for c in m.relations[x] if set(c) <= set(b))
        assert r0 == rs, f"ramification is not additive at {class_id(w0, b)} ({r0} != {rs}, {parts})"
    return LimitDatum(m0, w0, t, (u, v), m)


def transport_labelling(parent: GluingDatum, lab: DatumLabelling, t) -> DatumLabelling:
    """Rewrite ``lab`` so that no skeleton representative lies above ``t``.

    Skeleton edges are then named by classes that also exist in the limit at ``t``
    and in every datum regrown from it, which makes the labelling compatible at ``t``.
    """
    q = parent.quotient
    sk = q.skeleton
    reps = []
    for (x, i), h in zip(lab.skeleton, lab.rows_for(parent)):
        if x != t:
            reps.append((x, i))
            continue
        alt = next((e for e in sk.paths[h] if q.element[e] != t), None)
        if alt is None:
            raise GenusDrops(f"skeleton edge {h} lies entirely above {t!r}")
        reps.append((q.element[alt], q.block[alt][0]))
    return DatumLabelling(lab.tree, tuple(reps))


def induced_labellings(parent: GluingDatum, t, lab: DatumLabelling, child: GluingDatum, t2) -> list:
    """All labellings of ``child`` compatible at ``t2`` with ``lab`` on ``parent``,
    one per isomorphism between the two limits (duplicates removed)."""
    l1, l2 = limit_at(parent, t), limit_at(child, t2)
    base = transport_labelling(parent, lab, t)
    out = []
    for iso in iter_datum_isomorphisms(l1.datum, l2.datum):
        tree = tuple(t2 if x == t else iso.tree_map[x] for x in base.tree)
        reps = []
        for x, i in base.skeleton:
            reps.append((iso.tree_map[x], iso.permutations[x][i - 1]))
        cand = DatumLabelling(tree, tuple(reps))
        try:
            cand.rows_for(child)
        except InvalidDatum:
            continue
        if cand not in out:
            out.append(cand)
    if not out:
        raise LimitsNotIsomorphic("the two limits are not isomorphic")
    # normalise: two labellings that give the same rows are the same labelling
    uniq, seen = [], set()
    for c in out:
        key = (c.tree, tuple(child.quotient.skeleton.membership[class_id(x, child.block(x, i))]
                             for x, i in c.skeleton))
        if key not in seen:
            seen.add(key)
            uniq.append(c)
    return uniq


def induced_labelling(parent: GluingDatum, t, lab: DatumLabelling, child: GluingDatum, t2) -> DatumLabelling:
    return induced_labellings(parent, t, lab, child, t2)[0]


# -- base trees ------------------------------------------------------------

@dataclass(frozen=True)
class BaseTree:
    tree: Graph
    split: tuple  # (S, S') as tuples of T0 edge ids
    u: str
    v: str
    edge: str

    @property
    def name(self) -> str:
        return "T_" + (",".join(map(str, self.split[0])) if self.split[0] else "empty")


def base_trees(l: LimitDatum) -> list[BaseTree]:
    """One tree per unordered split ``S | S'`` of the edges at the merged vertex
    with both parts of size at most two; ``|S| <= |S'|`` and, on a tie, ``S``
    holds the naturally least edge."""
    t0 = l.datum.tree
    w0 = l.merged_vertex
    nb = nsorted(t0.incident(w0))
    if len(nb) not in (2, 3, 4):
        raise InvalidMergedValency(f"merged vertex has valency {len(nb)}")
    u, v = l.ends
    out = []
    seen = set()
    for k in range(0, len(nb) + 1):
        for s in itertools.combinations(nb, k):
            s2 = tuple(x for x in nb if x not in s)
            if len(s) > 2 or len(s2) > 2:
                continue
            if len(s) > len(s2) or (len(s) == len(s2) and nb[0] not in s):
                continue
            key = frozenset(s)
            if key in seen:
                continue
            seen.add(key)
            ends = {}
            for e, (a, b) in t0.ends.items():
                side = u if e in s else v
                ends[e] = (side if a == w0 else a, side if b == w0 else b)
            ends[l.edge] = (u, v)
            verts = [x for x in t0.vertices if x != w0] + [u, v]
            out.append(BaseTree(Graph(verts, ends), (tuple(s), s2), u, v, l.edge))
    return out


# -- regrow ----------------------------------------------------------------

@dataclass
class RegrowCandidate:
    datum: GluingDatum
    labelling: DatumLabelling
    K: int
    case_tag: str
    base: str
    det: Fraction
    audit: list = field(default_factory=list)
    flagged: bool = False

    def to_json(self) -> dict:
        from .metric_graph import fraction_str

        return {
            "datum": self.datum.to_json(),
            "labelling": self.labelling.to_json(),
            "K": self.K,
            "case_tag": self.case_tag,
            "base_tree": self.base,
            "det": fraction_str(self.det),
            "audit": list(self.audit),
            "flagged": self.flagged,
        }


def default_limit_labelling(l: LimitDatum) -> DatumLabelling:
    """Column of the regrown edge first, then the limit's tree edges; rows from the limit."""
    base = DatumLabelling.default(l.datum)
    return DatumLabelling((l.edge,) + tuple(nsorted(l.datum.tree.edges)), base.skeleton)


def _is_trivalent(m: GluingDatum) -> bool:
    sk = m.quotient.skeleton.graph
    return all(valency(sk, a) == 3 for a in sk.vertices)


def _subtree_elements(tree: Graph, w0, e) -> list:
    """Vertices and edges on the far side of ``e`` from ``w0`` (``e`` included)."""
    out = [e]
    stack = [(tree.other_end(e, w0), e)]
    while stack:
        x, via = stack.pop()
        out.append(x)
        for t in tree.incident(x):
            if t != via:
                out.append(t)
                stack.append((tree.other_end(t, x), t))
    return out


def _twists(p: tuple, d: int) -> list:
    """One permutation per distinct way of relabelling the sheets of ``p``'s subtree
    (relabellings that fix every block of ``p`` only change the datum by a gauge)."""
    seen, out = set(), []
    for g in P.symmetric_group(d):
        key = tuple(tuple(sorted(g[i - 1] for i in b)) for b in p)
        if key not in seen:
            seen.add(key)
            out.append(g)
    return out


def _twist_extends(w: tuple, rel0: tuple, sig: Mapping, base: Mapping, nb: Sequence) -> bool:
    """Whether the subtree twists ``sig`` extend to an isomorphism of limits that sends
    the merged relation ``w`` to ``rel0``: every twisted edge block must land in the
    ``w`` block that corresponds to the ``rel0`` block of the untwisted one."""
    beta: dict = {}
    for e in nb:
        for b in base[e]:
            src = P.block_of(w, sig[e][b[0] - 1])
            dst = P.block_of(rel0, b[0])
            if beta.setdefault(src, dst) != dst:
                return False
    return len(set(beta.values())) == len(beta) == len(w)


def _generic_candidates(l: LimitDatum, bt: BaseTree, lab: DatumLabelling) -> list:
    """Every valid datum over ``bt`` whose limit at the new edge is isomorphic to ``l``,
    paired with the labelling carried over from ``lab``.

    The subtrees hanging off the merged vertex keep their relations up to a
    relabelling of sheets; the first subtree is held fixed and every other one is
    twisted independently, which recovers the gluings that rematch sheets inside a
    class of the merged vertex.  A twist is kept only when it extends to an
    isomorphism of limits, so the carried labelling is compatible at the new edge
    through that isomorphism.
    """
    m0 = l.datum
    d = m0.degree
    w0 = l.merged_vertex
    rel0 = m0.relations[w0]
    t0 = m0.tree
    nb = nsorted(t0.incident(w0))
    parts = {e: _subtree_elements(t0, w0, e) for e in nb}
    base = {x: p for x, p in m0.relations.items() if x != w0}
    s, s2 = bt.split
    sizes0 = sorted(map(len, rel0))
    tree = bt.tree
    ident = P.symmetric_group(d)[0]
    parts_d = P.all_partitions(d)
    owner = {x: e for e in nb for x in parts[e]}
    out = []
    seen = set()
    for twist in itertools.product(*([[ident]] + [_twists(m0.relations[e], d) for e in nb[1:]])):
        sig = dict(zip(nb, twist))
        rel = {}
        for e in nb:
            for x in parts[e]:
                rel[x] = P.apply(sig[e], base[x])
        pus = [pu for pu in parts_d if all(P.refines(rel[e], pu) for e in s)]
        pvs = [pv for pv in parts_d if all(P.refines(rel[e], pv) for e in s2)]
        for pu in pus:
            for pv in pvs:
                w = P.join(pu, pv)
                if sorted(map(len, w)) != sizes0 or not _twist_extends(w, rel0, sig, base, nb):
                    continue
                for pt in parts_d:
                    if not (P.refines(pt, pu) and P.refines(pt, pv)):
                        continue
                    r = dict(rel)
                    r[bt.u], r[bt.v], r[bt.edge] = pu, pv, pt
                    if not (_classes_ok(r, tree, bt.u) and _classes_ok(r, tree, bt.v)):
                        continue
                    m = GluingDatum(tree, d, r)
                    if m.key in seen or not validate(m).ok:
                        continue
                    seen.add(m.key)
                    reps = tuple((x, sig[owner[x]][i - 1]) for x, i in lab.skeleton)
                    out.append((m, DatumLabelling(lab.tree, reps)))
    return out


def _labelled_colors(m: GluingDatum, lab: DatumLabelling) -> dict:
    rows = lab.rows_for(m)
    sk = m.quotient.skeleton
    idx = {h: k for k, h in enumerate(rows)}
    return {e: idx[h] for e, h in sk.membership.items()}


def _dedupe(cands: list) -> list:
    """Drop candidates that are isomorphic over the identity of the tree by an
    isomorphism that respects the labelled rows."""
    out: list = []
    cols: list = []
    for m, lab in cands:
        c = _labelled_colors(m, lab)
        ident = {x: x for x in list(m.tree.vertices) + list(m.tree.edges)}
        if any(find_datum_isomorphism(m, o, ident, c, oc) is not None
               for (o, _), oc in zip(out, cols)):
            continue
        out.append((m, lab))
        cols.append(c)
    return out


@dataclass
class _Dispatch:
    tag: str
    audit: list
    vertex: tuple | None = None  # block of the ramified vertex above w0 (single-vertex cases)
    info: dict = field(default_factory=dict)
    expected: int | None = None


def _dispatch(l: LimitDatum) -> _Dispatch:
    m0 = l.datum
    q0 = m0.quotient
    w0 = l.merged_vertex
    val = valency(m0.tree, w0)
    blocks = list(m0.relations[w0])
    rs = {b: class_ramification(m0, w0, b) for b in blocks}
    nd = {b: q0.nd_valency[class_id(w0, b)] for b in blocks}
    audit = [f"val(w0)={val}", "ch(w0)=" + str(sum(rs.values()))]
    for b in blocks:
        if nd[b] == 0:
            audit.append(f"{class_id(w0, b)}: dangling")
        elif rs[b] == 0:
            audit.append(f"{class_id(w0, b)}: w{val}-r0-nd{nd[b]} via aux-r0-nd{nd[b]}")
    ram = [b for b in blocks if rs[b] > 0]
    if val == 4:
        return _Dispatch("w4", audit, expected=3)
    if val == 3:
        if len(ram) != 1 or rs[ram[0]] != 1:
            raise CaseDispatchFailure(f"valency 3 needs exactly one vertex with r=1, got {rs}")
        b = ram[0]
        a0 = class_id(w0, b)
        if nd[b] == 2:
            audit.append(f"{a0}: w3-r1-nd2")
            return _Dispatch("w3-r1-nd2", audit, b, expected=2)
        if nd[b] != 3:
            raise CaseDispatchFailure(f"{a0} has non-dangling valency {nd[b]}")
        es = q0.nd_edges(a0)
        img = [q0.element[e] for e in es]
        size = len(b)
        if len(set(img)) == 2:
            audit.append(f"{a0}: w3-r1-nd3-t3")
            return _Dispatch("w3-r1-nd3-t3", audit, b, expected=2)
        k4 = max(q0.index[e] for e in es)
        if size == k4:
            audit.append(f"{a0}: w3-r1-nd3-t2-(a=k4)")
            return _Dispatch("w3-r1-nd3-t2-(a=k4)", audit, b, expected=4)
        audit.append(f"{a0}: w3-r1-nd3-t2-(a>k4)")
        return _Dispatch("w3-r1-nd3-t2-(a>k4)", audit, b, expected=6)
    if val == 2:
        if len(ram) == 2 and all(rs[b] == 1 for b in ram):
            tags = sorted(f"w2-r1-nd{nd[b]}" for b in ram)
            for b in ram:
                audit.append(f"{class_id(w0, b)}: w2-r1-nd{nd[b]}")
            return _Dispatch("+".join(tags), audit, expected=2)
        if len(ram) != 1 or rs[ram[0]] != 2:
            raise CaseDispatchFailure(f"valency 2 needs r-values (2) or (1,1), got {rs}")
        b = ram[0]
        a0 = class_id(w0, b)
        edges = list(q0.graph.incident(a0))
        dang = q0.dangling[1]
        if len(edges) != 4:
            raise CaseDispatchFailure(f"{a0} with r=2 over a divalent vertex has valency {len(edges)}")
        sides: dict = {}
        for e in edges:
            sides.setdefault(q0.element[e], []).append(e)
        if nd[b] == 2:
            dl = [e for e in edges if e in dang]
            same_side = q0.element[dl[0]] == q0.element[dl[1]]
            if not same_side:
                audit.append(f"{a0}: w2-r2-nd2-M")
                raise InvalidLimit(f"{a0} matches w2-r2-nd2-M: the two columns at w0 coincide, "
                                   "so the limit cannot come from a full-rank datum")
            audit.append(f"{a0}: w2-r2-nd2-P")
            return _Dispatch("w2-r2-nd2-P", audit, b, expected=1)
        if nd[b] != 3:
            raise CaseDispatchFailure(f"{a0} has non-dangling valency {nd[b]}")
        e4 = [e for e in edges if e in dang]
        if len(e4) != 1:
            raise CaseDispatchFailure(f"{a0} should carry exactly one dangling edge")
        e4 = e4[0]
        two = [t for t, es in sides.items() if len([e for e in es if e not in dang]) == 2]
        if len(two) != 1:
            raise CaseDispatchFailure(f"{a0}: no side with two non-dangling edges")
        t2 = two[0]
        k1, k2 = sorted(q0.index[e] for e in sides[t2] if e not in dang)
        card = "M" if q0.element[e4] != t2 else "P"
        if card == "M":
            sub = "M-11" if k1 == 1 and k2 == 1 else ("M-1k" if k1 == 1 else "M-kk")
        else:
            sub = "P"
        tag = f"w2-r2-nd3-{sub}"
        audit.append(f"{a0}: {tag} (k1={k1}, k2={k2})")
        f = 2 if card == "M" and k1 == 1 else 1
        return _Dispatch(tag, audit, b, {"f": f, "k1": k1, "k2": k2}, expected=3)
    raise InvalidMergedValency(f"merged vertex has valency {val}")


def _local_part(m: GluingDatum, bt: BaseTree, block: tuple):
    """Non-dangling classes of ``m`` above ``u``, ``v`` and the new edge inside ``block``."""
    q = m.quotient
    dv, de = q.dangling
    bset = set(block)
    verts = [class_id(x, c) for x in (bt.u, bt.v) for c in m.relations[x]
             if set(c) <= bset and class_id(x, c) not in dv]
    edges = [class_id(bt.edge, c) for c in m.relations[bt.edge]
             if set(c) <= bset and class_id(bt.edge, c) not in de]
    return verts, edges


def _multiplicity(m: GluingDatum, bt: BaseTree, d: _Dispatch) -> tuple[int, str]:
    q = m.quotient
    tag = d.tag
    if tag == "w4" or tag.startswith("w2-r1") or tag in ("w3-r1-nd2", "w3-r1-nd3-t3"):
        return 1, "unit"
    if tag == "w2-r2-nd2-P":
        return 1, "II.1 (determinant vanishes)"
    verts, edges = _local_part(m, bt, d.vertex)
    if tag.startswith("w3-r1-nd3-t2"):
        a_q = [a for a in verts if q.nd_valency[a] == 3]
        if len(a_q) != 1:
            raise CaseDispatchFailure("expected one non-dangling trivalent vertex in the local part")
        a_q = a_q[0]
        if q.element[a_q] == bt.u:
            return 1, "position I"
        ep = [e for e in q.nd_edges(a_q) if q.element[e] == bt.edge]
        if len(ep) != 1:
            raise CaseDispatchFailure("position II needs exactly one edge above the new edge")
        ep = ep[0]
        other = q.graph.other_end(ep, a_q)
        sub = "II.a" if q.index[other] == q.index[ep] else "II.b"
        return q.index[ep], f"position {sub}"
    if tag.startswith("w2-r2-nd3"):
        f = d.info["f"]
        if valency(m.tree, bt.u) == 1 or valency(m.tree, bt.v) == 1:
            return 1, "base I"
        if len(edges) == 1:
            return f * q.index[edges[0]], "base II.1"
        if len(edges) == 2:
            r1 = [a for a in verts
                  if q.nd_valency[a] == 2 and class_ramification(m, q.element[a], q.block[a]) == 1]
            if len(r1) != 1:
                raise CaseDispatchFailure("base II.2 needs one vertex of type r1-nd2")
            e = [x for x in q.nd_edges(r1[0]) if q.element[x] == bt.edge]
            return f * q.index[e[0]], "base II.2"
        raise CaseDispatchFailure(f"unexpected local part with {len(edges)} edges")
    raise CaseDispatchFailure(f"no multiplicity rule for {tag}")


def regrow(l: LimitDatum, labelling: DatumLabelling | None = None) -> list[RegrowCandidate]:
    """The possibly full-dimensional datums whose limit at the regrown edge is ``l``,
    each with a compatible labelling, its multiplicity and its determinant."""
    m0 = l.datum
    q0 = m0.quotient
    if q0.genus < 2 or not _is_trivalent(m0):
        raise NonTrivalentSkeleton("the limit's skeleton is not trivalent")
    w0 = l.merged_vertex
    val = valency(m0.tree, w0)
    if val not in (2, 3, 4):
        raise InvalidMergedValency(f"merged vertex has valency {val}")
    ch = props.change_of(m0, w0)
    if ch + val != 4:
        raise PreconditionViolated(f"change plus valency at the merged vertex is {ch + val}, not 4")
    lab = labelling or default_limit_labelling(l)
    if l.edge not in lab.tree:
        raise InvalidDatum("labelling has no column for the regrown edge")
    if any(x == l.edge for x, _ in lab.skeleton):
        raise InvalidDatum("skeleton representatives must avoid the regrown edge")
    d = _dispatch(l)
    g = q0.genus
    out: list[RegrowCandidate] = []
    for bt in base_trees(l):
        cands = []
        for m, mlab in _generic_candidates(l, bt, lab):
            q = m.quotient
            if q.genus != g or not props.is_possibly_full_dimensional(m) or not _is_trivalent(m):
                continue
            cands.append((m, mlab))
        for m, mlab in _dedupe(cands):
            k, sub = _multiplicity(m, bt, d)
            a = edge_length_matrix(m, mlab)
            det = determinant(a)
            audit = d.audit + [f"{bt.name}: {sub}, K={k}"]
            out.append(RegrowCandidate(m, mlab, k, d.tag, bt.name, det, audit,
                                       flagged=(d.tag == "w2-r2-nd2-P")))
    if d.expected is not None and len(out) != d.expected:
        raise CaseDispatchFailure(f"case {d.tag} expects {d.expected} candidates, found {len(out)}")
    return out


def verify_balancing(l: LimitDatum, candidates: Sequence[RegrowCandidate]) -> Fraction:
    """Return ``sum K det``; raise if it is not zero or if the cofactor identities fail."""
    total = sum((c.K * c.det for c in candidates), Fraction(0))
    shared = None
    for c in candidates:
        a = edge_length_matrix(c.datum, c.labelling)
        k = list(a.col_labels).index(l.edge)
        cof = adjugate_row(a, k)  # asserts sigma(j) = det for j = k and 0 otherwise
        if shared is None:
            shared = cof
        elif cof != shared:
            raise BalancingViolation("cofactors of the regrown column differ between candidates")
    if total != 0:
        raise BalancingViolation(f"sum of K*det is {total}, not 0")
    return total
