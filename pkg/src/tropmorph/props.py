"""Necessary conditions for full-dimensionality and the local vertex classification.

Every checker returns a :class:`CheckResult`, which is truthy exactly when the
condition holds and otherwise carries a witness for diagnostics.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .errors import PreconditionViolated, Unclassifiable
from .gluing_datum import GluingDatum, class_ramification, vertex_change
from .graph_core import valency


@dataclass(frozen=True)
class CheckResult:
    ok: bool
    witness: dict = field(default_factory=dict)

    def __bool__(self) -> bool:
        return self.ok

    def to_json(self) -> dict:
        return {"ok": self.ok, "witness": self.witness}


PASS = CheckResult(True)


def change_of(m: GluingDatum, v) -> int:
    return vertex_change(m.relations, m.tree, v, m.degree)


def check_change_minimal(m: GluingDatum) -> CheckResult:
    for v in m.tree.vertices:
        s = change_of(m, v) + valency(m.tree, v)
        if s != 3:
            return CheckResult(False, {"vertex": str(v), "change_plus_valency": s})
    return PASS


def is_change_minimal(m: GluingDatum) -> bool:
    return bool(check_change_minimal(m))


def check_dangling_no_glue(m: GluingDatum) -> CheckResult:
    q = m.quotient
    dv, de = q.dangling
    for c in sorted(dv | de, key=str):
        if q.index[c] != 1:
            return CheckResult(False, {"class": c, "size": q.index[c]})
    return PASS


def check_no_return(m: GluingDatum) -> CheckResult:
    q = m.quotient
    dv = q.dangling[0]
    for a in q.graph.vertices:
        if a in dv or valency(m.tree, q.element[a]) == 1:
            continue
        images = {q.element[e] for e in q.nd_edges(a)}
        if len(images) < 2:
            return CheckResult(False, {"vertex": a, "images": sorted(map(str, images))})
    return PASS


def check_pass_once(m: GluingDatum) -> CheckResult:
    q = m.quotient
    t = m.tree
    leafy = {x for x in t.edges if any(valency(t, v) == 1 for v in t.ends[x])}
    sk = q.skeleton
    for h, path in sk.paths.items():
        seen: dict = {}
        for e in path:
            x = q.element[e]
            if x in leafy:
                continue
            if x in seen:
                return CheckResult(False, {"skeleton_edge": h, "tree_edge": str(x),
                                           "edges": [seen[x], e]})
            seen[x] = e
    return PASS


def is_pass_once(m: GluingDatum) -> bool:
    return bool(check_pass_once(m))


def check_possibly_full_dimensional(m: GluingDatum) -> CheckResult:
    q = m.quotient
    g = q.genus
    if g < 2:
        return CheckResult(False, {"genus": g})
    for name, fn in (("change_minimal", check_change_minimal),
                     ("dangling_no_glue", check_dangling_no_glue),
                     ("no_return", check_no_return)):
        res = fn(m)
        if not res:
            return CheckResult(False, {"condition": name, **res.witness})
    rows, cols = len(q.skeleton.graph.edges), len(m.tree.edges)
    if not (rows == cols == 3 * g - 3) or g % 2:
        return CheckResult(False, {"condition": "square", "rows": rows, "cols": cols, "genus": g})
    return PASS


def is_possibly_full_dimensional(m: GluingDatum) -> bool:
    return bool(check_possibly_full_dimensional(m))


def condition_table(m: GluingDatum) -> dict:
    """Every condition with its result, for reporting."""
    return {
        "change_minimal": check_change_minimal(m).to_json(),
        "dangling_no_glue": check_dangling_no_glue(m).to_json(),
        "no_return": check_no_return(m).to_json(),
        "pass_once": check_pass_once(m).to_json(),
        "possibly_full_dimensional": check_possibly_full_dimensional(m).to_json(),
    }


# -- local classification ----------------------------------------------------

@dataclass(frozen=True)
class LocalCase:
    """A classified vertex; ``edges`` lists its non-dangling edges in the order
    used by the case statement (for ``r1-nd3`` the two edges with a common image
    come first)."""

    tag: str
    vertex: str
    r: int
    edges: tuple


def nd_ramification(m: GluingDatum, a) -> int:
    """``r`` from non-dangling data only; valid under dangling-no-glue."""
    q = m.quotient
    nd = q.nd_edges(a)
    return len(nd) - 2 + 2 * q.index[a] - sum(q.index[e] for e in nd)


def classify_local_detail(m: GluingDatum, a) -> LocalCase:
    if not check_change_minimal(m) or not check_dangling_no_glue(m):
        raise PreconditionViolated("classification needs change-minimal and dangling-no-glue")
    q = m.quotient
    nd = sorted(q.nd_edges(a), key=lambda e: (q.index[e], e))
    ndval = len(nd)
    if ndval not in (2, 3):
        raise PreconditionViolated(f"vertex {a} has non-dangling valency {ndval}")
    r = class_ramification(m, q.element[a], q.block[a])
    assert r == nd_ramification(m, a), "ramification formulas disagree"
    size = q.index[a]
    val_v = valency(m.tree, q.element[a])
    img = [q.element[e] for e in nd]
    sz = [q.index[e] for e in nd]
    injective = len(set(img)) == len(img)

    def need(cond, tag):
        if not cond:
            raise Unclassifiable(f"vertex {a} matches {tag} but violates its side conditions")

    if r == 0 and ndval == 3:
        need(injective and val_v == 3 and sum(sz) == 2 * size + 1, "r0-nd3")
        return LocalCase("r0-nd3", a, r, tuple(nd))
    if r == 0 and ndval == 2:
        need(injective and val_v in (2, 3) and sz[0] == size == sz[1], "r0-nd2")
        return LocalCase("r0-nd2", a, r, tuple(nd))
    if r == 1 and ndval == 3:
        pairs = [(i, j) for i in range(3) for j in range(i + 1, 3) if img[i] == img[j]]
        need(len(pairs) == 1, "r1-nd3")
        i, j = pairs[0]
        k = 3 - i - j
        need(val_v == 2 and sz[i] + sz[j] == size == sz[k], "r1-nd3")
        return LocalCase("r1-nd3", a, r, (nd[i], nd[j], nd[k]))
    if r == 1 and ndval == 2:
        need(injective and val_v == 2 and sorted(sz) == [size - 1, size], "r1-nd2")
        return LocalCase("r1-nd2", a, r, tuple(nd))
    if r == 2 and ndval == 2:
        need(img[0] == img[1] and val_v == 1 and sz == [1, 1] and size == 2, "r2-nd2")
        return LocalCase("r2-nd2", a, r, tuple(nd))
    if r == 2 and ndval == 3:
        raise PreconditionViolated(f"vertex {a} has r=2 and non-dangling valency 3")
    raise Unclassifiable(f"vertex {a}: r={r}, nd-valency={ndval}")


def classify_local(m: GluingDatum, a) -> str:
    return classify_local_detail(m, a).tag
