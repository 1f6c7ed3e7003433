"""Exhaustive property checks over enumerated gluing datums.

Each check compares two independent computations (or a computation with a
closed-form identity) and records a counterexample when they disagree.
"""
from __future__ import annotations

import random
import time
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction

from conftest import load_worked, m1_datum
from tropmorph import dtm, props
from tropmorph.deform import walk
from tropmorph.elmap import (
    DatumLabelling,
    is_full_dimensional,
    local_entries,
    path_sum_entries,
)
from tropmorph.errors import TropError
from tropmorph.gluing_datum import all_trees, canonical_key, enumerate_datums, from_dtm
from tropmorph.graph_core import genus, valency
from tropmorph.limits_regrow import limit_at, regrow

PROPERTIES = ("a_dtm_checks", "b_riemann_hurwitz", "c_dimension_formula",
              "d_full_dimensional_conditions", "e_local_formula", "f_round_trip",
              "g_regrow_completeness")


@dataclass
class SuiteReport:
    datums: int = 0
    checked: Counter = field(default_factory=Counter)
    failures: list = field(default_factory=list)
    seconds: float = 0.0

    @property
    def ok(self) -> bool:
        return not self.failures

    def fail(self, prop: str, m, detail) -> None:
        if len(self.failures) < 20:
            self.failures.append((prop, m.to_json(), str(detail)))
        else:
            self.failures.append((prop, None, str(detail)))


def independent_rh(f) -> bool:
    """``2g - 2 = d (2g' - 2) + sum r`` with r from the defining valency formula."""
    src, tgt = f.source, f.target
    d = sum(f.index[a] for a in src.vertices if f.vertex_map[a] == tgt.vertices[0])
    total_r = sum((valency(src, a) - 2) - (valency(tgt, f.vertex_map[a]) - 2) * f.index[a]
                  for a in src.vertices)
    return 2 * genus(src) - 2 == d * (2 * genus(tgt) - 2) + total_r


def independent_dimension(f) -> bool:
    """``|E'| + sum_v (ch v + val v - 3) = 2g - g'(2d - 3) + 2d - 5`` with the change
    at each target vertex summed from the defining ramification formula."""
    src, tgt = f.source, f.target
    d = sum(f.index[a] for a in src.vertices if f.vertex_map[a] == tgt.vertices[0])
    ch = Counter()
    for a in src.vertices:
        v = f.vertex_map[a]
        ch[v] += (valency(src, a) - 2) - (valency(tgt, v) - 2) * f.index[a]
    lhs = len(tgt.edges) + sum(ch[v] + valency(tgt, v) - 3 for v in tgt.vertices)
    return lhs == 2 * genus(src) - genus(tgt) * (2 * d - 3) + 2 * d - 5


def _regrow_sites(m):
    """Tree edges whose limit keeps the genus and meets the regrow preconditions:
    a trivalent skeleton and change plus valency four at the merged vertex."""
    for t in m.tree.edges:
        try:
            lim = limit_at(m, t)
        except TropError:
            continue
        if lim.datum.quotient.genus < 2:
            continue
        sk = lim.datum.quotient.skeleton.graph
        if any(valency(sk, a) != 3 for a in sk.vertices):
            continue
        w0 = lim.merged_vertex
        if props.change_of(lim.datum, w0) + valency(lim.datum.tree, w0) != 4:
            continue
        yield t, lim


def check_datum(m, report: SuiteReport, regrow_check: bool = True) -> None:
    report.datums += 1
    q = m.quotient
    f = q.to_dtm()
    rep = dtm.check(f)
    report.checked["a_dtm_checks"] += 1
    if not rep.ok:
        report.fail("a_dtm_checks", m, rep.failures)
        return
    report.checked["b_riemann_hurwitz"] += 1
    if not (independent_rh(f) and dtm.riemann_hurwitz_check(f)):
        report.fail("b_riemann_hurwitz", m, "identity fails")
    report.checked["c_dimension_formula"] += 1
    if not independent_dimension(f):
        report.fail("c_dimension_formula", m, dtm.dimension_formula(f))
    report.checked["f_round_trip"] += 1
    if canonical_key(from_dtm(f)) != canonical_key(m):
        report.fail("f_round_trip", m, "from_dtm(quotient) is not isomorphic to the datum")
    g = q.genus
    if g < 2:
        return
    cm, po = props.is_change_minimal(m), props.is_pass_once(m)
    if cm and po:
        lab = DatumLabelling.default(m)
        rows, cols = lab.rows_for(m), list(lab.tree)
        report.checked["e_local_formula"] += 1
        if path_sum_entries(m, rows, cols) != local_entries(m, rows, cols):
            report.fail("e_local_formula", m, "entry tables differ")
    if is_full_dimensional(m):
        report.checked["d_full_dimensional_conditions"] += 1
        conds = (cm, props.check_dangling_no_glue(m).ok, props.check_no_return(m).ok, po)
        if not all(conds):
            report.fail("d_full_dimensional_conditions", m, conds)
    if regrow_check and props.is_possibly_full_dimensional(m):
        check_regrow_completeness(m, report)


def check_regrow_completeness(m, report: SuiteReport) -> None:
    """Every admissible limit of ``m`` regrows ``m`` among its candidates."""
    key = canonical_key(m)
    for t, lim in _regrow_sites(m):
        report.checked["g_regrow_completeness"] += 1
        try:
            cands = regrow(lim)
        except TropError as exc:
            report.fail("g_regrow_completeness", m, f"regrow at {t} raised {exc!r}")
            continue
        if not any(canonical_key(c.datum) == key for c in cands):
            report.fail("g_regrow_completeness", m, f"missing from regrow at {t}")


def walk_datums(n_walks: int = 10, seed: int = 4) -> list:
    """Distinct full-dimensional datums of the worked chain and of genus-4 walks.

    Low-degree enumeration never reaches a limit with a trivalent skeleton, so
    regrow completeness is also exercised on these larger datums.
    """
    h = m1_datum().quotient.skeleton.graph
    rng = random.Random(seed)
    found: dict = {}
    for k in (1, 3, 5, 7, 9):
        m = load_worked(k)[0]
        found.setdefault(canonical_key(m), m)
    for k in range(n_walks):
        y = {e: Fraction(rng.randint(1, 50), rng.randint(1, 10)) for e in h.edges}
        trace = walk(h, y, seed=k)[3]
        for step in trace.steps:
            found.setdefault(canonical_key(step.datum), step.datum)
    return list(found.values())


def run_suite(ranges=((2, 4), (3, 6)), regrow_check: bool = True) -> SuiteReport:
    """Every datum class with ``d`` sheets over every tree with at most ``n`` edges."""
    report = SuiteReport()
    start = time.perf_counter()
    for d, max_edges in ranges:
        for n in range(1, max_edges + 1):
            for tree in all_trees(n):
                for m in enumerate_datums(tree, d):
                    check_datum(m, report, regrow_check)
    if regrow_check:
        for m in walk_datums():
            check_regrow_completeness(m, report)
    report.seconds = time.perf_counter() - start
    return report
