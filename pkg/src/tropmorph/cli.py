"""Command-line front end: file I/O, tables, and JSON/DOT rendering."""
from __future__ import annotations

import argparse
import json
import sys
from typing import Sequence

from . import dtm, props
from .deform import DEFAULT_MAX_STEPS, realize, verify_realization
from .elmap import DatumLabelling, determinant, edge_length_matrix
from .errors import TropError
from .gluing_datum import GluingDatum, enumerate_datums, validate
from .graph_core import Graph, nsorted
from .limits_regrow import LimitDatum, limit_at, regrow, transport_labelling, verify_balancing
from .metric_graph import MetricGraph, fraction_str

FILTERS = ("all", "possibly-full-dimensional", "full-dimensional")


class UsageError(Exception):
    """A required flag is missing or inconsistent; exits with status 2."""


# -- file i/o --------------------------------------------------------------

def _load(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _need(args, name: str) -> str:
    value = getattr(args, name)
    if value is None:
        raise UsageError(f"--{name.replace('_', '-')} is required for {args.command}")
    return value


def load_datum(path: str) -> tuple[GluingDatum, DatumLabelling | None]:
    """A datum file, optionally carrying a ``labelling`` for its matrix."""
    data = _load(path)
    lab = DatumLabelling.from_json(data["labelling"]) if data.get("labelling") else None
    return GluingDatum.from_json(data), lab


def load_limit(path: str) -> tuple[LimitDatum, DatumLabelling | None]:
    data = _load(path)
    lab = DatumLabelling.from_json(data["labelling"]) if data.get("labelling") else None
    return LimitDatum.from_json(data), lab


def _emit(obj, out=None) -> None:
    out = out or sys.stdout
    json.dump(obj, out, indent=2, sort_keys=True)
    out.write("\n")


def _write(path: str, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        _emit(obj, fh)


def _table(rows: Sequence[Sequence], out=None) -> None:
    out = out or sys.stdout
    rows = [[str(c) for c in r] for r in rows]
    widths = [max(len(r[k]) for r in rows) for k in range(len(rows[0]))]
    for r in rows:
        out.write("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() + "\n")


# -- DOT -------------------------------------------------------------------

def _q(x) -> str:
    return '"' + str(x).replace("\\", "\\\\").replace('"', '\\"') + '"'


def render_dot(m: GluingDatum) -> str:
    """The ``d`` copies of the tree drawn as stacked rows; glued vertex copies share a
    cluster labelled by their class, glued edge copies carry the class in their label,
    and dangling elements of the quotient are dashed."""
    q = m.quotient
    dv, de = q.dangling
    t = m.tree
    lines = ["graph datum {", "  rankdir=TB;", "  node [shape=circle, fontsize=10];"]
    node = {(v, i): _q(f"{v}|{i}") for v in t.vertices for i in range(1, m.degree + 1)}
    for v in nsorted(t.vertices):
        for b in m.relations[v]:
            cid = q.class_of(v, b[0])
            style = ", style=dashed" if cid in dv else ""
            names = [node[(v, i)] for i in b]
            if len(b) > 1:
                lines.append(f"  subgraph {_q('cluster_' + cid)} {{")
                lines.append(f"    label={_q(cid)}; style=rounded;")
                lines.extend(f"    {n} [label={_q(f'{v} {i}')}{style}];" for n, i in zip(names, b))
                lines.append("  }")
            else:
                lines.append(f"  {names[0]} [label={_q(f'{v} {b[0]}')}{style}];")
    for i in range(1, m.degree + 1):
        lines.append(f"  subgraph {_q(f'sheet_{i}')} {{ rank=same; "
                     + " ".join(node[(v, i)] for v in nsorted(t.vertices) if len(t.incident(v)) == 1)
                     + " }")
    for e in nsorted(t.edges):
        a, b = t.ends[e]
        for blk in m.relations[e]:
            cid = q.class_of(e, blk[0])
            attrs = [f"label={_q(cid if len(blk) > 1 else e)}"]
            if cid in de:
                attrs.append("style=dashed")
            if len(blk) > 1:
                attrs.append(f"penwidth={len(blk)}")
            for i in blk:
                lines.append(f"  {node[(a, i)]} -- {node[(b, i)]} [{', '.join(attrs)}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


# -- subcommands -----------------------------------------------------------

def cmd_validate(args) -> int:
    m, _ = load_datum(_need(args, "datum"))
    rep = validate(m)
    if args.json:
        _emit(rep.to_json())
    else:
        print("valid" if rep.ok else "invalid")
        for axiom, witness in rep.failures:
            print(f"  {axiom}: {witness}")
    return 0 if rep.ok else 1


def cmd_quotient(args) -> int:
    m, _ = load_datum(_need(args, "datum"))
    q = m.quotient
    f = q.to_dtm()
    if args.json:
        _emit({"genus": q.genus, "morphism": f.to_json()})
        return 0
    print(f"genus {q.genus}, {len(q.graph.vertices)} vertices, {len(q.graph.edges)} edges")
    rows = [["class", "over", "index", "dangling"]]
    for c in nsorted(q.graph.vertices) + nsorted(q.graph.edges):
        rows.append([c, q.element[c], q.index[c], "yes" if q.is_dangling(c) else ""])
    _table(rows)
    return 0


def cmd_check(args) -> int:
    if args.input is not None:
        f = dtm.DiscreteTropicalMorphism.from_json(_load(args.input))
        rep = dtm.check(f)
        if args.json:
            _emit(rep.to_json())
        else:
            print("morphism ok" if rep.ok else "morphism fails")
            for cond, witness in rep.failures:
                print(f"  {cond}: {witness}")
        return 0 if rep.ok else 1
    m, _ = load_datum(_need(args, "datum"))
    table = props.condition_table(m)
    if args.json:
        _emit(table)
    else:
        rows = [["condition", "holds", "witness"]]
        rows += [[k, "yes" if v["ok"] else "no", json.dumps(v["witness"]) if v["witness"] else ""]
                 for k, v in table.items()]
        _table(rows)
    return 0


def _matrix(args):
    m, lab = load_datum(_need(args, "datum"))
    return edge_length_matrix(m, lab)


def cmd_matrix(args) -> int:
    a = _matrix(args)
    if args.json:
        _emit(a.to_json())
    else:
        rows = [[""] + [str(c) for c in a.col_labels]]
        rows += [[r] + [fraction_str(x) for x in row] for r, row in zip(a.row_labels, a.entries)]
        _table(rows)
    return 0


def cmd_det(args) -> int:
    d = determinant(_matrix(args))
    if args.json:
        _emit({"det": fraction_str(d)})
    else:
        print(fraction_str(d))
    return 0


def cmd_limit(args) -> int:
    m, lab = load_datum(_need(args, "datum"))
    e = _need(args, "edge")
    lim = limit_at(m, e)
    out = lim.to_json()
    if lab is not None:
        out["labelling"] = transport_labelling(m, lab, e).to_json()
    if args.json or args.out is None:
        _emit(out)
    if args.out is not None:
        _write(args.out, out)
    return 0


def cmd_regrow(args) -> int:
    lim, lab = load_limit(_need(args, "limit"))
    cands = regrow(lim, lab)
    total = verify_balancing(lim, cands)
    if args.json:
        _emit([c.to_json() for c in cands])
        return 0
    rows = [["#", "base tree", "case", "K", "det"]]
    rows += [[k, c.base, c.case_tag, c.K, fraction_str(c.det)] for k, c in enumerate(cands, 1)]
    _table(rows)
    print(f"{len(cands)} candidates, balancing sum {fraction_str(total)}")
    return 0


def cmd_realize(args) -> int:
    metric = MetricGraph.from_json(_load(_need(args, "input")))
    r = realize(metric, seed=args.seed, max_steps=args.max_steps)
    rep = verify_realization(r.realization, r.target)
    out = r.to_json()
    out["verification"] = rep.to_json()
    if args.out is not None:
        _write(args.out, out)
    if args.trace is not None:
        _write(args.trace, r.trace.to_json())
    if args.json:
        _emit(out)
    else:
        print(f"degree {r.degree}, {len(r.trace.steps)} cones visited, "
              f"verification {'passed' if rep.ok else 'failed'}")
    return 0 if rep.ok else 1


def cmd_enumerate(args) -> int:
    tree = Graph.from_json(_load(_need(args, "tree")))
    d = int(_need(args, "degree"))
    found = []
    for m in enumerate_datums(tree, d):
        if args.filter == "possibly-full-dimensional" and not props.is_possibly_full_dimensional(m):
            continue
        if args.filter == "full-dimensional":
            from .elmap import is_full_dimensional

            if not is_full_dimensional(m):
                continue
        found.append(m)
    if args.json:
        _emit([m.to_json() for m in found])
    else:
        for k, m in enumerate(found, 1):
            print(f"{k}: {json.dumps(m.to_json()['relations'], sort_keys=True)}")
        print(f"{len(found)} datums")
    return 0


def cmd_render(args) -> int:
    m, _ = load_datum(_need(args, "datum"))
    text = render_dot(m)
    if args.out is not None:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


COMMANDS = {
    "validate": (cmd_validate, "check the gluing-datum axioms"),
    "quotient": (cmd_quotient, "the quotient graph and its map to the tree"),
    "check": (cmd_check, "condition table of a datum, or the checks of a morphism (--input)"),
    "matrix": (cmd_matrix, "edge-length matrix"),
    "det": (cmd_det, "determinant of the edge-length matrix"),
    "limit": (cmd_limit, "contract a tree edge"),
    "regrow": (cmd_regrow, "all datums regrown from a limit, with balancing"),
    "realize": (cmd_realize, "a tropical morphism to a tree from a metric graph"),
    "enumerate": (cmd_enumerate, "datums over a tree up to isomorphism"),
    "render": (cmd_render, "DOT drawing of a datum"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="machine-readable output")
    common.add_argument("--datum", help="gluing datum JSON file")
    common.add_argument("--tree", help="tree JSON file")
    common.add_argument("--degree", type=int, help="number of sheets")
    common.add_argument("--input", help="metric graph or morphism JSON file")
    common.add_argument("--limit", help="limit datum JSON file")
    common.add_argument("--edge", help="tree edge id")
    common.add_argument("--out", help="output file")
    common.add_argument("--trace", help="deformation trace output file")
    common.add_argument("--seed", type=int, default=0, help="perturbation seed")
    common.add_argument("--max-steps", type=int, default=DEFAULT_MAX_STEPS)
    common.add_argument("--dot", action="store_true", help="DOT output (render)")
    common.add_argument("--filter", choices=FILTERS, default="all", help="enumeration filter")
    parser = argparse.ArgumentParser(prog="tropmorph", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_text)
    return parser


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        return COMMANDS[args.command][0](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (TropError, OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        code = exc.code if isinstance(exc, TropError) else type(exc).__name__
        print(f"error: {code}: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())
