"""Exact edge-length matrices of gluing datums and the rational linear algebra
(fraction-free determinants, solves, rank, adjugate rows) used on them."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import lcm
from typing import Mapping, Sequence

from .errors import GenusTooSmall, InvalidDatum, NotSquare, Singular
from .gluing_datum import GluingDatum, class_id
from .graph_core import nsorted
from .metric_graph import fraction_str


@dataclass(frozen=True)
class RationalMatrix:
    entries: tuple  # tuple of row tuples of Fraction
    row_labels: tuple
    col_labels: tuple

    def __post_init__(self):
        rows = tuple(tuple(Fraction(x) for x in r) for r in self.entries)
        object.__setattr__(self, "entries", rows)
        if len(rows) != len(self.row_labels):
            raise ValueError("row labels do not match the number of rows")
        for r in rows:
            if len(r) != len(self.col_labels):
                raise ValueError("column labels do not match the number of columns")

    @property
    def rows(self) -> int:
        return len(self.entries)

    @property
    def cols(self) -> int:
        return len(self.col_labels)

    def __getitem__(self, ij) -> Fraction:
        i, j = ij
        return self.entries[i][j]

    def entry(self, row_label, col_label) -> Fraction:
        return self.entries[self.row_labels.index(row_label)][self.col_labels.index(col_label)]

    def column(self, j: int) -> list:
        return [r[j] for r in self.entries]

    def apply(self, x: Sequence) -> list:
        return [sum((a * Fraction(b) for a, b in zip(r, x)), Fraction(0)) for r in self.entries]

    def to_json(self) -> dict:
        return {
            "row_labels": [str(x) for x in self.row_labels],
            "col_labels": [str(x) for x in self.col_labels],
            "entries": [[fraction_str(x) for x in r] for r in self.entries],
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "RationalMatrix":
        return cls(tuple(tuple(Fraction(x) for x in r) for r in data["entries"]),
                   tuple(data["row_labels"]), tuple(data["col_labels"]))

    @classmethod
    def identity(cls, n: int) -> "RationalMatrix":
        return cls(tuple(tuple(Fraction(int(i == j)) for j in range(n)) for i in range(n)),
                   tuple(range(n)), tuple(range(n)))


# -- linear algebra ---------------------------------------------------------

def _require_square(a: RationalMatrix) -> None:
    if a.rows != a.cols:
        raise NotSquare(f"matrix is {a.rows}x{a.cols}")


def bareiss_det(rows: Sequence[Sequence[int]]) -> int:
    """Fraction-free determinant of an integer matrix."""
    m = [list(r) for r in rows]
    n = len(m)
    if n == 0:
        return 1
    sign = 1
    prev = 1
    for k in range(n - 1):
        if m[k][k] == 0:
            swap = next((i for i in range(k + 1, n) if m[i][k] != 0), None)
            if swap is None:
                return 0
            m[k], m[swap] = m[swap], m[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) // prev
            m[i][k] = 0
        prev = m[k][k]
    return sign * m[n - 1][n - 1]


def determinant(a: RationalMatrix) -> Fraction:
    """Exact determinant: clear denominators row by row, then Bareiss."""
    _require_square(a)
    scale = 1
    ints = []
    for r in a.entries:
        s = lcm(*(x.denominator for x in r)) if r else 1
        scale *= s
        ints.append([int(x * s) for x in r])
    return Fraction(bareiss_det(ints), scale)


def _echelon(rows: list) -> tuple[list, list]:
    """Reduced row echelon form over the rationals; returns (rows, pivot columns)."""
    m = [list(r) for r in rows]
    pivots = []
    r = 0
    ncols = len(m[0]) if m else 0
    for c in range(ncols):
        p = next((i for i in range(r, len(m)) if m[i][c] != 0), None)
        if p is None:
            continue
        m[r], m[p] = m[p], m[r]
        pv = m[r][c]
        m[r] = [x / pv for x in m[r]]
        for i in range(len(m)):
            if i != r and m[i][c] != 0:
                f = m[i][c]
                m[i] = [x - f * y for x, y in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
        if r == len(m):
            break
    return m, pivots


def rank(a: RationalMatrix) -> int:
    if a.rows == 0 or a.cols == 0:
        return 0
    return len(_echelon([list(r) for r in a.entries])[1])


def solve(a: RationalMatrix, y: Sequence) -> list:
    """The unique ``x`` with ``a x = y``."""
    _require_square(a)
    aug = [list(r) + [Fraction(v)] for r, v in zip(a.entries, y)]
    m, piv = _echelon(aug)
    if len(piv) < a.cols or (piv and piv[-1] == a.cols):
        raise Singular("matrix is singular")
    return [m[i][a.cols] for i in range(a.cols)]


def minor(a: RationalMatrix, i: int, j: int) -> RationalMatrix:
    rows = tuple(tuple(x for c, x in enumerate(r) if c != j)
                 for k, r in enumerate(a.entries) if k != i)
    return RationalMatrix(rows, a.row_labels[:i] + a.row_labels[i + 1:],
                          a.col_labels[:j] + a.col_labels[j + 1:])


def adjugate_row(a: RationalMatrix, k: int) -> list:
    """Cofactors ``c_i`` of column ``k``: ``sum_i c_i a_ik = det`` and
    ``sum_i c_i a_ij = 0`` for ``j != k`` (both asserted)."""
    _require_square(a)
    n = a.rows
    c = [(-1) ** (i + k) * determinant(minor(a, i, k)) for i in range(n)]
    det = determinant(a)
    for j in range(n):
        s = sum((c[i] * a.entries[i][j] for i in range(n)), Fraction(0))
        assert s == (det if j == k else 0), "adjugate identity fails"
    return c


def adjugate_first_row(a: RationalMatrix) -> list:
    return adjugate_row(a, 0)


# -- labellings and the edge-length matrix ----------------------------------

@dataclass(frozen=True)
class DatumLabelling:
    """Orders for the columns (tree edges) and rows (skeleton edges) of ``A_M``.

    A skeleton edge is named by one of its edges in ``G``, given as a tree edge
    together with one sheet of the class; this survives re-computing the
    quotient and is how labellings are transported between datums.
    """

    tree: tuple
    skeleton: tuple  # tuple of (tree edge, sheet)

    def rows_for(self, m: GluingDatum) -> list:
        q = m.quotient
        sk = q.skeleton
        out = []
        for t, i in self.skeleton:
            if not m.tree.has_edge(t):
                raise InvalidDatum(f"labelling names unknown tree edge {t!r}")
            cid = class_id(t, m.block(t, i))
            if cid not in sk.membership:
                raise InvalidDatum(f"labelling names dangling edge {cid}")
            out.append(sk.membership[cid])
        if len(set(out)) != len(out) or len(out) != len(sk.graph.edges):
            raise InvalidDatum("labelling does not list every skeleton edge exactly once")
        return out

    def row_names(self) -> tuple:
        return tuple(f"{t}/{i}" for t, i in self.skeleton)

    def to_json(self) -> dict:
        return {"tree": [str(t) for t in self.tree],
                "skeleton": [[str(t), i] for t, i in self.skeleton]}

    @classmethod
    def from_json(cls, data: Mapping) -> "DatumLabelling":
        return cls(tuple(data["tree"]), tuple((t, int(i)) for t, i in data["skeleton"]))

    @classmethod
    def default(cls, m: GluingDatum) -> "DatumLabelling":
        q = m.quotient
        sk = q.skeleton
        reps = []
        for h in nsorted(sk.graph.edges):
            e = nsorted(sk.paths[h])[0]
            reps.append((q.element[e], q.block[e][0]))
        return cls(tuple(nsorted(m.tree.edges)), tuple(reps))


def path_sum_entries(m: GluingDatum, rows: Sequence, cols: Sequence) -> list:
    q = m.quotient
    sk = q.skeleton
    col_index = {t: j for j, t in enumerate(cols)}
    out = []
    for h in rows:
        r = [Fraction(0)] * len(cols)
        for e in sk.paths[h]:
            r[col_index[q.element[e]]] += Fraction(1, q.index[e])
        out.append(r)
    return out


def local_entries(m: GluingDatum, rows: Sequence, cols: Sequence) -> list:
    """Entries from the local description: 2 when ``h`` runs up a leaf edge and
    back, ``1/|e|`` when it passes once over ``t`` through ``e``, 0 otherwise."""
    from .graph_core import valency

    q = m.quotient
    sk = q.skeleton
    leaf_edges = {t for t in m.tree.edges
                  if any(valency(m.tree, v) == 1 for v in m.tree.ends[t])}
    out = []
    for h in rows:
        over: dict = {}
        for e in sk.paths[h]:
            over.setdefault(q.element[e], []).append(e)
        r = []
        for t in cols:
            es = over.get(t, [])
            if not es:
                r.append(Fraction(0))
            elif t in leaf_edges:
                r.append(Fraction(2))
            else:
                r.append(Fraction(1, q.index[es[0]]))
        out.append(r)
    return out


def edge_length_matrix(m: GluingDatum, labelling: DatumLabelling | None = None,
                       cross_check: bool = True) -> RationalMatrix:
    """``a_ht = sum of 1/|e|`` over the edges ``e`` of ``h`` above ``t``."""
    q = m.quotient
    if q.genus < 2:
        raise GenusTooSmall("the edge-length matrix needs genus at least two")
    lab = labelling or DatumLabelling.default(m)
    rows = lab.rows_for(m)
    cols = list(lab.tree)
    if sorted(map(str, cols)) != sorted(map(str, m.tree.edges)):
        raise InvalidDatum("labelling does not list every tree edge exactly once")
    entries = path_sum_entries(m, rows, cols)
    if cross_check:
        from . import props

        if props.is_change_minimal(m) and props.is_pass_once(m):
            assert entries == local_entries(m, rows, cols), "local entry formula disagrees"
    return RationalMatrix(tuple(map(tuple, entries)), lab.row_names(), tuple(cols))


def is_full_dimensional(m: GluingDatum) -> bool:
    """``dim C = 3g - 3 = 2g + 2d - 5``: the degree must be ``g/2 + 1`` and ``A_M`` a
    nonsingular square matrix.  A nonsingular square matrix alone is not enough; a
    sheet hanging off a full gluing gives one for a genus that is too small."""
    q = m.quotient
    g = q.genus
    if g < 2 or len(m.tree.edges) != 3 * g - 3 or 2 * g + 2 * m.degree - 5 != 3 * g - 3:
        return False
    a = edge_length_matrix(m, cross_check=False)
    if a.rows != a.cols:
        return False
    return determinant(a) != 0
