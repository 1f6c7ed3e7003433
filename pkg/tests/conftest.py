import json
from fractions import Fraction
from pathlib import Path

import pytest

from tropmorph.elmap import DatumLabelling
from tropmorph.gluing_datum import GluingDatum
from tropmorph.graph_core import Graph
from tropmorph.limits_regrow import LimitDatum

DATA = Path(__file__).parent / "data"
WORKED = DATA / "worked_example"


def theta() -> Graph:
    return Graph(["a", "b"], {"e1": ("a", "b"), "e2": ("a", "b"), "e3": ("a", "b")})


def dumbbell() -> Graph:
    return Graph(["a", "b"], {"l1": ("a", "a"), "br": ("a", "b"), "l2": ("b", "b")})


def tree_t1() -> Graph:
    """The nine-edge tree of the worked example: a centre with three cherries."""
    ends = {"t1": ("c", "w45"), "t2": ("c", "w67"), "t3": ("c", "w89"),
            "t4": ("w45", "v4"), "t5": ("w45", "v5"), "t6": ("w67", "v6"),
            "t7": ("w67", "v7"), "t8": ("w89", "v8"), "t9": ("w89", "v9")}
    return Graph(["c", "w45", "w67", "w89", "v4", "v5", "v6", "v7", "v8", "v9"], ends)


def m1_datum() -> GluingDatum:
    """The first datum of the worked example, built by hand from its relations."""
    rel = {"v4": [[1, 2], [3]], "v5": [[1, 2], [3]],
           "v6": [[2, 3], [1]], "v7": [[2, 3], [1]],
           "v8": [[1, 3], [2]], "v9": [[1, 3], [2]]}
    return GluingDatum(tree_t1(), 3, rel)


# rows y1..y9 named by one tree edge and one sheet above each skeleton edge
M1_LABELLING = DatumLabelling(
    tuple(f"t{i}" for i in range(1, 10)),
    (("t3", 1), ("t2", 2), ("t2", 3), ("t4", 1), ("t5", 1),
     ("t6", 2), ("t7", 2), ("t8", 1), ("t9", 1)))


def load_worked(k: int):
    """``(datum or limit, labelling)`` of step ``k`` of the worked chain."""
    data = json.loads((WORKED / f"m{k}.json").read_text())
    lab = DatumLabelling.from_json(data["labelling"])
    if k % 2 == 0:
        return LimitDatum.from_json(data), lab
    return GluingDatum.from_json(data), lab


def fr(text: str) -> Fraction:
    return Fraction(text) if text else Fraction(0)


def matrix(text: str) -> list:
    """Rows separated by ``;``, entries by ``,``; blanks are zero."""
    return [[fr(c.strip()) for c in row.split(",")] for row in text.strip().split(";")]


# Edge-length matrices of the worked chain, rows y1..y9 and columns t1..t9.
WORKED_MATRICES = {
    1: matrix("1,0,1,,,,,,;1,1,0,,,,,,;0,1,1,,,,,,;,,,2,,,,,;,,,,2,,,,;"
              ",,,,,2,,,;,,,,,,2,,;,,,,,,,2,;,,,,,,,,2"),
    3: matrix("0,0,1,,,,,,;0,1,0,,,,,,;1,1,1,,,,,,;1,,,2,,,,,;1,,,,2,,,,;"
              ",,,,,2,,,;,,,,,,2,,;,,,,,,,2,;,,,,,,,,2"),
    5: matrix("0,0,1,0,,,,,;0,1,0,1/2,,,,,;1,1,1,1,,,,,;1,,,,,,,,;1,,,,2,,,,;"
              ",,,,,2,,,;,,,,,,2,,;,,,,,,,2,;,,,,,,,,2"),
    7: matrix("0,0,1,0,,,,,;0,0,0,1/2,,,,,;1,1,1,1,,,,,;1,,,,,,,,;1,,,,2,,,,;"
              ",1,,,,2,,,;,1,,,,,2,,;,,,,,,,2,;,,,,,,,,2"),
    9: matrix("0,0,1,0,,,,,;0,0,0,1/2,,,,,;1,1,1,1,,2,,,;1,,,,,,,,;1,,,,2,,,,;"
              ",1,,,,,,,;,1,,,,,2,,;,,,,,,,2,;,,,,,,,,2"),
}
WORKED_DETS = {1: 128, 3: -64, 5: 16, 7: -16, 9: 16}


@pytest.fixture
def m1():
    return m1_datum()


@pytest.fixture
def h_graph():
    return m1_datum().quotient.skeleton.graph
