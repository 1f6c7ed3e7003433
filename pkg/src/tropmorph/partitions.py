"""Set partitions of ``{1..d}`` in a canonical tuple form, and the sheet
permutation groups used for symmetry reduction during enumeration."""
from __future__ import annotations

import itertools
from functools import lru_cache
from typing import Iterable, Sequence

from .errors import MalformedPartition

Partition = tuple  # tuple of sorted tuples, ordered by least element
Perm = tuple  # perm[i-1] = image of sheet i


def canon(blocks: Iterable[Iterable[int]]) -> Partition:
    bl = [tuple(sorted(b)) for b in blocks]
    bl = [b for b in bl if b]
    return tuple(sorted(bl, key=lambda b: b[0]))


def check_partition(blocks: Sequence[Sequence[int]], d: int) -> Partition:
    seen: list[int] = []
    for b in blocks:
        if not b:
            raise MalformedPartition("empty block")
        for i in b:
            if not isinstance(i, int) or isinstance(i, bool):
                raise MalformedPartition(f"sheet {i!r} is not an integer")
            seen.append(i)
    if sorted(seen) != list(range(1, d + 1)):
        raise MalformedPartition(f"blocks {blocks!r} do not partition 1..{d}")
    return canon(blocks)


def discrete(d: int) -> Partition:
    return tuple((i,) for i in range(1, d + 1))


def indiscrete(d: int) -> Partition:
    return (tuple(range(1, d + 1)),)


def block_of(p: Partition, i: int) -> tuple:
    for b in p:
        if i in b:
            return b
    raise MalformedPartition(f"sheet {i} not covered")


@lru_cache(maxsize=None)
def refines(p: Partition, q: Partition) -> bool:
    """True if every block of ``p`` lies inside a block of ``q``."""
    where = {}
    for k, b in enumerate(q):
        for i in b:
            where[i] = k
    return all(len({where[i] for i in b}) == 1 for b in p)


@lru_cache(maxsize=None)
def join(p: Partition, q: Partition) -> Partition:
    """Finest common coarsening."""
    parent: dict[int, int] = {}

    def find(x):
        parent.setdefault(x, x)
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for part in (p, q):
        for b in part:
            for i in b:
                find(i)
            for i in b[1:]:
                parent[find(i)] = find(b[0])
    groups: dict[int, list[int]] = {}
    for i in parent:
        groups.setdefault(find(i), []).append(i)
    return canon(groups.values())


@lru_cache(maxsize=None)
def all_partitions(d: int) -> tuple:
    """Every set partition of 1..d, in a fixed deterministic order."""
    out: list = []

    def rec(i: int, blocks: list[list[int]]):
        if i > d:
            out.append(canon(blocks))
            return
        for b in blocks:
            b.append(i)
            rec(i + 1, blocks)
            b.pop()
        blocks.append([i])
        rec(i + 1, blocks)
        blocks.pop()

    rec(1, [])
    return tuple(sorted(out, key=lambda p: (-len(p), p)))


@lru_cache(maxsize=None)
def refinements(p: Partition) -> tuple:
    return tuple(q for q in all_partitions(sum(len(b) for b in p)) if refines(q, p))


@lru_cache(maxsize=None)
def coarsenings(p: Partition) -> tuple:
    return tuple(q for q in all_partitions(sum(len(b) for b in p)) if refines(p, q))


def apply(perm: Perm, p: Partition) -> Partition:
    return canon([[perm[i - 1] for i in b] for b in p])


@lru_cache(maxsize=None)
def symmetric_group(d: int) -> tuple:
    return tuple(tuple(x) for x in itertools.permutations(range(1, d + 1)))


@lru_cache(maxsize=None)
def young_subgroup(p: Partition) -> tuple:
    """Permutations mapping every block of ``p`` to itself."""
    d = sum(len(b) for b in p)
    return tuple(
        g for g in symmetric_group(d) if all(set(g[i - 1] for i in b) == set(b) for b in p)
    )


@lru_cache(maxsize=None)
def stabilizer_in(group: tuple, p: Partition) -> tuple:
    return tuple(g for g in group if apply(g, p) == p)


@lru_cache(maxsize=None)
def orbit_representatives(options: tuple, group: tuple) -> tuple:
    """One representative (the first in ``options`` order) per group orbit."""
    rank = {p: k for k, p in enumerate(options)}
    reps = []
    seen: set = set()
    for p in options:
        if p in seen:
            continue
        orbit = {apply(g, p) for g in group}
        seen |= orbit
        reps.append(min((q for q in orbit if q in rank), key=rank.__getitem__))
    return tuple(reps)


def type_representatives(d: int) -> tuple:
    """One partition per integer partition of ``d`` (global tree-swap symmetry)."""
    return orbit_representatives(all_partitions(d), symmetric_group(d))


def to_json(p: Partition) -> list:
    return [list(b) for b in p]
