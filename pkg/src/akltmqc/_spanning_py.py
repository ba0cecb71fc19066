"""Pure-python spanning counter; same contract as the compiled kernel.

Kept import-compatible with the extension so either can back the router's
percolation estimates. Union by smaller root with path halving, which the
compiled version mirrors exactly, so both give identical counts.
"""

from __future__ import annotations

import numpy as np


def _find(parent: list[int], x: int) -> int:
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


def _union(parent: list[int], a: int, b: int) -> None:
    ra, rb = _find(parent, a), _find(parent, b)
    if ra < rb:
        parent[rb] = ra
    elif rb < ra:
        parent[ra] = rb


def count_spans(n_sites, bond_a, bond_b, occupied, left, right) -> int:
    """Trials whose occupied bonds connect the left and right columns.

    ``occupied`` is a (trials, bonds) uint8 matrix; ``bond_a``/``bond_b``
    give each bond's endpoint site indices; ``left``/``right`` list the
    boundary columns' site indices. Two virtual nodes stand in for the
    whole left and right edges.
    """
    occupied = np.asarray(occupied, dtype=np.uint8)
    ba = [int(x) for x in bond_a]
    bb = [int(x) for x in bond_b]
    if len(ba) != occupied.shape[1] or len(bb) != occupied.shape[1]:
        raise ValueError("bond arrays disagree with occupancy width")
    lnode, rnode = n_sites, n_sites + 1
    base = list(range(n_sites + 2))
    for s in left:
        _union(base, lnode, int(s))
    for s in right:
        _union(base, rnode, int(s))
    hits = 0
    for row in occupied:
        parent = base.copy()
        for k in np.flatnonzero(row):
            _union(parent, ba[k], bb[k])
        if _find(parent, lnode) == _find(parent, rnode):
            hits += 1
    return hits
