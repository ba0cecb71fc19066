# cython: language_level=3, boundscheck=False, wraparound=False, initializedcheck=False
"""Compiled spanning counter over precomputed bond occupancy rows.

Same contract and same union rule (smaller root wins, path halving) as
``_spanning_py``, so the two backends return identical counts.
"""

import numpy as np

from libc.stdint cimport int32_t, uint8_t


cdef int32_t _find(int32_t[::1] parent, int32_t x) noexcept nogil:
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


cdef void _union(int32_t[::1] parent, int32_t a, int32_t b) noexcept nogil:
    cdef int32_t ra = _find(parent, a)
    cdef int32_t rb = _find(parent, b)
    if ra < rb:
        parent[rb] = ra
    elif rb < ra:
        parent[ra] = rb


def count_spans(int n_sites, int32_t[::1] bond_a, int32_t[::1] bond_b,
                uint8_t[:, ::1] occupied, int32_t[::1] left,
                int32_t[::1] right):
    """Trials whose occupied bonds connect the left and right columns."""
    cdef Py_ssize_t trials = occupied.shape[0]
    cdef Py_ssize_t n_bonds = occupied.shape[1]
    if bond_a.shape[0] != n_bonds or bond_b.shape[0] != n_bonds:
        raise ValueError("bond arrays disagree with occupancy width")
    cdef int32_t lnode = n_sites
    cdef int32_t rnode = n_sites + 1
    parent_arr = np.empty(n_sites + 2, dtype=np.int32)
    cdef int32_t[::1] parent = parent_arr
    cdef Py_ssize_t t, k
    cdef long hits = 0
    with nogil:
        for t in range(trials):
            for k in range(n_sites + 2):
                parent[k] = <int32_t> k
            for k in range(left.shape[0]):
                _union(parent, lnode, left[k])
            for k in range(right.shape[0]):
                _union(parent, rnode, right[k])
            for k in range(n_bonds):
                if occupied[t, k]:
                    _union(parent, bond_a[k], bond_b[k])
            if _find(parent, lnode) == _find(parent, rnode):
                hits += 1
    return int(hits)
