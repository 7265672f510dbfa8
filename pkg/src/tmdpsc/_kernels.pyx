# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Union-find closure kernels. Roots are always the least element of a block."""

import numpy as np


cdef inline int _find(int[::1] parent, int x) noexcept nogil:
    cdef int root = x
    cdef int nxt
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


cdef inline bint _union(int[::1] parent, int a, int b) noexcept nogil:
    a = _find(parent, a)
    b = _find(parent, b)
    if a == b:
        return False
    if a < b:
        parent[b] = a
    else:
        parent[a] = b
    return True


def cg_closure(const int[:, ::1] trans, int m, const int[:, ::1] seeds, const int[::1] start):
    """Least equivalence containing `seeds` (and the relation encoded by
    `start` as a label array) that is closed under every row of `trans`."""
    parent_arr = np.array(start, dtype=np.int32)
    cdef int[::1] parent = parent_arr
    stack_arr = np.empty((2 * m + 2, 2), dtype=np.int32)
    cdef int[:, ::1] stack = stack_arr
    cdef Py_ssize_t top = 0
    cdef Py_ssize_t k, t
    cdef Py_ssize_t ntrans = trans.shape[0]
    cdef int a, b, x, y
    with nogil:
        for k in range(seeds.shape[0]):
            a = seeds[k, 0]
            b = seeds[k, 1]
            if _union(parent, a, b):
                stack[top, 0] = a
                stack[top, 1] = b
                top += 1
        # pairs already related in `start` need translating as well
        for k in range(m):
            if start[k] != k:
                stack[top, 0] = k
                stack[top, 1] = start[k]
                top += 1
        while top > 0:
            top -= 1
            a = stack[top, 0]
            b = stack[top, 1]
            for t in range(ntrans):
                x = trans[t, a]
                y = trans[t, b]
                if x != y and _union(parent, x, y):
                    stack[top, 0] = x
                    stack[top, 1] = y
                    top += 1
        for k in range(m):
            parent[k] = _find(parent, k)
    return parent_arr


def join_labels(const int[::1] lab1, const int[::1] lab2):
    cdef Py_ssize_t m = lab1.shape[0]
    parent_arr = np.array(lab1, dtype=np.int32)
    cdef int[::1] parent = parent_arr
    cdef Py_ssize_t k
    with nogil:
        for k in range(m):
            _union(parent, <int>k, lab2[k])
        for k in range(m):
            parent[k] = _find(parent, <int>k)
    return parent_arr
