"""Pure-Python versions of the closure kernels (same contracts as _kernels)."""

import numpy as np


def _find(parent, x):
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        parent[x], x = root, parent[x]
    return root


def _union(parent, a, b):
    a = _find(parent, a)
    b = _find(parent, b)
    if a == b:
        return False
    if a < b:
        parent[b] = a
    else:
        parent[a] = b
    return True


def cg_closure(trans, m, seeds, start):
    trans = np.asarray(trans)
    parent = [int(v) for v in start]
    stack = []
    for a, b in np.asarray(seeds).tolist():
        if _union(parent, a, b):
            stack.append((a, b))
    stack.extend((k, parent[k]) for k in range(m) if parent[k] != k)
    while stack:
        a, b = stack.pop()
        xs = trans[:, a]
        ys = trans[:, b]
        hit = xs != ys
        for x, y in zip(xs[hit].tolist(), ys[hit].tolist()):
            if _union(parent, x, y):
                stack.append((x, y))
    return np.array([_find(parent, k) for k in range(m)], dtype=np.int32)


def join_labels(lab1, lab2):
    parent = [int(v) for v in lab1]
    for k, v in enumerate(np.asarray(lab2).tolist()):
        _union(parent, k, v)
    return np.array([_find(parent, k) for k in range(len(parent))], dtype=np.int32)
