"""Finite algebras: operations, subuniverses, powers, quotients, congruences,
subdirect irreducibility and isomorphism.

Operations are stored either as a dense table or as a *support*: the list of
argument tuples whose value is not the algebra's zero, everything else being
zero. Flat algebras have tiny supports even when the dense table would be
hundreds of millions of entries.
"""

from __future__ import annotations

import itertools
import json

import numpy as np

from . import kernels

DEFAULT_GUARD = 64
DENSE_CAP = 12_000_000


class SizeGuardError(ValueError):
    pass


class NotACongruence(ValueError):
    def __init__(self, op, args, alt_args, values):
        self.op, self.args, self.alt_args, self.values = op, args, alt_args, values
        super().__init__(
            f"{op}: {args} -> {values[0]} but related {alt_args} -> {values[1]} (different blocks)"
        )


def _as_index_array(x):
    return np.asarray(x, dtype=np.int64)


class Operation:
    """A fundamental operation. Exactly one of `table`/`support` is the
    source of truth; `fn`, when given, is a vectorized evaluator over index
    arrays that must agree with it."""

    def __init__(self, name, arity, table=None, support=None, fn=None, rule=None, support_factory=None):
        self.name = name
        self.arity = arity
        self._table = None if table is None else np.asarray(table, dtype=np.int32)
        self._support = None
        if support is not None:
            args, out = support
            self._support = (np.asarray(args, dtype=np.int32).reshape(-1, arity), np.asarray(out, dtype=np.int32))
        self._support_factory = support_factory
        self.fn = fn
        self.rule = rule
        self.m = None
        self.zero = None
        self._dict = None
        self._keys = None

    def _bind(self, m, zero):
        self.m = m
        self.zero = zero
        if self._table is None and self._support is None and self._support_factory is None and self.fn is None:
            raise ValueError(f"operation {self.name} has no definition")
        if self.arity == 0 and self._table is None:
            raise ValueError("constants need a table")
        return self

    def __repr__(self):
        return f"Operation({self.name!r}, arity={self.arity})"

    @property
    def has_table(self):
        return self._table is not None

    def table(self, cap=DENSE_CAP):
        if self._table is None:
            n = self.m ** self.arity
            if n > cap:
                raise SizeGuardError(f"table for {self.name} would have {n} entries")
            if self.arity == 0:
                raise ValueError("constant without table")
            grids = np.indices((self.m,) * self.arity).reshape(self.arity, -1)
            self._table = self.evaluate(*grids).astype(np.int32).reshape((self.m,) * self.arity)
        return self._table

    def support(self):
        """(args, out) listing the tuples with nonzero value."""
        if self._support is None:
            if self.zero is None:
                raise ValueError(f"{self.name}: support needs a zero element")
            if self._support_factory is not None:
                args, out = self._support_factory()
                args = np.asarray(args, dtype=np.int32).reshape(-1, self.arity)
                out = np.asarray(out, dtype=np.int32)
                keep = out != self.zero
                args, out = args[keep], out[keep]
                if len(args):
                    _, first = np.unique(args, axis=0, return_index=True)
                    first.sort()
                    args, out = args[first], out[first]
                self._support = (args, out)
            else:
                tab = self.table()
                idx = np.nonzero(tab != self.zero)
                self._support = (np.stack(idx, axis=1).astype(np.int32).reshape(-1, self.arity), tab[idx].astype(np.int32))
        return self._support

    def _lookup_keys(self):
        if self._keys is None:
            args, out = self.support()
            keys = np.zeros(len(args), dtype=np.int64)
            for j in range(self.arity):
                keys = keys * self.m + args[:, j]
            order = np.argsort(keys, kind="stable")
            self._keys = (keys[order], out[order])
        return self._keys

    def evaluate(self, *cols):
        """Vectorized evaluation on equal-length index arrays."""
        cols = [_as_index_array(c) for c in cols]
        if self.arity == 0:
            return np.asarray(self._table)
        if self.fn is not None:
            return np.asarray(self.fn(*cols))
        if self._table is not None:
            return self._table[tuple(cols)]
        if self.m ** self.arity >= 2 ** 62:
            d = self.as_dict()
            flat = np.broadcast_arrays(*cols)
            return np.array([d.get(t, self.zero) for t in zip(*(c.ravel().tolist() for c in flat))]).reshape(flat[0].shape)
        keys_sorted, vals = self._lookup_keys()
        shape = np.broadcast_shapes(*(c.shape for c in cols))
        key = np.zeros(shape, dtype=np.int64)
        for c in cols:
            key = key * self.m + c
        pos = np.searchsorted(keys_sorted, key)
        pos_c = np.minimum(pos, max(len(keys_sorted) - 1, 0))
        if len(keys_sorted) == 0:
            return np.full(shape, self.zero, dtype=np.int64)
        hit = keys_sorted[pos_c] == key
        return np.where(hit, vals[pos_c], self.zero)

    def as_dict(self):
        if self._dict is None:
            args, out = self.support()
            self._dict = {tuple(a): o for a, o in zip(args.tolist(), out.tolist())}
        return self._dict

    def __call__(self, *args):
        if len(args) != self.arity:
            raise TypeError(f"{self.name} takes {self.arity} arguments")
        if self.arity == 0:
            return int(self._table)
        if self._table is not None:
            return int(self._table[args])
        if self.fn is not None:
            return int(self.fn(*(np.int64(a) for a in args)))
        return self.as_dict().get(tuple(args), self.zero)


class Partition:
    """Equivalence relation on range(m); labels[i] is the least element of
    i's block."""

    __slots__ = ("labels", "_hash")

    def __init__(self, labels, canonical=False):
        lab = np.asarray(labels, dtype=np.int32)
        if not canonical:
            lab = _canonical(lab)
        lab.setflags(write=False)
        self.labels = lab
        self._hash = None

    @classmethod
    def identity(cls, m):
        return cls(np.arange(m, dtype=np.int32), canonical=True)

    @classmethod
    def full(cls, m):
        return cls(np.zeros(m, dtype=np.int32), canonical=True)

    @classmethod
    def from_blocks(cls, m, blocks):
        lab = np.arange(m, dtype=np.int32)
        for b in blocks:
            b = list(b)
            if b:
                lab[b] = min(b)
        return cls(kernels.join_labels(np.arange(m, dtype=np.int32), lab), canonical=True)

    @property
    def size(self):
        return len(self.labels)

    def find(self, x):
        return int(self.labels[x])

    def related(self, a, b):
        return self.labels[a] == self.labels[b]

    def blocks(self):
        out = {}
        for i, l in enumerate(self.labels.tolist()):
            out.setdefault(l, []).append(i)
        return [out[k] for k in sorted(out)]

    def nontrivial_blocks(self):
        return [b for b in self.blocks() if len(b) > 1]

    def block_count(self):
        return int(np.count_nonzero(self.labels == np.arange(len(self.labels))))

    def is_identity(self):
        return bool(np.all(self.labels == np.arange(len(self.labels))))

    def is_full(self):
        return bool(np.all(self.labels == 0))

    def __le__(self, other):
        return bool(np.all(other.labels[self.labels] == other.labels))

    def __lt__(self, other):
        return self <= other and self != other

    def __eq__(self, other):
        return isinstance(other, Partition) and np.array_equal(self.labels, other.labels)

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(self.labels.tobytes())
        return self._hash

    def join(self, other):
        return Partition(kernels.join_labels(self.labels, other.labels), canonical=True)

    def meet(self, other):
        m = len(self.labels)
        return Partition(self.labels.astype(np.int64) * m + other.labels)

    def pairs(self):
        for b in self.blocks():
            for x in b:
                for y in b:
                    yield x, y

    def __repr__(self):
        return f"Partition({self.nontrivial_blocks()})"


def _canonical(lab):
    lab = np.asarray(lab)
    m = len(lab)
    if m == 0:
        return lab.astype(np.int32)
    _, inv = np.unique(lab, return_inverse=True)
    inv = inv.reshape(-1)
    mins = np.full(inv.max() + 1, m, dtype=np.int64)
    np.minimum.at(mins, inv, np.arange(m))
    return mins[inv].astype(np.int32)


class FiniteAlgebra:
    def __init__(self, labels, ops, zero=None, name=""):
        self.labels = [str(l) for l in labels]
        self.size = len(self.labels)
        self.index = {l: i for i, l in enumerate(self.labels)}
        if len(self.index) != self.size:
            raise ValueError("duplicate labels")
        if zero is None:
            zero = self.index.get("0")
        self.zero = zero
        self.ops = [op._bind(self.size, zero) for op in ops]
        self.op_by_name = {op.name: op for op in self.ops}
        if len(self.op_by_name) != len(self.ops):
            raise ValueError("duplicate operation names")
        self.name = name
        self._translations = None
        self._principal = {}
        self._all_principal = None

    def __repr__(self):
        return f"<FiniteAlgebra {self.name or ''} |A|={self.size} ops={len(self.ops)}>"

    def __getitem__(self, name):
        return self.op_by_name[name]

    def __len__(self):
        return self.size

    def el(self, label):
        if isinstance(label, (int, np.integer)):
            return int(label)
        try:
            return self.index[label]
        except KeyError:
            raise KeyError(f"unknown element label {label!r}") from None

    def signature(self):
        return [(op.name, op.arity) for op in self.ops]

    def apply(self, name, *args):
        op = self.op_by_name[name]
        return op(*(self.el(a) for a in args))

    # ---- translations -------------------------------------------------

    def translations(self):
        """Distinct nonconstant unary fundamental translations as rows of an
        (T, m) array, plus for each row (op name, position, context)."""
        if self._translations is None:
            self._translations = _build_translations(self)
        return self._translations

    # ---- congruences ----------------------------------------------------

    def cg(self, a, b):
        return principal_congruence(self, a, b)


_ROW_HASH = np.random.default_rng(12345).integers(1, 2 ** 63, 4096, dtype=np.uint64) | np.uint64(1)


def unique_rows(A):
    """Like np.unique(A, axis=0, return_index=True, return_inverse=True), but
    hashing rows first (row order of the result is by hash, not lexical)."""
    A = np.ascontiguousarray(A)
    n, w = A.shape
    if n == 0:
        return A, np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    if w > len(_ROW_HASH):
        u, first, inv = np.unique(A, axis=0, return_index=True, return_inverse=True)
        return u, first, inv.reshape(-1)
    with np.errstate(over="ignore"):
        h = (A.astype(np.uint64) * _ROW_HASH[:w]).sum(axis=1, dtype=np.uint64)
        h ^= h >> np.uint64(29)
    _, first, inv = np.unique(h, return_index=True, return_inverse=True)
    inv = inv.reshape(-1)
    if not np.array_equal(A[first][inv], A):  # hash collision: do it exactly
        u, first, inv = np.unique(A, axis=0, return_index=True, return_inverse=True)
        return u, first, inv.reshape(-1)
    order = np.argsort(first, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    return A[first[order]], first[order], rank[inv]


def _build_translations(alg):
    m = alg.size
    rows = []
    prov = []
    for op in alg.ops:
        k = op.arity
        if k == 0:
            continue
        use_support = alg.zero is not None and (not op.has_table or m ** k > 2_000_000)
        if use_support:
            args, out = op.support()
            if len(args) == 0:
                continue
            for p in range(k):
                ctx = np.delete(args, p, axis=1)
                if k == 1:
                    inv = np.zeros(len(args), dtype=np.int64)
                    uniq = np.zeros((1, 0), dtype=np.int32)
                else:
                    uniq, _, inv = unique_rows(ctx)
                T = np.full((len(uniq), m), alg.zero, dtype=np.int32)
                T[inv, args[:, p]] = out
                rows.append(T)
                prov.extend((op.name, p, tuple(c)) for c in uniq.tolist())
        else:
            tab = op.table()
            for p in range(k):
                T = np.moveaxis(tab, p, -1).reshape(-1, m)
                ctxs = list(itertools.product(range(m), repeat=k - 1))
                uniq, first, _ = unique_rows(T)
                rows.append(uniq.astype(np.int32))
                prov.extend((op.name, p, ctxs[i]) for i in first.tolist())
    if not rows:
        return np.zeros((0, m), dtype=np.int32), []
    T = np.concatenate(rows, axis=0)
    keep = ~np.all(T == T[:, :1], axis=1) if m else np.zeros(len(T), bool)
    T = T[keep]
    prov = [p for p, k in zip(prov, keep.tolist()) if k]
    T, first, _ = unique_rows(T)
    prov = [prov[i] for i in first.tolist()]
    return np.ascontiguousarray(T, dtype=np.int32), prov


def principal_congruence(alg, a, b):
    a, b = alg.el(a), alg.el(b)
    if a > b:
        a, b = b, a
    key = (a, b)
    hit = alg._principal.get(key)
    if hit is not None:
        return hit
    if a == b:
        part = Partition.identity(alg.size)
    else:
        T, _ = alg.translations()
        lab = kernels.cg_closure(T, alg.size, np.array([[a, b]], dtype=np.int32), np.arange(alg.size, dtype=np.int32))
        part = Partition(lab, canonical=True)
    alg._principal[key] = part
    return part


def congruence_generated(alg, pairs, start=None):
    """Least congruence containing `pairs` (and `start`, if given)."""
    base = np.arange(alg.size, dtype=np.int32) if start is None else np.array(start.labels, dtype=np.int32)
    seeds = np.array([(alg.el(x), alg.el(y)) for x, y in pairs], dtype=np.int32).reshape(-1, 2)
    T, _ = alg.translations()
    return Partition(kernels.cg_closure(T, alg.size, seeds, base), canonical=True)


def all_principal(alg, guard=DEFAULT_GUARD):
    """Map (a, b), a < b, to Cg(a, b)."""
    _guard(alg, guard)
    if alg._all_principal is None:
        alg._all_principal = {
            (a, b): principal_congruence(alg, a, b) for a in range(alg.size) for b in range(a + 1, alg.size)
        }
    return alg._all_principal


def _guard(alg, guard):
    if guard is not None and alg.size > guard:
        raise SizeGuardError(f"algebra has {alg.size} elements, guard is {guard}")


def congruence_lattice(alg, guard=DEFAULT_GUARD, max_count=200_000):
    """All congruences, as the join closure of the principal ones."""
    principals = sorted(set(all_principal(alg, guard).values()), key=lambda p: (p.block_count() * -1, p.labels.tobytes()))
    principals = [p for p in principals if not p.is_identity()]
    ident = Partition.identity(alg.size)
    seen = {ident}
    frontier = [ident]
    while frontier:
        nxt = []
        for theta in frontier:
            for p in principals:
                if p <= theta:
                    continue
                j = theta.join(p)
                if j not in seen:
                    seen.add(j)
                    nxt.append(j)
                    if len(seen) > max_count:
                        raise SizeGuardError(f"more than {max_count} congruences")
        frontier = nxt
    return sorted(seen, key=lambda p: (-p.block_count(), p.labels.tolist()))


def monolith(alg, guard=DEFAULT_GUARD):
    """Least nonidentity congruence, or None when the algebra is not SI."""
    if alg.size < 2:
        return None
    mu = None
    for p in set(all_principal(alg, guard).values()):
        mu = p if mu is None else mu.meet(p)
        if mu.is_identity():
            return None
    return mu


def is_si(alg, guard=DEFAULT_GUARD):
    return monolith(alg, guard) is not None


def is_fsi(alg, guard=DEFAULT_GUARD):
    ps = [p for p in set(all_principal(alg, guard).values()) if not p.is_identity()]
    minimal = [p for p in ps if not any(q < p for q in ps)]
    for p, q in itertools.combinations(minimal, 2):
        if p.meet(q).is_identity():
            return False
    return True


def si_congruences(alg, guard=DEFAULT_GUARD, lattice=None):
    """Congruences whose quotient is subdirectly irreducible (the completely
    meet-irreducible ones)."""
    lattice = congruence_lattice(alg, guard) if lattice is None else lattice
    principals = [p for p in set(all_principal(alg, guard).values()) if not p.is_identity()]
    out = []
    for theta in lattice:
        if theta.is_full():
            continue
        mu = None
        for p in principals:
            if p <= theta:
                continue
            j = theta.join(p)
            mu = j if mu is None else mu.meet(j)
            if mu == theta:
                break
        if mu is not None and mu != theta:
            out.append(theta)
    return out


# ---- subuniverses, subalgebras, powers, products, quotients -----------


def _nullary_values(alg):
    return [int(op.table()) for op in alg.ops if op.arity == 0]


def generate_subuniverse(alg, gens):
    inset = np.zeros(alg.size, dtype=bool)
    for v in _nullary_values(alg):
        inset[v] = True
    for g in gens:
        inset[alg.el(g)] = True
    ops = [op for op in alg.ops if op.arity > 0]
    while True:
        count = int(inset.sum())
        for op in ops:
            if alg.zero is not None:
                args, out = op.support()
                if count and not inset[alg.zero]:
                    inside = int(inset[args].all(axis=1).sum()) if len(args) else 0
                    if inside < count ** op.arity:
                        inset[alg.zero] = True
                if len(args):
                    mask = inset[args].all(axis=1)
                    inset[out[mask]] = True
            else:
                cur = np.nonzero(inset)[0]
                if len(cur):
                    vals = op.table()[np.ix_(*([cur] * op.arity))]
                    inset[np.unique(vals)] = True
        if int(inset.sum()) == count:
            break
    return np.nonzero(inset)[0].tolist()


def subalgebra(alg, elements, name=""):
    """Subalgebra on a subuniverse; `embedding` maps new indices to old."""
    elems = sorted({alg.el(e) for e in elements})
    emb = np.array(elems, dtype=np.int64)
    inv = np.full(alg.size, -1, dtype=np.int64)
    inv[emb] = np.arange(len(elems))
    zero = None if alg.zero is None or inv[alg.zero] < 0 else int(inv[alg.zero])
    ops = []
    for op in alg.ops:
        if op.arity == 0:
            v = inv[op.table()]
            if v < 0:
                raise ValueError("not a subuniverse: constant missing")
            ops.append(Operation(op.name, 0, table=np.array(v)))
        elif zero is not None and (not op.has_table or alg.size ** op.arity > 2_000_000):
            args, out = op.support()
            mask = (inv[args] >= 0).all(axis=1) if len(args) else np.zeros(0, bool)
            if len(args) and (inv[out[mask]] < 0).any():
                raise ValueError(f"not a subuniverse: {op.name} escapes")
            ops.append(Operation(op.name, op.arity, support=(inv[args[mask]], inv[out[mask]]), rule=op.rule))
        else:
            vals = op.table()[np.ix_(*([emb] * op.arity))]
            new = inv[vals]
            if (new < 0).any():
                raise ValueError(f"not a subuniverse: {op.name} escapes")
            ops.append(Operation(op.name, op.arity, table=new))
    sub = FiniteAlgebra([alg.labels[e] for e in elems], ops, zero=zero, name=name or f"sub({alg.name})")
    sub.embedding = emb
    sub.parent = alg
    return sub


def generated_subalgebra(alg, gens, name=""):
    return subalgebra(alg, generate_subuniverse(alg, gens), name=name)


def vector_label(alg, vec):
    return "<" + ",".join(alg.labels[v] for v in vec) + ">"


def power_subalgebra(alg, window, gens, cap=20000, name="", candidate_cap=5_000_000):
    """Subalgebra of alg^len(window) generated coordinatewise by `gens`
    (sequences of element labels or indices, one entry per window slot)."""
    if alg.zero is None:
        raise ValueError("power generation needs an algebra with a zero")
    w = len(window)
    vecs = [tuple([alg.zero] * w)]
    for v in _nullary_values(alg):
        vecs.append(tuple([v] * w))
    for g in gens:
        if len(g) != w:
            raise ValueError("generator length differs from window")
        vecs.append(tuple(alg.el(x) for x in g))
    pos = {}
    elems = []
    for v in vecs:
        if v not in pos:
            pos[v] = len(elems)
            elems.append(v)
    ops = [op for op in alg.ops if op.arity > 0]
    supports = {op.name: op.support() for op in ops}
    results = {}
    while True:
        E = np.array(elems, dtype=np.int64)
        before = len(elems)
        for op in ops:
            cand = _power_candidates(alg, E, op, supports[op.name], candidate_cap)
            if len(cand) == 0:
                results[op.name] = (cand, np.zeros((0, w), dtype=np.int64))
                continue
            outs = np.stack([op.evaluate(*(E[cand[:, j], c] for j in range(op.arity))) for c in range(w)], axis=1)
            results[op.name] = (cand, outs)
            for row in map(tuple, outs.tolist()):
                if row not in pos:
                    pos[row] = len(elems)
                    elems.append(row)
                    if len(elems) > cap:
                        raise SizeGuardError(f"power subalgebra exceeds {cap} elements")
        if len(elems) == before:
            break
    order = sorted(range(len(elems)), key=lambda i: elems[i])
    rank = np.empty(len(elems), dtype=np.int64)
    rank[order] = np.arange(len(elems))
    new_ops = []
    for op in alg.ops:
        if op.arity == 0:
            new_ops.append(Operation(op.name, 0, table=np.array(rank[pos[tuple([int(op.table())] * w)]])))
            continue
        cand, outs = results[op.name]
        out_idx = np.array([pos[tuple(r)] for r in outs.tolist()], dtype=np.int64)
        new_ops.append(Operation(op.name, op.arity, support=(rank[cand], rank[out_idx])))
    sorted_elems = [elems[i] for i in order]
    labels = [vector_label(alg, v) for v in sorted_elems]
    P = FiniteAlgebra(labels, new_ops, zero=int(rank[0]), name=name or f"{alg.name}^{w}")
    P.vectors = np.array(sorted_elems, dtype=np.int64).reshape(len(sorted_elems), w)
    P.base = alg
    P.window = list(window)
    P.vector_index = {v: i for i, v in enumerate(sorted_elems)}
    return P


def _power_candidates(alg, E, op, support, cap):
    """Tuples of element ids whose image is nonzero in some coordinate."""
    args, _ = support
    n, w = E.shape
    k = op.arity
    if len(args) == 0 or n == 0:
        return np.zeros((0, k), dtype=np.int64)
    found = []
    total = 0
    for c in range(w):
        col = E[:, c]
        present = np.zeros(alg.size, dtype=bool)
        present[col] = True
        rows = args[present[args].all(axis=1)]
        if len(rows) == 0:
            continue
        order = np.argsort(col, kind="stable")
        sorted_vals = col[order]
        starts = np.searchsorted(sorted_vals, np.arange(alg.size), side="left")
        ends = np.searchsorted(sorted_vals, np.arange(alg.size), side="right")
        for r in rows.tolist():
            lists = [order[starts[v]:ends[v]] for v in r]
            size = 1
            for l in lists:
                size *= len(l)
            total += size
            if total > cap:
                raise SizeGuardError("too many candidate tuples in power generation")
            if size == 1:
                found.append(np.array([[l[0] for l in lists]], dtype=np.int64))
            else:
                grid = np.meshgrid(*lists, indexing="ij")
                found.append(np.stack([g.ravel() for g in grid], axis=1))
    if not found:
        return np.zeros((0, k), dtype=np.int64)
    return np.unique(np.concatenate(found, axis=0), axis=0)


def product_algebra(a1, a2, name=""):
    """Full direct product (dense tables; meant for small factors)."""
    if a1.signature() != a2.signature():
        raise ValueError("signature mismatch")
    m1, m2 = a1.size, a2.size
    m = m1 * m2
    ops = []
    for o1 in a1.ops:
        o2 = a2[o1.name]
        k = o1.arity
        if k == 0:
            ops.append(Operation(o1.name, 0, table=np.array(int(o1.table()) * m2 + int(o2.table()))))
            continue
        if m ** k > DENSE_CAP:
            raise SizeGuardError("product too large for dense tables")
        grids = np.indices((m,) * k).reshape(k, -1)
        left = o1.evaluate(*(g // m2 for g in grids))
        right = o2.evaluate(*(g % m2 for g in grids))
        ops.append(Operation(o1.name, k, table=(left * m2 + right).reshape((m,) * k)))
    labels = [f"({x},{y})" for x in a1.labels for y in a2.labels]
    zero = None if a1.zero is None or a2.zero is None else a1.zero * m2 + a2.zero
    P = FiniteAlgebra(labels, ops, zero=zero, name=name or f"{a1.name}x{a2.name}")
    P.factors = (a1, a2)
    return P


def check_congruence(alg, theta):
    """Raise NotACongruence when some operation does not respect theta."""
    T, prov = alg.translations()
    lab = theta.labels
    if len(T) == 0:
        return
    img = lab[T]
    bad = img != img[:, lab]
    if bad.any():
        t, x = map(int, np.argwhere(bad)[0])
        name, p, ctx = prov[t]
        y = int(lab[x])
        args = list(ctx)
        args.insert(p, x)
        alt = list(ctx)
        alt.insert(p, y)
        raise NotACongruence(name, tuple(args), tuple(alt), (int(T[t, x]), int(T[t, y])))


def is_congruence(alg, theta):
    try:
        check_congruence(alg, theta)
    except NotACongruence:
        return False
    return True


def quotient(alg, theta, name="", check=True):
    """Returns (quotient algebra, projection array)."""
    if check:
        check_congruence(alg, theta)
    lab = theta.labels
    reps = np.unique(lab)
    proj = np.searchsorted(reps, lab)
    ops = []
    zero = None if alg.zero is None else int(proj[alg.zero])
    for op in alg.ops:
        k = op.arity
        if k == 0:
            ops.append(Operation(op.name, 0, table=np.array(proj[int(op.table())])))
        elif zero is not None and (not op.has_table or alg.size ** k > 2_000_000):
            args, out = op.support()
            qa, qo = proj[args], proj[out]
            keep = qo != zero
            qa, qo = qa[keep], qo[keep]
            if len(qa):
                _, first = np.unique(qa, axis=0, return_index=True)
                qa, qo = qa[first], qo[first]
            ops.append(Operation(op.name, k, support=(qa, qo)))
        else:
            vals = op.table()[np.ix_(*([reps] * k))]
            ops.append(Operation(op.name, k, table=proj[vals]))
    labels = []
    for r in reps.tolist():
        members = np.nonzero(lab == r)[0].tolist()
        labels.append(alg.labels[r] if len(members) == 1 else "{" + ",".join(alg.labels[x] for x in members) + "}")
    Q = FiniteAlgebra(labels, ops, zero=zero, name=name or f"{alg.name}/theta")
    Q.projection = proj
    Q.parent = alg
    return Q, proj


# ---- isomorphism ------------------------------------------------------


def _entries(alg, op):
    if op.arity == 0:
        return None
    if op.has_table or alg.zero is None:
        return op.table()
    return op.support()


def _fingerprints(alg):
    fp = [[] for _ in range(alg.size)]
    m = alg.size
    for op in alg.ops:
        if op.arity == 0:
            v = int(op.table())
            for x in range(m):
                fp[x].append(int(x == v))
            continue
        diag = op.evaluate(*([np.arange(m)] * op.arity))
        outcount = np.zeros(m, dtype=np.int64)
        poscount = np.zeros((op.arity, m), dtype=np.int64)
        if alg.zero is not None:
            args, out = op.support()
            np.add.at(outcount, out, 1)
            for p in range(op.arity):
                np.add.at(poscount[p], args[:, p], 1)
        else:
            tab = op.table()
            outcount = np.bincount(tab.ravel(), minlength=m)
        for x in range(m):
            fp[x].append((int(diag[x] == x), int(outcount[x]), tuple(poscount[:, x].tolist())))
    fixed = [alg.zero == x for x in range(m)]
    return [(fixed[x], tuple(fp[x])) for x in range(m)]


def is_homomorphism(a1, a2, f):
    f = np.asarray(f, dtype=np.int64)
    for op in a1.ops:
        o2 = a2[op.name]
        if op.arity == 0:
            if f[int(op.table())] != int(o2.table()):
                return False
            continue
        if op.has_table or a1.zero is None:
            tab = op.table()
            grids = np.indices(tab.shape).reshape(op.arity, -1)
            lhs = f[tab.reshape(-1)]
            rhs = o2.evaluate(*(f[g] for g in grids))
            if not np.array_equal(lhs, rhs):
                return False
        else:
            # zero goes to zero, so checking the supports both ways suffices
            if f[a1.zero] != a2.zero:
                return False
            args, out = op.support()
            if len(args) and not np.array_equal(o2.evaluate(*(f[args[:, j]] for j in range(op.arity))), f[out]):
                return False
            args2, out2 = o2.support()
            if len(args2) != len(args):
                return False
    return True


def is_isomorphic(a1, a2, guard=DEFAULT_GUARD):
    """A bijection (list, index-to-index) respecting all operations, or None."""
    if sorted(a1.signature()) != sorted(a2.signature()):
        raise ValueError("signature mismatch")
    if a1.size != a2.size:
        return None
    _guard(a1, guard)
    f1, f2 = _fingerprints(a1), _fingerprints(a2)
    if sorted(f1) != sorted(f2):
        return None
    m = a1.size
    cands = [[y for y in range(m) if f2[y] == f1[x]] for x in range(m)]
    order = sorted(range(m), key=lambda x: len(cands[x]))
    small = [op for op in a1.ops if 1 <= op.arity <= 2]
    mapping = [-1] * m
    used = [False] * m

    def consistent(x):
        for op in small:
            o2 = a2[op.name]
            if op.arity == 1:
                v = op(x)
                if mapping[v] >= 0 and o2(mapping[x]) != mapping[v]:
                    return False
            else:
                for y in range(m):
                    if mapping[y] < 0:
                        continue
                    for a, b in ((x, y), (y, x)):
                        v = op(a, b)
                        if mapping[v] >= 0 and o2(mapping[a], mapping[b]) != mapping[v]:
                            return False
        return True

    def search(k):
        if k == m:
            return is_homomorphism(a1, a2, mapping)
        x = order[k]
        for y in cands[x]:
            if used[y]:
                continue
            mapping[x] = y
            used[y] = True
            if consistent(x) and search(k + 1):
                return True
            mapping[x] = -1
            used[y] = False
        return False

    return list(mapping) if search(0) else None


# ---- JSON -------------------------------------------------------------

BUILTINS = {}


def register_builtin(kind, factory):
    """factory(doc) -> FiniteAlgebra, used for rule-backed operations."""
    BUILTINS[kind] = factory


def to_json(alg, table_cap=1_000_000):
    doc = {"labels": list(alg.labels), "ops": []}
    builtin = getattr(alg, "builtin", None)
    if builtin is not None:
        doc["builtin"] = builtin
    for op in alg.ops:
        if builtin is not None and op.rule:
            doc["ops"].append({"name": op.name, "arity": op.arity, "rule": op.rule})
        elif op.arity == 0 or alg.size ** op.arity <= table_cap or alg.zero is None:
            doc["ops"].append({"name": op.name, "arity": op.arity, "table": op.table().reshape(-1).tolist()})
        else:
            args, out = op.support()
            doc["ops"].append({"name": op.name, "arity": op.arity,
                               "support": [a + [o] for a, o in zip(args.tolist(), out.tolist())]})
    return doc


def from_json(doc):
    if isinstance(doc, str):
        doc = json.loads(doc)
    labels = doc["labels"]
    m = len(labels)
    if "builtin" in doc:
        kind = doc["builtin"].get("kind")
        if kind not in BUILTINS:
            raise ValueError(f"unknown builtin algebra kind {kind!r}")
        alg = BUILTINS[kind](doc["builtin"])
        if alg.labels != labels:
            raise ValueError("builtin algebra labels do not match document")
        names = [o["name"] for o in doc["ops"]]
        if names != [op.name for op in alg.ops]:
            raise ValueError("builtin algebra signature does not match document")
        return alg
    ops = []
    for o in doc["ops"]:
        k = int(o["arity"])
        if "table" in o:
            tab = np.array(o["table"], dtype=np.int32)
            if tab.size != m ** k:
                raise ValueError(f"{o['name']}: table has {tab.size} entries, expected {m ** k}")
            if tab.size and (tab.min() < 0 or tab.max() >= m):
                raise ValueError(f"{o['name']}: value out of range")
            ops.append(Operation(o["name"], k, table=tab.reshape((m,) * k) if k else tab.reshape(())))
        elif "support" in o:
            rows = np.array(o["support"], dtype=np.int32).reshape(-1, k + 1)
            ops.append(Operation(o["name"], k, support=(rows[:, :k], rows[:, k])))
        elif "rule" in o:
            raise ValueError(f"{o['name']}: rule-backed operation outside a builtin algebra")
        else:
            raise ValueError(f"{o['name']}: no table")
    return FiniteAlgebra(labels, ops, name=doc.get("name", ""))
