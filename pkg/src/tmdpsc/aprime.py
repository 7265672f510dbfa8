"""The algebra A'(T) attached to a Turing machine T.

Universe: 0, the tape letters 1, 2, H, the symbols C, D and their bars, and
for every state i and bits r, s the configuration symbols C(i,r,s),
D(i,r,s), M(i,r) with their bars. Every operation is a flat case table; the
evaluators below are vectorized over numpy index arrays.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .algebra_core import FiniteAlgebra, Operation, register_builtin
from .tm_core import TuringMachine, parse_tm

BASE_LABELS = ["0", "1", "2", "H", "C", "D", "~C", "~D"]
BASE_OPS = ["0", "meet", "prod", "J", "Jp", "K", "S0", "S1", "S2", "T", "I"]


@dataclass(frozen=True)
class Element:
    """kind is one of 0 1 2 H C D M; indexed kinds carry (i, r, s)."""

    kind: str
    bar: bool = False
    i: int | None = None
    r: int | None = None
    s: int | None = None

    @property
    def label(self):
        pre = "~" if self.bar else ""
        if self.i is None:
            return pre + self.kind
        if self.kind == "M":
            return f"{pre}M({self.i},{self.r})"
        return f"{pre}{self.kind}({self.i},{self.r},{self.s})"

    @property
    def indexed(self):
        return self.i is not None


def universe(state_count):
    els = [Element("0"), Element("1"), Element("2"), Element("H"),
           Element("C"), Element("D"), Element("C", True), Element("D", True)]
    for i in range(state_count):
        block = []
        for r in (0, 1):
            for s in (0, 1):
                block.append(Element("C", False, i, r, s))
        for r in (0, 1):
            for s in (0, 1):
                block.append(Element("D", False, i, r, s))
        for r in (0, 1):
            block.append(Element("M", False, i, r))
        els += block + [Element(e.kind, True, e.i, e.r, e.s) for e in block]
    return els


def parse_label(label):
    """Element from its label, e.g. '~C(1,0,1)'."""
    label = label.strip()
    bar = label.startswith("~")
    body = label[1:] if bar else label
    if "(" not in body:
        return Element(body, bar)
    kind, rest = body.split("(", 1)
    nums = [int(x) for x in rest.rstrip(")").split(",")]
    if kind == "M":
        return Element("M", bar, nums[0], nums[1])
    return Element(kind, bar, *nums)


def precedes(x, y):
    """The relation x ≺ y on tape letters."""
    return (x, y) in {("2", "2"), ("2", "H"), ("1", "1")}


class APrime(FiniteAlgebra):
    """A'(T) with helpers for naming elements."""

    def el(self, label):
        if isinstance(label, Element):
            label = label.label
        return super().el(label)

    def C(self, i, r, s, bar=False):
        return self.index[Element("C", bar, i, r, s).label]

    def D(self, i, r, s, bar=False):
        return self.index[Element("D", bar, i, r, s).label]

    def M(self, i, r, bar=False):
        return self.index[Element("M", bar, i, r).label]

    def bar(self, x):
        b = int(self.BAR[self.el(x)])
        return None if b < 0 else b


def build_aprime(tm: TuringMachine, omit_K: bool = False) -> APrime:
    els = universe(tm.state_count)
    labels = [e.label for e in els]
    m = len(els)
    idx = {e: k for k, e in enumerate(els)}
    lab = {l: k for k, l in enumerate(labels)}

    BAR = np.full(m, -1, dtype=np.int64)
    for e, k in idx.items():
        if e.kind in ("C", "D", "M"):
            BAR[k] = idx[Element(e.kind, not e.bar, e.i, e.r, e.s)]
    BARZ = np.where(BAR < 0, 0, BAR)  # a missing bar is read as 0
    INVW = BAR >= 0
    ISV0 = np.array([e.indexed and e.i == 0 for e in els])
    IS12 = np.zeros(m, dtype=bool)
    IS12[[lab["1"], lab["2"]]] = True
    LETTERS = [lab["1"], lab["2"], lab["H"]]

    PROD = np.zeros((m, m), dtype=np.int64)
    for a, b, c in [("2", "D", "D"), ("H", "C", "D"), ("1", "C", "C"),
                    ("2", "~D", "~D"), ("H", "~C", "~D"), ("1", "~C", "~C")]:
        PROD[lab[a], lab[b]] = lab[c]
    ITAB = np.zeros(m, dtype=np.int64)
    if tm.state_count > 1:
        ITAB[lab["1"]] = lab["C(1,0,0)"]
        ITAB[lab["H"]] = lab["M(1,0)"]
        ITAB[lab["2"]] = lab["D(1,0,0)"]
    PREC = np.zeros((m, m), dtype=bool)
    for a, b in [("2", "2"), ("2", "H"), ("1", "1")]:
        PREC[lab[a], lab[b]] = True

    def meet(x, y):
        return np.where(x == y, x, 0)

    def J(x, y, z):
        opp = INVW[x] & (x == BAR[y])
        return np.where(x == y, x, np.where(opp, meet(x, z), 0))

    def Jp(x, y, z):
        opp = INVW[x] & (x == BAR[y])
        return np.where(x == y, meet(x, z), np.where(opp, x, 0))

    def K(x, y, z):
        opp = INVW[x] & (x == BAR[y])
        second = (x == y) & INVW[z] & (y == BAR[z])
        return np.where(opp, y, np.where(second, z, np.where((x == y) & (y == z), x, 0)))

    def _join_xy_xz(x, y, z):
        return np.where((x == y) | (x == z), x, 0)

    def S0(u, x, y, z):
        return np.where(ISV0[u], _join_xy_xz(x, y, z), 0)

    def S1(u, x, y, z):
        return np.where(IS12[u], _join_xy_xz(x, y, z), 0)

    def S2(u, v, x, y, z):
        return np.where(INVW[u] & (u == BAR[v]), _join_xy_xz(x, y, z), 0)

    def T(w, x, y, z):
        p = PROD[w, x]
        q = PROD[y, z]
        same = (w == y) & (x == z)
        return np.where((p == q) & same, p, np.where((p == q) & (p != 0) & ~same, BARZ[p], 0))

    # candidate tuples for supports: every tuple outside them is zero
    everything = np.arange(m)
    nonzero = np.arange(1, m)
    xyz = np.array([(x, y, z) for x in nonzero.tolist() for y in range(m) for z in range(m)
                    if x == y or x == z], dtype=np.int64)

    def full(k):
        return lambda: _grid([everything] * k)

    def s_support(fn, us):
        def make():
            us_arr = np.asarray(us, dtype=np.int64).reshape(len(us), -1)
            rows = np.concatenate([np.repeat(us_arr, len(xyz), axis=0), np.tile(xyz, (len(us_arr), 1))], axis=1)
            return rows, fn(*rows.T)
        return make

    def with_eval(fn, cand):
        def make():
            rows = cand()
            return rows, fn(*rows.T)
        return make

    W_SET = [lab[l] for l in ("C", "D", "~C", "~D")]
    ops = [
        Operation("0", 0, table=np.array(0), rule="builtin:zero"),
        Operation("meet", 2, fn=meet, rule="builtin:meet",
                  support_factory=lambda: (np.stack([nonzero, nonzero], axis=1), nonzero)),
        Operation("prod", 2, table=PROD, rule="builtin:prod"),
        Operation("J", 3, fn=J, rule="builtin:J", support_factory=with_eval(J, full(3))),
        Operation("Jp", 3, fn=Jp, rule="builtin:Jp", support_factory=with_eval(Jp, full(3))),
    ]
    if not omit_K:
        ops.append(Operation("K", 3, fn=K, rule="builtin:K", support_factory=with_eval(K, full(3))))
    barred_pairs = [(u, int(BAR[u])) for u in range(m) if INVW[u]]
    ops += [
        Operation("S0", 4, fn=S0, rule="builtin:S0",
                  support_factory=s_support(S0, [[u] for u in np.nonzero(ISV0)[0].tolist()])),
        Operation("S1", 4, fn=S1, rule="builtin:S1",
                  support_factory=s_support(S1, [[lab["1"]], [lab["2"]]])),
        Operation("S2", 5, fn=S2, rule="builtin:S2", support_factory=s_support(S2, barred_pairs)),
        Operation("T", 4, fn=T, rule="builtin:T",
                  support_factory=with_eval(T, lambda: _grid([LETTERS, W_SET, LETTERS, W_SET]))),
        Operation("I", 1, table=ITAB, rule="builtin:I"),
    ]

    machine_tables = {}
    for ins in tm.instructions:
        for t in (0, 1):
            name = f"{ins.move}({ins.state},{ins.read},{t})"
            tab = _machine_table(ins, t, lab, BAR, m)
            machine_tables[name] = tab
            ops.append(Operation(name, 3, table=tab, rule=f"builtin:{name}"))
    for name, tab in machine_tables.items():
        u1, u0 = _u_ops(tab, PREC, BARZ)
        cand = lambda: _grid([LETTERS, LETTERS, LETTERS, everything])
        ops.append(Operation(f"U1:{name}", 4, fn=u1, rule=f"builtin:U1:{name}", support_factory=with_eval(u1, cand)))
        ops.append(Operation(f"U0:{name}", 4, fn=u0, rule=f"builtin:U0:{name}", support_factory=with_eval(u0, cand)))

    alg = APrime(labels, ops, zero=0, name="A'(T)")
    alg.tm = tm
    alg.elements = els
    alg.BAR = BAR
    alg.BARZ = BARZ
    alg.INVW = INVW
    alg.ISV0 = ISV0
    alg.IS12 = IS12
    alg.PREC = PREC
    alg.LETTERS = LETTERS
    alg.omit_K = omit_K
    alg.machine_ops = list(machine_tables)
    alg.builtin = {"kind": "aprime", "machine": tm.to_text(), "omit_K": omit_K}
    return alg


def _grid(sets):
    sets = [np.asarray(s, dtype=np.int64) for s in sets]
    g = np.meshgrid(*sets, indexing="ij")
    return np.stack([x.ravel() for x in g], axis=1)


def _machine_table(ins, t, lab, BAR, m):
    i, r, s, j = ins.state, ins.read, ins.write, ins.target
    tab = np.zeros((m, m, m), dtype=np.int32)

    def put(x, y, u, v):
        tab[lab[x], lab[y], lab[u]] = lab[v]

    for sp in (0, 1):
        put("1", "1", f"C({i},{r},{sp})", f"C({j},{t},{sp})")
        put("2", "2", f"D({i},{r},{sp})", f"D({j},{t},{sp})")
    if ins.move == "L":
        put("H", "1", f"C({i},{r},{t})", f"M({j},{t})")
        put("2", "H", f"M({i},{r})", f"D({j},{t},{s})")
    else:
        put("H", "1", f"M({i},{r})", f"C({j},{t},{s})")
        put("2", "H", f"D({i},{r},{t})", f"M({j},{t})")
    # bar rule: barred input, barred output
    xs, ys, us = np.nonzero(tab)
    for x, y, u in zip(xs.tolist(), ys.tolist(), us.tolist()):
        tab[x, y, BAR[u]] = BAR[tab[x, y, u]]
    return tab


def _u_ops(F, PREC, BARZ):
    def u1(x, y, z, u):
        f = F[x, y, u]
        ok = PREC[x, z] & (f != 0)
        return np.where(ok & (y == z), f, np.where(ok & (y != z), BARZ[f], 0))

    def u0(x, y, z, u):
        f = F[y, z, u]
        ok = PREC[x, z] & (f != 0)
        return np.where(ok & (x == y), f, np.where(ok & (x != y), BARZ[f], 0))

    return u1, u0


def _from_builtin(doc):
    return build_aprime(parse_tm(doc["machine"]), omit_K=bool(doc.get("omit_K", False)))


register_builtin("aprime", _from_builtin)


def op_name_for(alg, name):
    """Accept the alias U2:<F> for U0:<F>."""
    if name.startswith("U2:"):
        return "U0:" + name[3:]
    return name


def eval_base_op(alg, name, *args):
    if name not in BASE_OPS:
        raise KeyError(f"{name} is not a base operation")
    return alg.labels[alg.apply(name, *args)]


def eval_machine_op(alg, name, *args):
    return alg.labels[alg.apply(op_name_for(alg, name), *args)]


def bar(alg, x):
    b = alg.bar(x)
    return None if b is None else alg.labels[b]


# ---- structural classification ---------------------------------------


def classify_zero_absorbing(alg, exhaustive_cap=6_000_000, samples=2_000_000, seed=0):
    """For each operation and coordinate (1-based): is the coordinate
    0-absorbing? Returns {op: {coord: bool}} and {op: method}."""
    rng = np.random.default_rng(seed)
    m = alg.size
    report, method = {}, {}
    for op in alg.ops:
        if op.arity == 0:
            continue
        k = op.arity
        report[op.name] = {}
        n_other = m ** (k - 1)
        method[op.name] = "exhaustive" if n_other <= exhaustive_cap else f"sampled({samples})"
        for c in range(k):
            absorbing = True
            if n_other <= exhaustive_cap:
                for chunk in _chunked_grid(m, k - 1, 1_000_000):
                    cols = list(chunk.T)
                    cols.insert(c, np.zeros(len(chunk), dtype=np.int64))
                    if np.any(op.evaluate(*cols) != alg.zero):
                        absorbing = False
                        break
            else:
                cols = [rng.integers(0, m, samples) for _ in range(k - 1)]
                cols.insert(c, np.zeros(samples, dtype=np.int64))
                absorbing = not np.any(op.evaluate(*cols) != alg.zero)
            report[op.name][c + 1] = absorbing
    return report, method


def _chunked_grid(m, k, chunk):
    total = m ** k
    for start in range(0, total, chunk):
        flat = np.arange(start, min(total, start + chunk), dtype=np.int64)
        cols = []
        for _ in range(k):
            cols.append(flat % m)
            flat = flat // m
        yield np.stack(cols[::-1], axis=1) if k else np.zeros((len(flat), 0), dtype=np.int64)


def check_meet_commuting(alg, name, samples=200_000, seed=0):
    """Does F(a) ∧ F(b) = F(a ∧ b) hold? Exhaustive up to arity 3 (grouped
    by the set of coordinates where a and b differ), sampled beyond."""
    op = alg[name]
    m, k = alg.size, op.arity
    if k == 0:
        return {"op": name, "commutes": True, "method": "exhaustive", "counterexample": None}
    if k > 3:
        rng = np.random.default_rng(seed)
        a = rng.integers(0, m, (samples, k))
        b = np.where(rng.random((samples, k)) < 0.5, a, rng.integers(0, m, (samples, k)))
        fa, fb = op.evaluate(*a.T), op.evaluate(*b.T)
        lhs = np.where(fa == fb, fa, alg.zero)
        rhs = op.evaluate(*np.where(a == b, a, alg.zero).T)
        bad = np.nonzero(lhs != rhs)[0]
        ce = None if len(bad) == 0 else (a[bad[0]].tolist(), b[bad[0]].tolist())
        return {"op": name, "commutes": ce is None, "method": f"sampled({samples})", "counterexample": ce}
    tab = op.table()
    for size in range(1, k + 1):
        for D in itertools.combinations(range(k), size):
            rest = [c for c in range(k) if c not in D]
            for fixed in itertools.product(range(m), repeat=len(rest)):
                idx = [slice(None)] * k
                zidx = [0] * k
                for c, v in zip(rest, fixed):
                    idx[c] = v
                    zidx[c] = v
                z = int(tab[tuple(zidx)])
                sub = tab[tuple(idx)]  # values over the differing coordinates
                ce = _meet_group_violation(sub, z, alg.zero)
                if ce is not None:
                    a, b = list(zidx), list(zidx)
                    for c, va, vb in zip(D, ce[0], ce[1]):
                        a[c], b[c] = va, vb
                    return {"op": name, "commutes": False, "method": "exhaustive", "counterexample": (a, b)}
    return {"op": name, "commutes": True, "method": "exhaustive", "counterexample": None}


def _meet_group_violation(sub, z, zero):
    """Pairs of points differing in every coordinate of `sub` must satisfy
    [g(a) == g(b) ? g(a) : 0] == z."""
    pts = np.argwhere(np.ones(sub.shape, dtype=bool))
    vals = sub.reshape(-1)
    if z != zero:
        bad = np.nonzero(vals != z)[0]
        if len(bad):
            a = pts[bad[0]]
            b = np.array([(v + 1) % sub.shape[0] for v in a])
            return a.tolist(), b.tolist()
        return None
    for v in np.unique(vals).tolist():
        if v == zero:
            continue
        P = pts[vals == v]
        if len(P) < 2:
            continue
        diff = np.all(P[:, None, :] != P[None, :, :], axis=2)
        hit = np.argwhere(diff)
        if len(hit):
            return P[hit[0][0]].tolist(), P[hit[0][1]].tolist()
    return None


# ---- lattice-expression oracles (independent of the case tables) -----


def lattice_oracle(alg):
    """Evaluators of the flat-lattice expressions defining J, J', K and the
    S_i; a missing bar is 0 and a join has at most one nonzero side."""
    BARZ = alg.BARZ
    INVW = alg.INVW

    def mt(*xs):
        out = xs[0]
        for x in xs[1:]:
            out = np.where(out == x, out, 0)
        return out

    def jn(*xs):
        out = np.zeros_like(xs[0])
        clash = np.zeros(xs[0].shape, dtype=bool)
        for x in xs:
            clash |= (out != 0) & (x != 0) & (out != x)
            out = np.where(out == 0, x, out)
        if clash.any():
            raise AssertionError("join of two distinct nonzero elements")
        return out

    def S_cond(cond, x, y, z):
        return np.where(cond, jn(mt(x, y), mt(x, z)), 0)

    return {
        "J": lambda x, y, z: jn(mt(x, BARZ[y], z), mt(x, y)),
        "Jp": lambda x, y, z: jn(mt(x, y, z), mt(x, BARZ[y])),
        "K": lambda x, y, z: jn(mt(BARZ[x], y), mt(BARZ[x], BARZ[y], z), mt(x, y, z)),
        "S0": lambda u, x, y, z: S_cond(alg.ISV0[u], x, y, z),
        "S1": lambda u, x, y, z: S_cond(alg.IS12[u], x, y, z),
        "S2": lambda u, v, x, y, z: S_cond(INVW[u] & (mt(u, BARZ[v]) != 0), x, y, z),
    }


def compare_lattice_oracle(alg, samples=10_000_000, seed=0, chunk=2_000_000):
    """Mismatches between the case tables and the lattice expressions:
    exhaustive for arity 3 and 4, `samples` uniform tuples for S2.
    Returns {op: (checked, mismatches, first counterexample)}."""
    oracle = lattice_oracle(alg)
    m = alg.size
    rng = np.random.default_rng(seed)
    out = {}
    for name, fn in oracle.items():
        op = alg[name]
        k = op.arity
        checked = bad = 0
        first = None
        if k <= 4:
            batches = _chunked_grid(m, k, chunk)
        else:
            batches = (rng.integers(0, m, (min(chunk, samples - s), k)) for s in range(0, samples, chunk))
        for grid in batches:
            cols = list(grid.T)
            diff = np.nonzero(op.evaluate(*cols) != fn(*cols))[0]
            checked += len(grid)
            bad += len(diff)
            if len(diff) and first is None:
                first = grid[diff[0]].tolist()
        out[name] = (checked, bad, first)
    return out
