"""First-order formulas over finite algebras, the congruence formulas that
define principal subcongruences in the variety of A'(T), and a checker for
definable principal subcongruences on small algebras.

Formulas are small ASTs evaluated by brute force. Every named formula of the
library also has a matrix evaluator (`Semantics`) that computes the whole
relation {(w, x) : phi(w, x, y, z)} at once; the two are cross-checked in the
tests on tiny algebras.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .algebra_core import (
    Partition,
    generate_subuniverse,
    principal_congruence,
    si_congruences,
    subalgebra,
)

# ---- AST ----------------------------------------------------------------


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Const:
    value: int


@dataclass(frozen=True)
class App:
    op: str
    args: tuple


@dataclass(frozen=True)
class Eq:
    left: object
    right: object


@dataclass(frozen=True)
class And:
    parts: tuple


@dataclass(frozen=True)
class Or:
    parts: tuple


@dataclass(frozen=True)
class Not:
    body: object


@dataclass(frozen=True)
class Exists:
    """width 0 binds an element; width k >= 1 binds a tuple in B^k, which
    operation applications splice into their argument list."""

    var: str
    body: object
    width: int = 0


@dataclass(frozen=True)
class Forall:
    var: str
    body: object
    width: int = 0


@dataclass(frozen=True)
class Call:
    """Named formula of a library, applied to terms."""

    name: str
    args: tuple


@dataclass(frozen=True)
class Pred:
    """Predicate decided by the base strategy (psi0, gamma0)."""

    name: str
    args: tuple


TRUE = And(())
FALSE = Or(())


def V(name):
    return Var(name)


def conj(*parts):
    out = []
    for p in parts:
        out.extend(p.parts if isinstance(p, And) else [p])
    return out[0] if len(out) == 1 else And(tuple(out))


def disj(*parts):
    out = []
    for p in parts:
        out.extend(p.parts if isinstance(p, Or) else [p])
    return out[0] if len(out) == 1 else Or(tuple(out))


def exists(names, body, width=0):
    for n in reversed(names.split() if isinstance(names, str) else names):
        body = Exists(n, body, width)
    return body


def app(op, *args):
    return App(op, tuple(args))


def eq(a, b):
    return Eq(a, b)


def call(name, *args):
    return Call(name, tuple(args))


def to_sexpr(phi):
    if isinstance(phi, Var):
        return phi.name
    if isinstance(phi, Const):
        return f"#{phi.value}"
    if isinstance(phi, App):
        return "(" + " ".join([phi.op] + [to_sexpr(a) for a in phi.args]) + ")"
    if isinstance(phi, Eq):
        return f"(= {to_sexpr(phi.left)} {to_sexpr(phi.right)})"
    if isinstance(phi, And):
        return "(and" + "".join(" " + to_sexpr(p) for p in phi.parts) + ")" if phi.parts else "true"
    if isinstance(phi, Or):
        return "(or" + "".join(" " + to_sexpr(p) for p in phi.parts) + ")" if phi.parts else "false"
    if isinstance(phi, Not):
        return f"(not {to_sexpr(phi.body)})"
    if isinstance(phi, (Exists, Forall)):
        q = "exists" if isinstance(phi, Exists) else "forall"
        v = phi.var if not phi.width else f"({phi.var} {phi.width})"
        return f"({q} {v} {to_sexpr(phi.body)})"
    if isinstance(phi, (Call, Pred)):
        return "(" + " ".join([phi.name] + [to_sexpr(a) for a in phi.args]) + ")"
    raise TypeError(phi)


def free_vars(phi, bound=frozenset()):
    if isinstance(phi, Var):
        return set() if phi.name in bound else {phi.name}
    if isinstance(phi, Const):
        return set()
    if isinstance(phi, (App, Call, Pred)):
        return set().union(*(free_vars(a, bound) for a in phi.args)) if phi.args else set()
    if isinstance(phi, Eq):
        return free_vars(phi.left, bound) | free_vars(phi.right, bound)
    if isinstance(phi, (And, Or)):
        return set().union(*(free_vars(p, bound) for p in phi.parts)) if phi.parts else set()
    if isinstance(phi, Not):
        return free_vars(phi.body, bound)
    if isinstance(phi, (Exists, Forall)):
        return free_vars(phi.body, bound | {phi.var})
    raise TypeError(phi)


# ---- brute-force evaluation ------------------------------------------------


class UnboundVariable(KeyError):
    pass


class BudgetExceeded(RuntimeError):
    pass


class Evaluator:
    """Brute-force satisfaction with memoized library calls. `budget` caps
    the number of quantifier instances tried."""

    def __init__(self, alg, library=None, strategy=None, budget=None):
        self.alg = alg
        self.library = library
        self.strategy = strategy
        self.budget = budget
        self.spent = 0
        self.memo = {}
        self.elements = range(alg.size)

    def term(self, t, env):
        if isinstance(t, Var):
            try:
                return env[t.name]
            except KeyError:
                raise UnboundVariable(t.name) from None
        if isinstance(t, Const):
            return t.value
        if isinstance(t, App):
            vals = []
            for a in t.args:
                v = self.term(a, env)
                if isinstance(v, tuple):
                    vals.extend(v)
                else:
                    vals.append(v)
            return self.alg[t.op](*vals)
        raise TypeError(t)

    def _domain(self, width):
        if width == 0:
            return self.elements
        return itertools.product(self.elements, repeat=width)

    def _tick(self):
        self.spent += 1
        if self.budget is not None and self.spent > self.budget:
            raise BudgetExceeded(f"more than {self.budget} quantifier instances")

    def holds(self, phi, env):
        if isinstance(phi, Eq):
            return self.term(phi.left, env) == self.term(phi.right, env)
        if isinstance(phi, And):
            return all(self.holds(p, env) for p in phi.parts)
        if isinstance(phi, Or):
            return any(self.holds(p, env) for p in phi.parts)
        if isinstance(phi, Not):
            return not self.holds(phi.body, env)
        if isinstance(phi, Exists):
            inner = dict(env)
            for v in self._domain(phi.width):
                self._tick()
                inner[phi.var] = v
                if self.holds(phi.body, inner):
                    return True
            return False
        if isinstance(phi, Forall):
            inner = dict(env)
            for v in self._domain(phi.width):
                self._tick()
                inner[phi.var] = v
                if not self.holds(phi.body, inner):
                    return False
            return True
        if isinstance(phi, Call):
            args = tuple(self.term(a, env) for a in phi.args)
            key = (phi.name, args)
            hit = self.memo.get(key)
            if hit is None:
                if self.library is None or phi.name not in self.library.formulas:
                    raise KeyError(f"unknown formula {phi.name}")
                params, body = self.library.formulas[phi.name]
                hit = self.holds(body, dict(zip(params, args)))
                self.memo[key] = hit
            return hit
        if isinstance(phi, Pred):
            if self.strategy is None:
                raise ValueError(f"predicate {phi.name} needs a base strategy")
            args = tuple(self.term(a, env) for a in phi.args)
            return bool(self.strategy.predicate(phi.name, args))
        raise TypeError(phi)


def eval_formula(alg, phi, assignment=None, library=None, strategy=None, budget=None):
    ev = Evaluator(alg, library, strategy, budget)
    env = {k: (alg.el(v) if not isinstance(v, tuple) else tuple(alg.el(x) for x in v))
           for k, v in (assignment or {}).items()}
    missing = free_vars(phi) - set(env)
    if missing:
        raise UnboundVariable(", ".join(sorted(missing)))
    return ev.holds(phi, env)


# ---- the e_i terms and the classes M_i ----------------------------------------

S_NAME = {0: "S0", 1: "S1", 2: "S2"}
E_WIDTH = {0: 1, 1: 1, 2: 2}


def e_i(alg, i, mbar, x):
    mbar = (mbar,) if not isinstance(mbar, (tuple, list)) else tuple(mbar)
    if len(mbar) != E_WIDTH[i]:
        raise ValueError(f"e_{i} takes {E_WIDTH[i]} parameter(s)")
    x = alg.el(x)
    return alg[S_NAME[i]](*(alg.el(m) for m in mbar), x, x, x)


def e_maps(alg, i):
    """Yields (mbar, map array) for every parameter of e_i."""
    xs = np.arange(alg.size)
    op = alg[S_NAME[i]]
    for mbar in itertools.product(range(alg.size), repeat=E_WIDTH[i]):
        cols = [np.full(alg.size, v) for v in mbar]
        yield mbar, np.asarray(op.evaluate(*cols, xs, xs, xs))


def in_class_Mi(alg, i):
    """Some mbar with e_i(mbar, x) = x for all x, else None."""
    xs = np.arange(alg.size)
    for mbar, mp in e_maps(alg, i):
        if np.array_equal(mp, xs):
            return mbar
    return None


def jonsson_check(alg, mbar, i):
    """(ok, counterexample) for the Jonsson identities of
    x, S_i(m,x,y,z), x∧z, S_i(m,z,y,x), z."""
    m = alg.size
    S = alg[S_NAME[i]]
    meet = alg["meet"]
    X, Y, Z = np.indices((m, m, m)).reshape(3, -1)
    pre = [np.full(len(X), v) for v in mbar]

    def p(j, x, y, z):
        if j == 0:
            return x
        if j == 1:
            return S.evaluate(*pre, x, y, z)
        if j == 2:
            return meet.evaluate(x, z)
        if j == 3:
            return S.evaluate(*pre, z, y, x)
        return z

    checks = []
    for j in range(5):
        checks.append((f"p{j}(x,y,x)=x", p(j, X, Y, X), X))
    for j in (0, 2):
        checks.append((f"p{j}(x,x,z)=p{j + 1}(x,x,z)", p(j, X, X, Z), p(j + 1, X, X, Z)))
    for j in (1, 3):
        checks.append((f"p{j}(x,z,z)=p{j + 1}(x,z,z)", p(j, X, Z, Z), p(j + 1, X, Z, Z)))
    for name, lhs, rhs in checks:
        bad = np.nonzero(np.asarray(lhs) != np.asarray(rhs))[0]
        if len(bad):
            k = bad[0]
            return False, (name, int(X[k]), int(Y[k]), int(Z[k]))
    return True, None


def leq(alg, v, u):
    """v <= u in the meet order."""
    return alg["meet"](v, u) == v


# ---- term sets --------------------------------------------------------------


def product_nilpotence(alg, limit=64):
    """Least L with x_1·(x_2·(...·x_L)) = 0 for all x's, or None."""
    prod = alg["prod"].table() if alg.size ** 2 <= 4_000_000 else None
    vals = np.ones(alg.size, dtype=bool)
    for L in range(1, limit + 1):
        if not vals[np.arange(alg.size) != alg.zero].any():
            return L
        cur = np.nonzero(vals)[0]
        nxt = np.zeros(alg.size, dtype=bool)
        nxt[np.unique(prod[:, cur])] = True
        vals = nxt
    return None


@dataclass
class ProductTerms:
    """P = {y_1...y_M·x, y_1...y_{M-1}·x·y_M : 0 <= M < N}, products
    associated to the right."""

    N: int

    def terms(self):
        out = [("left", M) for M in range(self.N)]
        out += [("inner", M) for M in range(1, self.N)]
        return out

    def ast(self, term, ys, x):
        kind, M = term
        if kind == "left":
            t = x
            for y in reversed(ys[:M]):
                t = app("prod", y, t)
            return t
        t = app("prod", x, ys[M - 1])
        for y in reversed(ys[:M - 1]):
            t = app("prod", y, t)
        return t

    def pairs(self, prod, y, z):
        """All (t(ys, y), t(ys, z)) for t in P, as a boolean matrix."""
        m = prod.shape[0]
        out = np.zeros((m, m), dtype=bool)
        level = {(y, z)}
        for M in range(self.N):
            for u, v in level:
                out[u, v] = True
            level = {(int(prod[p, u]), int(prod[p, v])) for u, v in level for p in range(m)}
        level = {(int(prod[y, q]), int(prod[z, q])) for q in range(m)}
        for M in range(1, self.N):
            for u, v in level:
                out[u, v] = True
            level = {(int(prod[p, u]), int(prod[p, v])) for u, v in level for p in range(m)}
        return out


def compute_product_terms_P(catalog):
    """N = the largest nilpotence length of (·) over the catalog algebras in
    which e_1 is identically 0."""
    if not catalog:
        raise ValueError("empty catalog")
    N = 1
    for alg in catalog:
        xs = np.arange(alg.size)
        U, X = np.meshgrid(xs, xs, indexing="ij")
        if (alg["S1"].evaluate(U, X, X, X) != alg.zero).any():
            continue
        L = product_nilpotence(alg)
        if L is None:
            raise ValueError(f"(·) is not nilpotent in {alg.name}")
        N = max(N, L)
    return ProductTerms(N)


def machine_op_names(alg):
    return [name for name, k in alg.signature() if k == 3 and name[:2] in ("L(", "R(")]


@dataclass
class MachineTerms:
    """Compositions of at most `depth` translations. Kind 'T' uses F(u,v,-)
    for F in L and R; kind 'S' uses F and U translations in every argument
    position and F(u,v,I(-))."""

    kind: str
    depth: int
    report: str = ""

    def steps(self, ops):
        if self.kind != "S":
            return [("F", f, 2) for f in ops]
        out = [("F", f, k) for f in ops for k in range(3)]
        out += [("FI", f, 2) for f in ops]
        out += [(u, f, k) for u in ("U1", "U0") for f in ops for k in range(4)]
        return out

    def templates(self, ops):
        out = [()]
        for d in range(1, self.depth + 1):
            out += list(itertools.product(self.steps(ops), repeat=d))
        return out

    def ast(self, template, params, x):
        """Term for a template; consumes parameter variables from `params`."""
        t = x
        k = 0
        for kind, f, pos in reversed(template):
            arity = 3 if kind in ("F", "FI") else 4
            args = list(params[k:k + arity - 1])
            k += arity - 1
            args.insert(pos, app("I", t) if kind == "FI" else t)
            t = App(f if arity == 3 else f"{kind}:{f}", tuple(args))
        return t, k

    def translation_rows(self, alg):
        m = alg.size
        xs = np.arange(m)
        rows = []
        Itab = alg["I"].evaluate(xs)
        for kind, f, pos in self.steps(machine_op_names(alg)):
            arity = 3 if kind in ("F", "FI") else 4
            op = alg[f if arity == 3 else f"{kind}:{f}"]
            arg = Itab if kind == "FI" else xs
            for ctx in itertools.product(range(m), repeat=arity - 1):
                cols = [np.full(m, v) for v in ctx]
                cols.insert(pos, arg)
                rows.append(op.evaluate(*cols))
        if not rows:
            return np.zeros((0, m), dtype=np.int64)
        return np.unique(np.array(rows, dtype=np.int64), axis=0)

    def pairs(self, rows, y, z, m):
        out = np.zeros((m, m), dtype=bool)
        level = {(y, z)}
        out[y, z] = True
        for _ in range(self.depth):
            nxt = set()
            for u, v in level:
                for a, b in zip(rows[:, u].tolist(), rows[:, v].tolist()):
                    if not out[a, b]:
                        out[a, b] = True
                        nxt.add((a, b))
            level = nxt
            if not level:
                break
        return out


def compute_machine_terms_ST(tm, catalog):
    """(S, T) sized by the machine catalog: T reaches along the monolith
    class of every catalog algebra, S additionally across N."""
    machines = [a for a in catalog if getattr(a, "spec", None) is not None]
    if not catalog:
        raise ValueError("empty catalog")
    if not machines:
        return MachineTerms("S", 0, "no machine-type algebra: identity only"), MachineTerms("T", 0, "identity only")
    from .si_catalog import expected_monolith_class

    t_depth = 0
    s_depth = 0
    for Q in machines:
        cls = expected_monolith_class(Q.spec)
        cyc = len(cls) - 2
        t_depth = max(t_depth, cyc)
        s_depth = max(s_depth, len(Q.spec.N) + cyc)
    return MachineTerms("S", s_depth, f"depth {s_depth}"), MachineTerms("T", t_depth, f"depth {t_depth}")


# ---- the library ---------------------------------------------------------------

PSI1_PARTS = ["psi_S", "psi_J", "psi_Jp", "psi_JpJ", "psi_JS", "psi_JpS", "psi_JpJS"]
GAMMA_PARTS = ["Gamma_1", "Gamma_dot", "Gamma_T", "Gamma_I"]
PSI_PARTS = ["psi_2", "psi_3", "psi_4"]


def e_term(i, n, t):
    return app(S_NAME[i], n, t, t, t)


def e2_term(a, b, t):
    return app("S2", a, b, t, t, t)


@dataclass
class Library:
    formulas: dict
    P: ProductTerms
    S: MachineTerms
    T: MachineTerms
    machine_ops: list = field(default_factory=list)

    def __getitem__(self, name):
        return self.formulas[name]

    @property
    def names(self):
        return list(self.formulas)

    def dump(self, name):
        params, body = self.formulas[name]
        return f"(define ({name} {' '.join(params)}) {to_sexpr(body)})"


def build_library(alg, P=None, S=None, T=None):
    """Named formulas as ASTs. The parameters w, x, y, z follow the reading
    `(w, x) is in the congruence generated by (y, z)`."""
    P = P or ProductTerms(2)
    S = S or MachineTerms("S", 0)
    T = T or MachineTerms("T", 0)
    ops = machine_op_names(alg)
    w, x, y, z, t = V("w"), V("x"), V("y"), V("z"), V("t")
    F = {}
    WXYZ = ("w", "x", "y", "z")

    def psi_s_body(w, x, y, z):
        alts = []
        for i in (0, 1, 2):
            n = V("n")
            inner = []
            for j in (0, 1, 2):
                mm = V("mb")
                inner.append(Exists("mb", conj(
                    eq(w, app(S_NAME[j], mm, w, x, e_term(i, n, w))),
                    eq(x, app(S_NAME[j], mm, w, x, e_term(i, n, x))),
                ), E_WIDTH[j]))
            alts.append(Exists("n", conj(
                eq(y, e_term(i, n, y)),
                eq(z, e_term(i, n, z)),
                Pred("psi0", (e_term(i, n, w), e_term(i, n, x), y, z)),
                disj(*inner),
            ), E_WIDTH[i]))
        return disj(*alts)

    F["psi_S"] = (WXYZ, psi_s_body(w, x, y, z))
    b = V("b")
    F["psi_J"] = (WXYZ, Exists("b", conj(
        call("psi_S", e2_term(w, b, w), e2_term(w, b, x), y, z),
        eq(w, app("J", w, b, e2_term(w, b, w))),
        eq(x, app("J", w, b, e2_term(w, b, x))),
    )))
    alts = []
    a, n = V("a"), V("n")
    for i in (0, 1, 2):
        alts.append(Exists("n", exists("a b", conj(
            call("psi_S", e_term(i, n, w), e_term(i, n, x), y, z),
            eq(w, app("Jp", a, b, e_term(i, n, w))),
            eq(x, app("Jp", a, b, e_term(i, n, x))),
        )), E_WIDTH[i]))
    F["psi_Jp"] = (WXYZ, disj(*alts))
    alpha = disj(*[Exists("n", Exists("a", conj(
        call("psi_S", e_term(i, n, w), e_term(i, n, x), y, z),
        eq(w, app("Jp", w, a, e_term(i, n, w))),
        eq(t, app("Jp", w, a, e_term(i, n, x))),
    )), E_WIDTH[i]) for i in (0, 1, 2)])
    beta = Exists("b", conj(
        call("psi_S", e2_term(w, b, w), e2_term(w, b, x), y, z),
        eq(t, app("J", t, b, e2_term(w, b, w))),
        eq(x, app("J", t, b, e2_term(w, b, x))),
    ))
    F["psi_JpJ"] = (WXYZ, Exists("t", conj(alpha, beta)))
    for name, first in (("psi_JS", "psi_J"), ("psi_JpS", "psi_Jp"), ("psi_JpJS", "psi_JpJ")):
        F[name] = (WXYZ, Exists("t", conj(call(first, w, t, y, z), call("psi_S", t, x, y, z))))
    F["psi_1"] = (WXYZ, disj(*[call(p, w, x, y, z) for p in PSI1_PARTS]))
    F["psi_2"] = (WXYZ, Exists("t", conj(call("psi_1", w, t, y, z), call("psi_1", x, t, y, z))))
    F["psi_dot"] = (WXYZ, Exists("t", conj(eq(w, app("Jp", w, t, y)), eq(x, app("Jp", w, t, z)))))
    F["psi_3"] = (WXYZ, Exists("t", conj(call("psi_dot", w, t, y, z), call("psi_dot", x, t, y, z))))
    alts = []
    for tpl in T.templates(ops):
        params = [V(f"b{k}") for k in range(3 * len(tpl))]
        gy, used = T.ast(tpl, params, y)
        gz, _ = T.ast(tpl, params, z)
        alts.append(exists([p.name for p in params[:used]], conj(
            eq(w, app("Jp", w, V("s"), gy)), eq(x, app("Jp", w, V("s"), gz)))))
    F["psi_T"] = (WXYZ, Exists("s", disj(*alts)))
    F["psi_4"] = (WXYZ, Exists("t", conj(call("psi_T", w, t, y, z), call("psi_T", x, t, y, z))))
    F["psi"] = (WXYZ, disj(eq(w, x), *[call(p, w, x, y, z) for p in PSI_PARTS]))

    F["Gamma_1"] = (WXYZ, disj(*[Exists("n", Pred("gamma0", (w, x, e_term(j, n, y), e_term(j, n, z))), E_WIDTH[j])
                                  for j in (0, 1, 2)]))
    alts = []
    for term in P.terms():
        ys = [V(f"y{k}") for k in range(term[1])]
        alts.append(exists([v.name for v in ys], conj(eq(w, P.ast(term, ys, y)), eq(x, P.ast(term, ys, z)))))
    F["Gamma_dot"] = (WXYZ, disj(*alts))
    alts = []
    for tpl in S.templates(ops):
        params = [V(f"b{k}") for k in range(3 * len(tpl))]
        ty, used = S.ast(tpl, params, y)
        tz, _ = S.ast(tpl, params, z)
        alts.append(exists([p.name for p in params[:used]], conj(eq(w, ty), eq(x, tz))))
    F["Gamma_T"] = (WXYZ, disj(*alts))
    F["Gamma_I"] = (WXYZ, exists("u v", conj(eq(V("u"), app("I", y)), eq(V("v"), app("I", z)),
                                              call("Gamma_dot", w, x, V("u"), V("v")))))
    F["Gamma"] = (WXYZ, disj(*[call(g, w, x, y, z) for g in GAMMA_PARTS]))
    yz = app("meet", y, z)
    F["Gamma_star"] = (WXYZ, disj(call("Gamma", w, x, y, z), call("Gamma", w, x, z, y),
                                  call("Gamma", w, x, y, yz), call("Gamma", w, x, z, yz)))
    F["psi_star"] = (WXYZ, disj(call("psi", w, x, y, z), call("psi", w, x, z, y)))

    c, d, a1, b1, r, s2 = V("c"), V("d"), V("a"), V("b"), V("r"), V("s")
    F["dpsc_witness"] = (("c", "d", "a", "b"), conj(Not(eq(c, d)), call("Gamma_star", c, d, a1, b1)))
    F["sigma"] = ((), exists("r s", conj(Not(eq(r, s2)), Forall("a", Forall("b", disj(
        eq(a1, b1), exists("c d", conj(call("Gamma_star", c, d, a1, b1), call("psi_star", r, s2, c, d)))))))))
    a2, b2, c2, d2 = V("a2"), V("b2"), V("c2"), V("d2")
    F["zeta"] = ((), Forall("a", Forall("b", Forall("a2", Forall("b2", disj(
        eq(a1, b1), eq(a2, b2),
        exists("c d c2 d2", conj(
            call("Gamma_star", c, d, a1, b1), call("Gamma_star", c2, d2, a2, b2),
            exists("r s", conj(Not(eq(r, s2)), call("psi_star", r, s2, c, d), call("psi_star", r, s2, c2, d2)))))))))))
    return Library(F, P, S, T, ops)


# ---- matrix semantics -----------------------------------------------------------


def _bool_compose(A, B):
    """{(w, x) : exists t, A(w, t) and B(t, x)}"""
    return (A.astype(np.int32) @ B.astype(np.int32)) > 0


class Semantics:
    """Relations of the library formulas for fixed (y, z), as boolean
    matrices indexed by (w, x). psi0 and gamma0 are semantic: (u, v) lies in
    the congruence generated by (y, z) inside some image e_i(n, B) containing
    all four elements. With `scheme=(length, depth)` they instead use bounded
    Maltsev schemes inside those images."""

    def __init__(self, alg, P=None, S=None, T=None, scheme=None):
        self.alg = alg
        self.P = P or ProductTerms(product_nilpotence(alg) or 2)
        self.S = S or MachineTerms("S", 0)
        self.T = T or MachineTerms("T", 0)
        self.scheme = scheme
        m = self.m = alg.size
        xs = np.arange(m)
        g2 = np.indices((m, m)).reshape(2, -1)
        g3 = np.indices((m, m, m)).reshape(3, -1)
        self.MEET = np.asarray(alg["meet"].evaluate(*g2)).reshape(m, m)
        self.PROD = np.asarray(alg["prod"].evaluate(*g2)).reshape(m, m)
        self.Jt = np.asarray(alg["J"].evaluate(*g3)).reshape(m, m, m)
        self.Jpt = np.asarray(alg["Jp"].evaluate(*g3)).reshape(m, m, m)
        self.E2 = np.asarray(alg["S2"].evaluate(g3[0], g3[1], g3[2], g3[2], g3[2])).reshape(m, m, m)
        self.Imap = np.asarray(alg["I"].evaluate(xs))
        # distinct e_i(n, -) maps with a source parameter each
        maps, self.map_src = {}, []
        for i in (0, 1, 2):
            for mbar, mp in e_maps(alg, i):
                key = mp.astype(np.int64).tobytes()
                if key not in maps:
                    maps[key] = len(self.map_src)
                    self.map_src.append((i, mbar, mp.astype(np.int64)))
        self.maps = [mp for _, _, mp in self.map_src]
        self.fix = [mp == xs for mp in self.maps]
        # images and their subalgebras
        self.images = {}
        self.map_image = []
        for mp in self.maps:
            img = tuple(sorted(set(mp.tolist())))
            if img not in self.images:
                try:
                    sub = subalgebra(alg, img)
                except ValueError:
                    sub = None
                self.images[img] = sub
            self.map_image.append(img)
        self.image_list = [(img, sub) for img, sub in self.images.items() if sub is not None]
        self.in_image = [np.isin(xs, img) for img, _ in self.image_list]
        # distinct ternary maps v -> S_j(mbar, w, x, v) as (m, m, m) tables
        stabs, self.stab_src = {}, []
        W3, X3, V3 = g3
        for j in (0, 1, 2):
            op = alg[S_NAME[j]]
            for mbar in itertools.product(range(m), repeat=E_WIDTH[j]):
                tab = np.asarray(op.evaluate(*(np.full(len(W3), v) for v in mbar), W3, X3, V3)).reshape(m, m, m)
                key = tab.astype(np.int64).tobytes()
                if key not in stabs:
                    stabs[key] = len(self.stab_src)
                    self.stab_src.append((j, mbar, tab))
        W2, X2 = np.indices((m, m))
        self.SP = []
        for mp in self.maps:
            acc = np.zeros((m, m), dtype=bool)
            for _, _, tab in self.stab_src:
                acc |= (tab[W2, X2, mp[W2]] == W2) & (tab[W2, X2, mp[X2]] == X2)
            self.SP.append(acc)
        self._S_rows = None
        self._T_rows = None
        self.cache = {}

    # -- base predicates

    def _cg_rel(self, sub, y, z):
        inv = {e: k for k, e in enumerate(sub.embedding.tolist())}
        lab = principal_congruence(sub, inv[y], inv[z]).labels
        emb = sub.embedding
        rel = np.zeros((self.m, self.m), dtype=bool)
        same = lab[:, None] == lab[None, :]
        rel[np.ix_(emb, emb)] = same
        return rel

    def _scheme_rel(self, sub, y, z):
        from .chains import scheme_closure

        inv = {e: k for k, e in enumerate(sub.embedding.tolist())}
        local = scheme_closure(sub, inv[y], inv[z], *self.scheme)
        emb = sub.embedding
        rel = np.zeros((self.m, self.m), dtype=bool)
        rel[np.ix_(emb, emb)] = local
        return rel

    def psi0(self, y, z):
        key = ("psi0", y, z)
        if key not in self.cache:
            rel = np.zeros((self.m, self.m), dtype=bool)
            for (img, sub), mask in zip(self.image_list, self.in_image):
                if mask[y] and mask[z]:
                    rel |= self._scheme_rel(sub, y, z) if self.scheme else self._cg_rel(sub, y, z)
            self.cache[key] = rel
        return self.cache[key]

    gamma0 = psi0

    def predicate(self, name, args):
        u, v, y, z = args
        if name in ("psi0", "gamma0"):
            return bool(self.psi0(y, z)[u, v])
        raise KeyError(name)

    # -- psi relations

    def rel(self, name, y, z):
        key = (name, y, z)
        hit = self.cache.get(key)
        if hit is None:
            hit = getattr(self, "_" + name)(y, z)
            self.cache[key] = hit
        return hit

    def _psi_S(self, y, z):
        m = self.m
        out = np.zeros((m, m), dtype=bool)
        P0 = self.psi0(y, z)
        for k, mp in enumerate(self.maps):
            if self.fix[k][y] and self.fix[k][z]:
                out |= P0[np.ix_(mp, mp)] & self.SP[k]
        return out

    def _psi_S_literal(self, y, z):
        """psi_S with the stabilising S_j(m, w, x, e_j(m, -)) decoupled from
        the e_i image. Not a congruence formula; kept to exhibit that."""
        m = self.m
        W2, X2 = np.indices((m, m))
        if not hasattr(self, "_SP_literal"):
            acc = np.zeros((m, m), dtype=bool)
            for _, _, tab in self.stab_src:
                diag = tab[np.arange(m), np.arange(m), np.arange(m)]
                acc |= (tab[W2, X2, diag[W2]] == W2) & (tab[W2, X2, diag[X2]] == X2)
            self._SP_literal = acc
        out = np.zeros((m, m), dtype=bool)
        P0 = self.psi0(y, z)
        for k, mp in enumerate(self.maps):
            if self.fix[k][y] and self.fix[k][z]:
                out |= P0[np.ix_(mp, mp)] & self._SP_literal
        return out

    def _psi_J(self, y, z):
        m = self.m
        RS = self.rel("psi_S", y, z)
        w = np.arange(m)[:, None, None]
        b = np.arange(m)[None, :, None]
        x = np.arange(m)[None, None, :]
        rp = self.E2[w, b, w]
        sp = self.E2[w, b, x]
        ok = (self.Jt[w, b, rp] == w) & (self.Jt[w, b, sp] == x) & RS[rp, sp]
        return ok.any(axis=1)

    def _psi_Jp(self, y, z):
        m = self.m
        RS = self.rel("psi_S", y, z)
        out = np.zeros((m, m), dtype=bool)
        for mp in self.maps:
            G = self.Jpt[:, :, mp] == np.arange(m)[None, None, :]
            G2 = G.reshape(m * m, m)
            out |= RS[np.ix_(mp, mp)] & _bool_compose(G2.T, G2)
        return out

    def _alpha(self, y, z):
        """alpha[w, x, t] of the J'-J formula."""
        m = self.m
        RS = self.rel("psi_S", y, z)
        A = np.zeros((m, m, m), dtype=bool)
        W = np.arange(m)
        for mp in self.maps:
            cw = self.Jpt[W[:, None], W[None, :], mp[W][:, None]] == W[:, None]  # [w, a]
            rs = RS[np.ix_(mp, mp)]  # [w, x]
            tv = self.Jpt[W[:, None, None], W[None, :, None], mp[None, None, :]]  # [w, a, x]
            ok = cw[:, :, None] & rs[:, None, :]
            wi, ai, xi = np.nonzero(ok)
            A[wi, xi, tv[wi, ai, xi]] = True
        return A

    def _beta(self, y, z):
        m = self.m
        RS = self.rel("psi_S", y, z)
        w = np.arange(m)[:, None, None, None]
        x = np.arange(m)[None, :, None, None]
        t = np.arange(m)[None, None, :, None]
        b = np.arange(m)[None, None, None, :]
        rp = self.E2[w, b, w]
        sp = self.E2[w, b, x]
        ok = RS[rp, sp] & (self.Jt[t, b, rp] == t) & (self.Jt[t, b, sp] == x)
        return ok.any(axis=3)

    def _psi_JpJ(self, y, z):
        return (self._alpha(y, z) & self._beta(y, z)).any(axis=2)

    def _psi_JS(self, y, z):
        return _bool_compose(self.rel("psi_J", y, z), self.rel("psi_S", y, z))

    def _psi_JpS(self, y, z):
        return _bool_compose(self.rel("psi_Jp", y, z), self.rel("psi_S", y, z))

    def _psi_JpJS(self, y, z):
        return _bool_compose(self.rel("psi_JpJ", y, z), self.rel("psi_S", y, z))

    def _psi_1(self, y, z):
        out = np.zeros((self.m, self.m), dtype=bool)
        for p in PSI1_PARTS:
            out |= self.rel(p, y, z)
        return out

    def _psi_2(self, y, z):
        R = self.rel("psi_1", y, z)
        return _bool_compose(R, R.T)

    def _dot(self, u, v):
        m = self.m
        W = np.arange(m)[:, None]
        T = np.arange(m)[None, :]
        ok = self.Jpt[W, T, u] == W
        out = np.zeros((m, m), dtype=bool)
        wi, ti = np.nonzero(ok)
        out[wi, self.Jpt[wi, ti, v]] = True
        return out

    def _psi_dot(self, y, z):
        return self._dot(y, z)

    def _psi_3(self, y, z):
        R = self.rel("psi_dot", y, z)
        return _bool_compose(R, R.T)

    def machine_rows(self, which):
        if which == "S":
            if self._S_rows is None:
                self._S_rows = self.S.translation_rows(self.alg)
            return self._S_rows
        if self._T_rows is None:
            self._T_rows = self.T.translation_rows(self.alg)
        return self._T_rows

    def _psi_T(self, y, z):
        out = np.zeros((self.m, self.m), dtype=bool)
        pairs = self.T.pairs(self.machine_rows("T"), y, z, self.m) if self.T.depth else None
        if pairs is None:
            pairs = np.zeros((self.m, self.m), dtype=bool)
            pairs[y, z] = True
        for u, v in zip(*np.nonzero(pairs)):
            out |= self._dot(int(u), int(v))
        return out

    def _psi_4(self, y, z):
        R = self.rel("psi_T", y, z)
        return _bool_compose(R, R.T)

    def _psi(self, y, z):
        out = np.eye(self.m, dtype=bool)
        for p in PSI_PARTS:
            out |= self.rel(p, y, z)
        return out

    # -- Gamma relations: pairs (c, d) with Gamma_X(c, d, a, b)

    def _Gamma_1(self, a, b):
        out = np.zeros((self.m, self.m), dtype=bool)
        for mp in self.maps:
            out |= self.psi0(int(mp[a]), int(mp[b]))
        return out

    def _Gamma_dot(self, a, b):
        return self.P.pairs(self.PROD, a, b)

    def _Gamma_T(self, a, b):
        if not self.S.depth:
            out = np.zeros((self.m, self.m), dtype=bool)
            out[a, b] = True
            return out
        return self.S.pairs(self.machine_rows("S"), a, b, self.m)

    def _Gamma_I(self, a, b):
        return self.P.pairs(self.PROD, int(self.Imap[a]), int(self.Imap[b]))

    def _Gamma(self, a, b):
        out = np.zeros((self.m, self.m), dtype=bool)
        for g in GAMMA_PARTS:
            out |= self.rel(g, a, b)
        return out

    def orientations(self, a, b):
        """(a, b), (b, a), (a, a∧b), (b, a∧b): each generates a congruence
        below Cg(a, b), and one of them has its second entry below the first."""
        ab = int(self.MEET[a, b])
        out = []
        for p in ((a, b), (b, a), (a, ab), (b, ab)):
            if p not in out:
                out.append(p)
        return out

    def _Gamma_star(self, a, b):
        out = np.zeros((self.m, self.m), dtype=bool)
        for p in self.orientations(a, b):
            out |= self.rel("Gamma", *p)
        return out

    def _psi_star(self, y, z):
        return self.rel("psi", y, z) | self.rel("psi", z, y)

    # -- congruences

    def cg_rel(self, c, d):
        lab = principal_congruence(self.alg, c, d).labels
        return lab[:, None] == lab[None, :]

    def pi_psi(self, c, d, name="psi_star"):
        return bool(np.array_equal(self.rel(name, c, d), self.cg_rel(c, d)))


ALL_PSI = PSI1_PARTS + ["psi_1", "psi_2", "psi_dot", "psi_3", "psi_T", "psi_4", "psi"]


def pi_psi_semantic(alg, psi, c, d, sem=None, library=None, strategy=None, budget=None):
    """psi(-, -, c, d) defines Cg(c, d). `psi` is a library name (matrix
    semantics) or a formula with free variables w, x, y, z (brute force)."""
    c, d = alg.el(c), alg.el(d)
    lab = principal_congruence(alg, c, d).labels
    if isinstance(psi, str):
        sem = sem or Semantics(alg)
        return sem.pi_psi(c, d, psi)
    ev = Evaluator(alg, library, strategy, budget)
    for w in range(alg.size):
        for x in range(alg.size):
            if ev.holds(psi, {"w": w, "x": x, "y": c, "z": d}) != (lab[w] == lab[x]):
                return False
    return True


# ---- DPSC ------------------------------------------------------------------


@dataclass
class DpscWitness:
    a: int
    b: int
    c: int
    d: int
    source: str
    transcript: list = field(default_factory=list)


@dataclass
class DpscResult:
    ok: bool
    witnesses: list
    failures: list

    def lines(self, alg):
        out = []
        for wt in self.witnesses:
            L = alg.labels
            out.append(f"{L[wt.a]} {L[wt.b]} -> {L[wt.c]} {L[wt.d]} via {wt.source}")
        for a, b in self.failures:
            out.append(f"{alg.labels[a]} {alg.labels[b]} -> none")
        return out


def dpsc_check(alg, sem=None, guard=64, literal=False):
    """For every a != b, look for c != d with Gamma(c, d, a, b) such that psi
    defines Cg(c, d). Branches are tried in the order Gamma_1, Gamma_dot,
    Gamma_T, Gamma_I. By default both formulas are closed under the
    orientations of their generating pair; `literal` uses them as written."""
    if alg.size > guard:
        raise ValueError(f"algebra has {alg.size} elements, guard is {guard}")
    sem = sem or Semantics(alg)
    psi_name = "psi" if literal else "psi_star"
    good = {}
    witnesses, failures = [], []
    for a in range(alg.size):
        for b in range(alg.size):
            if a == b:
                continue
            found = None
            for p in ([(a, b)] if literal else sem.orientations(a, b)):
                for g in GAMMA_PARTS:
                    G = sem.rel(g, *p)
                    for c, d in zip(*np.nonzero(G)):
                        c, d = int(c), int(d)
                        if c == d:
                            continue
                        if (c, d) not in good:
                            good[(c, d)] = sem.pi_psi(c, d, psi_name)
                        if good[(c, d)]:
                            found = DpscWitness(a, b, c, d, g, [f"from {p}", psi_branch(sem, c, d)])
                            break
                    if found:
                        break
                if found:
                    break
            if found:
                witnesses.append(found)
            else:
                failures.append((a, b))
    return DpscResult(not failures, witnesses, failures)


def psi_soundness(alg, sem=None, names=None):
    """Instances of psi_X(r, s, c, d) with (r, s) outside Cg(c, d), as
    (name, r, s, c, d), together with the number of pairs (c, d) checked and
    per-name counts of nontrivial true instances."""
    sem = sem or Semantics(alg)
    names = names or ALL_PSI + ["psi_star"]
    bad = []
    used = dict.fromkeys(names, 0)
    off = ~np.eye(sem.m, dtype=bool)
    for c in range(sem.m):
        for d in range(sem.m):
            cg = sem.cg_rel(c, d)
            for name in names:
                R = sem.rel(name, c, d)
                used[name] += int((R & off).sum())
                for r, s in zip(*np.nonzero(R & ~cg)):
                    bad.append((name, int(r), int(s), c, d))
    return bad, sem.m * sem.m, used


def psi_branch(sem, c, d):
    """Which of psi_2, psi_3, psi_4 contribute off-diagonal pairs of Cg(c, d)."""
    off = sem.cg_rel(c, d) & ~np.eye(sem.m, dtype=bool)
    if not off.any():
        return "identity"
    parts = [p for p in PSI_PARTS if (sem.rel(p, c, d) & off).any()]
    return "+".join(parts)


def zeta_holds(alg, sem=None):
    """The sentence saying any two nonzero principal congruences share a
    nonzero principal subcongruence cut out by Gamma and psi."""
    sem = sem or Semantics(alg)
    m = alg.size
    psi = {}

    def rels(a, b):
        G = sem.rel("Gamma_star", a, b)
        acc = np.zeros((m, m), dtype=bool)
        for c, d in zip(*np.nonzero(G)):
            key = (int(c), int(d))
            if key not in psi:
                psi[key] = sem.rel("psi_star", *key) & ~np.eye(m, dtype=bool)
            acc |= psi[key]
        return acc

    pairs = [(a, b) for a in range(m) for b in range(m) if a != b]
    R = {p: rels(*p) for p in pairs}
    return all((R[p] & R[q]).any() for p in pairs for q in pairs)


def dpsc_witness_jonsson(alg, a, b, guard=64):
    """The subcongruence pair produced by the Jonsson-term argument: pick a
    subdirect factor separating a and b of largest size, generate C from a,
    b, the parameters and a transversal of that factor, and return the pair
    generating the least congruence of C not below the factor's kernel."""
    a, b = alg.el(a), alg.el(b)
    if a == b:
        raise ValueError("a and b must differ")
    mbar = None
    for i in (0, 1, 2):
        mbar = in_class_Mi(alg, i)
        if mbar is not None:
            break
    if mbar is None:
        raise ValueError("algebra is in no class M_i")
    log = [f"parameters e_{i}({','.join(alg.labels[v] for v in mbar)})"]
    factors = si_congruences(alg, guard)
    sep = [th for th in factors if not th.related(a, b)]
    theta = max(sep, key=lambda th: (th.block_count(), -th.labels.sum()))
    log.append(f"factor of size {theta.block_count()}")
    reps = sorted(set(theta.labels.tolist()))
    C_set = generate_subuniverse(alg, [a, b, *mbar, *reps])
    C = subalgebra(alg, C_set)
    kern = Partition(theta.labels[C.embedding])
    mu = None
    for x in range(C.size):
        for y in range(x + 1, C.size):
            if kern.related(x, y):
                continue
            p = principal_congruence(C, x, y)
            mu = p if mu is None else mu.meet(p)
    if mu is None or mu <= kern:
        raise RuntimeError("no least congruence above the kernel")
    pair = None
    for x in range(C.size):
        for y in range(C.size):
            if x != y and principal_congruence(C, x, y) == mu:
                pair = (x, y)
                break
        if pair:
            break
    if pair is None:
        raise RuntimeError("least congruence is not principal")
    c, d = int(C.embedding[pair[0]]), int(C.embedding[pair[1]])
    if not principal_congruence(alg, a, b).related(c, d):
        raise RuntimeError("witness pair outside Cg(a, b)")
    log.append(f"|C| = {C.size}; alpha generated by ({alg.labels[c]}, {alg.labels[d]})")
    return DpscWitness(a, b, c, d, "jonsson", log)
