"""Maltsev chains over finite algebras in the variety of A'(T): search,
verification, and the rewriting that brings a decreasing chain between
elements of an e_i image into one of seven canonical shapes.

Every rewrite is checked by evaluating its links at c and d; a rewrite
that does not reproduce its endpoints is never accepted.
"""

from __future__ import annotations

import random
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .formulas import E_WIDTH, S_NAME, Semantics, e_i, leq

# ---- polynomials ----------------------------------------------------------
#
# A unary polynomial is a tuple of steps applied innermost first. A step is
# (op name, args) where every None in args stands for the variable.


def step_from_translation(prov):
    op, pos, ctx = prov
    args = list(ctx)
    args.insert(pos, None)
    return (op, tuple(args))


def eval_poly(alg, poly, x):
    for op, args in poly:
        x = alg[op](*(x if a is None else a for a in args))
    return x


def poly_depth(poly):
    return len(poly)


def show_poly(alg, poly):
    t = "x"
    for op, args in poly:
        t = f"{op}(" + ",".join(t if a is None else alg.labels[a] for a in args) + ")"
    return t


def e_step(i, mbar):
    return (S_NAME[i], tuple(mbar) + (None, None, None))


# ---- chains ---------------------------------------------------------------


@dataclass
class Link:
    poly: tuple
    flip: bool = False  # True when poly sends (c, d) to (lower, upper)


@dataclass
class MaltsevChain:
    elements: list
    links: list

    @property
    def top(self):
        return self.elements[0]

    @property
    def bottom(self):
        return self.elements[-1]

    def __len__(self):
        return len(self.elements)

    def is_decreasing(self, alg):
        return all(leq(alg, b, a) and a != b for a, b in zip(self.elements, self.elements[1:]))

    def transcript(self, alg):
        out = []
        for k, lk in enumerate(self.links):
            out.append((alg.labels[self.elements[k]], alg.labels[self.elements[k + 1]], show_poly(alg, lk.poly)))
        return out


def verify_chain(alg, chain, c, d):
    if len(chain.links) != max(len(chain.elements) - 1, 0):
        return False
    for k, lk in enumerate(chain.links):
        u, v = eval_poly(alg, lk.poly, c), eval_poly(alg, lk.poly, d)
        if lk.flip:
            u, v = v, u
        if (u, v) != (chain.elements[k], chain.elements[k + 1]):
            return False
    return True


def pair_images(alg, c, d, depth):
    """{(p(c), p(d)): poly} over compositions of at most `depth` nonconstant
    translations, keeping the first poly found for each pair."""
    T, prov = alg.translations()
    seen = {(c, d): ()}
    level = [(c, d)]
    for _ in range(depth):
        nxt = []
        if not level:
            break
        us = np.array([p[0] for p in level])
        vs = np.array([p[1] for p in level])
        U, Vv = T[:, us], T[:, vs]
        for j, (u0, v0) in enumerate(level):
            base = seen[(u0, v0)]
            for r, (a, b) in enumerate(zip(U[:, j].tolist(), Vv[:, j].tolist())):
                if (a, b) not in seen:
                    seen[(a, b)] = base + (step_from_translation(prov[r]),)
                    nxt.append((a, b))
        level = nxt
    return seen


def find_maltsev_chain(alg, c, d, r, s, depth=2, length=4):
    """Shortest chain r = k_1, ..., k_n = s with n - 1 <= length whose links are
    images of {c, d} under polynomials of depth <= depth; None if none."""
    c, d, r, s = alg.el(c), alg.el(d), alg.el(r), alg.el(s)
    if r == s:
        return MaltsevChain([r], [])
    imgs = pair_images(alg, c, d, depth)
    adj = {}
    for (u, v), poly in imgs.items():
        if u == v:
            continue
        adj.setdefault(u, []).append((v, Link(poly, False)))
        adj.setdefault(v, []).append((u, Link(poly, True)))
    prev = {r: None}
    frontier = [r]
    for _ in range(length):
        nxt = []
        for u in frontier:
            for v, lk in adj.get(u, []):
                if v not in prev:
                    prev[v] = (u, lk)
                    nxt.append(v)
        frontier = nxt
        if s in prev:
            break
    if s not in prev:
        return None
    elems, links = [s], []
    while prev[elems[-1]] is not None:
        u, lk = prev[elems[-1]]
        elems.append(u)
        links.append(lk)
    chain = MaltsevChain(elems[::-1], links[::-1])
    assert verify_chain(alg, chain, c, d)
    return chain


def scheme_closure(alg, y, z, length, depth):
    """Relation of pairs joined by a chain of at most `length` links, each an
    image of {y, z} under a polynomial of depth <= depth."""
    m = alg.size
    E = np.zeros((m, m), dtype=bool)
    for u, v in pair_images(alg, y, z, depth):
        E[u, v] = E[v, u] = True
    R = np.eye(m, dtype=bool)
    for _ in range(length):
        R = R | ((R.astype(np.int32) @ E.astype(np.int32)) > 0)
    return R


def make_decreasing(alg, chain, c, d):
    """Two decreasing chains r -> t and s -> t with t the meet of all chain
    elements; link k is the original polynomial followed by a meet with the
    running meet t_k."""
    els = chain.elements
    if len(els) <= 1:
        e = els[0] if els else None
        return MaltsevChain([e], []), MaltsevChain([e], []), e

    def down(elems, links):
        ts = [elems[0]]
        for e in elems[1:]:
            ts.append(alg["meet"](ts[-1], e))
        out_e, out_l = [ts[0]], []
        for k, lk in enumerate(links):
            poly = lk.poly + (("meet", (None, ts[k])),)
            if ts[k + 1] != out_e[-1]:
                out_e.append(ts[k + 1])
                out_l.append(Link(poly, lk.flip))
        return MaltsevChain(out_e, out_l)

    first = down(els, chain.links)
    rev = [Link(lk.poly, not lk.flip) for lk in reversed(chain.links)]
    second = down(els[::-1], rev)
    assert first.bottom == second.bottom
    return first, second, first.bottom


def check_no_chain_needed(alg, c, d, f1, f2, sem=None):
    """With d <= c and e_i(n, c) = e_i(n, d) for all i and n, the three
    elements r = f1(c), t = f1(d) = f2(c), s = f2(d) satisfy r = t or t = s.
    Returns (ok, (r, t, s))."""
    c, d = alg.el(c), alg.el(d)
    if not leq(alg, d, c):
        raise ValueError("need d <= c")
    sem = sem or Semantics(alg)
    for mp in sem.maps:
        if mp[c] != mp[d]:
            raise ValueError("e_i separates c and d")
    r, t = eval_poly(alg, f1, c), eval_poly(alg, f1, d)
    t2, s = eval_poly(alg, f2, c), eval_poly(alg, f2, d)
    if t != t2:
        raise ValueError("f1(d) != f2(c)")
    return (r == t or t == s), (r, t, s)


# ---- link forms -------------------------------------------------------------


@dataclass
class LinkForm:
    """g(x) = f(head(p, q, h(x))) with head one of S_j, J, Jp, K."""

    shape: str
    head: str
    consts: tuple
    h: tuple
    f: tuple = ()

    def poly(self):
        return self.h + ((self.head, self.consts + (None,)),) + self.f


def _zero_absorbing(alg, poly):
    return eval_poly(alg, poly, alg.zero) == alg.zero


def head_normalize(alg, g, c, d, sem=None):
    """Rewrite g as S_j(n, p, q, h(x)) or f(F(p, q, h(x))) with F in J, Jp, K,
    agreeing with g at c and d. Raises ValueError when no shape verifies."""
    c, d = alg.el(c), alg.el(d)
    gc, gd = eval_poly(alg, g, c), eval_poly(alg, g, d)
    if gc == gd or not leq(alg, gd, gc):
        raise ValueError("need g(d) < g(c)")
    sem = sem or Semantics(alg)
    for k, mp in enumerate(sem.maps):
        if mp[gc] == gc and mp[gd] == gd:
            i, mbar, _ = sem.map_src[k]
            form = LinkForm("S", S_NAME[i], tuple(mbar) + (gc, gd), g + (e_step(i, mbar),))
            if _agrees(alg, form.poly(), c, d, gc, gd):
                return form
    # S_j(n, g(c), g(d), e_i(m, g(x))) for any stabilising (j, n) and (i, m)
    for k, mp in enumerate(sem.maps):
        for j, nbar, tab in sem.stab_src:
            if tab[gc, gd, mp[gc]] == gc and tab[gc, gd, mp[gd]] == gd:
                i, mbar, _ = sem.map_src[k]
                form = LinkForm("S", S_NAME[j], tuple(nbar) + (gc, gd), g + (e_step(i, mbar),))
                if _agrees(alg, form.poly(), c, d, gc, gd):
                    return form
    for k in range(len(g) - 1, -1, -1):
        op, args = g[k]
        if op in ("J", "Jp", "K") and args[2] is None and args[0] is not None and args[1] is not None:
            form = LinkForm({"J": "J", "Jp": "J'", "K": "K"}[op], op, args[:2], g[:k], g[k + 1:])
            if _agrees(alg, form.poly(), c, d, gc, gd):
                return form
    raise ValueError(f"no head shape for {show_poly(alg, g)}")


def _agrees(alg, poly, c, d, gc, gd):
    return eval_poly(alg, poly, c) == gc and eval_poly(alg, poly, d) == gd


# ---- typed links ----------------------------------------------------------------

PSI_OF = {
    "": None, "S": "psi_S", "J": "psi_J", "Jp": "psi_Jp", "JpJ": "psi_JpJ",
    "JS": "psi_JS", "JpS": "psi_JpS", "JpJS": "psi_JpJS",
}
TYPE_NAMES = {"": "trivial", "S": "S", "J": "J", "Jp": "J'", "JpJ": "J'-J",
              "JS": "J-S", "JpS": "J'-S", "JpJS": "J'-J-S"}


@dataclass
class Typed:
    kind: str  # S | J | Jp | JpJ
    top: int
    bottom: int
    witness: dict


class ChainCalculus:
    """Witness search and verification for the typed links, for fixed (c, d)."""

    def __init__(self, alg, c, d, sem=None):
        self.alg = alg
        self.c, self.d = alg.el(c), alg.el(d)
        self.sem = sem or Semantics(alg)
        s = self.sem
        self.RS = s.rel("psi_S", self.c, self.d)
        self.stats = Counter()
        self._alpha = None
        self._beta = None

    def s_range(self):
        """Mask of elements in the range of S_0, S_1 or S_2."""
        if not hasattr(self, "_s_range"):
            mask = np.zeros(self.alg.size, dtype=bool)
            for name in ("S0", "S1", "S2"):
                _, out = self.alg[name].support()
                mask[np.asarray(out, dtype=np.int64)] = True
            mask[self.alg.zero] = True
            self._s_range = mask
        return self._s_range

    # witnesses

    def s_witness(self, r, t):
        """(map k, stabiliser index) with r, t tied by psi_S."""
        s = self.sem
        P0 = s.psi0(self.c, self.d)
        for k, mp in enumerate(s.maps):
            if not (s.fix[k][self.c] and s.fix[k][self.d] and P0[mp[r], mp[t]]):
                continue
            for j, (_, _, tab) in enumerate(s.stab_src):
                if tab[r, t, mp[r]] == r and tab[r, t, mp[t]] == t:
                    return {"map": k, "stab": j}
        return None

    def check_s(self, r, t, w):
        s = self.sem
        k, j = w["map"], w["stab"]
        mp, tab = s.maps[k], s.stab_src[j][2]
        return (s.fix[k][self.c] and s.fix[k][self.d] and s.psi0(self.c, self.d)[mp[r], mp[t]]
                and tab[r, t, mp[r]] == r and tab[r, t, mp[t]] == t)

    def check_j(self, r, t, q):
        s = self.sem
        rp, tp = s.E2[r, q, r], s.E2[r, q, t]
        return bool(self.RS[rp, tp] and s.Jt[r, q, rp] == r and s.Jt[r, q, tp] == t)

    def j_witness(self, r, t, hints=()):
        for q in list(hints) + list(range(self.alg.size)):
            if self.check_j(r, t, q):
                return {"q": q}
        return None

    def check_jp(self, r, t, w):
        s = self.sem
        mp = s.maps[w["map"]]
        a, b = w["a"], w["b"]
        return bool(self.RS[mp[r], mp[t]] and s.Jpt[a, b, mp[r]] == r and s.Jpt[a, b, mp[t]] == t)

    def jp_witness(self, r, t):
        s = self.sem
        for k, mp in enumerate(s.maps):
            if not self.RS[mp[r], mp[t]]:
                continue
            ok = (s.Jpt[:, :, mp[r]] == r) & (s.Jpt[:, :, mp[t]] == t)
            hit = np.argwhere(ok)
            if len(hit):
                return {"map": k, "a": int(hit[0][0]), "b": int(hit[0][1])}
        return None

    def alpha_beta(self):
        if self._alpha is None:
            self._alpha = self.sem._alpha(self.c, self.d)
            self._beta = self.sem._beta(self.c, self.d)
        return self._alpha, self._beta

    def check_jpj(self, r, s, t):
        A, B = self.alpha_beta()
        return bool(A[r, s, t] and B[r, s, t])

    def jpj_witness(self, r, s, hints=()):
        A, B = self.alpha_beta()
        for t in list(hints) + list(range(self.alg.size)):
            if A[r, s, t] and B[r, s, t]:
                return {"t": t}
        return None

    def verify(self, tl):
        if tl.kind == "S":
            return self.check_s(tl.top, tl.bottom, tl.witness)
        if tl.kind == "J":
            return self.check_j(tl.top, tl.bottom, tl.witness["q"])
        if tl.kind == "Jp":
            return self.check_jp(tl.top, tl.bottom, tl.witness)
        if tl.kind == "JpJ":
            return self.check_jpj(tl.top, tl.bottom, tl.witness["t"])
        raise ValueError(tl.kind)

    def type_link(self, r, t, prefer=("J", "Jp")):
        for kind in prefer:
            w = self.j_witness(r, t) if kind == "J" else self.jp_witness(r, t)
            if w is not None:
                return Typed(kind, r, t, w)
        return None

    # rewrites

    def collapse_J_run(self, links):
        """A run of J links -> one J link, rho built as K(r, rho, q_k)."""
        r, s = links[0].top, links[-1].bottom
        if r == s:
            return Typed("J", r, s, {"q": r})
        rho = links[0].witness["q"]
        for tl in links[1:]:
            rho = self.alg["K"](r, rho, tl.witness["q"])
        if self.check_j(r, s, rho):
            self.stats["J-run template"] += 1
            return Typed("J", r, s, {"q": rho})
        self.stats["J-run search"] += 1
        w = self.j_witness(r, s)
        return Typed("J", r, s, w) if w else None

    def collapse_Jprime_run(self, links):
        """A run of J' links -> a J'-J pair through t = J'(r, a_1, e(s))."""
        r, s = links[0].top, links[-1].bottom
        if len(links) == 1:
            return links[0]
        w0 = links[0].witness
        t = int(self.sem.Jpt[r, w0["a"], self.sem.maps[w0["map"]][s]])
        if self.check_jpj(r, s, t):
            self.stats["J'-run template"] += 1
            return Typed("JpJ", r, s, {"t": t})
        self.stats["J'-run search"] += 1
        w = self.jpj_witness(r, s)
        return Typed("JpJ", r, s, w) if w else None

    def swap_J_Jprime(self, first, second):
        """J then J' -> J'-J with u = J'(r, K(r, q_1, a_2), e(s))."""
        r, s = first.top, second.bottom
        if first.top == first.bottom:
            return second
        q1 = first.witness["q"]
        w2 = second.witness
        rho = self.alg["K"](r, q1, w2["a"])
        u = int(self.sem.Jpt[r, rho, self.sem.maps[w2["map"]][s]])
        if self.check_jpj(r, s, u):
            self.stats["swap template"] += 1
            return Typed("JpJ", r, s, {"t": u})
        self.stats["swap search"] += 1
        w = self.jpj_witness(r, s, hints=(second.top,))
        return Typed("JpJ", r, s, w) if w else None

    def merge(self, x, y):
        """Two adjacent prefix links -> one, following the rewrite table."""
        kinds = (x.kind, y.kind)
        if kinds == ("J", "J"):
            return self.collapse_J_run([x, y])
        if kinds == ("Jp", "Jp"):
            return self.collapse_Jprime_run([x, y])
        if kinds == ("J", "Jp"):
            return self.swap_J_Jprime(x, y)
        # J'-J followed or preceded by more: the result is again J'-J
        r, s = x.top, y.bottom
        hint = x.bottom if x.kind == "Jp" else x.witness.get("t", x.bottom)
        self.stats["J'-J absorb"] += 1
        w = self.jpj_witness(r, s, hints=(hint,))
        if w is not None:
            return Typed("JpJ", r, s, w)
        if kinds == ("Jp", "J"):
            return None  # already canonical as two links
        return None


def rewrite_link(alg, form, c, d, calc=None):
    """A J, J' or K headed link -> typed J / J' links with the same
    endpoints. The constants of the stated constructions are tried first
    (K head: rho = K(r, p, q) then a J' step from t_1 = g_1(d)); witness
    search is the fallback."""
    c, d = alg.el(c), alg.el(d)
    calc = calc or ChainCalculus(alg, c, d)
    g = form.poly()
    r, s = eval_poly(alg, g, c), eval_poly(alg, g, d)
    if leq(alg, r, s) and r != s:
        r, s = s, r
    if r == s:
        return []
    p, q = form.consts[:2]
    out = None
    if form.head == "J":
        if calc.check_j(r, s, q):
            calc.stats["J head template"] += 1
            out = [Typed("J", r, s, {"q": q})]
    elif form.head == "Jp":
        a = p
        if form.f and len(form.f) == 1 and form.f[0][0] == "meet":
            u = [x for x in form.f[0][1] if x is not None][0]
            a = alg["meet"](p, u)
        for k in range(len(calc.sem.maps)):
            w = {"map": k, "a": a, "b": q}
            if calc.check_jp(r, s, w):
                calc.stats["J' head template"] += 1
                out = [Typed("Jp", r, s, w)]
                break
    elif form.head == "K":
        rho = alg["K"](r, p, q)
        hd = eval_poly(alg, form.h, d)
        t1 = alg["J"](r, rho, alg["S2"](r, rho, r, s, hd))
        if calc.check_j(r, t1, rho):
            w2 = calc.jp_witness(t1, s) if t1 != s else None
            if t1 == s:
                out = [Typed("J", r, s, {"q": rho})]
            elif w2 is not None:
                out = [Typed("J", r, t1, {"q": rho}), Typed("Jp", t1, s, w2)]
            if out:
                calc.stats["K head template"] += 1
    if out is None:
        calc.stats["link search"] += 1
        tl = calc.type_link(r, s)
        out = [tl] if tl else _subdivide(calc, r, s)
    if out is None:
        raise ReductionError(f"no J/J' links for {show_poly(alg, g)}")
    if out[0].top != r or out[-1].bottom != s or not all(calc.verify(tl) for tl in out):
        raise ReductionError("rewrite_link output fails verification")
    return out


@dataclass
class Reduction:
    type: str
    links: list
    witnesses: list
    trace: list = field(default_factory=list)

    @property
    def name(self):
        return TYPE_NAMES[self.type]


class ReductionError(RuntimeError):
    pass


def reduce_chain(alg, chain, c, d, sem=None, calc=None, cap=None, s_tail=True):
    """Bring a decreasing chain between elements related by Cg(c, d), with c
    and d in an e_i image, to one of the seven canonical types. Each rewrite
    is verified; the matching psi formula is checked on (r, s, c, d).
    s_tail=False types every link as J or J', exercising the rewrites."""
    c, d = alg.el(c), alg.el(d)
    calc = calc or ChainCalculus(alg, c, d, sem)
    sem = calc.sem
    els = chain.elements
    r, s = els[0], els[-1]
    trace = []
    if r == s:
        return Reduction("", [], [], ["trivial"])
    if not chain.is_decreasing(alg):
        raise ReductionError("chain is not decreasing")
    cap = cap or 4 * len(els)

    # S tail: from the first element in the range of some S_i; elements
    # above it are joined by J and J' links
    tail = None
    rng_S = calc.s_range()
    order = [k for k in range(len(els) - 1) if rng_S[els[k]]]
    order += [k for k in range(len(els) - 1) if k not in order]
    for k in (order if s_tail else []):
        w = calc.s_witness(els[k], s)
        if w is not None:
            tail = Typed("S", els[k], s, w)
            break
    stop = tail.top if tail else s
    cut = els.index(stop)
    if tail:
        trace.append(f"S tail from position {cut}")

    # type the prefix links, subdividing a link when it has no J/J' form
    prefix = []
    for a, b in zip(els[:cut], els[1:cut + 1]):
        tl = calc.type_link(a, b)
        if tl is None:
            mid = _subdivide(calc, a, b)
            if mid is None:
                raise ReductionError(f"link {alg.labels[a]} -> {alg.labels[b]} has no J/J' form")
            trace.append(f"subdivided at {alg.labels[mid[0].bottom]}")
            prefix.extend(mid)
        else:
            prefix.append(tl)
    for tl in prefix:
        if not calc.verify(tl):
            raise ReductionError("typed link fails verification")
    trace.append("word " + " ".join(tl.kind for tl in prefix))

    steps = 0
    while len(prefix) > 1 and not (len(prefix) == 2 and (prefix[0].kind, prefix[1].kind) == ("Jp", "J")):
        steps += 1
        if steps > cap:
            raise ReductionError("rewriting exceeded the iteration cap: " + "; ".join(trace))
        k = _pick(prefix)
        new = calc.merge(prefix[k], prefix[k + 1])
        if new is None or not calc.verify(new) or (new.top, new.bottom) != (prefix[k].top, prefix[k + 1].bottom):
            raise ReductionError(f"rewrite {prefix[k].kind}.{prefix[k + 1].kind} failed")
        trace.append(f"{prefix[k].kind}.{prefix[k + 1].kind} -> {new.kind}")
        prefix[k:k + 2] = [new]
    if len(prefix) == 2:
        new = calc.merge(prefix[0], prefix[1])
        if new is not None and calc.verify(new):
            trace.append("Jp.J -> JpJ")
            prefix = [new]
        else:
            raise ReductionError("J'.J pair has no J'-J witness")

    kind = (prefix[0].kind if prefix else "") + ("S" if tail else "")
    links = prefix + ([tail] if tail else [])
    psi = PSI_OF[kind]
    if not sem.rel(psi, c, d)[r, s]:
        raise ReductionError(f"{psi} does not hold on the endpoints")
    return Reduction(kind, links, [tl.witness for tl in links], trace)


def _pick(prefix):
    """Leftmost pair that the rewrite table merges."""
    for k in range(len(prefix) - 1):
        if (prefix[k].kind, prefix[k + 1].kind) != ("Jp", "J"):
            return k
    return 0


def _subdivide(calc, a, b):
    alg = calc.alg
    lab = calc.sem.cg_rel(calc.c, calc.d)
    for t in range(alg.size):
        if t in (a, b) or not lab[a, t] or not (leq(alg, t, a) and leq(alg, b, t)):
            continue
        x = calc.type_link(a, t)
        y = calc.type_link(t, b) if x else None
        if x and y:
            return [x, y]
    return None


# ---- random chains ---------------------------------------------------------------


def random_decreasing_chain(alg, c, d, rng, depth=3, length=5, imgs=None):
    """Random walk along strictly decreasing links {p(c), p(d)} with p of
    depth <= depth; at most `length` elements."""
    imgs = imgs if imgs is not None else pair_images(alg, c, d, depth)
    down = {}
    for (u, v), poly in imgs.items():
        if u == v:
            continue
        if leq(alg, v, u):
            down.setdefault(u, []).append((v, Link(poly, False)))
        elif leq(alg, u, v):
            down.setdefault(v, []).append((u, Link(poly, True)))
    if not down:
        return None
    starts = sorted(down)
    cur = rng.choice(starts)
    elems, links = [cur], []
    target = rng.randint(2, length)
    while len(elems) < target and cur in down:
        nxt, lk = rng.choice(down[cur])
        elems.append(nxt)
        links.append(lk)
        cur = nxt
    return MaltsevChain(elems, links)


def square_corpus(alg, count=40, cap=20, seed=0, min_size=4, tries=5000):
    """Distinct subalgebras of alg^2 with at most `cap` elements, each
    generated by a parameter pair over {0, 1, 2} and one or two random
    elements."""
    from .algebra_core import SizeGuardError, power_subalgebra

    rng = random.Random(seed)
    params = [alg.el(x) for x in ("0", "1", "2") if x in alg.index]
    seen = {}
    for _ in range(tries):
        if len(seen) >= count:
            break
        gens = [(rng.choice(params), rng.choice(params))]
        gens += [(rng.randrange(alg.size), rng.randrange(alg.size)) for _ in range(rng.choice([1, 2]))]
        try:
            P = power_subalgebra(alg, [0, 1], gens, cap=cap)
        except SizeGuardError:
            continue
        key = tuple(map(tuple, P.vectors.tolist()))
        if P.size >= min_size and key not in seen:
            P.name = f"<{';'.join(','.join(alg.labels[v] for v in g) for g in gens)}>"
            seen[key] = P
    return list(seen.values())


def image_pairs(sem):
    """Pairs (c, d), c != d, lying together in some e_i image."""
    out = set()
    for (img, _), mask in zip(sem.image_list, sem.in_image):
        for c in img:
            for d in img:
                if c != d:
                    out.add((c, d))
    return sorted(out)


@dataclass
class ChainRun:
    total: int = 0
    reduced: int = 0
    failures: list = field(default_factory=list)
    types: Counter = field(default_factory=Counter)
    stats: Counter = field(default_factory=Counter)
    transcripts: list = field(default_factory=list)


def chain_experiment(corpus, n_chains=1000, seed=0, depth=3, length=5, s_tail=True, keep=0):
    """Reduce random decreasing chains spread over the corpus and check the
    endpoint and psi invariants on each. The first `keep` reductions are
    recorded as transcripts."""
    rng = random.Random(seed)
    run = ChainRun()
    work = []
    for alg in corpus:
        sem = Semantics(alg)
        pairs = image_pairs(sem)
        if pairs:
            work.append((alg, sem, pairs))
    if not work:
        return run
    per = -(-n_chains // len(work))
    for alg, sem, pairs in work:
        cache = {}
        made = 0
        attempts = 0
        while made < per and attempts < 20 * per and run.total < n_chains:
            attempts += 1
            c, d = rng.choice(pairs)
            if (c, d) not in cache:
                cache[(c, d)] = (pair_images(alg, c, d, depth), ChainCalculus(alg, c, d, sem))
            imgs, calc = cache[(c, d)]
            ch = random_decreasing_chain(alg, c, d, rng, depth, length, imgs)
            if ch is None or len(ch) < 2:
                continue
            made += 1
            run.total += 1
            if not verify_chain(alg, ch, c, d):
                run.failures.append((alg.name, c, d, ch.elements, "chain does not verify"))
                continue
            try:
                red = reduce_chain(alg, ch, c, d, calc=calc, s_tail=s_tail)
            except ReductionError as exc:
                run.failures.append((alg.name, c, d, ch.elements, str(exc)))
                continue
            run.reduced += 1
            run.types[red.name] += 1
            if len(run.transcripts) < keep:
                run.transcripts.append({
                    "algebra": alg.name, "c": alg.labels[c], "d": alg.labels[d],
                    "links": [list(t) for t in ch.transcript(alg)],
                    "type": red.name, "rewrites": list(red.trace),
                })
        for calc in (v[1] for v in cache.values()):
            run.stats.update(calc.stats)
    return run


def e_image_check(alg, sem=None):
    """Every e_i(n, B) is downward closed in the meet order."""
    sem = sem or Semantics(alg)
    bad = []
    for img, _ in sem.images.items():
        S = set(img)
        for u in img:
            for v in range(alg.size):
                if v not in S and leq(alg, v, u):
                    bad.append((img, u, v))
    return bad


__all__ = [
    "ChainCalculus", "Link", "LinkForm", "MaltsevChain", "Reduction", "ReductionError",
    "chain_experiment", "check_no_chain_needed", "e_i", "e_image_check", "eval_poly",
    "find_maltsev_chain", "head_normalize", "make_decreasing", "pair_images",
    "random_decreasing_chain", "reduce_chain", "rewrite_link", "scheme_closure", "square_corpus",
    "verify_chain", "E_WIDTH",
]
