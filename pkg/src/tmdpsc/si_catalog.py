"""Subdirectly irreducible algebras in the variety of A'(T): the sequential
algebras S_n, machine algebras P_N/Theta_Phi, the three small ones, and the
finite-window version of the alpha/beta construction in a power of A'(T)."""

from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .algebra_core import (
    FiniteAlgebra,
    Operation,
    Partition,
    SizeGuardError,
    check_congruence,
    congruence_generated,
    generate_subuniverse,
    generated_subalgebra,
    is_isomorphic,
    monolith,
    vector_label,
    principal_congruence,
    quotient,
    si_congruences,
    subalgebra,
)
from .aprime import build_aprime
from .tm_core import (
    Configuration,
    Interval,
    TuringMachine,
    forward_orbit,
    machine,
    omega,
    parse_configuration,
    parse_tm,
    restricted_step,
    step,
    Halted,
)

# halting 1-instruction machine; any machine gives the same base signature
DEFAULT_TM = machine(2, (1, 0, 1, "R", 0))

_APRIME = {}


def aprime_for(tm=None, omit_K=False):
    """Cached A'(T)."""
    tm = tm or DEFAULT_TM
    key = (tm.to_text(), omit_K)
    if key not in _APRIME:
        _APRIME[key] = build_aprime(tm, omit_K=omit_K)
    return _APRIME[key]


def signature_for(tm=None, omit_K=False):
    return aprime_for(tm, omit_K).signature()


def _empty(arity):
    return (np.zeros((0, arity), dtype=np.int32), np.zeros(0, dtype=np.int32))


def _dense(m, arity, fn):
    grids = np.indices((m,) * arity).reshape(arity, -1)
    return fn(*grids).reshape((m,) * arity)


def _flat_meet(*xs):
    x = xs[0]
    same = np.ones(np.shape(x), dtype=bool)
    for y in xs[1:]:
        same &= x == y
    return np.where(same, x, 0)


def _semilattice_ops(signature, m, prod=None, extra=None):
    """Operations of an algebra where J = x∧y, J' = K = x∧y∧z, T = (w·x)∧(y·z),
    and everything not listed is identically 0 (index 0 must be zero)."""
    extra = extra or {}
    PROD = np.zeros((m, m), dtype=np.int64) if prod is None else prod
    ops = []
    for name, k in signature:
        if name in extra:
            ops.append(extra[name])
        elif name == "0":
            ops.append(Operation("0", 0, table=np.array(0)))
        elif name == "meet":
            ops.append(Operation(name, 2, table=_dense(m, 2, _flat_meet)))
        elif name == "prod":
            ops.append(Operation(name, 2, table=PROD))
        elif name == "J":
            ops.append(Operation(name, 3, table=_dense(m, 3, lambda x, y, z: _flat_meet(x, y))))
        elif name in ("Jp", "K"):
            ops.append(Operation(name, 3, table=_dense(m, 3, _flat_meet)))
        elif name == "T" and PROD.any():
            ops.append(Operation(name, 4, table=_dense(m, 4, lambda w, x, y, z: _flat_meet(PROD[w, x], PROD[y, z]))))
        else:
            ops.append(Operation(name, k, support=_empty(k)))
    return ops


# ---- sequential algebras ------------------------------------------------


def sequential_labels(n, top=True):
    labels = ["0"]
    for i in range(1, n + 1):
        if top or i < n:
            labels.append(f"a_{i}")
        labels.append(f"b_{i}")
    return labels


def build_sequential(n, tm=None, top=True):
    """S_n on {0, a_1, b_1, ..., a_n, b_n} with a_i·b_{i+1} = b_i.

    With top=False the element a_n is left out: it is not a factor of any
    nonzero product, so Cg(a_n, 0) = {a_n, 0} is a second atom and S_n itself
    is not subdirectly irreducible. The smaller algebra is."""
    if n < 1:
        raise ValueError("n must be >= 1")
    labels = sequential_labels(n, top)
    idx = {l: k for k, l in enumerate(labels)}
    m = len(labels)
    PROD = np.zeros((m, m), dtype=np.int64)
    for i in range(1, n):
        PROD[idx[f"a_{i}"], idx[f"b_{i + 1}"]] = idx[f"b_{i}"]
    ops = _semilattice_ops(signature_for(tm), m, PROD)
    alg = FiniteAlgebra(labels, ops, zero=0, name=f"S_{n}" if top else f"S_{n}^-")
    alg.tm = tm or DEFAULT_TM
    return alg


def sequential_embedding(Sm, Sn):
    """Index map S_m -> S_n shifting a_i, b_i to a_{i+k}, b_{i+k}, k = n - m;
    returns the map when it is an injective homomorphism, else None."""
    m_ = max(int(l.split("_")[1]) for l in Sm.labels if "_" in l)
    n_ = max(int(l.split("_")[1]) for l in Sn.labels if "_" in l)
    k = n_ - m_
    f = []
    for l in Sm.labels:
        if l == "0":
            f.append(Sn.index["0"])
        else:
            kind, i = l.split("_")
            target = f"{kind}_{int(i) + k}"
            if target not in Sn.index:
                return None
            f.append(Sn.index[target])
    f = np.array(f)
    for op in Sm.ops:
        o2 = Sn[op.name]
        if op.arity == 0:
            if f[int(op.table())] != int(o2.table()):
                return None
            continue
        grids = np.indices((Sm.size,) * op.arity).reshape(op.arity, -1)
        if not np.array_equal(f[op.evaluate(*grids)], o2.evaluate(*(f[g] for g in grids))):
            return None
    return f.tolist()


# ---- the three small SIs -------------------------------------------------


def build_small_si(kind, tm=None):
    """'TwoElt' = {0,C}, 'ThreeElt' = {0,H,M(1,0)}, 'W' = <H,C>/Cg(M(1,0),0)."""
    A = aprime_for(tm)
    if kind == "TwoElt":
        B = subalgebra(A, [0, A.el("C")], name="TwoElt")
    elif kind == "ThreeElt":
        B = generated_subalgebra(A, [A.el("H")], name="ThreeElt")
        if sorted(B.labels) != sorted(["0", "H", "M(1,0)"]):
            raise RuntimeError(f"<H> = {B.labels}")
    elif kind == "W":
        HC = generated_subalgebra(A, [A.el("H"), A.el("C")])
        theta = principal_congruence(HC, HC.index["M(1,0)"], HC.zero)
        B, _ = quotient(HC, theta, name="W")
        B.labels[B.zero] = "0"
        B.index = {l: i for i, l in enumerate(B.labels)}
    else:
        raise ValueError(f"unknown small SI {kind!r}")
    B.tm = A.tm
    return B


SMALL_KINDS = ("TwoElt", "ThreeElt", "W")
_SMALL = {}


def _small_ref(kind, tm):
    key = (kind, tm or DEFAULT_TM)
    if key not in _SMALL:
        _SMALL[key] = build_small_si(kind, tm)
    return _SMALL[key]


def e_identity_congruence(alg):
    """Least congruence theta with alg/theta satisfying e_i(y, x) = 0 for
    i = 0, 1, 2: generated by all pairs (e_i(y, x), 0)."""
    m = alg.size
    xs = np.arange(m)
    vals = set()
    for name in ("S0", "S1"):
        op = alg[name]
        u, x = np.meshgrid(xs, xs, indexing="ij")
        vals.update(op.evaluate(u, x, x, x).ravel().tolist())
    op = alg["S2"]
    u, v, x = np.meshgrid(xs, xs, xs, indexing="ij")
    vals.update(op.evaluate(u, v, x, x, x).ravel().tolist())
    vals.discard(alg.zero)
    return congruence_generated(alg, [(v, alg.zero) for v in sorted(vals)])


def satisfies_e_zero(alg):
    return e_identity_congruence(alg).is_identity()


def classify_small_si(alg, tm=None, guard=64):
    """(kind, reason) with kind one of TwoElt, ThreeElt, W or NotApplicable."""
    if alg.zero is None:
        return "NotApplicable", "no zero element"
    if not satisfies_e_zero(alg):
        return "NotApplicable", "e_i is not identically 0"
    if monolith(alg, guard) is None:
        return "NotApplicable", "not subdirectly irreducible"
    tm = tm or getattr(alg, "tm", None)
    hits = []
    for kind in SMALL_KINDS:
        ref = _small_ref(kind, tm)
        if ref.size == alg.size and is_isomorphic(alg, ref) is not None:
            hits.append(kind)
    if len(hits) == 1:
        return hits[0], "isomorphic"
    if not hits:
        return "NotApplicable", "no isomorph"
    return "NotApplicable", f"ambiguous: {hits}"


@dataclass
class SmallSurvey:
    subalgebras: int
    quotients: int
    kinds: Counter
    failures: list
    k_checked: int = 0
    k_violations: int = 0


def small_si_survey(tm=None, max_gens=2, guard=64):
    """Every SI quotient of every subalgebra of A'(T) generated by at most
    max_gens elements, after forcing e_i = 0, classified against the three
    small SIs. Anything unclassified is a failure. The K identities are
    checked on every quotient where S2 vanishes."""
    A = aprime_for(tm)
    subs = {}
    for k in range(1, max_gens + 1):
        for g in itertools.combinations(range(1, A.size), k):
            U = tuple(generate_subuniverse(A, list(g)))
            subs.setdefault(U, g)
    kinds = Counter()
    failures = []
    count = k_checked = k_bad = 0
    for U, g in subs.items():
        B = subalgebra(A, list(U))
        Q, _ = quotient(B, e_identity_congruence(B), check=False)
        if Q.size < 2:
            continue
        for theta in si_congruences(Q, guard):
            R, _ = quotient(Q, theta, check=False)
            count += 1
            applicable, bad = k_identities_hold(R)
            k_checked += applicable
            k_bad += len(bad)
            kind, why = classify_small_si(R, tm, guard)
            if kind in SMALL_KINDS:
                kinds[kind] += 1
            else:
                failures.append(([A.labels[x] for x in g], R.labels, why))
    return SmallSurvey(len(subs), count, kinds, failures, k_checked, k_bad)


def k_identities_hold(alg):
    """When S2 is identically 0, check J = x∧y and J' = K = x∧y∧z everywhere.
    Returns (applicable, violations)."""
    s2 = alg["S2"]
    if len(s2.support()[0]):
        return False, []
    m = alg.size
    x, y, z = np.indices((m, m, m)).reshape(3, -1)
    meet = alg["meet"]
    xy = meet.evaluate(x, y)
    xyz = meet.evaluate(xy, z)
    bad = []
    for name, want in (("J", xy), ("Jp", xyz), ("K", xyz)):
        if name not in alg.op_by_name:
            continue
        got = alg[name].evaluate(x, y, z)
        for k in np.nonzero(got != want)[0][:5].tolist():
            bad.append((name, (int(x[k]), int(y[k]), int(z[k])), int(got[k]), int(want[k])))
    return True, bad


# ---- machine algebras -----------------------------------------------------


@dataclass
class MachineSpec:
    tm: TuringMachine
    N: Interval
    window: Interval
    P: Configuration
    Phi: frozenset | None = None
    _orbits: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if not self.window.covers(self.N):
            raise ValueError("window must contain N")

    def omega(self):
        return omega(self.tm, self.N, self.window)

    def orbits(self):
        """Forward orbit (inside the restricted space) of every configuration."""
        if self._orbits is None:
            self._orbits = {q: forward_orbit(self.tm, self.N, self.window, q) for q in self.omega()}
        return self._orbits

    def reaches(self, Q, target):
        """target <=_N Q"""
        orb = self.orbits().get(Q)
        return orb is not None and target in orb

    def phi(self):
        return default_phi(self) if self.Phi is None else frozenset(self.Phi)


def default_phi(spec):
    """Configurations from which P is reachable and no halting configuration is."""
    out = set()
    for q, orb in spec.orbits().items():
        if spec.P in orb and not any(x.state == 0 for x in orb):
            out.add(q)
    return frozenset(out)


def parse_machine_spec(text, tm=None):
    """Lines `N lo hi`, `window lo hi`, `P state@head:bits`, any number of
    `phi state@head:bits`; everything else is the machine description
    (`states k` and instruction lines) unless `tm` is given. Tape bits start
    at the window's low end unless written `state@head:lo:bits`."""
    N = window = None
    phi = []
    rest = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        parts = line.split()
        if not parts:
            continue
        key = parts[0].lower()
        if key in ("n", "window"):
            if len(parts) != 3:
                raise ValueError(f"expected '{parts[0]} lo hi'")
            iv = Interval(int(parts[1]), int(parts[2]))
            if key == "n":
                N = iv
            else:
                window = iv
        elif key in ("p", "phi"):
            if len(parts) != 2:
                raise ValueError(f"expected '{parts[0]} state@head:bits'")
            phi.append((key, parts[1]))
        else:
            rest.append(raw)
    if N is None:
        raise ValueError("missing N line")
    window = window or N
    if tm is None:
        tm = parse_tm("\n".join(rest))
    confs = [(k, parse_configuration(t, lo=window.lo)) for k, t in phi]
    Ps = [q for k, q in confs if k == "p"]
    if len(Ps) != 1:
        raise ValueError("need exactly one P line")
    explicit = [q for k, q in confs if k == "phi"]
    return MachineSpec(tm, N, window, Ps[0], frozenset(explicit) if explicit else None)


def check_phi_conditions(spec):
    """{condition: (ok, detail)} for conditions 1-5 plus well-formedness."""
    Phi = spec.phi()
    Om = set(spec.omega())
    P = spec.P
    rep = {}

    def first(xs):
        xs = sorted(xs, key=lambda q: q.to_text(spec.window.lo, spec.window.hi))
        return "ok" if not xs else "counterexample " + xs[0].to_text(spec.window.lo, spec.window.hi)

    bad = [q for q in Phi if q not in Om]
    rep["wellformed"] = (not bad and P in Phi, first(bad) if bad else ("ok" if P in Phi else "P not in Phi"))
    bad = [q for q in Phi if q in Om and not spec.reaches(q, P)]
    rep["1"] = (not bad, first(bad))
    bad = []
    for q in Phi:
        t = restricted_step(spec.tm, q, spec.N, spec.window) if q in Om else None
        if t is not None and spec.reaches(t, P) and t not in Phi:
            bad.append(q)
    rep["2"] = (not bad, first(bad))
    bad = []
    for n in spec.N:
        q = Configuration((), n, 1)
        if q in Om and spec.reaches(q, P) and q not in Phi:
            bad.append(q)
    rep["3"] = (not bad, first(bad))
    bad = [q for q in Phi if q in Om and any(x.state == 0 for x in spec.orbits()[q])]
    rep["4"] = (not bad, first(bad))
    heads = {q.head for q in Phi}
    missing = [n for n in spec.N if n not in heads]
    ok5 = len(spec.N) > 1 and not missing
    rep["5"] = (ok5, "ok" if ok5 else ("|N| = 1" if len(spec.N) <= 1 else f"no element of Phi with head {missing[0]}"))
    return rep


def phi_conditions_pass(report):
    return all(ok for ok, _ in report.values())


def find_machine_spec(tm, N, window=None):
    """First P (in label order) whose default Phi passes conditions 1-5, as a
    MachineSpec, or None."""
    window = window or N
    probe = MachineSpec(tm, N, window, Configuration((), N.lo, 1))
    for P in sorted(probe.omega(), key=lambda q: config_label(q, window)):
        spec = MachineSpec(tm, N, window, P)
        if phi_conditions_pass(check_phi_conditions(spec)):
            return spec
    return None


def config_label(q, window):
    return q.to_text(window.lo, window.hi)


def build_machine_PN(spec):
    """P_N = {0} ∪ {a_n : n in N} ∪ Omega_N with the machine operations."""
    tm, N, window = spec.tm, spec.N, spec.window
    confs = spec.omega()
    labels = ["0"] + [f"a_{n}" for n in N] + [config_label(q, window) for q in confs]
    m = len(labels)
    a = {n: 1 + k for k, n in enumerate(N)}
    cidx = {q: 1 + len(N) + k for k, q in enumerate(confs)}

    ITAB = np.zeros(m, dtype=np.int64)
    if tm.state_count > 1:
        for n in N:
            q = Configuration((), n, 1)
            if q in cidx:
                ITAB[a[n]] = cidx[q]

    machine_support = {}
    for ins in tm.instructions:
        for t in (0, 1):
            rows = []
            for q in confs:
                if q.state != ins.state or q.read() != ins.read:
                    continue
                h = q.head
                lo, hi = (h - 1, h) if ins.move == "L" else (h, h + 1)
                new_head = lo if ins.move == "L" else hi
                if lo not in N or hi not in N or q.read(new_head) != t:
                    continue
                nxt = step(tm, q)
                if isinstance(nxt, Halted) or nxt not in cidx:
                    continue
                rows.append((a[lo], a[hi], cidx[q], cidx[nxt]))
            machine_support[f"{ins.move}({ins.state},{ins.read},{t})"] = np.array(rows, dtype=np.int64).reshape(-1, 4)

    extra = {}
    sig = signature_for(tm)
    for name, k in sig:
        if name == "I":
            extra[name] = Operation("I", 1, table=ITAB)
        elif name in machine_support:
            rows = machine_support[name]
            extra[name] = Operation(name, 3, support=(rows[:, :3], rows[:, 3]))
        elif name.startswith(("U1:", "U0:")):
            rows = machine_support[name[3:]]
            if name.startswith("U1:"):
                args = np.stack([rows[:, 0], rows[:, 1], rows[:, 1], rows[:, 2]], axis=1)
            else:
                args = np.stack([rows[:, 0], rows[:, 0], rows[:, 1], rows[:, 2]], axis=1)
            extra[name] = Operation(name, 4, support=(args, rows[:, 3]))
        elif name == "meet":
            nz = np.arange(1, m)
            extra[name] = Operation(name, 2, support=(np.stack([nz, nz], 1), nz))
        elif name == "J":
            nz = np.repeat(np.arange(1, m), m)
            zs = np.tile(np.arange(m), m - 1)
            extra[name] = Operation(name, 3, support=(np.stack([nz, nz, zs], 1), nz))
        elif name in ("Jp", "K"):
            nz = np.arange(1, m)
            extra[name] = Operation(name, 3, support=(np.stack([nz, nz, nz], 1), nz))
    ops = []
    for name, k in sig:
        if name in extra:
            ops.append(extra[name])
        elif k == 0:
            ops.append(Operation(name, 0, table=np.array(0)))
        else:
            ops.append(Operation(name, k, support=_empty(k)))
    alg = FiniteAlgebra(labels, ops, zero=0, name=f"P_[{N.lo},{N.hi}]")
    alg.tm = tm
    alg.config_index = cidx
    alg.a_index = a
    alg.spec = spec
    return alg


class PhiConditionError(ValueError):
    def __init__(self, report):
        self.report = report
        bad = [k for k, (ok, _) in report.items() if not ok]
        super().__init__("Phi conditions fail: " + ", ".join(f"({k}) {report[k][1]}" for k in bad))


def theta_phi_partition(spec, PN=None):
    PN = PN or build_machine_PN(spec)
    Phi = spec.phi()
    gamma = [0] + [i for q, i in PN.config_index.items() if q not in Phi]
    return Partition.from_blocks(PN.size, [gamma]), PN


def theta_phi_quotient(spec, check=True):
    """P_N / Theta_Phi after verifying conditions 1-5 and congruence-hood;
    raises PhiConditionError or NotACongruence."""
    if check:
        rep = check_phi_conditions(spec)
        if not phi_conditions_pass(rep):
            raise PhiConditionError(rep)
    theta, PN = theta_phi_partition(spec)
    check_congruence(PN, theta)
    Q, proj = quotient(PN, theta, name=f"P_[{spec.N.lo},{spec.N.hi}]/Theta", check=False)
    Q.labels[Q.zero] = "0"  # the zero class swallows every configuration outside Phi
    Q.index = {l: i for i, l in enumerate(Q.labels)}
    Q.tm = spec.tm
    Q.spec = spec
    Q.PN = PN
    Q.proj = proj
    return Q


def expected_monolith_class(spec):
    """Labels of {P, T(P), ...} ∩ Phi plus 0, from the simulator."""
    Phi = spec.phi()
    cls = ["0"]
    for q in forward_orbit(spec.tm, spec.N, spec.window, spec.P):
        if q not in Phi:
            break
        cls.append(config_label(q, spec.window))
    return sorted(set(cls))


def machine_monolith_report(Q, guard=None):
    mu = monolith(Q, guard=guard)
    if mu is None:
        return {"si": False}
    blocks = mu.nontrivial_blocks()
    got = sorted(Q.labels[x] for x in blocks[0]) if len(blocks) == 1 else None
    if got is not None:
        got = ["0" if l.startswith("{") else l for l in got]
        got = sorted(got)
    want = expected_monolith_class(Q.spec)
    return {"si": True, "blocks": len(blocks), "class": got, "expected": want, "match": got == want}


# ---- the window construction ----------------------------------------------


def alpha(A, n, window):
    return tuple(A.el("1") if k < n else A.el("H") if k == n else A.el("2") for k in window)


def beta(A, n, window):
    return tuple(A.el("C") if k < n else A.el("D") for k in window)


def encode_configuration(A, q, window):
    """C left of the head, M at the head, D right of it; superscripts are
    the state, the read bit, and the tape bit."""
    i, r = q.state, q.read()
    out = []
    for k in window:
        if k < q.head:
            out.append(A.C(i, r, q.read(k)))
        elif k == q.head:
            out.append(A.M(i, r))
        else:
            out.append(A.D(i, r, q.read(k)))
    return tuple(out)


def decode_vector(A, vec, window):
    """Configuration encoded by vec, or None."""
    els = [A.elements[v] for v in vec]
    heads = [k for k, e in zip(window, els) if e.kind == "M"]
    if len(heads) != 1 or any(e.bar or not e.indexed for e in els):
        return None
    h = heads[0]
    e_h = els[window.index(h)]
    i, r = e_h.i, e_h.r
    ones = [h] if r else []
    for k, e in zip(window, els):
        if k == h:
            continue
        want = "C" if k < h else "D"
        if e.kind != want or e.i != i or e.r != r:
            return None
        if e.s:
            ones.append(k)
    return Configuration(ones, h, i)


def _apply_pointwise(A, name, *vecs):
    op = A[name]
    return tuple(int(v) for v in op.evaluate(*(np.array(x) for x in vecs)))


def window_trace(tm, W, start, steps, A=None):
    """Drive the configuration element I(alpha_start) with machine operations
    in A'(T)^[-W,W] and compare each step with the simulator. Returns a list of
    (step, simulator config, decoded config, match)."""
    A = A or aprime_for(tm)
    window = list(range(-W, W + 1))
    vec = _apply_pointwise(A, "I", alpha(A, start, window))
    q = Configuration((), start, 1)
    rows = [(0, q, decode_vector(A, vec, window), decode_vector(A, vec, window) == q)]
    for k in range(1, steps + 1):
        ins = tm.instruction_for(q.state, q.read()) if q.state else None
        if ins is None:
            break
        nxt = step(tm, q)
        lo, hi = (q.head - 1, q.head) if ins.move == "L" else (q.head, q.head + 1)
        if lo < -W + 1 or hi > W - 1:
            break  # the generators alpha_n stop at the window edge
        t = nxt.read() if isinstance(nxt, Configuration) else 0
        name = f"{ins.move}({ins.state},{ins.read},{t})"
        vec = _apply_pointwise(A, name, alpha(A, lo, window), alpha(A, hi, window), vec)
        dec = decode_vector(A, vec, window)
        rows.append((k, nxt, dec, dec == nxt and encode_configuration(A, nxt, window) == vec))
        q = nxt
        if q.state == 0:
            break
    return rows


def _candidates_at(E, c, support, m, cap):
    """Index tuples into E whose coordinate-c values form a support row."""
    args, _ = support
    k = args.shape[1]
    col = E[:, c]
    present = np.zeros(m, dtype=bool)
    present[col] = True
    rows = args[present[args].all(axis=1)] if len(args) else args
    order = np.argsort(col, kind="stable")
    sv = col[order]
    starts = np.searchsorted(sv, np.arange(m), side="left")
    ends = np.searchsorted(sv, np.arange(m), side="right")
    found, total = [], 0
    for r in rows.tolist():
        lists = [order[starts[v]:ends[v]] for v in r]
        size = int(np.prod([len(l) for l in lists]))
        total += size
        if total > cap:
            raise SizeGuardError("too many candidate tuples; reduce W")
        grid = np.meshgrid(*lists, indexing="ij")
        found.append(np.stack([g.ravel() for g in grid], axis=1))
    if not found:
        return np.zeros((0, k), dtype=np.int64)
    return np.concatenate(found, axis=0)


def nowhere_zero_closure(A, window, gens, cap=20000, candidate_cap=20_000_000):
    """Subalgebra of A^window generated by gens, modulo the elements having a
    0 coordinate (all sent to the zero vector). Returns (algebra, vectors)."""
    w = len(window)
    zero = tuple([A.zero] * w)
    elems = [zero]
    pos = {zero: 0}
    for g in gens:
        g = tuple(A.el(x) for x in g)
        if 0 not in g and g not in pos:
            pos[g] = len(elems)
            elems.append(g)
    ops = [op for op in A.ops if op.arity > 0]
    tables = {}
    while True:
        E = np.array(elems, dtype=np.int64)
        before = len(elems)
        for op in ops:
            sup = op.support()
            # a nowhere-zero value needs a support row at every coordinate; use the sparsest one
            counts = []
            for c in range(w):
                present = np.zeros(A.size, dtype=bool)
                present[E[:, c]] = True
                counts.append(int(present[sup[0]].all(axis=1).sum()) if len(sup[0]) else 0)
            c = int(np.argmin(counts))
            cand = _candidates_at(E, c, sup, A.size, candidate_cap)
            if len(cand) == 0:
                tables[op.name] = (cand, np.zeros(0, dtype=np.int64))
                continue
            outs = np.stack([op.evaluate(*(E[cand[:, j], cc] for j in range(op.arity))) for cc in range(w)], axis=1)
            keep = (outs != A.zero).all(axis=1)
            cand, outs = cand[keep], outs[keep]
            idx = []
            for row in map(tuple, outs.tolist()):
                if row not in pos:
                    pos[row] = len(elems)
                    elems.append(row)
                    if len(elems) > cap:
                        raise SizeGuardError(f"more than {cap} nowhere-zero elements; reduce W")
                idx.append(pos[row])
            tables[op.name] = (cand, np.array(idx, dtype=np.int64))
        if len(elems) == before:
            break
    new_ops = []
    for op in A.ops:
        if op.arity == 0:
            new_ops.append(Operation(op.name, 0, table=np.array(0)))
        else:
            cand, idx = tables[op.name]
            new_ops.append(Operation(op.name, op.arity, support=(cand, idx)))
    labels = ["0"] + [vector_label(A, v) for v in elems[1:]]
    Q = FiniteAlgebra(labels, new_ops, zero=0, name=f"{A.name}^{w}/Gamma0")
    Q.vectors = np.array(elems, dtype=np.int64).reshape(len(elems), w)
    Q.window = list(window)
    Q.base = A
    return Q


def build_gamma_window(tm, W, cap=20000):
    """Generate from alpha_n, beta_n (|n| < W) inside A'(T)^[-W,W] with the
    elements having a 0 coordinate (Gamma_0) collapsed to 0. The full power
    closure is dominated by Gamma_0 and is not built. Returns (quotient,
    report); the report lists Sigma (nowhere-0 values of L, R and I), barred
    coordinates, the K check and the induced products."""
    if W < 2:
        raise ValueError("W must be >= 2")
    A = aprime_for(tm)
    window = list(range(-W, W + 1))
    gens = []
    for n in range(-W + 1, W):
        gens.append(alpha(A, n, window))
        gens.append(beta(A, n, window))
    Q = nowhere_zero_closure(A, window, gens, cap=cap)
    V = Q.vectors
    sigma = set()
    for op in Q.ops:
        if op.name == "I" or op.name in A.machine_ops:
            sigma.update(int(x) for x in op.support()[1].tolist())
    barred = [x for x in range(1, Q.size) if any(A.elements[v].bar for v in V[x])]
    configs = {}
    for x in range(1, Q.size):
        q = decode_vector(A, V[x], window)
        if q is not None:
            configs[Q.labels[x]] = q
    k_ok = True
    K = Q.op_by_name.get("K")
    if K is not None:
        args, out = K.support()
        for (x, y, z), v in zip(args.tolist(), out.tolist()):
            if x == 0 or y == 0:
                continue
            want = tuple(int(a) if a == b == c else 0 for a, b, c in zip(V[x], V[y], V[z]))
            if tuple(V[v].tolist()) != want:
                k_ok = False
                break
    prod = Q["prod"]
    args, out = prod.support()
    seq = [(Q.labels[x], Q.labels[y], Q.labels[v]) for (x, y), v in zip(args.tolist(), out.tolist())]
    report = {
        "window": [window[0], window[-1]],
        "size": Q.size,
        "generators": len(gens),
        "sigma": len(sigma),
        "configurations": len(configs),
        "barred_outside_gamma0": len(barred),
        "K_is_meet_off_gamma0": k_ok,
        "decoded": sorted(q.to_text(window[0], window[-1]) for q in configs.values()),
        "products": seq,
    }
    return Q, report
