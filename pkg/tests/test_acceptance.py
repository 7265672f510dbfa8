"""Acceptance criteria 1-11. Each test records one CRITERION line; the lines
are printed at the end of the pytest run, or directly when this file is run
as a script."""

import sys
import time

import pytest

from tmdpsc.algebra_core import monolith, principal_congruence, product_algebra
from tmdpsc.aprime import build_aprime, classify_zero_absorbing, compare_lattice_oracle
from tmdpsc.chains import chain_experiment, square_corpus
from tmdpsc.formulas import Semantics, dpsc_check, psi_soundness
from tmdpsc.si_catalog import (
    aprime_for,
    build_sequential,
    build_small_si,
    check_phi_conditions,
    find_machine_spec,
    k_identities_hold,
    machine_monolith_report,
    small_si_survey,
    theta_phi_quotient,
    window_trace,
)
from tmdpsc.tm_core import Interval, machine

HALT1 = machine(2, (1, 0, 1, "R", 0))
HALT2 = machine(2, (1, 0, 1, "R", 0), (1, 1, 1, "R", 1))
LOOP = machine(2, (1, 0, 0, "R", 1))
THREE = machine(3, (1, 0, 1, "R", 2), (2, 0, 1, "L", 1), (2, 1, 0, "R", 0))

RESULTS = {}
_cache = {}


def record(n, ok, detail, t0):
    RESULTS[n] = f"CRITERION {n} {'PASS' if ok else 'FAIL'} {detail} ({time.perf_counter() - t0:.1f}s)"
    return ok


def corpus():
    if "corpus" not in _cache:
        _cache["corpus"] = square_corpus(aprime_for(HALT1), 40, cap=20, seed=0)
    return _cache["corpus"]


def survey():
    if "survey" not in _cache:
        _cache["survey"] = small_si_survey(HALT1, max_gens=2)
    return _cache["survey"]


def machine_spec():
    if "spec" not in _cache:
        _cache["spec"] = find_machine_spec(HALT2, Interval(0, 3))
    return _cache["spec"]


def criterion_1():
    t0 = time.perf_counter()
    got = []
    for tm in (HALT1, HALT2, LOOP, THREE):
        A = build_aprime(tm)
        n, m = tm.n, len(tm.instructions)
        got.append((A.size, len(A.ops)) == (8 + 20 * (n + 1), 11 + 6 * m))
    dt = time.perf_counter() - t0
    return record(1, all(got) and dt < 4, f"4 machines exact, {dt / 4:.2f}s each", t0)


def criterion_2():
    t0 = time.perf_counter()
    rep = compare_lattice_oracle(aprime_for(HALT1), samples=10_000_000)
    bad = sum(v[1] for v in rep.values())
    ok = bad == 0 and rep["S2"][0] >= 10_000_000 and time.perf_counter() - t0 < 120
    return record(2, ok, " ".join(f"{k}={v[0]}" for k, v in rep.items()) + f" mismatches {bad}", t0)


EXPECTED_NON_ABSORBING = {"J": [3], "Jp": [3], "K": [3], "S0": [3, 4], "S1": [3, 4], "S2": [4, 5]}


def criterion_3():
    t0 = time.perf_counter()
    A = aprime_for(HALT1)
    rep, _ = classify_zero_absorbing(A)
    got = {name: [c for c, ab in coords.items() if not ab] for name, coords in rep.items()}
    got = {k: v for k, v in got.items() if v}
    return record(3, got == EXPECTED_NON_ABSORBING, f"non-absorbing {got}", t0)


def criterion_4():
    t0 = time.perf_counter()
    sv = survey()
    all3 = all(sv.kinds[k] for k in ("TwoElt", "ThreeElt", "W"))
    ok = not sv.failures and all3 and time.perf_counter() - t0 < 600
    kinds = " ".join(f"{k}={sv.kinds[k]}" for k in ("TwoElt", "ThreeElt", "W"))
    return record(4, ok, f"subalgebras {sv.subalgebras} si-quotients {sv.quotients} {kinds} unclassified {len(sv.failures)}", t0)


def criterion_5():
    # checked on the S_n without the top a_n (see the decisions ledger)
    t0 = time.perf_counter()
    ok = True
    for n in range(1, 6):
        S = build_sequential(n, HALT1, top=False)
        mu = monolith(S)
        blocks = mu.nontrivial_blocks() if mu is not None else []
        ok &= [sorted(S.labels[x] for x in b) for b in blocks] == [["0", "b_1"]]
        T = build_sequential(n, HALT1, top=True)
        ok &= monolith(T) is None
        cg = principal_congruence(T, T.el(f"a_{n}"), T.zero)
        ok &= [sorted(T.labels[x] for x in b) for b in cg.nontrivial_blocks()] == [["0", f"a_{n}"]]
    return record(5, ok, "n=1..5 monolith {0, b_1}", t0)


def criterion_6():
    t0 = time.perf_counter()
    algs = [build_small_si(k, HALT1) for k in ("TwoElt", "ThreeElt", "W")]
    algs += [build_sequential(n, HALT1, top=False) for n in range(1, 6)]
    algs.append(theta_phi_quotient(machine_spec()))
    checked = bad = 0
    for alg in algs:
        applicable, v = k_identities_hold(alg)
        checked += applicable
        bad += len(v)
    sv = survey()
    checked += sv.k_checked
    bad += sv.k_violations
    return record(6, bad == 0 and checked > 0, f"algebras with S2=0 checked {checked} violations {bad}", t0)


def criterion_7():
    t0 = time.perf_counter()
    spec = machine_spec()
    if spec is None:
        return record(7, False, "no valid P on [0,3]", t0)
    rep = check_phi_conditions(spec)
    Q = theta_phi_quotient(spec)
    mr = machine_monolith_report(Q)
    halting = [q for q in spec.omega() if q.state == 0]
    bad = type(spec)(spec.tm, spec.N, spec.window, spec.P, spec.phi() | {halting[0]})
    rejected = not check_phi_conditions(bad)["4"][0]
    ok = all(v[0] for v in rep.values()) and mr["si"] and mr.get("match", False) and rejected
    P = spec.P.to_text(spec.window.lo, spec.window.hi)
    return record(7, ok, f"P {P} quotient size {Q.size} SI {mr['si']} condition-4 violation rejected {rejected}", t0)


def criterion_8():
    t0 = time.perf_counter()
    rows = window_trace(LOOP, 6, -5, 10)
    ok = len(rows) >= 11 and all(r[3] for r in rows)
    return record(8, ok, f"W 6 steps matched {sum(1 for r in rows[1:] if r[3])}", t0)


def criterion_9():
    t0 = time.perf_counter()
    cs = corpus()
    sizes_ok = all(B.size <= 20 for B in cs)
    run = chain_experiment(cs, 1000, seed=0, depth=3, length=5)
    ok = sizes_ok and run.total >= 1000 and run.reduced == run.total and not run.failures
    types = " ".join(f"{k}={v}" for k, v in sorted(run.types.items()))
    return record(9, ok, f"corpus {len(cs)} chains {run.total} reduced {run.reduced} {types}", t0)


def criterion_10():
    t0 = time.perf_counter()
    bad = pairs = 0
    for alg in corpus():
        b, p, _ = psi_soundness(alg, Semantics(alg))
        bad += len(b)
        pairs += p
    return record(10, bad == 0, f"corpus {len(corpus())} pairs {pairs} violations {bad}", t0)


def criterion_11():
    t0 = time.perf_counter()
    base = [build_small_si(k, HALT1) for k in ("TwoElt", "ThreeElt", "W")]
    base += [build_sequential(2, HALT1), build_sequential(3, HALT1)]
    algs = list(base)
    for i, a in enumerate(base):
        for b in base[i:]:
            if a.size * b.size <= 12:
                algs.append(product_algebra(a, b))
    failed = [alg.name for alg in algs if not dpsc_check(alg).ok]
    return record(11, not failed, f"algebras {len(algs)} failed {failed or 'none'}", t0)


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
            criterion_7, criterion_8, criterion_9, criterion_10, criterion_11]


@pytest.mark.parametrize("fn", CRITERIA, ids=[f"criterion_{k}" for k in range(1, 12)])
def test_criterion(fn):
    assert fn(), RESULTS.get(int(fn.__name__.split("_")[1]))


if __name__ == "__main__":
    for fn in CRITERIA:
        fn()
        print(RESULTS[int(fn.__name__.split("_")[1])], flush=True)
    sys.exit(0 if all(" PASS " in line for line in RESULTS.values()) else 1)
