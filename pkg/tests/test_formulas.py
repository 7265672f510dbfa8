import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tmdpsc.algebra_core import (
    FiniteAlgebra,
    Operation,
    generated_subalgebra,
    power_subalgebra,
    principal_congruence,
)
from tmdpsc.chains import e_image_check
from tmdpsc.formulas import (
    ALL_PSI,
    GAMMA_PARTS,
    PSI1_PARTS,
    BudgetExceeded,
    Const,
    Evaluator,
    ProductTerms,
    Semantics,
    UnboundVariable,
    V,
    build_library,
    call,
    compute_machine_terms_ST,
    compute_product_terms_P,
    conj,
    disj,
    dpsc_check,
    dpsc_witness_jonsson,
    e_i,
    eq,
    eval_formula,
    exists,
    in_class_Mi,
    jonsson_check,
    pi_psi_semantic,
    psi_soundness,
    zeta_holds,
)
from tmdpsc.si_catalog import (
    build_sequential,
    build_small_si,
    find_machine_spec,
    theta_phi_quotient,
)
from tmdpsc.tm_core import Interval

from conftest import HALT2, LOOP

SMALL = ("TwoElt", "ThreeElt", "W")


@pytest.fixture(scope="module")
def B(A):
    """<1, C>, the least subalgebra containing 1 and C."""
    return generated_subalgebra(A, [A.el("1"), A.el("C")])


def test_eval_basics():
    two = build_small_si("TwoElt")
    assert eval_formula(two, eq(V("x"), V("x")), {"x": "C"})
    phi = exists("t", conj(eq(V("t"), V("a")), eq(V("t"), V("b"))))
    assert not eval_formula(two, phi, {"a": "0", "b": "C"})
    assert eval_formula(two, phi, {"a": "C", "b": "C"})
    with pytest.raises(UnboundVariable):
        eval_formula(two, phi, {"a": "C"})
    with pytest.raises(BudgetExceeded):
        eval_formula(two, exists("u", exists("v", eq(V("u"), V("w")))), {"w": "C"}, budget=1)


def test_e_i_examples(A):
    assert A.labels[e_i(A, 1, A.el("1"), "C")] == "C"
    assert e_i(A, 1, A.el("H"), "C") == 0
    assert A.labels[e_i(A, 2, (A.el("C"), A.el("~C")), "D")] == "D"
    with pytest.raises(ValueError):
        e_i(A, 2, A.el("C"), "D")


def test_in_class_Mi(A, B):
    assert A.labels[in_class_Mi(A, 1)[0]] == "1"
    mbar = in_class_Mi(B, 1)
    assert mbar is not None and B.labels[mbar[0]] == "1"
    one = FiniteAlgebra(["0"], [Operation(n, k, table=np.zeros((1,) * k)) for n, k in B.signature()])
    assert in_class_Mi(one, 1) == (0,)
    assert jonsson_check(one, (0,), 1) == (True, None)


def test_jonsson(B):
    assert jonsson_check(B, (B.index["1"],), 1) == (True, None)
    assert jonsson_check(B, (B.index["C(0,0,0)"],), 0) == (True, None)
    ok, ce = jonsson_check(B, (B.index["C"],), 1)
    assert not ok and ce[0].startswith("p")


def test_product_terms(A):
    assert compute_product_terms_P([build_sequential(3)]).N == 4
    assert compute_product_terms_P([build_small_si("TwoElt")]).N == 2
    with pytest.raises(ValueError):
        compute_product_terms_P([])
    assert ProductTerms(2).terms() == [("left", 0), ("left", 1), ("inner", 1)]


def test_machine_terms():
    S, T = compute_machine_terms_ST(LOOP, [build_small_si("W")])
    assert (S.depth, T.depth) == (0, 0) and "identity" in S.report
    Q = theta_phi_quotient(find_machine_spec(HALT2, Interval(0, 3)))
    S, T = compute_machine_terms_ST(HALT2, [Q])
    assert T.depth == 0 and S.depth == 4
    assert T.templates(["R(1,0,0)"]) == [()]
    with pytest.raises(ValueError):
        compute_machine_terms_ST(HALT2, [])


def test_library_shape():
    lib = build_library(build_small_si("TwoElt"))
    params, body = lib["psi_1"]
    assert params == ("w", "x", "y", "z") or list(params) == ["w", "x", "y", "z"]
    assert [p.name for p in body.parts] == PSI1_PARTS
    assert lib.dump("psi_2") == "(define (psi_2 w x y z) (exists t (and (psi_1 w t y z) (psi_1 x t y z))))"
    assert [p.name for p in lib["Gamma"][1].parts] == GAMMA_PARTS
    assert [getattr(p, "name", "=") for p in lib["psi"][1].parts] == ["=", "psi_2", "psi_3", "psi_4"]


@pytest.mark.parametrize("kind", SMALL)
def test_ast_matches_matrices(kind):
    alg = build_small_si(kind)
    sem = Semantics(alg)
    lib = build_library(alg, sem.P, sem.S, sem.T)
    ev = Evaluator(alg, lib, sem)
    m = alg.size
    for name in ALL_PSI + GAMMA_PARTS + ["Gamma", "Gamma_star", "psi_star"]:
        for y, z in itertools.product(range(m), repeat=2):
            R = sem.rel(name, y, z)
            for w, x in itertools.product(range(m), repeat=2):
                got = ev.holds(call(name, *(Const(v) for v in (w, x, y, z))), {})
                assert got == bool(R[w, x]), (name, w, x, y, z)


def test_ast_matches_matrices_sequential():
    alg = build_sequential(2, top=False)
    sem = Semantics(alg)
    lib = build_library(alg, sem.P, sem.S, sem.T)
    ev = Evaluator(alg, lib, sem)
    for name in ("psi_S", "psi_J", "psi_dot", "psi_3", "Gamma_dot", "psi_star"):
        for y, z, w, x in itertools.product(range(alg.size), repeat=4):
            got = ev.holds(call(name, *(Const(v) for v in (w, x, y, z))), {})
            assert got == bool(sem.rel(name, y, z)[w, x])


def test_zeta_ast_agrees():
    alg = build_small_si("TwoElt")
    sem = Semantics(alg)
    lib = build_library(alg, sem.P, sem.S, sem.T)
    assert Evaluator(alg, lib, sem).holds(call("zeta"), {}) == zeta_holds(alg, sem)


def test_soundness_corpus(corpus):
    for alg in corpus[:6]:
        bad, _, _ = psi_soundness(alg)
        assert bad == []


def test_soundness_small():
    for alg in [build_small_si(k) for k in SMALL] + [build_sequential(3), build_sequential(3, top=False)]:
        bad, _, used = psi_soundness(alg)
        assert bad == [] and used["psi_star"] > 0


def test_monotone(corpus):
    alg = corpus[0]
    sem = Semantics(alg)
    for y, z in itertools.product(range(alg.size), repeat=2):
        psi1 = sem.rel("psi_1", y, z)
        for name in PSI1_PARTS:
            assert not (sem.rel(name, y, z) & ~psi1).any()
        psi = sem.rel("psi", y, z)
        for name in ("psi_2", "psi_3", "psi_4"):
            assert not (sem.rel(name, y, z) & ~psi).any()
        assert not (psi & ~sem.rel("psi_star", y, z)).any()


def test_e_image_closure(corpus):
    for alg in corpus[:5]:
        assert e_image_check(alg) == []


def test_pi_psi_diagonal(corpus):
    alg = corpus[1]
    sem = Semantics(alg)
    for c in range(alg.size):
        assert sem.pi_psi(c, c)
        assert (sem.rel("psi_star", c, c) == np.eye(alg.size, dtype=bool)).all()


def test_pi_psi_semantic_two_element():
    two = build_small_si("TwoElt")
    psi = disj(eq(V("w"), V("x")), conj(eq(V("w"), V("y")), eq(V("x"), V("z"))),
               conj(eq(V("w"), V("z")), eq(V("x"), V("y"))))
    assert pi_psi_semantic(two, psi, 0, 1)
    assert pi_psi_semantic(two, psi, 1, 1)


def test_literal_psi_S_unsound(A):
    B = power_subalgebra(A, [0, 1], [(A.el("1"), A.el("1")), (A.el("M(0,0)"), A.el("D(1,0,0)"))])
    sem = Semantics(B)
    z, w = B.index["<0,0>"], B.index["<1,0>"]
    assert sem.rel("psi_S_literal", z, z)[w, z]
    assert principal_congruence(B, z, z).is_identity()
    assert not sem.rel("psi_S", z, z)[w, z]


def test_dpsc_small():
    for alg in [build_small_si(k) for k in SMALL] + [build_sequential(2), build_sequential(3)]:
        assert dpsc_check(alg).ok


def test_dpsc_B(B):
    res = dpsc_check(B)
    assert res.ok
    assert all(w.c != w.d for w in res.witnesses)
    assert len(res.lines(B)) == B.size * (B.size - 1)


def test_dpsc_literal_orientation(B):
    # taken literally, Gamma only reaches below the pair as ordered
    two = build_small_si("TwoElt")
    lit = dpsc_check(two, literal=True)
    assert not lit.ok and lit.failures == [(0, 1)]
    assert dpsc_check(B, literal=True).ok


def test_dpsc_one_element():
    one = FiniteAlgebra(["0"], [Operation(n, k, table=np.zeros((1,) * k, dtype=int))
                                for n, k in build_small_si("TwoElt").signature()])
    assert dpsc_check(one).ok


def test_jonsson_witness(A, B):
    w = dpsc_witness_jonsson(B, "C", "0")
    assert w.c != w.d
    cg = principal_congruence(B, "C", "0")
    assert cg.related(w.c, w.d)
    assert principal_congruence(B, w.c, w.d) <= cg
    with pytest.raises(ValueError):
        dpsc_witness_jonsson(B, "C", "C")


def test_jonsson_witness_square(A, B):
    els = [A.el(l) for l in B.labels]
    B2 = power_subalgebra(A, [0, 1], [(x, y) for x in els for y in els])
    assert B2.size == 36
    w = dpsc_witness_jonsson(B2, "<C,1>", "<0,1>")
    u, v = B2.vectors[w.c], B2.vectors[w.d]
    assert u[1] == v[1] and u[0] != v[0]


@settings(max_examples=15, deadline=None)
@given(st.data())
def test_soundness_random_pairs(corpus, data):
    alg = data.draw(st.sampled_from(corpus))
    sem = Semantics(alg)
    c = data.draw(st.integers(0, alg.size - 1))
    d = data.draw(st.integers(0, alg.size - 1))
    cg = sem.cg_rel(c, d)
    for name in ALL_PSI:
        assert not (sem.rel(name, c, d) & ~cg).any()
