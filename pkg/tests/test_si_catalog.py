import pytest

from tmdpsc.algebra_core import (
    is_isomorphic,
    is_si,
    monolith,
    principal_congruence,
)
from tmdpsc.si_catalog import (
    MachineSpec,
    PhiConditionError,
    alpha,
    beta,
    build_gamma_window,
    build_machine_PN,
    build_sequential,
    build_small_si,
    check_phi_conditions,
    classify_small_si,
    encode_configuration,
    expected_monolith_class,
    find_machine_spec,
    k_identities_hold,
    machine_monolith_report,
    parse_machine_spec,
    phi_conditions_pass,
    satisfies_e_zero,
    sequential_embedding,
    small_si_survey,
    theta_phi_quotient,
    window_trace,
)
from tmdpsc.tm_core import Configuration, Interval, omega

from conftest import HALT1, HALT2, LOOP


def blocks(alg, theta):
    return [sorted(alg.labels[x] for x in b) for b in theta.nontrivial_blocks()]


def test_sequential_products():
    S3 = build_sequential(3)
    assert S3.labels[S3.apply("prod", "a_1", "b_2")] == "b_1"
    assert S3.labels[S3.apply("prod", "a_2", "b_3")] == "b_2"
    assert S3.apply("prod", "a_1", "b_3") == 0
    S1 = build_sequential(1)
    assert not len(S1["prod"].support()[0]) and not len(S1["T"].support()[0])
    S2 = build_sequential(2)
    assert S2.labels[S2.apply("T", "a_1", "b_2", "a_1", "b_2")] == "b_1"


@pytest.mark.parametrize("n", range(1, 7))
def test_sequential_si(n):
    S = build_sequential(n, top=False)
    assert blocks(S, monolith(S)) == [["0", "b_1"]]
    assert S.size == 2 * n


@pytest.mark.parametrize("n", range(1, 6))
def test_sequential_with_top_not_si(n):
    S = build_sequential(n)
    assert S.size == 2 * n + 1
    assert not is_si(S)
    assert blocks(S, principal_congruence(S, f"a_{n}", "0")) == [["0", f"a_{n}"]]


@pytest.mark.parametrize("m,n", [(1, 3), (2, 3), (2, 5), (4, 4)])
def test_sequential_embedding(m, n):
    assert sequential_embedding(build_sequential(m), build_sequential(n)) is not None


def test_small_sis(A):
    W = build_small_si("W")
    assert W.size == 4
    assert W.labels[W.apply("T", "H", "C", "H", "C")] == "D"
    three = build_small_si("ThreeElt")
    assert three.labels[three.apply("I", "H")] == "M(1,0)"
    two = build_small_si("TwoElt")
    # on {0, C} the only nonzero operations are the meet and its J, J', K copies
    live = [op.name for op in two.ops if op.arity and len(op.support()[0])]
    assert live == ["meet", "J", "Jp", "K"]
    for kind in ("TwoElt", "ThreeElt", "W"):
        assert classify_small_si(build_small_si(kind)) == (kind, "isomorphic")
    with pytest.raises(ValueError):
        build_small_si("Five")


def test_classify_sequential():
    S2 = build_sequential(2, top=False)
    assert satisfies_e_zero(S2)
    # a_1·b_2 = b_1 is H·C = D under a_1 -> H, b_2 -> C, b_1 -> D
    assert classify_small_si(S2) == ("W", "isomorphic")
    assert classify_small_si(build_sequential(3, top=False)) == ("NotApplicable", "no isomorph")
    assert classify_small_si(build_sequential(2)) == ("NotApplicable", "not subdirectly irreducible")


def test_small_survey_one_generator():
    sv = small_si_survey(HALT1, max_gens=1)
    assert not sv.failures and sv.kinds["TwoElt"] and sv.kinds["ThreeElt"]


def test_k_identities():
    for alg in [build_small_si("W"), build_sequential(3, top=False)]:
        assert k_identities_hold(alg) == (True, [])


def spec(tm=LOOP, P="1@3:0:0000", N=(0, 3)):
    return parse_machine_spec(f"N {N[0]} {N[1]}\nP {P}\n", tm)


def test_parse_machine_spec():
    s = parse_machine_spec("states 2\n1 0 0 R 1\nN 0 3\nwindow 0 3\nP 1@3:0000\nphi 1@3:0000\n")
    assert s.tm == LOOP and s.N == Interval(0, 3) and s.P == Configuration((), 3, 1)
    assert s.phi() == {s.P}
    with pytest.raises(ValueError):
        parse_machine_spec("states 2\nP 1@0:0\n")


def test_machine_PN():
    s = spec()
    PN = build_machine_PN(s)
    assert PN.labels[PN.apply("I", "a_0")] == "1@0:0:0000"
    q = PN.index["1@3:0:0000"]
    assert PN.apply("R(1,0,0)", "a_3", "a_3", q) == 0  # leaves N
    q = PN.index["1@1:0:0000"]
    assert PN.labels[PN.apply("R(1,0,0)", "a_1", "a_2", q)] == "1@2:0:0000"
    assert PN.apply("Jp", q, q, q) == q


def test_phi_conditions():
    s = spec()
    assert phi_conditions_pass(check_phi_conditions(s))
    s5 = MachineSpec(LOOP, Interval(0, 0), Interval(0, 0), Configuration((), 0, 1))
    assert not check_phi_conditions(s5)["5"][0]
    h = spec(HALT2, "1@3:0:1110")
    halting = Configuration({0, 1, 2, 3}, 3, 0)
    bad = MachineSpec(h.tm, h.N, h.window, h.P, h.phi() | {halting})
    assert not check_phi_conditions(bad)["4"][0]
    with pytest.raises(PhiConditionError):
        theta_phi_quotient(bad)


def test_machine_quotient():
    for tm in (LOOP, HALT2):
        s = find_machine_spec(tm, Interval(0, 3))
        Q = theta_phi_quotient(s)
        rep = machine_monolith_report(Q)
        assert rep["si"] and rep["match"]
        assert k_identities_hold(Q) == (True, [])
    assert find_machine_spec(HALT1, Interval(0, 3)) is None


def test_expected_monolith_halting():
    s = find_machine_spec(HALT2, Interval(0, 3))
    assert expected_monolith_class(s) == ["0", s.P.to_text(0, 3)]


def test_quotient_by_empty_gamma_is_PN():
    s = spec()
    full = MachineSpec(s.tm, s.N, s.window, s.P, frozenset(omega(s.tm, s.N, s.window)))
    Q = theta_phi_quotient(full, check=False)
    assert is_isomorphic(Q, build_machine_PN(full), guard=None) is not None


def test_window_vectors(A):
    win = list(range(-3, 4))
    a = alpha(A, 0, win)
    assert [A.labels[x] for x in a] == ["1", "1", "1", "H", "2", "2", "2"]
    assert [A.labels[x] for x in beta(A, 0, win)] == ["C", "C", "C", "D", "D", "D", "D"]
    I = tuple(int(A["I"](x)) for x in a)
    assert [A.labels[x] for x in I] == ["C(1,0,0)"] * 3 + ["M(1,0)"] + ["D(1,0,0)"] * 3
    assert I == encode_configuration(A, Configuration((), 0, 1), win)
    b = alpha(A, 1, win)
    assert any(A["meet"](x, y) == 0 for x, y in zip(a, b))


def test_window_trace_loop():
    rows = window_trace(LOOP, 6, -5, 10)
    assert len(rows) == 11 and all(r[3] for r in rows)


def test_gamma_window():
    Q, rep = build_gamma_window(LOOP, 3)
    assert rep["barred_outside_gamma0"] == 0 and rep["K_is_meet_off_gamma0"]
    assert rep["configurations"] >= 3
    with pytest.raises(ValueError):
        build_gamma_window(LOOP, 1)
