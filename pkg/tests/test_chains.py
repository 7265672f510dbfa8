import random

import pytest
from hypothesis import given, settings, strategies as st

from tmdpsc.chains import (
    ChainCalculus,
    LinkForm,
    MaltsevChain,
    ReductionError,
    chain_experiment,
    check_no_chain_needed,
    eval_poly,
    find_maltsev_chain,
    head_normalize,
    image_pairs,
    make_decreasing,
    pair_images,
    random_decreasing_chain,
    reduce_chain,
    rewrite_link,
    scheme_closure,
    verify_chain,
)
from tmdpsc.formulas import Semantics, leq
from tmdpsc.si_catalog import build_sequential


@pytest.fixture(scope="module")
def S3():
    return build_sequential(3)


@pytest.fixture(scope="module")
def setting(corpus):
    alg = corpus[0]
    sem = Semantics(alg)
    return alg, sem, image_pairs(sem)


def test_find_chain_sequential(S3):
    ch = find_maltsev_chain(S3, "b_2", "0", "b_1", "0")
    assert ch.transcript(S3) == [("b_1", "0", "prod(a_1,x)")]
    assert verify_chain(S3, ch, S3.el("b_2"), 0)
    assert len(find_maltsev_chain(S3, "b_2", "0", "b_2", "0").links) == 1
    assert find_maltsev_chain(S3, "b_2", "0", "a_1", "a_1").links == []
    # b_2 is not in Cg(b_1, 0)
    assert find_maltsev_chain(S3, "b_1", "0", "b_2", "0") is None


def test_verify_rejects_tampering(S3):
    ch = find_maltsev_chain(S3, "b_2", "0", "b_1", "0")
    bad = MaltsevChain([S3.el("b_2"), 0], ch.links)
    assert not verify_chain(S3, bad, S3.el("b_2"), 0)
    assert not verify_chain(S3, MaltsevChain([0, 0, 0], ch.links), S3.el("b_2"), 0)


def test_scheme_closure_matches_cg(S3):
    b2 = S3.el("b_2")
    R = scheme_closure(S3, b2, 0, length=3, depth=2)
    sem = Semantics(S3)
    assert (R == sem.cg_rel(b2, 0)).all()


def test_make_decreasing(setting):
    alg, _, pairs = setting
    rng = random.Random(3)
    seen = 0
    for c, d in pairs[:60]:
        imgs = pair_images(alg, c, d, 2)
        ch = random_decreasing_chain(alg, c, d, rng, imgs=imgs)
        if ch is None:
            continue
        first, second, t = make_decreasing(alg, ch, c, d)
        assert first.top == ch.top and second.top == ch.bottom
        assert first.bottom == second.bottom == t
        for half in (first, second):
            assert half.is_decreasing(alg) or len(half) == 1
            assert verify_chain(alg, half, c, d)
        seen += 1
    assert seen > 5


def test_make_decreasing_singleton(S3):
    first, second, t = make_decreasing(S3, MaltsevChain([3], []), 0, 1)
    assert (first.elements, second.elements, t) == ([3], [3], 3)


def test_no_chain_needed(S3):
    b2, b1 = S3.el("b_2"), S3.el("b_1")
    sem = Semantics(S3)
    with pytest.raises(ValueError):
        check_no_chain_needed(S3, 0, b1, (), (), sem)
    # e_i separates b_1 from 0 in S_3
    with pytest.raises(ValueError):
        check_no_chain_needed(S3, b1, 0, (), (), sem)
    with pytest.raises(ValueError):
        check_no_chain_needed(S3, b2, b1, (), (), sem)


def test_no_chain_needed_corpus(corpus):
    hits = 0
    for alg in corpus[8:10]:
        sem = Semantics(alg)
        for c in range(alg.size):
            for d in range(alg.size):
                if c == d or not leq(alg, d, c) or any(mp[c] != mp[d] for mp in sem.maps):
                    continue
                imgs = pair_images(alg, c, d, 2)
                by_c = {}
                for (u, _), f in imgs.items():
                    by_c.setdefault(u, []).append(f)
                for (_, v), f1 in imgs.items():
                    for f2 in by_c.get(v, []):
                        ok, _ = check_no_chain_needed(alg, c, d, f1, f2, sem)
                        assert ok
                        hits += 1
    assert hits == 18


def test_head_normalize(setting):
    alg, sem, pairs = setting
    done = 0
    for c, d in pairs:
        if not leq(alg, d, c):
            continue
        for p in range(alg.size):
            g = (("K", (p, c, None)),)
            gc, gd = eval_poly(alg, g, c), eval_poly(alg, g, d)
            if gc == gd or not leq(alg, gd, gc):
                continue
            form = head_normalize(alg, g, c, d, sem)
            assert eval_poly(alg, form.poly(), c) == gc
            assert eval_poly(alg, form.poly(), d) == gd
            done += 1
    assert done > 0
    c, d = pairs[0]
    with pytest.raises(ValueError):
        head_normalize(alg, (), d, d, sem)


def _nonconstant_forms(alg, c, d, head):
    for p in range(alg.size):
        for q in range(alg.size):
            form = LinkForm(head, head, (p, q), ())
            if eval_poly(alg, form.poly(), c) != eval_poly(alg, form.poly(), d):
                yield form


@pytest.mark.parametrize("head,kinds", [("Jp", ["Jp"]), ("K", ["J", "Jp"])])
def test_rewrite_link_templates(setting, head, kinds):
    alg, sem, pairs = setting
    n = 0
    for c, d in pairs:
        if not leq(alg, d, c):
            continue
        calc = ChainCalculus(alg, c, d, sem)
        for form in _nonconstant_forms(alg, c, d, head):
            out = rewrite_link(alg, form, c, d, calc)
            assert [t.kind for t in out] == kinds
            assert all(calc.verify(t) for t in out)
            n += 1
        if n:
            assert calc.stats[("J' head template" if head == "Jp" else "K head template")] == n
            break
    assert n > 0


def test_rewrite_link_constant(setting):
    alg, sem, pairs = setting
    c, d = pairs[0]
    form = LinkForm("J", "J", (c, c), (("meet", (None, 0)),))
    assert rewrite_link(alg, form, c, d) == []


def test_reduce_chain(setting):
    alg, sem, pairs = setting
    rng = random.Random(1)
    kinds = set()
    for c, d in pairs[:80]:
        calc = ChainCalculus(alg, c, d, sem)
        ch = random_decreasing_chain(alg, c, d, rng)
        if ch is None or len(ch) < 2:
            continue
        red = reduce_chain(alg, ch, c, d, calc=calc)
        assert red.type == "S"
        red2 = reduce_chain(alg, ch, c, d, calc=calc, s_tail=False)
        assert red2.type in ("J", "Jp", "JpJ")
        assert red2.links[0].top == ch.top and red2.links[-1].bottom == ch.bottom
        kinds.add(red2.type)
    assert kinds


def test_reduce_rejects_nondecreasing(setting):
    alg, sem, pairs = setting
    c, d = pairs[0]
    x = next(v for v in range(alg.size) if v != alg.zero)
    up = MaltsevChain([alg.zero, x], [])
    with pytest.raises(ReductionError):
        reduce_chain(alg, up, c, d, sem=sem)
    assert reduce_chain(alg, MaltsevChain([c], []), c, d, sem=sem).type == ""


def test_chain_experiment(corpus):
    run = chain_experiment(corpus[:3], n_chains=30, keep=2)
    assert run.total == 30 and run.reduced == 30 and not run.failures
    assert set(run.types) == {"S"}
    assert len(run.transcripts) == 2 and run.transcripts[0]["type"] == "S"
    run2 = chain_experiment(corpus[:3], n_chains=30, s_tail=False)
    assert run2.reduced == 30 and set(run2.types) <= {"J", "J'", "J'-J"}
    assert chain_experiment([], 10).total == 0


def test_chain_experiment_deterministic(corpus):
    a = chain_experiment(corpus[:2], n_chains=12, seed=5, keep=12)
    b = chain_experiment(corpus[:2], n_chains=12, seed=5, keep=12)
    assert a.transcripts == b.transcripts


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6))
def test_random_chains_reduce(setting, seed):
    alg, sem, pairs = setting
    rng = random.Random(seed)
    c, d = rng.choice(pairs)
    ch = random_decreasing_chain(alg, c, d, rng)
    if ch is None:
        return
    assert ch.is_decreasing(alg) or len(ch) == 1
    assert verify_chain(alg, ch, c, d)
    red = reduce_chain(alg, ch, c, d, sem=sem)
    assert sem.rel("psi_S", c, d)[ch.top, ch.bottom] or red.type == ""
