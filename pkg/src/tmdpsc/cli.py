"""Command-line front end: building algebras, congruence queries, machine
quotients, the window experiment, formula dumps and the check suite."""

from __future__ import annotations

import json
import re
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import click

from .algebra_core import (
    NotACongruence,
    SizeGuardError,
    from_json,
    is_si,
    monolith,
    principal_congruence,
    product_algebra,
    to_json,
)
from .aprime import build_aprime, classify_zero_absorbing, compare_lattice_oracle
from .chains import chain_experiment, square_corpus
from .formulas import Semantics, build_library, dpsc_check, psi_soundness
from .si_catalog import (
    DEFAULT_TM,
    PhiConditionError,
    aprime_for,
    build_sequential,
    build_gamma_window,
    build_small_si,
    check_phi_conditions,
    classify_small_si,
    find_machine_spec,
    k_identities_hold,
    machine_monolith_report,
    parse_machine_spec,
    small_si_survey,
    theta_phi_quotient,
    window_trace,
)
from .tm_core import Configuration, Interval, TMParseError, parse_configuration, parse_tm, run

LEVELS = ("quick", "full")


class InputError(click.ClickException):
    exit_code = 2


# ---- input helpers ----------------------------------------------------


def load_tm(path):
    if path is None:
        return DEFAULT_TM
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(str(exc)) from exc
    try:
        return parse_tm(text)
    except TMParseError as exc:
        raise InputError(f"{path}: {exc}") from exc


def resolve_algebra(name, tm=None):
    """A JSON file, `A` for A'(T), TwoElt, ThreeElt, W, `S<n>` (`S<n>-`
    without the top a_n), `machine:<spec file>`, or `X*Y` for a product."""
    if "*" in name:
        left, right = name.split("*", 1)
        return product_algebra(resolve_algebra(left, tm), resolve_algebra(right, tm))
    if name in ("A", "aprime"):
        return aprime_for(tm)
    if name in ("TwoElt", "ThreeElt", "W"):
        return build_small_si(name, tm)
    m = re.fullmatch(r"S_?(\d+)(-?)", name)
    if m:
        return build_sequential(int(m.group(1)), tm, top=not m.group(2))
    if name.startswith("machine:"):
        spec = load_spec(name[len("machine:"):], tm)
        try:
            return theta_phi_quotient(spec)
        except (PhiConditionError, NotACongruence) as exc:
            raise InputError(str(exc)) from exc
    p = Path(name)
    if p.suffix == ".json" and p.exists():
        try:
            return from_json(p.read_text())
        except (ValueError, KeyError) as exc:
            raise InputError(f"{name}: {exc}") from exc
    raise InputError(f"unknown algebra {name!r}")


def load_spec(path, tm=None):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(str(exc)) from exc
    try:
        return parse_machine_spec(text, tm)
    except TMParseError as exc:
        raise InputError(f"{path}: {exc}") from exc
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from exc


def element(alg, label):
    if label not in alg.index:
        raise InputError(f"unknown label {label!r} in {alg.name}")
    return alg.index[label]


def show_blocks(alg, part):
    return ["{" + ", ".join(alg.labels[x] for x in b) + "}" for b in part.nontrivial_blocks()]


# ---- suite ------------------------------------------------------------


@dataclass
class Check:
    id: str
    status: str  # PASS, FAIL or SKIP
    detail: str
    payload: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self):
        return f"CHECK {self.id} {self.status} {self.detail}"


def _ok(flag):
    return "PASS" if flag else "FAIL"


def check_counts(tm, level, seed, omit_K):
    A = build_aprime(tm, omit_K=omit_K)
    n, m = tm.n, len(tm.instructions)
    want = (8 + 20 * (n + 1), 11 + 6 * m - (1 if omit_K else 0))
    got = (A.size, len(A.ops))
    return [Check("counts", _ok(got == want), f"elements {got[0]} ops {got[1]} expected {want[0]} {want[1]}")]


def check_lattice_oracle(tm, level, seed, omit_K):
    A = aprime_for(tm)
    samples = 10_000_000 if level == "full" else 200_000
    rep = compare_lattice_oracle(A, samples=samples, seed=seed)
    bad = {k: v for k, v in rep.items() if v[1]}
    detail = " ".join(f"{k}={v[0]}" for k, v in rep.items())
    payload = {k: list(v[2]) for k, v in bad.items() if v[2] is not None}
    return [Check("lattice-oracle", _ok(not bad), detail if not bad else f"mismatch in {sorted(bad)}", payload)]


def expected_non_absorbing(name, arity):
    if name in ("S0", "S1", "S2"):
        return [arity - 1, arity]
    if name in ("J", "Jp", "K"):
        return [arity]
    return []


def check_zero_absorption(tm, level, seed, omit_K):
    A = aprime_for(tm)
    rep, _ = classify_zero_absorbing(A, seed=seed)
    diff = {}
    for name, coords in rep.items():
        got = [c for c, absorbing in coords.items() if not absorbing]
        want = expected_non_absorbing(name, A[name].arity)
        if got != want:
            diff[name] = {"got": got, "expected": want}
    shown = " ".join(f"{k}:{','.join(map(str, expected_non_absorbing(k, A[k].arity)))}"
                     for k in rep if expected_non_absorbing(k, A[k].arity))
    return [Check("zero-absorption", _ok(not diff), f"non-absorbing {shown}" if not diff else f"differs at {sorted(diff)}", diff)]


def check_small_si(tm, level, seed, omit_K):
    gens = 2 if level == "full" else 1
    sv = small_si_survey(tm, max_gens=gens)
    kinds = " ".join(f"{k}={sv.kinds[k]}" for k in ("TwoElt", "ThreeElt", "W"))
    out = [Check("small-si", _ok(not sv.failures),
                 f"gens<={gens} subalgebras {sv.subalgebras} si-quotients {sv.quotients} {kinds}",
                 {"failures": [list(map(str, f)) for f in sv.failures[:5]]})]
    if gens == 2:
        all3 = all(sv.kinds[k] for k in ("TwoElt", "ThreeElt", "W"))
        out.append(Check("small-si-all-arise", _ok(all3), kinds))
    return out


def check_sequential(tm, level, seed, omit_K):
    out = []
    for n in range(1, 6 if level == "full" else 4):
        S = build_sequential(n, tm, top=False)
        mu = monolith(S)
        blocks = show_blocks(S, mu) if mu is not None else []
        ok = blocks == ["{0, b_1}"]
        out.append(Check(f"sequential-{n}", _ok(ok), f"{S.name} size {S.size} monolith {' '.join(blocks) or 'none'}"))
        T = build_sequential(n, tm, top=True)
        cg = principal_congruence(T, T.index[f"a_{n}"], T.zero)
        split = not is_si(T) and show_blocks(T, cg) == [f"{{0, a_{n}}}"]
        out.append(Check(f"sequential-{n}-top", _ok(split), f"{T.name} not SI, Cg(a_{n},0) = {' '.join(show_blocks(T, cg))}"))
    return out


def _spec_for(tm):
    return find_machine_spec(tm, Interval(0, 3))


def check_k_identities(tm, level, seed, omit_K):
    algs = [build_small_si(k, tm) for k in ("TwoElt", "ThreeElt", "W")]
    algs += [build_sequential(n, tm, top=False) for n in range(1, 6 if level == "full" else 4)]
    spec = _spec_for(tm)
    if spec is not None:
        algs.append(theta_phi_quotient(spec))
    out = []
    for alg in algs:
        applicable, bad = k_identities_hold(alg)
        status = "SKIP" if not applicable else _ok(not bad)
        out.append(Check(f"k-identities-{alg.name}", status, f"violations {len(bad)}" if applicable else "S2 not identically 0"))
    return out


def check_machine(tm, level, seed, omit_K):
    spec = _spec_for(tm)
    if spec is None:
        return [Check("machine-quotient", "SKIP", "no P in [0,3] whose reachability Phi meets conditions 1-5")]
    P = spec.P.to_text(spec.window.lo, spec.window.hi)
    rep = check_phi_conditions(spec)
    out = [Check(f"phi-condition-{k}", _ok(ok), d) for k, (ok, d) in rep.items()]
    try:
        Q = theta_phi_quotient(spec)
    except (PhiConditionError, NotACongruence) as exc:
        out.append(Check("machine-quotient", "FAIL", str(exc)))
        return out
    mr = machine_monolith_report(Q)
    out.append(Check("machine-quotient", _ok(mr.get("match", False)),
                     f"P {P} size {Q.size} si {mr['si']} monolith {mr.get('class')}"))
    halting = [q for q in spec.omega() if q.state == 0]
    if halting:
        bad = type(spec)(spec.tm, spec.N, spec.window, spec.P, spec.phi() | {halting[0]})
        rejected = not check_phi_conditions(bad)["4"][0]
        out.append(Check("phi-condition-4-rejects", _ok(rejected), f"adding {halting[0].to_text(0, 3)}"))
    return out


def check_gamma(tm, level, seed, omit_K):
    # start at the left edge so a right-moving head has room for 10 steps
    rows = window_trace(tm, 6, -5, 10)
    good = sum(1 for r in rows[1:] if r[3]) if all(r[3] for r in rows) else 0
    halted = rows[-1][1].state == 0
    ok = all(r[3] for r in rows) and (len(rows) - 1 >= 10 or halted)
    return [Check("gamma-window", _ok(ok), f"W 6 start -5 steps matched {good}{' (halted)' if halted else ''}")]


def check_gamma_closure(tm, level, seed, omit_K):
    if level != "full":
        return []
    W = 4
    Q, rep = build_gamma_window(tm, W)
    reach = set()
    for n in range(-W + 1, W):
        trace, _ = run(tm, Configuration((), n, 1), 4 * W)
        reach.update(q.to_text(-W, W) for q in trace if -W < q.head < W)
    stray = [q for q in rep["decoded"] if q not in reach]
    ok = rep["barred_outside_gamma0"] == 0 and rep["K_is_meet_off_gamma0"] and not stray
    return [Check("gamma-closure", _ok(ok),
                  f"W {W} size {rep['size']} configurations {rep['configurations']} unreachable {len(stray)}",
                  {"stray": stray[:5]})]


def small_algebras(tm, level):
    base = [build_small_si(k, tm) for k in ("TwoElt", "ThreeElt", "W")]
    base += [build_sequential(2, tm), build_sequential(3, tm)]
    if level != "full":
        return base
    prods = []
    for i, a in enumerate(base):
        for b in base[i:]:
            if a.size * b.size <= 12:
                prods.append(product_algebra(a, b))
    return base + prods


def check_dpsc(tm, level, seed, omit_K):
    out = []
    for alg in small_algebras(tm, level):
        res = dpsc_check(alg)
        detail = f"pairs {len(res.witnesses) + len(res.failures)} failures {len(res.failures)}"
        out.append(Check(f"dpsc-{alg.name}", _ok(res.ok), detail, {"failures": res.lines(alg)[len(res.witnesses):][:5]}))
    return out


def _corpus(tm, level, seed):
    return square_corpus(aprime_for(tm), 40 if level == "full" else 10, seed=seed)


def check_chains(tm, level, seed, omit_K, keep=0):
    corpus = _corpus(tm, level, seed)
    n = 1000 if level == "full" else 100
    run_ = chain_experiment(corpus, n, seed=seed, keep=keep)
    types = " ".join(f"{k}={v}" for k, v in sorted(run_.types.items()))
    ok = run_.total >= n and run_.reduced == run_.total
    payload = {"failures": [list(map(str, f)) for f in run_.failures[:5]]}
    if keep:
        payload["transcripts"] = run_.transcripts
    return [Check("chains", _ok(ok), f"corpus {len(corpus)} chains {run_.total} reduced {run_.reduced} {types}", payload)]


def check_soundness(tm, level, seed, omit_K):
    corpus = _corpus(tm, level, seed)
    bad, pairs = [], 0
    for alg in corpus:
        b, p, _ = psi_soundness(alg, Semantics(alg))
        bad += [(alg.name,) + x for x in b]
        pairs += p
    return [Check("psi-soundness", _ok(not bad), f"corpus {len(corpus)} pairs {pairs} violations {len(bad)}",
                  {"first": list(map(str, bad[0])) if bad else None})]


SUITE = [
    ("counts", check_counts),
    ("lattice-oracle", check_lattice_oracle),
    ("zero-absorption", check_zero_absorption),
    ("small-si", check_small_si),
    ("sequential", check_sequential),
    ("k-identities", check_k_identities),
    ("machine", check_machine),
    ("gamma", check_gamma),
    ("gamma-closure", check_gamma_closure),
    ("dpsc", check_dpsc),
    ("chains", check_chains),
    ("soundness", check_soundness),
]


def _run_group(args):
    name, tm_text, level, seed, omit_K, trace = args
    tm = parse_tm(tm_text)
    fn = dict(SUITE)[name]
    t = time.perf_counter()
    res = fn(tm, level, seed, omit_K, keep=5) if trace and name == "chains" else fn(tm, level, seed, omit_K)
    dt = (time.perf_counter() - t) / max(len(res), 1)
    for c in res:
        c.seconds = round(dt, 3)
    return res


def run_suite(tm, level="quick", seed=0, omit_K=False, workers=1, only=None, trace=False):
    names = [n for n, _ in SUITE if not only or n in only]
    jobs = [(n, tm.to_text(), level, seed, omit_K, trace) for n in names]
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            groups = list(ex.map(_run_group, jobs))
    else:
        groups = [_run_group(j) for j in jobs]
    return [c for g in groups for c in g]


# ---- commands ---------------------------------------------------------


@click.group()
def main():
    """Finite algebras built from Turing machines."""


def emit_checks(checks, as_json, header, timing=False):
    if as_json:
        doc = {"header": header, "checks": []}
        for c in checks:
            d = asdict(c)
            if not timing:
                d.pop("seconds")
            doc["checks"].append(d)
        click.echo(json.dumps(doc, indent=2, sort_keys=True, default=str))
    else:
        click.echo("# " + " ".join(f"{k}={v}" for k, v in header.items()))
        for c in checks:
            click.echo(c.line() + (f" [{c.seconds}s]" if timing else ""))
    failed = any(c.status == "FAIL" for c in checks)
    sys.exit(1 if failed else 0)


@main.command()
@click.argument("tm_file")
@click.option("--out", type=click.Path(dir_okay=False), help="write the algebra as JSON")
@click.option("--omit-K", "omit_K", is_flag=True, help="leave the K operation out")
@click.option("--json", "as_json", is_flag=True)
def build(tm_file, out, omit_K, as_json):
    """Build A'(T) for a machine file."""
    tm = load_tm(tm_file)
    A = build_aprime(tm, omit_K=omit_K)
    if out:
        Path(out).write_text(json.dumps(to_json(A)))
    if as_json:
        click.echo(json.dumps({"labels": A.labels, "ops": [[op.name, op.arity] for op in A.ops]}))
        return
    click.echo(f"labels {A.size}")
    click.echo(f"ops {len(A.ops)}")
    for op in A.ops:
        click.echo(f"op {op.name} {op.arity}")


@main.command()
@click.argument("alg")
@click.argument("a")
@click.argument("b")
@click.option("--tm", "tm_file", help="machine file (default: halting 1-instruction machine)")
def cg(alg, a, b, tm_file):
    """Blocks of the congruence generated by (A, B)."""
    B = resolve_algebra(alg, load_tm(tm_file))
    theta = principal_congruence(B, element(B, a), element(B, b))
    if theta.is_identity():
        click.echo("identity")
    elif theta.is_full():
        click.echo(f"full ({B.size} elements in one block)")
    else:
        for line in show_blocks(B, theta):
            click.echo(line)


@main.command()
@click.argument("alg")
@click.option("--tm", "tm_file")
def si(alg, tm_file):
    """Monolith and small-SI classification."""
    tm = load_tm(tm_file)
    B = resolve_algebra(alg, tm)
    try:
        mu = monolith(B)
    except SizeGuardError as exc:
        raise InputError(str(exc)) from exc
    click.echo(f"algebra {B.name} size {B.size}")
    if mu is None:
        click.echo("si no")
        return
    click.echo("si yes")
    click.echo("monolith " + " ".join(show_blocks(B, mu)))
    kind, why = classify_small_si(B, tm)
    click.echo(f"small {kind} ({why})")


@main.command()
@click.argument("spec_file")
@click.option("--tm", "tm_file", help="machine file, when the spec has no instructions")
@click.option("--json", "as_json", is_flag=True)
def quotient(spec_file, tm_file, as_json):
    """Check the Phi conditions and build the machine quotient."""
    spec = load_spec(spec_file, load_tm(tm_file) if tm_file else None)
    rep = check_phi_conditions(spec)
    checks = [Check(f"phi-condition-{k}", _ok(ok), d) for k, (ok, d) in rep.items()]
    if all(ok for ok, _ in rep.values()):
        try:
            Q = theta_phi_quotient(spec, check=False)
            mr = machine_monolith_report(Q)
            checks.append(Check("congruence", "PASS", f"size {Q.size}"))
            checks.append(Check("si", _ok(mr["si"]), f"monolith {mr.get('class')}"))
            checks.append(Check("monolith", _ok(mr.get("match", False)), f"expected {mr.get('expected')}"))
        except NotACongruence as exc:
            checks.append(Check("congruence", "FAIL", str(exc)))
    emit_checks(checks, as_json, {"spec": spec_file, "N": f"{spec.N.lo},{spec.N.hi}"})


@main.command()
@click.argument("tm_file")
@click.option("--window", "W", default=6, show_default=True)
@click.option("--start", default=0, show_default=True)
@click.option("--steps", default=10, show_default=True)
@click.option("--json", "as_json", is_flag=True)
def gamma(tm_file, W, start, steps, as_json):
    """Drive a configuration element in A'(T)^[-W,W] against the simulator."""
    tm = load_tm(tm_file)
    if W < 2 or not -W < start < W:
        raise InputError("need W >= 2 and -W < start < W")
    rows = window_trace(tm, W, start, steps)
    checks = []
    for k, q, dec, ok in rows:
        shown = dec.to_text(-W, W) if dec is not None else "undecodable"
        checks.append(Check(f"step-{k}", _ok(ok), f"simulator {q.to_text(-W, W)} algebra {shown}"))
    emit_checks(checks, as_json, {"window": W, "start": start})


@main.command()
@click.argument("name", required=False)
@click.option("--alg", "alg_name", default="TwoElt", show_default=True)
@click.option("--tm", "tm_file")
@click.option("--check", "do_check", is_flag=True, help="run the DPSC check on the algebra")
@click.option("--json", "as_json", is_flag=True)
def formula(name, alg_name, tm_file, do_check, as_json):
    """Print a library formula, or list them; --check runs the DPSC check."""
    B = resolve_algebra(alg_name, load_tm(tm_file))
    if do_check:
        res = dpsc_check(B)
        checks = [Check(f"pair-{k}", "PASS", line) for k, line in enumerate(res.lines(B)[:len(res.witnesses)])]
        checks += [Check(f"pair-{B.labels[a]}-{B.labels[b]}", "FAIL", "no witness") for a, b in res.failures]
        emit_checks(checks, as_json, {"algebra": B.name})
    lib = build_library(B)
    if name is None:
        for n in lib.names:
            click.echo(n)
        return
    if name not in lib.formulas:
        raise InputError(f"unknown formula {name!r}")
    click.echo(lib.dump(name))


@main.command()
@click.argument("tm_file")
@click.option("--start", "start", default="1@0:0", show_default=True, help="state@head:bits")
@click.option("--steps", default=20, show_default=True)
def tm(tm_file, start, steps):
    """Run the simulator."""
    machine = load_tm(tm_file)
    try:
        q0 = parse_configuration(start)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    trace, halted = run(machine, q0, steps)
    for k, q in enumerate(trace):
        click.echo(f"{k} {q.to_text()}")
    click.echo("halted" if halted else "running")


@main.command()
@click.argument("tm_file")
@click.option("--level", type=click.Choice(LEVELS), default="quick", show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--workers", default=1, show_default=True)
@click.option("--omit-K", "omit_K", is_flag=True)
@click.option("--only", multiple=True, type=click.Choice([n for n, _ in SUITE]))
@click.option("--trace", is_flag=True, help="include chain transcripts (JSON)")
@click.option("--timing", is_flag=True, help="add timings (the report is then not reproducible)")
@click.option("--json", "as_json", is_flag=True)
def suite(tm_file, level, seed, workers, omit_K, only, trace, timing, as_json):
    """Run the check suite against a machine."""
    machine = load_tm(tm_file)
    checks = run_suite(machine, level, seed, omit_K, workers, set(only), trace)
    header = {"machine": tm_file, "level": level, "seed": seed}
    if trace and not as_json:
        for c in checks:
            for t in c.payload.get("transcripts", []):
                click.echo(f"# chain {t['algebra']} c={t['c']} d={t['d']} type {t['type']}")
                for upper, lower, head in t["links"]:
                    click.echo(f"#   {upper} > {lower} by {head}")
    emit_checks(checks, as_json, header, timing)


if __name__ == "__main__":
    main()
