import pytest
from hypothesis import given, settings, strategies as st

from tmdpsc.tm_core import (
    Configuration,
    Halted,
    Interval,
    Stuck,
    TMParseError,
    leq_N,
    machine,
    omega,
    parse_configuration,
    parse_tm,
    run,
    step,
)

from conftest import HALT1, LOOP


def test_parse_simple():
    tm = parse_tm("states 2\n1 0 1 R 0\n")
    assert tm.state_count == 2
    assert [i.as_tuple() for i in tm.instructions] == [(1, 0, 1, "R", 0)]


def test_parse_comments_and_roundtrip():
    tm = parse_tm("# a machine\nstates 3  # three\n1 0 1 R 2\n2 1 0 L 0\n")
    assert parse_tm(tm.to_text()) == tm


def test_parse_halting_source_reports_line():
    with pytest.raises(TMParseError) as exc:
        parse_tm("states 2\n1 0 1 R 0\n0 0 1 R 1\n")
    assert exc.value.errors[0][0] == 3
    assert "halting state" in str(exc.value)


@pytest.mark.parametrize("text", [
    "1 0 1 R 0\n",
    "states 2\n1 0 1 X 0\n",
    "states 2\n1 0 1 R 5\n",
    "states 2\n1 0 1 R\n",
    "states 2\n1 0 1 R 0\n1 0 0 L 1\n",
    "states x\n",
])
def test_parse_errors(text):
    with pytest.raises(TMParseError):
        parse_tm(text)


def test_empty_machine_is_valid():
    tm = parse_tm("states 2\n")
    trace, halted = run(tm, Configuration(), 5)
    assert trace == [Configuration()] and not halted
    assert isinstance(step(tm, Configuration()), Stuck)


def test_step_examples():
    q = step(HALT1, Configuration((), 0, 1))
    assert q == Configuration({0}, 1, 0)
    assert isinstance(step(HALT1, q), Halted)
    assert step(LOOP, Configuration((), 4, 1)) == Configuration((), 5, 1)


def test_run_examples():
    trace, halted = run(HALT1, Configuration((), 0, 1), 10)
    assert halted and len(trace) == 2
    trace, halted = run(LOOP, Configuration((), 0, 1), 1000)
    assert not halted and len(trace) == 1001
    q0 = Configuration((), 0, 0)
    assert run(HALT1, q0, 0) == ([q0], True)
    with pytest.raises(ValueError):
        run(HALT1, q0, -1)


def test_configuration_text():
    q = parse_configuration("1@2:0:0110")
    assert q == Configuration({1, 2}, 2, 1)
    assert parse_configuration(q.to_text()) == q
    assert parse_configuration("1@2:0110", lo=-1) == Configuration({0, 1}, 2, 1)
    with pytest.raises(ValueError):
        parse_configuration("1@2:0:01x0")


def test_leq_N_examples():
    N = Interval(0, 3)
    P = Configuration({0}, 1, 0)
    Q = Configuration((), 0, 1)
    assert leq_N(HALT1, N, Q, Q, N)
    assert leq_N(HALT1, N, P, Q, N)
    # the step from head 3 leaves N, so only Q3 itself is below Q3
    Q3 = Configuration((), 3, 1)
    assert [P for P in omega(HALT1, N, N) if leq_N(HALT1, N, P, Q3, N)] == [Q3]


tapes = st.frozensets(st.integers(-4, 4), max_size=5)
heads = st.integers(-3, 3)


@given(tapes, heads, st.integers(0, 1))
def test_step_deterministic(ones, head, state):
    tm = machine(2, (1, 0, 1, "R", 1), (1, 1, 0, "L", 0))
    q = Configuration(ones, head, state)
    assert step(tm, q) == step(tm, Configuration(set(ones), head, state))


@given(tapes, heads, st.integers(0, 30))
def test_run_leaves_unvisited_cells(ones, head, n):
    tm = machine(3, (1, 0, 1, "R", 2), (2, 0, 0, "L", 1), (1, 1, 0, "R", 1), (2, 1, 1, "R", 2))
    q0 = Configuration(ones, head, 1)
    trace, _ = run(tm, q0, n)
    visited = {q.head for q in trace[:-1]}
    for q in trace:
        for k in range(-8, 9):
            if k not in visited:
                assert q.read(k) == q0.read(k)


@settings(max_examples=30)
@given(st.data())
def test_leq_N_reflexive_transitive(data):
    tm = machine(2, (1, 0, 1, "R", 1), (1, 1, 0, "L", 1))
    N = Interval(0, 2)
    confs = sorted(omega(tm, N, N), key=lambda q: q.to_text(0, 2))
    P, Q, R = (data.draw(st.sampled_from(confs)) for _ in range(3))
    assert leq_N(tm, N, P, P, N)
    if leq_N(tm, N, P, Q, N) and leq_N(tm, N, Q, R, N):
        assert leq_N(tm, N, P, R, N)
