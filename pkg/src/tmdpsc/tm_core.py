"""Turing machines over the alphabet {0, 1}: parsing, stepping, and
interval-restricted reachability."""

from __future__ import annotations

from dataclasses import dataclass, field


class TMParseError(ValueError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(f"line {ln}: {msg}" for ln, msg in self.errors))


@dataclass(frozen=True)
class Instruction:
    state: int
    read: int
    write: int
    move: str  # "L" or "R"
    target: int

    def as_tuple(self):
        return (self.state, self.read, self.write, self.move, self.target)


@dataclass(frozen=True)
class TuringMachine:
    state_count: int
    instructions: tuple = ()
    _lookup: dict = field(default=None, compare=False, repr=False, hash=False)

    def __post_init__(self):
        errs = validate(self.state_count, self.instructions)
        if errs:
            raise TMParseError(errs)
        table = {(ins.state, ins.read): ins for ins in self.instructions}
        object.__setattr__(self, "_lookup", table)

    @property
    def n(self):
        """Largest state index."""
        return self.state_count - 1

    def instruction_for(self, state, bit):
        return self._lookup.get((state, bit))

    def to_text(self):
        lines = [f"states {self.state_count}"]
        lines += [f"{i.state} {i.read} {i.write} {i.move} {i.target}" for i in self.instructions]
        return "\n".join(lines) + "\n"


def validate(state_count, instructions):
    errs = []
    if state_count < 1:
        errs.append((0, "need at least one state"))
    seen = set()
    for k, ins in enumerate(instructions):
        ln = getattr(ins, "_line", k + 1)
        if ins.state == 0:
            errs.append((ln, "instruction from halting state"))
        for s in (ins.state, ins.target):
            if not 0 <= s < state_count:
                errs.append((ln, f"state {s} out of range"))
        if ins.read not in (0, 1) or ins.write not in (0, 1):
            errs.append((ln, "bits must be 0 or 1"))
        if ins.move not in ("L", "R"):
            errs.append((ln, "direction must be L or R"))
        key = (ins.state, ins.read)
        if key in seen:
            errs.append((ln, f"duplicate instruction for state {ins.state} reading {ins.read}"))
        seen.add(key)
    return errs


def parse_tm(text: str) -> TuringMachine:
    errors = []
    state_count = None
    raw = []
    for ln, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "states":
            if state_count is not None:
                errors.append((ln, "repeated states line"))
            elif len(parts) != 2 or not parts[1].isdigit():
                errors.append((ln, "expected 'states <count>'"))
            else:
                state_count = int(parts[1])
            continue
        if state_count is None:
            errors.append((ln, "instruction before 'states' line"))
            continue
        if len(parts) != 5:
            errors.append((ln, "expected '<s> <r> <w> <L|R> <t>'"))
            continue
        try:
            s, r, w, t = int(parts[0]), int(parts[1]), int(parts[2]), int(parts[4])
        except ValueError:
            errors.append((ln, "non-integer field"))
            continue
        raw.append((ln, Instruction(s, r, w, parts[3].upper(), t)))
    if state_count is None:
        errors.append((0, "missing 'states' line"))
    if errors:
        raise TMParseError(errors)
    for ln, ins in raw:
        object.__setattr__(ins, "_line", ln)
    errs = validate(state_count, [ins for _, ins in raw])
    if errs:
        raise TMParseError(errs)
    return TuringMachine(state_count, tuple(ins for _, ins in raw))


def machine(state_count, *instructions) -> TuringMachine:
    """Shorthand: machine(2, (1, 0, 1, "R", 0))."""
    return TuringMachine(state_count, tuple(Instruction(*i) for i in instructions))


class Configuration:
    """Tape (cells holding 1), head position, state. Immutable and hashable."""

    __slots__ = ("ones", "head", "state")

    def __init__(self, tape=(), head=0, state=1):
        if isinstance(tape, dict):
            ones = frozenset(k for k, v in tape.items() if v)
        else:
            ones = frozenset(tape)
        object.__setattr__(self, "ones", ones)
        object.__setattr__(self, "head", head)
        object.__setattr__(self, "state", state)

    def __setattr__(self, *a):
        raise AttributeError("Configuration is immutable")

    def read(self, pos=None):
        return 1 if (self.head if pos is None else pos) in self.ones else 0

    def _key(self):
        return (self.ones, self.head, self.state)

    def __eq__(self, other):
        return isinstance(other, Configuration) and self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def __repr__(self):
        return f"Configuration({sorted(self.ones)}, head={self.head}, state={self.state})"

    def to_text(self, lo=None, hi=None):
        if lo is None:
            cells = sorted(self.ones | {self.head})
            lo, hi = cells[0], cells[-1]
        bits = "".join(str(self.read(k)) for k in range(lo, hi + 1))
        return f"{self.state}@{self.head}:{lo}:{bits}"


def parse_configuration(text: str, lo: int = 0) -> Configuration:
    """`state@head:bits` (bits start at cell `lo`) or `state@head:lo:bits`."""
    try:
        st, rest = text.strip().split("@")
        parts = rest.split(":")
        head = int(parts[0])
        if len(parts) == 3:
            lo, bits = int(parts[1]), parts[2]
        elif len(parts) == 2:
            bits = parts[1]
        else:
            bits = ""
        ones = [lo + k for k, b in enumerate(bits) if b == "1"]
        if any(b not in "01" for b in bits):
            raise ValueError(bits)
        return Configuration(ones, head, int(st))
    except ValueError as exc:
        raise ValueError(f"bad configuration {text!r}") from exc


class Halted:
    """Result of stepping a configuration in the halting state."""

    def __init__(self, config):
        self.config = config

    def __repr__(self):
        return f"Halted({self.config!r})"

    def __eq__(self, other):
        return type(other) is type(self) and other.config == self.config

    def __hash__(self):
        return hash((type(self).__name__, self.config))


class Stuck(Halted):
    """No instruction matches (a partial machine, not a real halt)."""


def step(tm: TuringMachine, q: Configuration):
    if q.state == 0:
        return Halted(q)
    ins = tm.instruction_for(q.state, q.read())
    if ins is None:
        return Stuck(q)
    ones = set(q.ones)
    if ins.write:
        ones.add(q.head)
    else:
        ones.discard(q.head)
    head = q.head + (1 if ins.move == "R" else -1)
    return Configuration(ones, head, ins.target)


def run(tm: TuringMachine, q0: Configuration, max_steps: int):
    """Returns (trace, halted); halted means state 0 was reached."""
    if max_steps < 0:
        raise ValueError("max_steps must be >= 0")
    trace = [q0]
    q = q0
    for _ in range(max_steps):
        if q.state == 0:
            break
        nxt = step(tm, q)
        if isinstance(nxt, Halted):
            break
        q = nxt
        trace.append(q)
    return trace, trace[-1].state == 0


@dataclass(frozen=True)
class Interval:
    lo: int
    hi: int

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"empty interval [{self.lo},{self.hi}]")

    def __contains__(self, k):
        return self.lo <= k <= self.hi

    def __iter__(self):
        return iter(range(self.lo, self.hi + 1))

    def __len__(self):
        return self.hi - self.lo + 1

    def covers(self, other: "Interval"):
        return self.lo <= other.lo and other.hi <= self.hi


def in_omega(q: Configuration, N: Interval, window: Interval) -> bool:
    return q.head in N and all(k in window for k in q.ones)


def restricted_step(tm, q, N, window):
    """Successor inside the restricted space, or None."""
    nxt = step(tm, q)
    if isinstance(nxt, Halted) or not in_omega(nxt, N, window):
        return None
    return nxt


def omega(tm: TuringMachine, N: Interval, window: Interval):
    """All configurations with head in N and tape supported in window."""
    cells = list(window)
    out = []
    for state in range(tm.state_count):
        for head in N:
            for mask in range(1 << len(cells)):
                ones = [cells[k] for k in range(len(cells)) if mask >> k & 1]
                out.append(Configuration(ones, head, state))
    return out


def leq_N(tm, N: Interval, P: Configuration, Q: Configuration, window: Interval) -> bool:
    """P is reached from Q by steps staying in the restricted space."""
    if not window.covers(N):
        raise ValueError("window must contain N")
    if not (in_omega(P, N, window) and in_omega(Q, N, window)):
        return False
    seen = set()
    q = Q
    # deterministic machine: the forward orbit is a path, possibly ending in a cycle
    while q is not None and q not in seen:
        if q == P:
            return True
        seen.add(q)
        q = restricted_step(tm, q, N, window)
    return False


def forward_orbit(tm, N, window, Q):
    seen = []
    seen_set = set()
    q = Q
    while q is not None and q not in seen_set:
        seen.append(q)
        seen_set.add(q)
        q = restricted_step(tm, q, N, window)
    return seen
