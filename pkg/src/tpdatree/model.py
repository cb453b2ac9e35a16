"""Timed automata and timed pushdown automata: types, text format, validation."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

INF = None  # upper bound of [a, inf)


@dataclass(frozen=True, order=True)
class Interval:
    low: int
    up: Optional[int] = INF

    def __post_init__(self):
        if self.low < 0 or (self.up is not None and self.up < self.low):
            raise ValueError(f"bad interval [{self.low},{self.up}]")

    def contains(self, v) -> bool:
        return v >= self.low and (self.up is None or v <= self.up)

    def __str__(self):
        return f"[{self.low},{'inf' if self.up is None else self.up}]"


@dataclass(frozen=True)
class StackOp:
    kind: str = "nop"  # nop | push | pop
    symbol: Optional[str] = None
    interval: Optional[Interval] = None

    def __str__(self):
        if self.kind == "push":
            return f"push({self.symbol})"
        if self.kind == "pop":
            return f"pop({self.symbol},{self.interval})"
        return "nop"


NOP = StackOp()


@dataclass(frozen=True)
class Transition:
    tid: int
    source: str
    target: str
    label: Optional[str]  # None is epsilon
    guard: tuple = ()  # ((clock, Interval), ...)
    resets: frozenset = frozenset()
    op: StackOp = NOP

    def guard_on(self, clock) -> Optional[Interval]:
        for x, iv in self.guard:
            if x == clock:
                return iv
        return None

    @property
    def is_push(self):
        return self.op.kind == "push"

    @property
    def is_pop(self):
        return self.op.kind == "pop"


@dataclass(frozen=True)
class TimedSystem:
    kind: str  # "ta" | "tpda"
    states: tuple
    initial: str
    finals: frozenset
    clocks: tuple
    stack: tuple = ()
    transitions: tuple = ()

    @property
    def sigma(self):
        return sorted({t.label for t in self.transitions if t.label is not None})


@dataclass(frozen=True)
class Constants:
    M: int
    T: int


class ParseError(Exception):
    def __init__(self, msg, line=0, col=0):
        super().__init__(f"line {line}, col {col}: {msg}" if line else msg)
        self.msg = msg
        self.line = line
        self.col = col


_IDENT = r"[A-Za-z_][A-Za-z0-9_.'-]*"
_NAT = r"\d+"


class _Scanner:
    def __init__(self, text, lineno, offset):
        self.s = text
        self.pos = 0
        self.lineno = lineno
        self.offset = offset

    def error(self, msg):
        raise ParseError(msg, self.lineno, self.offset + self.pos + 1)

    def ws(self):
        while self.pos < len(self.s) and self.s[self.pos].isspace():
            self.pos += 1

    def peek(self):
        self.ws()
        return self.s[self.pos] if self.pos < len(self.s) else ""

    def lit(self, token):
        self.ws()
        if not self.s.startswith(token, self.pos):
            self.error(f"expected '{token}'")
        self.pos += len(token)

    def match(self, pattern, what):
        self.ws()
        m = re.compile(pattern).match(self.s, self.pos)
        if not m:
            self.error(f"expected {what}")
        self.pos = m.end()
        return m.group(0)

    def ident(self):
        return self.match(_IDENT, "identifier")

    def interval(self):
        c = self.peek()
        if c == "(":
            self.error("open intervals unsupported")
        self.lit("[")
        low = int(self.match(_NAT, "natural number"))
        self.lit(",")
        if self.peek() == "i":
            self.lit("inf")
            up = INF
        else:
            up = int(self.match(_NAT, "natural number or inf"))
        c = self.peek()
        if c == ")":
            self.error("open intervals unsupported")
        self.lit("]")
        if up is not None and up < low:
            self.error(f"empty interval [{low},{up}]")
        return Interval(low, up)

    def done(self):
        self.ws()
        if self.pos != len(self.s):
            self.error("trailing input")


def _parse_trans(sc):
    src = sc.ident()
    dst = sc.ident()
    sc.lit("label=")
    label = sc.ident()
    label = None if label == "eps" else label
    sc.lit("guard=[")
    guard = []
    if sc.peek() != "]":
        while True:
            x = sc.ident()
            sc.lit("in")
            guard.append((x, sc.interval()))
            if sc.peek() == "&":
                sc.lit("&")
                continue
            break
    sc.lit("]")
    sc.lit("reset={")
    resets = []
    while sc.peek() not in ("}", ""):
        resets.append(sc.ident())
    sc.lit("}")
    sc.lit("op=")
    kind = sc.match(r"nop|push|pop", "nop, push or pop")
    if kind == "nop":
        op = NOP
    elif kind == "push":
        sc.lit("(")
        op = StackOp("push", sc.ident())
        sc.lit(")")
    else:
        sc.lit("(")
        sym = sc.ident()
        sc.lit(",")
        op = StackOp("pop", sym, sc.interval())
        sc.lit(")")
    sc.done()
    return src, dst, label, guard, resets, op


def parse_system(text: str) -> TimedSystem:
    kind = None
    clocks, stack, states = None, (), None
    initial, finals = None, None
    raw = []
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0]
        if not body.strip():
            continue
        offset = len(body) - len(body.lstrip())
        words = body.split()
        head, rest = words[0], words[1:]
        col = offset + 1
        if head == "system":
            if len(rest) != 1 or rest[0] not in ("ta", "tpda"):
                raise ParseError("expected 'system ta' or 'system tpda'", lineno, col)
            kind = rest[0]
        elif head == "clocks":
            clocks = tuple(rest)
        elif head == "stack":
            stack = tuple(rest)
        elif head == "states":
            if not rest:
                raise ParseError("at least one state required", lineno, col)
            states = tuple(rest)
        elif head == "initial":
            if len(rest) != 1:
                raise ParseError("exactly one initial state required", lineno, col)
            initial = rest[0]
        elif head == "final":
            if not rest:
                raise ParseError("at least one final state required", lineno, col)
            finals = tuple(rest)
        elif head == "trans":
            start = body.index("trans") + len("trans")
            sc = _Scanner(body[start:], lineno, start)
            raw.append((lineno, sc, _parse_trans(sc)))
        else:
            raise ParseError(f"unknown declaration '{head}'", lineno, col)
        for w in rest if head in ("clocks", "stack", "states", "initial", "final") else ():
            if not re.fullmatch(_IDENT, w):
                raise ParseError(f"bad identifier '{w}'", lineno, body.index(w) + 1)
    for name, val in (("system", kind), ("states", states), ("initial", initial), ("final", finals)):
        if val is None:
            raise ParseError(f"missing '{name}' declaration")
    clocks = clocks or ()
    if len(set(clocks)) != len(clocks):
        raise ParseError("duplicate clock declaration")
    if len(set(states)) != len(states):
        raise ParseError("duplicate state declaration")
    sset, cset, kset = set(states), set(clocks), set(stack)
    if initial not in sset:
        raise ParseError(f"undeclared state '{initial}'")
    for f in finals:
        if f not in sset:
            raise ParseError(f"undeclared state '{f}'")
    order = {x: k for k, x in enumerate(clocks)}
    trans = []
    for lineno, sc, (src, dst, label, guard, resets, op) in raw:
        for s in (src, dst):
            if s not in sset:
                raise ParseError(f"undeclared state '{s}'", lineno)
        seen = set()
        for x, _ in guard:
            if x not in cset:
                raise ParseError(f"undeclared clock '{x}'", lineno)
            if x in seen:
                raise ParseError(f"duplicate guard on clock '{x}'", lineno)
            seen.add(x)
        for x in resets:
            if x not in cset:
                raise ParseError(f"undeclared clock '{x}'", lineno)
        if op.symbol is not None and op.symbol not in kset:
            raise ParseError(f"undeclared stack symbol '{op.symbol}'", lineno)
        guard = tuple(sorted(guard, key=lambda g: order[g[0]]))
        trans.append(Transition(len(trans), src, dst, label, guard, frozenset(resets), op))
    return TimedSystem(kind, states, initial, frozenset(finals), clocks, stack, tuple(trans))


def print_system(sys: TimedSystem) -> str:
    lines = [f"system {sys.kind}", "clocks " + " ".join(sys.clocks)]
    if sys.kind == "tpda" or sys.stack:
        lines.append("stack " + " ".join(sys.stack))
    lines.append("states " + " ".join(sys.states))
    lines.append(f"initial {sys.initial}")
    lines.append("final " + " ".join(s for s in sys.states if s in sys.finals))
    order = {x: k for k, x in enumerate(sys.clocks)}
    for t in sys.transitions:
        guard = " & ".join(f"{x} in {iv}" for x, iv in t.guard)
        resets = " ".join(sorted(t.resets, key=lambda x: order.get(x, 0)))
        label = "eps" if t.label is None else t.label
        lines.append(
            f"trans {t.source} {t.target} label={label} guard=[{guard}] reset={{{resets}}} op={t.op}"
        )
    return "\n".join(line.rstrip() for line in lines) + "\n"


def validate(sys: TimedSystem) -> list:
    diags = []
    sset, cset, kset = set(sys.states), set(sys.clocks), set(sys.stack)
    if sys.kind not in ("ta", "tpda"):
        diags.append(f"unknown system kind '{sys.kind}'")
    if sys.initial not in sset:
        diags.append(f"initial state '{sys.initial}' undeclared")
    for f in sorted(sys.finals - sset):
        diags.append(f"final state '{f}' undeclared")
    if sys.kind == "ta" and sys.stack:
        diags.append("stack alphabet in TA")
    for t in sys.transitions:
        where = f"transition {t.tid}"
        for s in (t.source, t.target):
            if s not in sset:
                diags.append(f"{where}: undeclared state '{s}'")
        clocks = [x for x, _ in t.guard]
        if len(set(clocks)) != len(clocks):
            diags.append(f"{where}: duplicate guard clock")
        for x in set(clocks) | set(t.resets):
            if x not in cset:
                diags.append(f"{where}: undeclared clock '{x}'")
        if t.op.kind != "nop":
            if sys.kind == "ta":
                diags.append(f"{where}: stack op in TA")
            if t.op.symbol not in kset:
                diags.append(f"{where}: undeclared stack symbol '{t.op.symbol}'")
            if t.op.kind == "pop" and t.op.interval is None:
                diags.append(f"{where}: pop without interval")
    return diags


def compute_constants(sys: TimedSystem) -> Constants:
    bounds = [0]
    for t in sys.transitions:
        ivs = [iv for _, iv in t.guard]
        if t.op.kind == "pop":
            ivs.append(t.op.interval)
        for iv in ivs:
            bounds.append(iv.low)
            if iv.up is not None:
                bounds.append(iv.up)
    return Constants(M=max(bounds) + 1, T=len(sys.transitions))


def load_system(path) -> TimedSystem:
    with open(path, encoding="utf-8") as fh:
        return parse_system(fh.read())
