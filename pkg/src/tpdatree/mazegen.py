"""Maze descriptions and their translation into one-clock timed pushdown automata.

Each place becomes a state (one copy per set of once-visited places seen so far).
The clock is reset whenever a place is entered and checked against the stay
bound when it is left.  A corridor with a non-zero bound goes through an extra
state: the clock is reset on the way in and checked against the bound on the
way out.  Global bounds push a symbol at the start event and pop it with an age
check at the end event; balanced visits push at the loading place and pop at the
unloading place.  Several stack operations at one event are chained through
zero-delay intermediate states.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from typing import Optional, Union

from .model import NOP, Interval, StackOp, TimedSystem, Transition, validate
from .tcw import TCW, Edge, Unrealizable, realize, run_to_tcw

ENTRY, EXIT = "ENTRY", "EXIT"

Bound = Union[int, str]  # a natural number or a parameter name; up may also be None (inf)


class MazeError(ValueError):
    pass


@dataclass(frozen=True)
class Corridor:
    src: str
    dst: str
    both: bool
    low: Bound = 0
    up: Optional[Bound] = 0


@dataclass(frozen=True)
class VisitOnce:
    place: str


@dataclass(frozen=True)
class Balanced:
    load: str
    unload: str
    start: str
    end: str


@dataclass(frozen=True)
class GlobalBound:
    start: str
    end: str
    low: Bound
    up: Optional[Bound]


@dataclass(frozen=True)
class Maze:
    name: str
    places: tuple
    entry: str
    exit: str
    corridors: tuple = ()
    stays: tuple = ()  # (place, low, up)
    constraints: tuple = ()
    params: tuple = ()  # default bindings (name, value)

    def stay(self, place):
        for p, lo, up in self.stays:
            if p == place:
                return lo, up
        return 0, 0


def _marker(tok):
    if tok in (ENTRY, EXIT):
        return tok
    m = re.fullmatch(r"visit\((\w+)\)", tok)
    if not m:
        raise MazeError(f"bad segment marker '{tok}'")
    return m.group(1)


def _bound(tok):
    if tok == "inf":
        return None
    return int(tok) if tok.isdigit() else tok


def _interval(text, lineno):
    m = re.fullmatch(r"\[\s*(\w+)\s*,\s*(\w+)\s*\]", text.strip())
    if not m:
        raise MazeError(f"line {lineno}: bad interval '{text.strip()}'")
    return _bound(m.group(1)), _bound(m.group(2))


def parse_maze(text: str) -> Maze:
    name, places, entry, exit_ = "maze", None, None, None
    corridors, stays, cons, params = [], [], [], []
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        head, _, rest = body.partition(" ")
        rest = rest.strip()
        if head == "maze":
            name = rest or name
        elif head == "places":
            places = tuple(rest.split())
        elif head == "entry":
            entry = rest
        elif head == "exit":
            exit_ = rest
        elif head == "corridor":
            m = re.fullmatch(r"(\w+)\s*(<->|->)\s*(\w+)\s*(\[.*\])?", rest)
            if not m:
                raise MazeError(f"line {lineno}: bad corridor")
            lo, up = _interval(m.group(4), lineno) if m.group(4) else (0, 0)
            corridors.append(Corridor(m.group(1), m.group(3), m.group(2) == "<->", lo, up))
        elif head == "stay":
            m = re.fullmatch(r"(\w+)\s*(\[.*\])", rest)
            if not m:
                raise MazeError(f"line {lineno}: bad stay bound")
            lo, up = _interval(m.group(2), lineno)
            stays.append((m.group(1), lo, up))
        elif head == "visit_once":
            cons.extend(VisitOnce(p) for p in rest.split())
        elif head == "balanced":
            parts = rest.split()
            if len(parts) != 4:
                raise MazeError(f"line {lineno}: balanced needs load unload start end")
            cons.append(Balanced(parts[0], parts[1], _marker(parts[2]), _marker(parts[3])))
        elif head == "global":
            m = re.fullmatch(r"(\S+)\s+(\S+)\s*(\[.*\])", rest)
            if not m:
                raise MazeError(f"line {lineno}: bad global bound")
            lo, up = _interval(m.group(3), lineno)
            cons.append(GlobalBound(_marker(m.group(1)), _marker(m.group(2)), lo, up))
        elif head == "param":
            m = re.fullmatch(r"(\w+)\s*=\s*(\d+)", rest)
            if not m:
                raise MazeError(f"line {lineno}: bad param")
            params.append((m.group(1), int(m.group(2))))
        else:
            raise MazeError(f"line {lineno}: unknown declaration '{head}'")
    if places is None or entry is None or exit_ is None:
        raise MazeError("places, entry and exit are required")
    maze = Maze(name, places, entry, exit_, tuple(corridors), tuple(stays), tuple(cons), tuple(params))
    check_maze(maze)
    return maze


def event_order(maze: Maze) -> list:
    """Markers ordered so that every segment starts before it ends."""
    once = [c.place for c in maze.constraints if isinstance(c, VisitOnce)]
    segs = [(c.start, c.end) for c in maze.constraints if isinstance(c, (Balanced, GlobalBound))]
    nodes = [ENTRY] + once + [EXIT]
    preds = {n: set() for n in nodes}
    for a, b in segs:
        preds[b].add(a)
    for n in nodes[1:]:
        preds[n].add(ENTRY)
    for n in nodes[:-1]:
        preds[EXIT].add(n)
    order = []
    while len(order) < len(nodes):
        ready = [n for n in nodes if n not in order and preds[n] <= set(order)]
        if not ready:
            raise MazeError("segments impose a cyclic order on events")
        order.append(ready[0])
    return order


def check_maze(maze: Maze):
    pset = set(maze.places)
    if maze.entry == maze.exit:
        raise MazeError("entry and exit must differ")
    for p in (maze.entry, maze.exit):
        if p not in pset:
            raise MazeError(f"undeclared place '{p}'")
    for c in maze.corridors:
        if c.src not in pset or c.dst not in pset:
            raise MazeError(f"corridor references undeclared place: {c.src} {c.dst}")
    once = {c.place for c in maze.constraints if isinstance(c, VisitOnce)}
    for c in maze.constraints:
        if isinstance(c, VisitOnce) and c.place not in pset:
            raise MazeError(f"undeclared place '{c.place}'")
        if isinstance(c, (Balanced, GlobalBound)):
            for mk in (c.start, c.end):
                if mk not in (ENTRY, EXIT) and mk not in once:
                    raise MazeError(f"segment marker visit({mk}) needs a visit_once place")
            if c.start == c.end or c.start == EXIT or c.end == ENTRY:
                raise MazeError("empty or reversed segment")
        if isinstance(c, Balanced):
            for p in (c.load, c.unload):
                if p not in pset:
                    raise MazeError(f"undeclared place '{p}'")
    order = event_order(maze)
    pos = {m: k for k, m in enumerate(order)}
    spans = [(pos[c.start], pos[c.end]) for c in maze.constraints if isinstance(c, (Balanced, GlobalBound))]
    for a, b in spans:
        if a >= b:
            raise MazeError("segment ends before it starts")
        for c, d in spans:
            if a < c < b < d:
                raise MazeError("constraints not well-nested")


def _resolve(b, params, what):
    if b is None or isinstance(b, int):
        return b
    if b not in params:
        raise MazeError(f"unbound parameter '{b}' in {what}")
    return params[b]


def maze_to_tpda(maze: Maze, params: Optional[dict] = None) -> TimedSystem:
    params = dict(maze.params, **(params or {}))
    check_maze(maze)

    def iv(lo, up, what):
        return Interval(_resolve(lo, params, what), _resolve(up, params, what))

    once = [c.place for c in maze.constraints if isinstance(c, VisitOnce)]
    bit = {p: 1 << k for k, p in enumerate(once)}
    full = (1 << len(once)) - 1
    order = event_order(maze)
    pos = {m: k for k, m in enumerate(order)}
    # stack segments: global bounds, plus a delimiter for balanced segments whose span has no global bound
    segs = []
    for k, c in enumerate(maze.constraints):
        if isinstance(c, GlobalBound):
            segs.append((c.start, c.end, f"g{len(segs)}", iv(c.low, c.up, "global bound"), k))
    spans = {(s, e) for s, e, *_ in segs}
    balanced = [c for c in maze.constraints if isinstance(c, Balanced)]
    for k, c in enumerate(balanced):
        if (c.start, c.end) not in spans:
            segs.append((c.start, c.end, f"d{k}", Interval(0, None), len(maze.constraints) + k))
            spans.add((c.start, c.end))
    bsym = {k: f"b{k}" for k in range(len(balanced))}

    def happened(marker, mask):
        return marker == ENTRY or (marker != EXIT and bool(mask & bit[marker]))

    def ops_at(marker):
        ending = [s for s in segs if s[1] == marker]
        ending.sort(key=lambda s: (-pos[s[0]], -s[4]))
        starting = [s for s in segs if s[0] == marker]
        starting.sort(key=lambda s: (-pos[s[1]], s[4]))
        return ([StackOp("pop", s[2], s[3]) for s in ending], [StackOp("push", s[2]) for s in starting])

    def visit_ops(place, mask_before):
        mid, pops, pushes = [], [], []
        for k, c in enumerate(balanced):
            active = happened(c.start, mask_before) and not happened(c.end, mask_before)
            if place == c.unload and active:
                mid.append(StackOp("pop", bsym[k], Interval(0, None)))
            if place == c.load and active:
                mid.append(StackOp("push", bsym[k]))
        if place in bit and not mask_before & bit[place]:
            pops, pushes = ops_at(place)
        if place == maze.exit:
            pops = pops + ops_at(EXIT)[0]
        return mid + pops + pushes

    def sname(place, mask):
        return f"p{place}" if not once else f"p{place}_{mask}"

    x = "x"
    states, trans = ["init"], []
    chains = {}

    def add_state(s):
        if s not in states:
            states.append(s)
        return s

    def add_trans(src, dst, label, guard, op):
        trans.append(Transition(len(trans), src, dst, label, tuple(guard), frozenset({x}), op))

    def enter(src, place, mask, guard):
        """Transitions from src into place; the stack operations of the visit are chained
        through zero-delay states shared by all sources.  Returns the target state."""
        after = mask | bit.get(place, 0)
        tgt = add_state(sname(place, after))
        ops = visit_ops(place, mask) or [NOP]
        if len(ops) == 1:
            add_trans(src, tgt, f"p{place}", guard, ops[0])
            return tgt
        head = f"v{place}_{mask}"
        add_trans(src, add_state(f"{head}_1"), None, guard, ops[0])
        if head not in chains:
            chains[head] = True
            for k in range(1, len(ops)):
                nxt = tgt if k == len(ops) - 1 else add_state(f"{head}_{k + 1}")
                label = f"p{place}" if nxt == tgt else None
                add_trans(f"{head}_{k}", nxt, label, [(x, Interval(0, 0))], ops[k])
        return tgt

    # entering the maze: pushes of segments opened at ENTRY, then the visit of the entry place
    cur = "init"
    for k, op in enumerate(ops_at(ENTRY)[1]):
        nxt = add_state(f"start{k}")
        add_trans(cur, nxt, None, [(x, Interval(0, 0))], op)
        cur = nxt
    enter(cur, maze.entry, 0, [(x, Interval(0, 0))])
    moves = []
    for c in maze.corridors:
        moves.append((c.src, c.dst, c))
        if c.both:
            moves.append((c.dst, c.src, c))
    todo = [(maze.entry, bit.get(maze.entry, 0))]
    seen = set(todo)
    while todo:
        a, mask = todo.pop(0)
        if a == maze.exit:
            continue  # the maze is left on reaching the exit
        src = sname(a, mask)
        lo, up = maze.stay(a)
        stay = [(x, iv(lo, up, f"stay at {a}"))]
        for s, b, c in moves:
            if s != a or (b in bit and mask & bit[b]):
                continue
            bound = iv(c.low, c.up, f"corridor {a}-{b}")
            if bound == Interval(0, 0):
                enter(src, b, mask, stay)
            else:
                mid = add_state(f"c{a}_{b}_{mask}")
                add_trans(src, mid, None, stay, NOP)
                enter(mid, b, mask, [(x, bound)])
            nxt = (b, mask | bit.get(b, 0))
            if nxt not in seen:
                seen.add(nxt)
                todo.append(nxt)
    final = add_state(sname(maze.exit, full))
    symbols = tuple(sorted({t.op.symbol for t in trans if t.op.symbol}))
    sys = TimedSystem("tpda", tuple(states), "init", frozenset({final}), (x,), symbols, tuple(trans))
    diags = validate(sys)
    if diags:
        raise MazeError("; ".join(diags))
    return sys


def lift_place_run(sys: TimedSystem, visits) -> tuple:
    """Turn a list of (place, entry time) pairs into a run of the translated system
    and one timestamp per position; raises MazeError when no run matches."""
    visits = [(str(p), t) for p, t in visits]
    by_source = {}
    for t in sys.transitions:
        by_source.setdefault(t.source, []).append(t)

    def search(state, stack, k, run, pins):
        if k == len(visits):
            if state in sys.finals and not stack:
                yield run, pins
            return
        for t in by_source.get(state, ()):
            if t.label is not None and t.label != f"p{visits[k][0]}":
                continue
            if t.op.kind == "pop" and (not stack or stack[-1] != t.op.symbol):
                continue
            nstack = stack + (t.op.symbol,) if t.op.kind == "push" else (
                stack[:-1] if t.op.kind == "pop" else stack)
            if t.label is None:
                yield from search(t.target, nstack, k, run + (t,), pins)
            else:
                pos = len(run) + 1
                yield from search(t.target, nstack, k + 1, run + (t,), pins + ((pos, visits[k][1]),))

    for run, pins in search(sys.initial, (), 0, (), ()):
        tcw = run_to_tcw(sys, run)
        fixed = [Edge(0, pos, Interval(t, t)) for pos, t in pins if pos > 0]
        try:
            ts = realize(TCW(tcw.n, tcw.labels, tcw.edges + tuple(fixed)))
        except Unrealizable:
            continue
        return run, ts
    raise MazeError("no run of the system follows the given visits")


# ---------------------------------------------------------------- bundled instances

def _data(name: str) -> str:
    return resources.files("tpdatree").joinpath("data", name).read_text()


def load_maze(path) -> Maze:
    with open(path) as fh:
        return parse_maze(fh.read())


def cargo_maze() -> Maze:
    return parse_maze(_data("cargo.maze"))


# reference run for m=7, n=8: places with their entry times
CARGO_RUN = (
    (6, 0), (3, 0), (7, 0), (3, 1), (7, 1), (3, 2), (5, 5), (4, 5), (5, 6), (4, 6), (5, 7),
    (6, 7), (1, 7), (6, 7), (3, 7), (7, 7), (3, 9), (7, 9), (3, 10), (5, 13), (4, 13),
    (5, 14), (4, 14), (5, 15), (6, 15), (2, 15),
)


@dataclass(frozen=True)
class Example:
    name: str
    maze: Maze
    params: tuple
    expected: str  # NONEMPTY | EMPTY


def bundled_examples() -> list:
    cargo = cargo_maze()
    out = [
        Example("cargo-m7-n8", cargo, (("m", 7), ("n", 8)), "NONEMPTY"),
        Example("cargo-m1-n1", cargo, (("m", 1), ("n", 1)), "EMPTY"),
    ]
    for k, expected in ((2, "NONEMPTY"), (3, "NONEMPTY"), (4, "EMPTY")):
        out.append(Example(f"maze{k}", parse_maze(_data(f"maze{k}.maze")), (), expected))
    return out
