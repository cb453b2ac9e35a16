"""Tree automaton accepting the restricted tree terms of TCWs generated by a timed system."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterator, Optional

from .model import Interval, TimedSystem

DUMMY = -1  # id of the synthetic initial transition (epsilon, resets every clock, enters s0)
ANY = object()


class SysInfo:
    """Per-transition lookups over a system, with the dummy transition at id DUMMY."""

    def __init__(self, sys: TimedSystem):
        self.sys = sys
        self.clocks = tuple(sys.clocks)
        self.cidx = {x: k for k, x in enumerate(self.clocks)}
        self.ids = (DUMMY,) + tuple(t.tid for t in sys.transitions)
        self.source = {DUMMY: None}
        self.target = {DUMMY: sys.initial}
        self.label = {DUMMY: None}
        self.resets = {DUMMY: frozenset(range(len(self.clocks)))}
        self.guard = {DUMMY: {}}
        self.push = {DUMMY: None}
        self.pop = {DUMMY: None}
        for t in sys.transitions:
            self.source[t.tid] = t.source
            self.target[t.tid] = t.target
            self.label[t.tid] = t.label
            self.resets[t.tid] = frozenset(self.cidx[x] for x in t.resets)
            self.guard[t.tid] = {self.cidx[x]: iv for x, iv in t.guard}
            self.push[t.tid] = t.op.symbol if t.op.kind == "push" else None
            self.pop[t.tid] = (t.op.symbol, t.op.interval) if t.op.kind == "pop" else None
        self.resetting = {
            x: tuple(t for t in self.ids if x in self.resets[t]) for x in range(len(self.clocks))
        }
        self.finals = sys.finals

    def name(self, t) -> str:
        return "d" if t == DUMMY else str(t)


_INFO_CACHE: dict = {}


def info(sys: TimedSystem) -> SysInfo:
    key = id(sys)
    hit = _INFO_CACHE.get(key)
    if hit is None or hit.sys is not sys:
        hit = SysInfo(sys)
        _INFO_CACHE[key] = hit
    return hit


@dataclass(frozen=True)
class SState:
    P: tuple
    L: int
    delta: tuple  # transition id per color of P
    push: bool = False
    pop: bool = False
    G: tuple = ()  # per clock: guard of the right end already checked
    Z: tuple = ()  # per clock: hanging reset point left of L, or None

    def __post_init__(self):
        for z in self.Z:
            if z is not None and not z < self.L:
                raise ValueError("hanging point must lie left of L")
        for c, t in zip(self.P, self.delta):
            if t == DUMMY and c != self.P[0]:
                raise ValueError("dummy transition off the leftmost point")

    def delta_of(self, c):
        return self.delta[self.P.index(c)]

    def fmt(self, si: Optional[SysInfo] = None) -> str:
        name = si.name if si else (lambda t: "d" if t == DUMMY else str(t))
        P = ",".join(map(str, self.P))
        dl = ",".join(f"{c}:{name(t)}" for c, t in zip(self.P, self.delta))
        G = "".join("1" if g else "0" for g in self.G)
        Z = ",".join("_" if z is None else str(z) for z in self.Z)
        return f"({{{P}}};{self.L};{dl};{int(self.push)},{int(self.pop)};{G};{Z})"

    def __str__(self):
        return self.fmt()


def _fresh(si: SysInfo, P, L, delta):
    n = len(si.clocks)
    return SState(P, L, delta, False, False, (False,) * n, (None,) * n)


def s_leaf_succ(sys, i, j, a=ANY, b=ANY) -> Iterator[SState]:
    si = info(sys)
    if not i < j:
        return
    firsts = si.ids if a is ANY else ((DUMMY,) + si.ids[1:] if a is None else si.ids[1:])
    for t1 in firsts:
        if a is not ANY and si.label[t1] != a:
            continue
        for t2 in si.ids[1:]:
            if si.source[t2] != si.target[t1]:
                continue
            if b is not ANY and si.label[t2] != b:
                continue
            yield _fresh(si, (i, j), i, (t1, t2))


def s_add_stack_edge(sys, q: SState, i, j, iv: Interval) -> Optional[SState]:
    si = info(sys)
    if i != q.L or j != q.P[-1] or q.push or q.pop:
        return None
    c = si.push[q.delta_of(i)]
    pop = si.pop[q.delta_of(j)]
    if c is None or pop is None or pop[0] != c or pop[1] != iv:
        return None
    return replace(q, push=True, pop=True)


def _resets_between(si, q: SState, x, lo, hi) -> bool:
    return any(lo < c < hi and x in si.resets[t] for c, t in zip(q.P, q.delta))


def s_add_clock_edge(sys, q: SState, i, j, iv: Interval, clock, guessed=None) -> list:
    si = info(sys)
    x = si.cidx[clock] if isinstance(clock, str) else clock
    R = q.P[-1]
    if not (i < j == R) or q.G[x] or si.guard[q.delta_of(j)].get(x) != iv:
        return []
    if _resets_between(si, q, x, i, j):
        return []
    if i >= q.L:
        if i not in q.P or x not in si.resets[q.delta_of(i)]:
            return []
        return [replace(q, G=_set(q.G, x, True))]
    if q.Z[x] not in (None, i):
        return []
    G = _set(q.G, x, True)
    Z = _set(q.Z, x, i)
    if i in q.P:
        if x not in si.resets[q.delta_of(i)]:
            return []
        return [replace(q, G=G, Z=Z)]
    choices = si.resetting[x] if guessed is None else (guessed,)
    out = []
    for t in choices:
        if x not in si.resets[t]:
            continue
        P = tuple(sorted(q.P + (i,)))
        k = P.index(i)
        delta = q.delta[:k] + (t,) + q.delta[k:]
        try:
            out.append(SState(P, q.L, delta, q.push, q.pop, G, Z))
        except ValueError:
            continue  # the dummy point would not be leftmost
    return out


def _set(tup, k, v):
    return tup[:k] + (v,) + tup[k + 1:]


def s_forget(sys, q: SState, i, strict: bool = True) -> Optional[SState]:
    """Forget an internal point unless it is the last reset of some clock.

    With ``strict`` a reset that is only repeated at the right end does not count
    while that end still has an unchecked guard on the clock: the guard's edge
    must come from the point being forgotten.
    """
    si = info(sys)
    R = q.P[-1]
    if i not in q.P or not q.L < i < R:
        return None
    tR = q.delta[-1]
    for x in si.resets[q.delta_of(i)]:
        later = [c for c, t in zip(q.P, q.delta) if i < c <= R and x in si.resets[t]]
        if not later:
            return None
        if strict and later == [R] and x in si.guard[tR] and not q.G[x]:
            return None
    k = q.P.index(i)
    return replace(q, P=q.P[:k] + q.P[k + 1:], delta=q.delta[:k] + q.delta[k + 1:])


def s_rename(q: SState, i, j) -> Optional[SState]:
    if i not in q.P:
        return None
    k = q.P.index(i)
    lo = q.P[k - 1] if k > 0 else 0
    hi = q.P[k + 1] if k + 1 < len(q.P) else float("inf")
    if not lo < j < hi:
        return None
    P = q.P[:k] + (j,) + q.P[k + 1:]
    Z = tuple(j if z == i else z for z in q.Z)
    return replace(q, P=P, L=j if q.L == i else q.L, Z=Z)


def s_combine(sys, q1: SState, q2: SState) -> Optional[SState]:
    si = info(sys)
    R1 = q1.P[-1]
    # C1
    if R1 != q2.L or any(q1.L <= c <= R1 and c not in q1.P for c in q2.P):
        return None
    d1 = dict(zip(q1.P, q1.delta))
    d2 = dict(zip(q2.P, q2.delta))
    # C2
    if any(d1[c] != d2[c] for c in d1.keys() & d2.keys()):
        return None
    # C3
    if si.push[d2[q2.L]] is not None and not q2.push:
        return None
    if si.pop[d1[R1]] is not None and not q1.pop:
        return None
    # C4
    if any(not q1.G[x] for x in si.guard[d1[R1]]):
        return None
    for x in range(len(si.clocks)):
        # C5
        z = q1.Z[x]
        if z is not None and any(z < c < q1.L and x in si.resets[t] for c, t in d2.items()):
            return None
        # C6
        z = q2.Z[x]
        if z is not None and any(z < c < q2.L and x in si.resets[t] for c, t in d1.items()):
            return None
    P = tuple(sorted(d1.keys() | d2.keys()))
    delta = tuple(d1[c] if c in d1 else d2[c] for c in P)
    Z = tuple(z2 if z2 is not None and z2 < q1.L else z1 for z1, z2 in zip(q1.Z, q2.Z))
    try:
        return SState(P, q1.L, delta, q1.push, q2.pop, q2.G, Z)
    except ValueError:
        return None


def s_accepting(sys, q: SState) -> bool:
    si = info(sys)
    if q.L != q.P[0] or q.delta[0] != DUMMY:
        return False
    assert all(z is None for z in q.Z)
    tR = q.delta[-1]
    if si.target[tR] not in si.finals:
        return False
    if si.pop[tR] is not None and not q.pop:
        return False
    if si.push[tR] is not None:
        # a push on the last transition can never be matched
        return False
    return all(q.G[x] for x in si.guard[tR])


def s_ta_project(sys, q: SState) -> tuple:
    if sys.kind != "ta":
        raise ValueError("projection is only defined for timed automata")
    return (q.P, q.delta, q.G)


# ---------------------------------------------------------------- running a term

def s_states_term(sys, term, strict: bool = True) -> set:
    """All states reachable by the system automaton on a restricted term."""
    from .treeterm import AtomEdge, AtomSucc, Combine, Forget, Rename, TermError

    si = info(sys)

    def go(t) -> set:
        if isinstance(t, AtomSucc):
            return set(s_leaf_succ(sys, t.i, t.j, t.a, t.b))
        if isinstance(t, Forget):
            return {r for q in go(t.child) if (r := s_forget(sys, q, t.i, strict)) is not None}
        if isinstance(t, Rename):
            return {r for q in go(t.child) if (r := s_rename(q, t.i, t.j)) is not None}
        if isinstance(t, Combine):
            left = go(t.left)
            e = t.right
            if isinstance(e, AtomEdge):
                out = set()
                for q in left:
                    if e.kind == "stack":
                        r = s_add_stack_edge(sys, q, e.i, e.j, e.interval)
                        out.update([r] if r is not None else [])
                    elif e.kind == "clock":
                        for r in s_add_clock_edge(sys, q, e.i, e.j, e.interval, si.cidx[e.clock]):
                            if si.label[r.delta_of(e.i)] == e.a:
                                out.add(r)
                    else:
                        raise TermError("system automaton needs edge kinds")
                return out
            right = go(e)
            return {r for q1 in left for q2 in right if (r := s_combine(sys, q1, q2)) is not None}
        raise TermError(f"not a restricted term node: {t!r}")

    return go(term)


def s_accepts_term(sys, term, strict: bool = True) -> bool:
    return any(s_accepting(sys, q) for q in s_states_term(sys, term, strict))
