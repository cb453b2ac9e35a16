"""Brute-force ground truth and random instance generators."""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Optional

from .model import NOP, Interval, StackOp, TimedSystem, Transition, validate
from .tcw import Unrealizable, realize, run_to_tcw


@dataclass(frozen=True)
class OracleVerdict:
    status: str  # NONEMPTY | EMPTY | EMPTY_UPTO
    run: tuple = ()
    ts: tuple = ()
    bound: Optional[int] = None
    explored: int = 0


def is_acyclic(sys: TimedSystem) -> bool:
    succ = {s: set() for s in sys.states}
    for t in sys.transitions:
        succ[t.source].add(t.target)
    color = {}

    def dfs(s):
        color[s] = 1
        for n in succ[s]:
            c = color.get(n)
            if c == 1 or (c is None and not dfs(n)):
                return False
        color[s] = 2
        return True

    return all(color.get(s) == 2 or dfs(s) for s in sys.states)


def oracle_check(sys: TimedSystem, max_len: Optional[int] = None) -> OracleVerdict:
    """Depth-first search over abstract runs; prefixes with unrealizable TCWs are cut,
    since extending a run only adds positions and constraints."""
    acyclic = is_acyclic(sys)
    if max_len is None:
        max_len = len(sys.transitions) if acyclic else 12
    if sys.initial in sys.finals:
        return OracleVerdict("NONEMPTY", (), (0,), max_len)
    out = {}
    by_source = {}
    for t in sys.transitions:
        by_source.setdefault(t.source, []).append(t)
    explored = 0

    def dfs(state, stack, run):
        nonlocal explored
        for t in by_source.get(state, ()):
            if t.op.kind == "pop" and (not stack or stack[-1] != t.op.symbol):
                continue
            nstack = stack + (t.op.symbol,) if t.op.kind == "push" else (
                stack[:-1] if t.op.kind == "pop" else stack)
            if len(nstack) > max_len - len(run) - 1:
                continue
            nrun = run + (t,)
            explored += 1
            tcw = run_to_tcw(sys, nrun, complete=False)
            try:
                ts = realize(tcw)
            except Unrealizable:
                continue
            if t.target in sys.finals and not nstack:
                out["hit"] = (nrun, ts)
                return True
            if len(nrun) < max_len and dfs(t.target, nstack, nrun):
                return True
        return False

    if dfs(sys.initial, (), ()):
        run, ts = out["hit"]
        return OracleVerdict("NONEMPTY", run, ts, max_len, explored)
    if acyclic and max_len >= len(sys.transitions):
        return OracleVerdict("EMPTY", bound=max_len, explored=explored)
    return OracleVerdict("EMPTY_UPTO", bound=max_len, explored=explored)


# ---------------------------------------------------------------- random instances

@dataclass(frozen=True)
class Profile:
    kind: str = "tpda"
    states: int = 5
    transitions: int = 7
    clocks: int = 2
    max_const: int = 3
    symbols: int = 2
    acyclic: bool = True
    guard_prob: float = 0.5
    reset_prob: float = 0.4


def _rand_interval(rng, max_const):
    low = rng.randint(0, max_const)
    up = rng.choice([None, rng.randint(low, max_const)])
    return Interval(low, up)


def gen_random_system(seed: int, profile: Profile = Profile()) -> TimedSystem:
    """Reproducible random system; acyclic profiles lay a backbone path s0 -> s1 -> ...
    so runs of several steps exist, then add random forward transitions."""
    rng = random.Random(seed)
    n_states = rng.randint(3, max(3, profile.states))
    states = tuple(f"s{k}" for k in range(n_states))
    lo = 0 if profile.kind == "tpda" else 1
    clocks = tuple(["x", "y", "z", "w"][: rng.randint(lo, profile.clocks)])
    stack = tuple(["a", "b", "c"][: rng.randint(1, profile.symbols)]) if profile.kind == "tpda" else ()
    extra = [states[rng.randrange(1, n_states - 1)]] if rng.random() < 0.3 else []
    finals = frozenset([states[-1]] + extra)
    n_trans = rng.randint(n_states - 1, max(n_states - 1, profile.transitions))
    edges = [(k, k + 1) for k in range(n_states - 1)] if profile.acyclic else []
    while len(edges) < n_trans:
        if profile.acyclic:
            a = rng.randrange(n_states - 1)
            edges.append((a, rng.randrange(a + 1, n_states)))
        else:
            edges.append((rng.randrange(n_states), rng.randrange(n_states)))
    trans = []
    for tid, (a, b) in enumerate(edges):
        guard = tuple((x, _rand_interval(rng, profile.max_const)) for x in clocks if rng.random() < profile.guard_prob)
        resets = frozenset(x for x in clocks if rng.random() < profile.reset_prob)
        op = NOP
        if stack:
            r = rng.random()
            if r < 0.3:
                op = StackOp("push", rng.choice(stack))
            elif r < 0.6:
                op = StackOp("pop", rng.choice(stack), _rand_interval(rng, profile.max_const))
        label = rng.choice(["a", "b", None])
        trans.append(Transition(tid, states[a], states[b], label, guard, resets, op))
    sys = TimedSystem(profile.kind, states, "s0", finals, clocks, stack, tuple(trans))
    assert not validate(sys)
    return sys


def gen_random_tcw(seed: int, max_points: int = 8, clocks=("x", "y"), M: int = 4, stack: bool = True):
    """A random well-timed TCW together with the per-position reset sets that produced it.

    Built from a random straight-line run: each step may reset clocks, guard clocks
    against their last reset, push, or pop a pending push.
    """
    rng = random.Random(seed)
    n = rng.randint(1, max_points - 1)
    symbols = ("a",)
    trans = []
    depth = 0
    for k in range(n):
        guard = tuple((x, _rand_interval(rng, M - 1)) for x in clocks if rng.random() < 0.45)
        resets = frozenset(x for x in clocks if rng.random() < 0.4)
        op = NOP
        left = n - k
        if stack:
            if depth and (rng.random() < 0.4 or depth >= left):
                op = StackOp("pop", "a", _rand_interval(rng, M - 1))
                depth -= 1
            elif depth + 1 < left and rng.random() < 0.35:
                op = StackOp("push", "a")
                depth += 1
        trans.append(Transition(k, f"q{k}", f"q{k + 1}", rng.choice("ab"), guard, resets, op))
    sys = TimedSystem("tpda" if stack else "ta", tuple(f"q{k}" for k in range(n + 1)), "q0",
                      frozenset({f"q{n}"}), tuple(clocks), symbols if stack else (), tuple(trans))
    tcw = run_to_tcw(sys, trans)
    resets = [frozenset(clocks)] + [t.resets for t in trans]
    return tcw, resets, sys
