import itertools

import pytest
from hypothesis import given, settings, strategies as st

from tpdatree.model import Interval, StackOp, TimedSystem, Transition
from tpdatree.oracle import gen_random_tcw
from tpdatree.tcw import (TCW, Edge, RunError, Unrealizable, check_well_timed, is_realizable, realize,
                          run_to_tcw, satisfies, tcw_from_json, tcw_to_json, to_timed_word)


def _sys(*trans, clocks=("x",), stack=("c",)):
    states = sorted({t.source for t in trans} | {t.target for t in trans} | {"s0"})
    return TimedSystem("tpda", tuple(states), "s0", frozenset({states[-1]}), clocks, stack, tuple(trans))


def test_empty_run():
    tcw = run_to_tcw(_sys(), [])
    assert tcw.n == 0 and tcw.labels == (None,) and tcw.edges == ()


def test_reset_then_guard_gives_clock_edge():
    t1 = Transition(0, "s0", "s1", "a", (), frozenset({"x"}))
    t2 = Transition(1, "s1", "s2", "b", (("x", Interval(1, 3)),))
    tcw = run_to_tcw(_sys(t1, t2), [t1, t2])
    assert tcw.edges == (Edge(1, 2, Interval(1, 3), "clock", "x"),)


def test_guard_without_reset_points_to_origin():
    t1 = Transition(0, "s0", "s1", "a")
    t2 = Transition(1, "s1", "s2", "b", (("x", Interval(1, 3)),))
    tcw = run_to_tcw(_sys(t1, t2), [t1, t2])
    assert tcw.edges == (Edge(0, 2, Interval(1, 3), "clock", "x"),)


def test_push_pop_gives_stack_edge():
    t1 = Transition(0, "s0", "s1", "a", op=StackOp("push", "c"))
    t2 = Transition(1, "s1", "s2", "b", op=StackOp("pop", "c", Interval(0, 2)))
    tcw = run_to_tcw(_sys(t1, t2), [t1, t2])
    assert tcw.edges == (Edge(1, 2, Interval(0, 2), "stack"),)


def test_unmatched_push_is_not_a_complete_run():
    t1 = Transition(0, "s0", "s1", "a", op=StackOp("push", "c"))
    with pytest.raises(RunError):
        run_to_tcw(_sys(t1), [t1])
    assert run_to_tcw(_sys(t1), [t1], complete=False).edges == ()


def test_wrong_pop_symbol_rejected():
    t1 = Transition(0, "s0", "s1", "a", op=StackOp("push", "c"))
    t2 = Transition(1, "s1", "s2", "b", op=StackOp("pop", "d", Interval(0, 2)))
    with pytest.raises(RunError):
        run_to_tcw(_sys(t1, t2, stack=("c", "d")), [t1, t2])


def _stack_tcw(pairs, n=5):
    return TCW(n, (None,) + ("a",) * n, tuple(Edge(i, j, Interval(0), "stack") for i, j in pairs))


def test_nested_stack_edges_are_well_timed():
    assert check_well_timed(_stack_tcw([(1, 4), (2, 3)]))


def test_crossing_stack_edges_are_not():
    assert not check_well_timed(_stack_tcw([(1, 3), (2, 4)]))


def test_clock_edges_from_last_reset():
    # x is reset at 0 and checked at 2, reset at 2 and checked at 3
    edges = (Edge(0, 2, Interval(0), "clock", "x"), Edge(2, 3, Interval(0), "clock", "x"))
    assert check_well_timed(TCW(3, (None, "a", "b", "c"), edges))
    stale = (Edge(0, 3, Interval(0), "clock", "x"), Edge(1, 2, Interval(0), "clock", "x"))
    assert not check_well_timed(TCW(3, (None, "a", "b", "c"), stale))


def tau1_tcw():
    # points 1,3,4,5 of the running example become positions 0..3
    edges = (Edge(0, 2, Interval(2)), Edge(0, 3, Interval(3)), Edge(1, 3, Interval(1, 3)))
    return TCW(3, (None, "a", "b", "c"), edges)


def test_running_example_is_realizable():
    tcw = tau1_tcw()
    assert satisfies(tcw, (0, 5, 6, 8))
    ts = realize(tcw)
    assert satisfies(tcw, ts)
    # minimal solution: every position as early as the constraints allow
    assert ts == (0, 0, 2, 3)


def test_running_example_timed_word():
    assert to_timed_word(tau1_tcw(), (0, 5, 6, 8)) == [("a", 5), ("b", 6), ("c", 8)]


def test_chain_without_edges():
    assert realize(TCW(2, (None, "a", "b"))) == (0, 0, 0)
    assert to_timed_word(TCW(0, (None,)), (0,)) == []


def test_contradictory_bounds():
    tcw = TCW(1, (None, "a"), (Edge(0, 1, Interval(0, 1)), Edge(0, 1, Interval(2, 3))))
    with pytest.raises(Unrealizable):
        realize(tcw)
    assert not is_realizable(tcw)


def test_edge_order_rejected():
    with pytest.raises(ValueError):
        TCW(2, (None, "a", "b"), (Edge(2, 1, Interval(0)),))


def test_json_round_trip():
    tcw, _, _ = gen_random_tcw(11)
    ts = realize(tcw) if is_realizable(tcw) else None
    back, ts2 = tcw_from_json(tcw_to_json(tcw, ts))
    assert back.key() == tcw.key() and ts2 == ts


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 100_000), st.booleans())
def test_random_tcws_are_well_timed(seed, stack):
    tcw, _, _ = gen_random_tcw(seed, stack=stack)
    assert check_well_timed(tcw)


def _brute_feasible(tcw, horizon):
    for gaps in itertools.product(range(horizon + 1), repeat=tcw.n):
        ts = tuple(itertools.accumulate((0,) + gaps))
        if satisfies(tcw, ts):
            return ts
    return None


@settings(max_examples=120, deadline=None)
@given(st.integers(0, 100_000))
def test_realize_is_minimal_and_complete(seed):
    tcw, _, _ = gen_random_tcw(seed, max_points=5, M=3)
    # the least solution never opens a gap wider than the largest constant
    brute = _brute_feasible(tcw, 3)
    if brute is None:
        assert not is_realizable(tcw)
        return
    ts = realize(tcw)
    assert satisfies(tcw, ts)
    for gaps in itertools.product(range(4), repeat=tcw.n):
        other = tuple(itertools.accumulate((0,) + gaps))
        if satisfies(tcw, other):
            assert all(a <= b for a, b in zip(ts, other))
