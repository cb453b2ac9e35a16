import pytest
from hypothesis import given, settings, strategies as st

from tpdatree.mazegen import cargo_maze, maze_to_tpda
from tpdatree.model import (Interval, ParseError, StackOp, TimedSystem, Transition, compute_constants,
                            parse_system, print_system, validate)
from tpdatree.oracle import Profile, gen_random_system


def test_minimal_system_has_no_transitions():
    sys = parse_system("system ta\nclocks\nstates s0\ninitial s0\nfinal s0\n")
    assert sys.transitions == ()
    assert sys.initial in sys.finals


def test_open_interval_rejected():
    text = "system ta\nclocks x\nstates s0\ninitial s0\nfinal s0\ntrans s0 s0 label=a guard=[x in (1,2)] reset={} op=nop\n"
    with pytest.raises(ParseError, match="open intervals unsupported"):
        parse_system(text)


def test_parse_error_carries_position():
    with pytest.raises(ParseError) as info:
        parse_system("system tpda\nclocks x\nstates s0\ninitial s1\nfinal s0\n")
    assert "s1" in str(info.value)


def test_maze_system_round_trips_through_text():
    sys = maze_to_tpda(cargo_maze(), {"m": 7, "n": 8})
    again = parse_system(print_system(sys))
    assert len(again.transitions) == len(sys.transitions)
    assert again == sys


def test_constants_single_guard():
    sys = parse_system("system ta\nclocks x\nstates s0 s1\ninitial s0\nfinal s1\n"
                       "trans s0 s1 label=a guard=[x in [1,3]] reset={} op=nop\n")
    assert compute_constants(sys).M == 4
    assert compute_constants(sys).T == 1


def test_constants_without_bounds():
    sys = parse_system("system tpda\nclocks\nstack a\nstates s0\ninitial s0\nfinal s0\n"
                       "trans s0 s0 label=a guard=[] reset={} op=push(a)\n")
    assert compute_constants(sys).M == 1


def test_constants_of_cargo_maze():
    # largest bound is n = 8 on the exit pop
    assert compute_constants(maze_to_tpda(cargo_maze(), {"m": 7, "n": 8})).M == 9


def test_unbounded_pop_counts_its_lower_bound():
    sys = parse_system("system tpda\nclocks\nstack a\nstates s0 s1\ninitial s0\nfinal s1\n"
                       "trans s0 s0 label=a guard=[] reset={} op=push(a)\n"
                       "trans s0 s1 label=b guard=[] reset={} op=pop(a,[5,inf])\n")
    assert compute_constants(sys).M == 6


def _two_state(kind, op, stack=()):
    t = Transition(0, "s0", "s1", "a", (), frozenset(), op)
    return TimedSystem(kind, ("s0", "s1"), "s0", frozenset({"s1"}), ("x",), stack, (t,))


def test_validate_push_in_ta():
    diags = validate(_two_state("ta", StackOp("push", "a")))
    assert any("stack op in TA" in d for d in diags)


def test_validate_undeclared_pop_symbol():
    diags = validate(_two_state("tpda", StackOp("pop", "z", Interval(0, 1)), ("a",)))
    assert any("undeclared stack symbol" in d for d in diags)


def test_validate_well_formed():
    assert validate(_two_state("tpda", StackOp("push", "a"), ("a",))) == []


def test_interval_contains_and_text():
    iv = Interval(2)
    assert iv.contains(10**6) and not iv.contains(1)
    assert str(Interval(1, 3)) == "[1,3]" and str(iv) == "[2,inf]"
    with pytest.raises(ValueError):
        Interval(3, 1)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.booleans(), st.booleans())
def test_print_parse_round_trip(seed, ta, acyclic):
    prof = Profile(kind="ta" if ta else "tpda", acyclic=acyclic)
    sys = gen_random_system(seed, prof)
    assert parse_system(print_system(sys)) == sys
