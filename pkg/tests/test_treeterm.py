import pytest
from hypothesis import given, settings, strategies as st

from tpdatree.model import Interval
from tpdatree.oracle import gen_random_tcw
from tpdatree.tcw import TCW, Edge
from tpdatree.treeterm import (AtomEdge, AtomSucc, Combine, DecomposeError, Rename, TermError, close_term,
                               decompose, evaluate, graph_to_tcw, is_good, is_restricted, parse_term, term_to_text,
                               width)


def test_atom_succ_graph():
    g = evaluate(AtomSucc("a", 1, "b", 2))
    assert len(g.labels) == 2 and len(g.succ) == 1 and sorted(g.chi) == [1, 2]


def test_tau1_graph(tau1):
    g = evaluate(tau1)
    assert len(g.labels) == 4
    assert g.act == [1, 3, 4, 5]
    chi = g.chi
    assert g.succ == {(chi[3], chi[4]), (chi[4], chi[5])}
    spans = sorted((u, v, iv) for u, v, iv, _, _ in g.edges)
    assert spans == sorted([(chi[1], chi[4], Interval(2)), (chi[1], chi[5], Interval(3)),
                            (chi[3], chi[5], Interval(1, 3))])


def test_tau3_graph(tau3):
    g = evaluate(tau3)
    assert len(g.labels) == 7
    assert g.act == [1, 2, 3, 4, 6]


def test_running_terms_are_good(tau1, tau2, tau3):
    assert is_good(tau1) and is_good(tau2) and is_good(tau3)
    assert is_restricted(tau1) and is_restricted(tau3)


def test_decreasing_atom_is_not_good():
    assert not is_good(AtomSucc(None, 2, None, 1))


def test_combine_needs_matching_ends():
    assert not is_good(Combine(AtomSucc(None, 1, None, 2), AtomSucc(None, 3, None, 4)))
    assert is_good(Combine(AtomSucc(None, 1, None, 2), AtomSucc(None, 2, None, 4)))


def test_restricted_edges_hang_off_combines():
    base = AtomSucc(None, 1, None, 2)
    edge = AtomEdge(None, 1, None, 2, Interval(0, 1))
    assert is_restricted(Combine(base, edge))
    assert not is_restricted(edge)
    assert is_good(edge)


def test_rename_must_keep_order():
    t = Combine(AtomSucc(None, 1, None, 3), AtomSucc(None, 3, None, 5))
    assert is_good(Rename(3, 4, t))
    assert not is_good(Rename(3, 6, t))


def test_widths(tau3):
    assert width(AtomSucc(None, 1, None, 2)) == 2
    assert width(tau3) == 6


def test_single_succ_decomposes_to_atom():
    term = decompose(TCW(1, (None, "a")))
    assert isinstance(term, AtomSucc)


def test_one_clock_automaton_word_uses_three_colors():
    # five points, x reset at 0, 2 and 3 and checked after each reset
    edges = (Edge(0, 2, Interval(1), "clock", "x"), Edge(2, 3, Interval(0, 1), "clock", "x"),
             Edge(3, 5, Interval(2, 2), "clock", "x"))
    tcw = TCW(5, (None, "a", "b", "c", "d", "e"), edges)
    term = decompose(tcw, clocks=("x",))
    assert width(term) <= 3
    assert graph_to_tcw(evaluate(term)).key() == tcw.key()


def test_color_budget_enforced():
    edges = (Edge(0, 2, Interval(1), "clock", "x"), Edge(1, 3, Interval(1), "clock", "y"))
    tcw = TCW(3, (None, "a", "b", "c"), edges)
    with pytest.raises(DecomposeError):
        decompose(tcw, K=2, clocks=("x", "y"))


def test_close_term_leaves_endpoints(tau1):
    g = evaluate(close_term(tau1))
    assert g.act == [1, 5] or g.act == [g.left, g.right]


def test_text_round_trip(tau3):
    assert parse_term(term_to_text(tau3)) == tau3


def test_bad_text():
    with pytest.raises(TermError):
        parse_term("forget_(")


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 100_000), st.sampled_from([("x",), ("x", "y")]), st.booleans())
def test_decompose_properties(seed, clocks, stack):
    tcw, resets, _ = gen_random_tcw(seed, clocks=clocks, stack=stack)
    term = decompose(tcw, clocks=clocks, resets=resets)
    has_stack = any(e.kind == "stack" for e in tcw.edges)
    bound = 3 * len(clocks) + 3 if has_stack else len(clocks) + 2
    assert width(term) <= bound
    assert is_restricted(term) and is_good(term)
    assert graph_to_tcw(evaluate(term)).key() == tcw.key()
    assert parse_term(term_to_text(term)) == term
