import pytest
from hypothesis import given, settings, strategies as st

from tpdatree.engine import check_emptiness, verify_witness
from tpdatree.mazegen import (CARGO_RUN, Balanced, Corridor, GlobalBound, MazeError, VisitOnce, bundled_examples,
                              check_maze, cargo_maze, lift_place_run, maze_to_tpda, parse_maze)
from tpdatree.oracle import oracle_check
from tpdatree.model import compute_constants, print_system, parse_system, validate
from tpdatree.tcw import realize, run_to_tcw

MINIMAL = "maze tiny\nplaces 1 2\nentry 1\nexit 2\ncorridor 1 -> 2\n"


def test_minimal_maze():
    maze = parse_maze(MINIMAL)
    assert maze.corridors == (Corridor("1", "2", False, 0, 0),)
    sys = maze_to_tpda(maze)
    assert not validate(sys)
    assert sys.clocks == ("x",)
    assert check_emptiness(sys).status == "NONEMPTY"


def test_zero_corridor_needs_no_intermediate_state():
    sys = maze_to_tpda(parse_maze(MINIMAL))
    assert not any(s.startswith("c") for s in sys.states)
    timed = maze_to_tpda(parse_maze(MINIMAL.replace("1 -> 2", "1 -> 2 [1,1]")))
    assert any(s.startswith("c") for s in timed.states)


def test_cargo_parse():
    maze = cargo_maze()
    assert len(maze.places) == 7 and maze.entry == "6" and maze.exit == "2"
    c73 = [c for c in maze.corridors if (c.src, c.dst) == ("7", "3")]
    assert len(c73) == 1 and (c73[0].low, c73[0].up) == (1, 2)
    assert VisitOnce("1") in maze.constraints
    assert Balanced("7", "4", "ENTRY", "1") in maze.constraints
    assert GlobalBound("ENTRY", "1", "m", "m") in maze.constraints
    assert dict(maze.params) == {"m": 7, "n": 8}


def test_bundled_bounds():
    ex = {e.name: e.maze for e in bundled_examples()}
    assert GlobalBound("ENTRY", "EXIT", 5, 7) in ex["maze2"].constraints
    assert GlobalBound("ENTRY", "EXIT", 9, 9) in ex["maze3"].constraints
    assert ex["maze4"].stay("4") == (1, 2)
    assert ex["maze4"].stay("1") == (0, 0)


def test_parameters_bind_constants():
    sys = maze_to_tpda(cargo_maze(), {"m": 2, "n": 3})
    assert compute_constants(sys).M == 4
    with pytest.raises(MazeError, match="unbound"):
        maze_to_tpda(parse_maze(MINIMAL + "global ENTRY EXIT [k,k]\n"))


def test_crossing_bounds_rejected():
    text = MINIMAL.replace("places 1 2", "places 1 2 3 4") + (
        "corridor 1 -> 3\ncorridor 3 -> 4\ncorridor 4 -> 2\nvisit_once 3 4\n"
        "global ENTRY visit(4) [0,inf]\nglobal visit(3) EXIT [0,inf]\nglobal visit(3) visit(4) [0,inf]\n")
    with pytest.raises(MazeError, match="well-nested"):
        check_maze(parse_maze(text))


@pytest.mark.parametrize("text, msg", [
    ("maze a\nplaces 1\nentry 1\nexit 1\n", "differ"),
    ("maze a\nplaces 1 2\nentry 1\nexit 2\ncorridor 1 -> 3\n", "undeclared"),
    ("maze a\nplaces 1 2\nentry 1\nexit 2\nvisit_once 2\nglobal EXIT visit(2) [0,1]\n", "reversed"),
    ("maze a\nplaces 1 2\nentry 1\nexit 2\nglobal ENTRY visit(1) [0,1]\n", "visit_once"),
    ("maze a\nplaces 1 2\nentry 1\nexit 2\nteleport 1 2\n", "unknown"),
    ("maze a\nplaces 1 2\nentry 1\n", "required"),
])
def test_malformed_mazes(text, msg):
    with pytest.raises(MazeError, match=msg):
        check_maze(parse_maze(text))


def test_cargo_run_lifts():
    sys = maze_to_tpda(cargo_maze(), {"m": 7, "n": 8})
    run, ts = lift_place_run(sys, CARGO_RUN)
    assert verify_witness(sys, run, ts)
    assert ts[-1] == 15
    # without the pinned times the same run can still exit by 15
    assert realize(run_to_tcw(sys, run))[-1] <= 15


def test_lifting_rejects_wrong_times():
    sys = maze_to_tpda(cargo_maze(), {"m": 7, "n": 8})
    bad = CARGO_RUN[:3] + ((3, 0),) + CARGO_RUN[4:]
    with pytest.raises(MazeError):
        lift_place_run(sys, bad)


@pytest.mark.parametrize("ex", bundled_examples(), ids=lambda e: e.name)
def test_generated_systems_are_valid(ex):
    sys = maze_to_tpda(ex.maze, dict(ex.params))
    assert not validate(sys)
    assert len(sys.clocks) == 1
    assert parse_system(print_system(sys)) == sys


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 3), st.integers(0, 3), st.integers(0, 3))
def test_single_corridor_timing(lo, extra, stay):
    up = lo + extra
    text = MINIMAL.replace("1 -> 2", f"1 -> 2 [{lo},{up}]") + f"stay 1 [{stay},{stay}]\n"
    text += f"global ENTRY EXIT [{lo + stay},{lo + stay}]\n"
    v = check_emptiness(maze_to_tpda(parse_maze(text)))
    assert v.nonempty and v.witness.ts[-1] == lo + stay


@pytest.mark.parametrize("name, length", [("maze2", 11), ("maze3", 19)])
def test_oracle_finds_small_maze_runs(name, length):
    ex = {e.name: e for e in bundled_examples()}[name]
    sys = maze_to_tpda(ex.maze)
    o = oracle_check(sys, max_len=24)
    assert o.status == "NONEMPTY" and len(o.run) == length
    assert verify_witness(sys, o.run, o.ts)


def test_oracle_finds_nothing_in_maze4():
    ex = {e.name: e for e in bundled_examples()}["maze4"]
    assert oracle_check(maze_to_tpda(ex.maze), max_len=24).status == "EMPTY_UPTO"
