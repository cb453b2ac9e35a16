from importlib import resources

import pytest

from tpdatree.model import parse_system
from tpdatree.treeterm import Combine, Forget, Rename, parse_term


def data_path(name):
    return resources.files("tpdatree").joinpath("data", name)


def load_bundled(name):
    return parse_system(data_path(name).read_text())


# the three terms of the running realizability example, M = 4
TAU1 = "add_{1,5}^{▷[3,inf]}(add_{3,5}^{▷[1,3]}(((add_{1,4}^{▷[2,inf]}(3→4)) ⊕ 4→5)))"
TAU2 = "add_{2,6}^{▷[3,inf]}(add_{4,6}^{▷[1,3]}(((add_{3,5}^{▷[0,2]}(4→5)) ⊕ 5→6)))"


@pytest.fixture(scope="session")
def tau1():
    return parse_term(TAU1)


@pytest.fixture(scope="session")
def tau2():
    return parse_term(TAU2)


@pytest.fixture(scope="session")
def tau3(tau1, tau2):
    return Forget(5, Combine(tau1, Rename(3, 4, Rename(4, 5, Forget(5, tau2)))))


TINY_TA = """system ta
clocks x
states s0 s1
initial s0
final s1
trans s0 s1 label=a guard=[] reset={} op=nop
"""


@pytest.fixture
def tiny_ta():
    return parse_system(TINY_TA)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
