"""K-tree terms, their colored-graph semantics, and the right-to-left decomposer."""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from typing import Optional

from .model import Interval
from .tcw import TCW, Edge, edge_key


@dataclass(frozen=True)
class AtomSucc:
    a: Optional[str]
    i: int
    b: Optional[str]
    j: int


@dataclass(frozen=True)
class AtomEdge:
    a: Optional[str]
    i: int
    b: Optional[str]
    j: int
    interval: Interval
    kind: str = "unknown"
    clock: Optional[str] = None


@dataclass(frozen=True)
class Forget:
    i: int
    child: object


@dataclass(frozen=True)
class Rename:
    i: int
    j: int
    child: object


@dataclass(frozen=True)
class Combine:
    left: object
    right: object


class TermError(ValueError):
    pass


@dataclass
class ColoredGraph:
    labels: list = field(default_factory=list)
    succ: set = field(default_factory=set)
    edges: list = field(default_factory=list)  # (u, v, Interval, kind, clock)
    chi: dict = field(default_factory=dict)  # color -> vertex

    @property
    def act(self):
        return sorted(self.chi)

    @property
    def right(self):
        return max(self.chi)

    @property
    def left(self):
        target = self.chi[self.right]
        pred = {v: u for u, v in self.succ}
        block = {target}
        v = target
        while v in pred:
            v = pred[v]
            block.add(v)
        return min(c for c, v in self.chi.items() if v in block)

    def blocks(self):
        nxt = {u: v for u, v in self.succ}
        starts = set(range(len(self.labels))) - {v for _, v in self.succ}
        out = []
        for s in sorted(starts):
            chain = [s]
            while chain[-1] in nxt:
                chain.append(nxt[chain[-1]])
            out.append(chain)
        return out


def _leaf_graph(a, b):
    return ColoredGraph(labels=[a, b])


def evaluate(term) -> ColoredGraph:
    if isinstance(term, AtomSucc):
        if term.i == term.j:
            raise TermError("atom with equal colors")
        g = ColoredGraph(labels=[term.a, term.b], succ={(0, 1)}, chi={term.i: 0, term.j: 1})
        return g
    if isinstance(term, AtomEdge):
        if term.i == term.j:
            raise TermError("atom with equal colors")
        return ColoredGraph(labels=[term.a, term.b], edges=[(0, 1, term.interval, term.kind, term.clock)],
                            chi={term.i: 0, term.j: 1})
    if isinstance(term, Forget):
        g = evaluate(term.child)
        if term.i not in g.chi:
            raise TermError(f"forget of unassigned color {term.i}")
        del g.chi[term.i]
        return g
    if isinstance(term, Rename):
        g = evaluate(term.child)
        if term.i not in g.chi:
            raise TermError(f"rename of unassigned color {term.i}")
        if term.j in g.chi and term.j != term.i:
            raise TermError(f"rename onto occupied color {term.j}")
        g.chi[term.j] = g.chi.pop(term.i)
        return g
    if isinstance(term, Combine):
        g1 = evaluate(term.left)
        g2 = evaluate(term.right)
        fuse = {g2.chi[c]: g1.chi[c] for c in g2.chi if c in g1.chi}
        remap = {}
        labels = list(g1.labels)
        for v in range(len(g2.labels)):
            if v in fuse:
                remap[v] = fuse[v]
                if labels[fuse[v]] != g2.labels[v]:
                    raise TermError("fused vertices carry different labels")
            else:
                remap[v] = len(labels)
                labels.append(g2.labels[v])
        succ = set(g1.succ) | {(remap[u], remap[v]) for u, v in g2.succ}
        edges = list(g1.edges) + [(remap[u], remap[v], iv, k, x) for u, v, iv, k, x in g2.edges]
        chi = dict(g1.chi)
        for c, v in g2.chi.items():
            chi[c] = remap[v]
        return ColoredGraph(labels, succ, edges, chi)
    raise TermError(f"not a term: {term!r}")


def _next(P, i):
    bigger = [p for p in P if p > i]
    return min(bigger) if bigger else float("inf")


def _prev(P, i):
    smaller = [p for p in P if p < i]
    return max(smaller) if smaller else 0


def _check(term, restricted, parent_right_edge=False):
    """Return the evaluated graph if the subterm is good (and restricted), else None."""
    if isinstance(term, AtomSucc):
        return evaluate(term) if term.i < term.j else None
    if isinstance(term, AtomEdge):
        if term.i >= term.j or (restricted and not parent_right_edge):
            return None
        return evaluate(term)
    if isinstance(term, Forget):
        g = _check(term.child, restricted)
        if g is None or term.i not in g.chi:
            return None
        del g.chi[term.i]
        return g
    if isinstance(term, Rename):
        g = _check(term.child, restricted)
        if g is None or term.i not in g.chi:
            return None
        P = g.act
        if not _prev(P, term.i) < term.j < _next(P, term.i):
            return None
        g.chi[term.j] = g.chi.pop(term.i)
        return g
    if isinstance(term, Combine):
        g1 = _check(term.left, restricted)
        if g1 is None:
            return None
        g2 = _check(term.right, restricted, parent_right_edge=isinstance(term.right, AtomEdge))
        if g2 is None:
            return None
        left2 = term.right.j if isinstance(term.right, AtomEdge) else g2.left
        if g1.right != left2:
            return None
        l1, r1 = g1.left, g1.right
        if not all(c in g1.chi for c in g2.chi if l1 <= c <= r1):
            return None
        try:
            return evaluate(term)
        except TermError:
            return None
    return None


def is_good(term) -> bool:
    try:
        return _check(term, False) is not None
    except TermError:
        return False


def is_restricted(term) -> bool:
    try:
        return _check(term, True) is not None
    except TermError:
        return False


def width(term) -> int:
    best = 0

    def walk(t):
        nonlocal best
        g = evaluate(t)
        best = max(best, len(g.chi))
        for c in (getattr(t, "child", None), getattr(t, "left", None), getattr(t, "right", None)):
            if c is not None:
                walk(c)

    walk(term)
    return best


def term_size(term) -> int:
    kids = [getattr(term, a) for a in ("child", "left", "right") if hasattr(term, a)]
    return 1 + sum(term_size(k) for k in kids)


def graph_to_tcw(g: ColoredGraph) -> TCW:
    """Read a colored graph whose succ edges form one chain back as a TCW."""
    blocks = g.blocks()
    if len(blocks) != 1:
        raise TermError(f"graph has {len(blocks)} blocks, expected one chain")
    order = blocks[0]
    pos = {v: k for k, v in enumerate(order)}
    labels = tuple(g.labels[v] for v in order)
    if labels[0] is not None:
        raise TermError("first point is not the epsilon point")
    edges = tuple(sorted((Edge(pos[u], pos[v], iv, k, x) for u, v, iv, k, x in g.edges), key=edge_key))
    return TCW(len(order) - 1, labels, edges)


# ---------------------------------------------------------------- text form

def _lab(a):
    return "eps" if a is None else a


def _iv(iv):
    return f"[{iv.low},{'inf' if iv.up is None else iv.up}]"


def _kind(kind, clock):
    return f"clock:{clock}" if kind == "clock" else kind


def term_to_text(term) -> str:
    if isinstance(term, AtomSucc):
        return f"({_lab(term.a)},{term.i})→({_lab(term.b)},{term.j})"
    if isinstance(term, AtomEdge):
        return f"({_lab(term.a)},{term.i})▷{_iv(term.interval)}@{_kind(term.kind, term.clock)}({_lab(term.b)},{term.j})"
    if isinstance(term, Forget):
        return f"forget_{term.i}({term_to_text(term.child)})"
    if isinstance(term, Rename):
        return f"rename_{{{term.i}→{term.j}}}({term_to_text(term.child)})"
    if isinstance(term, Combine):
        return f"({term_to_text(term.left)} ⊕ {term_to_text(term.right)})"
    raise TermError(f"not a term: {term!r}")


_TOKEN = re.compile(r"\s*(add_\{|forget_|rename_\{|⊕|→|▷|->|\(|\)|\[|\]|\{|\}|,|@|\^|inf|clock:[A-Za-z_][\w.'-]*|[A-Za-z_][\w.'-]*|\d+)")


class _TermParser:
    def __init__(self, text):
        self.toks = []
        pos = 0
        text = text.strip()
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if not m or m.end() == pos:
                raise TermError(f"bad term syntax at {pos}: {text[pos:pos + 10]!r}")
            self.toks.append(m.group(1))
            pos = m.end()
            while pos < len(text) and text[pos].isspace():
                pos += 1
        self.k = 0

    def peek(self, off=0):
        return self.toks[self.k + off] if self.k + off < len(self.toks) else None

    def take(self, expect=None):
        t = self.peek()
        if t is None or (expect is not None and t != expect):
            raise TermError(f"expected {expect!r}, got {t!r}")
        self.k += 1
        return t

    def num(self):
        t = self.take()
        if not t.isdigit():
            raise TermError(f"expected a color, got {t!r}")
        return int(t)

    def interval(self):
        self.take("[")
        low = self.num()
        self.take(",")
        up = self.take()
        self.take("]")
        return Interval(low, None if up == "inf" else int(up))

    def kind(self):
        if self.peek() == "@":
            self.take("@")
            k = self.take()
            if k.startswith("clock:"):
                return "clock", k[6:]
            return k, None
        return "unknown", None

    def pair(self):
        self.take("(")
        lab = self.take()
        self.take(",")
        c = self.num()
        self.take(")")
        return (None if lab == "eps" else lab), c

    def term(self):
        t = self.peek()
        if t == "forget_":
            self.take()
            i = self.num()
            self.take("(")
            child = self.term()
            self.take(")")
            return Forget(i, child)
        if t == "rename_{":
            self.take()
            i = self.num()
            self.take("→") if self.peek() == "→" else self.take("->")
            j = self.num()
            self.take("}")
            self.take("(")
            child = self.term()
            self.take(")")
            return Rename(i, j, child)
        if t == "add_{":
            self.take()
            i = self.num()
            self.take(",")
            j = self.num()
            self.take("}")
            self.take("^")
            self.take("{")
            self.take("▷")
            iv = self.interval()
            kind, clock = self.kind()
            self.take("}")
            self.take("(")
            child = self.term()
            self.take(")")
            return Combine(child, AtomEdge(None, i, None, j, iv, kind, clock))
        if t == "(":
            # either an atom "(a,i)→(b,j)" or a combine "(τ ⊕ τ)"
            if self.peek(2) == "," and self.peek(4) == ")":
                a, i = self.pair()
                arrow = self.take()
                if arrow in ("→", "->"):
                    b, j = self.pair()
                    return AtomSucc(a, i, b, j)
                if arrow == "▷":
                    iv = self.interval()
                    kind, clock = self.kind()
                    b, j = self.pair()
                    return AtomEdge(a, i, b, j, iv, kind, clock)
                raise TermError(f"unexpected {arrow!r}")
            self.take("(")
            left = self.term()
            if self.peek() == ")":  # plain grouping
                self.take(")")
                return left
            self.take("⊕")
            right = self.term()
            self.take(")")
            return Combine(left, right)
        if t is not None and re.fullmatch(r"\d+", t):
            # bare "i→j" atom with unlabelled points
            i = self.num()
            self.take("→") if self.peek() == "→" else self.take("->")
            j = self.num()
            return AtomSucc(None, i, None, j)
        raise TermError(f"unexpected token {t!r}")


def parse_term(text: str):
    p = _TermParser(text)
    t = p.term()
    if p.peek() is not None:
        raise TermError(f"trailing tokens from {p.peek()!r}")
    return t


# ---------------------------------------------------------------- decomposition

class DecomposeError(RuntimeError):
    pass


def _resets_from_edges(tcw: TCW, clocks):
    resets = [set() for _ in range(tcw.n + 1)]
    resets[0] = set(clocks)
    for e in tcw.edges:
        if e.kind == "clock":
            resets[e.src].add(e.clock)
    return [frozenset(r) for r in resets]


class _Decomposer:
    def __init__(self, tcw, clocks, resets):
        self.tcw = tcw
        self.clocks = list(clocks)
        self.order = {x: k for k, x in enumerate(self.clocks)}
        self.resets = resets
        self.lab = tcw.labels
        self.stack_edges = [e for e in tcw.edges if e.kind == "stack"]
        self.pushes = {e.src: e for e in self.stack_edges}

    def last_resets(self, l, r):
        out = set()
        for x in self.clocks:
            for p in range(r, l - 1, -1):
                if x in self.resets[p]:
                    out.add(p)
                    break
        return out

    def need(self, l, r, E, keep):
        H = {e.src for e in E if e.src < l}
        return {l, r} | H | self.last_resets(l, r) | {k for k in keep if k >= l or k in H}

    def atom_edge(self, e):
        return AtomEdge(self.lab[e.src], e.src, self.lab[e.dst], e.dst, e.interval, e.kind, e.clock)

    def finish(self, term, act, l, r, E, keep):
        """Forget every internal active point that the enclosing context no longer needs."""
        need = self.need(l, r, E, keep)
        for p in sorted(act - need):
            if not l < p < r:
                raise DecomposeError(f"cannot forget endpoint or hanging point {p}")
            term = Forget(p, term)
        act = act & need
        if act != need:
            raise DecomposeError(f"active set {sorted(act)} differs from required {sorted(need)}")
        return term, act

    def reset_split_point(self, l, r, E):
        if self.stack_edges:
            return None
        cands = [p for p in range(r - 1, l, -1) if self.resets[p]]
        return cands[0] if cands else None

    def build(self, l, r, E, keep):
        """Term for the split word: block l..r, edges E (targets in (l, r]) plus hanging sources."""
        into_r = [e for e in E if e.dst == r]
        clock_in = sorted((e for e in into_r if e.kind == "clock"), key=lambda e: self.order[e.clock])
        if clock_in:
            e = clock_in[0]
            sub_keep = set(keep) | ({e.src} if e.src >= l else set())
            t, act = self.build(l, r, E - {e}, sub_keep)
            return self.finish(Combine(t, self.atom_edge(e)), act | {e.src}, l, r, E, keep)
        stack_in = [e for e in into_r if e.kind == "stack"]
        if [e for e in into_r if e.kind not in ("clock", "stack")]:
            raise DecomposeError("decompose needs edge kinds")
        if stack_in:
            e = stack_in[0]
            if e.src == l:
                t, act = self.build(l, r, E - {e}, keep)
                return self.finish(Combine(t, self.atom_edge(e)), act, l, r, E, keep)
            return self.split(l, e.src, r, E, keep)
        s = self.reset_split_point(l, r, E)
        if s is not None:
            return self.split(l, s, r, E, keep)
        if r == l + 1:
            if E:
                raise DecomposeError("edges left on an atomic block")
            t = AtomSucc(self.lab[l], l, self.lab[r], r)
            return self.finish(t, {l, r}, l, r, E, keep)
        t, act = self.build(l, r - 1, E, {k for k in keep if k != r})
        t = Combine(t, AtomSucc(self.lab[r - 1], r - 1, self.lab[r], r))
        return self.finish(t, act | {r}, l, r, E, keep)

    def split(self, l, s, r, E, keep):
        E2 = frozenset(e for e in E if e.dst > s)
        E1 = E - E2
        crossing = {e.src for e in E2 if l <= e.src < s}
        keep1 = {k for k in keep if k < s} | crossing
        keep2 = {k for k in keep if k >= s}
        t1, a1 = self.build(l, s, E1, keep1)
        t2, a2 = self.build(s, r, E2, keep2)
        return self.finish(Combine(t1, t2), a1 | a2, l, r, E, keep)


def decompose_positions(tcw: TCW, clocks=(), resets=None):
    """Decompose using positions as colors; returns (term, active positions at the root)."""
    if tcw.n == 0:
        raise DecomposeError("a single point has no tree term")
    clocks = list(clocks) or sorted({e.clock for e in tcw.edges if e.kind == "clock"})
    if resets is None:
        resets = _resets_from_edges(tcw, clocks)
    else:
        resets = [frozenset(r) for r in resets]
        resets[0] = frozenset(clocks)
    d = _Decomposer(tcw, clocks, resets)
    return d.build(0, tcw.n, frozenset(tcw.edges), set())


def compact(term):
    """Recolor a term whose colors are positions into colors 1..width, inserting renames."""

    def shift(t, src, dst):
        # src, dst: increasing color lists for the same points; move from the top down
        # when colors grow and from the bottom up when they shrink
        pairs = list(zip(src, dst))
        up = [p for p in pairs if p[1] > p[0]]
        down = [p for p in pairs if p[1] < p[0]]
        for old, new in sorted(up, reverse=True):
            t = Rename(old, new, t)
        for old, new in sorted(down):
            t = Rename(old, new, t)
        return t

    def place(t, act, rank):
        # atoms are recolored in place so an edge atom stays a direct child of its combine
        if isinstance(t, (AtomSucc, AtomEdge)):
            return replace(t, i=rank[act[0]], j=rank[act[1]])
        return shift(t, list(range(1, len(act) + 1)), [rank[p] for p in act])

    def go(t):
        if isinstance(t, AtomSucc):
            return AtomSucc(t.a, 1, t.b, 2), [t.i, t.j]
        if isinstance(t, AtomEdge):
            return AtomEdge(t.a, 1, t.b, 2, t.interval, t.kind, t.clock), [t.i, t.j]
        if isinstance(t, Forget):
            c, act = go(t.child)
            k = act.index(t.i)
            rest = act[:k] + act[k + 1:]
            c = Forget(k + 1, c)
            src = [a + 1 for a in range(len(act)) if a != k]
            return shift(c, src, list(range(1, len(rest) + 1))), rest
        if isinstance(t, Combine):
            c1, a1 = go(t.left)
            c2, a2 = go(t.right)
            union = sorted(set(a1) | set(a2))
            rank = {p: k + 1 for k, p in enumerate(union)}
            c1 = place(c1, a1, rank)
            c2 = place(c2, a2, rank)
            return Combine(c1, c2), union
        raise TermError("compact expects a term without renames")

    return go(term)[0]


def decompose(tcw: TCW, K: Optional[int] = None, clocks=(), resets=None):
    """Restricted tree term for a well-timed TCW, colored with 1..width.

    At the root the active points are the two endpoints and the last reset point
    of each clock; ``close=True`` style forgetting of those is left to callers
    (see :func:`close_term`), since the system automaton never forgets them.
    """
    term, _ = decompose_positions(tcw, clocks, resets)
    out = compact(term)
    if K is not None and width(out) > K:
        raise DecomposeError(f"decomposition needs {width(out)} colors, only {K} available")
    return out


def close_term(term):
    """Forget every color except the two endpoints of the root."""
    g = evaluate(term)
    P = g.act
    left = g.left
    for c in P:
        if c != left and c != P[-1]:
            term = Forget(c, term)
    return term
