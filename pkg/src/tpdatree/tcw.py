"""Words with timing constraints (TCWs): run semantics, well-timedness, realizability."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Sequence

from .model import Interval, TimedSystem, Transition


@dataclass(frozen=True)
class Edge:
    src: int
    dst: int
    interval: Interval
    kind: str = "unknown"  # clock | stack | unknown
    clock: Optional[str] = None

    @property
    def tag(self):
        return f"clock:{self.clock}" if self.kind == "clock" else self.kind


def edge_key(e: Edge):
    up = float("inf") if e.interval.up is None else e.interval.up
    return (e.src, e.dst, e.interval.low, up, e.kind, e.clock or "")


@dataclass(frozen=True)
class TCW:
    n: int
    labels: tuple  # labels[0] is None (epsilon)
    edges: tuple = ()

    def __post_init__(self):
        if len(self.labels) != self.n + 1 or self.labels[0] is not None:
            raise ValueError("position 0 must be the epsilon point")
        for e in self.edges:
            if not 0 <= e.src < e.dst <= self.n:
                raise ValueError(f"edge {e.src}->{e.dst} out of order")

    def key(self):
        """Canonical form used for isomorphism checks (positions are totally ordered)."""
        return (self.n, self.labels, tuple(sorted((e.src, e.dst, e.interval.low, e.interval.up if e.interval.up is not None else -1, e.tag) for e in self.edges)))


class RunError(ValueError):
    pass


class Unrealizable(Exception):
    pass


def run_to_tcw(sys: TimedSystem, run: Sequence[Transition], complete: bool = True) -> TCW:
    """TCW of an abstract run; ``complete`` also demands an empty stack at the end."""
    last_reset = {x: 0 for x in sys.clocks}
    stack = []
    state = sys.initial
    edges = []
    for k, t in enumerate(run, 1):
        if t.source != state:
            raise RunError(f"transition {t.tid} does not start in {state}")
        state = t.target
        for x, iv in t.guard:
            edges.append(Edge(last_reset[x], k, iv, "clock", x))
        if t.op.kind == "push":
            stack.append((t.op.symbol, k))
        elif t.op.kind == "pop":
            if not stack:
                raise RunError(f"pop at position {k} without matching push")
            sym, p = stack.pop()
            if sym != t.op.symbol:
                raise RunError(f"pop of {t.op.symbol} at position {k} matches push of {sym}")
            edges.append(Edge(p, k, t.op.interval, "stack"))
        for x in t.resets:
            last_reset[x] = k
    if complete and stack:
        raise RunError(f"push at position {stack[-1][1]} is never popped")
    labels = (None,) + tuple(t.label for t in run)
    return TCW(len(run), labels, tuple(sorted(edges, key=edge_key)))


def check_well_timed(tcw: TCW) -> bool:
    stack_edges = sorted((e.src, e.dst) for e in tcw.edges if e.kind == "stack")
    for a, (i, j) in enumerate(stack_edges):
        for i2, j2 in stack_edges[a + 1:]:
            if i2 < j and j < j2 or i2 == i or j2 == j or i2 == j or j2 == i:
                return False
    by_clock = {}
    for e in tcw.edges:
        if e.kind == "clock":
            by_clock.setdefault(e.clock, []).append((e.src, e.dst))
    for pairs in by_clock.values():
        for i, j in pairs:
            for i2, j2 in pairs:
                if i < i2 and not j <= i2:
                    return False
        if len({j for _, j in pairs}) != len(pairs):
            return False
    return True


def constraint_arcs(tcw: TCW):
    """Arcs (u, v, w) meaning ts(v) - ts(u) <= w."""
    arcs = []
    for k in range(tcw.n):
        arcs.append((k + 1, k, 0))
    for e in tcw.edges:
        if e.interval.up is not None:
            arcs.append((e.src, e.dst, e.interval.up))
        arcs.append((e.dst, e.src, -e.interval.low))
    return arcs


def realize(tcw: TCW) -> tuple:
    """Minimal integer timestamps with ts(0)=0, or raise Unrealizable.

    Shortest paths in the constraint graph give the largest solution; the
    minimal one is the negated shortest distance into position 0 from each
    position, which is computed on the reversed graph.
    """
    n = tcw.n + 1
    arcs = constraint_arcs(tcw)
    # ts(v) - ts(u) <= w  <=>  (-ts(u)) - (-ts(v)) <= w; potentials p = -ts solve
    # the reversed system, and shortest distances from 0 maximise p, i.e. minimise ts.
    rev = [(v, u, w) for u, v, w in arcs]
    dist = [None] * n
    dist[0] = 0
    for _ in range(n):
        changed = False
        for u, v, w in rev:
            if dist[u] is not None and (dist[v] is None or dist[u] + w < dist[v]):
                dist[v] = dist[u] + w
                changed = True
        if not changed:
            break
    else:
        raise Unrealizable("negative cycle in the constraint graph")
    for u, v, w in rev:
        if dist[u] is not None and (dist[v] is None or dist[u] + w < dist[v]):
            raise Unrealizable("negative cycle in the constraint graph")
    ts = tuple(-d for d in dist)
    if not satisfies(tcw, ts):
        raise AssertionError("realize produced an invalid timestamp map")
    return ts


def satisfies(tcw: TCW, ts: Sequence) -> bool:
    if len(ts) != tcw.n + 1 or ts[0] != 0:
        return False
    if any(ts[k] > ts[k + 1] for k in range(tcw.n)):
        return False
    return all(e.interval.contains(ts[e.dst] - ts[e.src]) for e in tcw.edges)


def is_realizable(tcw: TCW) -> bool:
    try:
        realize(tcw)
        return True
    except Unrealizable:
        return False


def to_timed_word(tcw: TCW, ts: Sequence) -> list:
    return [(tcw.labels[k], ts[k]) for k in range(1, tcw.n + 1)]


def tcw_to_json(tcw: TCW, ts: Optional[Sequence] = None) -> dict:
    return {
        "positions": [
            {"idx": k, "label": tcw.labels[k] if tcw.labels[k] is not None else "eps", "ts": None if ts is None else ts[k]}
            for k in range(tcw.n + 1)
        ],
        "edges": [
            {"src": e.src, "dst": e.dst, "low": e.interval.low,
             "up": "inf" if e.interval.up is None else e.interval.up, "kind": e.tag}
            for e in tcw.edges
        ],
    }


def tcw_from_json(data) -> tuple:
    if isinstance(data, str):
        data = json.loads(data)
    pos = sorted(data["positions"], key=lambda p: p["idx"])
    labels = tuple(None if p["label"] in ("eps", None) else p["label"] for p in pos)
    edges = []
    for e in data["edges"]:
        tag = e["kind"]
        kind, clock = (("clock", tag.split(":", 1)[1]) if tag.startswith("clock:") else (tag, None))
        up = None if e["up"] in ("inf", None) else int(e["up"])
        edges.append(Edge(int(e["src"]), int(e["dst"]), Interval(int(e["low"]), up), kind, clock))
    tcw = TCW(len(labels) - 1, labels, tuple(sorted(edges, key=edge_key)))
    ts = None if any(p.get("ts") is None for p in pos) else tuple(p["ts"] for p in pos)
    return tcw, ts
