"""Emptiness by saturating the product of the realizability and system automata.

Canonical mode stores states without colors: points are listed left to right and
all indices are positions in that list.  A state is the tuple

    (dl, tsm, acc, l, push, pop, G, Z)

with ``dl`` the guessed transition ids, ``tsm`` residues modulo M shifted so the
first one is 0, ``acc`` the short-gap flags, ``l`` the index of L, ``G`` a clock
bitmask and ``Z`` per clock the index of a hanging reset point or -1.
"""

from __future__ import annotations

import itertools
import random
import sys as _sys
import time
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

from .asys import DUMMY, SState, info, s_accepting, s_add_clock_edge, s_add_stack_edge, s_combine, s_forget, s_leaf_succ, s_rename
from .avalid import VState, v_combine, v_forget, v_leaf_edge, v_leaf_succ, v_rename
from .model import Interval, TimedSystem, compute_constants
from .tcw import TCW, realize, run_to_tcw, Unrealizable
from .treeterm import AtomEdge, AtomSucc, Combine, Forget, Rename, close_term, compact, evaluate, graph_to_tcw


class CapExceeded(RuntimeError):
    pass


DEAD = "dead"


@dataclass(frozen=True)
class EngineOptions:
    K: Optional[int] = None
    canonical: bool = True
    aggressive: bool = True
    strict_forget: bool = True
    eager_edges: bool = True  # add edges whose source is already determined as soon as possible
    state_cap: int = 5_000_000
    stop_at_accept: bool = True
    shuffle_seed: Optional[int] = None  # permute the worklist, for order-independence checks
    threads: int = 1  # accepted for interface parity; saturation runs on one thread
    trace: Optional[Callable] = None


@dataclass(frozen=True)
class Witness:
    term: object
    tcw: TCW
    ts: tuple
    run: tuple  # transitions, dummy removed


@dataclass
class Verdict:
    status: str  # EMPTY | NONEMPTY | UNDECIDED-CAPPED
    witness: Optional[Witness] = None
    stats: dict = field(default_factory=dict)

    @property
    def nonempty(self):
        return self.status == "NONEMPTY"


@dataclass(frozen=True)
class ProductState:
    v: VState
    s: SState
    canonical: bool = True


def default_K(sys: TimedSystem) -> int:
    n = len(sys.clocks)
    return n + 2 if sys.kind == "ta" else 3 * n + 3


def _edge_ok(acc_e, d, iv: Interval) -> bool:
    return (acc_e and iv.contains(d)) or (not acc_e and iv.up is None)


def _solve_acc(n, gaps, cons, M, fixed=None):
    """All acc vectors (last entry false) meeting each constraint
    ``acc[lo] and ... and acc[hi-1] and gap(lo, hi) < M  <=>  want``."""
    forced = dict(fixed or {})
    for lo, hi, want in cons:
        if hi == lo + 1:
            if forced.get(lo, want) != want:
                return []
            forced[lo] = want
    free = [k for k in range(n - 1) if k not in forced]
    out = []
    for guess in itertools.product((True, False), repeat=len(free)):
        acc = [False] * n
        for k, v in forced.items():
            acc[k] = v
        for k, v in zip(free, guess):
            acc[k] = v
        ok = True
        for lo, hi, want in cons:
            if (all(acc[lo:hi]) and sum(gaps[lo:hi]) < M) != want:
                ok = False
                break
        if ok:
            out.append(tuple(acc))
    return out


class _Canonical:
    def __init__(self, sys: TimedSystem, K: int, M: int, opts: EngineOptions):
        self.sys = sys
        self.si = si = info(sys)
        self.K, self.M, self.opts = K, M, opts
        self.nX = len(sys.clocks)
        self.ids = si.ids
        self.rmask = {t: sum(1 << x for x in si.resets[t]) for t in si.ids}
        self.gmask = {t: sum(1 << x for x in si.guard[t]) for t in si.ids}
        self.guards = {t: tuple(sorted(si.guard[t].items())) for t in si.ids}
        self.by_source = {}
        for t in si.ids[1:]:
            self.by_source.setdefault(si.source[t], []).append(t)

    # -------------------------------------------------------------- helpers

    def normalize(self, dl, tsm, acc, l, push, pop, G, Z):
        r = tsm[0]
        if r:
            M = self.M
            tsm = tuple((v - r) % M for v in tsm)
        return (dl, tsm, acc, l, push, pop, G, Z)

    def gaps(self, tsm):
        M = self.M
        return [(tsm[k + 1] - tsm[k]) % M for k in range(len(tsm) - 1)]

    def closed_right(self, st):
        """The right end may become internal: its pop and guards are settled (C3, C4)."""
        t = st[0][-1]
        if self.si.pop[t] is not None and not st[5]:
            return False
        return (self.gmask[t] & ~st[6]) == 0

    def ready_left(self, st):
        """The left end may be fused with a right end (C3 for a push at L)."""
        return self.si.push[st[0][st[3]]] is None or st[4]

    def accepting(self, st):
        dl, tsm, acc, l, push, pop, G, Z = st
        if l != 0 or dl[0] != DUMMY:
            return False
        t = dl[-1]
        si = self.si
        if si.target[t] not in si.finals or si.push[t] is not None:
            return False
        if si.pop[t] is not None and not pop:
            return False
        return (self.gmask[t] & ~G) == 0

    # -------------------------------------------------------------- rules

    def leaves(self):
        M = self.M
        nz = (-1,) * self.nX
        for t1 in self.ids:
            for t2 in self.by_source.get(self.si.target[t1], ()):
                for d in range(M):
                    for a in (True, False):
                        yield ((t1, t2), (0, d), (a, False), 0, False, False, 0, nz), ("leaf",)

    def add_edges(self, st):
        dl, tsm, acc, l, push, pop, G, Z = st
        si = self.si
        n = len(dl)
        R = n - 1
        tR = dl[R]
        out = []
        gaps = self.gaps(tsm)
        # stack edge from L to R
        if not push and not pop:
            c = si.push[dl[l]]
            p = si.pop[tR]
            if c is not None and p is not None and p[0] == c:
                if self._existing_ok(tsm, acc, gaps, l, R, p[1]):
                    out.append(((dl, tsm, acc, l, True, True, G, Z), ("edge", st, "stack", None, l, False, p[1])))
        for x, iv in self.guards[tR]:
            bit = 1 << x
            if G & bit:
                continue
            # last point of P before R resetting x
            i = R - 1
            while i >= 0 and not (self.rmask[dl[i]] & bit):
                i -= 1
            G2 = G | bit
            if i >= 0:
                if self._existing_ok(tsm, acc, gaps, i, R, iv):
                    if i >= l:
                        out.append(((dl, tsm, acc, l, push, pop, G2, Z), ("edge", st, "clock", x, i, False, iv)))
                    elif Z[x] in (-1, i):
                        Z2 = Z[:x] + (i,) + Z[x + 1:]
                        out.append(((dl, tsm, acc, l, push, pop, G2, Z2), ("edge", st, "clock", x, i, False, iv)))
            if Z[x] != -1 or n + 1 > self.K:
                continue
            # fresh hanging point at gap g, right of every point resetting x
            for g in range(max(i + 1, 0), l + 1):
                for t in si.resetting[x]:
                    if t == DUMMY and g != 0:
                        continue
                    if g == 0 and dl[0] == DUMMY:
                        continue
                    for new in self._fresh_states(st, g, t, x, iv, G2, gaps):
                        out.append((new, ("edge", st, "clock", x, g, True, iv)))
        return out

    def forced_edge(self, st):
        """An edge into R whose source can only be a point of the block [L, R).

        Returns None when no edge is forced, DEAD when a forced edge fails its
        check, otherwise the extended state with its derivation.  A clock guard at
        R must be justified by the last reset before R; when that reset lies in
        the block it is final.  A push at L and a pop at R that are both open can
        only match each other."""
        dl, tsm, acc, l, push, pop, G, Z = st
        si = self.si
        R = len(dl) - 1
        tR = dl[R]
        gaps = None
        if not push and not pop:
            c = si.push[dl[l]]
            p = si.pop[tR]
            if c is not None and p is not None:
                gaps = self.gaps(tsm)
                if p[0] != c or not self._existing_ok(tsm, acc, gaps, l, R, p[1]):
                    return DEAD
                return (dl, tsm, acc, l, True, True, G, Z), ("edge", st, "stack", None, l, False, p[1])
        for x, iv in self.guards[tR]:
            bit = 1 << x
            if G & bit:
                continue
            i = R - 1
            while i >= l and not (self.rmask[dl[i]] & bit):
                i -= 1
            if i < l:
                continue
            gaps = gaps or self.gaps(tsm)
            if not self._existing_ok(tsm, acc, gaps, i, R, iv):
                return DEAD
            return (dl, tsm, acc, l, push, pop, G | bit, Z), ("edge", st, "clock", x, i, False, iv)
        return None

    def _existing_ok(self, tsm, acc, gaps, i, R, iv):
        a = all(acc[i:R]) and sum(gaps[i:R]) < self.M
        return _edge_ok(a, (tsm[R] - tsm[i]) % self.M, iv)

    def _fresh_states(self, st, g, t, x, iv, G2, gaps_old):
        dl, tsm, acc, l, push, pop, G, Z = st
        M = self.M
        n = len(dl) + 1
        R = n - 1
        dl2 = dl[:g] + (t,) + dl[g:]
        Z2 = tuple(z + 1 if z >= g else z for z in Z)
        Z2 = Z2[:x] + (g,) + Z2[x + 1:]
        seen = set()
        out = []
        for v in range(M):
            tsm2 = tsm[:g] + (v,) + tsm[g:]
            gaps = [(tsm2[k + 1] - tsm2[k]) % M for k in range(n - 1)]
            d = (tsm2[R] - v) % M
            fixed = {k if k < g else k + 1: acc[k] for k in range(len(acc) - 1) if k != g - 1}
            for acc_e in (True, False):
                if not _edge_ok(acc_e, d, iv):
                    continue
                cons = [(g, R, acc_e)]
                if g > 0:
                    cons.append((g - 1, g + 1, acc[g - 1]))
                for acc2 in _solve_acc(n, gaps, cons, M, fixed):
                    new = self.normalize(dl2, tsm2, acc2, l + 1, push, pop, G2, Z2)
                    if new not in seen:
                        seen.add(new)
                        out.append(new)
        return out

    def can_forget(self, st, i):
        dl, tsm, acc, l, push, pop, G, Z = st
        R = len(dl) - 1
        if not l < i < R:
            return False
        rm = self.rmask[dl[i]]
        if not rm:
            return True
        strict = self.opts.strict_forget
        for x in range(self.nX):
            bit = 1 << x
            if not rm & bit:
                continue
            later = [c for c in range(i + 1, R + 1) if self.rmask[dl[c]] & bit]
            if not later:
                return False
            if strict and later == [R] and (self.gmask[dl[R]] & bit) and not (G & bit):
                return False
        return True

    def forget(self, st, i):
        dl, tsm, acc, l, push, pop, G, Z = st
        M = self.M
        g1 = (tsm[i] - tsm[i - 1]) % M
        g2 = (tsm[i + 1] - tsm[i]) % M
        a = acc[i - 1] and acc[i] and g1 + g2 < M
        acc2 = acc[:i - 1] + (a,) + acc[i + 1:]
        return (dl[:i] + dl[i + 1:], tsm[:i] + tsm[i + 1:], acc2, l, push, pop, G, Z)

    def forgets(self, st):
        return [(self.forget(st, i), ("forget", st, i)) for i in range(st[3] + 1, len(st[0]) - 1)
                if self.can_forget(st, i)]

    def closure(self, st):
        """Forget every forgettable internal point, leftmost first; returns state and dropped indices."""
        dropped = []
        while True:
            nxt, i = self.closure_step(st)
            if nxt is None:
                return st, dropped
            st = nxt
            dropped.append(i)

    def closure_step(self, st):
        for i in range(st[3] + 1, len(st[0]) - 1):
            if self.can_forget(st, i):
                return self.forget(st, i), i
        return None, None

    def aggressive_forget(self, st):
        """The sequence of states visited while forgetting greedily."""
        seq = [st]
        while True:
            nxt, _ = self.closure_step(seq[-1])
            if nxt is None:
                return seq
            seq.append(nxt)

    def _alignments(self, s1, s2, shift):
        """Order-preserving placements of the hanging points of s2 relative to s1.

        Slot 2m+1 identifies with point m of s1; slot 2g inserts a fresh point
        before point g (only left of L1)."""
        dl1, tsm1 = s1[0], s1[1]
        l1 = s1[3]
        n1 = len(dl1)
        dl2, tsm2, l2 = s2[0], s2[1], s2[3]
        M = self.M

        def rec(h, lo):
            if h == l2:
                yield ()
                return
            want_t = dl2[h]
            want_v = (tsm2[h] + shift) % M
            for slot in range(lo, 2 * (n1 - 1)):
                if slot % 2:
                    m = slot // 2
                    if dl1[m] != want_t or tsm1[m] != want_v:
                        continue
                    nxt = slot + 1
                else:
                    if slot // 2 > l1:
                        continue
                    nxt = slot
                for rest in rec(h + 1, nxt):
                    yield (slot,) + rest

        return rec(0, 0)

    def combine(self, s1, s2):
        dl1, tsm1, acc1, l1, push1, pop1, G1, Z1 = s1
        dl2, tsm2, acc2, l2, push2, pop2, G2, Z2 = s2
        n1, n2 = len(dl1), len(dl2)
        M = self.M
        if dl1[-1] != dl2[l2]:
            return []
        shift = (tsm1[-1] - tsm2[l2]) % M
        if l2 == 0:
            # nothing hangs left of L2: the blocks are concatenated and acc is inherited
            if n1 + n2 - 1 > self.K:
                return []
            tsm = tsm1 + tuple((v + shift) % M for v in tsm2[1:])
            return [((dl1 + dl2[1:], tsm, acc1[:-1] + acc2, l1, push1, pop2, G2, Z1), ())]
        out = []
        rm = self.rmask
        for slots in self._alignments(s1, s2, shift):
            # C5 / C6
            bad = False
            for x in range(self.nX):
                bit = 1 << x
                z = Z1[x]
                if z != -1:
                    for h, sl in enumerate(slots):
                        if 2 * z + 1 < sl < 2 * l1 + 1 and rm[dl2[h]] & bit:
                            bad = True
                z = Z2[x]
                if z != -1:
                    sl = slots[z]
                    for m in range(n1 - 1):
                        if 2 * m + 1 > sl and rm[dl1[m]] & bit:
                            bad = True
            if bad:
                continue
            if n1 + sum(1 for s in slots if s % 2 == 0) + (n2 - l2 - 1) > self.K:
                continue
            # merged order
            order = []  # (slot, source, index)
            for m in range(n1):
                order.append((2 * m + 1, 0, 1, m))
            for h, sl in enumerate(slots):
                if sl % 2 == 0:
                    order.append((sl, 1, h, h))
            order.sort()
            map1 = [0] * n1
            map2 = [0] * n2
            dl, tsm = [], []
            for pos, (sl, src, _, k) in enumerate(order):
                if src == 0:
                    map1[k] = pos
                    dl.append(dl1[k])
                    tsm.append(tsm1[k])
                else:
                    map2[k] = pos
                    dl.append(dl2[k])
                    tsm.append((tsm2[k] + shift) % M)
            for h, sl in enumerate(slots):
                if sl % 2:
                    map2[h] = map1[sl // 2]
            map2[l2] = map1[n1 - 1]
            for k in range(l2 + 1, n2):
                map2[k] = len(dl)
                dl.append(dl2[k])
                tsm.append((tsm2[k] + shift) % M)
            if DUMMY in dl[1:]:
                continue
            n = len(dl)
            gaps = [(tsm[k + 1] - tsm[k]) % M for k in range(n - 1)]
            cons = [(map1[m], map1[m + 1], acc1[m]) for m in range(n1 - 1)]
            cons += [(map2[k], map2[k + 1], acc2[k]) for k in range(n2 - 1)]
            l = map1[l1]
            Z = []
            for x in range(self.nX):
                z2 = Z2[x]
                if z2 != -1 and map2[z2] < l:
                    Z.append(map2[z2])
                else:
                    Z.append(map1[Z1[x]] if Z1[x] != -1 else -1)
            Z = tuple(Z)
            for acc in _solve_acc(n, gaps, cons, M):
                new = self.normalize(tuple(dl), tuple(tsm), acc, l, push1, pop2, G2, Z)
                out.append((new, slots))
        return out


class _Search:
    def __init__(self, sys, opts: EngineOptions):
        self.sys = sys
        self.opts = opts
        self.consts = compute_constants(sys)
        self.K = opts.K or default_K(sys)
        self.M = self.consts.M
        self.reached = {}
        self.productions = 0
        self.accepting = None

    def run(self):
        raise NotImplementedError


class _CanonicalSearch(_Search):
    def __init__(self, sys, opts):
        super().__init__(sys, opts)
        self.c = _Canonical(sys, self.K, self.M, opts)
        self.transient = {}  # states passed through while adding forced edges

    def _settle(self, st, der):
        c = self.c
        while True:
            if st in self.reached:
                return st, der
            forced = c.forced_edge(st)
            if forced is None:
                return st, der
            self.transient.setdefault(st, der)
            if forced is DEAD:
                return None, None
            new, der = forced
            dropped = ()
            if self.opts.aggressive:
                new, dropped = c.closure(new)
            st, der = new, der + (tuple(dropped),)

    def _add(self, st, der, queue):
        self.productions += 1
        if self.opts.eager_edges:
            st, der = self._settle(st, der)
            if st is None:
                return
        if st in self.reached:
            return
        self.reached[st] = der
        if self.opts.trace:
            self.opts.trace(der[0], self.describe(st))
        if len(self.reached) > self.opts.state_cap:
            raise CapExceeded()
        queue.append(st)
        if self.accepting is None and self.c.accepting(st):
            self.accepting = st

    def describe(self, st):
        dl, tsm, acc, l, push, pop, G, Z = st
        name = self.c.si.name
        return "({};{};{};{};{};{},{};{};{})".format(
            ",".join(str(k + 1) for k in range(len(dl))), l + 1,
            ",".join(map(str, tsm)), ",".join("T" if a else "F" for a in acc),
            ",".join(name(t) for t in dl), int(push), int(pop),
            "".join("1" if G >> x & 1 else "0" for x in range(self.c.nX)),
            ",".join("_" if z < 0 else str(z + 1) for z in Z))

    def run(self):
        c = self.c
        queue = deque()
        rng = random.Random(self.opts.shuffle_seed) if self.opts.shuffle_seed is not None else None
        for st, der in c.leaves():
            self._add(st, der, queue)
        left_by, right_by = {}, {}
        stop = self.opts.stop_at_accept
        while queue:
            if stop and self.accepting is not None:
                break
            if rng is not None and len(queue) > 1:
                k = rng.randrange(len(queue))
                queue[0], queue[k] = queue[k], queue[0]
            st = queue.popleft()
            for new, der in c.add_edges(st):
                dropped = ()
                if self.opts.aggressive:
                    new, dropped = c.closure(new)
                self._add(new, der + (tuple(dropped),), queue)
            if not self.opts.aggressive:
                for new, der in c.forgets(st):
                    self._add(new, der, queue)
            pairs = []
            if c.closed_right(st):
                left_by.setdefault(st[0][-1], []).append(st)
                pairs += [(st, q2) for q2 in right_by.get(st[0][-1], ())]
            if c.ready_left(st):
                key = st[0][st[3]]
                right_by.setdefault(key, []).append(st)
                pairs += [(q1, st) for q1 in left_by.get(key, ())]
            for q1, q2 in pairs:
                for new, slots in c.combine(q1, q2):
                    if self.opts.aggressive:
                        new2, dropped = c.closure(new)
                        self._add(new2, ("combine", q1, q2, slots, tuple(dropped)), queue)
                    else:
                        self._add(new, ("combine", q1, q2, slots, ()), queue)
        return self.accepting

    # -------------------------------------------------------------- witness

    def _fresh_delta(self, parent, st, i, dropped):
        """Transition guessed for the hanging point inserted at index i of ``parent``."""
        # the hanging point lies left of L, so forgetting (always right of L) keeps its index
        return st[0][i]

    def extract(self, st):
        """Rebuild a term with one fresh vertex per point, fuse along combines, then
        color by final positions."""
        parent = {}

        def find(u):
            while parent.get(u, u) != u:
                parent[u] = parent.get(parent[u], parent[u])
                u = parent[u]
            return u

        vdelta = {}
        counter = itertools.count()
        succ = []

        def build(s):
            der = self.reached.get(s) or self.transient[s]
            kind = der[0]
            if kind == "leaf":
                u, v = next(counter), next(counter)
                vdelta[u], vdelta[v] = s[0]
                succ.append((u, v))
                return ("succ", u, v), [u, v]
            if kind == "edge":
                _, p, ekind, x, i, fresh, iv, dropped = der
                t, verts = build(p)
                if fresh:
                    w = next(counter)
                    vdelta[w] = self._fresh_delta(p, s, i, dropped)
                    verts = verts[:i] + [w] + verts[i:]
                clock = self.sys.clocks[x] if ekind == "clock" else None
                t = ("edge", t, verts[i], verts[-1], iv, ekind, clock)
                for k in dropped:
                    t = ("forget", t, verts[k])
                    verts = verts[:k] + verts[k + 1:]
                return t, verts
            if kind == "forget":
                _, p, i = der
                t, verts = build(p)
                return ("forget", t, verts[i]), verts[:i] + verts[i + 1:]
            if kind == "combine":
                _, q1, q2, slots, dropped = der
                t1, v1 = build(q1)
                t2, v2 = build(q2)
                n1, l2 = len(q1[0]), q2[3]
                merged = [(2 * m + 1, v1[m]) for m in range(n1)]
                for h, sl in enumerate(slots):
                    if sl % 2:
                        parent[find(v2[h])] = find(v1[sl // 2])
                    else:
                        merged.append((sl, v2[h]))
                parent[find(v2[l2])] = find(v1[-1])
                merged.sort(key=lambda p: p[0])
                verts = [v for _, v in merged] + v2[l2 + 1:]
                t = ("combine", t1, t2)
                for i in dropped:
                    t = ("forget", t, verts[i])
                    verts = verts[:i] + verts[i + 1:]
                return t, verts
            raise AssertionError(kind)

        old = _sys.getrecursionlimit()
        _sys.setrecursionlimit(max(old, 20000))
        try:
            skel, _ = build(st)
        finally:
            _sys.setrecursionlimit(old)
        nxt = {find(u): find(v) for u, v in succ}
        starts = set(nxt) - set(nxt.values())
        assert len(starts) == 1, "witness graph is not a single chain"
        order = [starts.pop()]
        while order[-1] in nxt:
            order.append(nxt[order[-1]])
        pos = {v: k for k, v in enumerate(order)}
        delta = {find(u): t for u, t in vdelta.items()}
        labels = {v: self.c.si.label[delta[v]] for v in order}

        def color(u):
            return pos[find(u)]

        def to_term(node):
            k = node[0]
            if k == "succ":
                u, v = node[1], node[2]
                return AtomSucc(labels[find(u)], color(u), labels[find(v)], color(v))
            if k == "edge":
                _, t, u, v, iv, ekind, clock = node
                atom = AtomEdge(labels[find(u)], color(u), labels[find(v)], color(v), iv, ekind, clock)
                return Combine(to_term(t), atom)
            if k == "forget":
                return Forget(color(node[2]), to_term(node[1]))
            return Combine(to_term(node[1]), to_term(node[2]))

        _sys.setrecursionlimit(max(old, 20000))
        try:
            term = compact(to_term(skel))
        finally:
            _sys.setrecursionlimit(old)
        run = tuple(self.sys.transitions[delta[v]] for v in order[1:])
        return term, run


class _ExplicitSearch(_Search):
    """Debug mode: explicit colors 1..K with rename closure, built from the rule functions."""

    def _add(self, st, der, queue):
        self.productions += 1
        if st in self.reached:
            return
        self.reached[st] = der
        if self.opts.trace:
            self.opts.trace(der[0], f"{st[0]} {st[1]}")
        if len(self.reached) > self.opts.state_cap:
            raise CapExceeded()
        queue.append(st)
        if self.accepting is None and self._accepting(st):
            self.accepting = st

    def _norm(self, v: VState) -> VState:
        r = v.tsm[0]
        if not r:
            return v
        return VState(v.P, v.L, tuple((t - r) % self.M for t in v.tsm), v.acc)

    def _accepting(self, st):
        v, s = st
        return s_accepting(self.sys, s) and v.L == v.P[0]

    def run(self):
        sys, K, M = self.sys, self.K, self.M
        strict = self.opts.strict_forget
        si = info(sys)
        queue = deque()
        for i in range(1, K + 1):
            for j in range(i + 1, K + 1):
                for s in s_leaf_succ(sys, i, j):
                    for v in v_leaf_succ(i, j, M):
                        self._add((self._norm(v), s), ("leaf", i, j), queue)
        done = []
        stop = self.opts.stop_at_accept
        while queue:
            if stop and self.accepting is not None:
                break
            st = queue.popleft()
            v, s = st
            R = s.P[-1]
            # edges into R
            if not s.push and not s.pop:
                p = si.pop[s.delta[-1]]
                if p is not None:
                    s2 = s_add_stack_edge(sys, s, s.L, R, p[1])
                    if s2 is not None:
                        for ve in v_leaf_edge(s.L, R, p[1], M):
                            for v2 in v_combine(v, self._align(v, ve), M):
                                self._add((self._norm(v2), s2), ("edge", st, s.L, R, p[1], "stack", None), queue)
            for x, iv in sorted(si.guard[s.delta[-1]].items()):
                for i in range(1, R):
                    for s2 in s_add_clock_edge(sys, s, i, R, iv, x):
                        for ve in v_leaf_edge(i, R, iv, M):
                            for v2 in v_combine(v, self._align(v, ve), M):
                                self._add((self._norm(v2), s2), ("edge", st, i, R, iv, "clock", sys.clocks[x]), queue)
            for i in s.P:
                s2 = s_forget(sys, s, i, strict)
                v2 = v_forget(v, i, M)
                if s2 is not None and v2 is not None:
                    self._add((self._norm(v2), s2), ("forget", st, i), queue)
                for j in range(1, K + 1):
                    if j == i:
                        continue
                    s2 = s_rename(s, i, j)
                    v2 = v_rename(v, i, j)
                    if s2 is not None and v2 is not None:
                        self._add((v2, s2), ("rename", st, i, j), queue)
            done.append(st)
            for other in done:
                for q1, q2 in ((st, other), (other, st)) if other is not st else ((st, st),):
                    if q1[1].P[-1] != q2[1].L:
                        continue
                    s3 = s_combine(sys, q1[1], q2[1])
                    if s3 is None:
                        continue
                    for v3 in v_combine(q1[0], self._align(q1[0], q2[0]), M):
                        self._add((self._norm(v3), s3), ("combine", q1, q2), queue)
        return self.accepting

    def _align(self, v1: VState, v2: VState) -> VState:
        """Shift v2's residues so the fused color agrees with v1."""
        c = v1.P[-1]
        if c not in v2.P:
            return v2
        r = (v1.tsm[-1] - v2.tsm_of(c)) % self.M
        return VState(v2.P, v2.L, tuple((t + r) % self.M for t in v2.tsm), v2.acc)

    def extract(self, st):
        si = info(self.sys)

        def build(s):
            der = self.reached[s]
            k = der[0]
            v, q = s
            if k == "leaf":
                _, i, j = der
                return AtomSucc(si.label[q.delta_of(i)], i, si.label[q.delta_of(j)], j)
            if k == "edge":
                _, p, i, j, iv, ekind, clock = der
                atom = AtomEdge(si.label[q.delta_of(i)], i, si.label[q.delta_of(j)], j, iv, ekind, clock)
                return Combine(build(p), atom)
            if k == "forget":
                return Forget(der[2], build(der[1]))
            if k == "rename":
                return Rename(der[2], der[3], build(der[1]))
            return Combine(build(der[1]), build(der[2]))

        term = build(st)
        run = _run_from_term(self.sys, term, st[1])
        return term, run


def _run_from_term(sys, term, root):
    """Transitions along the witness: the root state fixes the endpoints, and the
    labels plus edge structure fix the rest by replaying run_to_tcw over candidates."""
    g = evaluate(term)
    tcw = graph_to_tcw(g)
    target = tcw.key()
    # depth-first over transition sequences consistent with labels and the run shape
    n = tcw.n
    by_source = {}
    for t in sys.transitions:
        by_source.setdefault(t.source, []).append(t)
    found = []

    def dfs(state, run):
        if found:
            return
        k = len(run)
        if k == n:
            if state in sys.finals:
                try:
                    if run_to_tcw(sys, run).key() == target:
                        found.append(tuple(run))
                except Exception:
                    pass
            return
        for t in by_source.get(state, ()):
            if t.label == tcw.labels[k + 1]:
                dfs(t.target, run + [t])

    dfs(sys.initial, [])
    if not found:
        raise AssertionError("no run of the system matches the witness TCW")
    return found[0]


def check_emptiness(sys: TimedSystem, opts: Optional[EngineOptions] = None, **kw) -> Verdict:
    opts = opts or EngineOptions(**kw)
    t0 = time.perf_counter()
    consts = compute_constants(sys)
    K = opts.K or default_K(sys)
    base = {"K": K, "M": consts.M, "T": consts.T}
    if sys.initial in sys.finals:
        w = Witness(term=None, tcw=TCW(0, (None,)), ts=(0,), run=())
        stats = dict(base, reached_states=0, productions=0, time_ms=_ms(t0))
        return Verdict("NONEMPTY", w, stats)
    search = (_CanonicalSearch if opts.canonical else _ExplicitSearch)(sys, opts)
    try:
        acc = search.run()
    except CapExceeded:
        stats = dict(base, reached_states=len(search.reached), productions=search.productions, time_ms=_ms(t0))
        return Verdict("UNDECIDED-CAPPED", None, stats)
    stats = dict(base, reached_states=len(search.reached), productions=search.productions, time_ms=_ms(t0))
    if acc is None:
        return Verdict("EMPTY", None, stats)
    w = extract_witness(sys, search, acc)
    stats["time_ms"] = _ms(t0)
    return Verdict("NONEMPTY", w, stats)


def _ms(t0):
    return round((time.perf_counter() - t0) * 1000, 3)


def extract_witness(sys, search, state) -> Witness:
    term, run = search.extract(state)
    term = close_term(term)
    tcw = graph_to_tcw(evaluate(term))
    if run_to_tcw(sys, run).key() != tcw.key():
        raise AssertionError("witness TCW differs from the TCW of its run")
    try:
        ts = realize(tcw)
    except Unrealizable as e:
        raise AssertionError(f"accepted witness is not realizable: {e}") from e
    res = verify_witness(sys, run, ts)
    if not res:
        raise AssertionError(f"witness fails verification: {res.reason}")
    return Witness(term, tcw, ts, run)


@dataclass(frozen=True)
class Check:
    ok: bool
    reason: str = ""

    def __bool__(self):
        return self.ok


def verify_witness(sys: TimedSystem, run, ts) -> Check:
    """Replay a run with concrete timestamps: clocks, guards, resets, a timed stack, final state."""
    ts = tuple(ts)
    if len(ts) == len(run):
        ts = (0,) + ts
    if len(ts) != len(run) + 1:
        return Check(False, "timestamp count does not match the run")
    if ts[0] != 0:
        return Check(False, "time does not start at 0")
    val = {x: 0 for x in sys.clocks}
    stack = []
    state = sys.initial
    for k, t in enumerate(run, 1):
        delay = ts[k] - ts[k - 1]
        if delay < 0:
            return Check(False, f"step {k}: time goes backwards")
        if t.source != state:
            return Check(False, f"step {k}: transition {t.tid} leaves {t.source}, not {state}")
        for x in val:
            val[x] += delay
        for x, iv in t.guard:
            if not iv.contains(val[x]):
                return Check(False, f"step {k}: guard {x} in {iv} fails with {x}={val[x]}")
        if t.op.kind == "push":
            stack.append((t.op.symbol, ts[k]))
        elif t.op.kind == "pop":
            if not stack:
                return Check(False, f"step {k}: pop on empty stack")
            sym, at = stack.pop()
            if sym != t.op.symbol:
                return Check(False, f"step {k}: pop {t.op.symbol} finds {sym}")
            if not t.op.interval.contains(ts[k] - at):
                return Check(False, f"step {k}: stack age {ts[k] - at} outside {t.op.interval}")
        for x in t.resets:
            val[x] = 0
        state = t.target
    if state not in sys.finals:
        return Check(False, f"run ends in non-final state {state}")
    if stack:
        return Check(False, "stack not empty at the end")
    return Check(True)


def saturate(sys: TimedSystem, opts: Optional[EngineOptions] = None, **kw):
    """Full fixpoint (no early stop); returns (reached states, derivations)."""
    opts = opts or EngineOptions(**kw)
    opts = replace(opts, stop_at_accept=False)
    search = (_CanonicalSearch if opts.canonical else _ExplicitSearch)(sys, opts)
    search.run()
    return set(search.reached), search.reached


def decode(sys: TimedSystem, st) -> ProductState:
    """View a canonical state as a pair of automaton states over colors 1..n."""
    dl, tsm, acc, l, push, pop, G, Z = st
    P = tuple(range(1, len(dl) + 1))
    v = VState(P, l + 1, tsm, acc)
    s = SState(P, l + 1, dl, push, pop, tuple(bool(G >> x & 1) for x in range(len(sys.clocks))),
               tuple(None if z < 0 else z + 1 for z in Z))
    return ProductState(v, s, True)
