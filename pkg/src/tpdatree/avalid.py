"""Tree automaton checking that a good tree term denotes a realizable TCW.

States abstract the colored points of a term by their timestamps modulo M
(``tsm``) and, for each point, whether the gap to the next colored point is
below M (``acc``).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, Optional

from .model import Interval
from .treeterm import AtomEdge, AtomSucc, Combine, Forget, Rename, TermError


@dataclass(frozen=True)
class VState:
    P: tuple  # increasing colors
    L: int
    tsm: tuple  # aligned with P
    acc: tuple  # aligned with P

    def __post_init__(self):
        if self.L not in self.P:
            raise ValueError("L must be an active color")
        if self.acc[-1]:
            raise ValueError("acc of the rightmost color must be false")

    def idx(self, c) -> int:
        return self.P.index(c)

    def tsm_of(self, c) -> int:
        return self.tsm[self.P.index(c)]

    def acc_of(self, c) -> bool:
        return self.acc[self.P.index(c)]

    def __str__(self):
        P = ",".join(map(str, self.P))
        tsm = ",".join(f"{c}:{v}" for c, v in zip(self.P, self.tsm))
        acc = ",".join(f"{c}:{'T' if a else 'F'}" for c, a in zip(self.P, self.acc))
        return f"({{{P}}};{self.L};{tsm};{acc})"


def d(q: VState, i, j, M) -> int:
    return (q.tsm_of(j) - q.tsm_of(i)) % M


def D(q: VState, i, j, M) -> int:
    a, b = q.idx(i), q.idx(j)
    return sum((q.tsm[k + 1] - q.tsm[k]) % M for k in range(a, b))


def ACC(q: VState, i, j) -> bool:
    a, b = q.idx(i), q.idx(j)
    return all(q.acc[a:b])


def _edge_ok(acc_i, dij, iv: Interval) -> bool:
    return (acc_i and iv.contains(dij)) or (not acc_i and iv.up is None)


def v_leaf_succ(i, j, M) -> Iterator[VState]:
    for ti, tj, a in itertools.product(range(M), range(M), (True, False)):
        yield VState((i, j), i, (ti, tj), (a, False))


def v_leaf_edge(i, j, iv: Interval, M) -> Iterator[VState]:
    for ti, tj, a in itertools.product(range(M), range(M), (True, False)):
        if _edge_ok(a, (tj - ti) % M, iv):
            yield VState((i, j), j, (ti, tj), (a, False))


def v_rename(q: VState, i, j) -> Optional[VState]:
    if i not in q.P:
        return None
    k = q.idx(i)
    lo = q.P[k - 1] if k > 0 else 0
    hi = q.P[k + 1] if k + 1 < len(q.P) else float("inf")
    if not lo < j < hi:
        return None
    P = q.P[:k] + (j,) + q.P[k + 1:]
    return VState(P, j if q.L == i else q.L, q.tsm, q.acc)


def v_forget(q: VState, i, M) -> Optional[VState]:
    if i not in q.P or not q.L < i < q.P[-1]:
        return None
    k = q.idx(i)
    lo, hi = q.P[k - 1], q.P[k + 1]
    a = ACC(q, lo, hi) and D(q, lo, hi, M) < M
    acc = list(q.acc)
    acc[k - 1] = a
    del acc[k]
    return VState(q.P[:k] + q.P[k + 1:], q.L, q.tsm[:k] + q.tsm[k + 1:], tuple(acc))


def _combine_constraints(P, tsm, part, M):
    """Pairs (position in P, position of its successor within ``part``) for non-max points of part."""
    pos = {c: k for k, c in enumerate(P)}
    return [(pos[a], pos[b]) for a, b in zip(part, part[1:])]


def v_combine(q1: VState, q2: VState, M) -> list:
    if q1.P[-1] != q2.L:
        return []
    if any(q1.L <= c <= q1.P[-1] and c not in q1.P for c in q2.P):
        return []
    t1 = dict(zip(q1.P, q1.tsm))
    t2 = dict(zip(q2.P, q2.tsm))
    if any(t1[c] != t2[c] for c in t1.keys() & t2.keys()):
        return []
    P = tuple(sorted(set(q1.P) | set(q2.P)))
    tsm = tuple(t1[c] if c in t1 else t2[c] for c in P)
    gaps = [(tsm[k + 1] - tsm[k]) % M for k in range(len(P) - 1)]
    a1 = dict(zip(q1.P, q1.acc))
    a2 = dict(zip(q2.P, q2.acc))
    cons = [(lo, hi, a1[P[lo]]) for lo, hi in _combine_constraints(P, tsm, q1.P, M)]
    cons += [(lo, hi, a2[P[lo]]) for lo, hi in _combine_constraints(P, tsm, q2.P, M)]
    forced = {}
    for lo, hi, want in cons:
        if hi == lo + 1:
            if forced.get(lo, want) != want:
                return []
            forced[lo] = want
    free = [k for k in range(len(P) - 1) if k not in forced]
    out = []
    for guess in itertools.product((True, False), repeat=len(free)):
        acc = [False] * len(P)
        for k, v in forced.items():
            acc[k] = v
        for k, v in zip(free, guess):
            acc[k] = v
        if all((all(acc[lo:hi]) and sum(gaps[lo:hi]) < M) == want for lo, hi, want in cons):
            out.append(VState(P, q1.L, tsm, tuple(acc)))
    return out


def v_accepting(q: VState) -> bool:
    return len(q.P) == 2 and q.L == q.P[0] and not q.acc[-1]


# ---------------------------------------------------------------- running a term

def _rotate(q: VState, M):
    """Shift all residues so the leftmost one is 0; the rules only look at differences."""
    r = q.tsm[0]
    if r == 0:
        return q
    return VState(q.P, q.L, tuple((t - r) % M for t in q.tsm), q.acc)


def v_states_term(term, M, quotient: bool = True) -> set:
    """All states reachable by some run on ``term`` (modulo a common shift of tsm when ``quotient``)."""
    norm = (lambda q: _rotate(q, M)) if quotient else (lambda q: q)

    def go(t) -> set:
        if isinstance(t, AtomSucc):
            return {norm(q) for q in v_leaf_succ(t.i, t.j, M)}
        if isinstance(t, AtomEdge):
            return {norm(q) for q in v_leaf_edge(t.i, t.j, t.interval, M)}
        if isinstance(t, Forget):
            return {norm(r) for q in go(t.child) if (r := v_forget(q, t.i, M)) is not None}
        if isinstance(t, Rename):
            return {r for q in go(t.child) if (r := v_rename(q, t.i, t.j)) is not None}
        if isinstance(t, Combine):
            s1, s2 = go(t.left), go(t.right)
            if not quotient:
                return {r for q1 in s1 for q2 in s2 for r in v_combine(q1, q2, M)}
            out = set()
            for q2 in s2:
                for q1 in s1:
                    # align q2 so the fused color carries q1's residue
                    shift = (q1.tsm[-1] - q2.tsm_of(q2.L)) % M
                    q2s = VState(q2.P, q2.L, tuple((v + shift) % M for v in q2.tsm), q2.acc)
                    out.update(norm(r) for r in v_combine(q1, q2s, M))
            return out
        raise TermError(f"not a term: {t!r}")

    return go(term)


def v_accepts_term(term, M) -> bool:
    """Existential run of the realizability automaton; the final forgets down to the
    two endpoints are applied at the root."""
    states = v_states_term(term, M)
    out = False
    for q in states:
        while len(q.P) > 2 and q.L < q.P[-2]:
            q = v_forget(q, q.P[-2], M)
        out = out or v_accepting(q)
    return out
