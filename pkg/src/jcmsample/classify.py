"""Classification of pairs of edge instances into double-edge-swap cases.

For two distinct instances ``(u, w)`` and ``(v, z)`` there are exactly two
double edge swaps (DESs)::

    {(u, w), (v, z)} -> {(u, z), (v, w)}
    {(u, w), (v, z)} -> {(u, v), (w, z)}

A DES that keeps the joint color matrix is a JDES.  Whether zero, one or two
of them are JDESs, and whether they move the graph at all, depends only on
the endpoint ids and their colors; the fourteen labels of :class:`Case`
partition every possible pair.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

from numba import njit

from .graph import ColoredMultigraph, EdgeInstance

__all__ = ["Case", "SwapProposal", "classify", "enumerate_swaps", "NOOP_ONLY_CASES"]


class Case(enum.IntEnum):
    C0 = 0
    C1 = 1
    C2A = 2
    C2B = 3
    C2C = 4
    C2D = 5
    C3A = 6
    C3B = 7
    C3C = 8
    C3D = 9
    C3E = 10
    C4A = 11
    C4B = 12
    C4C = 13


#: cases whose JDESs exist but never move the graph
NOOP_ONLY_CASES = frozenset({Case.C1, Case.C2C, Case.C2D, Case.C3D, Case.C3E})


@njit(cache=True)
def classify_kernel(u, w, v, z, cu, cw, cv, cz):
    """Case code for the pair ``(u, w), (v, z)`` with endpoint colors ``c*``."""
    if cu != cv and cu != cz and cw != cv and cw != cz:
        return 0
    # distinct vertex count
    nv = 1
    if w != u:
        nv += 1
    if v != u and v != w:
        nv += 1
    if z != u and z != w and z != v:
        nv += 1
    # distinct color count
    nl = 1
    if cw != cu:
        nl += 1
    if cv != cu and cv != cw:
        nl += 1
    if cz != cu and cz != cw and cz != cv:
        nl += 1
    loop1 = u == w
    loop2 = v == z
    if nv == 1:
        return 1
    if nv == 2:
        if loop1 and loop2:
            return 2
        if not loop1 and not loop2:
            if cu == cw:
                return 3
            return 4
        return 5
    if nv == 3:
        if loop1 or loop2:
            return 6
        if nl == 1:
            return 7
        if nl == 2:
            if cu == cw or cv == cz:
                return 8
            return 9
        return 10
    if cu != cw and cv != cz:
        if nl == 3:
            return 11
        return 12
    return 13


@njit(cache=True)
def pair_multisets_equal(a1, b1, a2, b2, c1, d1, c2, d2):
    """True iff the unordered pairs {a1b1, a2b2} and {c1d1, c2d2} agree as
    multisets (works for vertex pairs and for color pairs)."""
    if a1 > b1:
        a1, b1 = b1, a1
    if a2 > b2:
        a2, b2 = b2, a2
    if c1 > d1:
        c1, d1 = d1, c1
    if c2 > d2:
        c2, d2 = d2, c2
    if a1 == c1 and b1 == d1 and a2 == c2 and b2 == d2:
        return True
    return a1 == c2 and b1 == d2 and a2 == c1 and b2 == d1


@dataclass(frozen=True)
class SwapProposal:
    """A candidate DES on two instances of the current graph.

    ``equivalent`` marks a proposal standing in for both DESs of the pair
    because they lead to the same destination.
    """

    removed: tuple[EdgeInstance, EdgeInstance]
    inserted: tuple[tuple[int, int], tuple[int, int]]
    case: Case
    is_jdes: bool
    is_noop: bool
    distinct_color_count: int
    equivalent: bool = False

    @property
    def distinct_vertex_count(self) -> int:
        e1, e2 = self.removed
        return len({e1.u, e1.w, e2.u, e2.w})


def _norm(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a <= b else (b, a)


def _check_pair(e1: EdgeInstance, e2: EdgeInstance) -> None:
    if e1.index == e2.index:
        raise ValueError(f"instance {e1.index} passed twice; a swap needs distinct instances")


def classify(g: ColoredMultigraph, e1: EdgeInstance, e2: EdgeInstance) -> Case:
    _check_pair(e1, e2)
    col = g.color_of
    return Case(
        classify_kernel(e1.u, e1.w, e2.u, e2.w, col[e1.u], col[e1.w], col[e2.u], col[e2.w])
    )


def enumerate_swaps(g: ColoredMultigraph, e1: EdgeInstance, e2: EdgeInstance) -> list[SwapProposal]:
    """Both DESs on ``e1, e2`` with their flags; equivalent DESs collapse to one."""
    case = classify(g, e1, e2)
    col = g.color_of
    u, w, v, z = e1.u, e1.w, e2.u, e2.w
    nl = len({int(col[x]) for x in (u, w, v, z)})
    removed = sorted([_norm(u, w), _norm(v, z)])
    before = sorted([_norm(int(col[u]), int(col[w])), _norm(int(col[v]), int(col[z]))])
    out: list[SwapProposal] = []
    seen: list[list[tuple[int, int]]] = []
    for p, q in (((u, z), (v, w)), ((u, v), (w, z))):
        ins = sorted([_norm(*p), _norm(*q)])
        if ins in seen:
            out[-1] = replace(out[-1], equivalent=True)
            continue
        seen.append(ins)
        after = sorted([_norm(int(col[p[0]]), int(col[p[1]])), _norm(int(col[q[0]]), int(col[q[1]]))])
        out.append(
            SwapProposal(
                removed=(e1, e2),
                inserted=(_norm(*p), _norm(*q)),
                case=case,
                is_jdes=after == before,
                is_noop=ins == removed,
                distinct_color_count=nl,
            )
        )
    return out
