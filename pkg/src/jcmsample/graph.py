"""Vertex-colored multigraph with per-color edge-instance classes.

Storage is struct-of-arrays so that the compiled step engines in
:mod:`jcmsample.samplers` can mutate it in place.  Every unit of
multiplicity is an *edge instance* with a stable integer id.  A swap never
creates or destroys instances; it rewires the endpoints of the two removed
instances to the two inserted pairs.

Color classes live in one flat array of instance ids.  Class ``l`` owns the
block ``cls_off[l] : cls_off[l] + cls_cap[l]`` and uses its first
``cls_size[l]`` slots.  The capacity is the total degree of the ``l``-colored
vertices, which no double edge swap can change, so a block never overflows.
A bichrome instance sits in both endpoint classes; ``inst_pos[i, 0]`` is its
slot in the class of ``color[inst_u[i]]`` and ``inst_pos[i, 1]`` its slot in
the class of ``color[inst_w[i]]`` (``-1`` for monochrome instances).
"""

from __future__ import annotations

from collections import namedtuple
from typing import Iterable, NamedTuple, Sequence

import numpy as np
from numba import njit

__all__ = [
    "ColoredMultigraph",
    "DegenerateClassError",
    "EdgeInstance",
    "GraphInputError",
    "InconsistentGraphError",
    "build",
    "jcm",
    "sample_instance",
    "apply_swap",
]


class GraphInputError(ValueError):
    """Rejected graph input (bad vertex id, duplicate pair, zero multiplicity)."""


class DegenerateClassError(ValueError):
    """The population to sample from has fewer instances than requested."""


class InconsistentGraphError(RuntimeError):
    """Internal caches disagree with the multiplicity map."""


class EdgeInstance(NamedTuple):
    """One unit of multiplicity of a multiedge, identified by ``index``.

    ``u``/``w`` are a snapshot of the endpoints at the time the instance was
    obtained; an applied swap may rewire the id afterwards.
    """

    index: int
    u: int
    w: int

    @property
    def pair(self) -> tuple[int, int]:
        return (self.u, self.w) if self.u <= self.w else (self.w, self.u)

    @property
    def is_loop(self) -> bool:
        return self.u == self.w


GraphState = namedtuple(
    "GraphState",
    [
        "n",
        "color",
        "inst_u",
        "inst_w",
        "inst_pos",
        "cls_off",
        "cls_cap",
        "cls_size",
        "cls_items",
        "degree",
        "cdeg",
        "hkeys",
        "hvals",
        "hmeta",
        "hscratch",
    ],
)


# --------------------------------------------------------------------------
# compiled primitives shared with the step engines


@njit(cache=True)
def pair_key(u, w, n):
    if u <= w:
        return u * n + w
    return w * n + u


# Multiplicities live in an open-addressing table keyed by ``pair_key``.
# Empty slots hold -1.  A pair whose multiplicity drops to 0 keeps its slot
# (value 0) until the table is compacted, so lookups never meet tombstones.
# ``hmeta[0]`` counts occupied slots; ``hmeta[1]`` counts compactions.
#
# The step-path helpers take individual arrays and are compiled without the
# reference-counting runtime (``_nrt=False``).  With it, every call that
# receives an array pays for atomic reference-count updates, which cost more
# than the swap itself.  Such functions must not allocate, hence the
# preallocated ``hscratch`` buffer used by compaction.

_FAST = dict(cache=True, _nrt=False)


@njit(**_FAST)
def _slot(hkeys, key):
    mask = hkeys.shape[0] - 1
    # Fibonacci hashing; int64 multiplication wraps
    h = ((key * -7046029254386353131) >> 29) & mask
    while True:
        k = hkeys[h]
        if k == key or k == -1:
            return h
        h = (h + 1) & mask


@njit(**_FAST)
def mult_lookup(n, hkeys, hvals, u, w):
    """Multiplicity of the pair ``{u, w}``."""
    h = _slot(hkeys, pair_key(u, w, n))
    if hkeys[h] == -1:
        return 0
    return hvals[h]


@njit(cache=True)
def get_mult(s, u, w):
    return mult_lookup(s.n, s.hkeys, s.hvals, u, w)


@njit(**_FAST)
def _compact(hkeys, hvals, hmeta, hscratch):
    keep = 0
    for h in range(hkeys.shape[0]):
        if hkeys[h] >= 0 and hvals[h] > 0:
            hscratch[0, keep] = hkeys[h]
            hscratch[1, keep] = hvals[h]
            keep += 1
    hkeys[:] = -1
    for j in range(keep):
        h = _slot(hkeys, hscratch[0, j])
        hkeys[h] = hscratch[0, j]
        hvals[h] = hscratch[1, j]
    hmeta[0] = keep
    hmeta[1] += 1


@njit(**_FAST)
def _add_mult(n, hkeys, hvals, hmeta, hscratch, u, w, delta):
    key = pair_key(u, w, n)
    h = _slot(hkeys, key)
    if hkeys[h] == -1:
        hkeys[h] = key
        hvals[h] = delta
        hmeta[0] += 1
        if 4 * hmeta[0] > 3 * hkeys.shape[0]:
            _compact(hkeys, hvals, hmeta, hscratch)
    else:
        hvals[h] += delta


@njit(**_FAST)
def _class_remove(c, inst_pos, cls_off, cls_size, cls_items, i, k):
    slot = inst_pos[i, k]
    last = cls_off[c] + cls_size[c] - 1
    moved = cls_items[last]
    cls_items[slot] = moved
    if inst_pos[moved, 0] == last:
        inst_pos[moved, 0] = slot
    else:
        inst_pos[moved, 1] = slot
    cls_size[c] -= 1
    inst_pos[i, k] = -1


@njit(**_FAST)
def _class_add(c, inst_pos, cls_off, cls_size, cls_items, i, k):
    slot = cls_off[c] + cls_size[c]
    cls_items[slot] = i
    inst_pos[i, k] = slot
    cls_size[c] += 1


@njit(**_FAST)
def _detach(n, color, inst_u, inst_w, inst_pos, cls_off, cls_size, cls_items,
            degree, cdeg, hkeys, hvals, hmeta, hscratch, i):
    u = inst_u[i]
    w = inst_w[i]
    cu = color[u]
    cw = color[w]
    if cw != cu:
        _class_remove(cw, inst_pos, cls_off, cls_size, cls_items, i, 1)
    _class_remove(cu, inst_pos, cls_off, cls_size, cls_items, i, 0)
    degree[u] -= 1
    degree[w] -= 1
    cdeg[u, cw] -= 1
    cdeg[w, cu] -= 1
    _add_mult(n, hkeys, hvals, hmeta, hscratch, u, w, -1)


@njit(**_FAST)
def _attach(n, color, inst_u, inst_w, inst_pos, cls_off, cls_size, cls_items,
            degree, cdeg, hkeys, hvals, hmeta, hscratch, i, a, b):
    if a > b:
        a, b = b, a
    inst_u[i] = a
    inst_w[i] = b
    ca = color[a]
    cb = color[b]
    degree[a] += 1
    degree[b] += 1
    cdeg[a, cb] += 1
    cdeg[b, ca] += 1
    _add_mult(n, hkeys, hvals, hmeta, hscratch, a, b, 1)
    _class_add(ca, inst_pos, cls_off, cls_size, cls_items, i, 0)
    if cb != ca:
        _class_add(cb, inst_pos, cls_off, cls_size, cls_items, i, 1)


@njit(**_FAST)
def swap_arrays(n, color, inst_u, inst_w, inst_pos, cls_off, cls_size, cls_items,
                degree, cdeg, hkeys, hvals, hmeta, hscratch, i1, i2, a, b, c, d):
    """Rewire instance ``i1`` to ``(a, b)`` and ``i2`` to ``(c, d)``.

    Both instances are detached before either is attached, because the
    class capacities only hold for complete swaps.
    """
    _detach(n, color, inst_u, inst_w, inst_pos, cls_off, cls_size, cls_items,
            degree, cdeg, hkeys, hvals, hmeta, hscratch, i1)
    _detach(n, color, inst_u, inst_w, inst_pos, cls_off, cls_size, cls_items,
            degree, cdeg, hkeys, hvals, hmeta, hscratch, i2)
    _attach(n, color, inst_u, inst_w, inst_pos, cls_off, cls_size, cls_items,
            degree, cdeg, hkeys, hvals, hmeta, hscratch, i1, a, b)
    _attach(n, color, inst_u, inst_w, inst_pos, cls_off, cls_size, cls_items,
            degree, cdeg, hkeys, hvals, hmeta, hscratch, i2, c, d)


@njit(cache=True)
def swap_instances(s, i1, i2, a, b, c, d):
    swap_arrays(s.n, s.color, s.inst_u, s.inst_w, s.inst_pos, s.cls_off, s.cls_size,
                s.cls_items, s.degree, s.cdeg, s.hkeys, s.hvals, s.hmeta, s.hscratch,
                i1, i2, a, b, c, d)


@njit(cache=True)
def _fill(s):
    for i in range(s.inst_u.shape[0]):
        u = s.inst_u[i]
        w = s.inst_w[i]
        _add_mult(s.n, s.hkeys, s.hvals, s.hmeta, s.hscratch, u, w, 1)
        cu = s.color[u]
        cw = s.color[w]
        _class_add(cu, s.inst_pos, s.cls_off, s.cls_size, s.cls_items, i, 0)
        if cw != cu:
            _class_add(cw, s.inst_pos, s.cls_off, s.cls_size, s.cls_items, i, 1)


def _live_pairs(s):
    """``(keys, multiplicities)`` of all pairs with multiplicity >= 1."""
    live = (s.hkeys >= 0) & (s.hvals > 0)
    return s.hkeys[live], s.hvals[live]


def _table_capacity(m: int) -> int:
    return 1 << max(4, int(4 * max(m, 1) - 1).bit_length())


# --------------------------------------------------------------------------


class ColoredMultigraph:
    """Undirected multigraph with one color per vertex.

    Use :func:`build` to construct one.  Vertices are ``0..n-1`` and colors
    ``0..L-1``.  A self-loop contributes 2 to the degree and to the colored
    degree of its vertex.
    """

    __slots__ = ("_s", "_color_count")

    def __init__(self, state: GraphState, color_count: int):
        self._s = state
        self._color_count = color_count

    # -- basic sizes -------------------------------------------------------

    @property
    def state(self) -> GraphState:
        return self._s

    @property
    def vertex_count(self) -> int:
        return int(self._s.n)

    @property
    def color_count(self) -> int:
        return self._color_count

    @property
    def edge_instance_total(self) -> int:
        return int(self._s.inst_u.shape[0])

    @property
    def color_of(self) -> np.ndarray:
        return self._s.color

    @property
    def degree(self) -> np.ndarray:
        return self._s.degree

    @property
    def colored_degree(self) -> np.ndarray:
        return self._s.cdeg

    @property
    def class_sizes(self) -> np.ndarray:
        return self._s.cls_size.copy()

    def __repr__(self) -> str:
        return (
            f"ColoredMultigraph(n={self.vertex_count}, m={self.edge_instance_total}, "
            f"colors={self.color_count})"
        )

    # -- queries -----------------------------------------------------------

    def multiplicity(self, u: int, w: int) -> int:
        return int(get_mult(self._s, u, w))

    def edges(self) -> list[tuple[int, int, int]]:
        """Sorted ``(u, w, multiplicity)`` triples with ``u <= w``."""
        n = int(self._s.n)
        keys, mus = _live_pairs(self._s)
        order = np.argsort(keys, kind="stable")
        return [(int(k // n), int(k % n), int(mu)) for k, mu in zip(keys[order], mus[order])]

    def canonical_key(self) -> tuple[tuple[int, int, int], ...]:
        return tuple(self.edges())

    def instance(self, index: int) -> EdgeInstance:
        s = self._s
        return EdgeInstance(int(index), int(s.inst_u[index]), int(s.inst_w[index]))

    def instances(self) -> list[EdgeInstance]:
        return [self.instance(i) for i in range(self.edge_instance_total)]

    def color_class(self, color: int) -> list[EdgeInstance]:
        s = self._s
        start = s.cls_off[color]
        ids = s.cls_items[start : start + s.cls_size[color]]
        return [self.instance(i) for i in ids]

    def is_loop_free(self) -> bool:
        return not bool(np.any(self._s.inst_u == self._s.inst_w))

    def copy(self) -> "ColoredMultigraph":
        s = self._s
        fields = {name: (getattr(s, name).copy() if name != "n" else s.n) for name in GraphState._fields}
        return ColoredMultigraph(GraphState(**fields), self._color_count)

    def same_structure(self, other: "ColoredMultigraph") -> bool:
        return self.canonical_key() == other.canonical_key()

    def check_consistency(self) -> None:
        """Recompute every cache from the multiplicity map and compare.

        Raises :class:`InconsistentGraphError` on the first mismatch.
        """
        s = self._s
        n, L = self.vertex_count, self.color_count
        color = s.color
        deg = np.zeros(n, dtype=np.int64)
        cdeg = np.zeros((n, L), dtype=np.int64)
        members: list[dict[tuple[int, int], int]] = [{} for _ in range(L)]
        total = 0
        for u, w, mu in self.edges():
            if mu < 1:
                raise InconsistentGraphError(f"non-positive multiplicity at {(u, w)}")
            total += mu
            deg[u] += mu
            deg[w] += mu
            cdeg[u, color[w]] += mu
            cdeg[w, color[u]] += mu
            for c in {int(color[u]), int(color[w])}:
                members[c][(u, w)] = members[c].get((u, w), 0) + mu
        if total != self.edge_instance_total:
            raise InconsistentGraphError("instance total differs from multiplicity sum")
        if not np.array_equal(deg, s.degree):
            raise InconsistentGraphError("degree cache mismatch")
        if not np.array_equal(cdeg, s.cdeg):
            raise InconsistentGraphError("colored-degree cache mismatch")
        for c in range(L):
            got: dict[tuple[int, int], int] = {}
            for inst in self.color_class(c):
                got[inst.pair] = got.get(inst.pair, 0) + 1
            if got != members[c]:
                raise InconsistentGraphError(f"color class {c} mismatch")
        for i in range(self.edge_instance_total):
            u, w = int(s.inst_u[i]), int(s.inst_w[i])
            for k, endpoint in ((0, u), (1, w)):
                slot = s.inst_pos[i, k]
                if k == 1 and color[u] == color[w]:
                    if slot != -1:
                        raise InconsistentGraphError(f"stale second slot on instance {i}")
                    continue
                c = color[endpoint]
                if not (s.cls_off[c] <= slot < s.cls_off[c] + s.cls_size[c]):
                    raise InconsistentGraphError(f"slot of instance {i} outside class {c}")
                if s.cls_items[slot] != i:
                    raise InconsistentGraphError(f"reverse index broken for instance {i}")


def build(
    vertex_colors: Sequence[int],
    edges: Iterable[tuple[int, int, int]],
    color_count: int | None = None,
) -> ColoredMultigraph:
    """Build a graph from per-vertex colors and ``(u, w, multiplicity)`` records.

    Runs in ``O(n + m)``.  Raises :class:`GraphInputError` naming the offending
    record for an out-of-range vertex, a zero multiplicity or a pair listed
    twice (in either orientation).
    """
    color = np.asarray(vertex_colors, dtype=np.int64).reshape(-1)
    n = int(color.shape[0])
    if n and color.min() < 0:
        raise GraphInputError("colors must be non-negative integers")
    L = int(color.max()) + 1 if n else 0
    if color_count is not None:
        if color_count < L:
            raise GraphInputError(f"color_count={color_count} but a vertex has color {L - 1}")
        L = int(color_count)

    seen: set[tuple[int, int]] = set()
    us: list[int] = []
    ws: list[int] = []
    mus: list[int] = []
    for rec in edges:
        u, w, mu = (int(x) for x in rec)
        if not (0 <= u < n and 0 <= w < n):
            raise GraphInputError(f"vertex id out of range in edge record {rec!r} (n={n})")
        if mu < 1:
            raise GraphInputError(f"multiplicity must be >= 1 in edge record {rec!r}")
        pair = (u, w) if u <= w else (w, u)
        if pair in seen:
            raise GraphInputError(f"duplicate pair in edge record {rec!r}")
        seen.add(pair)
        us.append(pair[0])
        ws.append(pair[1])
        mus.append(mu)

    mu_arr = np.asarray(mus, dtype=np.int64)
    inst_u = np.repeat(np.asarray(us, dtype=np.int64), mu_arr)
    inst_w = np.repeat(np.asarray(ws, dtype=np.int64), mu_arr)
    m = int(inst_u.shape[0])

    degree = np.bincount(inst_u, minlength=n) + np.bincount(inst_w, minlength=n)
    degree = degree.astype(np.int64)
    cdeg = np.zeros((n, L), dtype=np.int64)
    np.add.at(cdeg, (inst_u, color[inst_w]), 1)
    np.add.at(cdeg, (inst_w, color[inst_u]), 1)
    cls_cap = np.bincount(color, weights=degree, minlength=L).astype(np.int64) if n else np.zeros(L, np.int64)
    cls_off = np.zeros(L, dtype=np.int64)
    if L:
        cls_off[1:] = np.cumsum(cls_cap)[:-1]

    cap = _table_capacity(m)
    state = GraphState(
        n=np.int64(n),
        color=color,
        inst_u=inst_u,
        inst_w=inst_w,
        inst_pos=np.full((m, 2), -1, dtype=np.int64),
        cls_off=cls_off,
        cls_cap=cls_cap,
        cls_size=np.zeros(L, dtype=np.int64),
        cls_items=np.full(max(2 * m, 1), -1, dtype=np.int64),
        degree=degree,
        cdeg=cdeg,
        hkeys=np.full(cap, -1, dtype=np.int64),
        hvals=np.zeros(cap, dtype=np.int64),
        hmeta=np.zeros(2, dtype=np.int64),
        hscratch=np.zeros((2, cap), dtype=np.int64),
    )
    _fill(state)
    return ColoredMultigraph(state, L)


def jcm(g: ColoredMultigraph) -> np.ndarray:
    """Joint color matrix: symmetric ``L x L`` counts of edge instances per color pair."""
    s = g.state
    L = g.color_count
    cu = s.color[s.inst_u]
    cw = s.color[s.inst_w]
    raw = np.zeros((L, L), dtype=np.int64)
    np.add.at(raw, (cu, cw), 1)
    return raw + raw.T - np.diag(np.diag(raw))


def jcm_from_edges(
    colors: Sequence[int], edges: Iterable[tuple[int, int, int]], color_count: int
) -> np.ndarray:
    """Same matrix as :func:`jcm`, computed straight from ``(u, w, mu)`` records."""
    out = np.zeros((color_count, color_count), dtype=np.int64)
    for u, w, mu in edges:
        a, b = colors[u], colors[w]
        out[a, b] += mu
        if a != b:
            out[b, a] += mu
    return out


def sample_instance(
    g: ColoredMultigraph,
    color: int | None,
    rng: np.random.Generator,
    excluded: EdgeInstance | None = None,
) -> EdgeInstance:
    """Draw an edge instance uniformly from ``E`` (``color=None``) or from the
    class of ``color``, optionally excluding one instance."""
    s = g.state
    if color is None:
        size = g.edge_instance_total
        ids = None
    else:
        size = int(s.cls_size[color])
        start = int(s.cls_off[color])
        ids = s.cls_items[start : start + size]
    if excluded is None:
        if size < 1:
            raise DegenerateClassError(f"cannot draw from an empty population (class {color})")
        k = int(rng.integers(0, size))
        return g.instance(k if ids is None else ids[k])
    if size < 2:
        raise DegenerateClassError(f"class {color} has {size} instance(s); need 2")
    if ids is None:
        skip = excluded.index
    else:
        hits = np.flatnonzero(ids == excluded.index)
        if hits.size == 0:
            raise ValueError(f"excluded instance {excluded.index} is not in class {color}")
        skip = int(hits[0])
    k = int(rng.integers(0, size - 1))
    if k >= skip:
        k += 1
    return g.instance(k if ids is None else ids[k])


def apply_swap(g: ColoredMultigraph, proposal) -> None:
    """Apply a :class:`~jcmsample.classify.SwapProposal` in place."""
    e1, e2 = proposal.removed
    (a, b), (c, d) = proposal.inserted
    s = g.state
    if e1.index == e2.index:
        raise InconsistentGraphError("a swap needs two distinct instances")
    for e in (e1, e2):
        cur = g.instance(e.index)
        if cur.pair != e.pair:
            raise InconsistentGraphError(
                f"instance {e.index} is {cur.pair}, proposal expected {e.pair}"
            )
    swap_instances(s, e1.index, e2.index, a, b, c, d)
