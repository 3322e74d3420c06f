"""Metropolis-Hastings step engines over double edge swaps.

Three engines share the graph storage of :mod:`jcmsample.graph`:

``polaris-b``
    Draws an ordered pair of distinct instances from all of ``E`` and one of
    the two DESs uniformly.  A non-JDES draw is an *out of space* outcome;
    by default the chain stays put for that iteration.
``polaris-c``
    Draws a color, then an ordered pair of distinct instances from that
    color's class.  The pair always admits a JDES, and the engine picks the
    moving one deterministically (or by a fair coin when there are two).
``cm``
    The plain configuration model: ``polaris-b`` without the JDES check, so
    only the degree sequence is kept.

All engines accept a move with probability ``min(1, rho * pi(H) / pi(G))``
where ``rho`` is the reverse-to-forward proposal probability ratio.
"""

from __future__ import annotations

import enum
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numba import njit

from .classify import Case, SwapProposal, classify_kernel, pair_multisets_equal
from .graph import ColoredMultigraph, mult_lookup, swap_arrays, swap_instances

__all__ = [
    "Mode",
    "StepOutcome",
    "UniformTarget",
    "EdgeWeightTarget",
    "ChainConfig",
    "ChainTrace",
    "TraceRecord",
    "make_rng",
    "rho_b",
    "rho_c",
    "polaris_b_step",
    "polaris_c_step",
    "cm_step",
    "run_chain",
    "auto_iterations",
    "default_record_every",
    "AperiodicityReport",
    "check_aperiodicity",
]

log = logging.getLogger(__name__)


class Mode(str, enum.Enum):
    POLARIS_B = "polaris-b"
    POLARIS_C = "polaris-c"
    CM = "cm"


_MODE_CODE = {Mode.POLARIS_B: 0, Mode.POLARIS_C: 1, Mode.CM: 2}


class StepOutcome(enum.IntEnum):
    OUT_OF_SPACE = 0
    UNCHANGED = 1
    ACCEPTED = 2
    REJECTED = 3


# --------------------------------------------------------------------------
# target distributions


class UniformTarget:
    """Uniform distribution over the ensemble (ratio identically 1)."""

    kind = 0

    def ratio(self, g: ColoredMultigraph, proposal: SwapProposal) -> float:
        return 1.0

    def log_weight(self, edges) -> float:
        return 0.0

    def kernel_args(self, n: int) -> tuple[int, np.ndarray]:
        return 0, np.zeros((1, 1))


class EdgeWeightTarget:
    """Product-form target ``pi(G) ~ exp(sum_e mu(e) * W[e])``.

    ``log_weights`` is a symmetric ``n x n`` matrix indexed by vertex pairs
    (the diagonal weighs self-loops).  Weights that depend only on endpoint
    colors, or on single vertices, are constant over the ensemble.
    """

    kind = 1

    def __init__(self, log_weights: np.ndarray):
        w = np.asarray(log_weights, dtype=np.float64)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ValueError("log_weights must be a square matrix")
        if not np.allclose(w, w.T):
            raise ValueError("log_weights must be symmetric")
        self.log_weights = w

    @classmethod
    def random(cls, n: int, rng: np.random.Generator, scale: float = 1.0) -> "EdgeWeightTarget":
        a = rng.normal(scale=scale, size=(n, n))
        return cls(np.triu(a) + np.triu(a, 1).T)

    def ratio(self, g: ColoredMultigraph, proposal: SwapProposal) -> float:
        W = self.log_weights
        e1, e2 = proposal.removed
        (a, b), (c, d) = proposal.inserted
        return math.exp(W[a, b] + W[c, d] - W[e1.u, e1.w] - W[e2.u, e2.w])

    def log_weight(self, edges) -> float:
        W = self.log_weights
        return float(sum(mu * W[u, w] for u, w, mu in edges))

    def kernel_args(self, n: int) -> tuple[int, np.ndarray]:
        if self.log_weights.shape[0] != n:
            raise ValueError(f"target is sized for {self.log_weights.shape[0]} vertices, graph has {n}")
        return 1, self.log_weights


# --------------------------------------------------------------------------
# proposal ratios


@njit(cache=True, _nrt=False)
def rho_b_kernel(nv, loop1, loop2, m1, m2, m1p, m2p):
    """Proposal ratio of the all-edges sampler; ``m1p``/``m2p`` are the
    pre-swap multiplicities of the inserted pairs."""
    if nv == 4:
        return (m1p + 1.0) * (m2p + 1.0) / (m1 * m2)
    if nv == 3:
        if loop1 or loop2:
            return (m1p + 1.0) * (m2p + 1.0) / (2.0 * m1 * m2)
        return 2.0 * (m1p + 1.0) * (m2p + 1.0) / (m1 * m2)
    if loop1 and loop2:
        # both inserted instances are copies of the same pair
        return (m1p + 2.0) * (m1p + 1.0) / (4.0 * m1 * m2)
    return 4.0 * (m1p + 1.0) * (m2p + 1.0) / (m1 * (m1 - 1.0))


@njit(cache=True, _nrt=False)
def rho_c_kernel(case, m1, m2, m1p, m2p, size_a, size_b):
    """Proposal ratio of the color-class sampler for a moving JDES."""
    if case == 2:
        return (m1p + 2.0) * (m1p + 1.0) / (2.0 * m1 * m2)
    if case == 3:
        return 2.0 * (m1p + 1.0) * (m2p + 1.0) / (m1 * (m1 - 1.0))
    if case == 12:
        qa = 1.0 / (size_a * (size_a - 1.0))
        qb = 1.0 / (size_b * (size_b - 1.0))
        fwd = m1 * m2
        rev = (m1p + 1.0) * (m2p + 1.0)
        return (rev * qa + rev * qb) / (fwd * qa + fwd * qb)
    return (m1p + 1.0) * (m2p + 1.0) / (m1 * m2)


def _mults(g: ColoredMultigraph, proposal: SwapProposal) -> tuple[int, int, int, int]:
    e1, e2 = proposal.removed
    (a, b), (c, d) = proposal.inserted
    return (
        g.multiplicity(e1.u, e1.w),
        g.multiplicity(e2.u, e2.w),
        g.multiplicity(a, b),
        g.multiplicity(c, d),
    )


def rho_b(g: ColoredMultigraph, proposal: SwapProposal) -> float:
    """Reverse/forward proposal ratio for a moving DES under the all-edges
    sampler (shared by ``polaris-b`` and ``cm``).  Reads ``g`` before the swap."""
    if proposal.is_noop:
        raise ValueError("no-op swaps have no proposal ratio")
    e1, e2 = proposal.removed
    m1, m2, m1p, m2p = _mults(g, proposal)
    return float(rho_b_kernel(proposal.distinct_vertex_count, e1.is_loop, e2.is_loop, m1, m2, m1p, m2p))


_MOVING_C_CASES = frozenset(
    {Case.C2A, Case.C2B, Case.C3A, Case.C3B, Case.C3C, Case.C4A, Case.C4B, Case.C4C}
)


def rho_c(g: ColoredMultigraph, proposal: SwapProposal) -> float:
    """Reverse/forward proposal ratio for the moving JDES chosen by the
    color-class sampler.  Reads ``g`` before the swap."""
    if proposal.case not in _MOVING_C_CASES or proposal.is_noop or not proposal.is_jdes:
        raise ValueError(f"case {proposal.case.name} proposal is not a moving JDES")
    m1, m2, m1p, m2p = _mults(g, proposal)
    sa = sb = 0
    if proposal.case == Case.C4B:
        e1 = proposal.removed[0]
        sizes = g.state.cls_size
        sa = int(sizes[g.color_of[e1.u]])
        sb = int(sizes[g.color_of[e1.w]])
    return float(rho_c_kernel(int(proposal.case), m1, m2, m1p, m2p, sa, sb))


# --------------------------------------------------------------------------
# compiled step engines
#
# info layout written by every step: [case, i1, i2, u, w, v, z, a, b, c, d]

OUT_OF_SPACE, UNCHANGED, ACCEPTED, REJECTED = 0, 1, 2, 3

# See the note in graph.py on why the step path runs without the
# reference-counting runtime.  ``Generator.integers`` allocates, so bounded
# integers come from ``random()``; the resulting non-uniformity is at most
# m / 2**53 relative per value.
_FAST = dict(cache=True, _nrt=False)


@njit(**_FAST)
def _below(rng, m):
    k = np.int64(rng.random() * m)
    return k if k < m else m - 1


@njit(**_FAST)
def _target_ratio(tkind, W, u, w, v, z, a, b, c, d):
    if tkind == 0:
        return 1.0
    return np.exp(W[a, b] + W[c, d] - W[u, w] - W[v, z])


@njit(**_FAST)
def _accept(s, rng, rho, tkind, W, i1, i2, u, w, v, z, a, b, c, d):
    p = rho * _target_ratio(tkind, W, u, w, v, z, a, b, c, d)
    if rng.random() < p:
        swap_arrays(s.n, s.color, s.inst_u, s.inst_w, s.inst_pos, s.cls_off, s.cls_size,
                    s.cls_items, s.degree, s.cdeg, s.hkeys, s.hvals, s.hmeta, s.hscratch,
                    i1, i2, a, b, c, d)
        return ACCEPTED
    return REJECTED


@njit(**_FAST)
def _step_all_edges(s, rng, tkind, W, check_jdes, retry, info, extra):
    n = s.n
    inst_u = s.inst_u
    inst_w = s.inst_w
    col = s.color
    m = inst_u.shape[0]
    while True:
        extra[0] += 1
        i1 = _below(rng, m)
        i2 = _below(rng, m - 1)
        if i2 >= i1:
            i2 += 1
        u = inst_u[i1]
        w = inst_w[i1]
        v = inst_u[i2]
        z = inst_w[i2]
        if rng.random() < 0.5:
            a, b, c, d = u, z, v, w
        else:
            a, b, c, d = u, v, w, z
        info[0] = classify_kernel(u, w, v, z, col[u], col[w], col[v], col[z])
        info[1] = i1
        info[2] = i2
        info[3] = u
        info[4] = w
        info[5] = v
        info[6] = z
        info[7] = a
        info[8] = b
        info[9] = c
        info[10] = d
        if check_jdes and not pair_multisets_equal(
            col[u], col[w], col[v], col[z], col[a], col[b], col[c], col[d]
        ):
            if retry:
                continue
            return OUT_OF_SPACE
        break
    if pair_multisets_equal(u, w, v, z, a, b, c, d):
        return UNCHANGED
    nv = 1
    if w != u:
        nv += 1
    if v != u and v != w:
        nv += 1
    if z != u and z != w and z != v:
        nv += 1
    hkeys = s.hkeys
    hvals = s.hvals
    m1 = mult_lookup(n, hkeys, hvals, u, w)
    m2 = mult_lookup(n, hkeys, hvals, v, z)
    m1p = mult_lookup(n, hkeys, hvals, a, b)
    m2p = mult_lookup(n, hkeys, hvals, c, d)
    rho = rho_b_kernel(nv, u == w, v == z, m1, m2, m1p, m2p)
    return _accept(s, rng, rho, tkind, W, i1, i2, u, w, v, z, a, b, c, d)


@njit(**_FAST)
def _step_color_class(s, rng, tkind, W, info, extra):
    n = s.n
    cls_size = s.cls_size
    extra[0] += 1
    lab = _below(rng, cls_size.shape[0])
    size = cls_size[lab]
    if size < 2:
        extra[1] += 1
        info[0] = -1
        return UNCHANGED
    off = s.cls_off[lab]
    k1 = _below(rng, size)
    k2 = _below(rng, size - 1)
    if k2 >= k1:
        k2 += 1
    i1 = s.cls_items[off + k1]
    i2 = s.cls_items[off + k2]
    u = s.inst_u[i1]
    w = s.inst_w[i1]
    v = s.inst_u[i2]
    z = s.inst_w[i2]
    col = s.color
    cu = col[u]
    cw = col[w]
    cv = col[v]
    cz = col[z]
    case = classify_kernel(u, w, v, z, cu, cw, cv, cz)
    info[0] = case
    info[1] = i1
    info[2] = i2
    info[3] = u
    info[4] = w
    info[5] = v
    info[6] = z
    if case == 1 or case == 4 or case == 5 or case == 9 or case == 10:
        return UNCHANGED
    size_a = 0
    size_b = 0
    if case == 2:
        # two same-colored self-loops become two copies of (u, v)
        a, b, c, d = u, v, u, v
    elif case == 3:
        # two copies of a monochrome pair become two self-loops
        a, b, c, d = u, u, w, w
    elif case == 6:
        if u == w:
            a, b, c, d = u, v, u, z
        else:
            a, b, c, d = v, u, v, w
    elif case == 7 or case == 8:
        # wedge: x is the shared vertex, p and q the outer ends
        if u == v:
            x, p, q = u, w, z
        elif u == z:
            x, p, q = u, w, v
        elif w == v:
            x, p, q = w, u, z
        else:
            x, p, q = w, u, v
        a, b, c, d = x, x, p, q
    elif case == 11 or case == 12:
        # same-colored endpoints exchange their partners
        if cu == cv:
            a, b, c, d = u, z, v, w
        elif cu == cz:
            a, b, c, d = u, v, z, w
        elif cw == cv:
            a, b, c, d = w, z, v, u
        else:
            a, b, c, d = w, v, z, u
        if case == 12:
            size_a = cls_size[cu]
            size_b = cls_size[cw]
    elif case == 13:
        if rng.random() < 0.5:
            a, b, c, d = u, z, v, w
        else:
            a, b, c, d = u, v, w, z
    else:
        # case 0 cannot occur inside one color class
        raise RuntimeError("color-class sampler drew a pair with disjoint colors")
    info[7] = a
    info[8] = b
    info[9] = c
    info[10] = d
    hkeys = s.hkeys
    hvals = s.hvals
    m1 = mult_lookup(n, hkeys, hvals, u, w)
    m2 = mult_lookup(n, hkeys, hvals, v, z)
    m1p = mult_lookup(n, hkeys, hvals, a, b)
    m2p = mult_lookup(n, hkeys, hvals, c, d)
    rho = rho_c_kernel(case, m1, m2, m1p, m2p, size_a, size_b)
    return _accept(s, rng, rho, tkind, W, i1, i2, u, w, v, z, a, b, c, d)


@njit(**_FAST)
def step_kernel(s, mode, rng, tkind, W, retry, info, extra):
    if mode == 1:
        return _step_color_class(s, rng, tkind, W, info, extra)
    return _step_all_edges(s, rng, tkind, W, mode == 0, retry, info, extra)


@njit(**_FAST)
def run_steps(s, mode, k, rng, tkind, W, retry, counts, case_counts, extra, info):
    """Run ``k`` steps, tallying outcomes into ``counts`` and sampled cases
    into ``case_counts`` (index 14 counts degenerate color draws)."""
    for _ in range(k):
        out = step_kernel(s, mode, rng, tkind, W, retry, info, extra)
        counts[out] += 1
        if info[0] >= 0:
            case_counts[info[0]] += 1
        else:
            case_counts[14] += 1


@njit(cache=True)
def single_step_trials(s, mode, trials, rng, tkind, W):
    """Repeat one step from the same state ``trials`` times.

    Accepted moves are undone right away.  Returns one row per trial:
    ``[outcome, u, w, v, z, a, b, c, d]``.
    """
    info = np.zeros(11, dtype=np.int64)
    extra = np.zeros(2, dtype=np.int64)
    out = np.zeros((trials, 9), dtype=np.int64)
    for t in range(trials):
        res = step_kernel(s, mode, rng, tkind, W, False, info, extra)
        out[t, 0] = res
        for j in range(8):
            out[t, 1 + j] = info[3 + j]
        if res == ACCEPTED:
            swap_instances(s, info[1], info[2], info[3], info[4], info[5], info[6])
    return out


# --------------------------------------------------------------------------
# Python-level single steps


def make_rng(seed: int, chain_index: int = 0) -> np.random.Generator:
    """PCG64 stream derived from ``(seed, chain_index)`` via ``SeedSequence``."""
    if seed < 0 or chain_index < 0:
        raise ValueError("seed and chain index must be non-negative")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, chain_index])))


def _require_edges(g: ColoredMultigraph) -> None:
    if g.edge_instance_total < 2:
        raise ValueError(f"need at least 2 edge instances, graph has {g.edge_instance_total}")


def _one_step(g, mode, target, rng, retry=False) -> StepOutcome:
    target = target or UniformTarget()
    tkind, W = target.kernel_args(g.vertex_count)
    info = np.zeros(11, dtype=np.int64)
    extra = np.zeros(2, dtype=np.int64)
    return StepOutcome(step_kernel(g.state, mode, rng, tkind, W, retry, info, extra))


def polaris_b_step(g: ColoredMultigraph, target=None, rng=None, retry_out_of_space: bool = False) -> StepOutcome:
    _require_edges(g)
    return _one_step(g, 0, target, rng, retry_out_of_space)


def polaris_c_step(g: ColoredMultigraph, target=None, rng=None) -> StepOutcome:
    _require_edges(g)
    return _one_step(g, 1, target, rng)


def cm_step(g: ColoredMultigraph, target=None, rng=None) -> StepOutcome:
    _require_edges(g)
    return _one_step(g, 2, target, rng)


# --------------------------------------------------------------------------
# chain runner


def auto_iterations(m: int) -> int:
    """``ceil(m * ln m)`` iterations (0 for ``m < 2``)."""
    return int(math.ceil(m * math.log(m))) if m >= 2 else 0


def default_record_every(m: int) -> int:
    return max(1, int(round(0.05 * m)))


@dataclass
class ChainConfig:
    iterations: int
    seed: int
    mode: Mode = Mode.POLARIS_C
    retry_out_of_space: bool = False
    record_every: int | None = None
    chain_index: int = 0

    def __post_init__(self):
        self.mode = Mode(self.mode)
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if self.record_every is not None and self.record_every < 1:
            raise ValueError("record_every must be >= 1")
        if self.retry_out_of_space and self.mode != Mode.POLARIS_B:
            raise ValueError("retry_out_of_space only applies to polaris-b")


@dataclass
class TraceRecord:
    iteration: int
    counts: tuple[int, int, int, int]
    degree_assortativity: float
    statistic: float | None = None


@dataclass
class ChainTrace:
    config: ChainConfig
    outcome_counts: dict[StepOutcome, int]
    records: list[TraceRecord]
    graph: ColoredMultigraph
    proposals: int = 0
    degenerate_draws: int = 0
    case_counts: dict[Case, int] = field(default_factory=dict)
    elapsed_seconds: float = 0.0

    @property
    def iterations(self) -> int:
        return sum(self.outcome_counts.values())

    def fractions(self) -> dict[StepOutcome, float]:
        total = self.iterations
        if total == 0:
            return {k: 0.0 for k in StepOutcome}
        return {k: v / total for k, v in self.outcome_counts.items()}


def run_chain(
    g: ColoredMultigraph,
    config: ChainConfig,
    target=None,
    statistic: Callable[[ColoredMultigraph], float] | None = None,
) -> ChainTrace:
    """Run ``config.iterations`` steps on ``g`` in place and return the trace.

    Deterministic for a given graph, ``config.seed`` and ``config.chain_index``.
    """
    from .metrics import UndefinedStatisticError, degree_assortativity

    if config.iterations > 0:
        _require_edges(g)
    target = target or UniformTarget()
    tkind, W = target.kernel_args(g.vertex_count)
    rng = make_rng(config.seed, config.chain_index)
    stride = config.record_every or default_record_every(g.edge_instance_total)
    mode = _MODE_CODE[config.mode]

    counts = np.zeros(4, dtype=np.int64)
    case_counts = np.zeros(15, dtype=np.int64)
    extra = np.zeros(2, dtype=np.int64)
    info = np.zeros(11, dtype=np.int64)
    records: list[TraceRecord] = []
    done = 0
    t0 = time.perf_counter()
    while done < config.iterations:
        k = min(stride - done % stride, config.iterations - done)
        run_steps(g.state, mode, k, rng, tkind, W, config.retry_out_of_space, counts, case_counts, extra, info)
        done += k
        if done % stride == 0:
            try:
                da = degree_assortativity(g)
            except UndefinedStatisticError:
                da = float("nan")
            stat = float(statistic(g)) if statistic is not None else None
            records.append(TraceRecord(done, tuple(int(c) for c in counts), da, stat))
    elapsed = time.perf_counter() - t0

    return ChainTrace(
        config=config,
        outcome_counts={k: int(counts[k]) for k in StepOutcome},
        records=records,
        graph=g,
        proposals=int(extra[0]),
        degenerate_draws=int(extra[1]),
        case_counts={c: int(case_counts[c]) for c in Case if case_counts[c]},
        elapsed_seconds=elapsed,
    )


# --------------------------------------------------------------------------
# aperiodicity diagnostic


@dataclass
class AperiodicityReport:
    """Which sufficient aperiodicity conditions the graph meets.

    ``pair_cases`` lists the cases realised by some pair of edges, restricted
    to the ones that matter.  ``bichrome_triple`` is the alternative
    condition on three bichrome edges.
    """

    pair_cases: frozenset[Case]
    bichrome_triple: bool

    _ALL_EDGES = frozenset(set(Case) - {Case.C0, Case.C4A, Case.C4B})
    _COLOR_CLASS = frozenset({Case.C1, Case.C2C, Case.C2D, Case.C3D, Case.C3E, Case.C4C})

    @property
    def all_edges_ok(self) -> bool:
        return bool(self.pair_cases & self._ALL_EDGES) or self.bichrome_triple

    @property
    def color_class_ok(self) -> bool:
        return bool(self.pair_cases & self._COLOR_CLASS) or self.bichrome_triple


def check_aperiodicity(g: ColoredMultigraph, warn: bool = True) -> AperiodicityReport:
    """Scan ``g`` for the pair-case and bichrome-triple sufficient conditions."""
    col = [int(c) for c in g.color_of]
    n = g.vertex_count
    found: set[Case] = set()
    nbrs: list[set[int]] = [set() for _ in range(n)]
    loops: dict[int, int] = {}
    edges = g.edges()
    for u, w, mu in edges:
        if u == w:
            loops[u] = mu
            if mu >= 2:
                found.add(Case.C1)
            continue
        nbrs[u].add(w)
        nbrs[w].add(u)
        if mu >= 2:
            found.add(Case.C2B if col[u] == col[w] else Case.C2C)

    loop_colors: dict[int, int] = {}
    for x in loops:
        loop_colors[col[x]] = loop_colors.get(col[x], 0) + 1
        if nbrs[x]:
            found.add(Case.C2D)
    if any(k >= 2 for k in loop_colors.values()):
        found.add(Case.C2A)

    # non-loop multiedges containing each color
    containing = [0] * g.color_count
    for u, w, _ in edges:
        if u != w:
            containing[col[u]] += 1
            if col[w] != col[u]:
                containing[col[w]] += 1

    for x in loops:
        # every non-loop multiedge at x contains x's color; 3A needs one more
        if containing[col[x]] > len(nbrs[x]):
            found.add(Case.C3A)

    for x in range(n):
        if len(nbrs[x]) < 2:
            continue
        by_color: dict[int, int] = {}
        for y in nbrs[x]:
            by_color[col[y]] = by_color.get(col[y], 0) + 1
        own = by_color.get(col[x], 0)
        others = [k for c, k in by_color.items() if c != col[x]]
        if own >= 2:
            found.add(Case.C3B)
        if own >= 1 and others:
            found.add(Case.C3C)
        if any(k >= 2 for k in others):
            found.add(Case.C3D)
        if len(others) >= 2:
            found.add(Case.C3E)

    for u, w, _ in edges:
        if u != w and col[u] == col[w]:
            if containing[col[u]] > len(nbrs[u]) + len(nbrs[w]) - 1:
                found.add(Case.C4C)
                break

    report = AperiodicityReport(frozenset(found), _bichrome_triple(col, nbrs))
    if warn and not report.all_edges_ok:
        log.warning("no sufficient aperiodicity condition holds for this graph")
    return report


def _bichrome_triple(col: list[int], nbrs: list[set[int]]) -> bool:
    bi = [{y for y in nb if col[y] != col[x]} for x, nb in enumerate(nbrs)]
    by_color: dict[int, list[int]] = {}
    for x, b in enumerate(bi):
        if b:
            by_color.setdefault(col[x], []).append(x)
    for members in by_color.values():
        if len(members) < 2:
            continue
        for u in members:
            if len(bi[u]) < 2:
                continue
            for w in members:
                if w == u:
                    continue
                if len(bi[u]) >= 3 or bi[w] - bi[u]:
                    return True
    return False
