"""Exact ground truth for tiny instances.

Everything here works on canonical keys (sorted ``(u, w, mu)`` tuples) with
plain Python containers.  The enumerators, the sampling-tree expansion and
the JCM checks never touch the compiled step engines, so agreement between
the two is meaningful evidence.  The only shared pieces are the closed-form
proposal ratios, which are exactly what the stationarity checks are meant to
validate, and :func:`~jcmsample.classify.classify` for labelling.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .classify import Case, SwapProposal, classify
from .graph import ColoredMultigraph, EdgeInstance, build
from .samplers import (
    Mode,
    UniformTarget,
    _MODE_CODE,
    make_rng,
    rho_b,
    rho_c,
    run_steps,
    single_step_trials,
)

__all__ = [
    "Caps",
    "CapsExceededError",
    "CatalogError",
    "EnsembleCatalog",
    "enumerate_ensemble",
    "enumerate_ensemble_naive",
    "transition_matrix",
    "proposal_matrix",
    "rho_mismatch",
    "target_distribution",
    "stationarity_residual",
    "ConnectivityReport",
    "connectivity_report",
    "chain_period",
    "TVResult",
    "empirical_tv",
    "tv_noise_bound",
    "single_step_frequencies",
]

Key = tuple[tuple[int, int, int], ...]


class CapsExceededError(ValueError):
    """The instance is too large for exhaustive enumeration."""


class CatalogError(RuntimeError):
    """A state outside the enumerated ensemble was reached."""


@dataclass(frozen=True)
class Caps:
    max_vertices: int = 7
    max_instances: int = 8
    max_members: int = 20000


# --------------------------------------------------------------------------
# key helpers (pure Python)


def _norm(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a <= b else (b, a)


def _key_from_counter(c: Counter) -> Key:
    return tuple(sorted((u, w, mu) for (u, w), mu in c.items() if mu > 0))


def _counter(key: Key) -> Counter:
    return Counter({(u, w): mu for u, w, mu in key})


def _jcm_counter(key: Key, colors: Sequence[int]) -> Counter:
    out: Counter = Counter()
    for u, w, mu in key:
        out[_norm(colors[u], colors[w])] += mu
    return out


def _degrees(key: Key, n: int) -> list[int]:
    deg = [0] * n
    for u, w, mu in key:
        deg[u] += mu
        deg[w] += mu
    return deg


def _instances(key: Key) -> list[tuple[int, int]]:
    return [(u, w) for u, w, mu in key for _ in range(mu)]


def _swap_key(key: Key, removed, inserted) -> Key:
    c = _counter(key)
    for p in removed:
        c[_norm(*p)] -= 1
    for p in inserted:
        c[_norm(*p)] += 1
    if any(v < 0 for v in c.values()):
        raise CatalogError("swap removed an absent edge")
    return _key_from_counter(c)


# --------------------------------------------------------------------------
# catalog


@dataclass
class EnsembleCatalog:
    """Every member of a tiny ensemble, indexed by canonical key.

    ``adjacency[i]`` holds the members reachable from member ``i`` by one
    moving swap (a JDES, or any DES when ``preserves_jcm`` is false).
    """

    colors: tuple[int, ...]
    color_count: int
    members: list[Key]
    observed_index: int
    preserves_jcm: bool = True
    index: dict[Key, int] = field(default_factory=dict)
    adjacency: list[set[int]] = field(default_factory=list)

    def __post_init__(self):
        if not self.index:
            self.index = {k: i for i, k in enumerate(self.members)}
        if len(self.index) != len(self.members):
            raise CatalogError("catalog members are not distinct")
        if not self.adjacency:
            self.adjacency = [self._neighbours(k) for k in self.members]

    def __len__(self) -> int:
        return len(self.members)

    def _cached(self, slot: str, key, make):
        cache = self.__dict__.setdefault("_cache", {})
        full = (slot, key)
        if full not in cache:
            cache[full] = make()
        return cache[full]

    @property
    def vertex_count(self) -> int:
        return len(self.colors)

    def graph(self, i: int) -> ColoredMultigraph:
        """Member ``i`` as a fresh graph object."""
        return build(self.colors, self.members[i], self.color_count)

    def lookup(self, key: Key) -> int:
        try:
            return self.index[key]
        except KeyError:
            raise CatalogError(f"state {key} is not in the enumerated ensemble") from None

    def _admissible(self, before: Key, after: Key) -> bool:
        if not self.preserves_jcm:
            return True
        return _jcm_counter(before, self.colors) == _jcm_counter(after, self.colors)

    def _neighbours(self, key: Key) -> set[int]:
        out: set[int] = set()
        inst = _instances(key)
        for p1, p2 in itertools.combinations(range(len(inst)), 2):
            (u, w), (v, z) = inst[p1], inst[p2]
            for ins in (((u, z), (v, w)), ((u, v), (w, z))):
                dest = _swap_key(key, (inst[p1], inst[p2]), ins)
                if dest != key and self._admissible(key, dest):
                    out.add(self.lookup(dest))
        return out


def _check_caps(g: ColoredMultigraph, caps: Caps) -> None:
    n, m = g.vertex_count, g.edge_instance_total
    if n > caps.max_vertices or m > caps.max_instances:
        raise CapsExceededError(
            f"instance has {n} vertices and {m} edge instances; caps are "
            f"{caps.max_vertices} vertices and {caps.max_instances} instances"
        )


def enumerate_ensemble(
    observed: ColoredMultigraph, caps: Caps | None = None, preserve_jcm: bool = True
) -> EnsembleCatalog:
    """All multigraphs on the observed vertices and colors with the observed
    degree sequence (and joint color matrix when ``preserve_jcm``).

    Backtracks over vertex pairs in lexicographic order, choosing a
    multiplicity for each pair within the remaining degree and color-pair
    budgets.  A vertex whose last pair has been decided must have no degree
    left.
    """
    caps = caps or Caps()
    _check_caps(observed, caps)
    colors = tuple(int(c) for c in observed.color_of)
    n = len(colors)
    key0 = observed.canonical_key()
    residual = _degrees(key0, n)
    budget = _jcm_counter(key0, colors)
    pairs = [(u, w) for u in range(n) for w in range(u, n)]
    # index of the last pair whose first vertex is u
    last_of = {u: max(i for i, (a, _) in enumerate(pairs) if a == u) for u in range(n)}
    chosen: list[tuple[int, int, int]] = []
    found: list[Key] = []

    def rec(idx: int) -> None:
        if len(found) > caps.max_members:
            raise CapsExceededError(f"ensemble has more than {caps.max_members} members")
        if idx == len(pairs):
            if not any(residual) and (not preserve_jcm or not any(budget.values())):
                found.append(tuple(chosen))
            return
        u, w = pairs[idx]
        if u == w:
            top = residual[u] // 2
        else:
            top = min(residual[u], residual[w])
        cp = _norm(colors[u], colors[w])
        if preserve_jcm:
            top = min(top, budget.get(cp, 0))
        for k in range(top, -1, -1):
            if u == w:
                residual[u] -= 2 * k
            else:
                residual[u] -= k
                residual[w] -= k
            budget[cp] -= k
            if k:
                chosen.append((u, w, k))
            if idx != last_of[u] or residual[u] == 0:
                rec(idx + 1)
            if k:
                chosen.pop()
            budget[cp] += k
            if u == w:
                residual[u] += 2 * k
            else:
                residual[u] += k
                residual[w] += k

    rec(0)
    members = sorted(found)
    return EnsembleCatalog(
        colors=colors,
        color_count=observed.color_count,
        members=members,
        observed_index=members.index(key0),
        preserves_jcm=preserve_jcm,
    )


def enumerate_ensemble_naive(observed: ColoredMultigraph, preserve_jcm: bool = True) -> list[Key]:
    """Reference enumerator: every multiset of ``m`` pairs over the vertices
    with positive degree, filtered by degree sequence and joint color matrix.

    Exponential; meant for cross-checking on instances with a handful of
    edge instances.
    """
    colors = [int(c) for c in observed.color_of]
    n = len(colors)
    key0 = observed.canonical_key()
    deg0 = _degrees(key0, n)
    jcm0 = _jcm_counter(key0, colors)
    m = observed.edge_instance_total
    active = [u for u in range(n) if deg0[u] > 0]
    pairs = [(u, w) for i, u in enumerate(active) for w in active[i:]]
    out: list[Key] = []
    for combo in itertools.combinations_with_replacement(pairs, m):
        key = _key_from_counter(Counter(combo))
        if _degrees(key, n) != deg0:
            continue
        if preserve_jcm and _jcm_counter(key, colors) != jcm0:
            continue
        out.append(key)
    return sorted(out)


# --------------------------------------------------------------------------
# sampling trees


RhoFunction = Callable[[ColoredMultigraph, SwapProposal], float]


@dataclass
class _Leaf:
    dest: int
    prob: float
    proposal: SwapProposal | None


def _proposal(g, inst, p1, p2, ins, case) -> SwapProposal:
    (u, w), (v, z) = inst[p1], inst[p2]
    e1 = EdgeInstance(p1, u, w)
    e2 = EdgeInstance(p2, v, z)
    return SwapProposal(
        removed=(e1, e2),
        inserted=(_norm(*ins[0]), _norm(*ins[1])),
        case=case,
        is_jdes=True,
        is_noop=False,
        distinct_color_count=len({g.color_of[x] for x in (u, w, v, z)}),
    )


def _tree_all_edges(cat: EnsembleCatalog, i: int, g: ColoredMultigraph, check_jcm: bool):
    """Leaves of one all-edges step from member ``i``: an ordered pair of
    distinct instances, then one of the two swaps with probability 1/2.
    Non-admissible and no-op swaps stay put."""
    key = cat.members[i]
    inst = _instances(key)
    m = len(inst)
    base = 1.0 / (m * (m - 1)) / 2.0
    for p1 in range(m):
        for p2 in range(m):
            if p1 == p2:
                continue
            (u, w), (v, z) = inst[p1], inst[p2]
            for ins in (((u, z), (v, w)), ((u, v), (w, z))):
                dest = _swap_key(key, (inst[p1], inst[p2]), ins)
                if dest == key or (check_jcm and not cat._admissible(key, dest)):
                    yield _Leaf(i, base, None)
                    continue
                case = classify(g, EdgeInstance(p1, u, w), EdgeInstance(p2, v, z))
                yield _Leaf(cat.lookup(dest), base, _proposal(g, inst, p1, p2, ins, case))


def _tree_color_class(cat: EnsembleCatalog, i: int, g: ColoredMultigraph):
    """Leaves of one color-class step from member ``i``.

    A color is drawn uniformly, then an ordered pair of distinct instances
    from its class.  Among the swaps of that pair that keep the joint color
    matrix and move the graph, the distinct destinations are equally likely;
    with none the chain stays.  A class with fewer than two instances leaves
    the graph unchanged.
    """
    key = cat.members[i]
    colors = cat.colors
    inst = _instances(key)
    L = cat.color_count
    for lab in range(L):
        cls = [p for p, (u, w) in enumerate(inst) if colors[u] == lab or colors[w] == lab]
        S = len(cls)
        if S < 2:
            yield _Leaf(i, 1.0 / L, None)
            continue
        base = 1.0 / (L * S * (S - 1))
        for p1 in cls:
            for p2 in cls:
                if p1 == p2:
                    continue
                (u, w), (v, z) = inst[p1], inst[p2]
                dests: dict[Key, tuple] = {}
                for ins in (((u, z), (v, w)), ((u, v), (w, z))):
                    dest = _swap_key(key, (inst[p1], inst[p2]), ins)
                    if dest != key and cat._admissible(key, dest) and dest not in dests:
                        dests[dest] = ins
                if not dests:
                    yield _Leaf(i, base, None)
                    continue
                case = classify(g, EdgeInstance(p1, u, w), EdgeInstance(p2, v, z))
                for dest, ins in dests.items():
                    yield _Leaf(
                        cat.lookup(dest), base / len(dests), _proposal(g, inst, p1, p2, ins, case)
                    )


def _leaves(cat: EnsembleCatalog, i: int, mode: Mode, g: ColoredMultigraph) -> list[_Leaf]:
    mode = Mode(mode)
    return cat._cached("leaves", (mode, i), lambda: list(_expand(cat, i, mode, g)))


def _member_graph(cat: EnsembleCatalog, i: int) -> ColoredMultigraph:
    # read-only use: the oracle never mutates member graphs
    return cat._cached("graph", i, lambda: cat.graph(i))


def _expand(cat: EnsembleCatalog, i: int, mode: Mode, g: ColoredMultigraph):
    if mode == Mode.POLARIS_C:
        if not cat.preserves_jcm:
            raise ValueError("the color-class sampler needs a JCM-preserving catalog")
        return _tree_color_class(cat, i, g)
    if mode == Mode.POLARIS_B and not cat.preserves_jcm:
        raise ValueError("polaris-b needs a JCM-preserving catalog")
    if mode == Mode.CM and cat.preserves_jcm:
        raise ValueError("cm walks the degree-only ensemble; enumerate with preserve_jcm=False")
    return _tree_all_edges(cat, i, g, mode == Mode.POLARIS_B)


def _default_rho(mode: Mode) -> RhoFunction:
    return rho_c if Mode(mode) == Mode.POLARIS_C else rho_b


def target_distribution(cat: EnsembleCatalog, target=None) -> np.ndarray:
    """The target probabilities of every member, normalised."""
    target = target or UniformTarget()
    logw = np.array([target.log_weight(k) for k in cat.members], dtype=np.float64)
    w = np.exp(logw - logw.max())
    return w / w.sum()


def proposal_matrix(cat: EnsembleCatalog, mode: Mode) -> np.ndarray:
    """``Q[i, j]``: probability that one step from ``i`` proposes the move to
    ``j != i`` (before acceptance).  The diagonal is left at 0."""
    k = len(cat)
    Q = np.zeros((k, k))
    for i in range(k):
        g = _member_graph(cat, i)
        for leaf in _leaves(cat, i, mode, g):
            if leaf.proposal is not None:
                Q[i, leaf.dest] += leaf.prob
    return Q


def transition_matrix(
    cat: EnsembleCatalog,
    mode: Mode,
    target=None,
    rho: RhoFunction | None = None,
) -> np.ndarray:
    """Exact one-step transition matrix of the sampler over the catalog.

    Each leaf of the sampling tree contributes its probability times the
    acceptance ``min(1, rho * pi_j / pi_i)``, where ``rho`` defaults to the
    sampler's closed-form ratio and ``pi`` comes from ``target.log_weight``.
    Everything not accepted stays on the diagonal.
    """
    rho = rho or _default_rho(mode)
    pi = target_distribution(cat, target)
    k = len(cat)
    P = np.zeros((k, k))
    for i in range(k):
        g = _member_graph(cat, i)
        moved = 0.0
        for leaf in _leaves(cat, i, mode, g):
            if leaf.proposal is None:
                continue
            a = min(1.0, rho(g, leaf.proposal) * pi[leaf.dest] / pi[i])
            P[i, leaf.dest] += leaf.prob * a
            moved += leaf.prob * a
        P[i, i] = 1.0 - moved
    return P


def rho_mismatch(cat: EnsembleCatalog, mode: Mode, rho: RhoFunction | None = None) -> float:
    """Largest relative gap between the closed-form ratio and the exact
    reverse/forward proposal ratio read off :func:`proposal_matrix`."""
    rho = rho or _default_rho(mode)
    Q = proposal_matrix(cat, mode)
    worst = 0.0
    for i in range(len(cat)):
        g = _member_graph(cat, i)
        for leaf in _leaves(cat, i, mode, g):
            if leaf.proposal is None:
                continue
            exact = Q[leaf.dest, i] / Q[i, leaf.dest]
            worst = max(worst, abs(rho(g, leaf.proposal) - exact) / exact)
    return worst


def stationarity_residual(P: np.ndarray, dist: np.ndarray) -> float:
    """``max |dist @ P - dist|``."""
    P = np.asarray(P, dtype=np.float64)
    dist = np.asarray(dist, dtype=np.float64)
    if P.ndim != 2 or P.shape[0] != P.shape[1] or dist.shape != (P.shape[0],):
        raise ValueError(f"shape mismatch: matrix {P.shape}, distribution {dist.shape}")
    return float(np.max(np.abs(dist @ P - dist))) if dist.size else 0.0


# --------------------------------------------------------------------------
# structure of the state graph


@dataclass(frozen=True)
class ConnectivityReport:
    strongly_connected: bool
    diameter: int
    reached: int
    symmetric: bool


def _bfs(adj: list[set[int]], src: int) -> list[int]:
    dist = [-1] * len(adj)
    dist[src] = 0
    q = deque([src])
    while q:
        x = q.popleft()
        for y in adj[x]:
            if dist[y] < 0:
                dist[y] = dist[x] + 1
                q.append(y)
    return dist


def connectivity_report(cat: EnsembleCatalog) -> ConnectivityReport:
    """Reachability of every member from the observed one over single swaps.

    The diameter is the largest shortest-path length between any two
    members (``-1`` when not connected).
    """
    adj = cat.adjacency
    symmetric = all(i in adj[j] for i in range(len(adj)) for j in adj[i])
    dist = _bfs(adj, cat.observed_index)
    reached = sum(d >= 0 for d in dist)
    connected = reached == len(cat)
    diameter = -1
    if connected:
        diameter = max(max(_bfs(adj, s)) for s in range(len(cat)))
    return ConnectivityReport(connected, diameter, reached, symmetric)


def chain_period(P: np.ndarray, tol: float = 0.0) -> int:
    """Period of the chain with support ``P > tol``, from its first state.

    Uses the BFS-level characterisation: the period is the gcd of
    ``level[x] + 1 - level[y]`` over all support edges ``x -> y``.  Assumes
    the support is strongly connected.
    """
    k = P.shape[0]
    adj = [set(np.flatnonzero(P[i] > tol).tolist()) for i in range(k)]
    level = _bfs(adj, 0)
    g = 0
    for x in range(k):
        if level[x] < 0:
            continue
        for y in adj[x]:
            g = math.gcd(g, abs(level[x] + 1 - level[y]))
    return g


# --------------------------------------------------------------------------
# empirical checks against the compiled engines


@dataclass
class TVResult:
    tv: float
    counts: np.ndarray
    expected: np.ndarray

    @property
    def replicates(self) -> int:
        return int(self.counts.sum())


def _state_index(cat: EnsembleCatalog, g: ColoredMultigraph) -> int:
    return cat.lookup(g.canonical_key())


def empirical_tv(
    cat: EnsembleCatalog,
    mode: Mode,
    steps: int,
    replicates: int,
    seed: int,
    target=None,
) -> TVResult:
    """Run ``replicates`` independent chains of ``steps`` steps from the
    observed member and compare the final states with the target.

    Replicate ``r`` uses the stream ``(seed, r)``.
    """
    target = target or UniformTarget()
    g0 = cat.graph(cat.observed_index)
    tkind, W = target.kernel_args(g0.vertex_count)
    code = _MODE_CODE[Mode(mode)]
    counts = np.zeros(len(cat), dtype=np.int64)
    tallies = np.zeros(4, dtype=np.int64)
    cases = np.zeros(15, dtype=np.int64)
    extra = np.zeros(2, dtype=np.int64)
    info = np.zeros(11, dtype=np.int64)
    for r in range(replicates):
        g = g0.copy()
        if steps:
            run_steps(g.state, code, steps, make_rng(seed, r), tkind, W, False, tallies, cases, extra, info)
        counts[_state_index(cat, g)] += 1
    expected = target_distribution(cat, target)
    tv = 0.5 * float(np.abs(counts / max(replicates, 1) - expected).sum())
    return TVResult(tv, counts, expected)


def tv_noise_bound(
    expected: np.ndarray, replicates: int, quantile: float = 0.9999, seed: int = 0, draws: int = 20000
) -> float:
    """Monte-Carlo ``quantile`` of the TV distance between ``replicates`` iid
    draws from ``expected`` and ``expected`` itself."""
    rng = np.random.default_rng(seed)
    sims = rng.multinomial(replicates, expected, size=draws) / replicates
    tvs = 0.5 * np.abs(sims - expected).sum(axis=1)
    return float(np.quantile(tvs, quantile))


def single_step_frequencies(
    cat: EnsembleCatalog, mode: Mode, trials: int, seed: int, start: int | None = None, target=None
) -> np.ndarray:
    """Empirical distribution of the state after one engine step from member
    ``start`` (default: the observed member), over ``trials`` repetitions."""
    target = target or UniformTarget()
    start = cat.observed_index if start is None else start
    g = cat.graph(start)
    tkind, W = target.kernel_args(g.vertex_count)
    rows = single_step_trials(g.state, _MODE_CODE[Mode(mode)], trials, make_rng(seed), tkind, W)
    if g.canonical_key() != cat.members[start]:
        raise CatalogError("single-step trials did not restore the start state")
    freq = np.zeros(len(cat))
    accepted = rows[rows[:, 0] == 2, 1:]
    freq[start] = trials - accepted.shape[0]
    if accepted.shape[0]:
        uniq, mult = np.unique(accepted, axis=0, return_counts=True)
        key = cat.members[start]
        for (u, w, v, z, a, b, c, d), k in zip(uniq.tolist(), mult.tolist()):
            dest = _swap_key(key, ((u, w), (v, z)), ((a, b), (c, d)))
            freq[cat.lookup(dest)] += k
    return freq / trials
