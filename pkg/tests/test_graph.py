from collections import Counter

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import brute_degrees, brute_jcm, colored_multigraphs, graph_of
from jcmsample.classify import enumerate_swaps
from jcmsample.corpus import labelled_pair
from jcmsample.graph import (
    DegenerateClassError,
    GraphInputError,
    InconsistentGraphError,
    apply_swap,
    build,
    jcm,
    jcm_from_edges,
    sample_instance,
)
from jcmsample.metrics import same_ensemble
from jcmsample.oracle import Caps, CapsExceededError, enumerate_ensemble
from jcmsample.samplers import ChainConfig, Mode, run_chain


def _instance_of(g, pair, skip=()):
    for inst in g.instances():
        if inst.pair == pair and inst.index not in skip:
            return inst
    raise AssertionError(f"no instance of {pair}")


def _proposal(g, e1, e2, inserted):
    want = sorted(tuple(sorted(p)) for p in inserted)
    for p in enumerate_swaps(g, e1, e2):
        if sorted(p.inserted) == want:
            return p
    raise AssertionError(f"no DES inserting {inserted}")


# -- construction ---------------------------------------------------------


def test_triangle_caches():
    g = build([0, 0, 1], [(0, 1, 1), (0, 2, 1), (1, 2, 1)])
    assert g.degree.tolist() == [2, 2, 2]
    assert g.edge_instance_total == 3
    assert g.class_sizes.tolist() == [3, 2]


def test_self_loop_counts_twice():
    g = build([0], [(0, 0, 2)])
    assert g.degree.tolist() == [4]
    assert g.edge_instance_total == 2
    assert g.class_sizes.tolist() == [2]
    assert g.colored_degree[0, 0] == 4


def test_bichrome_instances_live_in_both_classes():
    g = build([0, 1], [(0, 1, 3)])
    assert g.colored_degree[0, 1] == 3
    assert g.colored_degree[1, 0] == 3
    assert g.class_sizes.tolist() == [3, 3]


@pytest.mark.parametrize(
    "edges, fragment",
    [
        ([(0, 5, 1)], "out of range"),
        ([(0, 1, 0)], "multiplicity"),
        ([(0, 1, 1), (1, 0, 2)], "duplicate"),
    ],
)
def test_build_rejects_bad_records(edges, fragment):
    with pytest.raises(GraphInputError, match=fragment) as info:
        build([0, 0, 1], edges)
    # the diagnostic names the offending record
    assert str(edges[-1]) in str(info.value)


def test_multiplicity_lookup_is_symmetric():
    g = build([0, 0, 1], [(2, 0, 3), (1, 1, 1)])
    assert g.multiplicity(0, 2) == g.multiplicity(2, 0) == 3
    assert g.multiplicity(1, 1) == 1
    assert g.multiplicity(0, 1) == 0
    assert g.edges() == [(0, 2, 3), (1, 1, 1)]


@given(colored_multigraphs(min_instances=0))
def test_caches_match_definitions(spec):
    colors, edges, L = spec
    g = graph_of(spec)
    g.check_consistency()
    assert g.edges() == edges
    np.testing.assert_array_equal(g.degree, brute_degrees(len(colors), edges))
    np.testing.assert_array_equal(g.colored_degree.sum(axis=1), g.degree)
    for c in range(L):
        touching = sum(mu for u, w, mu in edges if c in (colors[u], colors[w]))
        assert g.class_sizes[c] == touching


# -- joint color matrix ---------------------------------------------------


def test_jcm_triangle():
    J = jcm(build([0, 0, 1], [(0, 1, 1), (0, 2, 1), (1, 2, 1)]))
    assert (J[0, 0], J[0, 1], J[1, 0], J[1, 1]) == (1, 2, 2, 0)


def test_jcm_self_loop():
    assert jcm(build([0], [(0, 0, 2)]))[0, 0] == 2


@given(colored_multigraphs(min_instances=0))
def test_jcm_symmetric_and_sums_to_instance_total(spec):
    colors, edges, L = spec
    g = graph_of(spec)
    J = jcm(g)
    np.testing.assert_array_equal(J, J.T)
    assert np.triu(J).sum() == g.edge_instance_total
    np.testing.assert_array_equal(J, brute_jcm(colors, edges, L))
    np.testing.assert_array_equal(J, jcm_from_edges(colors, edges, L))


def test_labelled_pair_shares_degrees_and_jcm():
    left, right = labelled_pair()
    assert left.canonical_key() != right.canonical_key()
    np.testing.assert_array_equal(jcm(left), jcm(right))
    np.testing.assert_array_equal(left.degree, right.degree)
    assert same_ensemble(left, right)


def test_labelled_pair_is_one_jdes_apart():
    left, right = labelled_pair()
    g = left.copy()
    p = _proposal(g, _instance_of(g, (1, 7)), _instance_of(g, (3, 6)), [(1, 6), (3, 7)])
    assert p.is_jdes and not p.is_noop
    apply_swap(g, p)
    assert g.canonical_key() == right.canonical_key()


def test_labelled_pair_non_jdes_swap_changes_jcm():
    left, _ = labelled_pair()
    g = left.copy()
    p = _proposal(g, _instance_of(g, (3, 4)), _instance_of(g, (8, 9)), [(3, 8), (4, 9)])
    assert not p.is_jdes
    apply_swap(g, p)
    np.testing.assert_array_equal(g.degree, left.degree)
    assert not np.array_equal(jcm(g), jcm(left))
    assert not same_ensemble(g, left)


def test_labelled_pair_is_too_large_to_enumerate():
    # membership of both graphs is shown above by the defining constraints;
    # the ensemble itself is far beyond exhaustive enumeration
    left, _ = labelled_pair()
    with pytest.raises(CapsExceededError):
        enumerate_ensemble(left)
    with pytest.raises(CapsExceededError):
        enumerate_ensemble(left, Caps(max_vertices=10, max_instances=10, max_members=20000))


# -- instance sampling ----------------------------------------------------


def _pair_counts(g, color, draws, excluded=None, seed=0):
    rng = np.random.default_rng(seed)
    c = Counter()
    for _ in range(draws):
        c[sample_instance(g, color, rng, excluded).pair] += 1
    return c


def test_sample_instance_proportional_to_multiplicity():
    g = build([0, 0, 0, 0], [(0, 1, 2), (2, 3, 1)])
    c = _pair_counts(g, None, 30000)
    assert abs(c[(0, 1)] / 30000 - 2 / 3) < 0.015
    assert abs(c[(2, 3)] / 30000 - 1 / 3) < 0.015


def test_sample_instance_with_exclusion():
    g = build([0, 0, 0, 0], [(0, 1, 2), (2, 3, 1)])
    excluded = _instance_of(g, (0, 1))
    c = _pair_counts(g, 0, 30000, excluded)
    assert abs(c[(0, 1)] / 30000 - 0.5) < 0.015
    # the excluded instance itself never comes back
    rng = np.random.default_rng(1)
    assert all(sample_instance(g, 0, rng, excluded).index != excluded.index for _ in range(2000))


def test_sample_instance_chi_square_on_five_multiedges():
    # chi-square critical value for 4 degrees of freedom at alpha = 0.01
    crit = 13.2767
    g = build([0, 1, 0, 1, 0, 1], [(0, 1, 1), (0, 3, 2), (2, 1, 3), (4, 5, 4), (2, 5, 5)])
    rng = np.random.default_rng(20240917)
    draws = 10**6
    ids = np.fromiter((sample_instance(g, 1, rng).index for _ in range(draws)), dtype=np.int64, count=draws)
    s = g.state
    pairs = s.inst_u[ids] * g.vertex_count + s.inst_w[ids]
    keys = sorted({u * g.vertex_count + w: mu for u, w, mu in g.edges()}.items())
    observed = np.array([np.count_nonzero(pairs == k) for k, _ in keys])
    expected = np.array([mu for _, mu in keys]) / 15 * draws
    stat = float(((observed - expected) ** 2 / expected).sum())
    assert stat < crit


def test_sample_instance_degenerate_population():
    g = build([0, 0, 1], [(0, 1, 1), (0, 2, 1)])
    rng = np.random.default_rng(0)
    only = g.color_class(1)[0]
    with pytest.raises(DegenerateClassError):
        sample_instance(g, 1, rng, only)
    with pytest.raises(DegenerateClassError):
        sample_instance(build([0], []), None, rng)


# -- swaps ----------------------------------------------------------------


def test_swap_on_four_distinct_vertices():
    g = build([0, 0, 0, 0], [(0, 1, 1), (2, 3, 1)])
    p = _proposal(g, _instance_of(g, (0, 1)), _instance_of(g, (2, 3)), [(0, 3), (1, 2)])
    apply_swap(g, p)
    assert g.edges() == [(0, 3, 1), (1, 2, 1)]


def test_two_self_loops_become_a_double_edge():
    g = build([0, 0], [(0, 0, 1), (1, 1, 1)])
    p = _proposal(g, _instance_of(g, (0, 0)), _instance_of(g, (1, 1)), [(0, 1), (0, 1)])
    apply_swap(g, p)
    assert g.edges() == [(0, 1, 2)]
    g.check_consistency()


def test_apply_swap_rejects_stale_instances():
    g = build([0, 0, 0, 0], [(0, 1, 1), (2, 3, 1)])
    e1, e2 = _instance_of(g, (0, 1)), _instance_of(g, (2, 3))
    p = _proposal(g, e1, e2, [(0, 3), (1, 2)])
    apply_swap(g, p)
    with pytest.raises(InconsistentGraphError):
        apply_swap(g, p)


@given(colored_multigraphs(), st.data())
def test_swap_then_reverse_restores_graph(spec, data):
    g = graph_of(spec)
    original = g.canonical_key()
    sizes = g.class_sizes
    degree = g.degree.copy()
    i, j = data.draw(st.lists(st.integers(0, g.edge_instance_total - 1), min_size=2, max_size=2, unique=True))
    e1, e2 = g.instance(i), g.instance(j)
    p = data.draw(st.sampled_from(enumerate_swaps(g, e1, e2)))
    J = jcm(g)
    apply_swap(g, p)
    g.check_consistency()
    np.testing.assert_array_equal(g.degree, degree)
    if p.is_jdes:
        np.testing.assert_array_equal(jcm(g), J)
        np.testing.assert_array_equal(g.class_sizes, sizes)
    # the instance ids now carry the inserted pairs; swap them back
    f1, f2 = g.instance(i), g.instance(j)
    back = _proposal(g, f1, f2, [e1.pair, e2.pair])
    apply_swap(g, back)
    assert g.canonical_key() == original
    g.check_consistency()


def test_caches_coherent_after_many_jdes():
    rng = np.random.default_rng(5)
    n, L = 60, 3
    colors = rng.integers(0, L, n)
    colors[:L] = np.arange(L)
    counts = Counter(tuple(sorted(rng.integers(0, n, 2).tolist())) for _ in range(150))
    g = build(colors, [(u, w, mu) for (u, w), mu in counts.items()], L)
    start = g.copy()
    trace = run_chain(g, ChainConfig(iterations=20000, seed=3, mode=Mode.POLARIS_C))
    assert trace.outcome_counts[2] >= 10**4
    g.check_consistency()
    assert same_ensemble(g, start)
    assert g.edge_instance_total == start.edge_instance_total


def test_multiplicity_table_survives_compaction():
    # a long chain creates and deletes many distinct pairs; each compaction
    # rebuilds the table in place and must keep every live multiplicity
    rng = np.random.default_rng(8)
    n = 40
    counts = Counter(tuple(sorted(rng.integers(0, n, 2).tolist())) for _ in range(30))
    g = build([0] * n, [(u, w, mu) for (u, w), mu in counts.items()])
    before = int(g.state.hmeta[1])
    run_chain(g, ChainConfig(iterations=5000, seed=1, mode=Mode.POLARIS_B))
    assert int(g.state.hmeta[1]) > before
    g.check_consistency()
    live = {(u, w): mu for u, w, mu in g.edges()}
    for u in range(n):
        for w in range(u, n):
            assert g.multiplicity(u, w) == live.get((u, w), 0)


def test_copy_is_independent():
    g = build([0, 0, 0, 0], [(0, 1, 1), (2, 3, 1)])
    h = g.copy()
    p = _proposal(g, _instance_of(g, (0, 1)), _instance_of(g, (2, 3)), [(0, 3), (1, 2)])
    apply_swap(g, p)
    assert h.edges() == [(0, 1, 1), (2, 3, 1)]
    h.check_consistency()
