"""Acceptance criteria 1-10, each at its stated tolerance.

Every criterion records one ``criterion N: PASS|FAIL`` line.  The lines are
printed in the pytest terminal summary, and directly when this file is run
as a script (``python3 tests/test_acceptance.py``).
"""

import hashlib
import math
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from conftest import ACCEPTANCE_LINES  # noqa: E402
from jcmsample import oracle as O  # noqa: E402
from jcmsample.corpus import builtin_corpus  # noqa: E402
from jcmsample.graph import build, jcm  # noqa: E402
from jcmsample.metrics import color_assortativity, relative_error  # noqa: E402
from jcmsample.samplers import (  # noqa: E402
    ChainConfig,
    EdgeWeightTarget,
    Mode,
    StepOutcome,
    auto_iterations,
    run_chain,
)

B, C, CM = Mode.POLARIS_B, Mode.POLARIS_C, Mode.CM
TOL = 1e-12


def report(k: int, ok: bool, detail: str) -> None:
    line = f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line, flush=True)
    assert ok, line


def corpus():
    return builtin_corpus()


def by_name(name):
    return next(i for i in corpus() if i.name == name)


def soak_graph(L=4, seed=2024, n=1000, m=5000):
    """Seeded random multigraph; loops and repeated pairs kept as drawn."""
    rng = np.random.default_rng(seed)
    colors = rng.permutation(np.arange(n) % L)
    counts = {}
    for u, w in rng.integers(0, n, (m, 2)):
        key = (min(u, w), max(u, w))
        counts[key] = counts.get(key, 0) + 1
    return build(colors, [(int(u), int(w), mu) for (u, w), mu in counts.items()], L)


def recolored(g, L, seed):
    rng = np.random.default_rng(seed)
    colors = rng.permutation(np.arange(g.vertex_count) % L)
    return build(colors, g.edges(), L)


# --------------------------------------------------------------------------


def test_criterion_1_exact_stationarity():
    t0 = time.perf_counter()
    worst_row = worst_res = 0.0
    count = 0
    for inst in corpus():
        g = inst.graph()
        cat = O.enumerate_ensemble(g)
        target = EdgeWeightTarget.random(g.vertex_count, np.random.default_rng([17, count]), 0.5)
        for mode in (B, C):
            for t in (None, target):
                P = O.transition_matrix(cat, mode, t)
                pi = O.target_distribution(cat, t)
                worst_row = max(worst_row, float(np.abs(P.sum(axis=1) - 1).max()))
                worst_res = max(worst_res, O.stationarity_residual(P, pi))
        count += 1
    secs = time.perf_counter() - t0
    ok = count >= 25 and worst_row <= TOL and worst_res <= TOL and secs < 120
    report(1, ok, f"{count} instances x 2 samplers x 2 targets; max row-sum error {worst_row:.2e}, "
                  f"max residual {worst_res:.2e}, {secs:.1f}s")


def test_criterion_2_connectivity():
    t0 = time.perf_counter()
    bad, checked = [], 0
    for inst in corpus():
        cat = O.enumerate_ensemble(inst.graph())
        if len(cat) < 2:
            continue
        checked += 1
        if not O.connectivity_report(cat).strongly_connected:
            bad.append(inst.name)
    secs = time.perf_counter() - t0
    report(2, not bad and secs < 60, f"{checked} instances with |Z|>=2, disconnected: {bad or 'none'}, {secs:.1f}s")


# fixed before any run; they cover loops, multiedges, bichrome copies and 3 colors
AGREEMENT_INSTANCES = ["loops-and-double", "two-color-loops", "bichrome-copies", "three-color-star", "random-s20-n7-L3-m8"]


def test_criterion_3_oracle_engine_agreement():
    trials = 10**6
    worst, entries, misses = 0.0, 0, []
    for k, name in enumerate(AGREEMENT_INSTANCES):
        cat = O.enumerate_ensemble(by_name(name).graph())
        for mode in (B, C):
            row = O.transition_matrix(cat, mode)[cat.observed_index]
            freq = O.single_step_frequencies(cat, mode, trials, seed=3000 + k)
            se = np.sqrt(row * (1 - row) / trials)
            for p, f, s in zip(row, freq, se):
                entries += 1
                if s == 0:
                    if f != p:
                        misses.append((name, mode.value, "impossible move seen"))
                    continue
                z = abs(f - p) / s
                worst = max(worst, z)
                if z > 3:
                    misses.append((name, mode.value, round(z, 2)))
    report(3, not misses, f"{entries} entries over 5 instances x 2 samplers, max |z| {worst:.2f}, "
                          f"outside 3 SE: {misses or 'none'}")


def test_criterion_4_empirical_uniformity():
    inst = by_name("three-color-star")
    cat = O.enumerate_ensemble(inst.graph())
    assert 3 <= len(cat) <= 50
    out = {}
    for mode in (B, C):
        out[mode.value] = O.empirical_tv(cat, mode, steps=10**5, replicates=10**3, seed=4040).tv
    ok = all(tv < 0.05 for tv in out.values())
    report(4, ok, f"{inst.name} (|Z|={len(cat)}), 1000 replicates x 1e5 steps, TV " +
           ", ".join(f"{k} {v:.4f}" for k, v in out.items()))


def _fingerprint(g):
    return hashlib.sha256(jcm(g).tobytes() + g.degree.tobytes()).hexdigest()


def test_criterion_5_invariant_soak():
    g = soak_graph()
    ref = _fingerprint(g)
    seen = []
    trace = run_chain(g, ChainConfig(iterations=10**6, seed=55, mode=C, record_every=1000),
                      statistic=lambda h: seen.append(_fingerprint(h) == ref) or 0.0)
    g.check_consistency()
    violations = seen.count(False)
    oos = trace.outcome_counts[StepOutcome.OUT_OF_SPACE]
    ok = len(seen) == 1000 and violations == 0 and oos == 0
    report(5, ok, f"{len(seen)} hash checks, {violations} violations, out-of-space {oos}, "
                  f"accepted {trace.outcome_counts[StepOutcome.ACCEPTED]}")


def _accepted_fraction(g, mode, steps, seed):
    t = run_chain(g.copy(), ChainConfig(iterations=steps, seed=seed, mode=mode))
    return t.outcome_counts[StepOutcome.ACCEPTED] / steps


def _stationary_move_probability(cat, mode):
    P = O.transition_matrix(cat, mode)
    return float(np.mean(1.0 - np.diag(P)))


def test_criterion_6_peskun_direction():
    steps = 10**5
    lines, failures = [], []
    for inst in corpus():
        g = inst.graph()
        fb, fc = _accepted_fraction(g, B, steps, 66), _accepted_fraction(g, C, steps, 66)
        cat = O.enumerate_ensemble(g)
        eb, ec = _stationary_move_probability(cat, B), _stationary_move_probability(cat, C)
        if fc < fb:
            failures.append(f"{inst.name} (chain B {fb:.4f} > C {fc:.4f}; exact B {eb:.4f}, C {ec:.4f})")
    g = soak_graph()
    fb, fc = _accepted_fraction(g, B, 10**6, 66), _accepted_fraction(g, C, 10**6, 66)
    lines.append(f"soak graph B {fb:.4f} vs C {fc:.4f}")
    if fc < fb:
        failures.append("soak graph")
    report(6, not failures, f"{lines[0]}; violations: {'; '.join(failures) or 'none'}")


def assortative_graph(n=500, m=3000, same=0.97, seed=77):
    rng = np.random.default_rng(seed)
    colors = np.arange(n) % 2
    by_color = [np.flatnonzero(colors == c) for c in (0, 1)]
    counts = {}
    for _ in range(m):
        u = int(rng.integers(n))
        c = colors[u] if rng.random() < same else 1 - colors[u]
        w = int(rng.choice(by_color[c]))
        key = (min(u, w), max(u, w))
        counts[key] = counts.get(key, 0) + 1
    return build(colors, [(u, w, mu) for (u, w), mu in counts.items()], 2)


def test_criterion_7_cm_divergence():
    g = assortative_graph()
    r0 = color_assortativity(g)
    iters = auto_iterations(g.edge_instance_total)
    errs = {}
    for mode in (CM, C):
        e = []
        for k in range(100):
            h = g.copy()
            run_chain(h, ChainConfig(iterations=iters, seed=7007, mode=mode, chain_index=k))
            e.append(relative_error(r0, color_assortativity(h)))
        errs[mode.value] = (float(np.mean(e)), float(np.max(e)))
    ok = r0 >= 0.9 and errs["cm"][0] >= 0.5 and errs["polaris-c"][1] <= 1e-12
    report(7, ok, f"observed assortativity {r0:.4f}, {iters} steps x 100 samples; mean relative error "
                  f"cm {errs['cm'][0]:.4f}, polaris-c max {errs['polaris-c'][1]:.1e}")


def test_criterion_8_color_scaling():
    base = soak_graph()
    steps = 10**6
    oos, per = {}, {}
    for L in (2, 4, 8, 16):
        g = recolored(base, L, seed=800 + L)
        tb = run_chain(g.copy(), ChainConfig(iterations=steps, seed=88, mode=B))
        oos[L] = tb.fractions()[StepOutcome.OUT_OF_SPACE]
        run_chain(g.copy(), ChainConfig(iterations=10**4, seed=1, mode=C))  # warm-up
        best = math.inf
        for rep in range(3):
            tc = run_chain(g.copy(), ChainConfig(iterations=steps, seed=89 + rep, mode=C))
            best = min(best, tc.elapsed_seconds / max(tc.proposals, 1))
        per[L] = best
    monotone = all(oos[a] <= oos[b] for a, b in zip((2, 4, 8), (4, 8, 16)))
    spread = max(per.values()) / min(per.values())
    report(8, monotone and spread < 2, "B out-of-space " + ", ".join(f"L={L} {v:.4f}" for L, v in oos.items()) +
           f"; C ns/proposal " + ", ".join(f"{v * 1e9:.0f}" for v in per.values()) + f" (max/min {spread:.2f})")


def test_criterion_9_throughput():
    g = soak_graph()
    run_chain(g.copy(), ChainConfig(iterations=10**4, seed=1, mode=C))
    t = run_chain(g, ChainConfig(iterations=2 * 10**6, seed=99, mode=C))
    rate = t.proposals / t.elapsed_seconds
    report(9, rate >= 1e5, f"{rate:,.0f} proposals/s on n=1000, m=5000, |L|=4")


def test_criterion_10_cli_determinism(tmp_path):
    g = soak_graph(n=300, m=1500)
    cp, ep = tmp_path / "in.colors", tmp_path / "in.edges"
    from jcmsample.io import write_graph

    write_graph(g, ep)
    outs = []
    for run in ("a", "b"):
        out = tmp_path / run
        cmd = [sys.executable, "-m", "jcmsample", "sample", "--mode", "polaris-c", "--edges", str(ep),
               "--colors", str(cp), "--iterations", "auto", "--samples", "3", "--seed", "1010",
               "--record-every", "100", "--out", str(out)]
        res = subprocess.run(cmd, capture_output=True, text=True)
        assert res.returncode == 0, res.stderr
        outs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    same = outs[0] == outs[1]
    report(10, same and len(outs[0]) == 10, f"{len(outs[0])} files per run, byte-identical: {same}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
