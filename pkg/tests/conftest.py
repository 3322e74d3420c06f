import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from jcmsample.corpus import builtin_corpus
from jcmsample.graph import build

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.register_profile("thorough", max_examples=400, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@st.composite
def colored_multigraphs(draw, max_vertices=6, max_instances=8, max_colors=3, min_instances=2):
    """Small colored multigraphs as ``(colors, edges, color_count)``."""
    n = draw(st.integers(2, max_vertices))
    L = draw(st.integers(1, min(max_colors, n)))
    colors = draw(st.lists(st.integers(0, L - 1), min_size=n, max_size=n))
    # make every color id used so the color count is honest
    for c in range(L):
        colors[c] = c
    m = draw(st.integers(min_instances, max_instances))
    ends = draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), min_size=m, max_size=m))
    counts: dict[tuple[int, int], int] = {}
    for u, w in ends:
        key = (min(u, w), max(u, w))
        counts[key] = counts.get(key, 0) + 1
    return colors, sorted((u, w, mu) for (u, w), mu in counts.items()), L


def graph_of(spec):
    colors, edges, L = spec
    return build(colors, edges, L)


@pytest.fixture(scope="session")
def corpus():
    return builtin_corpus()


def brute_jcm(colors, edges, L):
    J = np.zeros((L, L), dtype=np.int64)
    for u, w, mu in edges:
        a, b = colors[u], colors[w]
        J[a, b] += mu
        if a != b:
            J[b, a] += mu
    return J


def brute_degrees(n, edges):
    d = np.zeros(n, dtype=np.int64)
    for u, w, mu in edges:
        d[u] += mu
        d[w] += mu
    return d


#: PASS/FAIL lines collected by the acceptance suite, echoed at the end of the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
