"""The builtin verification corpus and directory-based corpora.

The builtin set is fixed: a few hand-built graphs that pin down specific
swap cases, followed by seeded random graphs.  Every instance fits the
default enumeration caps (at most 7 vertices and 8 edge instances).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .classify import Case, classify
from .graph import ColoredMultigraph, build

__all__ = ["CorpusInstance", "builtin_corpus", "load_corpus_dir", "case_coverage", "labelled_pair"]


@dataclass(frozen=True)
class CorpusInstance:
    name: str
    colors: tuple[int, ...]
    edges: tuple[tuple[int, int, int], ...]
    color_count: int

    def graph(self) -> ColoredMultigraph:
        return build(self.colors, self.edges, self.color_count)


def _inst(name, colors, edges, L=None) -> CorpusInstance:
    L = L if L is not None else max(colors) + 1
    return CorpusInstance(name, tuple(colors), tuple(tuple(e) for e in edges), L)


_HAND_BUILT = [
    # single color, path with a self-loop alternative
    _inst("path3-mono", [0, 0, 0], [(0, 1, 1), (1, 2, 1)]),
    # two same-colored loops and a doubled monochrome edge
    _inst("loops-and-double", [0, 0, 0, 0], [(0, 0, 1), (1, 1, 1), (2, 3, 2)]),
    # two colors, loops on both sides plus a bridge
    _inst("two-color-loops", [0, 0, 1, 1], [(0, 0, 1), (1, 1, 1), (2, 3, 1), (0, 2, 1)]),
    # bichrome copies and a loop next to a bichrome edge
    _inst("bichrome-copies", [0, 1, 0, 1], [(0, 1, 2), (2, 3, 1), (2, 2, 1), (1, 3, 1)]),
    # three colors, a bichrome star around vertex 0
    _inst("three-color-star", [0, 1, 2, 1, 2], [(0, 1, 1), (0, 2, 1), (0, 3, 1), (0, 4, 1), (1, 2, 1)]),
    # two bichrome edges over the same colors, four distinct vertices
    _inst("bichrome-square", [0, 1, 0, 1], [(0, 1, 1), (2, 3, 1), (0, 3, 1), (1, 2, 1)]),
    # three colors with two bichrome edges over three colors
    _inst("three-color-cross", [0, 1, 0, 2, 1, 2], [(0, 1, 1), (2, 3, 1), (0, 3, 1), (1, 4, 1), (4, 5, 1), (2, 5, 1)]),
    # a color whose class has a single instance
    _inst("sparse-color", [0, 0, 0, 1, 0], [(0, 1, 1), (1, 2, 1), (2, 4, 1), (0, 4, 1), (0, 3, 1)], 2),
]

# seeded random graphs: (seed, vertices, colors, edge instances)
_RANDOM_SPECS = [
    (11, 4, 1, 5), (12, 5, 1, 6), (13, 6, 1, 6), (14, 5, 2, 6), (15, 6, 2, 7),
    (16, 6, 2, 6), (17, 7, 2, 7), (18, 5, 3, 6), (19, 6, 3, 7), (20, 7, 3, 8),
    (21, 4, 2, 6), (22, 5, 2, 8), (23, 7, 2, 6), (24, 6, 3, 6), (25, 7, 3, 7),
    (26, 7, 1, 7), (27, 6, 2, 8),
]


def _random_instance(seed: int, n: int, L: int, m: int) -> CorpusInstance:
    rng = np.random.default_rng(seed)
    colors = [int(c) for c in rng.permutation(np.arange(n) % L)]
    counts: dict[tuple[int, int], int] = {}
    for _ in range(m):
        u, w = sorted(int(x) for x in rng.integers(0, n, 2))
        counts[(u, w)] = counts.get((u, w), 0) + 1
    edges = sorted((u, w, mu) for (u, w), mu in counts.items())
    return _inst(f"random-s{seed}-n{n}-L{L}-m{m}", colors, edges, L)


def builtin_corpus() -> list[CorpusInstance]:
    return list(_HAND_BUILT) + [_random_instance(*spec) for spec in _RANDOM_SPECS]


def case_coverage(instances) -> dict[Case, int]:
    """How many ordered instance pairs, over all members of every instance's
    ensemble, fall in each case."""
    from .oracle import enumerate_ensemble

    out = {c: 0 for c in Case}
    for inst in instances:
        cat = enumerate_ensemble(inst.graph())
        for i in range(len(cat)):
            g = cat.graph(i)
            items = g.instances()
            for a in items:
                for b in items:
                    if a.index != b.index:
                        out[classify(g, a, b)] += 1
    return out


def load_corpus_dir(path: str | Path) -> list[CorpusInstance]:
    """Every ``NAME.edges`` file in ``path`` with its ``NAME.colors`` sibling,
    in name order."""
    from .io import load_graph

    root = Path(path)
    if not root.is_dir():
        raise FileNotFoundError(f"corpus directory {root} does not exist")
    out = []
    for edges in sorted(root.glob("*.edges")):
        colors = edges.with_suffix(".colors")
        if not colors.exists():
            raise FileNotFoundError(f"{edges} has no sibling {colors.name}")
        g = load_graph(colors, edges).graph
        out.append(_inst(edges.stem, [int(c) for c in g.color_of], g.edges(), g.color_count))
    return out


def labelled_pair() -> tuple[ColoredMultigraph, ColoredMultigraph]:
    """Two two-colored multigraphs on ten vertices with the same degree
    sequence and joint color matrix.

    The right graph is the left one after the swap
    ``{(1, 7), (3, 6)} -> {(1, 6), (3, 7)}``.  On the left graph the swap
    ``{(3, 4), (9, 8)} -> {(3, 8), (9, 4)}`` is a DES that changes the joint
    color matrix.
    """
    colors = [0, 0, 0, 0, 0, 1, 1, 1, 1, 1]
    left = [(0, 0, 1), (0, 1, 1), (1, 7, 1), (3, 6, 1), (3, 4, 1), (8, 9, 1), (2, 5, 2), (5, 6, 1), (2, 4, 1)]
    right = [(0, 0, 1), (0, 1, 1), (1, 6, 1), (3, 7, 1), (3, 4, 1), (8, 9, 1), (2, 5, 2), (5, 6, 1), (2, 4, 1)]
    return build(colors, left, 2), build(colors, right, 2)
