"""Graph statistics: color and degree assortativity, relative error, and
ensemble membership."""

from __future__ import annotations

import numpy as np

from .graph import ColoredMultigraph, jcm

__all__ = [
    "UndefinedStatisticError",
    "mixing_matrix",
    "color_assortativity",
    "color_assortativity_from_jcm",
    "degree_assortativity",
    "relative_error",
    "same_ensemble",
]


class UndefinedStatisticError(ValueError):
    """The statistic has a zero denominator on this input."""


def mixing_matrix(J: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Endpoint mixing matrix ``e`` and marginals ``a`` from a joint color matrix.

    Each instance puts half of its weight on ``e[l, r]`` and half on ``e[r, l]``;
    a self-loop or monochrome instance puts all of it on the diagonal.
    """
    J = np.asarray(J, dtype=np.float64)
    total = np.triu(J).sum()
    if total == 0:
        raise UndefinedStatisticError("no edges")
    off = J - np.diag(np.diag(J))
    e = (np.diag(np.diag(J)) * 2.0 + off) / (2.0 * total)
    return e, e.sum(axis=1)


def color_assortativity_from_jcm(J: np.ndarray) -> float:
    e, a = mixing_matrix(J)
    sq = float(a @ a)
    if np.isclose(sq, 1.0, rtol=0.0, atol=1e-15):
        raise UndefinedStatisticError("all endpoints share one color")
    return (float(np.trace(e)) - sq) / (1.0 - sq)


def color_assortativity(g: ColoredMultigraph) -> float:
    """Newman's discrete assortativity coefficient of the vertex colors.

    Depends on the graph only through its joint color matrix.
    """
    return color_assortativity_from_jcm(jcm(g))


def degree_assortativity(g: ColoredMultigraph) -> float:
    """Pearson correlation of endpoint degrees over both orientations of every
    edge instance (a self-loop gives the pair ``(d, d)`` twice)."""
    s = g.state
    if g.edge_instance_total < 2:
        raise UndefinedStatisticError("need at least two edge instances")
    du = s.degree[s.inst_u].astype(np.float64)
    dw = s.degree[s.inst_w].astype(np.float64)
    x = np.concatenate([du, dw])
    y = np.concatenate([dw, du])
    xc = x - x.mean()
    var = float(xc @ xc)
    if var <= 1e-12 * max(1.0, float(x @ x)):
        raise UndefinedStatisticError("endpoint degrees have zero variance")
    return float(xc @ (y - y.mean())) / var


def relative_error(observed: float, sampled: float) -> float:
    if observed == 0:
        raise UndefinedStatisticError("relative error against an observed value of 0")
    return abs(sampled - observed) / abs(observed)


def same_ensemble(g: ColoredMultigraph, h: ColoredMultigraph) -> bool:
    """True iff ``g`` and ``h`` have equal degree sequences and joint color matrices."""
    if g.vertex_count != h.vertex_count or not np.array_equal(g.color_of, h.color_of):
        raise ValueError("graphs differ in vertex set or coloring")
    return bool(np.array_equal(g.degree, h.degree) and np.array_equal(jcm(g), jcm(h)))
