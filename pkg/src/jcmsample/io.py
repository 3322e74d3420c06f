"""Text formats for graphs and chain traces.

Color files hold one ``vertex<TAB>color`` line per vertex.  Edge files hold
``u<TAB>w[<TAB>multiplicity]`` lines; the multiplicity defaults to 1 and
repeated pairs accumulate, so a raw interaction log loads directly as a
multigraph.  Fields may be separated by any run of whitespace.  Blank lines
and lines starting with ``#`` are skipped.  Vertex and color names are
arbitrary strings mapped to dense ids in order of first appearance in the
color file.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .graph import ColoredMultigraph, GraphInputError, build

__all__ = ["DataError", "LoadedGraph", "load_graph", "write_graph", "write_trace", "colors_path_for", "TRACE_HEADER"]

log = logging.getLogger(__name__)

TRACE_HEADER = [
    "iteration",
    "out_of_space",
    "unchanged",
    "accepted",
    "rejected",
    "degree_assortativity",
    "statistic",
]


class DataError(GraphInputError):
    """Malformed or inconsistent input files."""


@dataclass
class LoadedGraph:
    graph: ColoredMultigraph
    vertex_names: list[str]
    color_names: list[str]

    def summary(self) -> dict:
        g = self.graph
        per_color = np.bincount(g.color_of, minlength=g.color_count)
        return {
            "vertices": g.vertex_count,
            "edge_instances": g.edge_instance_total,
            "multiedges": len(g.edges()),
            "colors": g.color_count,
            "vertices_per_color": {name: int(k) for name, k in zip(self.color_names, per_color)},
        }


def _records(path: Path):
    try:
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                text = line.strip()
                if text and not text.startswith("#"):
                    yield lineno, text.split()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror or exc}") from exc


def load_graph(colors_path: str | Path, edges_path: str | Path) -> LoadedGraph:
    colors_path, edges_path = Path(colors_path), Path(edges_path)
    vertex_id: dict[str, int] = {}
    color_id: dict[str, int] = {}
    vertex_color: list[int] = []
    for lineno, fields in _records(colors_path):
        if len(fields) != 2:
            raise DataError(f"{colors_path}:{lineno}: expected 'vertex<TAB>color', got {len(fields)} fields")
        name, cname = fields
        if name in vertex_id:
            raise DataError(f"{colors_path}:{lineno}: vertex {name!r} already has a color")
        vertex_id[name] = len(vertex_id)
        vertex_color.append(color_id.setdefault(cname, len(color_id)))
    if not vertex_id:
        raise DataError(f"{colors_path}: color file is empty")

    mult: dict[tuple[int, int], int] = {}
    for lineno, fields in _records(edges_path):
        if len(fields) not in (2, 3):
            raise DataError(f"{edges_path}:{lineno}: expected 'u<TAB>w[<TAB>multiplicity]', got {len(fields)} fields")
        ids = []
        for name in fields[:2]:
            if name not in vertex_id:
                raise DataError(f"{edges_path}:{lineno}: vertex {name!r} is not in {colors_path.name}")
            ids.append(vertex_id[name])
        mu = 1
        if len(fields) == 3:
            try:
                mu = int(fields[2])
            except ValueError:
                raise DataError(f"{edges_path}:{lineno}: multiplicity {fields[2]!r} is not an integer") from None
            if mu < 1:
                raise DataError(f"{edges_path}:{lineno}: multiplicity must be >= 1, got {mu}")
        pair = (min(ids), max(ids))
        mult[pair] = mult.get(pair, 0) + mu
    if not mult:
        log.warning("%s contains no edges", edges_path)

    g = build(vertex_color, [(u, w, mu) for (u, w), mu in mult.items()], len(color_id))
    loaded = LoadedGraph(g, list(vertex_id), list(color_id))
    s = loaded.summary()
    log.info(
        "loaded %d vertices, %d edge instances (%d multiedges), %d colors",
        s["vertices"], s["edge_instances"], s["multiedges"], s["colors"],
    )
    return loaded


def colors_path_for(edges_path: str | Path) -> Path:
    """Sibling color file of an edge file: ``x.edges`` -> ``x.colors``."""
    p = Path(edges_path)
    return p.with_suffix(".colors") if p.suffix == ".edges" else p.with_name(p.name + ".colors")


def write_graph(
    g: ColoredMultigraph,
    path: str | Path,
    vertex_names: Sequence[str] | None = None,
    color_names: Sequence[str] | None = None,
) -> Path:
    """Write the edge file at ``path`` and the color file next to it.

    Pairs are written in ascending id order with explicit multiplicities, so
    the bytes depend only on the graph.  Returns the color file path.
    """
    path = Path(path)
    vn = list(vertex_names) if vertex_names is not None else [str(i) for i in range(g.vertex_count)]
    cn = list(color_names) if color_names is not None else [str(i) for i in range(g.color_count)]
    if len(vn) != g.vertex_count or len(cn) != g.color_count:
        raise ValueError("name lists do not match the graph's vertex or color count")
    cpath = colors_path_for(path)
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for u, w, mu in g.edges():
                fh.write(f"{vn[u]}\t{vn[w]}\t{mu}\n")
        with open(cpath, "w", encoding="utf-8", newline="\n") as fh:
            for v in range(g.vertex_count):
                fh.write(f"{vn[v]}\t{cn[int(g.color_of[v])]}\n")
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write graph: {exc.strerror}", str(exc.filename)) from exc
    return cpath


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return "nan" if math.isnan(x) else repr(x)
    return str(x)


def write_trace(trace, path: str | Path) -> None:
    """CSV with one row per record point and a final ``summary`` row holding
    the fraction of iterations in each outcome."""
    from .samplers import StepOutcome

    fr = trace.fractions()
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(TRACE_HEADER)
            for rec in trace.records:
                out.writerow([rec.iteration, *rec.counts, _fmt(rec.degree_assortativity), _fmt(rec.statistic)])
            out.writerow(["summary", *(_fmt(float(fr[k])) for k in StepOutcome), "", ""])
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write trace: {exc.strerror}", str(exc.filename)) from exc
