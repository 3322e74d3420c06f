"""Command-line interface: ``sample``, ``verify`` and ``stats``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 verification failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .graph import GraphInputError, jcm
from .io import DataError, load_graph, write_graph, write_trace
from .metrics import UndefinedStatisticError, color_assortativity, degree_assortativity, same_ensemble
from .samplers import ChainConfig, Mode, auto_iterations, check_aperiodicity, default_record_every, run_chain

log = logging.getLogger("jcmsample")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_VERIFY = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _iterations(text: str):
    if text == "auto":
        return "auto"
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer or 'auto', got {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError("iterations must be >= 0")
    return value


def _positive(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError("expected a positive integer")
    return value


def _seed(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer seed, got {text!r}") from None
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must lie in [0, 2**64)")
    return value


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="jcmsample", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("sample", help="draw graphs from the ensemble of an input graph")
    s.add_argument("--mode", required=True, choices=[m.value for m in Mode])
    s.add_argument("--edges", required=True, type=Path)
    s.add_argument("--colors", required=True, type=Path)
    s.add_argument("--iterations", required=True, type=_iterations, help="steps per chain, or 'auto' for ceil(m ln m)")
    s.add_argument("--samples", type=_positive, default=1, help="independent chains, one output graph each")
    s.add_argument("--seed", required=True, type=_seed)
    s.add_argument("--record-every", type=_positive, default=None, help="trace stride (default round(0.05 m))")
    s.add_argument("--out", required=True, type=Path)
    s.add_argument("--retry-out-of-space", action="store_true",
                   help="polaris-b only: redraw instead of staying put (not exact; for timing comparisons)")
    s.add_argument("--jobs", type=_positive, default=1, help="worker processes for the chains")

    v = sub.add_parser("verify", help="run the exact small-instance checks")
    v.add_argument("--corpus", default="builtin", help="'builtin' or a directory of NAME.edges/NAME.colors pairs")
    v.add_argument("--out", required=True, type=Path, help="JSON-lines report")
    v.add_argument("--tv-steps", type=int, default=2000)
    v.add_argument("--tv-replicates", type=int, default=400)
    v.add_argument("--seed", type=_seed, default=20240901)

    t = sub.add_parser("stats", help="print summary statistics of a graph")
    t.add_argument("--edges", required=True, type=Path)
    t.add_argument("--colors", required=True, type=Path)
    t.add_argument("--json", action="store_true", help="machine-readable output")
    return p


# --------------------------------------------------------------------------
# sample


def _run_one(job):
    """Run chain ``k`` and write its graph and trace.  Returns metadata."""
    colors_path, edges_path, mode, iterations, seed, k, record_every, retry, out = job
    loaded = load_graph(colors_path, edges_path)
    g = loaded.graph
    original = g.copy()
    cfg = ChainConfig(
        iterations=iterations, seed=seed, mode=mode, retry_out_of_space=retry,
        record_every=record_every, chain_index=k,
    )
    trace = run_chain(g, cfg)
    if Mode(mode) == Mode.CM:
        ok = bool(np.array_equal(g.degree, original.degree))
    else:
        ok = same_ensemble(g, original)
    stem = Path(out) / f"sample_{k:04d}"
    write_graph(g, stem.with_suffix(".edges"), loaded.vertex_names, loaded.color_names)
    write_trace(trace, Path(out) / f"trace_{k:04d}.csv")
    return {
        "chain_index": k,
        "graph": f"sample_{k:04d}.edges",
        "trace": f"trace_{k:04d}.csv",
        "outcome_counts": {o.name.lower(): c for o, c in trace.outcome_counts.items()},
        "degenerate_draws": trace.degenerate_draws,
        "in_ensemble": ok,
    }


def _cmd_sample(args) -> int:
    if args.retry_out_of_space and args.mode != Mode.POLARIS_B.value:
        raise UsageError("--retry-out-of-space only applies to --mode polaris-b")
    loaded = load_graph(args.colors, args.edges)
    g = loaded.graph
    m = g.edge_instance_total
    iterations = auto_iterations(m) if args.iterations == "auto" else args.iterations
    if iterations > 0 and m < 2:
        raise DataError(f"sampling needs at least 2 edge instances, the input has {m}")
    if args.mode == Mode.POLARIS_C.value:
        small = [loaded.color_names[c] for c, k in enumerate(g.class_sizes) if k < 2]
        if small:
            log.warning("color classes with fewer than 2 edge instances: %s", ", ".join(small))
    ap = check_aperiodicity(g, warn=False)
    if not (ap.color_class_ok if args.mode == Mode.POLARIS_C.value else ap.all_edges_ok):
        log.warning("no sufficient aperiodicity condition holds for the input graph")
    args.out.mkdir(parents=True, exist_ok=True)
    record_every = args.record_every or default_record_every(m)
    jobs = [
        (args.colors, args.edges, args.mode, iterations, args.seed, k, record_every,
         args.retry_out_of_space, args.out)
        for k in range(args.samples)
    ]
    if args.jobs > 1 and args.samples > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]
    meta = {
        "tool": "jcmsample",
        "version": __version__,
        "mode": args.mode,
        "seed": args.seed,
        "rng": "numpy PCG64 seeded with SeedSequence([seed, chain_index])",
        "iterations": iterations,
        "iterations_rule": "ceil(m*ln(m))" if args.iterations == "auto" else "explicit",
        "record_every": record_every,
        "retry_out_of_space": args.retry_out_of_space,
        "input": {"edges": str(args.edges), "colors": str(args.colors), **loaded.summary()},
        "samples": results,
    }
    with open(args.out / "metadata.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    bad = [r["chain_index"] for r in results if not r["in_ensemble"]]
    if bad:
        log.error("samples %s left the ensemble", bad)
        return EXIT_VERIFY
    return EXIT_OK


# --------------------------------------------------------------------------
# verify


def _cmd_verify(args) -> int:
    from .corpus import builtin_corpus, load_corpus_dir
    from .oracle import CapsExceededError
    from .verify import VerifyOptions, verify_instance, write_report

    try:
        instances = builtin_corpus() if args.corpus == "builtin" else load_corpus_dir(args.corpus)
    except FileNotFoundError as exc:
        raise DataError(str(exc)) from exc
    if not instances:
        raise DataError(f"corpus {args.corpus} is empty")
    opts = VerifyOptions(tv_steps=args.tv_steps, tv_replicates=args.tv_replicates, seed=args.seed)
    records = []
    for inst in instances:
        try:
            rec = verify_instance(inst, opts)
        except CapsExceededError as exc:
            rec = {"name": inst.name, "passed": False, "failures": [str(exc)]}
        records.append(rec)
        status = "ok" if rec["passed"] else "FAIL " + "; ".join(rec["failures"])
        print(f"{inst.name}: {status}")
    write_report(records, args.out)
    failed = sum(not r["passed"] for r in records)
    print(f"{len(records) - failed}/{len(records)} instances passed")
    return EXIT_VERIFY if failed else EXIT_OK


# --------------------------------------------------------------------------
# stats


def _maybe(fn, g):
    try:
        return fn(g)
    except UndefinedStatisticError:
        return None


def _cmd_stats(args) -> int:
    loaded = load_graph(args.colors, args.edges)
    g = loaded.graph
    deg = g.degree
    J = jcm(g)
    info = {
        **loaded.summary(),
        "degree_min": int(deg.min()),
        "degree_max": int(deg.max()),
        "degree_mean": float(deg.mean()),
        "self_loop_instances": int(sum(mu for u, w, mu in g.edges() if u == w)),
        "color_assortativity": _maybe(color_assortativity, g),
        "degree_assortativity": _maybe(degree_assortativity, g),
        "color_names": loaded.color_names,
        "jcm": J.tolist(),
    }
    if args.json:
        print(json.dumps(info, indent=2))
        return EXIT_OK
    names = loaded.color_names
    print(f"vertices              {info['vertices']}")
    print(f"edge instances        {info['edge_instances']}")
    print(f"multiedges            {info['multiedges']}")
    print(f"colors                {info['colors']}")
    print(f"degree min/mean/max   {info['degree_min']} / {info['degree_mean']:.4g} / {info['degree_max']}")
    print(f"self-loop instances   {info['self_loop_instances']}")
    for key in ("color_assortativity", "degree_assortativity"):
        val = info[key]
        label = key.replace("_", " ")
        print(f"{label:<22}{'undefined' if val is None else f'{val:.6f}'}")
    print("joint color matrix")
    width = max(len(x) for x in names) + 2
    print(" " * width + "".join(f"{x:>{width}}" for x in names))
    for name, row in zip(names, J):
        print(f"{name:<{width}}" + "".join(f"{int(x):>{width}}" for x in row))
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    handler = {"sample": _cmd_sample, "verify": _cmd_verify, "stats": _cmd_stats}[args.command]
    try:
        return handler(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"jcmsample: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, GraphInputError) as exc:
        print(f"jcmsample: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"jcmsample: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
