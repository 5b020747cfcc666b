"""``semfusion`` command line: gen, fuse, cluster, query, eval and sweep.

Every output file gets a ``<file>.manifest.json`` sidecar.  The manifest
digest is the sha256 of its canonical JSON; run tags, model headers and
eval reports carry it so any number can be traced to its inputs.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import sys
from pathlib import Path

from . import __version__, alignment, clustering, corpusgen, evaluation, fusion, ingest, pipeline
from .concept_model import Medium
from ._io import atomic_write_text, file_digest
from .errors import DegenerateFeedbackError, SemfusionError
from .retrieval import RankedList, SimilarityKind

log = logging.getLogger("semfusion")

THETA_GRID = tuple(round(0.05 * i, 2) for i in range(1, 21))
RP_GRID = tuple(round(0.1 * i, 1) for i in range(7))


class UsageError(Exception):
    pass


# -- manifests -------------------------------------------------------------------


def manifest_digest(core):
    blob = json.dumps(core, sort_keys=True, separators=(",", ":"), ensure_ascii=True)
    return hashlib.sha256(blob.encode("ascii")).hexdigest()


def write_manifest(output, core, extra=None):
    """Write the sidecar for ``output`` and return the digest of ``core``.

    ``extra`` holds facts that do not change the output bytes (timings,
    execution strategy) and is kept out of the digest.
    """
    core = dict(core, version=__version__)
    digest = manifest_digest(core)
    doc = {"digest": digest, "manifest": core}
    if extra:
        doc["execution"] = extra
    atomic_write_text(f"{output}.manifest.json", json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return digest


def _inputs(**paths):
    return {name: file_digest(p) for name, p in paths.items() if p is not None}


# -- argument types -------------------------------------------------------------


def _unit(text):
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"{text} outside [0, 1]")
    return value


def _theta(text):
    value = float(text)
    if not 0.0 < value <= 1.0:
        raise argparse.ArgumentTypeError(f"theta must be in (0, 1], got {text}")
    return value


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return value


def _positive_float(text):
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return value


def _grid(text):
    return [t for t in (s.strip() for s in text.split(",")) if t]


def _parse_grid(text, convert):
    values = []
    for item in _grid(text):
        try:
            values.append(convert(item))
        except ValueError:
            raise UsageError(f"bad grid value {item!r}") from None
    if not values:
        raise UsageError("empty grid")
    return values


# -- commands --------------------------------------------------------------------


def cmd_gen(args):
    spec = corpusgen.GenSpec(
        seed=args.seed,
        n_cases=args.cases,
        vocab_size=args.vocab,
        concepts_per_text=args.concepts_text,
        concepts_per_image=args.concepts_image,
        overlap_fraction=args.overlap,
        n_queries=args.queries,
        relevant_per_query=args.relevant,
        noise=args.noise,
    )
    corpus, queries, qrels = corpusgen.generate(spec)
    out = Path(args.out)
    paths = {"corpus": out / "corpus.jsonl", "queries": out / "queries.jsonl", "qrels": out / "qrels.txt"}
    ingest.write_case_file(corpus, paths["corpus"])
    ingest.write_case_file(queries, paths["queries"])
    ingest.write_qrels(qrels, paths["qrels"])
    core = {"command": "gen", "seed": spec.seed, "spec": dataclasses.asdict(spec),
            "outputs": {k: file_digest(p) for k, p in paths.items()}}
    digest = write_manifest(out / "gen", core)
    print(f"cases {len(corpus)}  queries {len(queries)}  qrels {len(qrels)}  manifest {digest[:12]}")


def _alphas(args, corpus, queries):
    if args.auto_align:
        if args.qrels is None:
            raise UsageError("--auto-align needs --qrels")
        qrels = ingest.parse_qrels(args.qrels)
        params = pipeline.auto_align(corpus, queries, qrels, args.recall_level)
    else:
        if args.rp_txt is None or args.rp_img is None:
            raise UsageError("give --rp-txt and --rp-img, or --auto-align")
        params = alignment.AlignmentParams(
            avg_txt=alignment.medium_average(corpus, Medium.TEXT),
            avg_img=alignment.medium_average(corpus, Medium.IMAGE),
            rp_txt=args.rp_txt,
            rp_img=args.rp_img,
            recall_level=args.recall_level,
        )
    return params, alignment.compute_alpha(params)


def cmd_fuse(args):
    corpus = ingest.parse_case_file(args.corpus)
    queries = ingest.parse_case_file(args.queries)
    op = fusion.FusionOperator(args.operator)
    params, alphas = _alphas(args, corpus, queries)
    fused = pipeline.align_and_fuse(corpus, op, alphas)
    fused_q = pipeline.align_and_fuse(queries, op, alphas)
    ingest.write_fused(fused, args.out_corpus)
    ingest.write_fused(fused_q, args.out_queries)
    core = {
        "command": "fuse",
        "operator": op.value,
        "operator_formula": op.formula,
        "recall_level": params.recall_level,
        "alignment": {
            "avg_txt": params.avg_txt, "avg_img": params.avg_img,
            "rp_txt": params.rp_txt, "rp_img": params.rp_img,
            "auto": bool(args.auto_align),
        },
        "alphas": list(alphas),
        "clamp_rate": alignment.clamp_rate(corpus, *alphas),
        "inputs": _inputs(corpus=args.corpus, queries=args.queries, qrels=args.qrels),
        "outputs": _inputs(corpus=args.out_corpus, queries=args.out_queries),
    }
    digest = write_manifest(args.out_corpus, core)
    print(f"operator {op.formula}  alphas ({alphas[0]:.6f}, {alphas[1]:.6f})  manifest {digest[:12]}")


def cmd_cluster(args):
    fused = ingest.parse_fused(args.fused)
    core = {
        "command": "cluster",
        "theta": args.theta,
        "eta_fallback": args.eta_fallback,
        "inputs": _inputs(fused=args.fused),
    }
    core["version"] = __version__
    digest = manifest_digest(core)
    model = clustering.train(fused, args.theta, args.eta_fallback)
    model = clustering.BoxModel(
        model.boxes, model.theta, model.n, model.presentation_order, model.eta_fallback, digest
    )
    clustering.write_model(model, args.out)
    write_manifest(args.out, core)
    print(f"boxes {len(model.boxes)}")


def cmd_query(args):
    index = ingest.parse_fused(args.corpus)
    queries = ingest.parse_fused(args.queries)
    kind = SimilarityKind(args.similarity)
    model = clustering.parse_model(args.model) if args.model else None
    runs, stats = pipeline.run_queries(index, queries, args.k, kind, model)
    # the model only restricts the search; it is recorded outside the digest
    core = {
        "command": "query",
        "similarity": kind.value,
        "k": args.k,
        "inputs": _inputs(corpus=args.corpus, queries=args.queries),
    }
    core["version"] = __version__
    digest = manifest_digest(core)
    tag = args.tag or f"{kind.value}-{digest[:8]}"
    ingest.write_run(pipeline.run_rows(runs), args.out, tag=tag)
    extra = {"mean_query_ms": stats.mean_ms, "mean_candidates": stats.mean_candidates}
    if model is not None:
        extra["model"] = file_digest(args.model)
        extra["model_manifest"] = model.manifest
    write_manifest(args.out, core, extra)
    print(f"queries {len(runs)}  mean {stats.mean_ms:.3f} ms  candidates {stats.mean_candidates:.1f}")


def cmd_eval(args):
    rows = ingest.parse_run(args.run)
    qrels = ingest.parse_qrels(args.qrels)
    levels = _parse_grid(args.levels, float) if args.levels else evaluation.DEFAULT_LEVELS
    runs = pipeline.rows_to_runs(rows)
    if args.depth:
        runs = [RankedList(r.query_id, r.hits[: args.depth]) for r in runs]
    report = evaluation.evaluate(runs, qrels, levels)
    core = {
        "command": "eval",
        "levels": list(levels),
        "depth": args.depth,
        "inputs": _inputs(run=args.run, qrels=args.qrels),
    }
    core["version"] = __version__
    digest = manifest_digest(core)
    sys.stdout.write(evaluation.format_report_table(report))
    if args.out:
        atomic_write_text(args.out, evaluation.format_report_lines(report, digest))
        write_manifest(args.out, core)


def _sweep_rows(args, corpus, queries, qrels):
    axis = args.axis
    convert = {
        "rp": float, "theta": float,
        "operator": fusion.FusionOperator, "similarity": SimilarityKind,
    }[axis]
    defaults = {
        "rp": RP_GRID, "theta": THETA_GRID,
        "operator": tuple(fusion.FusionOperator), "similarity": tuple(SimilarityKind),
    }[axis]
    values = list(defaults) if args.grid is None else _parse_grid(args.grid, convert)
    op = fusion.FusionOperator(args.operator)
    kind = SimilarityKind(args.similarity)
    if axis == "theta" and not all(0.0 < v <= 1.0 for v in values):
        raise UsageError("theta values must be in (0, 1]")
    if axis == "rp" and not all(0.0 <= v <= 1.0 for v in values):
        raise UsageError("recall levels must be in [0, 1]")

    fixed = None
    if axis != "rp":
        fixed = alignment.compute_alpha(pipeline.auto_align(corpus, queries, qrels, args.recall_level))
    rows = []
    for value in values:
        boxes = "-"
        model = None
        alphas, run_op, run_kind = fixed, op, kind
        if axis == "rp":
            try:
                alphas = alignment.compute_alpha(pipeline.auto_align(corpus, queries, qrels, value))
            except DegenerateFeedbackError as exc:
                log.warning("recall level %.2f: %s", value, exc)
                rows.append(("rp", f"{value:.2f}", boxes, "degenerate", "-", "-"))
                continue
        elif axis == "operator":
            run_op = value
        elif axis == "similarity":
            run_kind = value
        index = pipeline.align_and_fuse(corpus, run_op, alphas)
        fused_q = pipeline.align_and_fuse(queries, run_op, alphas)
        if axis == "theta":
            model = clustering.train(index, value, args.eta_fallback)
            boxes = str(len(model.boxes))
        runs, stats = pipeline.run_queries(index, fused_q, args.k, run_kind, model)
        shown = value.value if hasattr(value, "value") else f"{value:.2f}"
        rows.append((
            axis, shown, boxes,
            f"{evaluation.mean_average_precision(runs, qrels):.6f}",
            f"{stats.mean_ms:.3f}",
            f"{stats.mean_candidates:.1f}",
        ))
    return rows


SWEEP_HEADER = ("param", "value", "boxes", "map", "mean_query_ms", "mean_candidates")


def format_table(rows, header=SWEEP_HEADER):
    table = [header, *rows]
    widths = [max(len(str(r[i])) for r in table) for i in range(len(header))]
    return "".join(
        "  ".join(str(c).ljust(w) for c, w in zip(r, widths)).rstrip() + "\n" for r in table
    )


def cmd_sweep(args):
    corpus = ingest.parse_case_file(args.corpus)
    queries = ingest.parse_case_file(args.queries)
    qrels = ingest.parse_qrels(args.qrels)
    text = format_table(_sweep_rows(args, corpus, queries, qrels))
    sys.stdout.write(text)
    if args.out:
        atomic_write_text(args.out, text)
        write_manifest(args.out, {
            "command": "sweep",
            "axis": args.axis,
            "grid": args.grid,
            "operator": args.operator,
            "similarity": args.similarity,
            "recall_level": args.recall_level,
            "eta_fallback": args.eta_fallback,
            "k": args.k,
            "inputs": _inputs(corpus=args.corpus, queries=args.queries, qrels=args.qrels),
        })


# -- parser ----------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(prog="semfusion", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    d = corpusgen.GenSpec()
    p = sub.add_parser("gen", help="generate a synthetic corpus, queries and qrels")
    p.add_argument("--seed", type=int, default=d.seed)
    p.add_argument("--cases", type=int, default=d.n_cases)
    p.add_argument("--vocab", type=int, default=d.vocab_size)
    p.add_argument("--concepts-text", type=int, default=d.concepts_per_text)
    p.add_argument("--concepts-image", type=int, default=d.concepts_per_image)
    p.add_argument("--overlap", type=float, default=d.overlap_fraction)
    p.add_argument("--queries", type=int, default=d.n_queries)
    p.add_argument("--relevant", type=int, default=d.relevant_per_query)
    p.add_argument("--noise", type=float, default=d.noise)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("fuse", help="align and fuse a corpus and its queries")
    p.add_argument("--corpus", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--operator", choices=[o.value for o in fusion.FusionOperator], default="bounded-sum")
    p.add_argument("--recall-level", type=_unit, default=alignment.DEFAULT_RECALL_LEVEL)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--auto-align", action="store_true",
                   help="measure rp_txt and rp_img from single-medium runs (needs --qrels)")
    g.add_argument("--rp-txt", type=_unit)
    p.add_argument("--rp-img", type=_unit)
    p.add_argument("--qrels")
    p.add_argument("--out-corpus", required=True)
    p.add_argument("--out-queries", required=True)
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("cluster", help="train a hyper-box model on a fused corpus")
    p.add_argument("--fused", required=True)
    p.add_argument("--theta", type=_theta, required=True)
    p.add_argument("--eta-fallback", type=_positive_float, default=clustering.DEFAULT_ETA_FALLBACK)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("query", help="rank a fused corpus for fused queries")
    p.add_argument("--corpus", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--similarity", choices=[k.value for k in SimilarityKind], default="fsf")
    p.add_argument("--k", type=_positive_int, default=1000)
    p.add_argument("--model", help="hyper-box model; restricts scoring to relevant boxes")
    p.add_argument("--tag")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("eval", help="evaluate a run against qrels")
    p.add_argument("--run", required=True)
    p.add_argument("--qrels", required=True)
    p.add_argument("--levels", help="comma-separated recall levels")
    p.add_argument("--depth", type=_positive_int, help="evaluate only the top DEPTH hits")
    p.add_argument("--out", help="machine-readable report file")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="run the pipeline over a parameter grid")
    p.add_argument("--axis", choices=["theta", "rp", "operator", "similarity"], required=True)
    p.add_argument("--grid", help="comma-separated values (default depends on the axis)")
    p.add_argument("--corpus", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--qrels", required=True)
    p.add_argument("--operator", choices=[o.value for o in fusion.FusionOperator], default="bounded-sum")
    p.add_argument("--similarity", choices=[k.value for k in SimilarityKind], default="fsf")
    p.add_argument("--recall-level", type=_unit, default=alignment.DEFAULT_RECALL_LEVEL)
    p.add_argument("--eta-fallback", type=_positive_float, default=clustering.DEFAULT_ETA_FALLBACK)
    p.add_argument("--k", type=_positive_int, default=1000)
    p.add_argument("--out", help="table file")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except (SemfusionError, OSError) as exc:
        print(f"semfusion: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
