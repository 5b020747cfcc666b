"""Ranked-retrieval metrics in the trec_eval conventions."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .errors import EvaluationError, UndefinedQueryError

log = logging.getLogger(__name__)

DEFAULT_LEVELS = tuple(i / 10 for i in range(11))


@dataclass(frozen=True)
class EvalReport:
    per_query_ap: dict
    map: float
    interpolated: tuple
    r_precision: float
    per_query_rprec: dict = field(default_factory=dict)

    @property
    def num_queries(self):
        return len(self.per_query_ap)


def _relevant(qrels, query_id):
    rel = qrels.relevant(query_id)
    if not rel:
        raise UndefinedQueryError(f"query {query_id} has no relevant judgment")
    return rel


def average_precision(run, qrels, query_id=None):
    query_id = run.query_id if query_id is None else query_id
    rel = _relevant(qrels, query_id)
    found = 0
    total = 0.0
    for r, case_id in enumerate(run.case_ids(), start=1):
        if case_id in rel:
            found += 1
            total += found / r
    return total / len(rel)


def _evaluable(runs, qrels):
    out = []
    for run in runs:
        if qrels.relevant(run.query_id):
            out.append(run)
        else:
            log.warning("query %s has no relevant judgments; skipped", run.query_id)
    return out


def mean_average_precision(runs, qrels):
    runs = _evaluable(runs, qrels)
    if not runs:
        raise EvaluationError("no evaluable query")
    return sum(average_precision(run, qrels) for run in runs) / len(runs)


def _interpolated_one(run, qrels, levels):
    rel = _relevant(qrels, run.query_id)
    points = []
    found = 0
    for r, case_id in enumerate(run.case_ids(), start=1):
        if case_id in rel:
            found += 1
        points.append((found / len(rel), found / r))
    # running max from the deepest cutoff up gives max precision at recall >= level
    best = [0.0] * (len(points) + 1)
    for i in range(len(points) - 1, -1, -1):
        best[i] = max(best[i + 1], points[i][1])
    out = []
    i = 0
    for level in levels:
        while i < len(points) and points[i][0] < level:
            i += 1
        out.append(best[i])
    return out


def interpolated_pr(runs, qrels, levels=DEFAULT_LEVELS):
    """Interpolated precision at each recall level, averaged over evaluable queries.

    ``runs`` may be a single RankedList or a list of them.
    """
    levels = tuple(levels)
    if list(levels) != sorted(levels):
        raise EvaluationError("recall levels must be sorted ascending")
    if not isinstance(runs, (list, tuple)):
        runs = [runs]
    runs = _evaluable(runs, qrels)
    if not runs:
        raise EvaluationError("no evaluable query")
    sums = [0.0] * len(levels)
    for run in runs:
        for j, p in enumerate(_interpolated_one(run, qrels, levels)):
            sums[j] += p
    return [(level, s / len(runs)) for level, s in zip(levels, sums)]


def r_precision(run, qrels, query_id=None):
    query_id = run.query_id if query_id is None else query_id
    rel = _relevant(qrels, query_id)
    top = run.case_ids()[: len(rel)]
    return sum(1 for c in top if c in rel) / len(rel)


def evaluate(runs, qrels, levels=DEFAULT_LEVELS):
    runs = _evaluable(runs, qrels)
    if not runs:
        raise EvaluationError("no evaluable query")
    ap = {run.query_id: average_precision(run, qrels) for run in runs}
    rp = {run.query_id: r_precision(run, qrels) for run in runs}
    return EvalReport(
        per_query_ap=ap,
        map=sum(ap.values()) / len(ap),
        interpolated=tuple(interpolated_pr(runs, qrels, levels)),
        r_precision=sum(rp.values()) / len(rp),
        per_query_rprec=rp,
    )


def format_report_lines(report, manifest=None):
    """Machine-readable ``metric<TAB>query<TAB>value`` lines, values to 6 decimals."""
    lines = []
    if manifest:
        lines.append(f"manifest\tall\t{manifest}")
    for qid, value in report.per_query_ap.items():
        lines.append(f"ap\t{qid}\t{value:.6f}")
    for qid, value in report.per_query_rprec.items():
        lines.append(f"R-prec\t{qid}\t{value:.6f}")
    lines.append(f"num_q\tall\t{report.num_queries}")
    lines.append(f"map\tall\t{report.map:.6f}")
    lines.append(f"R-prec\tall\t{report.r_precision:.6f}")
    for level, p in report.interpolated:
        lines.append(f"iprec_at_recall_{level:.2f}\tall\t{p:.6f}")
    return "".join(line + "\n" for line in lines)


def format_report_table(report):
    """Human-readable summary with fractions and percentages side by side."""
    rows = [("num_q", str(report.num_queries), "")]
    rows.append(("map", f"{report.map:.6f}", f"{100 * report.map:.2f}%"))
    rows.append(("R-prec", f"{report.r_precision:.6f}", f"{100 * report.r_precision:.2f}%"))
    for level, p in report.interpolated:
        rows.append((f"iprec_at_recall_{level:.2f}", f"{p:.6f}", f"{100 * p:.2f}%"))
    width = max(len(r[0]) for r in rows)
    return "".join(f"{name:<{width}}  {value:>9}  {pct:>7}".rstrip() + "\n" for name, value, pct in rows)
