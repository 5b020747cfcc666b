"""End-to-end wiring: partial-media runs, auto-alignment, fusion and querying."""

from __future__ import annotations

import time
from dataclasses import dataclass

from . import alignment, evaluation, fusion, retrieval
from .concept_model import FusedCase, Medium, Provenance
from .ingest import RunRow

_PROV = {Medium.TEXT: Provenance.TEXT_ONLY, Medium.IMAGE: Provenance.IMAGE_ONLY}


def single_medium(case, medium: Medium):
    """The case seen through one medium only, as a fused-style vector."""
    prov = _PROV[medium]
    return FusedCase(case.case_id, {c.cui: (c.lam, prov) for c in case.index(medium)})


def single_medium_index(corpus, medium: Medium):
    return [single_medium(case, medium) for case in corpus]


def search(index, queries, k=None, kind=retrieval.SimilarityKind.FSF):
    """Exhaustive runs for every query; ``k=None`` ranks the whole index."""
    k = max(1, len(index)) if k is None else k
    return [retrieval.knn_query(index, q, k, kind) for q in queries]


def partial_runs(corpus, queries, medium: Medium, kind=retrieval.SimilarityKind.FSF, k=None):
    return search(
        single_medium_index(corpus, medium), single_medium_index(queries, medium), k, kind
    )


def partial_precision(corpus, queries, qrels, medium, recall_level, kind=retrieval.SimilarityKind.FSF):
    """Interpolated precision at ``recall_level`` of the single-medium run."""
    runs = partial_runs(corpus, queries, medium, kind)
    ((_, p),) = evaluation.interpolated_pr(runs, qrels, [recall_level])
    return p


def auto_align(corpus, queries, qrels, recall_level=alignment.DEFAULT_RECALL_LEVEL,
               kind=retrieval.SimilarityKind.FSF):
    """Alignment parameters from text-only and image-only feedback on ``corpus``."""
    return alignment.AlignmentParams(
        avg_txt=alignment.medium_average(corpus, Medium.TEXT),
        avg_img=alignment.medium_average(corpus, Medium.IMAGE),
        rp_txt=partial_precision(corpus, queries, qrels, Medium.TEXT, recall_level, kind),
        rp_img=partial_precision(corpus, queries, qrels, Medium.IMAGE, recall_level, kind),
        recall_level=recall_level,
    )


def align_and_fuse(cases, op: fusion.FusionOperator, alphas=(1.0, 1.0)):
    """Align every case with the given (corpus-level) alphas, then fuse."""
    a_txt, a_img = alphas
    return [fusion.fuse_case(alignment.apply_alignment(c, a_txt, a_img), op) for c in cases]


@dataclass
class QueryStats:
    seconds: list
    candidates: list

    @property
    def mean_ms(self):
        return 1000.0 * sum(self.seconds) / len(self.seconds) if self.seconds else 0.0

    @property
    def mean_candidates(self):
        return sum(self.candidates) / len(self.candidates) if self.candidates else 0.0


def run_queries(index, queries, k, kind=retrieval.SimilarityKind.FSF, model=None):
    """Run every query exhaustively, or pruned by ``model`` when one is given."""
    if model is not None:
        retrieval.check_model(model, index)
    runs = []
    stats = QueryStats([], [])
    for q in queries:
        start = time.perf_counter()
        if model is None:
            run = retrieval.knn_query(index, q, k, kind)
            n_cand = len(index)
        else:
            run, n_cand = retrieval.pruned_search(model, index, q, k, kind)
        stats.seconds.append(time.perf_counter() - start)
        stats.candidates.append(n_cand)
        runs.append(run)
    return runs, stats


def run_rows(runs):
    return [
        RunRow(run.query_id, case_id, rank, score, "-")
        for run in runs
        for rank, (case_id, score) in enumerate(run.hits, start=1)
    ]


def rows_to_runs(rows):
    """Group parsed run rows back into RankedLists (first-seen query order)."""
    grouped = {}
    for r in rows:
        grouped.setdefault(r.query_id, []).append((r.case_id, r.score))
    return [retrieval.RankedList(qid, tuple(hits)) for qid, hits in grouped.items()]
