"""Similarity over sparse concept vectors and k-nearest-neighbour queries."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from enum import Enum

from . import clustering
from .errors import ConsistencyError, DomainError


class SimilarityKind(Enum):
    COSINE = "cosine"
    DICE = "dice"
    JACCARD = "jaccard"
    VSM = "vsm"
    FSF = "fsf"


@dataclass(frozen=True)
class RankedList:
    query_id: str
    hits: tuple = ()

    def case_ids(self):
        return [case_id for case_id, _ in self.hits]


def _dot(q, d):
    if len(d) < len(q):
        q, d = d, q
    return sum(w * d[t] for t, w in q.items() if t in d)


def _sq(q):
    return sum(w * w for w in q.values())


def _fsf(q, d):
    if len(d) < len(q):
        q, d = d, q
    return sum(max(w, d[t]) for t, w in q.items() if t in d)


def similarity(kind: SimilarityKind, q, d):
    """Similarity of sparse non-negative vectors ``q`` and ``d`` (dicts)."""
    for vec in (q, d):
        for t, w in vec.items():
            if w < 0:
                raise DomainError(f"negative coordinate {t}={w!r}")
    if kind is SimilarityKind.FSF:
        # optimistic (max) weight summed over the shared concepts
        return _fsf(q, d)
    dot = _dot(q, d)
    if kind is SimilarityKind.VSM:
        return dot
    if kind is SimilarityKind.COSINE:
        denom = math.sqrt(_sq(q)) * math.sqrt(_sq(d))
        return dot / denom if denom > 0 else 0.0
    sq = _sq(q) + _sq(d)
    if kind is SimilarityKind.DICE:
        return 2.0 * dot / sq if sq > 0 else 0.0
    denom = sq - dot
    return dot / denom if denom > 0 else 0.0


def rank(query_id, scored, k, drop_zero=False):
    """Top ``k`` of ``(case_id, score)`` pairs: score descending, then case_id ascending."""
    if drop_zero:
        scored = [(c, s) for c, s in scored if s > 0]
    top = heapq.nsmallest(k, scored, key=lambda cs: (-cs[1], cs[0]))
    return RankedList(query_id, tuple(top))


def _score(index, query_vec, kind):
    return [(fc.case_id, similarity(kind, query_vec, fc.vector())) for fc in index]


def knn_query(index, query, k, kind=SimilarityKind.FSF, drop_zero=False):
    """Exhaustive top-``k`` search of ``index`` (a list of FusedCase) for ``query``."""
    if k < 1:
        raise DomainError(f"k must be positive, got {k}")
    return rank(query.case_id, _score(index, query.vector(), kind), k, drop_zero)


def check_model(model, index):
    if sorted(model.member_ids()) != sorted(fc.case_id for fc in index):
        raise ConsistencyError("box model was not trained on this index")


def candidates(model, query_vec):
    """Case ids in boxes whose membership for the query is positive."""
    out = set()
    for box in clustering.relevant_boxes(model, query_vec):
        out.update(box.members)
    return out


def pruned_search(model, index, query, k, kind=SimilarityKind.FSF, drop_zero=False):
    """Pruned top-``k`` search without the consistency check; also returns the candidate count."""
    if k < 1:
        raise DomainError(f"k must be positive, got {k}")
    qv = query.vector()
    keep = candidates(model, qv)
    subset = [fc for fc in index if fc.case_id in keep]
    return rank(query.case_id, _score(subset, qv, kind), k, drop_zero), len(keep)


def pruned_query(model, index, query, k, kind=SimilarityKind.FSF, drop_zero=False):
    """``knn_query`` restricted to members of the query's relevant boxes."""
    check_model(model, index)
    return pruned_search(model, index, query, k, kind, drop_zero)[0]
