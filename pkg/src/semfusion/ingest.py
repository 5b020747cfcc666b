"""Readers and writers for corpus, qrels, run and fused-dictionary files.

Corpus files are UTF-8 JSON lines, one record per (case, medium)::

    {"case_id": "3384#1", "medium": "text", "concepts": [{"cui": "C0003486", "mu": 1.0, "nu": 0.5028841, "omega": 1.0, "phi": 1.0}]}
    {"case_id": "3384#1", "medium": "image", "image_ref": "Image17_1.jpg", "concepts": [...]}

Absent factors default to 1.0.  A concept may instead carry a single
``val``, which is read as nu for text records and mu for image records.

Qrels are 4-column TREC lines (``query 0 case relevance``); runs are
6-column TREC lines (``query Q0 case rank score tag``).

Fused files are JSON lines ``{"case_id": ..., "entries": [[cui, score, prov], ...]}``
with prov one of ``T`` (text only), ``I`` (image only), ``F`` (fused).
"""

from __future__ import annotations

import json
import re
from collections import namedtuple
from dataclasses import dataclass, field

from ._io import atomic_write_text, read_lines
from .concept_model import (
    ConceptId,
    ElementaryCase,
    FusedCase,
    MediaIndex,
    Medium,
    Provenance,
    WeightedConcept,
)
from .errors import ContractError, DataError, DomainError, ParseError

CASE_ID_RE = re.compile(r"[^\s#]+(#[1-9][0-9]*)?")
FACTORS = ("mu", "nu", "omega", "phi")

RunRow = namedtuple("RunRow", "query_id case_id rank score tag")


@dataclass(frozen=True)
class Corpus:
    cases: tuple = ()
    vocabulary: tuple = field(init=False, repr=False)

    def __post_init__(self):
        cases = tuple(self.cases)
        object.__setattr__(self, "cases", cases)
        seen = set()
        vocab = set()
        for case in cases:
            if case.case_id in seen:
                raise DataError(f"duplicate case_id {case.case_id}")
            seen.add(case.case_id)
            vocab.update(c.cui for c in case.text_index)
            vocab.update(c.cui for c in case.image_index)
        object.__setattr__(self, "vocabulary", tuple(sorted(vocab)))

    def __len__(self):
        return len(self.cases)

    def __iter__(self):
        return iter(self.cases)

    def case_ids(self):
        return [c.case_id for c in self.cases]


@dataclass
class Qrels:
    judgments: dict = field(default_factory=dict)

    def relevant(self, query_id):
        return {d for (q, d), rel in self.judgments.items() if q == query_id and rel > 0}

    def query_ids(self):
        return list(dict.fromkeys(q for q, _ in self.judgments))

    def __len__(self):
        return len(self.judgments)


def validate_case_id(case_id):
    if not isinstance(case_id, str) or not CASE_ID_RE.fullmatch(case_id):
        raise DomainError(f"invalid case id {case_id!r}")
    return case_id


# -- corpus ------------------------------------------------------------------


def _parse_concept(raw, medium, lineno):
    if not isinstance(raw, dict) or "cui" not in raw:
        raise ParseError("concept entry must be an object with a 'cui'", lineno)
    unknown = set(raw) - {"cui", "val", *FACTORS}
    if unknown:
        raise ParseError(f"unknown concept fields {sorted(unknown)}", lineno)
    values = {}
    for name in FACTORS:
        values[name] = raw.get(name, 1.0)
    if "val" in raw:
        legacy = "nu" if medium is Medium.TEXT else "mu"
        if legacy in raw:
            raise ParseError(f"concept has both 'val' and '{legacy}'", lineno)
        values[legacy] = raw["val"]
    for name, value in values.items():
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ParseError(f"{name} must be a number", lineno)
        if not 0.0 <= value <= 1.0:
            raise DomainError(f"line {lineno}: {raw['cui']} {name}={value!r} outside [0, 1]")
    try:
        cui = ConceptId(raw["cui"])
    except DomainError as exc:
        raise ParseError(str(exc), lineno) from None
    return cui, tuple(float(values[name]) for name in FACTORS)


def _merge(concepts):
    """Per-factor max over duplicate cuis, keeping first-seen order."""
    merged = {}
    for cui, factors in concepts:
        if cui in merged:
            merged[cui] = tuple(max(a, b) for a, b in zip(merged[cui], factors))
        else:
            merged[cui] = factors
    return tuple(WeightedConcept(cui, *f) for cui, f in merged.items())


def parse_case_file(path):
    records = {}
    for lineno, line in read_lines(path):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", lineno) from None
        if not isinstance(rec, dict):
            raise ParseError("record must be a JSON object", lineno)
        for key in ("case_id", "medium", "concepts"):
            if key not in rec:
                raise ParseError(f"missing field '{key}'", lineno)
        try:
            case_id = validate_case_id(rec["case_id"])
            medium = Medium(rec["medium"])
        except (DomainError, ValueError) as exc:
            raise ParseError(str(exc), lineno) from None
        if not isinstance(rec["concepts"], list):
            raise ParseError("'concepts' must be a list", lineno)
        image_ref = rec.get("image_ref", "")
        if medium is Medium.TEXT and "image_ref" in rec:
            raise ParseError("text records carry no image_ref", lineno)
        if not isinstance(image_ref, str):
            raise ParseError("image_ref must be a string", lineno)
        concepts = _merge(_parse_concept(c, medium, lineno) for c in rec["concepts"])
        slot = records.setdefault(case_id, {})
        if medium in slot:
            raise DataError(f"line {lineno}: duplicate case_id {case_id} ({medium.value})")
        slot[medium] = (image_ref, MediaIndex(medium, concepts))
    cases = []
    for case_id in sorted(records):
        slot = records[case_id]
        _, text = slot.get(Medium.TEXT, ("", MediaIndex(Medium.TEXT)))
        image_ref, image = slot.get(Medium.IMAGE, ("", MediaIndex(Medium.IMAGE)))
        cases.append(ElementaryCase(case_id, text, image, image_ref))
    return Corpus(cases)


def _record(case_id, index, image_ref=None):
    rec = {"case_id": case_id, "medium": index.medium.value}
    if image_ref is not None:
        rec["image_ref"] = image_ref
    rec["concepts"] = [
        {"cui": str(c.cui), "mu": c.mu, "nu": c.nu, "omega": c.omega, "phi": c.phi}
        for c in index
    ]
    return json.dumps(rec, ensure_ascii=False)


def format_corpus(corpus):
    lines = []
    for case in corpus:
        lines.append(_record(case.case_id, case.text_index))
        lines.append(_record(case.case_id, case.image_index, case.image_ref))
    return "".join(line + "\n" for line in lines)


def write_case_file(corpus, path):
    atomic_write_text(path, format_corpus(corpus))


# -- qrels ---------------------------------------------------------------------


def parse_qrels(path):
    judgments = {}
    for lineno, line in read_lines(path):
        parts = line.split()
        if not parts:
            continue
        if len(parts) != 4:
            raise ParseError(f"expected 4 columns, got {len(parts)}", lineno)
        query_id, _, case_id, rel = parts
        try:
            relevance = int(rel)
        except ValueError:
            raise ParseError(f"relevance {rel!r} is not an integer", lineno) from None
        if relevance < 0:
            raise ParseError(f"relevance {relevance} is negative", lineno)
        judgments[(query_id, case_id)] = relevance
    return Qrels(judgments)


def format_qrels(qrels):
    return "".join(f"{q} 0 {d} {rel}\n" for (q, d), rel in qrels.judgments.items())


def write_qrels(qrels, path):
    atomic_write_text(path, format_qrels(qrels))


# -- runs ----------------------------------------------------------------------


def check_run(rows):
    """Raise ContractError unless every query's ranks are 1..k with non-increasing scores."""
    last = {}
    for row in rows:
        prev = last.get(row.query_id)
        expected = 1 if prev is None else prev.rank + 1
        if row.rank != expected:
            raise ContractError(
                f"query {row.query_id}: rank {row.rank} where {expected} was expected"
            )
        if prev is not None and row.score > prev.score:
            raise ContractError(
                f"query {row.query_id}: score {row.score} at rank {row.rank} exceeds {prev.score}"
            )
        last[row.query_id] = row


def format_run(rows, tag=None):
    rows = [RunRow(*r) if not isinstance(r, RunRow) else r for r in rows]
    if tag is not None:
        rows = [r._replace(tag=tag) for r in rows]
    check_run(rows)
    for r in rows:
        if not r.tag or any(ch.isspace() for ch in r.tag):
            raise ContractError(f"run tag {r.tag!r} must be a non-empty token")
    return "".join(
        f"{r.query_id} Q0 {r.case_id} {r.rank} {r.score:.6f} {r.tag}\n" for r in rows
    )


def write_run(rows, path, tag=None):
    """Write TREC run lines; contract violations are raised before touching ``path``."""
    atomic_write_text(path, format_run(rows, tag))


def parse_run(path):
    rows = []
    for lineno, line in read_lines(path):
        parts = line.split()
        if not parts:
            continue
        if len(parts) != 6:
            raise ParseError(f"expected 6 columns, got {len(parts)}", lineno)
        query_id, _, case_id, rank, score, tag = parts
        try:
            rows.append(RunRow(query_id, case_id, int(rank), float(score), tag))
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from None
    check_run(rows)
    return rows


# -- fused dictionaries --------------------------------------------------------


def format_fused(fused_cases):
    lines = []
    for fc in fused_cases:
        entries = [[str(cui), score, prov.value] for cui, (score, prov) in sorted(fc.entries.items())]
        lines.append(json.dumps({"case_id": fc.case_id, "entries": entries}) + "\n")
    return "".join(lines)


def write_fused(fused_cases, path):
    atomic_write_text(path, format_fused(fused_cases))


def parse_fused(path):
    out = []
    seen = set()
    for lineno, line in read_lines(path):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            case_id = validate_case_id(rec["case_id"])
            entries = {}
            for cui, score, prov in rec["entries"]:
                entries[ConceptId(cui)] = (float(score), Provenance(prov))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad fused record: {exc}", lineno) from None
        if case_id in seen:
            raise DataError(f"line {lineno}: duplicate case_id {case_id}")
        seen.add(case_id)
        out.append(FusedCase(case_id, entries))
    return out
