"""Concept-level fusion of the text and image index of each case."""

from __future__ import annotations

from enum import Enum

from .concept_model import FusedCase, Provenance
from .errors import DomainError

SYMSUM_EPS = 1e-6


class FusionOperator(Enum):
    MAX = "max"
    BOUNDED_SUM = "bounded-sum"
    MIN = "min"
    LUKASIEWICZ = "lukasiewicz"
    MEAN = "mean"
    SYMSUM_ZERO = "symsum"

    @property
    def formula(self):
        return _FORMULAS[self]


_FORMULAS = {
    FusionOperator.MAX: "max(x,y)",
    FusionOperator.BOUNDED_SUM: "min(1,x+y)",
    FusionOperator.MIN: "min(x,y)",
    FusionOperator.LUKASIEWICZ: "max(0,x+y-1)",
    FusionOperator.MEAN: "(x+y)/2",
    FusionOperator.SYMSUM_ZERO: "xy/(1-x-y+2xy)",
}


def _lukasiewicz(x, y):
    # a - (1 - b) with a <= b keeps t(x, 1) == x and commutativity exact in floating point
    a, b = (x, y) if x <= y else (y, x)
    return max(0.0, a - (1.0 - b))


def symmetric_sum(x, y):
    """Associative symmetric sum ``xy / (1 - x - y + 2xy)``.

    The denominator is evaluated as ``xy + (1-x)(1-y)``.  It vanishes only at
    (0, 1) and (1, 0); there the inputs are clamped to [eps, 1 - eps].
    """
    num = x * y
    den = num + (1.0 - x) * (1.0 - y)
    if den == 0.0:
        x = min(max(x, SYMSUM_EPS), 1.0 - SYMSUM_EPS)
        y = min(max(y, SYMSUM_EPS), 1.0 - SYMSUM_EPS)
        num = x * y
        den = num + (1.0 - x) * (1.0 - y)
    return num / den


_IMPL = {
    FusionOperator.MAX: max,
    FusionOperator.BOUNDED_SUM: lambda x, y: min(1.0, x + y),
    FusionOperator.MIN: min,
    FusionOperator.LUKASIEWICZ: _lukasiewicz,
    FusionOperator.MEAN: lambda x, y: (x + y) / 2.0,
    FusionOperator.SYMSUM_ZERO: symmetric_sum,
}


def apply_operator(op: FusionOperator, x, y):
    if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
        raise DomainError(f"{op.value}: inputs ({x!r}, {y!r}) outside [0, 1]")
    return float(_IMPL[op](x, y))


def fuse_case(case, op: FusionOperator):
    """Fuse concepts common to both media; pass the others through unchanged."""
    text = case.text_index.weights()
    image = case.image_index.weights()
    entries = {}
    for cui, x in text.items():
        if cui in image:
            entries[cui] = (apply_operator(op, x, image[cui]), Provenance.FUSED)
        else:
            if not 0.0 <= x <= 1.0:
                raise DomainError(f"{case.case_id}/{cui}: text weight {x!r} outside [0, 1]")
            entries[cui] = (x, Provenance.TEXT_ONLY)
    for cui, y in image.items():
        if cui not in text:
            if not 0.0 <= y <= 1.0:
                raise DomainError(f"{case.case_id}/{cui}: image weight {y!r} outside [0, 1]")
            entries[cui] = (y, Provenance.IMAGE_ONLY)
    return FusedCase(case.case_id, entries)


def fuse_corpus(corpus, op: FusionOperator):
    return [fuse_case(case, op) for case in corpus]
