"""Core domain types: concept ids, weighted concepts, media indexes and cases."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Sequence

from .errors import DomainError

_CUI_RE = re.compile(r"C[0-9]{7}")


class ConceptId(str):
    """UMLS Concept Unique Identifier, e.g. ``C0202823``.

    A plain ``str`` subclass: equality and ordering are those of the string.
    """

    __slots__ = ()

    def __new__(cls, value):
        if isinstance(value, ConceptId):
            return value
        if not isinstance(value, str) or not _CUI_RE.fullmatch(value):
            raise DomainError(f"not a concept id: {value!r}")
        return super().__new__(cls, value)


class Medium(Enum):
    TEXT = "text"
    IMAGE = "image"


class Provenance(Enum):
    TEXT_ONLY = "T"
    IMAGE_ONLY = "I"
    FUSED = "F"


def _check_unit(name, value):
    if not (isinstance(value, (int, float)) and 0.0 <= value <= 1.0):
        raise DomainError(f"{name}={value!r} outside [0, 1]")


def compute_lambda(mu, nu, omega, phi):
    """Composed concept weight ``mu * nu * omega * phi``.

    mu is the fuzzy confidence, nu the relative frequency, omega the
    spatial-localization weight and phi the test-set feedback.
    """
    for name, value in (("mu", mu), ("nu", nu), ("omega", omega), ("phi", phi)):
        _check_unit(name, value)
    return mu * nu * omega * phi


@dataclass(frozen=True)
class WeightedConcept:
    """One concept with its four weighting factors and composed weight ``lam``.

    ``lam`` must equal the factor product unless ``aligned`` is set: after
    alignment the rescaled weight is authoritative and the factors are kept
    only for provenance.
    """

    cui: ConceptId
    mu: float = 1.0
    nu: float = 1.0
    omega: float = 1.0
    phi: float = 1.0
    lam: float = None
    aligned: bool = False

    def __post_init__(self):
        object.__setattr__(self, "cui", ConceptId(self.cui))
        product = compute_lambda(self.mu, self.nu, self.omega, self.phi)
        if self.lam is None:
            object.__setattr__(self, "lam", product)
            return
        _check_unit("lambda", self.lam)
        if not self.aligned and abs(self.lam - product) > 1e-12:
            raise DomainError(
                f"{self.cui}: lambda {self.lam!r} != mu*nu*omega*phi {product!r}"
            )

    @property
    def factors(self):
        return (self.mu, self.nu, self.omega, self.phi)


@dataclass(frozen=True)
class MediaIndex:
    medium: Medium
    concepts: tuple = ()

    def __post_init__(self):
        concepts = tuple(self.concepts)
        seen = set()
        for c in concepts:
            if c.cui in seen:
                raise DomainError(f"duplicate concept {c.cui} in {self.medium.value} index")
            seen.add(c.cui)
        object.__setattr__(self, "concepts", concepts)

    def weights(self):
        """Sparse vector cui -> lambda."""
        return {c.cui: c.lam for c in self.concepts}

    def __len__(self):
        return len(self.concepts)

    def __iter__(self):
        return iter(self.concepts)


@dataclass(frozen=True)
class ElementaryCase:
    """One report index paired with one image index."""

    case_id: str
    text_index: MediaIndex
    image_index: MediaIndex
    image_ref: str = ""

    def __post_init__(self):
        if self.text_index.medium is not Medium.TEXT:
            raise DomainError(f"{self.case_id}: text_index has medium {self.text_index.medium.value}")
        if self.image_index.medium is not Medium.IMAGE:
            raise DomainError(f"{self.case_id}: image_index has medium {self.image_index.medium.value}")

    def index(self, medium):
        return self.text_index if medium is Medium.TEXT else self.image_index


@dataclass(frozen=True)
class FusedCase:
    """Sparse dictionary cui -> (score, provenance) for one case."""

    case_id: str
    entries: Mapping = field(default_factory=dict)

    def __post_init__(self):
        for cui, (score, prov) in self.entries.items():
            if not (math.isfinite(score) and score >= 0.0):
                raise DomainError(f"{self.case_id}/{cui}: score {score!r} must be finite and >= 0")
            if not isinstance(prov, Provenance):
                raise DomainError(f"{self.case_id}/{cui}: bad provenance {prov!r}")

    def vector(self):
        return {cui: score for cui, (score, _) in self.entries.items()}


def decompose_case(report_index: MediaIndex, image_indexes: Sequence, case_id_base: str):
    """Split a multi-image case into elementary cases ``base#1 .. base#k``.

    ``image_indexes`` is a sequence of ``(image_ref, MediaIndex)`` pairs; every
    elementary case carries the full report index.
    """
    if report_index.medium is not Medium.TEXT:
        raise DomainError("report index must have medium text")
    if "#" in case_id_base:
        raise DomainError(f"case id base {case_id_base!r} may not contain '#'")
    cases = []
    for k, (image_ref, image_index) in enumerate(image_indexes, start=1):
        if image_index.medium is not Medium.IMAGE:
            raise DomainError(f"image index {k} of {case_id_base} has medium text")
        cases.append(ElementaryCase(f"{case_id_base}#{k}", report_index, image_index, image_ref))
    return cases

