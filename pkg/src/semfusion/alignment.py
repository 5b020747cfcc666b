"""Corpus-level balancing of text and image weights from partial-media feedback."""

from __future__ import annotations

from dataclasses import dataclass, replace

from .concept_model import ElementaryCase, MediaIndex, Medium
from .errors import AlignmentError, DegenerateFeedbackError, DomainError

DEFAULT_RECALL_LEVEL = 0.30


@dataclass(frozen=True)
class AlignmentParams:
    avg_txt: float
    avg_img: float
    rp_txt: float
    rp_img: float
    recall_level: float = DEFAULT_RECALL_LEVEL

    def __post_init__(self):
        if not (self.avg_txt > 0 and self.avg_img > 0):
            raise DomainError(f"medium averages must be positive, got {self.avg_txt}, {self.avg_img}")
        for name in ("rp_txt", "rp_img", "recall_level"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise DomainError(f"{name}={value!r} outside [0, 1]")


def medium_average(corpus, medium: Medium):
    """Arithmetic mean of every lambda of ``medium`` over the corpus."""
    total = 0.0
    count = 0
    for case in corpus:
        for concept in case.index(medium):
            total += concept.lam
            count += 1
    if count == 0 or total <= 0.0:
        raise AlignmentError(f"corpus has no {medium.value} concept with positive weight")
    return total / count


def compute_alpha(p: AlignmentParams):
    """Return ``(alpha_txt, alpha_img)`` with the image side fixed to 1.

    Only the ratio ``alpha_txt / alpha_img = avg_img*rp_txt / (avg_txt*rp_img)``
    is determined; fixing the image side keeps image scores comparable across runs.
    """
    if p.rp_txt == 0.0 or p.rp_img == 0.0:
        which = "text" if p.rp_txt == 0.0 else "image"
        raise DegenerateFeedbackError(
            f"{which}-only run has zero interpolated precision at recall {p.recall_level:.2f}; "
            "choose another recall level"
        )
    return (p.avg_img * p.rp_txt) / (p.avg_txt * p.rp_img), 1.0


def _scale(index: MediaIndex, alpha):
    return MediaIndex(
        index.medium,
        [replace(c, lam=min(1.0, c.lam * alpha), aligned=True) for c in index],
    )


def apply_alignment(case: ElementaryCase, alpha_txt, alpha_img):
    """Multiply text lambdas by ``alpha_txt`` and image lambdas by ``alpha_img``, clamped to 1."""
    if not (alpha_txt > 0 and alpha_img > 0):
        raise DomainError(f"alphas must be positive, got ({alpha_txt}, {alpha_img})")
    return replace(
        case,
        text_index=_scale(case.text_index, alpha_txt),
        image_index=_scale(case.image_index, alpha_img),
    )


def clamp_rate(cases, alpha_txt, alpha_img):
    """Fraction of concept weights that alignment would clamp at 1."""
    clamped = total = 0
    for case in cases:
        for index, alpha in ((case.text_index, alpha_txt), (case.image_index, alpha_img)):
            for c in index:
                total += 1
                clamped += c.lam * alpha > 1.0
    return clamped / total if total else 0.0
