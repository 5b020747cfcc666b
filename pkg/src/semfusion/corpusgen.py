"""Deterministic synthetic corpus, query set and qrels.

Every random draw comes from a single SplitMix64 stream, mapped to
floats and bounded integers with portable bit operations, so the same
seed yields the same files on any platform or language.

Construction, in draw order:

1. Two popularity rankings of the vocabulary (Fisher-Yates shuffles), one
   for text and one for image concepts.  Text concepts are drawn with a
   Zipf(1.4) law over the text ranking, image concepts with Zipf(1.0)
   over the image ranking; ubiquitous concepts are what make single-medium
   retrieval imperfect.
2. For each query a discriminating set: ``shared`` concepts (present in
   both media, ``floor(concepts_per_image * overlap_fraction)`` of them),
   image-only concepts and text-only concepts.  The query's text holds
   shared + text-only, its image shared + image-only.
3. For each relevant case the query's discriminating set is shuffled and
   re-split into the same three roles, so a concept that the query holds
   in text may sit in the case's image and vice versa.  Each concept is
   then replaced with probability ``noise`` by a fresh background concept.
4. Remaining cases are background cases built like independent queries.
5. Factors are drawn per concept: text mu = 1, nu in [0.05, 1],
   omega, phi in [0.5, 1]; image mu in [0.05, 0.5], nu = 1, omega, phi in
   [0.5, 1].
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass

from .concept_model import ElementaryCase, MediaIndex, Medium, WeightedConcept
from .errors import SpecError
from .ingest import Corpus, Qrels

MASK64 = (1 << 64) - 1
TEXT_ZIPF = 1.4
IMAGE_ZIPF = 1.0
_MAX_REJECTIONS = 64


class SplitMix64:
    """Vigna's SplitMix64 generator."""

    def __init__(self, seed):
        self.state = seed & MASK64

    def next_u64(self):
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def random(self):
        """Uniform double in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform(self, lo, hi):
        return lo + (hi - lo) * self.random()

    def below(self, n):
        """Integer in [0, n) by 128-bit multiply-high."""
        return (self.next_u64() * n) >> 64

    def shuffle(self, items):
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]


@dataclass(frozen=True)
class GenSpec:
    seed: int = 42
    n_cases: int = 500
    vocab_size: int = 2000
    concepts_per_text: int = 20
    concepts_per_image: int = 8
    overlap_fraction: float = 0.5
    n_queries: int = 20
    relevant_per_query: int = 10
    noise: float = 0.2

    @property
    def n_shared(self):
        return int(self.concepts_per_image * self.overlap_fraction + 1e-12)

    @property
    def discriminating_size(self):
        return self.concepts_per_text + self.concepts_per_image - self.n_shared

    def validate(self):
        for name in ("n_cases", "vocab_size", "concepts_per_text", "concepts_per_image",
                     "n_queries", "relevant_per_query"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or value < 1:
                raise SpecError(f"{name} must be a positive integer, got {value!r}")
        for name in ("overlap_fraction", "noise"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise SpecError(f"{name}={value!r} outside [0, 1]")
        if not 0 <= self.seed <= MASK64:
            raise SpecError("seed must fit in 64 bits")
        if self.concepts_per_image * self.overlap_fraction > self.concepts_per_text:
            raise SpecError("concepts_per_image * overlap_fraction exceeds concepts_per_text")
        if self.relevant_per_query >= self.n_cases:
            raise SpecError("relevant_per_query must be below n_cases")
        if self.n_queries * self.relevant_per_query > self.n_cases:
            raise SpecError(
                f"{self.n_queries} queries x {self.relevant_per_query} relevant cases "
                f"exceed {self.n_cases} cases"
            )
        # a noisy relevant case needs its query's concepts plus as many fresh ones
        if self.vocab_size < 2 * self.discriminating_size:
            raise SpecError(
                f"vocab_size {self.vocab_size} too small: need at least "
                f"{2 * self.discriminating_size} concepts"
            )
        if self.vocab_size > 10_000_000:
            raise SpecError("vocab_size exceeds the 7-digit concept id space")


def _zipf_cdf(n, exponent):
    weights = [1.0 / (rank + 1) ** exponent for rank in range(n)]
    total = sum(weights)
    cdf = []
    acc = 0.0
    for w in weights:
        acc += w
        cdf.append(acc / total)
    cdf[-1] = 1.0
    return cdf


class _Sampler:
    def __init__(self, rng, ranking, exponent):
        self.rng = rng
        self.ranking = ranking
        self.cdf = _zipf_cdf(len(ranking), exponent)

    def draw(self, exclude):
        """One concept not in ``exclude``; falls back to a uniform pick among the rest."""
        for _ in range(_MAX_REJECTIONS):
            c = self.ranking[bisect.bisect_right(self.cdf, self.rng.random())]
            if c not in exclude:
                return c
        rest = sorted(c for c in self.ranking if c not in exclude)
        return rest[self.rng.below(len(rest))]

    def draw_many(self, k, exclude):
        out = []
        for _ in range(k):
            c = self.draw(exclude)
            exclude.add(c)
            out.append(c)
        return out


class _Generator:
    def __init__(self, spec):
        self.spec = spec
        self.rng = SplitMix64(spec.seed)
        vocab = [f"C{i:07d}" for i in range(1, spec.vocab_size + 1)]
        text_rank = list(vocab)
        self.rng.shuffle(text_rank)
        image_rank = list(vocab)
        self.rng.shuffle(image_rank)
        self.text = _Sampler(self.rng, text_rank, TEXT_ZIPF)
        self.image = _Sampler(self.rng, image_rank, IMAGE_ZIPF)

    def roles(self):
        """Fresh (shared, image_only, text_only) concept lists."""
        s = self.spec
        used = set()
        shared = self.image.draw_many(s.n_shared, used)
        image_only = self.image.draw_many(s.concepts_per_image - s.n_shared, used)
        text_only = self.text.draw_many(s.concepts_per_text - s.n_shared, used)
        return shared, image_only, text_only

    def text_concept(self, cui):
        r = self.rng
        return WeightedConcept(cui, 1.0, r.uniform(0.05, 1.0), r.uniform(0.5, 1.0), r.uniform(0.5, 1.0))

    def image_concept(self, cui):
        r = self.rng
        return WeightedConcept(cui, r.uniform(0.05, 0.5), 1.0, r.uniform(0.5, 1.0), r.uniform(0.5, 1.0))

    def build(self, case_id, image_ref, shared, image_only, text_only):
        text = MediaIndex(Medium.TEXT, [self.text_concept(c) for c in shared + text_only])
        image = MediaIndex(Medium.IMAGE, [self.image_concept(c) for c in shared + image_only])
        return ElementaryCase(case_id, text, image, image_ref)

    def relevant_roles(self, roles):
        s = self.spec
        shared, image_only, text_only = roles
        pool = shared + image_only + text_only
        self.rng.shuffle(pool)
        used = set(pool)
        k_img = s.concepts_per_image - s.n_shared
        split = [
            (pool[: s.n_shared], self.image),
            (pool[s.n_shared : s.n_shared + k_img], self.image),
            (pool[s.n_shared + k_img :], self.text),
        ]
        out = []
        for concepts, sampler in split:
            kept = []
            for c in concepts:
                if self.rng.random() < s.noise:
                    c = sampler.draw(used)
                    used.add(c)
                kept.append(c)
            out.append(kept)
        return tuple(out)


def generate(spec: GenSpec):
    """Return ``(corpus, queries, qrels)`` for ``spec``."""
    spec.validate()
    g = _Generator(spec)
    width = max(4, len(str(spec.n_cases)))
    qwidth = max(2, len(str(spec.n_queries)))

    query_roles = []
    queries = []
    for j in range(spec.n_queries):
        roles = g.roles()
        query_roles.append(roles)
        qid = f"{j + 1:0{qwidth}d}"
        queries.append(g.build(qid, f"query{qid}.jpg", *roles))

    slots = list(range(spec.n_cases))
    g.rng.shuffle(slots)
    owner = {}
    for j in range(spec.n_queries):
        for r in range(spec.relevant_per_query):
            owner[slots[j * spec.relevant_per_query + r]] = j

    cases = []
    judgments = {}
    for i in range(spec.n_cases):
        case_id = f"{i + 1:0{width}d}#1"
        image_ref = f"Image{i + 1}_1.jpg"
        j = owner.get(i)
        roles = g.roles() if j is None else g.relevant_roles(query_roles[j])
        cases.append(g.build(case_id, image_ref, *roles))
        if j is not None:
            judgments[(queries[j].case_id, case_id)] = 1

    ordered = dict(sorted(judgments.items()))
    return Corpus(cases), Corpus(queries), Qrels(ordered)
