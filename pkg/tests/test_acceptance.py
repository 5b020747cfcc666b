"""Acceptance suite.  Each test is tagged with the criterion it checks; the
terminal summary prints one PASS/FAIL line per criterion.

Run alone with ``pytest tests/test_acceptance.py -v`` or
``python3 tests/test_acceptance.py``.
"""

import itertools
import random
import sys
import time
from dataclasses import replace

import pytest

import oracles
from conftest import TUNED_THETA
from semfusion import alignment, clustering, corpusgen, evaluation, fusion, ingest, pipeline
from semfusion.cli import THETA_GRID
from semfusion.concept_model import ElementaryCase, MediaIndex, Medium
from semfusion.fusion import FusionOperator as Op
from semfusion.retrieval import RankedList, SimilarityKind, knn_query, pruned_query

# pinned from the first verified run on the reference corpus (seed 42 defaults)
MAP_TEXT_ONLY = 0.9247499285484512
MAP_IMAGE_ONLY = 0.2825400348892443
MAP_FUSED_FSF = 0.9983333333333334
MAP_PIN_TOL = 1e-9
FUSION_MARGIN = 0.02
THETA_BOX_COUNTS = (41, 16, 9, 6, 4, 3, 3, 2, 2, 2, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1)
CLAMP_RATE_LIMIT = 0.01
PRUNED_MAP_DELTA = 0.0
CANDIDATE_FRACTION_LIMIT = 0.70
LARGE_CASES = 50_000


# -- 1. operator algebra -----------------------------------------------------------


@pytest.mark.criterion(1)
def test_operator_algebra():
    start = time.perf_counter()
    grid = [i / 10 for i in range(11)]
    ap = fusion.apply_operator
    for x, y in itertools.product(grid, grid):
        chain = [ap(op, x, y) for op in (Op.LUKASIEWICZ, Op.MIN, Op.MEAN, Op.MAX, Op.BOUNDED_SUM)]
        assert chain == sorted(chain), (x, y, chain)
        for op in Op:
            assert ap(op, x, y) == ap(op, y, x), (op, x, y)

    rng = random.Random(7)
    eps = fusion.SYMSUM_EPS
    for _ in range(10_000):
        x, y, z = (rng.uniform(eps, 1 - eps) for _ in range(3))
        left = fusion.symmetric_sum(fusion.symmetric_sum(x, y), z)
        right = fusion.symmetric_sum(x, fusion.symmetric_sum(y, z))
        assert abs(left - right) <= 1e-9
    assert time.perf_counter() - start < 1.0


# -- 2. MAP double entry -------------------------------------------------------------


def _random_instance(rng):
    docs = [f"d{i:03d}" for i in range(rng.randint(1, 200))]
    n_q = rng.randint(1, 20)
    runs, rankings, judged = [], {}, {}
    for q in range(n_q):
        qid = f"q{q:02d}"
        depth = rng.randint(0, len(docs))
        ranking = rng.sample(docs, depth)
        rel = set(rng.sample(docs, rng.randint(0, min(15, len(docs)))))
        rankings[qid] = ranking
        judged[qid] = rel
        runs.append(RankedList(qid, tuple((d, float(depth - r)) for r, d in enumerate(ranking))))
    if not any(judged.values()):
        judged["q00"] = {docs[0]}
    qrels = ingest.Qrels({(q, d): 1 for q, rel in judged.items() for d in sorted(rel)})
    return runs, rankings, judged, qrels


@pytest.mark.criterion(2)
def test_map_matches_brute_force():
    start = time.perf_counter()
    rng = random.Random(2024)
    for _ in range(50):
        runs, rankings, judged, qrels = _random_instance(rng)
        got = evaluation.mean_average_precision(runs, qrels)
        assert abs(got - oracles.brute_map(rankings, judged)) <= 1e-12
    assert time.perf_counter() - start < 5.0


@pytest.mark.criterion(2)
def test_map_hand_case():
    run = RankedList("q", (("a", 3.0), ("x", 2.0), ("b", 1.0)))
    qrels = ingest.Qrels({("q", "a"): 1, ("q", "b"): 1})
    assert evaluation.mean_average_precision([run], qrels) == pytest.approx(0.833333, abs=1e-6)


# -- 3. FMM correctness ----------------------------------------------------------------


def _random_box_point(rng):
    dims = [f"C{i:07d}" for i in range(rng.randint(1, 12))]
    v, u = {}, {}
    for c in dims:
        if rng.random() < 0.7:
            a, b = sorted((rng.random(), rng.random()))
            if rng.random() < 0.2:
                a = 0.0
            v[c], u[c] = a, b
    x = {c: rng.random() for c in dims if rng.random() < 0.6}
    box = clustering.HyperBox({k: a for k, a in v.items() if a > 0}, u, rng.uniform(1e-3, 0.5), ("m",))
    n = len(set(u) | set(x)) + rng.randint(0, 5)
    return box, x, max(n, 1)


@pytest.mark.criterion(3)
def test_fmm_correctness(reference):
    start = time.perf_counter()
    rng = random.Random(3)
    for _ in range(10_000):
        box, x, n = _random_box_point(rng)
        assert 0.0 <= clustering.membership(box, x, n) <= 1.0

    vectors = {fc.case_id: fc.vector() for fc in reference.index}
    for theta in (0.05, TUNED_THETA):
        model = clustering.train(reference.index, theta)
        assert sorted(model.member_ids()) == sorted(vectors)
        for box in model.boxes:
            for m in box.members:
                x = vectors[m]
                for i in set(box.u) | set(x):
                    assert box.v.get(i, 0.0) <= x.get(i, 0.0) <= box.u.get(i, 0.0)

    single = clustering.train(reference.index, 1.0)
    assert len(single.boxes) == 1
    for q in reference.fused_queries:
        exhaustive = knn_query(reference.index, q, 1000, SimilarityKind.FSF)
        pruned = pruned_query(single, reference.index, q, 1000, SimilarityKind.FSF)
        assert ingest.format_run(pipeline.run_rows([pruned])) == ingest.format_run(
            pipeline.run_rows([exhaustive])
        )
    assert time.perf_counter() - start < 30.0


# -- 4 / 5. retrieval quality on the reference corpus ------------------------------------


@pytest.mark.criterion(4)
def test_fusion_beats_partial_media():
    start = time.perf_counter()
    corpus, queries, qrels = corpusgen.generate(corpusgen.GenSpec())
    text = evaluation.mean_average_precision(pipeline.partial_runs(corpus, queries, Medium.TEXT), qrels)
    image = evaluation.mean_average_precision(pipeline.partial_runs(corpus, queries, Medium.IMAGE), qrels)
    alphas = alignment.compute_alpha(pipeline.auto_align(corpus, queries, qrels))
    index = pipeline.align_and_fuse(corpus, Op.BOUNDED_SUM, alphas)
    fused_q = pipeline.align_and_fuse(queries, Op.BOUNDED_SUM, alphas)
    runs, _ = pipeline.run_queries(index, fused_q, 1000, SimilarityKind.FSF)
    fused = evaluation.mean_average_precision(runs, qrels)
    print(f"MAP text-only {text:.6f}  image-only {image:.6f}  fused {fused:.6f}")

    assert fused - text >= FUSION_MARGIN
    assert fused - image >= FUSION_MARGIN
    assert text == pytest.approx(MAP_TEXT_ONLY, abs=MAP_PIN_TOL)
    assert image == pytest.approx(MAP_IMAGE_ONLY, abs=MAP_PIN_TOL)
    assert fused == pytest.approx(MAP_FUSED_FSF, abs=MAP_PIN_TOL)
    assert alignment.clamp_rate(corpus, *alphas) < CLAMP_RATE_LIMIT
    assert time.perf_counter() - start < 60.0


@pytest.mark.criterion(5)
def test_fsf_dominates_classical_similarities(reference):
    scores = {}
    for kind in (SimilarityKind.FSF, SimilarityKind.COSINE, SimilarityKind.DICE, SimilarityKind.VSM):
        runs, _ = pipeline.run_queries(reference.index, reference.fused_queries, 1000, kind)
        scores[kind] = evaluation.mean_average_precision(runs, reference.qrels)
    print({k.value: round(v, 6) for k, v in scores.items()})
    for kind in (SimilarityKind.COSINE, SimilarityKind.DICE, SimilarityKind.VSM):
        assert scores[SimilarityKind.FSF] >= scores[kind]


# -- 6. pruning compromise -----------------------------------------------------------------


def _check_all(checks):
    """Evaluate every sub-check before failing, so one report lists them all."""
    for label, ok in checks.items():
        print(f"  [{'ok' if ok else 'FAILED'}] {label}")
    failed = [label for label, ok in checks.items() if not ok]
    assert not failed, "; ".join(failed)


@pytest.mark.criterion(6)
def test_theta_grid_box_counts(reference):
    counts = tuple(len(clustering.train(reference.index, t).boxes) for t in THETA_GRID)
    assert counts == THETA_BOX_COUNTS
    assert all(a >= b for a, b in zip(counts, counts[1:]))


@pytest.mark.criterion(6)
def test_pruning_quality_at_tuned_theta(reference):
    model = clustering.train(reference.index, TUNED_THETA)
    exhaustive, _ = pipeline.run_queries(reference.index, reference.fused_queries, 1000)
    pruned, stats = pipeline.run_queries(reference.index, reference.fused_queries, 1000, model=model)
    map_ex = evaluation.mean_average_precision(exhaustive, reference.qrels)
    map_pr = evaluation.mean_average_precision(pruned, reference.qrels)
    fraction = stats.mean_candidates / len(reference.index)
    print(f"theta {TUNED_THETA}: boxes {len(model.boxes)}  candidates {fraction:.1%}  "
          f"MAP exhaustive {map_ex:.6f}  pruned {map_pr:.6f}")
    _check_all({
        "MAP(pruned) >= MAP(exhaustive) - delta": map_pr >= map_ex - PRUNED_MAP_DELTA,
        f"mean candidates {fraction:.1%} <= {CANDIDATE_FRACTION_LIMIT:.0%}": fraction <= CANDIDATE_FRACTION_LIMIT,
    })


@pytest.fixture(scope="module")
def large():
    corpus, queries, qrels = corpusgen.generate(corpusgen.GenSpec(n_cases=LARGE_CASES))
    alphas = alignment.compute_alpha(pipeline.auto_align(corpus, queries, qrels))
    index = pipeline.align_and_fuse(corpus, Op.BOUNDED_SUM, alphas)
    fused_q = pipeline.align_and_fuse(queries, Op.BOUNDED_SUM, alphas)
    return index, fused_q, qrels


@pytest.mark.criterion(6)
def test_pruning_speed_on_large_corpus(large):
    index, fused_q, qrels = large
    model = clustering.train(index, TUNED_THETA)
    # warm both paths once so neither pays first-call costs
    pipeline.run_queries(index, fused_q[:1], 1000)
    pipeline.run_queries(index, fused_q[:1], 1000, model=model)
    exhaustive, ex_stats = pipeline.run_queries(index, fused_q, 1000)
    pruned, pr_stats = pipeline.run_queries(index, fused_q, 1000, model=model)
    fraction = pr_stats.mean_candidates / len(index)
    print(f"{len(index)} cases, theta {TUNED_THETA}: boxes {len(model.boxes)}  "
          f"candidates {fraction:.1%}  exhaustive {ex_stats.mean_ms:.1f} ms  "
          f"pruned {pr_stats.mean_ms:.1f} ms")
    map_ex = evaluation.mean_average_precision(exhaustive, qrels)
    map_pr = evaluation.mean_average_precision(pruned, qrels)
    _check_all({
        "MAP(pruned) >= MAP(exhaustive) - delta": map_pr >= map_ex - PRUNED_MAP_DELTA,
        f"mean candidates {fraction:.1%} <= {CANDIDATE_FRACTION_LIMIT:.0%}": fraction <= CANDIDATE_FRACTION_LIMIT,
        f"pruned {pr_stats.mean_ms:.1f} ms < exhaustive {ex_stats.mean_ms:.1f} ms": pr_stats.mean_ms < ex_stats.mean_ms,
    })


# -- 7. alignment invariance ---------------------------------------------------------------


def _rescale(corpus, text_factor, image_factor=1.0):
    """Multiply every text lambda (through nu) and image lambda (through mu)."""
    cases = []
    for case in corpus:
        text = MediaIndex(Medium.TEXT, [replace(c, nu=c.nu * text_factor, lam=None) for c in case.text_index])
        image = MediaIndex(Medium.IMAGE, [replace(c, mu=c.mu * image_factor, lam=None) for c in case.image_index])
        cases.append(ElementaryCase(case.case_id, text, image, case.image_ref))
    return ingest.Corpus(cases)


def _aligned_fused(corpus, queries, qrels):
    alphas = alignment.compute_alpha(pipeline.auto_align(corpus, queries, qrels))
    assert alignment.clamp_rate(corpus, *alphas) == 0.0
    return pipeline.align_and_fuse(corpus, Op.BOUNDED_SUM, alphas)


@pytest.mark.criterion(7)
@pytest.mark.parametrize("c", [0.1, 10.0])
def test_alignment_scale_invariance(c):
    spec = corpusgen.GenSpec(seed=7, n_cases=200, n_queries=10, relevant_per_query=8)
    corpus, queries, qrels = corpusgen.generate(spec)
    # text lambdas <= 0.1 so x10 stays a valid weight; small image weights keep alignment clamp-free
    base = _rescale(corpus, 0.1, 0.3)
    base_q = _rescale(queries, 0.1, 0.3)
    expected = _aligned_fused(base, base_q, qrels)
    got = _aligned_fused(_rescale(base, c), _rescale(base_q, c), qrels)
    for e, g in zip(expected, got, strict=True):
        assert e.case_id == g.case_id
        assert e.entries.keys() == g.entries.keys()
        for cui, (score, prov) in e.entries.items():
            assert g.entries[cui][1] is prov
            assert abs(g.entries[cui][0] - score) <= 1e-12


# -- 8. format round trips ------------------------------------------------------------------


def _instance_spec(i):
    rng = random.Random(i)
    queries = rng.randint(1, 5)
    relevant = rng.randint(1, 5)
    ct = rng.randint(1, 12)
    return corpusgen.GenSpec(
        seed=i,
        n_cases=queries * relevant + rng.randint(1, 30),
        vocab_size=rng.randint(60, 400),
        concepts_per_text=ct,
        concepts_per_image=rng.randint(1, 8),
        overlap_fraction=rng.choice([0.0, 0.25, 0.5]) if ct >= 8 else 0.0,
        n_queries=queries,
        relevant_per_query=relevant,
        noise=rng.random(),
    )


def _roundtrip(tmp_path, text, parse, fmt):
    first = tmp_path / "a"
    first.write_text(text, encoding="utf-8", newline="\n")
    obj = parse(first)
    again = fmt(obj)
    assert again == text
    second = tmp_path / "b"
    second.write_text(again, encoding="utf-8", newline="\n")
    assert second.read_bytes() == first.read_bytes()
    assert fmt(parse(second)) == text


@pytest.mark.criterion(8)
def test_format_round_trips(tmp_path):
    for i in range(100):
        spec = _instance_spec(i)
        corpus, queries, qrels = corpusgen.generate(spec)
        _roundtrip(tmp_path, ingest.format_corpus(corpus), ingest.parse_case_file, ingest.format_corpus)
        _roundtrip(tmp_path, ingest.format_qrels(qrels), ingest.parse_qrels, ingest.format_qrels)

        index = pipeline.align_and_fuse(corpus, list(Op)[i % 6], (1.0, 1.0))
        fused_q = pipeline.align_and_fuse(queries, list(Op)[i % 6], (1.0, 1.0))
        kind = list(SimilarityKind)[i % 5]
        runs = pipeline.search(index, fused_q, k=1 + i % 40, kind=kind)
        run_text = ingest.format_run(pipeline.run_rows(runs), tag=f"run{i}")
        _roundtrip(tmp_path, run_text, ingest.parse_run, ingest.format_run)

        model = clustering.train(index, 0.05 + 0.95 * random.Random(i).random())
        _roundtrip(tmp_path, clustering.format_model(model), clustering.parse_model, clustering.format_model)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-s"]))
