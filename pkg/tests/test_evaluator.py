import itertools
import random

import numpy as np
import pytest

from docfig.dataset import Prediction
from docfig.evaluator import (CorpusMetrics, MatchConfig, PageEval, aggregate,
                              evaluate_corpus, f1_score, filter_predictions,
                              fold_statistics, hungarian_assign, match_page)
from docfig.geometry import BoundingBox


def brute_force_assignment_cost(cost: np.ndarray) -> float:
    """Exhaustive minimum over all assignments; independent oracle."""
    n, m = cost.shape
    if n <= m:
        return min(sum(cost[i, p[i]] for i in range(n))
                   for p in itertools.permutations(range(m), n))
    return min(sum(cost[p[j], j] for j in range(m))
               for p in itertools.permutations(range(n), m))


def pred(x1, y1, x2, y2, conf=1.0):
    return Prediction(BoundingBox(x1, y1, x2, y2), conf)


class TestFilterPredictions:
    def test_boundary_kept(self):
        preds = [pred(0, 0, 1, 1, c) for c in (0.4, 0.5, 0.9)]
        kept = filter_predictions(preds, MatchConfig())
        assert [p.confidence for p in kept] == [0.5, 0.9]

    def test_empty(self):
        assert filter_predictions([], MatchConfig()) == []

    def test_zero_threshold_keeps_all(self):
        preds = [pred(0, 0, 1, 1, c) for c in (0.0, 0.3)]
        assert filter_predictions(preds, MatchConfig(confidence_threshold=0.0)) == preds


class TestHungarianAssign:
    def test_single_cell(self):
        assert hungarian_assign(np.array([[7.0]])) == [(0, 0)]

    def test_two_by_two_cross(self):
        # 1+4=5 vs 2+2=4: the anti-diagonal wins
        pairs = hungarian_assign(np.array([[1.0, 2.0], [2.0, 4.0]]))
        assert pairs == [(0, 1), (1, 0)]

    def test_zero_diagonal(self):
        cost = np.ones((3, 3)) - np.eye(3)
        assert hungarian_assign(cost) == [(0, 0), (1, 1), (2, 2)]

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            hungarian_assign(np.array([[-1.0]]))

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            hungarian_assign(np.array([[np.inf]]))

    def test_rectangular_pair_count(self):
        pairs = hungarian_assign(np.random.default_rng(0).uniform(0, 1, (3, 5)))
        assert len(pairs) == 3
        assert len({r for r, _ in pairs}) == 3
        assert len({c for _, c in pairs}) == 3

    def test_matches_brute_force(self):
        rng = np.random.default_rng(42)
        for _ in range(200):
            n, m = rng.integers(1, 7, size=2)
            cost = rng.uniform(0, 100, (n, m))
            pairs = hungarian_assign(cost)
            total = sum(cost[r, c] for r, c in pairs)
            assert total == pytest.approx(brute_force_assignment_cost(cost), abs=1e-9)


class TestMatchPage:
    def test_perfect_match(self):
        gt = [BoundingBox(0, 0, 10, 10)]
        ev = match_page("p", gt, [pred(0, 0, 10, 10, 0.9)], MatchConfig())
        assert (ev.tp, ev.fp, ev.fn) == (1, 0, 0)

    def test_subthreshold_confidence_filtered(self):
        gt = [BoundingBox(0, 0, 10, 10)]
        ev = match_page("p", gt, [pred(0, 0, 10, 10, 0.4)], MatchConfig())
        assert (ev.tp, ev.fp, ev.fn) == (0, 0, 1)

    def test_low_iou_pair_is_fp_and_fn(self):
        gt = [BoundingBox(0, 0, 10, 10)]
        ev = match_page("p", gt, [pred(5, 5, 15, 15, 0.9)], MatchConfig())
        assert (ev.tp, ev.fp, ev.fn) == (0, 1, 1)
        assert ev.matches[0].iou == pytest.approx(25 / 175)

    def test_iou_exactly_at_threshold_is_tp(self):
        gt = [BoundingBox(0, 0, 10, 10)]
        ev = match_page("p", gt, [pred(0, 0, 10, 8, 1.0)],
                        MatchConfig(iou_threshold=0.8))
        assert ev.matches[0].iou == pytest.approx(0.8)
        assert ev.tp == 1

    def test_count_identities(self):
        rng = random.Random(0)
        for _ in range(50):
            gt = [BoundingBox(x, y, x + rng.uniform(1, 30), y + rng.uniform(1, 30))
                  for x, y in ((rng.uniform(0, 200), rng.uniform(0, 200))
                               for _ in range(rng.randint(0, 6)))]
            preds = [pred(x, y, x + rng.uniform(1, 30), y + rng.uniform(1, 30),
                          rng.random())
                     for x, y in ((rng.uniform(0, 200), rng.uniform(0, 200))
                                  for _ in range(rng.randint(0, 6)))]
            cfg = MatchConfig()
            ev = match_page("p", gt, preds, cfg)
            assert ev.tp + ev.fn == len(gt)
            assert ev.tp + ev.fp == len(filter_predictions(preds, cfg))

    def test_order_permutation_invariance(self):
        rng = random.Random(7)
        gt = [BoundingBox(i * 30, i * 20, i * 30 + 25, i * 20 + 15) for i in range(5)]
        preds = [pred(i * 30 + rng.uniform(-3, 3), i * 20 + rng.uniform(-3, 3),
                      i * 30 + 25, i * 20 + 15, 0.9) for i in range(5)]
        base = match_page("p", gt, preds, MatchConfig())
        for _ in range(10):
            g2, p2 = list(gt), list(preds)
            rng.shuffle(g2)
            rng.shuffle(p2)
            ev = match_page("p", g2, p2, MatchConfig())
            assert (ev.tp, ev.fp, ev.fn) == (base.tp, base.fp, base.fn)


class TestAggregate:
    def test_paper_deepfigures_f1(self):
        assert f1_score(0.450, 0.468) == pytest.approx(0.459, abs=5e-4)

    def test_micro_sums(self):
        pages = [PageEval("a", tp=3, fp=1, fn=2), PageEval("b", tp=1, fp=3, fn=0)]
        m = aggregate(pages)
        assert (m.tp, m.fp, m.fn) == (4, 4, 2)
        assert m.precision == pytest.approx(0.5)
        assert m.recall == pytest.approx(4 / 6)

    def test_empty_corpus_convention(self):
        m = aggregate([PageEval("a", 0, 0, 0)])
        assert (m.precision, m.recall, m.f1) == (1.0, 1.0, 1.0)

    def test_no_predictions_with_ground_truth(self):
        m = aggregate([PageEval("a", 0, 0, 5)])
        assert (m.precision, m.recall, m.f1) == (0.0, 0.0, 0.0)

    def test_requires_pages(self):
        with pytest.raises(ValueError):
            aggregate([])

    def test_macro_mode(self):
        pages = [PageEval("a", tp=1, fp=0, fn=0), PageEval("b", tp=0, fp=1, fn=1)]
        micro = aggregate(pages)
        macro = aggregate(pages, macro=True)
        assert micro.precision == pytest.approx(0.5)
        assert macro.precision == pytest.approx(0.5)
        assert macro.recall == pytest.approx(0.5)

    def test_spurious_prediction_never_raises_precision(self):
        pages = [PageEval("a", tp=3, fp=1, fn=1)]
        with_spurious = [PageEval("a", tp=3, fp=2, fn=1)]
        assert aggregate(with_spurious).precision <= aggregate(pages).precision

    def test_predictions_equal_ground_truth_perfect(self):
        gt = {"p": [BoundingBox(0, 0, 10, 10), BoundingBox(50, 50, 80, 90)]}
        preds = {"p": [Prediction(b, 1.0) for b in gt["p"]]}
        corpus, _ = evaluate_corpus(gt, preds, MatchConfig())
        assert (corpus.precision, corpus.recall, corpus.f1) == (1.0, 1.0, 1.0)


class TestFoldStatistics:
    def test_paper_precision_mean(self):
        folds = [CorpusMetrics(p, 0.5, 0.5, 0, 0, 0)
                 for p in (0.749, 0.870, 0.75, 0.928, 0.886, 0.887, 0.804, 0.859)]
        stats = fold_statistics(folds)
        assert stats.mean_precision == pytest.approx(0.842, abs=1e-3)

    def test_identical_folds_zero_std(self):
        folds = [CorpusMetrics(0.8, 0.7, 0.746, 0, 0, 0)] * 3
        stats = fold_statistics(folds)
        assert stats.std_precision == 0.0

    def test_two_point_sample_std(self):
        folds = [CorpusMetrics(0.5, 0.5, f, 0, 0, 0) for f in (0.8, 0.9)]
        stats = fold_statistics(folds)
        assert stats.mean_f1 == pytest.approx(0.85)
        assert stats.std_f1 == pytest.approx(0.0707, abs=5e-4)

    def test_requires_two_folds(self):
        with pytest.raises(ValueError):
            fold_statistics([CorpusMetrics(1, 1, 1, 0, 0, 0)])
