"""Detection evaluation: confidence filtering, minimal-cost center-distance
assignment, IOU-thresholded TP/FP/FN classification, and precision/recall/F1
aggregation with k-fold statistics.

Boundary semantics: a confidence of exactly 0.5 is kept (only scores
strictly lower than the threshold are filtered); an IOU of exactly 0.8 is a
true positive.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .dataset import Prediction
from .geometry import BoundingBox, center_distance, iou


@dataclass(frozen=True)
class MatchConfig:
    confidence_threshold: float = 0.5
    iou_threshold: float = 0.8

    def __post_init__(self):
        if not 0.0 <= self.confidence_threshold <= 1.0:
            raise ValueError("confidence_threshold must be in [0, 1]")
        if not 0.0 <= self.iou_threshold <= 1.0:
            raise ValueError("iou_threshold must be in [0, 1]")


@dataclass(frozen=True)
class Match:
    """One assigned (prediction, ground truth) pair."""

    prediction_index: int
    ground_truth_index: int
    iou: float
    center_distance: float


@dataclass(frozen=True)
class PageEval:
    """TP/FP/FN tallies for one page, with the assignment that produced them."""

    page_id: str
    tp: int
    fp: int
    fn: int
    matches: tuple[Match, ...] = field(default_factory=tuple)


@dataclass(frozen=True)
class CorpusMetrics:
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int


def f1_score(precision: float, recall: float) -> float:
    """Harmonic mean of precision and recall; 0 when both are 0."""
    if precision + recall <= 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def filter_predictions(preds: list[Prediction], cfg: MatchConfig) -> list[Prediction]:
    """Drop predictions whose confidence is strictly below the threshold."""
    return [p for p in preds if p.confidence >= cfg.confidence_threshold]


def hungarian_assign(cost: np.ndarray) -> list[tuple[int, int]]:
    """Minimal-cost assignment on an n x m cost matrix.

    Returns min(n, m) (row, col) pairs; each row and column is used at most
    once. Backed by scipy's rectangular linear-sum-assignment solver.
    """
    cost = np.asarray(cost, dtype=float)
    if cost.ndim != 2:
        raise ValueError("cost must be a 2-D matrix")
    if cost.size == 0:
        return []
    if not np.all(np.isfinite(cost)):
        raise ValueError("cost entries must be finite")
    if np.any(cost < 0):
        raise ValueError("cost entries must be non-negative")
    rows, cols = linear_sum_assignment(cost)
    return sorted(zip(rows.tolist(), cols.tolist()))


def match_page(page_id: str, gt: list[BoundingBox], preds: list[Prediction],
               cfg: MatchConfig) -> PageEval:
    """Match predictions to ground truth by center distance; classify by IOU.

    An assigned pair passing the IOU threshold is a TP. A pair failing it
    counts as both an FP (wrong prediction) and an FN (the ground truth is
    still undetected), keeping tp + fn = |GT| and tp + fp = |filtered preds|.
    """
    kept = filter_predictions(preds, cfg)
    if not kept or not gt:
        return PageEval(page_id, tp=0, fp=len(kept), fn=len(gt))
    cost = np.array([[center_distance(p.box, g) for g in gt] for p in kept])
    pairs = hungarian_assign(cost)
    tp = 0
    matches = []
    for pi, gi in pairs:
        pair_iou = iou(kept[pi].box, gt[gi])
        matches.append(Match(pi, gi, pair_iou, float(cost[pi, gi])))
        if pair_iou >= cfg.iou_threshold:
            tp += 1
    fp = len(kept) - tp
    fn = len(gt) - tp
    return PageEval(page_id, tp=tp, fp=fp, fn=fn, matches=tuple(matches))


def aggregate(pages: list[PageEval], macro: bool = False) -> CorpusMetrics:
    """Corpus precision/recall/F1.

    Micro (default): TP/FP/FN are summed over pages before computing the
    ratios. Macro (diagnostic): per-page precision/recall are averaged and
    F1 is taken of the averages. Empty-set conventions: precision is 1.0
    when there are neither predictions nor ground truths, else 0.0 when
    there are no predictions; recall is 1.0 when there are no ground truths.
    """
    if not pages:
        raise ValueError("aggregate requires at least one page")
    tp = sum(p.tp for p in pages)
    fp = sum(p.fp for p in pages)
    fn = sum(p.fn for p in pages)
    if macro:
        precision = statistics.mean(
            _precision(p.tp, p.fp, p.fn) for p in pages)
        recall = statistics.mean(_recall(p.tp, p.fn) for p in pages)
    else:
        precision = _precision(tp, fp, fn)
        recall = _recall(tp, fn)
    return CorpusMetrics(precision, recall, f1_score(precision, recall), tp, fp, fn)


def _precision(tp: int, fp: int, fn: int) -> float:
    if tp + fp == 0:
        return 1.0 if tp + fn == 0 else 0.0
    return tp / (tp + fp)


def _recall(tp: int, fn: int) -> float:
    if tp + fn == 0:
        return 1.0
    return tp / (tp + fn)


def evaluate_corpus(annotations: dict[str, list[BoundingBox]],
                    predictions: dict[str, list[Prediction]],
                    cfg: MatchConfig) -> tuple[CorpusMetrics, list[PageEval]]:
    """Match every annotated page (missing predictions count as none)."""
    pages = [match_page(pid, annotations[pid], predictions.get(pid, []), cfg)
             for pid in sorted(annotations)]
    return aggregate(pages), pages


@dataclass(frozen=True)
class FoldStatistics:
    """Mean and sample (n-1) standard deviation per metric across folds."""

    mean_precision: float
    mean_recall: float
    mean_f1: float
    std_precision: float
    std_recall: float
    std_f1: float


def fold_statistics(per_fold: list[CorpusMetrics]) -> FoldStatistics:
    """Cross-validation summary over per-fold corpus metrics."""
    if len(per_fold) < 2:
        raise ValueError("fold statistics require at least 2 folds")
    ps = [m.precision for m in per_fold]
    rs = [m.recall for m in per_fold]
    fs = [m.f1 for m in per_fold]
    return FoldStatistics(
        statistics.mean(ps), statistics.mean(rs), statistics.mean(fs),
        statistics.stdev(ps), statistics.stdev(rs), statistics.stdev(fs),
    )
