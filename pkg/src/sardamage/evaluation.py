"""Evaluation protocol, metrics, and precision-targeted threshold search.

Labeled points are scored with the maximum predicted probability in a 3x3
window around each point (tolerating small geolocation shifts between the
annotations and the grid). Post-invasion periods supply the positives,
pre-invasion periods the negatives; in-between periods are discarded. AUC
uses the pairwise-comparison definition with half credit for ties.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .geodata import LabelPoint, ProbabilityMap
from .temporal import DISCARD, LabelContext, Timeline, DEFAULT_TIMELINE, assign_label


@dataclass(frozen=True)
class ScoredSample:
    """One (label point, period) evaluation sample.

    ``score`` is the detector output: a probability in [0, 1] for the
    forest, a nonnegative t statistic for the baseline. ``truth`` follows
    the dynamic label rule for the period's end date.
    """

    point_id: str
    period: int
    score: float
    truth: int


@dataclass
class ScoreResult:
    samples: list[ScoredSample]
    warnings: list[str] = field(default_factory=list)


def window_max(pmap: ProbabilityMap, col: int, row: int, radius: int = 1) -> float:
    """Max of finite values in the (2r+1)^2 window, truncated at edges.
    NaN when the whole window is nodata."""
    r0, r1 = max(row - radius, 0), min(row + radius + 1, pmap.height)
    c0, c1 = max(col - radius, 0), min(col + radius + 1, pmap.width)
    win = pmap.values[r0:r1, c0:c1]
    finite = win[np.isfinite(win)]
    return float(finite.max()) if finite.size else math.nan


def score_labels(
    maps: dict[int, ProbabilityMap],
    labels: Sequence[LabelPoint],
    timeline: Timeline = DEFAULT_TIMELINE,
) -> ScoreResult:
    """Score every (positive label, period) pair against the period maps.

    Only positive-class labels enter the protocol; their pre-invasion
    periods provide the negatives. Labels outside the grid and all-nodata
    windows are skipped with a warning. Discard-truth pairs are omitted.
    """
    if not maps:
        raise ValueError("no probability maps supplied")
    first = next(iter(maps.values()))
    for pmap in maps.values():
        if not pmap.same_grid(first):
            raise ValueError("probability maps do not share one grid")
    result = ScoreResult(samples=[])
    for point in labels:
        if not point.is_positive:
            continue
        col, row = first.transform.crs_to_pixel(point.lon, point.lat)
        if not (0 <= col < first.width and 0 <= row < first.height):
            result.warnings.append(f"label {point.id}: outside grid, skipped")
            continue
        ctx = LabelContext(unosat_date=point.unosat_date)
        for period in sorted(maps):
            truth = assign_label(timeline.interval(period).end, ctx)
            if truth == DISCARD:
                continue
            score = window_max(maps[period], col, row)
            if math.isnan(score):
                result.warnings.append(
                    f"label {point.id} period {period}: window is all nodata, skipped"
                )
                continue
            result.samples.append(
                ScoredSample(point_id=point.id, period=period, score=score, truth=truth)
            )
    return result


def auc_score(samples: Sequence[ScoredSample]) -> float:
    """Pairwise-count AUC with tie credit 0.5, via average ranks.

    Raises on a single-class sample set, where AUC is undefined.
    """
    scores = np.array([s.score for s in samples], dtype=np.float64)
    truths = np.array([s.truth for s in samples], dtype=np.int64)
    n_pos = int(np.sum(truths == 1))
    n_neg = int(np.sum(truths == 0))
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC undefined: both classes must be present")
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty_like(scores)
    sorted_scores = scores[order]
    i = 0
    rank_pos = 1.0
    while i < scores.size:
        j = i
        while j + 1 < scores.size and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        avg = (rank_pos + rank_pos + (j - i)) / 2.0
        ranks[order[i : j + 1]] = avg
        rank_pos += j - i + 1
        i = j + 1
    rank_sum_pos = float(np.sum(ranks[truths == 1]))
    u = rank_sum_pos - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class MetricsReport:
    threshold: float
    n_samples: int
    tp: int
    fp: int
    tn: int
    fn: int
    damaged: ClassMetrics
    undamaged: ClassMetrics
    accuracy: float
    auc: Optional[float]

    def to_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "n_samples": self.n_samples,
            "confusion": {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn},
            "damaged": vars(self.damaged),
            "undamaged": vars(self.undamaged),
            "accuracy": self.accuracy,
            "auc": self.auc,
        }


def _prf(tp: int, fp: int, fn: int) -> ClassMetrics:
    precision = tp / (tp + fp) if (tp + fp) else 0.0
    recall = tp / (tp + fn) if (tp + fn) else 0.0
    f1 = 2 * precision * recall / (precision + recall) if (precision + recall) else 0.0
    return ClassMetrics(precision=precision, recall=recall, f1=f1)


def compute_metrics(samples: Sequence[ScoredSample], threshold: float) -> MetricsReport:
    """Confusion-derived metrics at ``score >= threshold`` (inclusive).

    AUC is None when only one class is present (it is undefined there);
    all other metrics are still reported.
    """
    if not samples:
        raise ValueError("no samples to evaluate")
    tp = fp = tn = fn = 0
    for s in samples:
        predicted = 1 if s.score >= threshold else 0
        if predicted == 1 and s.truth == 1:
            tp += 1
        elif predicted == 1 and s.truth == 0:
            fp += 1
        elif predicted == 0 and s.truth == 0:
            tn += 1
        else:
            fn += 1
    try:
        auc: Optional[float] = auc_score(samples)
    except ValueError:
        auc = None
    return MetricsReport(
        threshold=threshold,
        n_samples=len(samples),
        tp=tp,
        fp=fp,
        tn=tn,
        fn=fn,
        damaged=_prf(tp, fp, fn),
        undamaged=_prf(tn, fn, fp),
        accuracy=(tp + tn) / len(samples),
        auc=auc,
    )


class UnachievablePrecisionError(ValueError):
    def __init__(self, target: float, best: float):
        super().__init__(
            f"no threshold reaches precision {target:.3f}; best achievable "
            f"is {best:.3f}"
        )
        self.target = target
        self.best = best


def calibrate_threshold(samples: Sequence[ScoredSample], target_precision: float) -> float:
    """Smallest threshold whose precision meets the target.

    Candidates are the midpoints between consecutive distinct sorted scores
    plus the endpoints {0, 1} — exact for a finite sample set. Precision is
    non-achieving wherever nothing is predicted positive. Choosing the
    smallest qualifying threshold maximizes recall subject to the
    precision constraint.
    """
    if not 0.0 < target_precision <= 1.0:
        raise ValueError("target precision must lie in (0, 1]")
    if not samples:
        raise ValueError("no samples to calibrate on")
    distinct = sorted({s.score for s in samples})
    candidates = [0.0]
    candidates += [
        (a + b) / 2.0 for a, b in zip(distinct, distinct[1:])
    ]
    candidates.append(1.0)
    best_precision = 0.0
    for threshold in candidates:
        tp = sum(1 for s in samples if s.score >= threshold and s.truth == 1)
        fp = sum(1 for s in samples if s.score >= threshold and s.truth == 0)
        if tp + fp == 0:
            continue
        precision = tp / (tp + fp)
        best_precision = max(best_precision, precision)
        if precision >= target_precision:
            return threshold
    raise UnachievablePrecisionError(target_precision, best_precision)


@dataclass(frozen=True)
class MethodComparison:
    rf: MetricsReport
    pwtt: MetricsReport

    def to_dict(self) -> dict:
        return {"rf": self.rf.to_dict(), "pwtt": self.pwtt.to_dict()}


def compare_methods(
    samples_rf: Sequence[ScoredSample],
    samples_pwtt: Sequence[ScoredSample],
    rf_threshold: float = 0.5,
    pwtt_cutoff: float = 1.63,
) -> MethodComparison:
    """Side-by-side reports over the same (point, period) universe; the
    baseline is thresholded at its published cutoff."""
    key_rf = {(s.point_id, s.period) for s in samples_rf}
    key_tt = {(s.point_id, s.period) for s in samples_pwtt}
    if key_rf != key_tt:
        only_rf = sorted(key_rf - key_tt)[:5]
        only_tt = sorted(key_tt - key_rf)[:5]
        raise ValueError(
            "sample universes differ: "
            f"{len(key_rf - key_tt)} only in rf (e.g. {only_rf}), "
            f"{len(key_tt - key_rf)} only in pwtt (e.g. {only_tt})"
        )
    return MethodComparison(
        rf=compute_metrics(samples_rf, rf_threshold),
        pwtt=compute_metrics(samples_pwtt, pwtt_cutoff),
    )


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------


def report_to_json(report: MetricsReport) -> str:
    return json.dumps(report.to_dict(), indent=2, sort_keys=True)


def format_report(report: MetricsReport, title: str = "Evaluation") -> str:
    """Aligned text table, percentages like the usual summary tables."""
    lines = [
        f"{title} (threshold {report.threshold:g}, n={report.n_samples})",
        f"{'class':<12}{'precision':>10}{'recall':>10}{'F1':>10}",
    ]
    for name, cm in [("damaged", report.damaged), ("undamaged", report.undamaged)]:
        lines.append(
            f"{name:<12}{100 * cm.precision:>9.1f}%{100 * cm.recall:>9.1f}%"
            f"{100 * cm.f1:>9.1f}%"
        )
    auc = f"{100 * report.auc:.1f}%" if report.auc is not None else "undefined"
    lines.append(f"accuracy {100 * report.accuracy:.1f}%   AUC {auc}")
    lines.append(
        f"confusion tp={report.tp} fp={report.fp} tn={report.tn} fn={report.fn}"
    )
    return "\n".join(lines)


def samples_to_csv(samples: Sequence[ScoredSample]) -> str:
    lines = ["point_id,period,score,truth"]
    for s in samples:
        lines.append(f"{s.point_id},{s.period},{s.score!r},{s.truth}")
    return "\n".join(lines) + "\n"
