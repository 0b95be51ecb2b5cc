import datetime as dt
import itertools

import numpy as np
import pytest

from sardamage.evaluation import (
    MetricsReport,
    ScoredSample,
    UnachievablePrecisionError,
    auc_score,
    calibrate_threshold,
    compare_methods,
    compute_metrics,
    format_report,
    report_to_json,
    samples_to_csv,
    score_labels,
    window_max,
)
from sardamage.geodata import LabelPoint, ProbabilityMap

from testutil import metric_transform


def sample(score, truth, pid="p", period=5):
    return ScoredSample(point_id=pid, period=period, score=score, truth=truth)


def pairwise_auc_oracle(samples):
    """O(n^2) pairwise comparison count, half credit for ties."""
    pos = [s.score for s in samples if s.truth == 1]
    neg = [s.score for s in samples if s.truth == 0]
    total = 0.0
    for p in pos:
        for n in neg:
            if p > n:
                total += 1.0
            elif p == n:
                total += 0.5
    return total / (len(pos) * len(neg))


class TestAuc:
    def test_documented_example(self):
        samples = [
            sample(0.9, 1), sample(0.4, 1), sample(0.8, 0), sample(0.1, 0),
        ]
        assert auc_score(samples) == 0.75

    def test_perfect_separation(self):
        samples = [sample(0.9, 1), sample(0.8, 1), sample(0.2, 0), sample(0.1, 0)]
        assert auc_score(samples) == 1.0

    def test_all_ties(self):
        samples = [sample(0.5, 1), sample(0.5, 0), sample(0.5, 1), sample(0.5, 0)]
        assert auc_score(samples) == 0.5

    def test_single_class_undefined(self):
        with pytest.raises(ValueError, match="undefined"):
            auc_score([sample(0.7, 1), sample(0.8, 1)])

    def test_matches_pairwise_oracle(self):
        rng = np.random.default_rng(31)
        for _ in range(100):
            n = int(rng.integers(5, 201))
            scores = np.round(rng.uniform(0, 1, size=n), 2)  # provoke ties
            truths = (rng.uniform(size=n) < 0.4).astype(int)
            if truths.min() == truths.max():
                truths[0] = 1 - truths[0]
            samples = [sample(float(s), int(t)) for s, t in zip(scores, truths)]
            assert auc_score(samples) == pytest.approx(
                pairwise_auc_oracle(samples), abs=1e-12
            )

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(4)
        scores = rng.uniform(0.01, 1, size=60)
        truths = (rng.uniform(size=60) < 0.5).astype(int)
        truths[0], truths[1] = 0, 1
        s1 = [sample(float(s), int(t)) for s, t in zip(scores, truths)]
        s2 = [sample(float(s**3), int(t)) for s, t in zip(scores, truths)]
        assert auc_score(s1) == pytest.approx(auc_score(s2), abs=1e-12)


class TestComputeMetrics:
    def test_documented_confusion_example(self):
        samples = [
            sample(0.9, 1), sample(0.4, 1), sample(0.8, 0), sample(0.1, 0),
        ]
        rep = compute_metrics(samples, threshold=0.5)
        assert (rep.tp, rep.fp, rep.tn, rep.fn) == (1, 1, 1, 1)
        assert rep.damaged.precision == 0.5
        assert rep.damaged.recall == 0.5
        assert rep.damaged.f1 == 0.5
        assert rep.accuracy == 0.5
        assert rep.auc == 0.75

    def test_threshold_zero_full_recall(self):
        rng = np.random.default_rng(0)
        samples = [
            sample(float(s), int(t))
            for s, t in zip(rng.uniform(0, 1, 50), rng.integers(0, 2, 50))
        ]
        rep = compute_metrics(samples, threshold=0.0)
        assert rep.damaged.recall == 1.0
        rep_high = compute_metrics(samples, threshold=1.01)
        assert rep_high.damaged.recall == 0.0

    def test_f1_is_harmonic_mean(self):
        samples = [sample(0.9, 1)] * 3 + [sample(0.9, 0)] + [sample(0.1, 1)] * 2
        rep = compute_metrics(samples, threshold=0.5)
        p, r = rep.damaged.precision, rep.damaged.recall
        assert rep.damaged.f1 == pytest.approx(2 * p * r / (p + r))

    def test_single_class_reports_none_auc(self):
        rep = compute_metrics([sample(0.9, 1), sample(0.2, 1)], 0.5)
        assert rep.auc is None
        assert rep.damaged.recall == 0.5

    def test_inclusive_threshold(self):
        rep = compute_metrics([sample(0.5, 1)], threshold=0.5)
        assert rep.tp == 1

    def test_metric_invariance_under_monotone_transform(self):
        rng = np.random.default_rng(9)
        scores = rng.uniform(0.01, 0.99, size=80)
        truths = (rng.uniform(size=80) < 0.5).astype(int)
        truths[0], truths[1] = 0, 1
        t = 0.6
        s1 = [sample(float(s), int(v)) for s, v in zip(scores, truths)]
        s2 = [sample(float(np.sqrt(s)), int(v)) for s, v in zip(scores, truths)]
        r1 = compute_metrics(s1, t)
        r2 = compute_metrics(s2, float(np.sqrt(t)))
        assert (r1.tp, r1.fp, r1.tn, r1.fn) == (r2.tp, r2.fp, r2.tn, r2.fn)
        assert r1.auc == pytest.approx(r2.auc, abs=1e-12)

    def test_rendering(self):
        rep = compute_metrics([sample(0.9, 1), sample(0.1, 0)], 0.5)
        text = format_report(rep)
        assert "damaged" in text and "AUC" in text
        assert "threshold 0.5" in text
        json_text = report_to_json(rep)
        assert '"auc"' in json_text

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            compute_metrics([], 0.5)


class TestCalibration:
    def test_smallest_qualifying_threshold(self):
        # positives at 0.9/0.8/0.7, negatives at 0.75/0.2
        samples = [
            sample(0.9, 1), sample(0.8, 1), sample(0.7, 1),
            sample(0.75, 0), sample(0.2, 0),
        ]
        # exhaustive check over the candidate set, independently
        t = calibrate_threshold(samples, target_precision=0.9)
        tp = sum(1 for s in samples if s.score >= t and s.truth == 1)
        fp = sum(1 for s in samples if s.score >= t and s.truth == 0)
        assert tp / (tp + fp) >= 0.9
        # any lower candidate misses the target
        distinct = sorted({s.score for s in samples})
        lower = [0.0] + [
            (a + b) / 2 for a, b in zip(distinct, distinct[1:]) if (a + b) / 2 < t
        ]
        for cand in lower:
            ctp = sum(1 for s in samples if s.score >= cand and s.truth == 1)
            cfp = sum(1 for s in samples if s.score >= cand and s.truth == 0)
            assert ctp / (ctp + cfp) < 0.9

    def test_precision_constraint_exact_on_calibration_set(self):
        rng = np.random.default_rng(6)
        scores = rng.beta(2, 2, size=200)
        truths = (rng.uniform(size=200) < scores).astype(int)  # calibrated scores
        samples = [sample(float(s), int(t)) for s, t in zip(scores, truths)]
        for target in (0.7, 0.8, 0.9):
            t = calibrate_threshold(samples, target)
            rep = compute_metrics(samples, t)
            assert rep.damaged.precision >= target

    def test_target_one_with_clean_top(self):
        samples = [sample(0.95, 1), sample(0.9, 0), sample(0.2, 0)]
        t = calibrate_threshold(samples, 1.0)
        assert 0.9 < t <= 0.95
        rep = compute_metrics(samples, t)
        assert rep.damaged.precision == 1.0

    def test_unachievable_reports_best(self):
        samples = [sample(0.9, 0), sample(0.8, 1)]  # best precision 0.5
        with pytest.raises(UnachievablePrecisionError) as err:
            calibrate_threshold(samples, 0.9)
        assert err.value.best == pytest.approx(0.5)

    def test_invalid_target(self):
        with pytest.raises(ValueError):
            calibrate_threshold([sample(0.5, 1)], 0.0)
        with pytest.raises(ValueError):
            calibrate_threshold([sample(0.5, 1)], 1.5)


class TestCompareMethods:
    def test_identical_scores_identical_reports(self):
        samples = [sample(0.9, 1, "a"), sample(0.1, 0, "b")]
        cmp = compare_methods(samples, samples, rf_threshold=0.5, pwtt_cutoff=0.5)
        assert cmp.rf == cmp.pwtt

    def test_universe_mismatch_listed(self):
        a = [sample(0.9, 1, "a"), sample(0.1, 0, "b")]
        b = [sample(0.9, 1, "a")]
        with pytest.raises(ValueError, match="only in rf"):
            compare_methods(a, b)

    def test_pwtt_cutoff_applied(self):
        rf = [sample(0.9, 1, "a"), sample(0.2, 0, "b")]
        tt = [sample(2.5, 1, "a"), sample(0.7, 0, "b")]
        cmp = compare_methods(rf, tt)
        assert cmp.pwtt.threshold == 1.63
        assert cmp.pwtt.tp == 1 and cmp.pwtt.tn == 1


def _label(pid, x, y, unosat="2022-05-10", damage_class="destroyed"):
    return LabelPoint(
        id=pid, lon=x, lat=y, damage_class=damage_class,
        unosat_date=dt.date.fromisoformat(unosat), aoi="t",
    )


def _pmap(values, period):
    arr = np.asarray(values, dtype=np.float32)
    return ProbabilityMap(
        width=arr.shape[1], height=arr.shape[0],
        transform=metric_transform(arr.shape[1], arr.shape[0]),
        period_index=period, values=arr,
    )


class TestScoreLabels:
    def test_window_max_example(self):
        values = [[0.1, 0.2, 0.3], [0.4, 0.9, 0.5], [0.1, 0.1, 0.1]]
        pmap = _pmap(values, 6)
        assert window_max(pmap, 1, 1) == pytest.approx(0.9)

    def test_corner_label_uses_truncated_window(self):
        values = np.zeros((3, 3), dtype=np.float32)
        values[0, 0] = 0.3
        values[1, 1] = 0.8
        values[2, 2] = 0.99  # outside the corner 2x2
        pmap = _pmap(values, 6)
        assert window_max(pmap, 0, 0) == pytest.approx(0.8)

    def test_scoring_and_truths(self):
        maps = {
            3: _pmap(np.full((3, 3), 0.2), 3),   # pre-invasion -> truth 0
            6: _pmap(np.full((3, 3), 0.7), 6),   # post-unosat -> truth 1
            5: _pmap(np.full((3, 3), 0.5), 5),   # gap period -> discarded
        }
        # unosat falls inside period 5 (ends 2022-05-23 < 2022-06-15)
        labels = [_label("p1", 15.0, 15.0, unosat="2022-06-15")]
        result = score_labels(maps, labels)
        by_period = {s.period: s for s in result.samples}
        assert set(by_period) == {3, 6}
        assert by_period[3].truth == 0
        assert by_period[6].truth == 1
        assert by_period[6].score == pytest.approx(0.7)

    def test_label_outside_grid_warns(self):
        maps = {6: _pmap(np.full((3, 3), 0.5), 6)}
        result = score_labels(maps, [_label("far", 500.0, 500.0)])
        assert result.samples == []
        assert any("outside grid" in w for w in result.warnings)

    def test_nodata_window_warns(self):
        maps = {6: _pmap(np.full((3, 3), np.nan), 6)}
        result = score_labels(maps, [_label("p", 15.0, 15.0)])
        assert result.samples == []
        assert any("nodata" in w for w in result.warnings)

    def test_non_positive_labels_excluded(self):
        maps = {6: _pmap(np.full((3, 3), 0.5), 6)}
        result = score_labels(
            maps, [_label("p", 15.0, 15.0, damage_class="moderately_damaged")]
        )
        assert result.samples == []

    def test_csv_export(self):
        text = samples_to_csv([sample(0.5, 1, "a", 6)])
        assert text.startswith("point_id,period,score,truth\n")
        assert "a,6,0.5,1" in text
