"""Assemble training rows from a stack and point labels, and score labeled
points without dense inference (used by ablations and method comparison).

A training row is one (point, assessment period, orbit) triple whose four
segments are complete; its label follows the dynamic rule for the period's
end date, and rows labelled "discard" never enter training.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import features, pwtt
from .evaluation import ScoredSample, ScoreResult
from .features import FeatureSpec, WINDOW_1X1
from .forest import ForestModel, TrainConfig, train_xy
from .geodata import LabelPoint, RasterStack
from .temporal import DEFAULT_TIMELINE, DISCARD, LabelContext, Timeline, assign_label

#: Periods used for training by default: the year before and after the
#: invasion, which balances both label classes.
DEFAULT_TRAIN_PERIODS = (1, 2, 3, 4, 5, 6, 7, 8)


@dataclass
class TrainingRows:
    X: np.ndarray
    y: np.ndarray
    n_points_used: int
    n_discarded: int


def build_training_rows(
    stack: RasterStack,
    labels: Sequence[LabelPoint],
    periods: Sequence[int] = DEFAULT_TRAIN_PERIODS,
    spec: FeatureSpec = features.DEFAULT_SPEC,
    window: str = WINDOW_1X1,
    timeline: Timeline = DEFAULT_TIMELINE,
) -> TrainingRows:
    """Feature rows for every usable (positive label, period, orbit)."""
    interval_ref = timeline.interval(0)
    rows: list[np.ndarray] = []
    ys: list[int] = []
    used_points: set[str] = set()
    discarded = 0
    for point in labels:
        if not point.is_positive:
            continue
        col, row = stack.transform.crs_to_pixel(point.lon, point.lat)
        if not stack.in_bounds(col, row):
            continue
        ctx = LabelContext(unosat_date=point.unosat_date)
        for period in periods:
            label = assign_label(timeline.interval(period).end, ctx)
            if label == DISCARD:
                discarded += 1
                continue
            interval_new = timeline.interval(period)
            for orbit in stack.orbits():
                segs = features.extract_segments(
                    stack, (col, row), orbit, interval_ref, interval_new, window=window
                )
                try:
                    fv = features.feature_vector_for_spec(segs, spec)
                except features.EmptySegmentError:
                    continue
                rows.append(fv)
                ys.append(label)
                used_points.add(point.id)
    if not rows:
        return TrainingRows(
            X=np.empty((0, spec.length)), y=np.empty(0, dtype=np.int64),
            n_points_used=0, n_discarded=discarded,
        )
    return TrainingRows(
        X=np.stack(rows),
        y=np.array(ys, dtype=np.int64),
        n_points_used=len(used_points),
        n_discarded=discarded,
    )


def train_from_stack(
    stack: RasterStack,
    labels: Sequence[LabelPoint],
    config: Optional[TrainConfig] = None,
    periods: Sequence[int] = DEFAULT_TRAIN_PERIODS,
    spec: FeatureSpec = features.DEFAULT_SPEC,
    window: str = WINDOW_1X1,
    timeline: Timeline = DEFAULT_TIMELINE,
) -> tuple[ForestModel, TrainingRows]:
    cfg = config or TrainConfig()
    if cfg.feature_order_tag != spec.tag:
        cfg = TrainConfig(
            n_trees=cfg.n_trees,
            min_leaf=cfg.min_leaf,
            max_nodes=cfg.max_nodes,
            seed=cfg.seed,
            balance=cfg.balance,
            feature_order_tag=spec.tag,
        )
    rows = build_training_rows(
        stack, labels, periods=periods, spec=spec, window=window, timeline=timeline
    )
    model = train_xy(rows.X, rows.y, cfg)
    return model, rows


def _window_pixels(
    stack: RasterStack, col: int, row: int, radius: int
) -> list[tuple[int, int]]:
    out = []
    for r in range(max(row - radius, 0), min(row + radius + 1, stack.height)):
        for c in range(max(col - radius, 0), min(col + radius + 1, stack.width)):
            out.append((c, r))
    return out


def rf_scores_for_labels(
    stack: RasterStack,
    model: ForestModel,
    labels: Sequence[LabelPoint],
    periods: Sequence[int],
    window: str = WINDOW_1X1,
    radius: int = 1,
    timeline: Timeline = DEFAULT_TIMELINE,
) -> ScoreResult:
    """Classifier scores at label windows only (no dense map): max fused
    probability over the (2r+1)^2 pixel window, per period."""
    from .inference import infer_pixel

    interval_ref = timeline.interval(0)
    result = ScoreResult(samples=[])
    for point in labels:
        if not point.is_positive:
            continue
        col, row = stack.transform.crs_to_pixel(point.lon, point.lat)
        if not stack.in_bounds(col, row):
            result.warnings.append(f"label {point.id}: outside grid, skipped")
            continue
        ctx = LabelContext(unosat_date=point.unosat_date)
        for period in periods:
            truth = assign_label(timeline.interval(period).end, ctx)
            if truth == DISCARD:
                continue
            interval_new = timeline.interval(period)
            best = -math.inf
            for px in _window_pixels(stack, col, row, radius):
                p = infer_pixel(stack, model, px, interval_ref, interval_new, window)
                if p is not None and p > best:
                    best = p
            if best == -math.inf:
                result.warnings.append(
                    f"label {point.id} period {period}: no usable pixel, skipped"
                )
                continue
            result.samples.append(
                ScoredSample(point_id=point.id, period=period, score=best, truth=truth)
            )
    return result


def pwtt_scores_for_labels(
    stack: RasterStack,
    labels: Sequence[LabelPoint],
    periods: Sequence[int],
    window: str = WINDOW_1X1,
    radius: int = 1,
    timeline: Timeline = DEFAULT_TIMELINE,
) -> ScoreResult:
    """Baseline scores under the same windowed-max protocol."""
    interval_ref = timeline.interval(0)
    orbits = stack.orbits()
    result = ScoreResult(samples=[])
    for point in labels:
        if not point.is_positive:
            continue
        col, row = stack.transform.crs_to_pixel(point.lon, point.lat)
        if not stack.in_bounds(col, row):
            result.warnings.append(f"label {point.id}: outside grid, skipped")
            continue
        ctx = LabelContext(unosat_date=point.unosat_date)
        for period in periods:
            truth = assign_label(timeline.interval(period).end, ctx)
            if truth == DISCARD:
                continue
            interval_new = timeline.interval(period)
            best = -math.inf
            for px in _window_pixels(stack, col, row, radius):
                s = pwtt.pwtt_score(
                    stack, px, orbits, interval_ref, interval_new, window=window
                )
                if s is not None and s > best:
                    best = s
            if best == -math.inf:
                result.warnings.append(
                    f"label {point.id} period {period}: no usable pixel, skipped"
                )
                continue
            result.samples.append(
                ScoredSample(point_id=point.id, period=period, score=best, truth=truth)
            )
    return result


def split_labels_spatially(
    labels: Sequence[LabelPoint], stack: RasterStack
) -> tuple[list[LabelPoint], list[LabelPoint]]:
    """Geographic holdout split: west half trains, east half tests."""
    xmin, _, xmax, _ = stack.extent()
    mid = (xmin + xmax) / 2.0
    train = [p for p in labels if p.lon < mid]
    test = [p for p in labels if p.lon >= mid]
    return train, test
