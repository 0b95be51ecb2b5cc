"""Pixel-wise t-test baseline detector.

Welch's two-sample statistic on the pre/post segment means, taken in
absolute value: destruction can raise or lower backscatter, so the detector
must be two-sided. Per orbit the VV and VH statistics are averaged; across
orbits the maximum is taken; the decision is score >= cutoff (inclusive).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

from . import features
from .features import SegmentSet, SeriesSegment
from .geodata import RasterStack
from .temporal import TimeInterval

#: Published operating cutoff of the baseline, calibrated for Ukraine.
DEFAULT_CUTOFF = 1.63


class InsufficientDataError(ValueError):
    """Both segments need at least two samples for a variance estimate."""


@dataclass(frozen=True)
class TTestResult:
    t_abs: float
    n_pre: int
    n_post: int

    def exceeds(self, cutoff: float = DEFAULT_CUTOFF) -> bool:
        return self.t_abs >= cutoff


def _mean_var(values) -> tuple[float, float]:
    n = len(values)
    mean = sum(values) / n
    var = sum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, var


def pwtt_statistic(pre: SeriesSegment, post: SeriesSegment) -> TTestResult:
    """|Welch t| between the two segments, with sample (n-1) variances.

    Degenerate zero-variance pairs: equal means give t = 0, unequal means
    give +inf (a change that always exceeds any cutoff).
    """
    if pre.n < 2 or post.n < 2:
        raise InsufficientDataError(
            f"need >= 2 samples per segment, got pre={pre.n}, post={post.n}"
        )
    mean_pre, var_pre = _mean_var(pre.values.tolist())
    mean_post, var_post = _mean_var(post.values.tolist())
    denom_sq = var_pre / pre.n + var_post / post.n
    if denom_sq == 0.0:
        t = 0.0 if mean_post == mean_pre else math.inf
    else:
        t = abs(mean_post - mean_pre) / math.sqrt(denom_sq)
    return TTestResult(t_abs=t, n_pre=pre.n, n_post=post.n)


def _orbit_score(segments: SegmentSet) -> Optional[float]:
    """Mean |t| over the two polarizations; None when the orbit lacks data.

    An orbit contributes only when both bands have enough samples in both
    windows, mirroring the classifier's all-four-segments rule.
    """
    pairs = [(segments.ref_vv, segments.new_vv), (segments.ref_vh, segments.new_vh)]
    if any(pre.n < 2 or post.n < 2 for pre, post in pairs):
        return None
    stats = [pwtt_statistic(pre, post).t_abs for pre, post in pairs]
    return sum(stats) / len(stats)


def pwtt_score(
    stack: RasterStack,
    pixel: tuple[int, int],
    orbits: Sequence[int],
    interval_ref: TimeInterval,
    interval_new: TimeInterval,
    window: str = features.WINDOW_1X1,
) -> Optional[float]:
    """Per-pixel baseline score: max over orbits of the per-orbit mean |t|.

    Returns None (nodata) when no orbit has sufficient data.
    """
    scores = []
    for orbit in orbits:
        segs = features.extract_segments(
            stack, pixel, orbit, interval_ref, interval_new, window=window
        )
        s = _orbit_score(segs)
        if s is not None:
            scores.append(s)
    return max(scores) if scores else None


def decide(score: float, cutoff: float = DEFAULT_CUTOFF) -> int:
    return 1 if score >= cutoff else 0
