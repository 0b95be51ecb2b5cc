"""Per-pixel statistical features over paired time-series segments.

Each (pixel, orbit) pair yields four segments: reference and assessment
windows for both polarizations. Every segment is summarized into seven
statistics and the blocks are concatenated in a frozen order, because
trained models index features positionally.

Moment conventions (fixed so model files stay portable): population
(biased) moments, std = sqrt(m2), skewness = m3 / m2^1.5, kurtosis is
excess (m4 / m2^2 - 3), median of an even count = mean of the middle two.
A zero-variance segment gets skewness = kurtosis = 0 rather than NaN, so
constant backscatter (calm water) still yields finite features.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .geodata import POLARIZATIONS, RasterLayer, RasterStack
from .temporal import TimeInterval

STAT_NAMES = ("min", "max", "mean", "median", "std", "kurtosis", "skewness")

#: Bumped whenever the feature layout changes incompatibly.
FEATURE_VERSION = "v1"

WINDOW_1X1 = "1x1"
WINDOW_3X3 = "3x3-mean"
WINDOWS = (WINDOW_1X1, WINDOW_3X3)


class EmptySegmentError(ValueError):
    """A segment with no finite samples cannot be summarized."""


@dataclass(frozen=True)
class SeriesSegment:
    """Finite backscatter samples (dB) from one window; order-irrelevant."""

    values: np.ndarray

    @classmethod
    def from_values(cls, values) -> "SeriesSegment":
        """Build a segment from raw samples, dropping NaN/inf."""
        v = np.asarray(values, dtype=np.float64).ravel()
        return cls(values=v[np.isfinite(v)])

    @property
    def n(self) -> int:
        return int(self.values.size)


@dataclass(frozen=True)
class FeatureSpec:
    """Feature-vector layout: which bands and which statistics, in canonical
    order. The tag string is persisted with trained models; a model refuses
    to run against a different layout."""

    bands: tuple[str, ...] = POLARIZATIONS
    stats: tuple[str, ...] = STAT_NAMES

    def __post_init__(self) -> None:
        bands = tuple(b for b in POLARIZATIONS if b in self.bands)
        stats = tuple(s for s in STAT_NAMES if s in self.stats)
        if not bands or set(self.bands) - set(POLARIZATIONS):
            raise ValueError(f"bands must be a nonempty subset of {POLARIZATIONS}")
        if not stats or set(self.stats) - set(STAT_NAMES):
            raise ValueError(f"stats must be a nonempty subset of {STAT_NAMES}")
        object.__setattr__(self, "bands", bands)
        object.__setattr__(self, "stats", stats)

    @property
    def length(self) -> int:
        return 2 * len(self.bands) * len(self.stats)

    @property
    def tag(self) -> str:
        return f"{FEATURE_VERSION}:bands={'+'.join(self.bands)}:stats={','.join(self.stats)}"

    def stat_indices(self) -> np.ndarray:
        return np.array([STAT_NAMES.index(s) for s in self.stats], dtype=np.intp)

    @classmethod
    def from_tag(cls, tag: str) -> "FeatureSpec":
        """Reconstruct the layout a model was trained with."""
        try:
            version, bands_part, stats_part = tag.split(":")
            bands = tuple(bands_part.removeprefix("bands=").split("+"))
            stats = tuple(stats_part.removeprefix("stats=").split(","))
        except ValueError:
            raise ValueError(f"malformed feature tag {tag!r}") from None
        if version != FEATURE_VERSION:
            raise ValueError(
                f"feature tag version {version!r} incompatible with {FEATURE_VERSION!r}"
            )
        return cls(bands=bands, stats=stats)


DEFAULT_SPEC = FeatureSpec()

FEATURE_ORDER_TAG = DEFAULT_SPEC.tag


def segment_stats_batch(samples: np.ndarray) -> np.ndarray:
    """Summarize many segments at once.

    ``samples`` is (n_samples, n_segments) with NaN for missing values; every
    column must contain at least one finite sample. Returns (7, n_segments)
    in STAT_NAMES order. The per-pixel path routes through this same kernel,
    so scalar and batched extraction agree bit for bit.
    """
    a = np.asarray(samples, dtype=np.float64)
    mn = np.nanmin(a, axis=0)
    mx = np.nanmax(a, axis=0)
    mean = np.nanmean(a, axis=0)
    med = np.nanmedian(a, axis=0)
    # Constant segments are snapped to the exact degenerate form; without the
    # guard, 1-ulp mean error makes m3/m2^1.5 numerically meaningless.
    degenerate = mn == mx
    mean = np.where(degenerate, mn, mean)
    d = a - mean
    m2 = np.nanmean(d * d, axis=0)
    m3 = np.nanmean(d * d * d, axis=0)
    m4 = np.nanmean(d * d * d * d, axis=0)
    m2 = np.where(degenerate, 0.0, m2)
    std = np.sqrt(m2)
    with np.errstate(divide="ignore", invalid="ignore"):
        kurt = np.where(m2 > 0.0, m4 / (m2 * m2) - 3.0, 0.0)
        skew = np.where(m2 > 0.0, m3 / (m2 * std), 0.0)
    return np.stack([mn, mx, mean, med, std, kurt, skew])


def summarize(segment: SeriesSegment) -> np.ndarray:
    """Seven summary statistics of one segment, in STAT_NAMES order."""
    if segment.n == 0:
        raise EmptySegmentError("cannot summarize an empty segment")
    return segment_stats_batch(segment.values[:, None])[:, 0]


@dataclass(frozen=True)
class SegmentSet:
    """The four segments of one (pixel, orbit) pair."""

    ref_vv: SeriesSegment
    ref_vh: SeriesSegment
    new_vv: SeriesSegment
    new_vh: SeriesSegment

    def named(self) -> list[tuple[str, SeriesSegment]]:
        return [
            ("ref_VV", self.ref_vv),
            ("ref_VH", self.ref_vh),
            ("new_VV", self.new_vv),
            ("new_VH", self.new_vh),
        ]

    @property
    def complete(self) -> bool:
        return all(seg.n > 0 for _, seg in self.named())


def build_feature_vector(
    ref_vv: SeriesSegment,
    ref_vh: SeriesSegment,
    new_vv: SeriesSegment,
    new_vh: SeriesSegment,
) -> np.ndarray:
    """Concatenate stat blocks as [ref_VV, ref_VH, new_VV, new_VH], each
    block in STAT_NAMES order: the frozen 28-entry layout."""
    blocks = []
    for name, seg in SegmentSet(ref_vv, ref_vh, new_vv, new_vh).named():
        if seg.n == 0:
            raise EmptySegmentError(f"{name} segment is empty")
        blocks.append(summarize(seg))
    return np.concatenate(blocks)


def feature_vector_for_spec(segments: SegmentSet, spec: FeatureSpec) -> np.ndarray:
    """Feature vector restricted to a layout (used by ablations). Segments
    of bands outside the layout are ignored and may be empty."""
    picks = spec.stat_indices()
    by_band = {
        "VV": (segments.ref_vv, segments.new_vv),
        "VH": (segments.ref_vh, segments.new_vh),
    }
    blocks = []
    for role in (0, 1):  # ref blocks first, then new
        for band in spec.bands:
            seg = by_band[band][role]
            if seg.n == 0:
                raise EmptySegmentError(
                    f"{'ref' if role == 0 else 'new'}_{band} segment is empty"
                )
            blocks.append(summarize(seg)[picks])
    return np.concatenate(blocks)


def neighborhood_mean(values: np.ndarray) -> np.ndarray:
    """3x3 mean of finite neighbors, edge pixels using the available subset.

    All-NaN neighborhoods stay NaN. A neighborhood whose finite values are
    all equal returns that value exactly, which keeps 3x3 extraction of a
    spatially constant grid identical to 1x1 extraction.
    """
    h, w = values.shape
    padded = np.full((h + 2, w + 2), np.nan, dtype=np.float64)
    padded[1 : h + 1, 1 : w + 1] = values
    acc = np.zeros((h, w), dtype=np.float64)
    cnt = np.zeros((h, w), dtype=np.int64)
    nbmin = np.full((h, w), np.inf)
    nbmax = np.full((h, w), -np.inf)
    for dr in range(3):
        for dc in range(3):
            win = padded[dr : dr + h, dc : dc + w]
            finite = np.isfinite(win)
            acc += np.where(finite, win, 0.0)
            cnt += finite
            nbmin = np.fmin(nbmin, win)
            nbmax = np.fmax(nbmax, win)
    with np.errstate(invalid="ignore"):
        out = acc / cnt
    out = np.where(nbmin == nbmax, nbmin, out)
    out[cnt == 0] = np.nan
    return out


def select_sorted(
    stack: RasterStack, orbit: int, polarization: str, interval: TimeInterval
) -> list[RasterLayer]:
    """Matching layers in canonical (timestamp, direction) order. Sample
    order must not depend on how the stack happens to be laid out, or
    results would change under layer permutation."""
    return sorted(
        stack.select(orbit=orbit, polarization=polarization, interval=interval),
        key=lambda layer: (layer.timestamp, layer.direction),
    )


def _window_values(layer_values: np.ndarray, col: int, row: int, window: str) -> float:
    if window == WINDOW_1X1:
        return float(layer_values[row, col])
    if window == WINDOW_3X3:
        return float(neighborhood_mean(layer_values)[row, col])
    raise ValueError(f"unknown window {window!r}; expected one of {WINDOWS}")


def extract_segments(
    stack: RasterStack,
    pixel: tuple[int, int],
    orbit: int,
    interval_ref: TimeInterval,
    interval_new: TimeInterval,
    window: str = WINDOW_1X1,
) -> SegmentSet:
    """Pull the four series segments for one (pixel, orbit) pair.

    One sample per layer whose timestamp falls in the interval and whose
    orbit matches; NaN samples are dropped, never imputed. Empty segments
    are returned as such — the caller decides whether that disqualifies the
    pair.
    """
    col, row = pixel
    if not stack.in_bounds(col, row):
        raise IndexError(f"pixel {pixel} outside {stack.width}x{stack.height} grid")
    if orbit not in stack.orbits():
        raise ValueError(f"orbit {orbit} not present in stack (has {stack.orbits()})")

    def collect(interval: TimeInterval, pol: str) -> SeriesSegment:
        vals = [
            _window_values(layer.values, col, row, window)
            for layer in select_sorted(stack, orbit, pol, interval)
        ]
        return SeriesSegment.from_values(vals)

    return SegmentSet(
        ref_vv=collect(interval_ref, "VV"),
        ref_vh=collect(interval_ref, "VH"),
        new_vv=collect(interval_new, "VV"),
        new_vh=collect(interval_new, "VH"),
    )
