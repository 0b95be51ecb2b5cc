"""Dense per-pixel classification over raster stacks.

For every pixel and every orbit with complete segments, the classifier
scores the (reference, assessment) pair; per-pixel probabilities are the
arithmetic mean over contributing orbits. Output maps align exactly with
the input grid; tiling is a pure execution detail and never changes values.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import features
from .features import FeatureSpec, SegmentSet, WINDOW_1X1, WINDOWS
from .forest import ForestModel
from .geodata import ProbabilityMap, RasterStack
from .temporal import DEFAULT_TIMELINE, TimeInterval, Timeline


@dataclass(frozen=True)
class InferenceJob:
    stack: RasterStack
    model: ForestModel
    periods: tuple[int, ...]
    reference_period: int = 0
    window: str = WINDOW_1X1
    tile_size: int = 256
    threads: int = 1
    timeline: Timeline = DEFAULT_TIMELINE

    def __post_init__(self) -> None:
        periods = tuple(sorted(set(self.periods)))
        if not periods:
            raise ValueError("at least one assessment period is required")
        if any(p <= self.reference_period for p in periods):
            raise ValueError(
                f"reference period {self.reference_period} must precede every "
                f"assessment period {periods}"
            )
        if self.window not in WINDOWS:
            raise ValueError(f"unknown window {self.window!r}")
        if self.tile_size < 1:
            raise ValueError("tile_size must be >= 1")
        object.__setattr__(self, "periods", periods)


def check_compatibility(stack: RasterStack, model: ForestModel) -> FeatureSpec:
    """Validate the model against the stack before any tile runs."""
    spec = FeatureSpec.from_tag(model.feature_order_tag)
    if spec.length != model.n_features:
        raise ValueError(
            f"model claims {model.n_features} features but its layout tag "
            f"implies {spec.length}"
        )
    present = {layer.polarization for layer in stack.layers}
    missing = [b for b in spec.bands if b not in present]
    if missing:
        raise ValueError(f"stack lacks polarizations required by the model: {missing}")
    return spec


def infer_pixel(
    stack: RasterStack,
    model: ForestModel,
    pixel: tuple[int, int],
    interval_ref: TimeInterval,
    interval_new: TimeInterval,
    window: str = WINDOW_1X1,
) -> Optional[float]:
    """Fused damage probability for one pixel, or None when no orbit has
    all four segments."""
    spec = FeatureSpec.from_tag(model.feature_order_tag)
    probas = []
    for orbit in stack.orbits():
        segs = features.extract_segments(
            stack, pixel, orbit, interval_ref, interval_new, window=window
        )
        if not _spec_complete(segs, spec):
            continue
        fv = features.feature_vector_for_spec(segs, spec)
        probas.append(model.predict_proba_one(fv))
    if not probas:
        return None
    acc = 0.0
    for p in probas:
        acc += p
    return acc / len(probas)


def _spec_complete(segs: SegmentSet, spec: FeatureSpec) -> bool:
    by_band = {"VV": (segs.ref_vv, segs.new_vv), "VH": (segs.ref_vh, segs.new_vh)}
    return all(
        by_band[b][role].n > 0 for b in spec.bands for role in (0, 1)
    )


class _OrbitSampler:
    """Collects (n_layers, n_pixels) sample blocks for one orbit, with the
    extraction window already applied. Layer arrays are canonically ordered
    so results are invariant to stack layout."""

    def __init__(self, stack: RasterStack, orbit: int, window: str):
        self.stack = stack
        self.orbit = orbit
        self.window = window
        self._processed: dict[int, np.ndarray] = {}

    def _layer_values(self, layer_index: int) -> np.ndarray:
        if self.window == WINDOW_1X1:
            return self.stack.layers[layer_index].values
        if layer_index not in self._processed:
            self._processed[layer_index] = features.neighborhood_mean(
                self.stack.layers[layer_index].values
            )
        return self._processed[layer_index]

    def block(
        self, polarization: str, interval: TimeInterval, rows: slice, cols: slice
    ) -> np.ndarray:
        """(n_layers, n_pixels) float64 with NaN for missing samples."""
        selected = features.select_sorted(self.stack, self.orbit, polarization, interval)
        h = rows.stop - rows.start
        w = cols.stop - cols.start
        if not selected:
            return np.empty((0, h * w), dtype=np.float64)
        index_of = {id(l): i for i, l in enumerate(self.stack.layers)}
        out = np.empty((len(selected), h * w), dtype=np.float64)
        for i, layer in enumerate(selected):
            vals = self._layer_values(index_of[id(layer)])
            out[i] = np.asarray(vals[rows, cols], dtype=np.float64).reshape(-1)
        return out


def _band_stats(block: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(7, n_pixels) stats plus a per-pixel completeness mask."""
    n_pixels = block.shape[1]
    counts = np.sum(np.isfinite(block), axis=0) if block.size else np.zeros(n_pixels, int)
    ok = counts > 0
    stats = np.full((7, n_pixels), np.nan)
    if np.any(ok):
        stats[:, ok] = features.segment_stats_batch(block[:, ok])
    return stats, ok


def _infer_tile(
    sampler_by_orbit: dict[int, _OrbitSampler],
    ref_stats: dict[int, dict[str, tuple[np.ndarray, np.ndarray]]],
    model: ForestModel,
    spec: FeatureSpec,
    interval_new: TimeInterval,
    rows: slice,
    cols: slice,
) -> np.ndarray:
    n_pixels = (rows.stop - rows.start) * (cols.stop - cols.start)
    acc = np.zeros(n_pixels, dtype=np.float64)
    cnt = np.zeros(n_pixels, dtype=np.int64)
    picks = spec.stat_indices()
    for orbit in sorted(sampler_by_orbit):
        sampler = sampler_by_orbit[orbit]
        complete = np.ones(n_pixels, dtype=bool)
        new_stats: dict[str, np.ndarray] = {}
        for band in spec.bands:
            stats, ok = _band_stats(sampler.block(band, interval_new, rows, cols))
            new_stats[band] = stats
            complete &= ok
            rstats, rok = ref_stats[orbit][band]
            complete &= rok
        if not np.any(complete):
            continue
        blocks = [ref_stats[orbit][band][0][picks][:, complete] for band in spec.bands]
        blocks += [new_stats[band][picks][:, complete] for band in spec.bands]
        X = np.concatenate(blocks, axis=0).T
        proba = model.predict_proba(X)
        acc[complete] += proba
        cnt[complete] += 1
    with np.errstate(invalid="ignore"):
        out = acc / cnt
    out[cnt == 0] = np.nan
    return out.reshape(rows.stop - rows.start, cols.stop - cols.start)


def infer_map(job: InferenceJob) -> dict[int, ProbabilityMap]:
    """One fused probability map per requested period.

    Tiles partition the output grid only; every tile reads the full shared
    stack, so tile size cannot affect values — the contract is bit-identical
    output for any tile size.
    """
    spec = check_compatibility(job.stack, job.model)
    stack = job.stack
    interval_ref = job.timeline.interval(job.reference_period)
    samplers = {o: _OrbitSampler(stack, o, job.window) for o in stack.orbits()}

    full_rows = slice(0, stack.height)
    ref_stats: dict[int, dict[str, tuple[np.ndarray, np.ndarray]]] = {}
    for orbit, sampler in samplers.items():
        ref_stats[orbit] = {}
        for band in spec.bands:
            block = sampler.block(band, interval_ref, full_rows, slice(0, stack.width))
            ref_stats[orbit][band] = _band_stats(block)

    tiles = []
    for r0 in range(0, stack.height, job.tile_size):
        for c0 in range(0, stack.width, job.tile_size):
            tiles.append(
                (
                    slice(r0, min(r0 + job.tile_size, stack.height)),
                    slice(c0, min(c0 + job.tile_size, stack.width)),
                )
            )

    out: dict[int, ProbabilityMap] = {}
    for period in job.periods:
        interval_new = job.timeline.interval(period)
        grid = np.full((stack.height, stack.width), np.nan, dtype=np.float64)

        def run_tile(tile: tuple[slice, slice], _interval=interval_new) -> None:
            rows, cols = tile
            # ref stats are precomputed full-grid; slice the tile's columns out
            tile_ref = {
                orbit: {
                    band: (
                        stats.reshape(7, stack.height, stack.width)[:, rows, cols].reshape(7, -1),
                        ok.reshape(stack.height, stack.width)[rows, cols].reshape(-1),
                    )
                    for band, (stats, ok) in bands.items()
                }
                for orbit, bands in ref_stats.items()
            }
            grid[rows, cols] = _infer_tile(
                samplers, tile_ref, job.model, spec, _interval, rows, cols
            )

        if job.threads > 1:
            with ThreadPoolExecutor(max_workers=job.threads) as pool:
                list(pool.map(run_tile, tiles))
        else:
            for tile in tiles:
                run_tile(tile)

        out[period] = ProbabilityMap(
            width=stack.width,
            height=stack.height,
            transform=stack.transform,
            period_index=period,
            values=grid.astype(np.float32),
        )
    return out
