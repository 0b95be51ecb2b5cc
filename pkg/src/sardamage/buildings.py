"""Building-level damage: overlap-weighted likelihoods, the thresholded
temporal decision rule, and regional/class roll-ups.

A building's likelihood for a period is the weighted mean of the
probability pixels it overlaps, weights proportional to the exact clipped
intersection areas and normalized to sum to 1. The final verdict at
threshold t is: damaged iff some post-invasion period reaches t while no
pre-invasion period does — pre-existing change is not war damage.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Optional, Sequence

from . import geometry
from .geodata import (
    BuildingFootprint,
    GeoTransform,
    ProbabilityMap,
    Region,
    footprint_to_geojson_geometry,
)

#: Operating threshold giving 90% target precision on the reference test set.
DEFAULT_THRESHOLD = 0.655

PRE_INVASION_PERIODS = (1, 2, 3, 4)
POST_INVASION_PERIODS = (5, 6, 7, 8, 9, 10, 11, 12)

UNASSIGNED_REGION = "unassigned"


class NoOverlapError(ValueError):
    """Footprint does not intersect the map grid."""


@dataclass(frozen=True)
class PixelWeight:
    col: int
    row: int
    weight: float


def overlap_weights(
    footprint: BuildingFootprint, transform: GeoTransform, width: int, height: int
) -> list[PixelWeight]:
    """Exact overlap fractions between a footprint and the grid cells.

    Each candidate cell in the footprint's bounding box is clipped against
    the polygon (Sutherland-Hodgman); weights are intersection areas
    normalized by the footprint area inside the grid extent, so they sum
    to 1 for any building with finite overlap.
    """
    xmin, ymin, xmax, ymax = footprint.bbox()
    c0, r0 = transform.crs_to_pixel(xmin, ymin)
    c1, r1 = transform.crs_to_pixel(xmax, ymax)
    col_lo, col_hi = sorted((c0, c1))
    row_lo, row_hi = sorted((r0, r1))
    col_lo, col_hi = max(col_lo, 0), min(col_hi, width - 1)
    row_lo, row_hi = max(row_lo, 0), min(row_hi, height - 1)
    if col_lo > col_hi or row_lo > row_hi:
        raise NoOverlapError(f"footprint {footprint.id} lies outside the grid")

    entries = []
    total = 0.0
    for row in range(row_lo, row_hi + 1):
        for col in range(col_lo, col_hi + 1):
            cell = transform.cell_bounds(col, row)
            area = sum(
                geometry.clipped_part_area(outer, holes, *cell)
                for outer, holes in footprint.parts
            )
            if area > 0.0:
                entries.append((col, row, area))
                total += area
    if total <= 0.0:
        raise NoOverlapError(f"footprint {footprint.id} has no positive overlap")
    return [PixelWeight(col=c, row=r, weight=a / total) for c, r, a in entries]


def building_likelihood(
    weights: Sequence[PixelWeight], pmap: ProbabilityMap
) -> Optional[float]:
    """Weighted mean probability under the footprint.

    Nodata pixels are excluded and the remaining weights renormalized; a
    building whose pixels are all nodata gets None for the period.
    """
    acc = 0.0
    wsum = 0.0
    for pw in weights:
        v = float(pmap.values[pw.row, pw.col])
        if math.isnan(v):
            continue
        acc += pw.weight * v
        wsum += pw.weight
    if wsum == 0.0:
        return None
    return acc / wsum


def final_verdict(per_period: dict[int, Optional[float]], threshold: float) -> int:
    """Aggregate per-period likelihoods into the binary damage verdict.

    Damaged (1) iff the maximum over post-invasion periods reaches the
    threshold while the maximum over pre-invasion periods stays below it.
    Periods with no likelihood (None / missing) are excluded from both
    maxima; with no usable pre-invasion period the pre clause is vacuously
    true, with no usable post-invasion period the verdict is 0. Use
    ``verdict_flag`` to surface those low-confidence cases.
    """
    post = [per_period[p] for p in POST_INVASION_PERIODS if per_period.get(p) is not None]
    pre = [per_period[p] for p in PRE_INVASION_PERIODS if per_period.get(p) is not None]
    if not post:
        return 0
    post_ok = max(post) >= threshold
    pre_ok = (not pre) or max(pre) < threshold
    return 1 if (post_ok and pre_ok) else 0


def verdict_flag(per_period: dict[int, Optional[float]]) -> Optional[str]:
    """Low-confidence annotations for incomplete period coverage."""
    has_post = any(per_period.get(p) is not None for p in POST_INVASION_PERIODS)
    has_pre = any(per_period.get(p) is not None for p in PRE_INVASION_PERIODS)
    if not has_post:
        return "no_post_invasion_coverage"
    if not has_pre:
        return "no_pre_invasion_coverage"
    return None


@dataclass
class BuildingDamage:
    """Stored per-period likelihoods plus the verdict at one threshold.

    The verdict is always recomputable from the likelihoods for any other
    threshold — that is what makes the dashboard slider free."""

    building: BuildingFootprint
    per_period: dict[int, Optional[float]]
    threshold_used: float = DEFAULT_THRESHOLD
    flag: Optional[str] = None

    @property
    def final(self) -> int:
        return final_verdict(self.per_period, self.threshold_used)

    def verdict_at(self, threshold: float) -> int:
        return final_verdict(self.per_period, threshold)


def assess_buildings(
    footprints: Sequence[BuildingFootprint],
    maps: dict[int, ProbabilityMap],
    threshold: float = DEFAULT_THRESHOLD,
) -> list[BuildingDamage]:
    """Per-period likelihoods for every footprint over the given maps.
    Footprints outside the grid are skipped."""
    if not maps:
        raise ValueError("no probability maps supplied")
    first = next(iter(maps.values()))
    for pmap in maps.values():
        if not pmap.same_grid(first):
            raise ValueError("probability maps do not share one grid")
    out = []
    for fp in footprints:
        try:
            weights = overlap_weights(fp, first.transform, first.width, first.height)
        except NoOverlapError:
            continue
        per_period: dict[int, Optional[float]] = {
            period: building_likelihood(weights, pmap) for period, pmap in maps.items()
        }
        out.append(
            BuildingDamage(
                building=fp,
                per_period=per_period,
                threshold_used=threshold,
                flag=verdict_flag(per_period),
            )
        )
    return out


@dataclass(frozen=True)
class RegionRollup:
    region_id: str
    name: str
    n_buildings: int
    n_damaged: int

    @property
    def pct_damaged(self) -> float:
        return 100.0 * self.n_damaged / self.n_buildings if self.n_buildings else 0.0


def rollup(
    buildings: Sequence[BuildingDamage],
    regions: Sequence[Region],
    threshold: float = DEFAULT_THRESHOLD,
) -> list[RegionRollup]:
    """Damage counts per region, assigning each building by footprint
    centroid. Containment ties break toward the lowest region id; centroids
    in no region land in the "unassigned" bucket."""
    ordered = sorted(regions, key=lambda r: r.id)
    counts: dict[str, list[int]] = {r.id: [0, 0] for r in ordered}
    counts[UNASSIGNED_REGION] = [0, 0]
    names = {r.id: r.name for r in ordered}
    names[UNASSIGNED_REGION] = UNASSIGNED_REGION
    for bd in buildings:
        cx, cy = bd.building.centroid()
        region_id = UNASSIGNED_REGION
        for region in ordered:
            if region.contains(cx, cy):
                region_id = region.id
                break
        counts[region_id][0] += 1
        counts[region_id][1] += bd.verdict_at(threshold)
    out = [
        RegionRollup(region_id=rid, name=names[rid], n_buildings=c[0], n_damaged=c[1])
        for rid, c in counts.items()
        if not (rid == UNASSIGNED_REGION and c[0] == 0)
    ]
    return out


@dataclass(frozen=True)
class ClassCount:
    osm_class: str
    n_buildings: int
    n_damaged: int

    @property
    def pct_damaged(self) -> float:
        return 100.0 * self.n_damaged / self.n_buildings if self.n_buildings else 0.0


def class_rollup(
    buildings: Sequence[BuildingDamage], threshold: float = DEFAULT_THRESHOLD
) -> list[ClassCount]:
    """Damage counts per building class, restricted to classified buildings,
    sorted by damaged count descending (then class name for stability)."""
    counts: dict[str, list[int]] = {}
    for bd in buildings:
        cls = bd.building.osm_class
        if cls is None:
            continue
        slot = counts.setdefault(cls, [0, 0])
        slot[0] += 1
        slot[1] += bd.verdict_at(threshold)
    out = [
        ClassCount(osm_class=c, n_buildings=v[0], n_damaged=v[1]) for c, v in counts.items()
    ]
    out.sort(key=lambda cc: (-cc.n_damaged, cc.osm_class))
    return out


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def buildings_to_geojson(
    buildings: Sequence[BuildingDamage], threshold: float
) -> dict:
    """FeatureCollection with per-period likelihoods (y_T1..y_T12, nullable)
    and the final verdict at the given threshold."""
    feats = []
    for bd in buildings:
        props: dict = {"id": bd.building.id, "area_m2": bd.building.area_m2}
        if bd.building.osm_class is not None:
            props["osm_class"] = bd.building.osm_class
        for period in range(1, 13):
            v = bd.per_period.get(period)
            props[f"y_T{period}"] = None if v is None else round(float(v), 6)
        props["final"] = bd.verdict_at(threshold)
        props["threshold"] = threshold
        if bd.flag:
            props["flag"] = bd.flag
        feats.append(
            {
                "type": "Feature",
                "geometry": footprint_to_geojson_geometry(bd.building),
                "properties": props,
            }
        )
    return {"type": "FeatureCollection", "features": feats}


def damages_from_geojson(doc: dict) -> list[BuildingDamage]:
    """Rebuild per-period likelihood records from a previously written
    FeatureCollection (the stored artifact behind threshold sliders)."""
    from .geodata import parts_from_geometry

    out = []
    for feat in doc.get("features", []):
        props = feat.get("properties") or {}
        parts = parts_from_geometry(feat.get("geometry") or {})
        fp = BuildingFootprint(
            id=str(props["id"]),
            parts=parts,
            area_m2=float(props.get("area_m2", 1.0)),
            osm_class=props.get("osm_class"),
        )
        per_period = {
            n: props.get(f"y_T{n}") for n in range(1, 13) if f"y_T{n}" in props
        }
        out.append(
            BuildingDamage(
                building=fp,
                per_period=per_period,
                threshold_used=float(props.get("threshold", DEFAULT_THRESHOLD)),
                flag=props.get("flag"),
            )
        )
    return out


def rollup_to_csv(rollups: Sequence[RegionRollup]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["region_id", "name", "n_buildings", "n_damaged", "pct"])
    for r in rollups:
        writer.writerow([r.region_id, r.name, r.n_buildings, r.n_damaged, f"{r.pct_damaged:.2f}"])
    return buf.getvalue()


def class_rollup_to_csv(rollups: Sequence[ClassCount]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["osm_class", "n_buildings", "n_damaged", "pct"])
    for r in rollups:
        writer.writerow([r.osm_class, r.n_buildings, r.n_damaged, f"{r.pct_damaged:.2f}"])
    return buf.getvalue()
