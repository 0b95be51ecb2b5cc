"""Data model and file formats for raster stacks, probability maps, point
labels, building footprints and admin regions.

Raster bundles are directories holding a diffable ``meta.json`` plus one raw
little-endian row-major float32 file per layer. NaN is the nodata value
everywhere; round-trips are bit-exact. Vector data is GeoJSON (RFC 7946).
"""

from __future__ import annotations

import datetime as dt
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from . import geometry
from .temporal import TimeInterval, parse_date

POLARIZATIONS = ("VV", "VH")
DIRECTIONS = ("ASC", "DESC")
DAMAGE_CLASSES = ("destroyed", "severely_damaged", "moderately_damaged", "other")
POSITIVE_CLASSES = ("destroyed", "severely_damaged")

META_NAME = "meta.json"


class FormatError(Exception):
    """Raised when a bundle or vector file violates the on-disk contract."""


@dataclass(frozen=True)
class GeoTransform:
    """Affine grid georeferencing (axis-aligned, no rotation).

    Maps pixel (col, row) centers to CRS coordinates
    ``(origin_x + (col + 0.5) * pixel_w, origin_y + (row + 0.5) * pixel_h)``.
    ``pixel_h`` is negative for north-up grids.
    """

    origin_x: float
    origin_y: float
    pixel_w: float
    pixel_h: float
    crs: str = "EPSG:4326"

    def __post_init__(self) -> None:
        if self.pixel_w <= 0:
            raise ValueError(f"pixel_w must be positive, got {self.pixel_w}")
        if self.pixel_h == 0:
            raise ValueError("pixel_h must be nonzero")

    def pixel_to_crs(self, col: float, row: float) -> tuple[float, float]:
        return (
            self.origin_x + (col + 0.5) * self.pixel_w,
            self.origin_y + (row + 0.5) * self.pixel_h,
        )

    def crs_to_pixel(self, x: float, y: float) -> tuple[int, int]:
        col = math.floor((x - self.origin_x) / self.pixel_w)
        row = math.floor((y - self.origin_y) / self.pixel_h)
        return col, row

    def cell_bounds(self, col: int, row: int) -> tuple[float, float, float, float]:
        """(xmin, ymin, xmax, ymax) of one pixel cell in CRS units."""
        x0 = self.origin_x + col * self.pixel_w
        x1 = x0 + self.pixel_w
        y0 = self.origin_y + row * self.pixel_h
        y1 = y0 + self.pixel_h
        return min(x0, x1), min(y0, y1), max(x0, x1), max(y0, y1)

    def cell_area(self) -> float:
        return abs(self.pixel_w * self.pixel_h)

    def to_list(self) -> list[float]:
        return [self.origin_x, self.pixel_w, 0.0, self.origin_y, 0.0, self.pixel_h]

    @classmethod
    def from_list(cls, t: Sequence[float], crs: str) -> "GeoTransform":
        if len(t) != 6 or t[2] != 0 or t[4] != 0:
            raise FormatError(f"unsupported transform {t!r}: rotation terms must be zero")
        return cls(origin_x=t[0], origin_y=t[3], pixel_w=t[1], pixel_h=t[5], crs=crs)


@dataclass(frozen=True)
class RasterLayer:
    """One acquisition: a float32 grid plus its (timestamp, orbit,
    direction, polarization) identity. NaN marks nodata."""

    values: np.ndarray
    timestamp: dt.date
    orbit: int
    direction: str
    polarization: str

    def __post_init__(self) -> None:
        if self.polarization not in POLARIZATIONS:
            raise FormatError(f"unsupported polarization {self.polarization!r}")
        if self.direction not in DIRECTIONS:
            raise FormatError(f"unsupported direction {self.direction!r}")
        v = np.asarray(self.values, dtype=np.float32)
        v.flags.writeable = False
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class RasterStack:
    """Georeferenced multi-layer backscatter cube. All layers share one grid;
    immutable once constructed, safe to share across threads."""

    width: int
    height: int
    transform: GeoTransform
    layers: tuple[RasterLayer, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "layers", tuple(self.layers))
        for i, layer in enumerate(self.layers):
            if layer.values.shape != (self.height, self.width):
                raise FormatError(
                    f"layer {i} ({layer.timestamp} orbit {layer.orbit} "
                    f"{layer.polarization}): shape {layer.values.shape} does not "
                    f"match stack {self.height}x{self.width}"
                )

    def orbits(self) -> list[int]:
        return sorted({layer.orbit for layer in self.layers})

    def select(
        self,
        orbit: Optional[int] = None,
        polarization: Optional[str] = None,
        interval: Optional[TimeInterval] = None,
    ) -> list[RasterLayer]:
        out = []
        for layer in self.layers:
            if orbit is not None and layer.orbit != orbit:
                continue
            if polarization is not None and layer.polarization != polarization:
                continue
            if interval is not None and not interval.contains(layer.timestamp):
                continue
            out.append(layer)
        return out

    def in_bounds(self, col: int, row: int) -> bool:
        return 0 <= col < self.width and 0 <= row < self.height

    def extent(self) -> tuple[float, float, float, float]:
        """(xmin, ymin, xmax, ymax) of the full grid in CRS units."""
        t = self.transform
        xs = (t.origin_x, t.origin_x + self.width * t.pixel_w)
        ys = (t.origin_y, t.origin_y + self.height * t.pixel_h)
        return min(xs), min(ys), max(xs), max(ys)


@dataclass(frozen=True)
class ProbabilityMap:
    """Single-band damage-probability raster for one assessment period,
    already fused over orbits. Finite values lie in [0, 1]; NaN is nodata."""

    width: int
    height: int
    transform: GeoTransform
    period_index: int
    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float32)
        if v.shape != (self.height, self.width):
            raise FormatError(
                f"probability grid shape {v.shape} does not match "
                f"{self.height}x{self.width}"
            )
        finite = v[np.isfinite(v)]
        if finite.size and (finite.min() < 0.0 or finite.max() > 1.0):
            raise ValueError("probability values must lie in [0, 1]")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def same_grid(self, other: "ProbabilityMap | RasterStack") -> bool:
        return (
            self.width == other.width
            and self.height == other.height
            and self.transform == other.transform
        )


@dataclass(frozen=True)
class LabelPoint:
    """Point annotation of building damage from photo-interpretation."""

    id: str
    lon: float
    lat: float
    damage_class: str
    unosat_date: dt.date
    aoi: str = ""

    @property
    def is_positive(self) -> bool:
        """Only the two most severe damage levels count as positives."""
        return self.damage_class in POSITIVE_CLASSES


Part = tuple[list[tuple[float, float]], list[list[tuple[float, float]]]]


@dataclass(frozen=True)
class BuildingFootprint:
    """Footprint polygon in stack CRS. ``parts`` holds (outer, holes) ring
    groups; multi-part geometries keep one part per polygon."""

    id: str
    parts: tuple[Part, ...]
    area_m2: float
    osm_class: Optional[str] = None

    def __post_init__(self) -> None:
        if self.area_m2 <= 0:
            raise ValueError(f"footprint {self.id}: area_m2 must be positive")

    def centroid(self) -> tuple[float, float]:
        return geometry.parts_centroid(self.parts)

    def bbox(self) -> tuple[float, float, float, float]:
        boxes = [geometry.ring_bbox(outer) for outer, _ in self.parts]
        return (
            min(b[0] for b in boxes),
            min(b[1] for b in boxes),
            max(b[2] for b in boxes),
            max(b[3] for b in boxes),
        )

    def crs_area(self) -> float:
        """Area in squared CRS units (not meters)."""
        return sum(geometry.part_area(outer, holes) for outer, holes in self.parts)


# ---------------------------------------------------------------------------
# Raster bundle I/O
# ---------------------------------------------------------------------------


def _read_f32(path: Path, width: int, height: int, what: str) -> np.ndarray:
    if not path.exists():
        raise FormatError(f"{what}: missing data file {path.name}")
    raw = np.fromfile(path, dtype="<f4")
    if raw.size != width * height:
        raise FormatError(
            f"{what}: {path.name} holds {raw.size} values, expected {width * height}"
        )
    return raw.reshape(height, width)


def _write_f32(path: Path, values: np.ndarray) -> None:
    np.ascontiguousarray(values, dtype="<f4").tofile(path)


def _write_meta(path: Path, meta: dict) -> None:
    path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def _load_meta(bundle: Path, expected_kind: str) -> dict:
    meta_path = bundle / META_NAME
    if not meta_path.exists():
        raise FormatError(f"no {META_NAME} in {bundle}")
    meta = json.loads(meta_path.read_text())
    if meta.get("kind") != expected_kind:
        raise FormatError(
            f"{bundle}: expected bundle kind {expected_kind!r}, got {meta.get('kind')!r}"
        )
    return meta


def write_stack(stack: RasterStack, bundle_path: str | Path) -> None:
    bundle = Path(bundle_path)
    bundle.mkdir(parents=True, exist_ok=True)
    layer_records = []
    for i, layer in enumerate(stack.layers):
        fname = f"layer_{i:04d}.f32"
        _write_f32(bundle / fname, layer.values)
        layer_records.append(
            {
                "file": fname,
                "timestamp": layer.timestamp.isoformat(),
                "orbit": layer.orbit,
                "direction": layer.direction,
                "polarization": layer.polarization,
            }
        )
    _write_meta(
        bundle / META_NAME,
        {
            "kind": "stack",
            "width": stack.width,
            "height": stack.height,
            "transform": stack.transform.to_list(),
            "crs": stack.transform.crs,
            "layers": layer_records,
        },
    )


def read_stack(bundle_path: str | Path) -> RasterStack:
    bundle = Path(bundle_path)
    meta = _load_meta(bundle, "stack")
    transform = GeoTransform.from_list(meta["transform"], meta["crs"])
    width, height = int(meta["width"]), int(meta["height"])
    layers = []
    for rec in meta["layers"]:
        what = f"layer {rec.get('file')} ({rec.get('timestamp')} orbit {rec.get('orbit')})"
        values = _read_f32(bundle / rec["file"], width, height, what)
        try:
            layers.append(
                RasterLayer(
                    values=values,
                    timestamp=parse_date(rec["timestamp"]),
                    orbit=int(rec["orbit"]),
                    direction=rec["direction"],
                    polarization=rec["polarization"],
                )
            )
        except FormatError as exc:
            raise FormatError(f"{what}: {exc}") from None
    return RasterStack(width=width, height=height, transform=transform, layers=tuple(layers))


def write_probability_map(pmap: ProbabilityMap, bundle_path: str | Path) -> None:
    bundle = Path(bundle_path)
    bundle.mkdir(parents=True, exist_ok=True)
    _write_f32(bundle / "values.f32", pmap.values)
    _write_meta(
        bundle / META_NAME,
        {
            "kind": "probability",
            "width": pmap.width,
            "height": pmap.height,
            "transform": pmap.transform.to_list(),
            "crs": pmap.transform.crs,
            "period_index": pmap.period_index,
            "file": "values.f32",
        },
    )


def read_probability_map(bundle_path: str | Path) -> ProbabilityMap:
    bundle = Path(bundle_path)
    meta = _load_meta(bundle, "probability")
    width, height = int(meta["width"]), int(meta["height"])
    values = _read_f32(bundle / meta["file"], width, height, "probability values")
    return ProbabilityMap(
        width=width,
        height=height,
        transform=GeoTransform.from_list(meta["transform"], meta["crs"]),
        period_index=int(meta["period_index"]),
        values=values,
    )


# ---------------------------------------------------------------------------
# UInt8 export
# ---------------------------------------------------------------------------


def encode_uint8(values: np.ndarray) -> tuple[np.ndarray, np.ndarray, int]:
    """Quantize probabilities to bytes: v -> round(v * 255).

    NaN encodes as 255 when that code point is free (no finite value rounds
    to it), else as 0; either way the returned boolean mask identifies nodata
    authoritatively. Returns (codes, nodata_mask, nan_code).
    """
    v = np.asarray(values, dtype=np.float32)
    nodata = ~np.isfinite(v)
    # scale in float64: float32 would double-round values near half-codes
    scaled = np.rint(v.astype(np.float64) * 255.0)
    nan_code = 255 if not np.any(scaled[~nodata] == 255) else 0
    scaled = np.where(nodata, nan_code, scaled)
    return scaled.astype(np.uint8), nodata, nan_code


def export_uint8(pmap: ProbabilityMap) -> tuple[np.ndarray, np.ndarray, int]:
    """Byte raster of a probability map: (codes, nodata_mask, nan_code)."""
    return encode_uint8(pmap.values)


def decode_uint8(codes: np.ndarray, nodata_mask: np.ndarray) -> np.ndarray:
    out = codes.astype(np.float32) / 255.0
    out[nodata_mask] = np.nan
    return out


def write_uint8_bundle(pmap: ProbabilityMap, bundle_path: str | Path) -> None:
    bundle = Path(bundle_path)
    bundle.mkdir(parents=True, exist_ok=True)
    codes, mask, nan_code = encode_uint8(pmap.values)
    codes.tofile(bundle / "values.u8")
    np.packbits(mask.astype(np.uint8), axis=None).tofile(bundle / "values.mask")
    _write_meta(
        bundle / META_NAME,
        {
            "kind": "uint8",
            "width": pmap.width,
            "height": pmap.height,
            "transform": pmap.transform.to_list(),
            "crs": pmap.transform.crs,
            "period_index": pmap.period_index,
            "file": "values.u8",
            "mask_file": "values.mask",
            "nan_code": nan_code,
        },
    )


def read_uint8_bundle(bundle_path: str | Path) -> ProbabilityMap:
    bundle = Path(bundle_path)
    meta = _load_meta(bundle, "uint8")
    width, height = int(meta["width"]), int(meta["height"])
    n = width * height
    codes = np.fromfile(bundle / meta["file"], dtype=np.uint8)
    if codes.size != n:
        raise FormatError(f"values.u8 holds {codes.size} bytes, expected {n}")
    bits = np.fromfile(bundle / meta["mask_file"], dtype=np.uint8)
    mask = np.unpackbits(bits, count=n).astype(bool)
    values = decode_uint8(codes.reshape(height, width), mask.reshape(height, width))
    return ProbabilityMap(
        width=width,
        height=height,
        transform=GeoTransform.from_list(meta["transform"], meta["crs"]),
        period_index=int(meta["period_index"]),
        values=values,
    )


# ---------------------------------------------------------------------------
# GeoJSON vectors
# ---------------------------------------------------------------------------


@dataclass
class LabelReadResult:
    points: list[LabelPoint]
    warnings: list[str] = field(default_factory=list)


@dataclass
class FootprintReadResult:
    footprints: list[BuildingFootprint]
    dropped_small: int = 0
    warnings: list[str] = field(default_factory=list)


def _load_feature_collection(path: str | Path) -> list[dict]:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON ({exc})") from None
    if doc.get("type") != "FeatureCollection":
        raise FormatError(f"{path}: expected a GeoJSON FeatureCollection")
    return doc.get("features", [])


def read_labels(geojson_path: str | Path) -> LabelReadResult:
    """Load point labels. Malformed features are skipped with a warning;
    the pass never aborts on a single bad feature."""
    result = LabelReadResult(points=[])
    for i, feat in enumerate(_load_feature_collection(geojson_path)):
        ident = str(feat.get("id", feat.get("properties", {}).get("id", i)))
        geom = feat.get("geometry") or {}
        props = feat.get("properties") or {}
        if geom.get("type") != "Point":
            result.warnings.append(f"feature {ident}: geometry is not a Point, skipped")
            continue
        try:
            lon, lat = (float(c) for c in geom["coordinates"][:2])
            damage_class = props["damage_class"]
            if damage_class not in DAMAGE_CLASSES:
                result.warnings.append(
                    f"feature {ident}: unknown damage_class {damage_class!r}, skipped"
                )
                continue
            point = LabelPoint(
                id=ident,
                lon=lon,
                lat=lat,
                damage_class=damage_class,
                unosat_date=parse_date(props["unosat_date"]),
                aoi=str(props.get("aoi", "")),
            )
        except (KeyError, TypeError, ValueError) as exc:
            result.warnings.append(f"feature {ident}: {exc!r}, skipped")
            continue
        result.points.append(point)
    return result


def _normalize_ring(coords: Sequence[Sequence[float]]) -> list[tuple[float, float]]:
    ring = [(float(x), float(y)) for x, y, *_ in coords]
    if len(ring) >= 2 and ring[0] == ring[-1]:
        ring = ring[:-1]
    if len(ring) < 3:
        raise ValueError("ring has fewer than 3 distinct vertices")
    return ring


def parts_from_geometry(geom: dict) -> tuple[Part, ...]:
    gtype = geom.get("type")
    if gtype == "Polygon":
        polys = [geom["coordinates"]]
    elif gtype == "MultiPolygon":
        polys = geom["coordinates"]
    else:
        raise ValueError(f"geometry type {gtype!r} is not a polygon")
    parts = []
    for rings in polys:
        outer = _normalize_ring(rings[0])
        holes = [_normalize_ring(r) for r in rings[1:]]
        parts.append((outer, holes))
    return tuple(parts)


def read_footprints(
    geojson_path: str | Path, min_area_m2: float = 50.0
) -> FootprintReadResult:
    """Load building footprints, dropping those below ``min_area_m2``.

    ``area_m2`` comes from the feature property when present; otherwise it is
    computed — equirectangular approximation for EPSG:4326-style lon/lat
    coordinates, plain shoelace for projected (metric) coordinates. The
    heuristic: coordinates with |x| <= 360 and |y| <= 90 are treated as
    degrees.
    """
    result = FootprintReadResult(footprints=[])
    for i, feat in enumerate(_load_feature_collection(geojson_path)):
        ident = str(feat.get("id", feat.get("properties", {}).get("id", i)))
        props = feat.get("properties") or {}
        try:
            parts = parts_from_geometry(feat.get("geometry") or {})
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            result.warnings.append(f"feature {ident}: {exc}, skipped")
            continue
        area = props.get("area_m2")
        if area is None:
            x0, y0 = parts[0][0][0]
            if abs(x0) <= 360.0 and abs(y0) <= 90.0:
                area = geometry.equirectangular_area_m2(parts)
            else:
                area = sum(geometry.part_area(o, h) for o, h in parts)
        area = float(area)
        if area <= 0:
            result.warnings.append(f"feature {ident}: nonpositive area, skipped")
            continue
        if area < min_area_m2:
            result.dropped_small += 1
            continue
        result.footprints.append(
            BuildingFootprint(
                id=ident,
                parts=parts,
                area_m2=area,
                osm_class=props.get("osm_class"),
            )
        )
    return result


@dataclass(frozen=True)
class Region:
    """Named admin polygon used for roll-ups."""

    id: str
    name: str
    parts: tuple[Part, ...]

    def contains(self, x: float, y: float) -> bool:
        return any(geometry.point_in_part(x, y, outer, holes) for outer, holes in self.parts)


def read_regions(geojson_path: str | Path) -> list[Region]:
    regions = []
    for i, feat in enumerate(_load_feature_collection(geojson_path)):
        props = feat.get("properties") or {}
        ident = str(feat.get("id", props.get("id", i)))
        parts = parts_from_geometry(feat.get("geometry") or {})
        regions.append(Region(id=ident, name=str(props.get("name", ident)), parts=parts))
    return regions


def labels_to_geojson(points: Sequence[LabelPoint]) -> dict:
    return {
        "type": "FeatureCollection",
        "features": [
            {
                "type": "Feature",
                "geometry": {"type": "Point", "coordinates": [p.lon, p.lat]},
                "properties": {
                    "id": p.id,
                    "damage_class": p.damage_class,
                    "unosat_date": p.unosat_date.isoformat(),
                    "aoi": p.aoi,
                },
            }
            for p in points
        ],
    }


def footprints_to_geojson(footprints: Sequence[BuildingFootprint]) -> dict:
    feats = []
    for fp in footprints:
        props = {"id": fp.id, "area_m2": fp.area_m2}
        if fp.osm_class is not None:
            props["osm_class"] = fp.osm_class
        feats.append(
            {
                "type": "Feature",
                "geometry": footprint_to_geojson_geometry(fp),
                "properties": props,
            }
        )
    return {"type": "FeatureCollection", "features": feats}


def footprint_to_geojson_geometry(fp: BuildingFootprint) -> dict:
    def close(ring: Iterable[tuple[float, float]]) -> list[list[float]]:
        pts = [[x, y] for x, y in ring]
        pts.append(pts[0])
        return pts

    if len(fp.parts) == 1:
        outer, holes = fp.parts[0]
        return {"type": "Polygon", "coordinates": [close(outer)] + [close(h) for h in holes]}
    return {
        "type": "MultiPolygon",
        "coordinates": [
            [close(outer)] + [close(h) for h in holes] for outer, holes in fp.parts
        ],
    }
