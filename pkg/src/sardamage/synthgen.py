"""Deterministic synthetic scenarios with known ground truth.

Generates raster stacks, damage labels, building footprints and a truth
table from a seeded recipe: per-pixel series are baseline + seasonal
sinusoid + Gaussian speckle (all in dB), plus an event signature after the
event date. Signatures cover steps of either sign, variance bursts, and
"none" (damage invisible at sensor resolution), since real destruction can
raise, lower, or barely touch backscatter.

Every draw comes from salted, seeded streams: the same scenario always
produces bit-identical outputs.
"""

from __future__ import annotations

import datetime as dt
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from . import geometry
from .geodata import (
    BuildingFootprint,
    GeoTransform,
    LabelPoint,
    RasterLayer,
    RasterStack,
)
from .temporal import (
    DEFAULT_TIMELINE,
    INVASION_DATE,
    LabelContext,
    assign_label,
    parse_date,
)

SIGNATURES = ("step", "variance-burst", "none")

_BASE_LEVEL_DB = {"VV": -10.0, "VH": -16.0}
_BASELINE_SPREAD_DB = 1.5
_PIXEL_SIZE_M = 10.0
_ORIGIN = (500_000.0, 5_500_000.0)
_CRS = "EPSG:32636"

_SALTS = {
    "placement": 0x1,
    "phase": 0x2,
    "baseline": 0x3,
    "speckle": 0x4,
    "dropout": 0x5,
    "burst": 0x6,
    "intact": 0x7,
}

_M64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _M64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _M64
    return (z ^ (z >> 31)) & _M64


def _stream(seed: int, name: str) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(_splitmix64(seed ^ _SALTS[name])))


@dataclass(frozen=True)
class OrbitSpec:
    id: int
    revisit_days: int
    direction: str = "ASC"

    def __post_init__(self) -> None:
        if self.revisit_days not in (6, 12):
            raise ValueError("revisit_days must be 6 or 12")


@dataclass(frozen=True)
class Event:
    id: str
    pixels: tuple[tuple[int, int], ...]
    date: dt.date
    signature: str = "step"
    delta_db: float = 3.0
    burst_sigma_db: float = 3.0

    def __post_init__(self) -> None:
        if self.signature not in SIGNATURES:
            raise ValueError(f"unknown signature {self.signature!r}")
        if not self.pixels:
            raise ValueError(f"event {self.id} has no pixels")


@dataclass(frozen=True)
class Scenario:
    seed: int
    width: int = 64
    height: int = 64
    orbits: tuple[OrbitSpec, ...] = (
        OrbitSpec(id=43, revisit_days=12, direction="ASC"),
        OrbitSpec(id=116, revisit_days=12, direction="DESC"),
    )
    speckle_sigma_db: float = 1.0
    seasonal_amplitude_db: float = 0.0
    dropout_fraction: float = 0.0
    events: tuple[Event, ...] = ()
    n_intact_buildings: int = 20
    building_block: int = 2

    def __post_init__(self) -> None:
        if not 2 <= len(self.orbits) <= 4:
            raise ValueError("scenario needs 2 to 4 orbits")
        if not self.events:
            raise ValueError("scenario needs at least one event")
        horizon = DEFAULT_TIMELINE.interval(12).end
        event_pixels = set()
        for ev in self.events:
            if ev.date <= INVASION_DATE:
                raise ValueError(
                    f"event {ev.id} dated {ev.date} precedes the invasion; "
                    "damage events must postdate it"
                )
            if ev.date > horizon:
                raise ValueError(f"event {ev.id} dated {ev.date} is past the timeline")
            for px in ev.pixels:
                if not (0 <= px[0] < self.width and 0 <= px[1] < self.height):
                    raise ValueError(f"event {ev.id}: pixel {px} outside grid")
                event_pixels.add(px)
        if len(event_pixels) >= self.width * self.height:
            raise ValueError("scenario must leave intact pixels")


@dataclass
class TruthRecord:
    event_id: str
    event_date: dt.date
    unosat_date: dt.date
    assignments: dict[int, int]


@dataclass
class TruthTable:
    """Eq-style period assignments per label point, plus which buildings
    are physically damaged."""

    points: dict[str, TruthRecord]
    damaged_buildings: set[str]

    def to_json(self) -> str:
        doc = {
            "points": {
                pid: {
                    "event_id": rec.event_id,
                    "event_date": rec.event_date.isoformat(),
                    "unosat_date": rec.unosat_date.isoformat(),
                    "assignments": {str(k): v for k, v in rec.assignments.items()},
                }
                for pid, rec in sorted(self.points.items())
            },
            "damaged_buildings": sorted(self.damaged_buildings),
        }
        return json.dumps(doc, indent=2, sort_keys=True)


def _acquisition_dates(orbit_index: int, revisit_days: int) -> list[dt.date]:
    start = DEFAULT_TIMELINE.interval(0).start + dt.timedelta(days=3 * orbit_index)
    end = DEFAULT_TIMELINE.interval(12).end
    dates = []
    d = start
    while d <= end:
        dates.append(d)
        d += dt.timedelta(days=revisit_days)
    return dates


def _seasonal_angle(date: dt.date) -> float:
    days = (date - dt.date(2020, 1, 1)).days
    return 2.0 * np.pi * days / 365.25


def _pixel_rect(
    transform: GeoTransform, col0: int, row0: int, col1: int, row1: int, inset: float
) -> list[tuple[float, float]]:
    """CCW rectangle over the pixel block [col0..col1] x [row0..row1],
    inset by a fraction of a pixel so it stays strictly inside."""
    x_lo = transform.origin_x + (col0 + inset) * transform.pixel_w
    x_hi = transform.origin_x + (col1 + 1 - inset) * transform.pixel_w
    y_a = transform.origin_y + (row0 + inset) * transform.pixel_h
    y_b = transform.origin_y + (row1 + 1 - inset) * transform.pixel_h
    y_lo, y_hi = sorted((y_a, y_b))
    return [(x_lo, y_lo), (x_hi, y_lo), (x_hi, y_hi), (x_lo, y_hi)]


_OSM_CLASSES = ("residential", "industrial", "commercial", None)


def generate(
    scenario: Scenario,
) -> tuple[RasterStack, list[LabelPoint], list[BuildingFootprint], TruthTable]:
    """Materialize a scenario: stack + labels + footprints + truth."""
    h, w = scenario.height, scenario.width
    transform = GeoTransform(
        origin_x=_ORIGIN[0],
        origin_y=_ORIGIN[1] + h * _PIXEL_SIZE_M,
        pixel_w=_PIXEL_SIZE_M,
        pixel_h=-_PIXEL_SIZE_M,
        crs=_CRS,
    )

    phase = _stream(scenario.seed, "phase").uniform(0.0, 2.0 * np.pi, size=(h, w))
    baseline_rng = _stream(scenario.seed, "baseline")
    baselines: dict[tuple[int, str], np.ndarray] = {}
    for orbit in scenario.orbits:
        for pol in ("VV", "VH"):
            baselines[(orbit.id, pol)] = baseline_rng.normal(
                _BASE_LEVEL_DB[pol], _BASELINE_SPREAD_DB, size=(h, w)
            )

    speckle_rng = _stream(scenario.seed, "speckle")
    dropout_rng = _stream(scenario.seed, "dropout")
    burst_rng = _stream(scenario.seed, "burst")
    has_burst = any(ev.signature == "variance-burst" for ev in scenario.events)

    step_masks = []
    burst_masks = []
    for ev in scenario.events:
        mask = np.zeros((h, w), dtype=bool)
        for col, row in ev.pixels:
            mask[row, col] = True
        if ev.signature == "step":
            step_masks.append((ev, mask))
        elif ev.signature == "variance-burst":
            burst_masks.append((ev, mask))

    layers = []
    for oi, orbit in enumerate(scenario.orbits):
        dates = _acquisition_dates(oi, orbit.revisit_days)
        for date in dates:
            seasonal = scenario.seasonal_amplitude_db * np.sin(
                _seasonal_angle(date) + phase
            )
            for pol in ("VV", "VH"):
                values = baselines[(orbit.id, pol)] + seasonal
                if scenario.speckle_sigma_db > 0:
                    values = values + speckle_rng.normal(
                        0.0, scenario.speckle_sigma_db, size=(h, w)
                    )
                for ev, mask in step_masks:
                    if date >= ev.date:
                        values = np.where(mask, values + ev.delta_db, values)
                if has_burst:
                    burst = burst_rng.normal(0.0, 1.0, size=(h, w))
                    for ev, mask in burst_masks:
                        if date >= ev.date:
                            values = np.where(
                                mask, values + ev.burst_sigma_db * burst, values
                            )
                if scenario.dropout_fraction > 0:
                    drop = dropout_rng.uniform(size=(h, w)) < scenario.dropout_fraction
                    values = np.where(drop, np.nan, values)
                values = np.clip(values, -50.0, 10.0)
                layers.append(
                    RasterLayer(
                        values=values.astype(np.float32),
                        timestamp=date,
                        orbit=orbit.id,
                        direction=orbit.direction,
                        polarization=pol,
                    )
                )

    stack = RasterStack(width=w, height=h, transform=transform, layers=tuple(layers))

    labels: list[LabelPoint] = []
    truth_points: dict[str, TruthRecord] = {}
    damaged_buildings: set[str] = set()
    footprints: list[BuildingFootprint] = []

    for k, ev in enumerate(scenario.events):
        unosat = ev.date + dt.timedelta(days=30)
        ctx = LabelContext(unosat_date=unosat)
        assignments = {
            n: assign_label(DEFAULT_TIMELINE.interval(n).end, ctx) for n in range(1, 13)
        }
        damage_class = "destroyed" if k % 2 == 0 else "severely_damaged"
        for j, (col, row) in enumerate(ev.pixels):
            x, y = transform.pixel_to_crs(col, row)
            pid = f"{ev.id}_px{j}"
            labels.append(
                LabelPoint(
                    id=pid,
                    lon=x,
                    lat=y,
                    damage_class=damage_class,
                    unosat_date=unosat,
                    aoi="synthetic",
                )
            )
            truth_points[pid] = TruthRecord(
                event_id=ev.id,
                event_date=ev.date,
                unosat_date=unosat,
                assignments=assignments,
            )
        cols = [p[0] for p in ev.pixels]
        rows = [p[1] for p in ev.pixels]
        ring = _pixel_rect(transform, min(cols), min(rows), max(cols), max(rows), 0.1)
        bid = f"b_{ev.id}"
        footprints.append(
            BuildingFootprint(
                id=bid,
                parts=((ring, []),),
                area_m2=geometry.ring_area(ring),
                osm_class=_OSM_CLASSES[k % len(_OSM_CLASSES)],
            )
        )
        damaged_buildings.add(bid)

    event_pixels = {px for ev in scenario.events for px in ev.pixels}
    intact = _intact_blocks(
        scenario, event_pixels, _stream(scenario.seed, "intact"),
        scenario.n_intact_buildings,
    )
    for k, (col, row) in enumerate(intact):
        b = scenario.building_block
        ring = _pixel_rect(
            transform, col, row, min(col + b - 1, w - 1), min(row + b - 1, h - 1), 0.1
        )
        footprints.append(
            BuildingFootprint(
                id=f"b_intact{k}",
                parts=((ring, []),),
                area_m2=geometry.ring_area(ring),
                osm_class=_OSM_CLASSES[k % len(_OSM_CLASSES)],
            )
        )

    truth = TruthTable(points=truth_points, damaged_buildings=damaged_buildings)
    return stack, labels, footprints, truth


def _intact_blocks(
    scenario: Scenario,
    event_pixels: set[tuple[int, int]],
    rng: np.random.Generator,
    count: int,
) -> list[tuple[int, int]]:
    """Top-left corners of intact building blocks, clear of event pixels."""
    b = scenario.building_block
    candidates = []
    for row in range(0, scenario.height - b, b + 1):
        for col in range(0, scenario.width - b, b + 1):
            block = {(c, r) for c in range(col, col + b) for r in range(row, row + b)}
            if not block & event_pixels:
                candidates.append((col, row))
    if len(candidates) < count:
        raise ValueError(
            f"grid too crowded: only {len(candidates)} intact spots for "
            f"{count} buildings"
        )
    picks = rng.choice(len(candidates), size=count, replace=False)
    return [candidates[i] for i in sorted(int(i) for i in picks)]


# ---------------------------------------------------------------------------
# Presets and scenario files
# ---------------------------------------------------------------------------


def _expand_random_events(doc: dict, seed: int, width: int, height: int) -> list[Event]:
    cfg = doc["random_events"]
    count = int(cfg["count"])
    block = int(cfg.get("block", 2))
    delta = float(cfg.get("delta_db", 3.0))
    signature = cfg.get("signature", "step")
    sign_mix = bool(cfg.get("sign_mix", True))
    d0 = parse_date(cfg.get("date_start", "2022-04-15"))
    d1 = parse_date(cfg.get("date_end", "2023-05-15"))
    span = (d1 - d0).days
    rng = _stream(seed, "placement")

    candidates = []
    for row in range(0, height - block, block + 1):
        for col in range(0, width - block, block + 1):
            candidates.append((col, row))
    if len(candidates) < count:
        raise ValueError("grid too small for the requested event count")
    picks = rng.choice(len(candidates), size=count, replace=False)
    offsets = rng.integers(0, span + 1, size=count)
    signs = rng.integers(0, 2, size=count) * 2 - 1 if sign_mix else np.ones(count)
    events = []
    for k in range(count):
        col, row = candidates[int(picks[k])]
        pixels = tuple(
            (c, r) for r in range(row, row + block) for c in range(col, col + block)
        )
        events.append(
            Event(
                id=f"ev{k}",
                pixels=pixels,
                date=d0 + dt.timedelta(days=int(offsets[k])),
                signature=signature,
                delta_db=float(signs[k]) * delta,
                burst_sigma_db=float(cfg.get("burst_sigma_db", 3.0)),
            )
        )
    return events


def scenario_from_dict(doc: dict, seed: int) -> Scenario:
    width = int(doc.get("width", 64))
    height = int(doc.get("height", 64))
    orbits = tuple(
        OrbitSpec(
            id=int(o["id"]),
            revisit_days=int(o.get("revisit_days", 12)),
            direction=o.get("direction", "ASC"),
        )
        for o in doc.get(
            "orbits",
            [
                {"id": 43, "revisit_days": 12, "direction": "ASC"},
                {"id": 116, "revisit_days": 12, "direction": "DESC"},
            ],
        )
    )
    events = [
        Event(
            id=str(e["id"]),
            pixels=tuple((int(c), int(r)) for c, r in e["pixels"]),
            date=parse_date(e["date"]),
            signature=e.get("signature", "step"),
            delta_db=float(e.get("delta_db", 3.0)),
            burst_sigma_db=float(e.get("burst_sigma_db", 3.0)),
        )
        for e in doc.get("events", [])
    ]
    if "random_events" in doc:
        events.extend(_expand_random_events(doc, seed, width, height))
    return Scenario(
        seed=seed,
        width=width,
        height=height,
        orbits=orbits,
        speckle_sigma_db=float(doc.get("speckle_sigma_db", 1.0)),
        seasonal_amplitude_db=float(doc.get("seasonal_amplitude_db", 0.0)),
        dropout_fraction=float(doc.get("dropout_fraction", 0.0)),
        events=tuple(events),
        n_intact_buildings=int(doc.get("n_intact_buildings", 20)),
        building_block=int(doc.get("building_block", 2)),
    )


def preset_names() -> list[str]:
    files = resources.files("sardamage").joinpath("presets")
    return sorted(p.name.removesuffix(".json") for p in files.iterdir() if p.name.endswith(".json"))


def load_preset(name: str, seed: int) -> Scenario:
    """Load a named preset; the seed drives both placement and noise."""
    path = resources.files("sardamage").joinpath("presets", f"{name}.json")
    try:
        doc = json.loads(path.read_text())
    except FileNotFoundError:
        raise ValueError(f"unknown preset {name!r}; available: {preset_names()}") from None
    return scenario_from_dict(doc, seed)


def load_scenario_file(path: str | Path, seed: int) -> Scenario:
    return scenario_from_dict(json.loads(Path(path).read_text()), seed)


def scenario_to_dict(scenario: Scenario) -> dict:
    """Fully expanded scenario record, written next to generated bundles so
    a run can be reproduced without the preset file."""
    return {
        "seed": scenario.seed,
        "width": scenario.width,
        "height": scenario.height,
        "orbits": [
            {"id": o.id, "revisit_days": o.revisit_days, "direction": o.direction}
            for o in scenario.orbits
        ],
        "speckle_sigma_db": scenario.speckle_sigma_db,
        "seasonal_amplitude_db": scenario.seasonal_amplitude_db,
        "dropout_fraction": scenario.dropout_fraction,
        "n_intact_buildings": scenario.n_intact_buildings,
        "building_block": scenario.building_block,
        "events": [
            {
                "id": ev.id,
                "pixels": [list(p) for p in ev.pixels],
                "date": ev.date.isoformat(),
                "signature": ev.signature,
                "delta_db": ev.delta_db,
                "burst_sigma_db": ev.burst_sigma_db,
            }
            for ev in scenario.events
        ],
    }
