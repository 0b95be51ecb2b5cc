"""Local HTTP assessment service backing the dashboard.

Runs damage assessments for user-specified regions and periods, then serves
buildings, roll-ups and per-pixel time series. Per-period building
likelihoods are the persisted unit of result: threshold changes are pure
reads and never trigger model inference (the /metrics counter proves it).

Jobs are identified by a hash of their request, so identical requests share
one result and payloads are byte-identical; completed results survive a
restart via the work directory.
"""

from __future__ import annotations

import hashlib
import json
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from fastapi import FastAPI, HTTPException, Query, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import FileResponse, PlainTextResponse
from PIL import Image
from pydantic import BaseModel

from . import buildings as bmod
from . import forest, geodata, inference
from .features import WINDOW_1X1, WINDOWS
from .geodata import ProbabilityMap, RasterStack
from .temporal import DEFAULT_TIMELINE, Timeline

DEFAULT_THRESHOLD = bmod.DEFAULT_THRESHOLD


class AssessmentRequest(BaseModel):
    bbox: list[float]
    periods: list[int]
    reference_period: int = 0
    window: str = WINDOW_1X1
    model_id: Optional[str] = None


@dataclass
class JobRecord:
    id: str
    status: str  # queued | running | done | error
    request: dict
    progress: float = 0.0
    error: Optional[str] = None
    result: Optional[dict] = None


@dataclass
class ServiceState:
    stack: RasterStack
    model: forest.ForestModel
    model_id: str
    footprints: list
    regions: list
    workdir: Path
    threads: int
    max_pixels: int
    timeline: Timeline
    jobs: dict[str, JobRecord] = field(default_factory=dict)
    building_periods: dict[str, dict[int, Optional[float]]] = field(default_factory=dict)
    building_geoms: dict[str, object] = field(default_factory=dict)
    counters: dict[str, int] = field(default_factory=lambda: {
        "inference_calls": 0,
        "assess_requests": 0,
        "jobs_completed": 0,
        "buildings_requests": 0,
        "rollup_requests": 0,
        "timeseries_requests": 0,
    })
    lock: threading.Lock = field(default_factory=threading.Lock)
    pool: Optional[ThreadPoolExecutor] = None


def _job_id(request: dict) -> str:
    canonical = json.dumps(request, sort_keys=True)
    return hashlib.sha1(canonical.encode()).hexdigest()[:12]


def _crop_stack(stack: RasterStack, bbox: list[float]) -> tuple[RasterStack, int, int]:
    """Sub-stack covering the bbox, snapped to pixel boundaries."""
    minx, miny, maxx, maxy = bbox
    t = stack.transform
    cols = sorted((t.crs_to_pixel(minx, miny)[0], t.crs_to_pixel(maxx, maxy)[0]))
    rows = sorted((t.crs_to_pixel(minx, miny)[1], t.crs_to_pixel(maxx, maxy)[1]))
    c0, c1 = max(cols[0], 0), min(cols[1], stack.width - 1)
    r0, r1 = max(rows[0], 0), min(rows[1], stack.height - 1)
    if c0 > c1 or r0 > r1:
        raise ValueError("bbox does not intersect the stack extent")
    sub_transform = geodata.GeoTransform(
        origin_x=t.origin_x + c0 * t.pixel_w,
        origin_y=t.origin_y + r0 * t.pixel_h,
        pixel_w=t.pixel_w,
        pixel_h=t.pixel_h,
        crs=t.crs,
    )
    layers = tuple(
        geodata.RasterLayer(
            values=np.ascontiguousarray(l.values[r0 : r1 + 1, c0 : c1 + 1]),
            timestamp=l.timestamp,
            orbit=l.orbit,
            direction=l.direction,
            polarization=l.polarization,
        )
        for l in stack.layers
    )
    sub = RasterStack(
        width=c1 - c0 + 1, height=r1 - r0 + 1, transform=sub_transform, layers=layers
    )
    return sub, c0, r0


def _write_job_result(
    state: ServiceState, job: JobRecord, maps: dict[int, ProbabilityMap], damages
) -> dict:
    job_dir = state.workdir / "jobs" / job.id
    job_dir.mkdir(parents=True, exist_ok=True)
    rasters = {}
    meta: dict = {"periods": {}}
    for period, pmap in sorted(maps.items()):
        codes, mask, nan_code = geodata.encode_uint8(pmap.values)
        png_name = f"period_{period:02d}.png"
        Image.fromarray(codes, mode="L").save(job_dir / png_name)
        mask_name = f"period_{period:02d}.mask.png"
        Image.fromarray((mask * 255).astype(np.uint8), mode="L").save(job_dir / mask_name)
        rasters[str(period)] = {"png": png_name, "mask": mask_name}
        meta["periods"][str(period)] = {"nan_code": nan_code}
    first = next(iter(maps.values()))
    meta.update(
        {
            "width": first.width,
            "height": first.height,
            "transform": first.transform.to_list(),
            "crs": first.transform.crs,
        }
    )
    (job_dir / "meta.json").write_text(json.dumps(meta, indent=1, sort_keys=True))
    buildings_doc = bmod.buildings_to_geojson(damages, threshold=DEFAULT_THRESHOLD)
    (job_dir / "buildings.geojson").write_text(
        json.dumps(buildings_doc, indent=1, sort_keys=True)
    )
    result = {
        "rasters": rasters,
        "buildings": "buildings.geojson",
        "meta": "meta.json",
        "n_buildings": len(damages),
    }
    (job_dir / "result.json").write_text(json.dumps(result, indent=1, sort_keys=True))
    return result


def _merge_damages(state: ServiceState, damages) -> None:
    with state.lock:
        for d in damages:
            store = state.building_periods.setdefault(d.building.id, {})
            for period, value in d.per_period.items():
                if value is not None:
                    store[period] = value
            state.building_geoms[d.building.id] = d.building


def _run_job(state: ServiceState, job: JobRecord) -> None:
    try:
        with state.lock:
            job.status = "running"
            job.progress = 0.1
        req = job.request
        sub, _, _ = _crop_stack(state.stack, req["bbox"])
        inference_job = inference.InferenceJob(
            stack=sub,
            model=state.model,
            periods=tuple(req["periods"]),
            reference_period=req["reference_period"],
            window=req["window"],
            tile_size=256,
            threads=1,
            timeline=state.timeline,
        )
        with state.lock:
            state.counters["inference_calls"] += 1
        maps = inference.infer_map(inference_job)
        with state.lock:
            job.progress = 0.7
        damages = bmod.assess_buildings(state.footprints, maps, DEFAULT_THRESHOLD)
        _merge_damages(state, damages)
        result = _write_job_result(state, job, maps, damages)
        with state.lock:
            job.status = "done"
            job.progress = 1.0
            job.result = result
            state.counters["jobs_completed"] += 1
            _persist_job(state, job)
    except Exception as exc:  # pragma: no cover - surfaced via job status
        with state.lock:
            job.status = "error"
            job.error = str(exc)
            _persist_job(state, job)


def _persist_job(state: ServiceState, job: JobRecord) -> None:
    job_dir = state.workdir / "jobs" / job.id
    job_dir.mkdir(parents=True, exist_ok=True)
    (job_dir / "job.json").write_text(
        json.dumps(
            {
                "id": job.id,
                "status": job.status,
                "request": job.request,
                "error": job.error,
                "result": job.result,
            },
            indent=1,
            sort_keys=True,
        )
    )


def _resume_jobs(state: ServiceState) -> None:
    jobs_dir = state.workdir / "jobs"
    if not jobs_dir.is_dir():
        return
    for job_file in sorted(jobs_dir.glob("*/job.json")):
        doc = json.loads(job_file.read_text())
        if doc.get("status") != "done":
            continue  # no mid-job resume; incomplete jobs must be re-posted
        job = JobRecord(
            id=doc["id"], status="done", request=doc["request"],
            progress=1.0, result=doc["result"],
        )
        state.jobs[job.id] = job
        buildings_file = job_file.parent / "buildings.geojson"
        if buildings_file.exists():
            damages = bmod.damages_from_geojson(json.loads(buildings_file.read_text()))
            _merge_damages(state, damages)


def build_app(
    stack_path: str,
    model_path: str,
    footprints_path: Optional[str] = None,
    regions_path: Optional[str] = None,
    workdir: str = "./service_work",
    threads: int = 1,
    max_pixels: int = 4_000_000,
    timeline: Timeline = DEFAULT_TIMELINE,
    cors_origins: Optional[list[str]] = None,
) -> FastAPI:
    stack = geodata.read_stack(stack_path)
    model = forest.load(model_path)
    inference.check_compatibility(stack, model)
    footprints = (
        geodata.read_footprints(footprints_path).footprints if footprints_path else []
    )
    regions = geodata.read_regions(regions_path) if regions_path else []
    state = ServiceState(
        stack=stack,
        model=model,
        model_id=Path(model_path).stem,
        footprints=footprints,
        regions=regions,
        workdir=Path(workdir),
        threads=max(1, threads),
        max_pixels=max_pixels,
        timeline=timeline,
    )
    state.workdir.mkdir(parents=True, exist_ok=True)
    state.pool = ThreadPoolExecutor(max_workers=state.threads)
    _resume_jobs(state)

    app = FastAPI(title="damage-assessment service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=cors_origins or ["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.service = state

    xmin, ymin, xmax, ymax = stack.extent()

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.get("/info")
    def info():
        return {
            "extent": [xmin, ymin, xmax, ymax],
            "crs": stack.transform.crs,
            "width": stack.width,
            "height": stack.height,
            "transform": stack.transform.to_list(),
            "orbits": stack.orbits(),
            "model_id": state.model_id,
            "feature_order_tag": model.feature_order_tag,
            "n_footprints": len(footprints),
            "n_regions": len(regions),
            "default_threshold": DEFAULT_THRESHOLD,
            "periods": list(range(1, state.timeline.n_periods + 1)),
        }

    @app.get("/metrics", response_class=PlainTextResponse)
    def metrics():
        with state.lock:
            lines = [f"{k} {v}" for k, v in sorted(state.counters.items())]
        return "\n".join(lines) + "\n"

    @app.post("/assess", status_code=202)
    def assess(req: AssessmentRequest):
        with state.lock:
            state.counters["assess_requests"] += 1
        if len(req.bbox) != 4:
            raise HTTPException(422, detail="bbox must be [minx, miny, maxx, maxy]")
        if req.window not in WINDOWS:
            raise HTTPException(422, detail=f"window must be one of {WINDOWS}")
        if req.model_id is not None and req.model_id != state.model_id:
            raise HTTPException(
                422, detail=f"unknown model {req.model_id!r}; loaded: {state.model_id}"
            )
        if not req.periods:
            raise HTTPException(422, detail="at least one assessment period required")
        for p in req.periods:
            if not 1 <= p <= state.timeline.n_periods:
                raise HTTPException(422, detail=f"period {p} out of range 1..12")
        if not (req.reference_period < min(req.periods)):
            raise HTTPException(422, detail="reference period must precede every period")
        minx, miny, maxx, maxy = req.bbox
        if maxx <= xmin or minx >= xmax or maxy <= ymin or miny >= ymax:
            raise HTTPException(
                422,
                detail={
                    "message": "bbox outside stack extent",
                    "extent": [xmin, ymin, xmax, ymax],
                },
            )
        try:
            sub, _, _ = _crop_stack(state.stack, req.bbox)
        except ValueError as exc:
            raise HTTPException(422, detail=str(exc)) from None
        if sub.width * sub.height * len(req.periods) > state.max_pixels:
            raise HTTPException(
                422,
                detail=f"request exceeds the result-size cap of {state.max_pixels} pixels",
            )

        request_doc = {
            "bbox": [float(v) for v in req.bbox],
            "periods": sorted(set(int(p) for p in req.periods)),
            "reference_period": int(req.reference_period),
            "window": req.window,
        }
        jid = _job_id(request_doc)
        with state.lock:
            existing = state.jobs.get(jid)
            if existing is None:
                queued = sum(1 for j in state.jobs.values() if j.status in ("queued", "running"))
                if queued >= state.threads * 4:
                    raise HTTPException(429, detail="job queue full, retry later")
                job = JobRecord(id=jid, status="queued", request=request_doc)
                state.jobs[jid] = job
                state.pool.submit(_run_job, state, job)
        return {"job_id": jid}

    @app.get("/jobs/{job_id}")
    def job_status(job_id: str):
        with state.lock:
            job = state.jobs.get(job_id)
            if job is None:
                raise HTTPException(404, detail=f"unknown job {job_id}")
            body = {
                "id": job.id,
                "status": job.status,
                "progress": job.progress,
                "error": job.error,
            }
            if job.result is not None:
                refs = dict(job.result)
                refs["base_url"] = f"/files/{job.id}"
                body["result"] = refs
        return body

    @app.get("/files/{job_id}/{name}")
    def job_file(job_id: str, name: str):
        path = state.workdir / "jobs" / job_id / name
        if ".." in name or not path.exists():
            raise HTTPException(404, detail="no such file")
        return FileResponse(path)

    def _bbox_param(bbox: Optional[str]) -> Optional[tuple[float, float, float, float]]:
        if bbox is None:
            return None
        try:
            vals = tuple(float(v) for v in bbox.split(","))
        except ValueError:
            raise HTTPException(422, detail="bbox must be minx,miny,maxx,maxy") from None
        if len(vals) != 4:
            raise HTTPException(422, detail="bbox must have four values")
        return vals  # type: ignore[return-value]

    @app.get("/buildings")
    def buildings(
        bbox: Optional[str] = Query(default=None),
        threshold: float = Query(default=DEFAULT_THRESHOLD, ge=0.0, le=1.0),
        response: Response = None,
    ):
        with state.lock:
            state.counters["buildings_requests"] += 1
            snapshot = {
                bid: dict(periods) for bid, periods in state.building_periods.items()
            }
            geoms = dict(state.building_geoms)
        box = _bbox_param(bbox)
        damages = []
        for bid, periods in sorted(snapshot.items()):
            fp = geoms[bid]
            if box is not None:
                fxmin, fymin, fxmax, fymax = fp.bbox()
                if fxmax < box[0] or fxmin > box[2] or fymax < box[1] or fymin > box[3]:
                    continue
            damages.append(
                bmod.BuildingDamage(
                    building=fp,
                    per_period=periods,
                    threshold_used=threshold,
                    flag=bmod.verdict_flag(periods),
                )
            )
        doc = bmod.buildings_to_geojson(damages, threshold=threshold)
        if response is not None and not damages:
            response.headers["X-Coverage"] = "none"
        doc["coverage"] = "none" if not damages else "ok"
        return doc

    @app.get("/rollup")
    def rollup(
        level: str = Query(default="region"),
        threshold: float = Query(default=DEFAULT_THRESHOLD, ge=0.0, le=1.0),
        format: str = Query(default="json"),
    ):
        with state.lock:
            state.counters["rollup_requests"] += 1
            snapshot = {
                bid: dict(periods) for bid, periods in state.building_periods.items()
            }
            geoms = dict(state.building_geoms)
        damages = [
            bmod.BuildingDamage(building=geoms[bid], per_period=periods)
            for bid, periods in sorted(snapshot.items())
        ]
        if level == "region":
            table = bmod.rollup(damages, state.regions, threshold=threshold)
            csv_text = bmod.rollup_to_csv(table)
            body = [
                {
                    "region_id": r.region_id,
                    "name": r.name,
                    "n_buildings": r.n_buildings,
                    "n_damaged": r.n_damaged,
                    "pct": r.pct_damaged,
                }
                for r in table
            ]
        elif level == "class":
            table = bmod.class_rollup(damages, threshold=threshold)
            csv_text = bmod.class_rollup_to_csv(table)
            body = [
                {
                    "osm_class": c.osm_class,
                    "n_buildings": c.n_buildings,
                    "n_damaged": c.n_damaged,
                    "pct": c.pct_damaged,
                }
                for c in table
            ]
        else:
            raise HTTPException(422, detail="level must be 'region' or 'class'")
        if format == "csv":
            return PlainTextResponse(csv_text, media_type="text/csv")
        return {"level": level, "threshold": threshold, "rows": body}

    @app.get("/timeseries")
    def timeseries(x: float, y: float):
        with state.lock:
            state.counters["timeseries_requests"] += 1
        col, row = stack.transform.crs_to_pixel(x, y)
        if not stack.in_bounds(col, row):
            raise HTTPException(
                422,
                detail={
                    "message": "point outside stack extent",
                    "extent": [xmin, ymin, xmax, ymax],
                },
            )
        series = []
        for orbit in stack.orbits():
            for pol in geodata.POLARIZATIONS:
                layers = sorted(
                    stack.select(orbit=orbit, polarization=pol),
                    key=lambda l: (l.timestamp, l.direction),
                )
                if not layers:
                    continue
                samples = []
                gaps = []
                direction = layers[0].direction
                for layer in layers:
                    v = float(layer.values[row, col])
                    if math.isnan(v):
                        gaps.append(layer.timestamp.isoformat())
                    else:
                        samples.append(
                            {"date": layer.timestamp.isoformat(), "value_db": v}
                        )
                series.append(
                    {
                        "orbit": orbit,
                        "direction": direction,
                        "polarization": pol,
                        "samples": samples,
                        "gaps": gaps,
                    }
                )
        return {"x": x, "y": y, "col": col, "row": row, "series": series}

    return app
