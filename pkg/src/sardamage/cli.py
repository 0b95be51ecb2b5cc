"""Command-line entry point wiring the full pipeline.

Subcommands: synth, train, infer, buildings, rollup, eval, calibrate,
compare, ablate, serve. Every subcommand is deterministic given identical
inputs and seed; ``--json`` prints a machine-readable summary on stdout.
Exit codes: 0 success, 2 usage error, 1 runtime error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import buildings as bmod
from . import evaluation, features, forest, geodata, inference, synthgen, training
from .features import FeatureSpec, STAT_NAMES, WINDOWS, WINDOW_1X1
from .temporal import DEFAULT_TIMELINE, Timeline, parse_date

THREADS_ENV = "SARDAMAGE_THREADS"

_REJECTED_ABLATION_AXES = {"s2", "sentinel2", "sentinel-2", "optical", "input-data"}


def _default_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def _parse_periods(text: str) -> tuple[int, ...]:
    """Accepts '1-8' ranges and '5,6,7' lists (may be mixed)."""
    out: list[int] = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if "-" in chunk[1:]:
            lo, hi = chunk.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        elif chunk:
            out.append(int(chunk))
    if not out:
        raise ValueError(f"no periods in {text!r}")
    return tuple(sorted(set(out)))


def _parse_bands(text: str) -> tuple[str, ...]:
    if text in ("both", "VV+VH", "vv+vh"):
        return ("VV", "VH")
    bands = tuple(b.strip().upper() for b in text.replace("+", ",").split(","))
    return bands


def _parse_stats(text: str) -> tuple[str, ...]:
    if text == "all":
        return STAT_NAMES
    return tuple(s.strip() for s in text.replace("+", ",").split(","))


def _load_config(path: Optional[str]) -> dict:
    if not path:
        return {}
    return json.loads(Path(path).read_text())


def _pick(args: argparse.Namespace, config: dict, name: str, builtin):
    """Resolution order: explicit flag > config file > builtin default."""
    value = getattr(args, name, None)
    if value is not None:
        return value
    if name in config:
        return config[name]
    return builtin


def _timeline(args, config) -> Timeline:
    anchor = _pick(args, config, "anchor_date", None)
    if anchor is None:
        return DEFAULT_TIMELINE
    return Timeline(anchor=parse_date(anchor))


def _emit(args, summary: dict, human: str = "") -> None:
    if args.json:
        print(json.dumps(summary, sort_keys=True))
    elif human:
        print(human)


def _read_maps_dir(maps_dir: Path) -> dict[int, geodata.ProbabilityMap]:
    maps = {}
    for sub in sorted(maps_dir.glob("period_*")):
        if not (sub / "meta.json").exists():
            continue
        pmap = geodata.read_probability_map(sub)
        maps[pmap.period_index] = pmap
    if not maps:
        raise FileNotFoundError(f"no period_* probability bundles under {maps_dir}")
    return maps


# ---------------------------------------------------------------------------
# Subcommand implementations
# ---------------------------------------------------------------------------


def cmd_synth(args, config) -> int:
    seed = int(_pick(args, config, "seed", 0))
    if args.scenario:
        scenario = synthgen.load_scenario_file(args.scenario, seed)
    else:
        scenario = synthgen.load_preset(_pick(args, config, "preset", "clean-steps"), seed)
    stack, labels, footprints, truth = synthgen.generate(scenario)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    geodata.write_stack(stack, out / "stack")
    (out / "labels.geojson").write_text(
        json.dumps(geodata.labels_to_geojson(labels), indent=1, sort_keys=True)
    )
    (out / "footprints.geojson").write_text(
        json.dumps(geodata.footprints_to_geojson(footprints), indent=1, sort_keys=True)
    )
    (out / "truth.json").write_text(truth.to_json())
    (out / "scenario.json").write_text(
        json.dumps(synthgen.scenario_to_dict(scenario), indent=1, sort_keys=True)
    )
    _emit(
        args,
        {
            "out": str(out),
            "layers": len(stack.layers),
            "labels": len(labels),
            "footprints": len(footprints),
            "seed": seed,
        },
        f"wrote scenario to {out}: {len(stack.layers)} layers, "
        f"{len(labels)} labels, {len(footprints)} footprints",
    )
    return 0


def _feature_spec(args, config) -> FeatureSpec:
    bands = _parse_bands(_pick(args, config, "bands", "both"))
    stats = _parse_stats(_pick(args, config, "features", "all"))
    return FeatureSpec(bands=bands, stats=stats)


def cmd_train(args, config) -> int:
    stack = geodata.read_stack(args.stack)
    labels = geodata.read_labels(args.labels).points
    spec = _feature_spec(args, config)
    cfg = forest.TrainConfig(
        n_trees=int(_pick(args, config, "trees", 50)),
        min_leaf=int(_pick(args, config, "min_leaf", 3)),
        max_nodes=int(_pick(args, config, "max_nodes", 10000)),
        seed=int(_pick(args, config, "seed", 0)),
        balance=not args.no_balance,
        feature_order_tag=spec.tag,
    )
    periods = _parse_periods(_pick(args, config, "periods", "1-8"))
    window = _pick(args, config, "window", WINDOW_1X1)
    model, rows = training.train_from_stack(
        stack, labels, config=cfg, periods=periods, spec=spec, window=window,
        timeline=_timeline(args, config),
    )
    forest.save(model, args.out)
    train_acc = float(
        np.mean((model.predict_proba(rows.X) >= 0.5).astype(int) == rows.y)
    )
    _emit(
        args,
        {
            "model": str(args.out),
            "rows": int(rows.y.size),
            "positives": int(rows.y.sum()),
            "points_used": rows.n_points_used,
            "discarded_pairs": rows.n_discarded,
            "training_accuracy": train_acc,
            "feature_order_tag": spec.tag,
        },
        f"trained {cfg.n_trees} trees on {rows.y.size} rows "
        f"({int(rows.y.sum())} positive); saved to {args.out}",
    )
    return 0


def cmd_infer(args, config) -> int:
    stack = geodata.read_stack(args.stack)
    model = forest.load(args.model)
    periods = _parse_periods(_pick(args, config, "periods", "1-12"))
    job = inference.InferenceJob(
        stack=stack,
        model=model,
        periods=periods,
        reference_period=int(_pick(args, config, "reference_period", 0)),
        window=_pick(args, config, "window", WINDOW_1X1),
        tile_size=int(_pick(args, config, "tile_size", 256)),
        threads=int(_pick(args, config, "threads", _default_threads())),
        timeline=_timeline(args, config),
    )
    maps = inference.infer_map(job)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summary = {"out": str(out), "periods": {}}
    for period, pmap in maps.items():
        geodata.write_probability_map(pmap, out / f"period_{period:02d}")
        if args.uint8:
            geodata.write_uint8_bundle(pmap, out / f"period_{period:02d}_u8")
        nodata = int(np.sum(~np.isfinite(pmap.values)))
        summary["periods"][str(period)] = {"nodata_pixels": nodata}
    _emit(args, summary, f"wrote {len(maps)} probability maps to {out}")
    return 0


def cmd_buildings(args, config) -> int:
    maps = _read_maps_dir(Path(args.maps))
    threshold = float(_pick(args, config, "threshold", bmod.DEFAULT_THRESHOLD))
    result = geodata.read_footprints(
        args.footprints, min_area_m2=float(_pick(args, config, "min_area", 50.0))
    )
    damages = bmod.assess_buildings(result.footprints, maps, threshold=threshold)
    doc = bmod.buildings_to_geojson(damages, threshold=threshold)
    Path(args.out).write_text(json.dumps(doc, indent=1, sort_keys=True))
    n_damaged = sum(d.verdict_at(threshold) for d in damages)
    _emit(
        args,
        {
            "out": str(args.out),
            "buildings": len(damages),
            "damaged": n_damaged,
            "threshold": threshold,
            "dropped_small": result.dropped_small,
        },
        f"{n_damaged}/{len(damages)} buildings damaged at threshold {threshold:g}",
    )
    return 0


def cmd_rollup(args, config) -> int:
    doc = json.loads(Path(args.buildings).read_text())
    damages = bmod.damages_from_geojson(doc)
    threshold = float(_pick(args, config, "threshold", bmod.DEFAULT_THRESHOLD))
    if args.by_class:
        table = bmod.class_rollup(damages, threshold=threshold)
        csv_text = bmod.class_rollup_to_csv(table)
        summary = {
            "threshold": threshold,
            "classes": {c.osm_class: c.n_damaged for c in table},
        }
    else:
        if not args.regions:
            raise ValueError("either --regions or --by-class is required")
        regions = geodata.read_regions(args.regions)
        table = bmod.rollup(damages, regions, threshold=threshold)
        csv_text = bmod.rollup_to_csv(table)
        summary = {
            "threshold": threshold,
            "regions": {
                r.region_id: {"n": r.n_buildings, "damaged": r.n_damaged}
                for r in table
            },
        }
    if args.out:
        Path(args.out).write_text(csv_text)
        summary["out"] = str(args.out)
    _emit(args, summary, csv_text.rstrip("\n"))
    return 0


def cmd_eval(args, config) -> int:
    maps = _read_maps_dir(Path(args.maps))
    labels = geodata.read_labels(args.labels).points
    threshold = float(_pick(args, config, "threshold", bmod.DEFAULT_THRESHOLD))
    result = evaluation.score_labels(maps, labels, timeline=_timeline(args, config))
    report = evaluation.compute_metrics(result.samples, threshold)
    if args.scores_csv:
        Path(args.scores_csv).write_text(evaluation.samples_to_csv(result.samples))
    if args.out:
        Path(args.out).write_text(evaluation.report_to_json(report) + "\n")
    _emit(
        args,
        report.to_dict() | {"warnings": len(result.warnings)},
        evaluation.format_report(report),
    )
    return 0


def cmd_calibrate(args, config) -> int:
    maps = _read_maps_dir(Path(args.maps))
    labels = geodata.read_labels(args.labels).points
    target = float(_pick(args, config, "target_precision", 0.9))
    result = evaluation.score_labels(maps, labels, timeline=_timeline(args, config))
    threshold = evaluation.calibrate_threshold(result.samples, target)
    report = evaluation.compute_metrics(result.samples, threshold)
    _emit(
        args,
        {
            "threshold": threshold,
            "target_precision": target,
            "achieved_precision": report.damaged.precision,
            "recall": report.damaged.recall,
            "n_samples": report.n_samples,
        },
        f"threshold {threshold:.6f} reaches precision "
        f"{report.damaged.precision:.3f} (target {target:g}) "
        f"at recall {report.damaged.recall:.3f}",
    )
    return 0


def cmd_compare(args, config) -> int:
    stack = geodata.read_stack(args.stack)
    model = forest.load(args.model)
    labels = geodata.read_labels(args.labels).points
    periods = _parse_periods(_pick(args, config, "periods", "1-12"))
    window = _pick(args, config, "window", WINDOW_1X1)
    timeline = _timeline(args, config)

    job = inference.InferenceJob(
        stack=stack, model=model, periods=periods, window=window,
        threads=int(_pick(args, config, "threads", _default_threads())),
        timeline=timeline,
    )
    maps = inference.infer_map(job)
    rf = evaluation.score_labels(maps, labels, timeline=timeline)
    tt = training.pwtt_scores_for_labels(
        stack, labels, periods, window=window, timeline=timeline
    )
    comparison = evaluation.compare_methods(
        rf.samples,
        tt.samples,
        rf_threshold=float(_pick(args, config, "rf_threshold", 0.5)),
        pwtt_cutoff=float(_pick(args, config, "cutoff", 1.63)),
    )
    human = "\n\n".join(
        [
            evaluation.format_report(comparison.rf, title="Random forest"),
            evaluation.format_report(comparison.pwtt, title="Pixel-wise t-test"),
        ]
    )
    _emit(args, comparison.to_dict(), human)
    return 0


_ABLATION_VALUES = {
    "bands": ("VV", "VH", "both"),
    "trees": ("10", "25", "50", "75", "100"),
    "features": ("mean+std", "min,max,mean,median", "all"),
    "window": WINDOWS,
}


def cmd_ablate(args, config) -> int:
    stack = geodata.read_stack(args.stack)
    labels = geodata.read_labels(args.labels).points
    timeline = _timeline(args, config)
    train_periods = _parse_periods(_pick(args, config, "periods", "1-8"))
    eval_periods = _parse_periods(_pick(args, config, "eval_periods", "1-12"))
    seed = int(_pick(args, config, "seed", 0))
    values = (
        tuple(v.strip() for v in args.values.split(";"))
        if args.values
        else _ABLATION_VALUES[args.axis]
    )

    train_pts, test_pts = training.split_labels_spatially(labels, stack)
    results = {}
    for value in values:
        spec = FeatureSpec()
        window = WINDOW_1X1
        n_trees = 50
        if args.axis == "bands":
            spec = FeatureSpec(bands=_parse_bands(value))
        elif args.axis == "features":
            spec = FeatureSpec(stats=_parse_stats(value))
        elif args.axis == "trees":
            n_trees = int(value)
        elif args.axis == "window":
            window = value
        cfg = forest.TrainConfig(n_trees=n_trees, seed=seed, feature_order_tag=spec.tag)
        model, _ = training.train_from_stack(
            stack, train_pts, config=cfg, periods=train_periods, spec=spec,
            window=window, timeline=timeline,
        )
        scored = training.rf_scores_for_labels(
            stack, model, test_pts, eval_periods, window=window, timeline=timeline
        )
        report = evaluation.compute_metrics(scored.samples, 0.5)
        results[value] = {
            "f1": report.damaged.f1,
            "auc": report.auc,
            "n_samples": report.n_samples,
        }
    human = "\n".join(
        f"{args.axis}={value:<28} F1 {entry['f1']:.3f}  AUC "
        + (f"{entry['auc']:.3f}" if entry["auc"] is not None else "n/a")
        for value, entry in results.items()
    )
    _emit(args, {"axis": args.axis, "results": results}, human)
    return 0


def cmd_serve(args, config) -> int:
    import uvicorn

    from .service import build_app

    app = build_app(
        stack_path=args.stack,
        model_path=args.model,
        footprints_path=args.footprints,
        regions_path=args.regions,
        workdir=_pick(args, config, "workdir", "./service_work"),
        threads=int(_pick(args, config, "threads", _default_threads())),
        max_pixels=int(_pick(args, config, "max_pixels", 4_000_000)),
        timeline=_timeline(args, config),
    )
    uvicorn.run(
        app,
        host=_pick(args, config, "host", "127.0.0.1"),
        port=int(_pick(args, config, "port", 8008)),
        log_level="warning",
    )
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sardamage",
        description="SAR time-series building-damage mapping pipeline",
    )
    parser.add_argument("--json", action="store_true", help="print a JSON summary on stdout")
    parser.add_argument("--config", help="JSON config file; keys mirror flag names")
    parser.add_argument(
        "--anchor-date", dest="anchor_date",
        help="override the reference-year start date (ISO, default 2020-02-24)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic scenario bundle")
    p.add_argument("--preset", help="preset name (default clean-steps); see presets dir")
    p.add_argument("--scenario", help="explicit scenario JSON file")
    p.add_argument("--seed", type=int, help="generator seed (default 0)")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train the classifier from a stack + labels")
    p.add_argument("--stack", required=True, help="raster stack bundle directory")
    p.add_argument("--labels", required=True, help="label points GeoJSON")
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--periods", help="assessment periods, e.g. 1-8 (default)")
    p.add_argument("--trees", type=int, help="number of trees (default 50)")
    p.add_argument("--min-leaf", dest="min_leaf", type=int, help="min rows per leaf (default 3)")
    p.add_argument("--max-nodes", dest="max_nodes", type=int, help="node budget per tree (default 10000)")
    p.add_argument("--seed", type=int, help="training seed (default 0)")
    p.add_argument("--bands", help="VV, VH or both (default both)")
    p.add_argument("--features", help="statistic subset, e.g. mean,std (default all seven)")
    p.add_argument("--window", choices=WINDOWS, help="extraction window (default 1x1)")
    p.add_argument("--no-balance", action="store_true",
                   help="disable majority-class downsampling")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", help="dense probability maps per period")
    p.add_argument("--stack", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True, help="output directory for period bundles")
    p.add_argument("--periods", help="periods to map, e.g. 5-12 (default 1-12)")
    p.add_argument("--reference-period", dest="reference_period", type=int,
                   help="reference interval index (default 0)")
    p.add_argument("--window", choices=WINDOWS)
    p.add_argument("--tile-size", dest="tile_size", type=int, help="tile edge in pixels (default 256)")
    p.add_argument("--threads", type=int, help=f"worker threads (default ${THREADS_ENV} or 1)")
    p.add_argument("--uint8", action="store_true", help="also write UInt8 exports")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("buildings", help="building-level likelihoods and verdicts")
    p.add_argument("--maps", required=True, help="directory with period_* bundles")
    p.add_argument("--footprints", required=True, help="footprint GeoJSON")
    p.add_argument("--out", required=True, help="output GeoJSON")
    p.add_argument("--threshold", type=float, help="verdict threshold (default 0.655)")
    p.add_argument("--min-area", dest="min_area", type=float,
                   help="drop footprints below this area in m² (default 50)")
    p.set_defaults(func=cmd_buildings)

    p = sub.add_parser("rollup", help="regional or per-class damage counts")
    p.add_argument("--buildings", required=True, help="buildings GeoJSON from the buildings step")
    p.add_argument("--regions", help="admin regions GeoJSON")
    p.add_argument("--by-class", dest="by_class", action="store_true",
                   help="roll up by building class instead of regions")
    p.add_argument("--threshold", type=float, help="verdict threshold (default 0.655)")
    p.add_argument("--out", help="CSV output path (default: print)")
    p.set_defaults(func=cmd_rollup)

    p = sub.add_parser("eval", help="score labels against maps and report metrics")
    p.add_argument("--maps", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--threshold", type=float, help="decision threshold (default 0.655)")
    p.add_argument("--out", help="write the report as JSON here")
    p.add_argument("--scores-csv", dest="scores_csv", help="export per-sample scores as CSV")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("calibrate", help="find the smallest threshold meeting a precision target")
    p.add_argument("--maps", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--target-precision", dest="target_precision", type=float,
                   help="target precision in (0,1] (default 0.9)")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("compare", help="side-by-side classifier vs t-test baseline")
    p.add_argument("--stack", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--periods", help="evaluation periods (default 1-12)")
    p.add_argument("--rf-threshold", dest="rf_threshold", type=float,
                   help="classifier threshold (default 0.5)")
    p.add_argument("--cutoff", type=float, help="baseline cutoff (default 1.63)")
    p.add_argument("--window", choices=WINDOWS)
    p.add_argument("--threads", type=int)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("ablate", help="sweep one configuration axis and report F1 per value")
    p.add_argument("--stack", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--axis", required=True, help="bands | features | trees | window")
    p.add_argument("--values", help="semicolon-separated values (defaults per axis)")
    p.add_argument("--seed", type=int)
    p.add_argument("--periods", help="training periods (default 1-8)")
    p.add_argument("--eval-periods", dest="eval_periods", help="evaluation periods (default 1-12)")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("serve", help="run the local assessment HTTP service")
    p.add_argument("--stack", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--footprints", help="footprint GeoJSON to assess")
    p.add_argument("--regions", help="admin regions GeoJSON for roll-ups")
    p.add_argument("--host")
    p.add_argument("--port", type=int, help="listen port (default 8008)")
    p.add_argument("--workdir", help="job persistence directory (default ./service_work)")
    p.add_argument("--threads", type=int)
    p.add_argument("--max-pixels", dest="max_pixels", type=int,
                   help="result-size cap per assessment (default 4e6 pixels)")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "ablate" and args.axis not in _ABLATION_VALUES:
        if args.axis.lower() in _REJECTED_ABLATION_AXES:
            parser.error(
                "optical (Sentinel-2) inputs are out of scope: adding optical "
                "features never improved detection in our ablations. "
                "Supported axes: bands, features, trees, window."
            )
        parser.error(f"unknown axis {args.axis!r}; choose from bands, features, trees, window")
    try:
        config = _load_config(args.config)
        return args.func(args, config)
    except (
        ValueError,
        FileNotFoundError,
        NotADirectoryError,
        geodata.FormatError,
        forest.TrainingError,
        forest.CompatibilityError,
        forest.ModelParseError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
