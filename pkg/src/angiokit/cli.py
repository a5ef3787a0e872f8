"""Command-line front door: prepare, auto, analyze-segment, eval-phantoms,
and serve subcommands."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import evalmetrics, interactive, phantom, pipeline, render
from .core import AngioError, Config, Point2, config_default, load_config, load_gray_image


def _load_cfg(args) -> Config:
    cfg = config_default()
    if getattr(args, "config", None):
        path = Path(args.config)
        if path.exists():
            cfg = load_config(path)
        # A missing config path falls back to defaults.
    if getattr(args, "seed", None) is not None:
        cfg = dataclasses.replace(cfg, rng_seed=args.seed)
    return cfg


def _parse_point(text: str) -> Point2:
    try:
        x, y = text.split(",")
        return Point2(float(x), float(y))
    except ValueError:
        raise SystemExit(f"expected 'x,y', got {text!r}")


def _write_segment_csvs(report: pipeline.AnalysisReport, out_dir: Path) -> None:
    for seg in report.segments:
        path = out_dir / f"segment_{seg.id:03d}.csv"
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["ordinal", "x", "y", "diameter", "degree"])
            for i, tp in enumerate(seg.points):
                d = seg.diameters[i] if i < len(seg.diameters) else None
                g = seg.degrees[i] if i < len(seg.degrees) else None
                writer.writerow([i, f"{tp.pos.x:.4f}", f"{tp.pos.y:.4f}",
                                 "" if d is None else f"{d:.4f}",
                                 "" if g is None else f"{g:.6f}"])


def cmd_prepare(args) -> int:
    cfg = _load_cfg(args)
    img = load_gray_image(args.image)
    ctx = pipeline.prepare_context(img, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.dump_stages:
        render.save_stage_dumps(ctx, out)
    (out / "contours.json").write_text(json.dumps(ctx.contour.to_jsonable()))
    render.save_overlay(ctx, None, out / "contour_overlay.png")
    summary = {
        "width": img.width,
        "height": img.height,
        "ridge_points": len(ctx.ridges),
        "contour_polygons": len(ctx.contour.polygons),
        "chan_vese_iterations": ctx.cv.iterations,
        "degenerate_segmentation": ctx.cv.degenerate,
    }
    (out / "prepare_summary.json").write_text(json.dumps(summary, sort_keys=True, indent=2))
    print(json.dumps(summary, sort_keys=True))
    return 0


def cmd_auto(args) -> int:
    cfg = _load_cfg(args)
    img = load_gray_image(args.image)
    ctx = pipeline.prepare_context(img, cfg)
    if len(ctx.ridges) == 0:
        print("error: no ridge points detected in the image", file=sys.stderr)
        return 2
    report = pipeline.run_auto(ctx)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report.to_json())
    (out / "timings.json").write_text(json.dumps(report.timings_ms, sort_keys=True, indent=2))
    _write_segment_csvs(report, out)
    render.save_overlay(ctx, report, out / "overlay.png")
    print(f"segments: {len(report.segments)}, findings: {len(report.findings)}")
    return 0


def cmd_analyze_segment(args) -> int:
    cfg = _load_cfg(args)
    img = load_gray_image(args.image)
    ctx = pipeline.prepare_context(img, cfg)
    if len(ctx.ridges) == 0:
        print("error: no ridge points detected in the image", file=sys.stderr)
        return 2
    req = interactive.InteractiveRequest(_parse_point(args.start), _parse_point(args.end))
    try:
        rr = interactive.track_segment(ctx.pre.tracking, ctx.ridges, ctx.contour, req, cfg)
    except interactive.UnreachableEndpointError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    payload = {
        "chosen_direction": rr.chosen_direction,
        "degenerate": rr.degenerate,
        "snapped_start": [rr.snapped_start.x, rr.snapped_start.y],
        "snapped_end": [rr.snapped_end.x, rr.snapped_end.y],
        "route": [[tp.pos.x, tp.pos.y] for tp in rr.route],
        "diameters": rr.segment.diameters,
        "mean_diameter": rr.segment.mean_diameter,
        "degrees": rr.segment.degrees,
        "findings": [f.to_jsonable() for f in rr.findings],
    }
    (out / "segment.json").write_text(json.dumps(payload, sort_keys=True))
    print(f"route points: {len(rr.route)}, findings: {len(rr.findings)}")
    return 0


def cmd_eval_phantoms(args) -> int:
    cfg = _load_cfg(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stats: dict[str, evalmetrics.REStats] = {}
    detection = {"tp": 0, "fn": 0, "fp": 0}
    rows = []
    for spec in phantom.standard_suite():
        if args.only and args.only not in spec.name:
            continue
        img, truth = phantom.render_phantom(spec, cfg.rng_seed)
        ctx = pipeline.prepare_context(img, cfg)
        if len(ctx.ridges) == 0:
            continue
        report = pipeline.run_auto(ctx)
        est, real = [], []
        for seg in report.segments:
            for tp, d in zip(seg.points, seg.diameters):
                if d is None:
                    continue
                _, w = truth.distance_and_width([tp.pos.x], [tp.pos.y])
                if w[0] > 0:
                    est.append(d)
                    real.append(float(w[0]))
        if est:
            stats[spec.name] = evalmetrics.relative_error(est, real)
        outcome = evalmetrics.match_findings(
            report.findings, [t.location for t in truth.stenoses], radius=args.radius)
        detection["tp"] += outcome.tp
        detection["fn"] += outcome.fn
        detection["fp"] += outcome.fp
        rows.append({"phantom": spec.name, "findings": len(report.findings),
                     "true_stenoses": len(truth.stenoses),
                     "tp": outcome.tp, "fn": outcome.fn, "fp": outcome.fp})
    m = evalmetrics.sen_pre_f1(evalmetrics.DetectionOutcome(**detection))
    payload = {
        "detection": {**detection, "sen": m.sen, "pre": m.pre, "f1": m.f1},
        "per_phantom": rows,
        "re": {k: dataclasses.asdict(v) for k, v in stats.items()},
    }
    (out / "evaluation.json").write_text(json.dumps(payload, sort_keys=True, indent=2))
    table = evalmetrics.re_table(stats)
    (out / "re_table.txt").write_text(table + "\n")
    print(table)
    print(f"detection: tp={detection['tp']} fn={detection['fn']} fp={detection['fp']} "
          f"sen={m.sen} pre={m.pre} f1={m.f1}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    cfg = _load_cfg(args)
    app = create_app(cfg, static_dir=args.static)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="angiokit",
                                     description="Coronary angiogram stenosis analysis")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, image=True):
        if image:
            p.add_argument("image", help="8-bit grayscale PNG or PGM")
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--seed", type=int, help="override rng_seed")
        p.add_argument("--out", default="out", help="output directory")

    p = sub.add_parser("prepare", help="preprocess and extract contours/ridges")
    common(p)
    p.add_argument("--dump-stages", action="store_true",
                   help="write each preprocessing stage as PNG")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("auto", help="automatic whole-tree stenosis detection")
    common(p)
    p.set_defaults(func=cmd_auto)

    p = sub.add_parser("analyze-segment", help="interactive segment analysis")
    common(p)
    p.add_argument("--start", required=True, help="start click as x,y")
    p.add_argument("--end", required=True, help="end click as x,y")
    p.set_defaults(func=cmd_analyze_segment)

    p = sub.add_parser("eval-phantoms", help="evaluate on the synthetic phantom suite")
    common(p, image=False)
    p.add_argument("--radius", type=float, default=10.0, help="finding match radius, px")
    p.add_argument("--only", help="restrict to phantoms whose name contains this")
    p.set_defaults(func=cmd_eval_phantoms)

    p = sub.add_parser("serve", help="run the HTTP analysis service")
    common(p, image=False)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--static", help="directory of web UI assets to serve at /")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except AngioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
