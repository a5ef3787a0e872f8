"""Overlay rendering of analysis results onto the source image."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from .core import Config, GrayImage
from .pipeline import AnalysisReport, ImageContext


def _parse_color(spec: str) -> tuple[int, int, int]:
    s = spec.lstrip("#")
    if len(s) != 6:
        raise ValueError(f"expected #RRGGBB color, got {spec!r}")
    return tuple(int(s[i:i + 2], 16) for i in (0, 2, 4))


def render_overlay(ctx: ImageContext, report: AnalysisReport | None = None) -> Image.Image:
    """Centerlines, contours, and findings drawn over the original image.

    Stroke colors come from the config; finding markers are filled circles
    whose radius grows with stenosis severity (1 - min_degree).
    """
    cfg: Config = ctx.config
    base = np.clip(np.rint(ctx.original.data), 0, 255).astype(np.uint8)
    im = Image.fromarray(base, mode="L").convert("RGB")
    draw = ImageDraw.Draw(im)

    contour_color = _parse_color(cfg.overlay_contour_color)
    for poly in ctx.contour.polygons:
        pts = [(float(x), float(y)) for x, y in poly.points]
        if len(pts) >= 2:
            draw.line(pts, fill=contour_color, width=1)

    if report is not None:
        line_color = _parse_color(cfg.overlay_centerline_color)
        for track in report.tracks:
            pts = [(tp.pos.x, tp.pos.y) for tp in track.points]
            if len(pts) >= 2:
                draw.line(pts, fill=line_color, width=2)
            for cut in track.cutoffs:
                p = track.points[cut.ordinal].pos
                r = 3
                draw.ellipse([p.x - r, p.y - r, p.x + r, p.y + r],
                             outline=line_color, width=1)

        finding_color = _parse_color(cfg.overlay_finding_color)
        for f in report.findings:
            r = 4.0 + 8.0 * (1.0 - f.min_degree)
            p = f.location
            draw.ellipse([p.x - r, p.y - r, p.x + r, p.y + r],
                         fill=finding_color)
    return im


def save_overlay(ctx: ImageContext, report: AnalysisReport | None,
                 path: str | Path) -> None:
    render_overlay(ctx, report).save(Path(path), format="PNG")


def save_stage_dumps(ctx: ImageContext, out_dir: str | Path) -> list[Path]:
    """Write every preprocessing stage as a PNG for debugging."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for name, stage in ctx.pre.stages().items():
        path = out_dir / f"stage_{name}.png"
        arr = np.clip(np.rint(stage.data), 0, 255).astype(np.uint8)
        Image.fromarray(arr, mode="L").save(path, format="PNG")
        written.append(path)
    return written
