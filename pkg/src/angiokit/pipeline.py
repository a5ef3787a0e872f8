"""End-to-end analysis pipeline shared by the CLI and the HTTP service.

prepare_context runs preprocessing, two-phase segmentation, contour
extraction, and ridge detection once per image; run_auto tracks the whole
tree and quantifies every segment into an AnalysisReport.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

from .contour import ChanVeseResult, VesselContour, chan_vese, extract_iso_contours
from .core import Config, GrayImage
from .preprocess import PreprocessResult, preprocess
from .quant import StenosisFinding, VesselSegment, find_stenoses, quantify_segment
from .tracker import CenterlineTrack, RidgeSet, detect_ridges, split_segments, track_tree


@dataclass
class ImageContext:
    """Everything derived from one image under one config."""

    context_id: str
    original: GrayImage
    pre: PreprocessResult
    cv: ChanVeseResult
    contour: VesselContour
    ridges: RidgeSet
    config: Config
    created_at: float = field(default_factory=time.time)
    timings_ms: dict = field(default_factory=dict)


@dataclass
class AnalysisReport:
    context_id: str
    width: int
    height: int
    tracks: list[CenterlineTrack]
    segments: list[VesselSegment]
    findings: list[StenosisFinding]
    timings_ms: dict = field(default_factory=dict)

    def to_jsonable(self, include_timings: bool = False) -> dict:
        obj = {
            "context_id": self.context_id,
            "image": {"width": self.width, "height": self.height},
            "tracks": [_track_jsonable(t) for t in self.tracks],
            "segments": [_segment_jsonable(s) for s in self.segments],
            "findings": [f.to_jsonable() for f in self.findings],
        }
        if include_timings:
            obj["timings_ms"] = self.timings_ms
        return obj

    def to_json(self, include_timings: bool = False) -> str:
        # Deterministic serialization: repeated runs on identical inputs
        # produce byte-identical reports (timings stay out by default).
        return json.dumps(self.to_jsonable(include_timings), sort_keys=True,
                          separators=(",", ":"))


def _track_jsonable(t: CenterlineTrack) -> dict:
    return {
        "seed": [t.seed.x, t.seed.y],
        "from_branch_queue": t.from_branch_queue,
        "points": [
            {
                "pos": [tp.pos.x, tp.pos.y],
                "raw": [tp.raw_pos.x, tp.raw_pos.y],
                "theta": tp.dir.theta,
                "adjusted": tp.adjusted,
            }
            for tp in t.points
        ],
        "cutoffs": [{"ordinal": c.ordinal, "kind": c.kind} for c in t.cutoffs],
    }


def _segment_jsonable(s: VesselSegment) -> dict:
    return {
        "id": s.id,
        "source_track": s.source_track,
        "start_kind": s.start_kind,
        "end_kind": s.end_kind,
        "points": [[tp.pos.x, tp.pos.y] for tp in s.points],
        "diameters": [None if d is None else d for d in s.diameters],
        "mean_diameter": s.mean_diameter,
        "degrees": [None if g is None else g for g in s.degrees],
    }


def prepare_context(img: GrayImage, cfg: Config | None = None,
                    context_id: str = "local") -> ImageContext:
    """Preprocess an image and derive its contour and ridge set."""
    cfg = cfg or Config()
    timings: dict = {}
    t0 = time.perf_counter()
    pre = preprocess(img, cfg.preprocess)
    timings["preprocess"] = (time.perf_counter() - t0) * 1000.0

    t0 = time.perf_counter()
    try:
        cv = chan_vese(pre.equalized, cfg.chan_vese)
    except ValueError:
        # Featureless image: the percentile init has no above-threshold
        # pixels to seed the inside phase.
        cv = ChanVeseResult(mask=None, energies=[], iterations=0, degenerate=True)
    if cv.degenerate:
        contour = VesselContour([])
    else:
        contour = extract_iso_contours(pre.equalized, cv.decision_level)
    timings["contour"] = (time.perf_counter() - t0) * 1000.0

    t0 = time.perf_counter()
    ridges = detect_ridges(pre.tracking)
    timings["ridges"] = (time.perf_counter() - t0) * 1000.0
    return ImageContext(context_id, img, pre, cv, contour, ridges, cfg,
                        timings_ms=timings)


def run_auto(ctx: ImageContext) -> AnalysisReport:
    """Automatic whole-tree analysis: track, segment, quantify, flag."""
    timings = dict(ctx.timings_ms)
    t0 = time.perf_counter()
    tracks = track_tree(ctx.pre.tracking, ctx.ridges, ctx.contour, ctx.config)
    timings["tracking"] = (time.perf_counter() - t0) * 1000.0

    t0 = time.perf_counter()
    segments = split_segments(tracks, min_points=ctx.config.min_segment_points)
    findings: list[StenosisFinding] = []
    for seg in segments:
        quantify_segment(seg, ctx.contour, ctx.config)
        findings.extend(find_stenoses(seg, ctx.config))
    timings["quantify"] = (time.perf_counter() - t0) * 1000.0

    return AnalysisReport(
        context_id=ctx.context_id,
        width=ctx.original.width,
        height=ctx.original.height,
        tracks=tracks,
        segments=segments,
        findings=findings,
        timings_ms=timings,
    )
