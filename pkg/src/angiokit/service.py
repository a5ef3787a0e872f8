"""HTTP analysis service exposing the pipeline to the web UI.

JSON-over-HTTP under /v1: image upload creates an analysis context;
automatic and interactive analyses run against stored contexts. The context
store is in-memory with LRU eviction, so restarting the service invalidates
all context ids.
"""

from __future__ import annotations

import io
import itertools
import json
import threading
from collections import OrderedDict

import numpy as np
from fastapi import FastAPI, HTTPException, Request, Response
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from PIL import Image, UnidentifiedImageError

from . import interactive, pipeline
from .core import Config, GrayImage, Point2, config_default

MAX_CONTEXTS = 32


class ContextStore:
    """Thread-safe LRU map of context id -> (ImageContext, cached report)."""

    def __init__(self, capacity: int = MAX_CONTEXTS):
        self.capacity = capacity
        self._lock = threading.Lock()
        self._items: OrderedDict[str, dict] = OrderedDict()
        self._counter = itertools.count(1)

    def next_id(self) -> str:
        return f"ctx-{next(self._counter):06d}"

    def put(self, ctx: pipeline.ImageContext) -> None:
        with self._lock:
            self._items[ctx.context_id] = {"ctx": ctx, "report_json": None}
            self._items.move_to_end(ctx.context_id)
            while len(self._items) > self.capacity:
                self._items.popitem(last=False)

    def get(self, context_id: str) -> dict:
        with self._lock:
            if context_id not in self._items:
                raise KeyError(context_id)
            self._items.move_to_end(context_id)
            return self._items[context_id]


def _decode_upload(body: bytes) -> GrayImage:
    try:
        with Image.open(io.BytesIO(body)) as im:
            if im.format not in ("PNG", "PPM"):
                raise ValueError(f"unsupported format {im.format!r} (PNG or PGM expected)")
            if im.mode != "L":
                raise ValueError(f"expected 8-bit grayscale, got mode {im.mode!r}")
            arr = np.asarray(im, dtype=np.uint8)
    except UnidentifiedImageError:
        raise ValueError("body is not a readable PNG/PGM image")
    return GrayImage(arr.astype(np.float64))


def _preview_png(img: GrayImage) -> bytes:
    arr = np.clip(np.rint(img.data), 0, 255).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(arr, mode="L").save(buf, format="PNG")
    return buf.getvalue()


def create_app(cfg: Config | None = None, static_dir: str | None = None) -> FastAPI:
    cfg = cfg or config_default()
    store = ContextStore()
    app = FastAPI(title="angiokit", version="0.1.0")

    @app.get("/v1/health")
    def health():
        return {"status": "ok", "contexts": len(store._items)}

    @app.post("/v1/contexts")
    async def create_context(request: Request):
        body = await request.body()
        if not body:
            raise HTTPException(status_code=400, detail="empty request body")
        try:
            img = _decode_upload(body)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        ctx = pipeline.prepare_context(img, cfg, context_id=store.next_id())
        store.put(ctx)
        return {
            "context_id": ctx.context_id,
            "width": img.width,
            "height": img.height,
            "ridge_points": len(ctx.ridges),
            "contours": ctx.contour.to_jsonable(),
        }

    def _entry(context_id: str) -> dict:
        try:
            return store.get(context_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown context {context_id!r}")

    @app.post("/v1/contexts/{context_id}/auto")
    def auto(context_id: str):
        entry = _entry(context_id)
        # Context immutability: the report is computed once and replayed
        # byte-identically on repeated calls.
        if entry["report_json"] is None:
            ctx = entry["ctx"]
            if len(ctx.ridges) == 0:
                raise HTTPException(status_code=422, detail="no ridge points in image")
            report = pipeline.run_auto(ctx)
            entry["report_json"] = report.to_json(include_timings=True)
        return Response(content=entry["report_json"], media_type="application/json")

    @app.post("/v1/contexts/{context_id}/segment")
    async def segment(context_id: str, request: Request):
        entry = _entry(context_id)
        ctx = entry["ctx"]
        try:
            body = json.loads(await request.body())
            start = Point2(float(body["start"][0]), float(body["start"][1]))
            end = Point2(float(body["end"][0]), float(body["end"][1]))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError, IndexError):
            raise HTTPException(status_code=400,
                                detail="body must be {\"start\": [x, y], \"end\": [x, y]}")
        if not (ctx.original.in_bounds(start.x, start.y)
                and ctx.original.in_bounds(end.x, end.y)):
            raise HTTPException(status_code=400, detail="click outside image bounds")
        if len(ctx.ridges) == 0:
            raise HTTPException(status_code=422, detail="no ridge points in image")
        req = interactive.InteractiveRequest(start, end)
        try:
            rr = interactive.track_segment(ctx.pre.tracking, ctx.ridges,
                                           ctx.contour, req, ctx.config)
        except interactive.UnreachableEndpointError as exc:
            return JSONResponse(status_code=422, content={
                "detail": str(exc),
                "partial_routes": {
                    k: [[tp.pos.x, tp.pos.y] for tp in v]
                    for k, v in exc.partial_routes.items()
                },
            })
        return {
            "chosen_direction": rr.chosen_direction,
            "degenerate": rr.degenerate,
            "snapped_start": [rr.snapped_start.x, rr.snapped_start.y],
            "snapped_end": [rr.snapped_end.x, rr.snapped_end.y],
            "route": [[tp.pos.x, tp.pos.y] for tp in rr.route],
            "diameters": rr.segment.diameters,
            "mean_diameter": rr.segment.mean_diameter,
            "degrees": rr.segment.degrees,
            "tau_3": ctx.config.stenosis_tau_3,
            "findings": [f.to_jsonable() for f in rr.findings],
        }

    @app.get("/v1/contexts/{context_id}/image")
    def image(context_id: str, stage: str = "equalized"):
        entry = _entry(context_id)
        ctx = entry["ctx"]
        stages = {"original": ctx.original, **ctx.pre.stages()}
        if stage not in stages:
            raise HTTPException(status_code=400,
                                detail=f"unknown stage {stage!r} "
                                       f"(one of {sorted(stages)})")
        return Response(content=_preview_png(stages[stage]),
                        media_type="image/png")

    if static_dir:
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="static")
    return app
