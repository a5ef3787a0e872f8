"""Synthetic vessel phantom generator with exact analytic ground truth.

Phantoms are built from parametric centerline paths (lines, circular arcs,
cubic Bezier curves) carrying a width profile over arc length. The renderer
produces a grayscale image plus a PhantomTruth object holding dense
centerline samples, supersampled masks, stenosis intervals, and bifurcation
points, used as the verification oracle for tracking, diameter measurement,
and stenosis detection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter
from scipy.spatial import cKDTree

from .core import GrayImage, Point2

DENSE_STEP = 0.25          # arc-length spacing of truth centerline samples
SUPERSAMPLE = 4            # mask rasterization factor per axis


@dataclass(frozen=True)
class LinePath:
    x0: float
    y0: float
    x1: float
    y1: float

    def point_at(self, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return self.x0 + t * (self.x1 - self.x0), self.y0 + t * (self.y1 - self.y0)


@dataclass(frozen=True)
class ArcPath:
    cx: float
    cy: float
    radius: float
    theta0: float
    theta1: float

    def point_at(self, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        th = self.theta0 + t * (self.theta1 - self.theta0)
        return self.cx + self.radius * np.cos(th), self.cy + self.radius * np.sin(th)


class BezierPath:
    """Cubic Bezier by four control points ((x, y) pairs)."""

    def __init__(self, points):
        self.ctrl = tuple((float(x), float(y)) for x, y in points)
        if len(self.ctrl) != 4:
            raise ValueError("cubic Bezier needs exactly 4 control points")

    def point_at(self, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        (x0, y0), (x1, y1), (x2, y2), (x3, y3) = self.ctrl
        mt = 1.0 - t
        b0 = mt ** 3
        b1 = 3 * mt ** 2 * t
        b2 = 3 * mt * t ** 2
        b3 = t ** 3
        return (b0 * x0 + b1 * x1 + b2 * x2 + b3 * x3,
                b0 * y0 + b1 * y1 + b2 * y2 + b3 * y3)


@dataclass(frozen=True)
class StenosisSpec:
    """A machined narrowing: width dips to residual x baseline over the extent."""

    center_s: float
    extent: float
    residual: float

    def __post_init__(self):
        if not 0.0 < self.residual < 1.0:
            raise ValueError("residual fraction must lie in (0, 1)")
        if self.extent <= 0:
            raise ValueError("stenosis extent must be positive")


@dataclass(frozen=True)
class WidthProfile:
    """Piecewise width over arc length: flat baseline with machined dips.

    Each dip holds the full residual width over the central half of its
    extent and tapers back to baseline with a cosine ramp on each side, so
    the minimum width equals residual x baseline exactly.
    """

    baseline: float
    stenoses: tuple = ()

    def __post_init__(self):
        if self.baseline <= 0:
            raise ValueError("baseline width must be positive")

    def width_at(self, s: np.ndarray) -> np.ndarray:
        s = np.asarray(s, dtype=np.float64)
        w = np.full_like(s, self.baseline)
        for st in self.stenoses:
            half = st.extent / 2.0
            flat = st.extent / 4.0          # residual held over the central half
            ramp = half - flat
            rel = np.abs(s - st.center_s)
            factor = np.ones_like(s)
            in_flat = rel <= flat
            in_ramp = (rel > flat) & (rel <= half)
            factor[in_flat] = st.residual
            if ramp > 0:
                u = (rel[in_ramp] - flat) / ramp
                factor[in_ramp] = st.residual + (1.0 - st.residual) * 0.5 * (1 - np.cos(np.pi * u))
            w = np.minimum(w, self.baseline * factor)
        return w


@dataclass(frozen=True)
class VesselPath:
    path: object                  # LinePath | ArcPath | BezierPath
    width: WidthProfile


@dataclass(frozen=True)
class PhantomSpec:
    name: str
    canvas: tuple = (400, 400)    # (width, height)
    paths: tuple = ()
    vessel_level: float = 200.0
    background_level: float = 50.0
    noise_sigma: float = 0.0
    blur_sigma: float = 0.6
    profile: str = "flat"         # "flat" or "gaussian" cross-section

    def __post_init__(self):
        if not self.paths:
            raise ValueError("phantom needs at least one path")
        if self.profile not in ("flat", "gaussian"):
            raise ValueError(f"unknown profile {self.profile!r}")


@dataclass(frozen=True)
class TruthStenosis:
    path_index: int
    s0: float
    s1: float
    residual: float
    location: Point2


class PhantomTruth:
    """Analytic ground truth for one rendered phantom."""

    def __init__(self, spec: PhantomSpec):
        self.spec = spec
        self.samples = []         # per path: dict(s=, x=, y=, w=)
        self._trees = []
        for vp in spec.paths:
            s, x, y = _arc_length_samples(vp.path)
            w = vp.width.width_at(s)
            self.samples.append({"s": s, "x": x, "y": y, "w": w})
            self._trees.append(cKDTree(np.column_stack([x, y])))
        self._check_margins()
        self.stenoses = self._collect_stenoses()
        self.bifurcations = self._collect_bifurcations()
        self._mask = None
        self._path_masks: dict[int, np.ndarray] = {}

    def _check_margins(self):
        w, h = self.spec.canvas
        margin = 2.0 * max(sm["w"].max() for sm in self.samples)
        for sm in self.samples:
            if (sm["x"].min() < margin or sm["x"].max() > w - 1 - margin
                    or sm["y"].min() < margin or sm["y"].max() > h - 1 - margin):
                raise ValueError("phantom path escapes the canvas margin")

    def _collect_stenoses(self):
        out = []
        for i, vp in enumerate(self.spec.paths):
            sm = self.samples[i]
            for st in vp.width.stenoses:
                k = int(np.argmin(np.abs(sm["s"] - st.center_s)))
                out.append(TruthStenosis(
                    path_index=i,
                    s0=st.center_s - st.extent / 2.0,
                    s1=st.center_s + st.extent / 2.0,
                    residual=st.residual,
                    location=Point2(float(sm["x"][k]), float(sm["y"][k])),
                ))
        return out

    def _collect_bifurcations(self):
        # Junctions are modeled as shared path endpoints.
        ends = []
        for sm in self.samples:
            ends.append((sm["x"][0], sm["y"][0]))
            ends.append((sm["x"][-1], sm["y"][-1]))
        found = []
        for i in range(len(ends)):
            for j in range(i + 1, len(ends)):
                if math.hypot(ends[i][0] - ends[j][0], ends[i][1] - ends[j][1]) < 1e-6:
                    p = Point2(ends[i][0], ends[i][1])
                    if not any(p.dist(q) < 1e-6 for q in found):
                        found.append(p)
        return found

    def path_length(self, path_index: int) -> float:
        return float(self.samples[path_index]["s"][-1])

    def total_length(self) -> float:
        return sum(self.path_length(i) for i in range(len(self.samples)))

    def distance_and_width(self, xs, ys, path_index=None, upper_bound=np.inf):
        """Distance to the nearest centerline sample and the width there.

        With path_index=None the minimum over all paths is taken. Points
        farther than upper_bound report distance inf and width 0.
        """
        xs = np.atleast_1d(np.asarray(xs, dtype=np.float64))
        ys = np.atleast_1d(np.asarray(ys, dtype=np.float64))
        pts = np.column_stack([xs, ys])
        indices = range(len(self.samples)) if path_index is None else [path_index]
        best_d = np.full(len(pts), np.inf)
        best_w = np.zeros(len(pts))
        for i in indices:
            d, k = self._trees[i].query(pts, distance_upper_bound=upper_bound, workers=-1)
            better = d < best_d
            best_d[better] = d[better]
            kk = np.minimum(k[better], len(self.samples[i]["w"]) - 1)
            best_w[better] = self.samples[i]["w"][kk]
        return best_d, best_w

    def contains(self, xs, ys, path_index=None, slack: float = 0.0) -> np.ndarray:
        """Analytic membership: distance to centerline <= width/2 + slack."""
        max_w = max(sm["w"].max() for sm in self.samples)
        d, w = self.distance_and_width(xs, ys, path_index,
                                       upper_bound=max_w / 2.0 + slack + 1e-9)
        return d <= w / 2.0 + slack

    @property
    def mask(self) -> np.ndarray:
        """Boolean vessel mask at image resolution, 4x supersampled."""
        if self._mask is None:
            self._mask = self._rasterize(None)
        return self._mask

    def path_mask(self, path_index: int) -> np.ndarray:
        if path_index not in self._path_masks:
            self._path_masks[path_index] = self._rasterize(path_index)
        return self._path_masks[path_index]

    def _rasterize(self, path_index) -> np.ndarray:
        # A pixel is inside when at least half of its n x n subsamples are.
        # Pixels far from the boundary are classified from their center alone;
        # only the boundary band pays for supersampling.
        w, h = self.spec.canvas
        n = SUPERSAMPLE
        gx, gy = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
        max_w = max(sm["w"].max() for sm in self.samples)
        d, wid = self.distance_and_width(gx.ravel(), gy.ravel(), path_index,
                                         upper_bound=max_w / 2.0 + 1.5)
        margin = math.hypot(0.5, 0.5)  # farthest subsample from the pixel center
        mask = (d + margin <= wid / 2.0).reshape(h, w)
        band = np.flatnonzero((d > wid / 2.0 - margin) & (d - margin <= wid / 2.0))
        if band.size:
            offs = (np.arange(n) + 0.5) / n - 0.5
            ox, oy = np.meshgrid(offs, offs)
            sx = (gx.ravel()[band][:, None] + ox.ravel()[None, :]).ravel()
            sy = (gy.ravel()[band][:, None] + oy.ravel()[None, :]).ravel()
            inside = self.contains(sx, sy, path_index).reshape(band.size, n * n)
            mask.ravel()[band] = inside.sum(axis=1) >= (n * n) // 2
        return mask


def _arc_length_samples(path, step: float = DENSE_STEP):
    """Uniform arc-length samples (s, x, y) along a parametric path."""
    t = np.linspace(0.0, 1.0, 4096)
    x, y = path.point_at(t)
    seg = np.hypot(np.diff(x), np.diff(y))
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    total = cum[-1]
    if total <= 0:
        raise ValueError("degenerate path of zero length")
    s = np.arange(0.0, total + step / 2.0, step)
    s[-1] = min(s[-1], total)
    xs = np.interp(s, cum, x)
    ys = np.interp(s, cum, y)
    return s, xs, ys


def render_phantom(spec: PhantomSpec, seed: int = 0) -> tuple[GrayImage, PhantomTruth]:
    """Rasterize a phantom spec and return the image plus its ground truth.

    The vessel cross-section is a flat top with a 1 px smoothed shoulder (or
    a Gaussian profile whose FWHM equals the spec width), laid over the
    background level, then blurred and degraded with seeded Gaussian noise.
    Truth is computed analytically before degradation.
    """
    truth = PhantomTruth(spec)
    w, h = spec.canvas
    gx, gy = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    prof = np.zeros((h, w), dtype=np.float64)
    max_w = max(sm["w"].max() for sm in truth.samples)
    bound = max_w / 2.0 + 0.5 if spec.profile == "flat" else 1.8 * max_w
    for i in range(len(spec.paths)):
        d, width = truth.distance_and_width(gx.ravel(), gy.ravel(), path_index=i,
                                            upper_bound=bound + 1e-9)
        near = np.isfinite(d)
        p = np.zeros_like(d)
        if spec.profile == "flat":
            p[near] = np.clip(width[near] / 2.0 + 0.5 - d[near], 0.0, 1.0)
        else:
            sigma = width[near] / (2.0 * math.sqrt(2.0 * math.log(2.0)))  # FWHM = width
            p[near] = np.exp(-d[near] ** 2 / (2.0 * sigma ** 2))
        prof = np.maximum(prof, p.reshape(h, w))
    img = spec.background_level + (spec.vessel_level - spec.background_level) * prof
    if spec.blur_sigma > 0:
        img = gaussian_filter(img, spec.blur_sigma, mode="nearest")
    if spec.noise_sigma > 0:
        rng = np.random.default_rng(seed)
        img = img + rng.normal(0.0, spec.noise_sigma, size=img.shape)
    return GrayImage(np.clip(img, 0.0, 255.0)), truth


def _line(x0, y0, x1, y1, width, stenoses=()):
    return VesselPath(LinePath(x0, y0, x1, y1), WidthProfile(width, tuple(stenoses)))


def straight_tube(name: str, width: float, stenoses=(), length: float = 300.0,
                  canvas=(400, 400), **kw) -> PhantomSpec:
    cx, cy = canvas[0] / 2.0, canvas[1] / 2.0
    path = _line(cx - length / 2.0, cy, cx + length / 2.0, cy, width, stenoses)
    return PhantomSpec(name=name, canvas=canvas, paths=(path,), **kw)


def inclined_tube(name: str, angle_deg: float, width: float = 6.0,
                  length: float = 300.0, canvas=(400, 400), **kw) -> PhantomSpec:
    cx, cy = canvas[0] / 2.0, canvas[1] / 2.0
    a = math.radians(angle_deg)
    dx, dy = math.cos(a) * length / 2.0, math.sin(a) * length / 2.0
    path = _line(cx - dx, cy - dy, cx + dx, cy + dy, width)
    return PhantomSpec(name=name, canvas=canvas, paths=(path,), **kw)


def arc_tube(name: str, radius: float, width: float = 6.0, span_deg: float = 120.0,
             canvas=(400, 400), **kw) -> PhantomSpec:
    cx = canvas[0] / 2.0
    cy = canvas[1] / 2.0 + radius / 2.0
    half = math.radians(span_deg) / 2.0
    mid = -math.pi / 2.0
    path = VesselPath(ArcPath(cx, cy, radius, mid - half, mid + half), WidthProfile(width))
    return PhantomSpec(name=name, canvas=canvas, paths=(path,), **kw)


def y_phantom(name: str, separation_deg: float, width: float = 7.0,
              stem_len: float = 150.0, arm_len: float = 170.0,
              canvas=(400, 400), **kw) -> PhantomSpec:
    """A stem splitting into two arms separated by the given angle."""
    jx, jy = 190.0, 200.0
    half = math.radians(separation_deg) / 2.0
    stem = _line(jx - stem_len, jy, jx, jy, width)
    arm1 = _line(jx, jy, jx + arm_len * math.cos(half), jy - arm_len * math.sin(half), width)
    arm2 = _line(jx, jy, jx + arm_len * math.cos(half), jy + arm_len * math.sin(half), width)
    return PhantomSpec(name=name, canvas=canvas, paths=(stem, arm1, arm2), **kw)


def ring_phantom(name: str = "ring", radius: float = 110.0, width: float = 7.0,
                 canvas=(400, 400), **kw) -> PhantomSpec:
    path = VesselPath(ArcPath(200.0, 200.0, radius, 0.0, 2.0 * math.pi), WidthProfile(width))
    return PhantomSpec(name=name, canvas=canvas, paths=(path,), **kw)


def stenosed_tube(name: str, residual: float, width: float = 9.0, extent: float = 30.0,
                  length: float = 320.0, center_s: float | None = None, **kw) -> PhantomSpec:
    s = length / 2.0 if center_s is None else center_s
    return straight_tube(name, width, stenoses=[StenosisSpec(s, extent, residual)],
                         length=length, **kw)


def standard_suite() -> list[PhantomSpec]:
    """The fixed verification catalog. Deterministic across runs."""
    specs: list[PhantomSpec] = []
    for w in (4, 6, 8, 10, 12):
        specs.append(straight_tube(f"straight_w{w}", float(w)))
    for a in (0, 15, 30, 45, 60, 75, 90):
        specs.append(inclined_tube(f"incline_{a}", float(a)))
    for r in (40, 80, 150):
        span = {40: 180.0, 80: 140.0, 150: 90.0}[r]
        specs.append(arc_tube(f"arc_r{r}", float(r), span_deg=span))
    for sep in (30, 60, 90, 120):
        specs.append(y_phantom(f"y_sep{sep}", float(sep)))
    specs.append(ring_phantom())
    for res in (0.4, 0.5, 0.6, 0.75):
        specs.append(stenosed_tube(f"sten_r{int(res * 100)}", res))
    specs.append(stenosed_tube("sten_r90", 0.9))
    specs.append(PhantomSpec(
        name="sten_double", canvas=(400, 400),
        paths=(_line(40.0, 200.0, 360.0, 200.0, 9.0,
                     [StenosisSpec(110.0, 26.0, 0.55), StenosisSpec(230.0, 26.0, 0.65)]),),
    ))
    specs.append(straight_tube("lowcontrast_w8", 8.0, vessel_level=110.0, background_level=60.0))
    specs.append(straight_tube("noisy_w8", 8.0, noise_sigma=8.0))
    specs.append(straight_tube("gaussian_w8", 8.0, profile="gaussian"))
    return specs


def suite_spec(name: str) -> PhantomSpec:
    for spec in standard_suite():
        if spec.name == name:
            return spec
    raise KeyError(f"no phantom named {name!r} in the standard suite")


def spec_to_jsonable(spec: PhantomSpec) -> dict:
    paths = []
    for vp in spec.paths:
        p = vp.path
        if isinstance(p, LinePath):
            geom = {"kind": "line", "x0": p.x0, "y0": p.y0, "x1": p.x1, "y1": p.y1}
        elif isinstance(p, ArcPath):
            geom = {"kind": "arc", "cx": p.cx, "cy": p.cy, "radius": p.radius,
                    "theta0": p.theta0, "theta1": p.theta1}
        else:
            geom = {"kind": "bezier", "points": list(p.ctrl)}
        paths.append({
            "geometry": geom,
            "baseline_width": vp.width.baseline,
            "stenoses": [{"center_s": s.center_s, "extent": s.extent,
                          "residual": s.residual} for s in vp.width.stenoses],
        })
    return {
        "name": spec.name,
        "canvas": list(spec.canvas),
        "paths": paths,
        "vessel_level": spec.vessel_level,
        "background_level": spec.background_level,
        "noise_sigma": spec.noise_sigma,
        "blur_sigma": spec.blur_sigma,
        "profile": spec.profile,
    }


def spec_from_jsonable(obj: dict) -> PhantomSpec:
    paths = []
    for entry in obj["paths"]:
        g = entry["geometry"]
        if g["kind"] == "line":
            geom = LinePath(g["x0"], g["y0"], g["x1"], g["y1"])
        elif g["kind"] == "arc":
            geom = ArcPath(g["cx"], g["cy"], g["radius"], g["theta0"], g["theta1"])
        elif g["kind"] == "bezier":
            geom = BezierPath(g["points"])
        else:
            raise ValueError(f"unknown path kind {g['kind']!r}")
        stens = tuple(StenosisSpec(s["center_s"], s["extent"], s["residual"])
                      for s in entry["stenoses"])
        paths.append(VesselPath(geom, WidthProfile(entry["baseline_width"], stens)))
    return PhantomSpec(
        name=obj["name"], canvas=tuple(obj["canvas"]), paths=tuple(paths),
        vessel_level=obj["vessel_level"], background_level=obj["background_level"],
        noise_sigma=obj["noise_sigma"], blur_sigma=obj["blur_sigma"],
        profile=obj["profile"])


def save_fixture(spec: PhantomSpec, seed: int, out_dir) -> None:
    """Persist a rendered phantom for reuse: image.pgm, spec.json, truth.json."""
    import json
    from pathlib import Path

    from .core import save_gray_image

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    img, truth = render_phantom(spec, seed)
    save_gray_image(img, out / "image.pgm")
    (out / "spec.json").write_text(json.dumps(spec_to_jsonable(spec), indent=2))
    truth_obj = {
        "seed": seed,
        "paths": [{
            "length": truth.path_length(i),
            "samples": [[float(s), float(x), float(y), float(w)]
                        for s, x, y, w in zip(sm["s"], sm["x"], sm["y"], sm["w"])],
        } for i, sm in enumerate(truth.samples)],
        "stenoses": [{
            "path_index": t.path_index, "s0": t.s0, "s1": t.s1,
            "residual": t.residual, "location": [t.location.x, t.location.y],
        } for t in truth.stenoses],
        "bifurcations": [[b.x, b.y] for b in truth.bifurcations],
    }
    (out / "truth.json").write_text(json.dumps(truth_obj))
