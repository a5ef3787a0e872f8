"""Per-point diameter measurement and stenosis grading of vessel segments.

The diameter at a tracked point is the span between the two contour
intersections of the normal to a total-least-squares line through the
nearest centerline points. Stenotic degrees normalize each diameter by the
segment mean; the discriminant flags degrees below the threshold and
contiguous flagged runs become findings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from .contour import VesselContour, opposite_hits
from .core import Config, Direction2, Point2

if TYPE_CHECKING:
    from .tracker import TrackPoint


@dataclass
class VesselSegment:
    """A branch-free run of centerline points with per-point diameters."""

    id: int
    points: list
    source_track: int = -1
    start_kind: str = "interior"   # bifurcation | termination | interior
    end_kind: str = "interior"
    diameters: list = field(default_factory=list)    # float or None per point
    mean_diameter: float | None = None
    degrees: list = field(default_factory=list)      # float or None per point

    def measured(self) -> list[float]:
        return [d for d in self.diameters if d is not None]

    def arc_length(self) -> float:
        pos = np.array([[tp.pos.x, tp.pos.y] for tp in self.points])
        if len(pos) < 2:
            return 0.0
        return float(np.hypot(np.diff(pos[:, 0]), np.diff(pos[:, 1])).sum())


@dataclass(frozen=True)
class StenosisFinding:
    """A flagged stenotic region of one segment."""

    segment_id: int
    point_range: tuple[int, int]     # inclusive ordinal interval
    location: Point2                 # position of the minimum-degree point
    min_degree: float
    mean_degree: float

    def to_jsonable(self) -> dict:
        return {
            "segment": self.segment_id,
            "range": [self.point_range[0], self.point_range[1]],
            "location": [self.location.x, self.location.y],
            "min_degree": self.min_degree,
            "mean_degree": self.mean_degree,
        }


def fit_line_tls(points: np.ndarray) -> tuple[Point2, Direction2]:
    """Total-least-squares (orthogonal) line fit: centroid + principal axis.

    Works for vertical runs where an y-on-x regression degenerates.
    """
    centroid = points.mean(axis=0)
    centered = points - centroid
    cov = centered.T @ centered
    # Principal eigenvector of the 2x2 covariance.
    tr_half = (cov[0, 0] + cov[1, 1]) / 2.0
    disc = math.sqrt(((cov[0, 0] - cov[1, 1]) / 2.0) ** 2 + cov[0, 1] ** 2)
    lam = tr_half + disc
    vx, vy = (cov[0, 1], lam - cov[0, 0]) if abs(cov[0, 1]) > 1e-12 \
        else ((1.0, 0.0) if cov[0, 0] >= cov[1, 1] else (0.0, 1.0))
    n = math.hypot(vx, vy)
    if n == 0.0:
        vx, vy, n = 1.0, 0.0, 1.0
    return Point2(float(centroid[0]), float(centroid[1])), \
        Direction2.from_vector(vx / n, vy / n)


def measure_diameter(segment_points: list, k: int, contour: VesselContour,
                     prior_diameters: list[float] | None = None,
                     outlier_factor: float = 4.0) -> float | None:
    """Diameter at ordinal k of a point run, or None when unmeasurable.

    Fits a total-least-squares line through the 4 nearest centerline points
    (fewer when the run is shorter), casts its normal through the point, and
    returns the span between the nearest contour hits on opposite sides.
    Returns None when a side has no hit or when the value exceeds
    outlier_factor x the median of prior_diameters (normals near junctions
    can cross into the junction pocket and report the pocket span).
    """
    n = len(segment_points)
    if n < 2:
        raise ValueError("need at least 2 points to orient a normal")
    if not 0 <= k < n:
        raise IndexError(f"ordinal {k} out of range for {n} points")
    p_k = segment_points[k].pos
    coords = np.array([[tp.pos.x, tp.pos.y] for tp in segment_points])
    d2 = (coords[:, 0] - p_k.x) ** 2 + (coords[:, 1] - p_k.y) ** 2
    nearest = np.argsort(d2, kind="stable")[:min(4, n)]
    _, axis = fit_line_tls(coords[nearest])
    normal = axis.normal()
    before, after = opposite_hits(contour, p_k, normal)
    if before is None or after is None:
        return None
    diameter = after[1].dist(before[1])
    if prior_diameters:
        guard = outlier_factor * float(np.median(prior_diameters))
        if diameter > guard:
            return None
    return diameter


def stenotic_degree(diameters: list, mean_diameter: float) -> list:
    """Per-point degree D_i / mean; unmeasured positions stay None."""
    if mean_diameter is None or mean_diameter <= 0:
        raise ValueError("mean diameter must be positive")
    return [None if d is None else d / mean_diameter for d in diameters]


def discriminate(degrees: list, tau_3: float) -> list[int]:
    """1 marks a stenotic point (degree strictly below tau_3), else 0.

    Unmeasured positions count as 0 (cannot witness a narrowing).
    """
    return [1 if (s is not None and s < tau_3) else 0 for s in degrees]


CAP_TRIM = 2   # minimum points skipped at a cutoff-bounded segment end


def quantify_segment(segment: VesselSegment, contour: VesselContour,
                     cfg: Config | None = None) -> VesselSegment:
    """Fill diameters, mean, and degrees of a segment in place.

    Diameters are measured in point order so the running-median outlier
    guard sees everything measured so far. Points within half a vessel
    width of a cutoff-bounded end are then unmeasured: past a termination
    the normal crosses the rounded vessel cap, and next to a bifurcation it
    crosses the junction pocket; neither span is a diameter. Segments with
    no measurable point keep mean_diameter = None.
    """
    cfg = cfg or Config()
    n = len(segment.points)
    measured: list[float] = []
    diameters: list = [None] * n
    # Center-outward order: segment ends can yield sliver chords (cap corner
    # cuts) that would poison the running median the guard compares against.
    for k in sorted(range(n), key=lambda i: abs(i - n // 2)):
        d = measure_diameter(segment.points, k, contour, prior_diameters=measured,
                             outlier_factor=cfg.diameter_outlier_factor)
        diameters[k] = d
        if d is not None:
            measured.append(d)

    if measured:
        zone = float(np.median(measured)) / 2.0 + 1.0
        pos = np.array([[tp.pos.x, tp.pos.y] for tp in segment.points])
        steps = np.hypot(np.diff(pos[:, 0]), np.diff(pos[:, 1])) if n > 1 else np.zeros(0)
        arc = np.concatenate([[0.0], np.cumsum(steps)])
        for end, kind in ((0, segment.start_kind), (n - 1, segment.end_kind)):
            if kind == "interior":
                continue
            dist_to_end = np.abs(arc - arc[end])
            cut = (dist_to_end <= zone)
            for k in np.nonzero(cut)[0]:
                diameters[k] = None
            for k in (range(CAP_TRIM) if end == 0 else range(n - CAP_TRIM, n)):
                if 0 <= k < n:
                    diameters[k] = None
        measured = [d for d in diameters if d is not None]

    segment.diameters = diameters
    if measured:
        segment.mean_diameter = float(np.mean(measured))
        segment.degrees = stenotic_degree(diameters, segment.mean_diameter)
    else:
        segment.mean_diameter = None
        segment.degrees = [None] * len(diameters)
    return segment


def find_stenoses(segment: VesselSegment, cfg: Config | None = None,
                  min_run: int = 2) -> list[StenosisFinding]:
    """Maximal runs of flagged points become one finding each.

    Runs shorter than min_run points are discarded as single-point noise.
    """
    cfg = cfg or Config()
    if not segment.degrees or segment.mean_diameter is None:
        return []
    flags = discriminate(segment.degrees, cfg.stenosis_tau_3)
    findings: list[StenosisFinding] = []
    i = 0
    n = len(flags)
    while i < n:
        if flags[i] != 1:
            i += 1
            continue
        j = i
        while j + 1 < n and flags[j + 1] == 1:
            j += 1
        if j - i + 1 >= min_run:
            run_degrees = [(segment.degrees[k], k) for k in range(i, j + 1)]
            min_degree = min(d for d, _ in run_degrees)
            # Flat dip bottoms tie within measurement noise; take the tied
            # point nearest the run midpoint so the location lands on the
            # narrowing's center rather than a noise-picked edge.
            mid = (i + j) / 2.0
            k_min = min((k for d, k in run_degrees if d <= min_degree * 1.02),
                        key=lambda k: abs(k - mid))
            findings.append(StenosisFinding(
                segment_id=segment.id,
                point_range=(i, j),
                location=segment.points[k_min].pos,
                min_degree=float(min_degree),
                mean_degree=float(np.mean([d for d, _ in run_degrees])),
            ))
        i = j + 1
    return findings
