"""Interactive per-segment extraction and stenosis analysis.

The user picks a start and an end point; both snap to the nearest ridge
points, and tracking proceeds from the start in both initial directions,
choosing at each step the arc candidate with the highest potential energy
(local intensity plus an endpoint-attraction term). Among the routes that
reach the endpoint, the one with fewer points wins; the winner is
quantified like any automatic segment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .contour import VesselContour
from .core import Config, Direction2, GrayImage, Point2
from .quant import StenosisFinding, VesselSegment, find_stenoses, quantify_segment
from .tracker import (
    RidgeSet,
    TrackPoint,
    TrackerState,
    adjust_to_centerline,
    arc_candidates,
    initial_directions,
)


class UnreachableEndpointError(Exception):
    """Neither direction reached the endpoint; partial routes attached."""

    def __init__(self, message: str, partial_routes):
        super().__init__(message)
        self.partial_routes = partial_routes


@dataclass(frozen=True)
class InteractiveRequest:
    start_click: Point2
    end_click: Point2


@dataclass
class RouteResult:
    route: list[TrackPoint]
    chosen_direction: str              # forward | backward
    segment: VesselSegment
    findings: list[StenosisFinding]
    snapped_start: Point2
    snapped_end: Point2
    degenerate: bool = False           # start and end snapped together


def snap_to_ridge(click: Point2, ridges: RidgeSet) -> Point2:
    """Nearest ridge point; ties broken by lexicographic (y, x)."""
    return ridges.nearest(click)


def energy(img: GrayImage, p: Point2, p_end: Point2, lam: float) -> float:
    """Potential energy: intensity plus endpoint attraction.

    E(p) = I(p) + lam / sqrt(|p - p_end|), with bilinear intensity at
    sub-pixel p. At p == p_end the attraction dominates: +inf.
    """
    d = p.dist(p_end)
    if d == 0.0:
        return math.inf
    return img.sample(p.x, p.y) + lam / math.sqrt(d)


def _energy_step(img: GrayImage, prev: TrackPoint, p_end: Point2,
                 state: TrackerState, cfg: Config):
    """One tracking step choosing the max-energy arc candidate."""
    d = cfg.search_radius_d
    if not img.in_bounds(prev.pos.x, prev.pos.y, margin=d):
        return None, "border"
    angles, xs, ys, vals = arc_candidates(img, prev.pos, prev.dir.theta,
                                          cfg.delta_theta, d)
    dist = np.hypot(xs - p_end.x, ys - p_end.y)
    with np.errstate(divide="ignore"):
        energies = np.where(dist > 0, vals + cfg.energy_lambda / np.sqrt(dist), math.inf)
    energies[~np.isfinite(vals)] = -math.inf
    k = int(np.argmax(energies))
    if not np.isfinite(vals[k]):
        return None, "border"
    cand = Point2(float(xs[k]), float(ys[k]))
    if vals[k] <= cfg.gray_floor_I0:
        return None, "low_intensity"
    if state.np_at(cand) >= cfg.crowd_tau_P:
        return None, "crowded"
    direction = Direction2.from_vector(cand.x - prev.pos.x, cand.y - prev.pos.y)
    state.mark_visit(cand)
    return TrackPoint(cand, cand, direction, prev.index_in_track + 1), None


def _route_pass(img: GrayImage, contour: VesselContour | None, start: TrackPoint,
                p_end: Point2, cfg: Config, max_steps: int = 10000):
    """Greedy energy route from start toward p_end.

    Returns (points incl. start, reached flag, termination reason).
    """
    state = TrackerState(img.shape, cfg)
    state.mark_visit(start.pos)
    points = [start]
    prev = start
    if start.pos.dist(p_end) < cfg.stop_tau_d:
        return points, True, None
    for _ in range(max_steps):
        tp, reason = _energy_step(img, prev, p_end, state, cfg)
        if tp is None:
            return points, False, reason
        if contour is not None:
            adjusted = adjust_to_centerline(tp, prev, contour, cfg)
            spacing = adjusted.pos.dist(prev.pos)
            if 0.5 * cfg.search_radius_d <= spacing <= 1.5 * cfg.search_radius_d:
                tp = adjusted
        points.append(tp)
        prev = tp
        if tp.pos.dist(p_end) < cfg.stop_tau_d:
            return points, True, None
    return points, False, "step_budget"


def track_segment(img: GrayImage, ridges: RidgeSet, contour: VesselContour | None,
                  req: InteractiveRequest, cfg: Config | None = None) -> RouteResult:
    """Extract and analyze the vessel segment between two clicked points.

    Both clicks snap to ridge points; tracking runs in the two initial
    directions with max-energy stepping, the usual intensity and crowding
    guards, and centerline adjustment. Among routes reaching within
    stop_tau_d of the endpoint the one with fewer points wins (ties:
    forward). Raises UnreachableEndpointError with the partial routes when
    neither direction arrives.
    """
    cfg = cfg or Config()
    p_start = snap_to_ridge(req.start_click, ridges)
    p_end = snap_to_ridge(req.end_click, ridges)

    if p_start.dist(p_end) < cfg.stop_tau_d:
        start_tp = TrackPoint(p_start, p_start, Direction2.from_angle(0.0), 0)
        segment = VesselSegment(id=0, points=[start_tp])
        return RouteResult([start_tp], "forward", segment, [], p_start, p_end,
                           degenerate=True)

    fwd, bwd, _, _ = initial_directions(img, p_start, cfg)
    routes = {}
    for label, direction in (("forward", fwd), ("backward", bwd)):
        start_tp = TrackPoint(p_start, p_start, direction, 0)
        points, reached, reason = _route_pass(img, contour, start_tp, p_end, cfg)
        routes[label] = (points, reached, reason)

    reached = {k: v for k, v in routes.items() if v[1]}
    if not reached:
        raise UnreachableEndpointError(
            "no route reached the endpoint "
            f"(forward: {routes['forward'][2]}, backward: {routes['backward'][2]})",
            {k: v[0] for k, v in routes.items()})
    chosen = min(reached, key=lambda k: (len(reached[k][0]), k == "backward"))
    route = reached[chosen][0]

    segment = VesselSegment(id=0, points=route)
    findings: list[StenosisFinding] = []
    if contour is not None and len(route) >= 2:
        quantify_segment(segment, contour, cfg)
        findings = find_stenoses(segment, cfg)
    return RouteResult(route, chosen, segment, findings, p_start, p_end)
