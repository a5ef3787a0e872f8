"""Ridge detection and adaptive geometrical centerline tracking.

Tracking runs on the vesselness-gated tracking image: ridge points seed the
tracker, bidirectional arc searches grow centerline tracks, contour-based
adjustment recenters each point, fan-ring bifurcation detection queues new
branches, and cutoff points split tracks into branch-free segments.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

import numpy as np

from .contour import VesselContour, opposite_hits
from .core import Config, Direction2, GrayImage, Point2
from .quant import VesselSegment

RIDGE_SIGMA = 1.0       # Gaussian scale of the ridge-test Hessian
RIDGE_LAM1_TOL = 0.08   # lambda1 admitted up to this fraction of |lambda2|
ARC_STEP_DEG = 1.0      # angular sampling of search arcs


class RidgeSet:
    """Integer ridge pixels with an occupancy grid for O(1) lookup."""

    def __init__(self, points: np.ndarray, shape: tuple[int, int]):
        self.points = points.astype(np.int64)      # (N, 2) columns (x, y)
        self.shape = shape
        self.occupancy = np.zeros(shape, dtype=bool)
        if len(points):
            self.occupancy[self.points[:, 1], self.points[:, 0]] = True

    def __len__(self) -> int:
        return len(self.points)

    def __contains__(self, xy) -> bool:
        x, y = int(xy[0]), int(xy[1])
        h, w = self.shape
        return 0 <= x < w and 0 <= y < h and bool(self.occupancy[y, x])

    def nearest(self, p: Point2) -> Point2:
        """Closest ridge point; ties broken by lexicographic (y, x)."""
        if len(self.points) == 0:
            raise ValueError("empty ridge set")
        dx = self.points[:, 0] - p.x
        dy = self.points[:, 1] - p.y
        d2 = dx * dx + dy * dy
        best = d2.min()
        cand = self.points[d2 <= best + 1e-12]
        order = np.lexsort((cand[:, 0], cand[:, 1]))
        x, y = cand[order[0]]
        return Point2(float(x), float(y))

    def in_window(self, x0: float, x1: float, y0: float, y1: float) -> np.ndarray:
        sel = ((self.points[:, 0] >= x0) & (self.points[:, 0] <= x1)
               & (self.points[:, 1] >= y0) & (self.points[:, 1] <= y1))
        return self.points[sel]


def ridge_fields(img: GrayImage):
    """The derivative fields the ridge test is evaluated on.

    Returns (gx, gy, lam1, lam2): forward-difference gradients and the
    eigenvalues (|lam1| <= |lam2|) of the Gaussian Hessian at RIDGE_SIGMA.
    Forward differences place the gradient of cell corner (x, y) on the cell
    itself, so a discrete maximum between two samples flips the sign.
    """
    from .preprocess import hessian_eigen_fields, hessian_fields

    d = img.data
    gx = np.zeros_like(d)
    gy = np.zeros_like(d)
    gx[:, :-1] = d[:, 1:] - d[:, :-1]
    gy[:-1, :] = d[1:, :] - d[:-1, :]
    ixx, ixy, iyy = hessian_fields(img, RIDGE_SIGMA)
    lam1, lam2 = hessian_eigen_fields(ixx, ixy, iyy)
    return gx, gy, lam1, lam2


def detect_ridges(img: GrayImage) -> RidgeSet:
    """Ridge pixels: gray maxima transverse to the vessel direction.

    Pixel (x, y) is a ridge point iff the gradients across its 2x2 cell
    oppose each other (grad(x,y) . grad(x+1,y+1) < 0 or
    grad(x+1,y) . grad(x,y+1) < 0) and the Hessian at all four cell corners
    is negative-definite up to discretization: lambda2 <= 0 and lambda1 at
    most RIDGE_LAM1_TOL x |lambda2|. A strict test would be empty along
    perfectly straight ridges (lambda1 is exactly zero there) and patchy on
    curved ones (a chord just inside a bent crest sees a weak along-tangent
    minimum, pushing lambda1 slightly positive).
    """
    gx, gy, lam1, lam2 = ridge_fields(img)
    dot_main = gx[:-1, :-1] * gx[1:, 1:] + gy[:-1, :-1] * gy[1:, 1:]
    dot_anti = gx[:-1, 1:] * gx[1:, :-1] + gy[:-1, 1:] * gy[1:, :-1]
    sign_change = (dot_main < 0) | (dot_anti < 0)
    neg = (lam1 <= RIDGE_LAM1_TOL * np.abs(lam2)) & (lam2 <= 0)
    all_neg = neg[:-1, :-1] & neg[:-1, 1:] & neg[1:, :-1] & neg[1:, 1:]
    ys, xs = np.nonzero(sign_change & all_neg)
    return RidgeSet(np.column_stack([xs, ys]), img.shape)


@dataclass(frozen=True)
class TrackPoint:
    """One tracked centerline point; pos may be sub-pixel after adjustment."""

    pos: Point2
    raw_pos: Point2
    dir: Direction2
    index_in_track: int = 0
    adjusted: bool = False


@dataclass(frozen=True)
class StepResult:
    point: TrackPoint | None
    reason: str | None = None   # low_intensity | crowded | border


@dataclass(frozen=True)
class Cutoff:
    ordinal: int
    kind: str                   # bifurcation | termination


@dataclass
class CenterlineTrack:
    points: list[TrackPoint]
    cutoffs: list[Cutoff]
    seed: Point2
    from_branch_queue: bool = False

    def positions(self) -> np.ndarray:
        return np.array([[tp.pos.x, tp.pos.y] for tp in self.points])

    def arc_length(self) -> float:
        pos = self.positions()
        if len(pos) < 2:
            return 0.0
        return float(np.hypot(np.diff(pos[:, 0]), np.diff(pos[:, 1])).sum())


class TrackerState:
    """Visit and bifurcation counter fields plus the pending branch queue."""

    def __init__(self, shape: tuple[int, int], cfg: Config):
        self.cfg = cfg
        self.n_p = np.zeros(shape, dtype=np.int32)
        self.n_b = np.zeros(shape, dtype=np.int32)
        self.branch_queue: list[tuple[Point2, Direction2]] = []
        self._disc_p = _disc_offsets(cfg.neighborhood_radius_P)
        self._disc_b = _disc_offsets(cfg.neighborhood_radius_B)

    def np_at(self, p: Point2) -> int:
        return int(self.n_p[_rounded(p, self.n_p.shape)])

    def visited_near(self, p: Point2, window: int = 2) -> bool:
        """Any visit registered within a (2w+1)^2 pixel window around p.

        Seeds adjacent to an existing track (stray cap or halo ridge points
        just past the stamp radius) would otherwise duplicate whole tracks.
        """
        cy, cx = _rounded(p, self.n_p.shape)
        y0, y1 = max(cy - window, 0), min(cy + window + 1, self.n_p.shape[0])
        x0, x1 = max(cx - window, 0), min(cx + window + 1, self.n_p.shape[1])
        return bool(self.n_p[y0:y1, x0:x1].max() > 0)

    def nb_at(self, p: Point2) -> int:
        return int(self.n_b[_rounded(p, self.n_b.shape)])

    def mark_visit(self, p: Point2) -> None:
        _stamp(self.n_p, p, self._disc_p)

    def mark_bifurcation(self, p: Point2) -> None:
        _stamp(self.n_b, p, self._disc_b)


def _rounded(p: Point2, shape) -> tuple[int, int]:
    y = min(max(int(round(p.y)), 0), shape[0] - 1)
    x = min(max(int(round(p.x)), 0), shape[1] - 1)
    return y, x


def _disc_offsets(radius: float) -> np.ndarray:
    r = int(math.floor(radius))
    dy, dx = np.mgrid[-r:r + 1, -r:r + 1]
    keep = dx ** 2 + dy ** 2 <= radius ** 2
    return np.column_stack([dx[keep], dy[keep]])


def _stamp(field: np.ndarray, p: Point2, offsets: np.ndarray) -> None:
    cy, cx = _rounded(p, field.shape)
    xs = offsets[:, 0] + cx
    ys = offsets[:, 1] + cy
    keep = (xs >= 0) & (xs < field.shape[1]) & (ys >= 0) & (ys < field.shape[0])
    field[ys[keep], xs[keep]] += 1


def arc_candidates(img: GrayImage, center: Point2, theta_c: float,
                   half_width: float, radius: float):
    """Sampled points and intensities on the search arc (1 degree steps).

    Samples outside the interpolation-safe image area get -inf intensity.
    Returns (angles, xs, ys, intensities).
    """
    n = max(int(round(2.0 * half_width / math.radians(ARC_STEP_DEG))) + 1, 3)
    angles = theta_c + np.linspace(-half_width, half_width, n)
    xs = center.x + radius * np.cos(angles)
    ys = center.y + radius * np.sin(angles)
    vals = img.sample_many(xs, ys)
    outside = ~((xs >= 0) & (xs <= img.width - 1) & (ys >= 0) & (ys <= img.height - 1))
    vals[outside] = -np.inf
    return angles, xs, ys, vals


def _arc_argmax(angles, xs, ys, vals, theta_c: float) -> int | None:
    """Index of the best candidate; ties go to the smaller |angle - theta_c|."""
    peak = vals.max()
    if not np.isfinite(peak):
        return None
    tied = np.nonzero(vals >= peak - 1e-12)[0]
    dev = np.abs(np.array([_circ_diff(angles[i], theta_c) for i in tied]))
    return int(tied[int(np.argmin(dev))])


def _circ_diff(a: float, b: float) -> float:
    """Circular angle distance mapped into [0, pi]."""
    d = (a - b) % (2.0 * math.pi)
    return d if d <= math.pi else 2.0 * math.pi - d


def initial_directions(img: GrayImage, seed: Point2, cfg: Config):
    """Bidirectional start of a track from a seed ridge point.

    The forward point is the intensity argmax over the full circle of radius
    search_radius_d (ties to the smallest angle); the backward point is the
    argmax over the arc of half-width delta_theta centered opposite the
    forward direction. Returns (forward, backward, p_plus, p_minus).
    """
    d = cfg.search_radius_d
    if not img.in_bounds(seed.x, seed.y, margin=d):
        raise ValueError(f"seed {seed} closer than {d} px to the border")
    n = int(round(360.0 / ARC_STEP_DEG))
    angles = np.linspace(0.0, 2.0 * math.pi, n, endpoint=False)
    xs = seed.x + d * np.cos(angles)
    ys = seed.y + d * np.sin(angles)
    vals = img.sample_many(xs, ys)
    k = int(np.argmax(vals))  # first maximum = smallest angle on ties
    p_plus = Point2(float(xs[k]), float(ys[k]))
    forward = Direction2.from_vector(p_plus.x - seed.x, p_plus.y - seed.y)

    back_center = forward.theta + math.pi
    angles_b, xb, yb, vb = arc_candidates(img, seed, back_center, cfg.delta_theta, d)
    j = _arc_argmax(angles_b, xb, yb, vb, back_center)
    if j is None:
        j = len(angles_b) // 2
    p_minus = Point2(float(xb[j]), float(yb[j]))
    backward = Direction2.from_vector(p_minus.x - seed.x, p_minus.y - seed.y)
    return forward, backward, p_plus, p_minus


def track_step(img: GrayImage, prev: TrackPoint, state: TrackerState,
               cfg: Config) -> StepResult:
    """One arc-search step from the previous point.

    The candidate is the intensity argmax on the arc of radius
    search_radius_d and half-width delta_theta about the current direction;
    it is accepted iff its intensity exceeds gray_floor_I0 and its visit
    count is below crowd_tau_P. Termination is a result, not an error.
    """
    d = cfg.search_radius_d
    if not img.in_bounds(prev.pos.x, prev.pos.y, margin=d):
        return StepResult(None, "border")
    angles, xs, ys, vals = arc_candidates(img, prev.pos, prev.dir.theta,
                                          cfg.delta_theta, d)
    k = _arc_argmax(angles, xs, ys, vals, prev.dir.theta)
    if k is None:
        return StepResult(None, "border")
    cand = Point2(float(xs[k]), float(ys[k]))
    if vals[k] <= cfg.gray_floor_I0:
        return StepResult(None, "low_intensity")
    if state.np_at(cand) >= cfg.crowd_tau_P:
        return StepResult(None, "crowded")
    direction = Direction2.from_vector(cand.x - prev.pos.x, cand.y - prev.pos.y)
    state.mark_visit(cand)
    return StepResult(TrackPoint(cand, cand, direction, prev.index_in_track + 1))


def adjust_to_centerline(tp: TrackPoint, prev: TrackPoint | None,
                         contour: VesselContour, cfg: Config) -> TrackPoint:
    """Recenter a tracked point between the contour hits on its normal.

    The normal through raw_pos is intersected with the contour; the midpoint
    of the nearest hits on opposite sides becomes the new position and the
    direction is recomputed from the previous point. The point stays
    unadjusted when a hit is missing, the displacement exceeds
    search_radius_d, or the hit span exceeds twice the search radius (a
    junction-pocket span, whose midpoint is the bisector of the merged
    branches rather than a vessel centerline).
    """
    normal = tp.dir.normal()
    before, after = opposite_hits(contour, tp.raw_pos, normal)
    if before is None or after is None:
        return tp
    g1 = after[1]
    g2 = before[1]
    if g1.dist(g2) > 2.0 * cfg.search_radius_d:
        return tp
    mid = Point2((g1.x + g2.x) / 2.0, (g1.y + g2.y) / 2.0)
    if mid.dist(tp.raw_pos) > cfg.search_radius_d:
        return tp
    direction = tp.dir
    if prev is not None:
        dx, dy = mid.x - prev.pos.x, mid.y - prev.pos.y
        if math.hypot(dx, dy) > 1e-9:
            direction = Direction2.from_vector(dx, dy)
    return TrackPoint(mid, tp.raw_pos, direction, tp.index_in_track, adjusted=True)


def detect_bifurcation(img: GrayImage, ridges: RidgeSet, current: TrackPoint,
                       prev: TrackPoint | None, state: TrackerState,
                       cfg: Config):
    """Search the fan ring around the current point for a new branch.

    A ridge point qualifies when its direction from the current point
    differs from the current direction by more than tau_1 and from the
    previous direction by more than tau_2, lies farther than
    min_branch_dist_d, and has seen fewer than bif_crowd_tau_B bifurcations.
    The brightest qualifier wins (ties: nearer, then (y, x)). On success the
    bifurcation counter is stamped and the branch is queued; returns
    (branch point, branch direction) or None.
    """
    px, py = current.pos.x, current.pos.y
    r1, r2 = cfg.bif_r1, cfg.bif_r2
    cand = ridges.in_window(px - r2, px + r2, py - r2, py + r2)
    if len(cand) == 0:
        return None
    dx = cand[:, 0] - px
    dy = cand[:, 1] - py
    dist = np.hypot(dx, dy)
    theta_k = current.dir.theta
    theta_prev = prev.dir.theta if prev is not None else theta_k
    keep = (dist >= r1) & (dist <= r2) & (dist > cfg.min_branch_dist_d)
    if not keep.any():
        return None
    angles = np.arctan2(dy[keep], dx[keep])
    cand = cand[keep]
    dist = dist[keep]
    diffs_k = np.array([_circ_diff(a, theta_k) for a in angles])
    diffs_prev = np.array([_circ_diff(a, theta_prev) for a in angles])
    ok = ((diffs_k <= cfg.bif_delta_theta)
          & (diffs_k > cfg.tau_1)
          & (diffs_prev > cfg.tau_2))
    if not ok.any():
        return None
    cand = cand[ok]
    dist = dist[ok]
    n_b = state.n_b[cand[:, 1], cand[:, 0]]
    ok2 = n_b < cfg.bif_crowd_tau_B
    if not ok2.any():
        return None
    cand = cand[ok2]
    dist = dist[ok2]
    vals = img.data[cand[:, 1], cand[:, 0]]
    order = np.lexsort((cand[:, 0], cand[:, 1], dist, -vals))
    bx, by = cand[order[0]]
    p_b = Point2(float(bx), float(by))
    u_b = Direction2.from_vector(p_b.x - px, p_b.y - py)
    state.mark_bifurcation(p_b)
    state.branch_queue.append((p_b, u_b))
    return p_b, u_b


def _track_pass(img: GrayImage, ridges: RidgeSet | None,
                contour: VesselContour | None, state: TrackerState,
                cfg: Config, start: TrackPoint, max_steps: int = 100000):
    """Grow one directional pass; returns (points, bifurcation ordinals, reason)."""
    points: list[TrackPoint] = []
    bif_ordinals: list[int] = []
    prev = start
    reason = "border"
    last_fire: Point2 | None = None
    for _ in range(max_steps):
        result = track_step(img, prev, state, cfg)
        if result.point is None:
            reason = result.reason
            break
        tp = result.point
        if contour is not None:
            adjusted = adjust_to_centerline(tp, prev, contour, cfg)
            # Keep the track spacing invariant: fall back to the raw point
            # (exactly one step from prev) when adjustment stretches it.
            spacing = adjusted.pos.dist(prev.pos)
            if 0.5 * cfg.search_radius_d <= spacing <= 1.5 * cfg.search_radius_d:
                tp = adjusted
        if ridges is not None:
            # One event per junction per pass: while still within the fan
            # ring of the last fire, the same junction would fire again and
            # exhaust the tau_B budget other passes need for their cutoffs.
            if last_fire is None or tp.pos.dist(last_fire) > cfg.bif_r2:
                found = detect_bifurcation(img, ridges, tp, prev, state, cfg)
                if found is not None:
                    bif_ordinals.append(len(points))
                    last_fire = tp.pos
        points.append(tp)
        prev = tp
    return points, bif_ordinals, reason


def _merge_passes(seed: Point2, forward_dir: Direction2,
                  backward: list[TrackPoint], backward_bifs: list[int],
                  forward: list[TrackPoint], forward_bifs: list[int],
                  from_branch: bool) -> CenterlineTrack:
    """Merge a backward and a forward pass into one track (seed counted once).

    The backward pass is reversed; directions are recomputed along the merged
    travel order so dir_k = (pos_k - pos_{k-1}) / |.| holds everywhere.
    """
    m = len(backward)
    positions = [tp.pos for tp in reversed(backward)] + [seed] + [tp.pos for tp in forward]
    raws = [tp.raw_pos for tp in reversed(backward)] + [seed] + [tp.raw_pos for tp in forward]
    adj = [tp.adjusted for tp in reversed(backward)] + [False] + [tp.adjusted for tp in forward]
    points: list[TrackPoint] = []
    for i, (pos, raw) in enumerate(zip(positions, raws)):
        if i > 0:
            dx, dy = pos.x - positions[i - 1].x, pos.y - positions[i - 1].y
            direction = Direction2.from_vector(dx, dy) if math.hypot(dx, dy) > 1e-12 \
                else forward_dir
        else:
            direction = forward_dir
        points.append(TrackPoint(pos, raw, direction, i, adj[i]))
    if len(points) > 1:
        # The first point has no predecessor; give it its successor's heading.
        points[0] = TrackPoint(points[0].pos, points[0].raw_pos, points[1].dir, 0, adj[0])

    cutoffs: dict[int, str] = {}
    n = len(points)
    cutoffs[0] = "termination"
    cutoffs[n - 1] = "termination"
    for j in bif_ordinal_list(backward_bifs):
        cutoffs[m - 1 - j] = "bifurcation"
    for j in bif_ordinal_list(forward_bifs):
        cutoffs[m + 1 + j] = "bifurcation"
    ordered = [Cutoff(k, cutoffs[k]) for k in sorted(cutoffs)]
    return CenterlineTrack(points, ordered, seed, from_branch)


def bif_ordinal_list(bifs: list[int]) -> list[int]:
    return sorted(set(bifs))


def track_tree(img: GrayImage, ridges: RidgeSet, contour: VesselContour | None,
               cfg: Config) -> list[CenterlineTrack]:
    """Track the whole vessel tree from seeded ridge points.

    Seeds are drawn from an rng_seed-shuffled ridge order, skipping visited
    points; every seed is tracked bidirectionally with centerline adjustment
    and bifurcation detection, then queued branches are tracked the same
    way. Stops when less than coverage_stop of the ridge points remain
    unvisited or the seed budget runs out. Tracks shorter than
    min_track_points are dropped.
    """
    if len(ridges) == 0:
        raise ValueError("no ridge points")
    state = TrackerState(img.shape, cfg)
    rng = random.Random(cfg.rng_seed)
    order = list(range(len(ridges)))
    rng.shuffle(order)

    tracks: list[CenterlineTrack] = []
    seeds_used = 0
    ridge_yx = (ridges.points[:, 1], ridges.points[:, 0])

    def unvisited_fraction() -> float:
        return float(np.mean(state.n_p[ridge_yx] == 0))

    def run_seed(seed: Point2, fwd: Direction2, bwd: Direction2, from_branch: bool):
        state.mark_visit(seed)
        start_f = TrackPoint(seed, seed, fwd, 0)
        f_pts, f_bifs, _ = _track_pass(img, ridges, contour, state, cfg, start_f)
        start_b = TrackPoint(seed, seed, bwd, 0)
        b_pts, b_bifs, _ = _track_pass(img, ridges, contour, state, cfg, start_b)
        track = _merge_passes(seed, fwd, b_pts, b_bifs, f_pts, f_bifs, from_branch)
        if len(track.points) >= cfg.min_track_points:
            tracks.append(track)

    def drain_branches():
        while state.branch_queue:
            p_b, u_b = state.branch_queue.pop(0)
            if state.visited_near(p_b):
                continue
            if not img.in_bounds(p_b.x, p_b.y, margin=cfg.search_radius_d):
                continue
            run_seed(p_b, u_b, u_b.flipped(), from_branch=True)

    for idx in order:
        if seeds_used >= cfg.seed_budget or unvisited_fraction() < cfg.coverage_stop:
            break
        x, y = ridges.points[idx]
        seed = Point2(float(x), float(y))
        if state.visited_near(seed):
            continue
        if not img.in_bounds(seed.x, seed.y, margin=cfg.search_radius_d):
            continue
        seeds_used += 1
        fwd, bwd, _, _ = initial_directions(img, seed, cfg)
        run_seed(seed, fwd, bwd, from_branch=False)
        drain_branches()
    return tracks


def split_segments(tracks: list[CenterlineTrack],
                   min_points: int = 5) -> list[VesselSegment]:
    """Branch-free point runs between consecutive cutoff points.

    Track start and end count as cutoffs; runs shorter than min_points are
    discarded. Diameters are left unfilled.
    """
    segments: list[VesselSegment] = []
    for t_idx, track in enumerate(tracks):
        n = len(track.points)
        if n == 0:
            continue
        kinds = {c.ordinal: c.kind for c in track.cutoffs}
        bounds = sorted({0, n - 1} | set(kinds))
        for a, b in zip(bounds[:-1], bounds[1:]):
            if b - a + 1 < min_points:
                continue
            segments.append(VesselSegment(
                id=len(segments),
                points=track.points[a:b + 1],
                source_track=t_idx,
                start_kind=kinds.get(a, "termination"),
                end_kind=kinds.get(b, "termination"),
            ))
    return segments
