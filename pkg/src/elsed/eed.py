"""Enhanced edge-drawing operations: walking, fitting, jumping.

These are the documented entry points over the compiled core in
:mod:`elsed._kernels`.  They are convenient for unit work on single
anchors or chains; :func:`elsed.detector.detect` drives the same kernels
over whole images without the per-call overhead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from . import _kernels as K
from .imgproc import GradientMap
from .params import DetectorParams


class Direction(IntEnum):
    UP = K.DIR_UP
    DOWN = K.DIR_DOWN
    LEFT = K.DIR_LEFT
    RIGHT = K.DIR_RIGHT


HORIZONTAL_FIT = K.AXIS_H
VERTICAL_FIT = K.AXIS_V


@dataclass
class LineFit:
    """Incremental least-squares state and the fitted line a*x + b*y + c = 0.

    ``coeffs`` holds the raw closed-form coefficients derived from the
    accumulators for the chosen axis; ``fit_error`` is the mean squared
    residual along that axis.
    """

    n: int
    sum_x: float
    sum_y: float
    sum_xx: float
    sum_yy: float
    sum_xy: float
    axis: int
    coeffs: tuple[float, float, float]
    fit_error: float

    @classmethod
    def from_points(cls, pts: np.ndarray, axis: int | None = None) -> "LineFit | None":
        pts = np.asarray(pts, dtype=np.float64)
        if axis is None:
            ext_x = pts[:, 0].max() - pts[:, 0].min()
            ext_y = pts[:, 1].max() - pts[:, 1].min()
            axis = HORIZONTAL_FIT if ext_x >= ext_y else VERTICAL_FIT
        n = float(len(pts))
        sx = pts[:, 0].sum()
        sy = pts[:, 1].sum()
        sxx = (pts[:, 0] ** 2).sum()
        syy = (pts[:, 1] ** 2).sum()
        sxy = (pts[:, 0] * pts[:, 1]).sum()
        ok, a, b, c, mse = K.fit_from_sums(n, sx, sy, sxx, syy, sxy, axis)
        if not ok:
            return None
        return cls(int(n), sx, sy, sxx, syy, sxy, axis, (a, b, c), mse)

    @property
    def normalized(self) -> tuple[float, float, float]:
        a, b, c = self.coeffs
        norm = math.hypot(a, b)
        return a / norm, b / norm, c / norm

    def distance(self, x: float, y: float) -> float:
        a, b, c = self.normalized
        return abs(a * x + b * y + c)


@dataclass
class SegmentCandidate:
    """A fitted chain of edge pixels, prior to validation."""

    fit: LineFit
    endpoints: tuple[tuple[float, float], tuple[float, float]]
    pixels: np.ndarray  # (n, 2) int32 supporting inliers, insertion order
    outlier_count: int = 0
    consecutive_outliers: int = 0
    jumps: list[tuple[tuple[int, int], tuple[int, int]]] = field(default_factory=list)

    @property
    def length(self) -> float:
        (x1, y1), (x2, y2) = self.endpoints
        return math.hypot(x2 - x1, y2 - y1)


@dataclass
class DrawState:
    """Shared drawing state: visited mask plus the per-anchor chain stamps.

    One instance is threaded through every anchor of a detection run so
    pixels claimed by earlier (stronger) anchors are never redrawn.
    """

    visited: np.ndarray  # uint8 (h, w)
    stamp: np.ndarray  # int32 (h, w), per-anchor chain membership
    next_serial: int = 0

    @classmethod
    def for_shape(cls, height: int, width: int) -> "DrawState":
        return cls(
            visited=np.zeros((height, width), dtype=np.uint8),
            stamp=np.zeros((height, width), dtype=np.int32),
        )


def bresenham(p0: tuple[int, int], p1: tuple[int, int]) -> list[tuple[int, int]]:
    """Integer Bresenham rasterization, inclusive of both endpoints."""
    n = abs(p1[0] - p0[0]) + abs(p1[1] - p0[1]) + 2
    out = np.empty((n, 2), dtype=np.int32)
    count = K.bresenham_into(int(p0[0]), int(p0[1]), int(p1[0]), int(p1[1]), out)
    return [(int(x), int(y)) for x, y in out[:count]]


def derive_direction(current, previous, orient_at: int, fallback=None) -> Direction:
    """Walk direction implied by the last step and the pixel orientation."""
    sdx = current[0] - previous[0]
    sdy = current[1] - previous[1]
    if sdx == 0 and sdy == 0:
        if fallback is None:
            raise ValueError("direction is ambiguous when previous == current")
        return Direction(fallback)
    d = fallback if fallback is not None else (Direction.RIGHT if sdx > 0 else Direction.LEFT)
    return Direction(K.next_dir(int(d), sdx, sdy, orient_at))


def draw_next_pixel(
    current: tuple[int, int],
    previous: tuple[int, int],
    grad: GradientMap,
    direction: Direction | None = None,
    line: LineFit | None = None,
) -> tuple[int, int] | None:
    """Next pixel of the walk, or None when drawing must halt.

    Three forward candidates when the current pixel's orientation matches
    the walk axis, two in the diagonal (orientation conflict) case.  The
    strongest gradient wins; ties prefer straight ahead, then proximity to
    the fitted line when one is given.
    """
    cx, cy = current
    px, py = previous
    if direction is None:
        direction = derive_direction(current, previous, int(grad.orient[cy, cx]))
    if line is not None:
        la, lb, lc = line.normalized
        has_line = True
    else:
        la = lb = lc = 0.0
        has_line = False
    ok, nx, ny = K.draw_next(
        int(cx), int(cy), int(px), int(py), int(direction), grad.g, grad.orient, has_line, la, lb, lc
    )
    return (int(nx), int(ny)) if ok else None


def fit_new_segment(pixels, params: DetectorParams) -> SegmentCandidate | None:
    """Fit a line to a chain; None when too short or not line-like."""
    pts = np.asarray(pixels, dtype=np.int64)
    if len(pts) == 0:
        raise ValueError("empty chain")
    if len(pts) < params.t_min_length:
        return None
    fit = LineFit.from_points(pts)
    if fit is None or fit.fit_error > params.t_line_fit_err:
        return None
    la, lb, lc = fit.normalized
    dists = np.abs(la * pts[:, 0] + lb * pts[:, 1] + lc)
    support = pts[dists <= params.t_px_to_seg_dist].astype(np.int32)
    cand = SegmentCandidate(fit=fit, endpoints=((0.0, 0.0), (0.0, 0.0)), pixels=support)
    _refresh_endpoints(cand)
    return cand


def _refresh_endpoints(cand: SegmentCandidate):
    la, lb, lc = cand.fit.normalized
    ux, uy = -lb, la
    t = ux * cand.pixels[:, 0] + uy * cand.pixels[:, 1]
    bx, by = -lc * la, -lc * lb
    tmin, tmax = float(t.min()), float(t.max())
    cand.endpoints = (
        (bx + tmin * ux, by + tmin * uy),
        (bx + tmax * ux, by + tmax * uy),
    )


def add_pixel_to_segment(
    cand: SegmentCandidate, p: tuple[int, int], params: DetectorParams
) -> bool:
    """Add a walked pixel to a live segment; True for inlier, False for outlier.

    Inliers update the accumulators incrementally (with a refit and an
    endpoint refresh) and reset the consecutive-outlier counter; outliers
    only advance the counters.
    """
    x, y = int(p[0]), int(p[1])
    if cand.fit.distance(x, y) <= params.t_px_to_seg_dist:
        f = cand.fit
        n = f.n + 1
        sx = f.sum_x + x
        sy = f.sum_y + y
        sxx = f.sum_xx + x * x
        syy = f.sum_yy + y * y
        sxy = f.sum_xy + x * y
        pts = np.vstack([cand.pixels, np.array([[x, y]], dtype=np.int32)])
        ext_x = pts[:, 0].max() - pts[:, 0].min()
        ext_y = pts[:, 1].max() - pts[:, 1].min()
        axis = HORIZONTAL_FIT if ext_x >= ext_y else VERTICAL_FIT
        ok, a, b, c, mse = K.fit_from_sums(float(n), sx, sy, sxx, syy, sxy, axis)
        if ok:
            cand.fit = LineFit(n, sx, sy, sxx, syy, sxy, axis, (a, b, c), mse)
        else:
            cand.fit = LineFit(n, sx, sy, sxx, syy, sxy, f.axis, f.coeffs, f.fit_error)
        cand.pixels = pts
        cand.consecutive_outliers = 0
        _refresh_endpoints(cand)
        return True
    cand.outlier_count += 1
    cand.consecutive_outliers += 1
    return False


def can_continue(
    cand: SegmentCandidate,
    c: tuple[int, int],
    grad: GradientMap,
    params: DetectorParams,
    forward: bool = True,
    state: DrawState | None = None,
) -> tuple[tuple[int, int], Direction] | None:
    """Jump check at a discontinuity; (landing pixel, direction) or None.

    Tries each configured jump length in order against the four
    conditions: segment long enough, landing pixel alive, a trial walk of
    the full jump length, and (unless jump validation is disabled) an
    edge-like, normal-aligned gradient autocorrelation over the extension
    band.  ``forward=False`` runs the same check outward from the
    segment's opposite endpoint.
    """
    if state is None:
        state = DrawState.for_shape(grad.height, grad.width)
    seg_row = _candidate_to_row(cand)
    sup_xy, sup_next = _candidate_supports(cand)
    cx, cy = int(c[0]), int(c[1])
    if not forward:
        la, lb, lc = cand.fit.normalized
        ux, uy = -lb, la
        t = ux * sup_xy[:, 0] + uy * sup_xy[:, 1]
        tc = ux * cx + uy * cy
        # Jump outward from whichever support end is farther from c.
        idx = int(np.argmin(t)) if abs(tc - t.min()) > abs(tc - t.max()) else int(np.argmax(t))
        cx, cy = int(sup_xy[idx, 0]), int(sup_xy[idx, 1])
    ok, jx, jy, jd = K.try_jump(
        seg_row,
        sup_xy,
        sup_next,
        cx,
        cy,
        grad.g,
        grad.orient,
        grad.gx,
        grad.gy,
        state.visited,
        state.stamp,
        -1,
        np.asarray(params.jump_lengths, dtype=np.int64),
        params.jump_validation_enabled,
        params.t_eigen_ext,
        math.cos(math.radians(params.t_angle_ext)),
    )
    if not ok:
        return None
    return (int(jx), int(jy)), Direction(jd)


def _candidate_to_row(cand: SegmentCandidate) -> np.ndarray:
    row = np.zeros(K.S_COLS, dtype=np.float64)
    la, lb, lc = cand.fit.normalized
    row[K.S_A] = la
    row[K.S_B] = lb
    row[K.S_C] = lc
    row[K.S_N] = cand.fit.n
    row[K.S_HEAD] = 0 if len(cand.pixels) else -1
    row[K.S_TAIL] = len(cand.pixels) - 1
    return row


def _candidate_supports(cand: SegmentCandidate) -> tuple[np.ndarray, np.ndarray]:
    sup_xy = np.ascontiguousarray(cand.pixels, dtype=np.int32)
    n = len(sup_xy)
    sup_next = np.arange(1, n + 1, dtype=np.int32)
    if n:
        sup_next[-1] = -1
    return sup_xy, sup_next


def eed_from_anchor(
    anchor,
    grad: GradientMap,
    state: DrawState,
    params: DetectorParams,
    trace: np.ndarray | None = None,
) -> list[SegmentCandidate]:
    """Run the full drawing state machine from one anchor.

    Seeds both walk directions implied by the anchor's orientation, then
    services the discontinuity stack: accepted forward jumps continue the
    live segment first, the backward extension follows, and walks in the
    changed gradient direction run last.  Fitted pixels are committed to
    ``state.visited``.
    """
    ax, ay = (anchor.x, anchor.y) if hasattr(anchor, "x") else (int(anchor[0]), int(anchor[1]))
    anchors = np.array([[ax, ay]], dtype=np.int32)
    raw = run_drawing_pass(grad, anchors, state, params, trace=trace)
    return candidates_from_raw(raw)


def run_drawing_pass(
    grad: GradientMap,
    anchors: np.ndarray,
    state: DrawState,
    params: DetectorParams,
    trace: np.ndarray | None = None,
):
    """Drive the kernel over an anchor array.

    Returns the flat result buffers (segment rows, endpoints, support
    spans, jump records); :func:`candidates_from_raw` lifts them into
    :class:`SegmentCandidate` objects when object-level access is wanted.
    """
    h, w = grad.g.shape
    seg_cap = max(16, (h * w) // max(params.t_min_length, 2) + 16)
    sup_cap = h * w + 1
    jump_cap = 4 * seg_cap
    seg_buf = np.zeros((seg_cap, K.S_COLS), dtype=np.float64)
    sup_xy = np.empty((sup_cap, 2), dtype=np.int32)
    sup_next = np.empty(sup_cap, dtype=np.int32)
    jump_buf = np.empty((jump_cap, 5), dtype=np.int32)
    stack = np.empty((1 << 16, 5), dtype=np.int32)
    if trace is None:
        trace = np.empty((0, 4), dtype=np.int32)

    n_seg, n_sup, n_jump, _ = K.run_drawing(
        grad.g,
        grad.gx,
        grad.gy,
        grad.orient,
        np.ascontiguousarray(anchors, dtype=np.int32),
        state.visited,
        state.stamp,
        state.next_serial,
        params.t_ol,
        params.t_min_length,
        params.t_line_fit_err,
        params.t_px_to_seg_dist,
        params.t_eigen_ext,
        math.cos(math.radians(params.t_angle_ext)),
        np.asarray(params.jump_lengths, dtype=np.int64),
        params.jumps_enabled,
        params.jump_validation_enabled,
        seg_buf,
        sup_xy,
        sup_next,
        jump_buf,
        stack,
        trace,
    )
    state.next_serial += len(anchors)

    endpoints = np.empty((n_seg, 4), dtype=np.float64)
    sup_out = np.empty((n_sup, 2), dtype=np.int32)
    sup_start = np.empty(max(n_seg, 1), dtype=np.int64)
    sup_count = np.empty(max(n_seg, 1), dtype=np.int64)
    K.finalize_segments(seg_buf, n_seg, sup_xy, sup_next, endpoints, sup_out, sup_start, sup_count)
    jumps = jump_buf[:n_jump]

    return {
        "seg_buf": seg_buf[:n_seg],
        "endpoints": endpoints,
        "supports": sup_out,
        "sup_start": sup_start[:n_seg],
        "sup_count": sup_count[:n_seg],
        "jumps": jumps,
    }


def candidates_from_raw(raw: dict) -> list[SegmentCandidate]:
    """Materialize SegmentCandidate objects from kernel result buffers."""
    seg_buf = raw["seg_buf"]
    endpoints = raw["endpoints"]
    sup_out = raw["supports"]
    sup_start = raw["sup_start"]
    sup_count = raw["sup_count"]
    jumps = raw["jumps"]
    candidates = []
    for s in range(len(seg_buf)):
        row = seg_buf[s]
        axis = int(row[K.S_AXIS])
        ok, a, b, c, mse = K.fit_from_sums(
            row[K.S_N], row[K.S_SX], row[K.S_SY], row[K.S_SXX], row[K.S_SYY], row[K.S_SXY], axis
        )
        if not ok:
            a, b, c = row[K.S_A], row[K.S_B], row[K.S_C]
            mse = row[K.S_FITERR]
        fit = LineFit(
            int(row[K.S_N]),
            row[K.S_SX],
            row[K.S_SY],
            row[K.S_SXX],
            row[K.S_SYY],
            row[K.S_SXY],
            axis,
            (a, b, c),
            mse,
        )
        lo = int(sup_start[s])
        cnt = int(sup_count[s])
        seg_jumps = [
            ((int(j[1]), int(j[2])), (int(j[3]), int(j[4]))) for j in jumps if j[0] == s
        ]
        candidates.append(
            SegmentCandidate(
                fit=fit,
                endpoints=(
                    (endpoints[s, 0], endpoints[s, 1]),
                    (endpoints[s, 2], endpoints[s, 3]),
                ),
                pixels=sup_out[lo : lo + cnt].copy(),
                outlier_count=int(row[K.S_OUTLIERS]),
                jumps=seg_jumps,
            )
        )
    return candidates
