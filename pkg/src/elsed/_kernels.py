"""Compiled core of the edge-drawing detector.

Everything here operates on flat numpy buffers so the hot loops can be
JIT-compiled with numba.  When numba is unavailable the same functions run
as plain Python (slow, but bit-identical).  The public, documented
surface for these operations lives in :mod:`elsed.eed`; this module is the
single implementation both the wrappers and :func:`elsed.detector.detect`
share.

Layout notes
------------
Segment state lives in one float64 row per segment (``S_*`` columns):
normalized line coefficients, incremental accumulators, support linked
list head/tail, bounding extents and bookkeeping flags.  Support pixels
are appended to a shared pool with a ``next`` index per entry, because a
segment's supports are not contiguous (stack entries interleave).
"""

from __future__ import annotations

import math

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(f):
            return f

        return wrap


# Orientation labels (mirrors elsed.imgproc).
ORIENT_H = 0
ORIENT_V = 1

# Walk directions. Up/Down pair with vertical edges, Left/Right with
# horizontal ones.
DIR_UP = 0
DIR_DOWN = 1
DIR_LEFT = 2
DIR_RIGHT = 3
_DX = (0, 0, -1, 1)
_DY = (-1, 1, 0, 0)

# Stack entry kinds.
K_SEED = 0
K_EXPLORE = 1  # continue in the changed gradient direction
K_FWD = 2  # segment continuation after an accepted forward jump
K_BWD = 3  # segment extension from its other endpoint

# Walk stop reasons.
STOP_WEAK = 0
STOP_VISITED = 1
STOP_OUTLIERS = 2

# Trace event codes (debug/test instrumentation).
T_PUSH = 1
T_POP = 2
T_SEG_NEW = 3
T_JUMP = 4

# Segment row columns.
S_A = 0
S_B = 1
S_C = 2
S_N = 3
S_SX = 4
S_SY = 5
S_SXX = 6
S_SYY = 7
S_SXY = 8
S_HEAD = 9
S_TAIL = 10
S_BWD_PUSHED = 11
S_AXIS = 12
S_MINX = 13
S_MAXX = 14
S_MINY = 15
S_MAXY = 16
S_FITERR = 17
S_OUTLIERS = 18
S_COLS = 19

AXIS_H = 0  # regress y on x (used when x-extent >= y-extent)
AXIS_V = 1


@njit(cache=True)
def fit_from_sums(n, sx, sy, sxx, syy, sxy, axis):
    """Closed-form oriented least squares from running sums.

    Returns (ok, a, b, c, mse) for the line a*x + b*y + c = 0 with
    (a, b) NOT normalized; mse is the mean squared residual along the
    fit axis.
    """
    if n < 2:
        return False, 0.0, 0.0, 0.0, 0.0
    if axis == AXIS_H:
        a = n * sxy - sx * sy
        b = sx * sx - n * sxx
        c = sy * sxx - sx * sxy
        if b == 0.0:
            return False, 0.0, 0.0, 0.0, 0.0
        denom = n * b * b
    else:
        # Same formulas with x and y swapped; rewritten as a*x + b*y + c = 0.
        av = n * sxy - sx * sy
        bv = sy * sy - n * syy
        cv = sx * syy - sy * sxy
        if bv == 0.0:
            return False, 0.0, 0.0, 0.0, 0.0
        a = bv
        b = av
        c = cv
        denom = n * bv * bv
    ss = (
        a * a * sxx
        + b * b * syy
        + c * c * n
        + 2.0 * a * b * sxy
        + 2.0 * a * c * sx
        + 2.0 * b * c * sy
    )
    mse = ss / denom
    if mse < 0.0:
        mse = 0.0
    return True, a, b, c, mse


@njit(cache=True)
def normalize_line(a, b, c):
    norm = math.sqrt(a * a + b * b)
    if norm == 0.0:
        return 0.0, 0.0, 0.0, False
    return a / norm, b / norm, c / norm, True


@njit(cache=True)
def bresenham_into(x0, y0, x1, y1, out):
    """Standard integer Bresenham, inclusive of both endpoints.

    Fills ``out`` (n, 2) and returns the pixel count (truncated at the
    buffer length).
    """
    dx = abs(x1 - x0)
    dy = -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    x = x0
    y = y0
    n = 0
    cap = out.shape[0]
    while True:
        if n >= cap:
            return n
        out[n, 0] = x
        out[n, 1] = y
        n += 1
        if x == x1 and y == y1:
            return n
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x += sx
        if e2 <= dx:
            err += dx
            y += sy


@njit(cache=True)
def bresenham_clipped_into(x0, y0, x1, y1, w, h, out):
    """Bresenham toward (x1, y1), stopping at the first out-of-image pixel."""
    dx = abs(x1 - x0)
    dy = -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    x = x0
    y = y0
    n = 0
    cap = out.shape[0]
    while True:
        if x < 0 or y < 0 or x >= w or y >= h or n >= cap:
            return n
        out[n, 0] = x
        out[n, 1] = y
        n += 1
        if x == x1 and y == y1:
            return n
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x += sx
        if e2 <= dx:
            err += dx
            y += sy


@njit(cache=True)
def draw_next(cx, cy, px, py, d, g, orient, has_line, la, lb, lc):
    """Select the next walk pixel; returns (ok, nx, ny).

    Three forward candidates when the pixel orientation matches the walk
    axis, two (straight ahead plus the drift-continuing diagonal) when it
    conflicts.  Maximum gradient wins; ties prefer straight ahead, then
    the candidate closer to the fitted line when one is live.
    """
    h, w = g.shape
    o_vert = orient[cy, cx] == ORIENT_V
    d_vert = d < 2

    c0x = c0y = c1x = c1y = c2x = c2y = -1
    ncand = 0
    if o_vert == d_vert:
        fx = _DX[d]
        fy = _DY[d]
        if d_vert:
            c0x, c0y = cx, cy + fy
            c1x, c1y = cx - 1, cy + fy
            c2x, c2y = cx + 1, cy + fy
        else:
            c0x, c0y = cx + fx, cy
            c1x, c1y = cx + fx, cy - 1
            c2x, c2y = cx + fx, cy + 1
        ncand = 3
    else:
        sx_ = cx + _DX[d]
        sy_ = cy + _DY[d]
        if d_vert:
            drift = cx - px
        else:
            drift = cy - py
        if drift == 0:
            # No lateral history: let the image pick the diagonal side.
            if d_vert:
                gm = g[sy_, sx_ - 1] if 0 <= sy_ < h and 0 <= sx_ - 1 < w else -1
                gp = g[sy_, sx_ + 1] if 0 <= sy_ < h and 0 <= sx_ + 1 < w else -1
            else:
                gm = g[sy_ - 1, sx_] if 0 <= sy_ - 1 < h and 0 <= sx_ < w else -1
                gp = g[sy_ + 1, sx_] if 0 <= sy_ + 1 < h and 0 <= sx_ < w else -1
            drift = 1 if gp >= gm else -1
        c0x, c0y = sx_, sy_
        if d_vert:
            c1x, c1y = sx_ + drift, sy_
        else:
            c1x, c1y = sx_, sy_ + drift
        ncand = 2

    best_g = 0
    best_x = -1
    best_y = -1
    best_straight = False
    best_dist = 1e30
    for i in range(ncand):
        if i == 0:
            x, y = c0x, c0y
        elif i == 1:
            x, y = c1x, c1y
        else:
            x, y = c2x, c2y
        if x < 0 or y < 0 or x >= w or y >= h:
            continue
        gv = g[y, x]
        if gv <= 0:
            continue
        dist = abs(la * x + lb * y + lc) if has_line else 0.0
        if best_x < 0 or gv > best_g:
            best_g = gv
            best_x = x
            best_y = y
            best_straight = i == 0
            best_dist = dist
        elif gv == best_g and not best_straight and has_line and dist < best_dist:
            best_x = x
            best_y = y
            best_dist = dist
    if best_x < 0:
        return False, -1, -1
    return True, best_x, best_y


@njit(cache=True)
def next_dir(d, sdx, sdy, o_next):
    """Walk direction after a step, following the new pixel's orientation."""
    if o_next == ORIENT_V:
        if sdy > 0:
            return DIR_DOWN
        if sdy < 0:
            return DIR_UP
        return d
    if sdx > 0:
        return DIR_RIGHT
    if sdx < 0:
        return DIR_LEFT
    return d


@njit(cache=True)
def dominant_direction(ux, uy):
    """Axis direction closest to the vector (ux, uy)."""
    if abs(ux) >= abs(uy):
        return DIR_RIGHT if ux >= 0 else DIR_LEFT
    return DIR_DOWN if uy >= 0 else DIR_UP


@njit(cache=True)
def eigen_alignment_ok(region, nreg, gx, gy, nx_, ny_, t_eigen, cos_t_angle):
    """Gradient autocorrelation test over a pixel region.

    Passes when the eigenvalue ratio of M = sum([gx^2, gx*gy; gx*gy, gy^2])
    reaches ``t_eigen`` and the principal eigenvector lies within the
    angle threshold of the segment normal (nx_, ny_).  A zero lambda_2 with
    positive lambda_1 counts as a pass; an all-zero M fails.
    """
    m00 = 0.0
    m01 = 0.0
    m11 = 0.0
    for i in range(nreg):
        gxv = float(gx[region[i, 1], region[i, 0]])
        gyv = float(gy[region[i, 1], region[i, 0]])
        m00 += gxv * gxv
        m01 += gxv * gyv
        m11 += gyv * gyv
    tr = m00 + m11
    det = m00 * m11 - m01 * m01
    disc = tr * tr - 4.0 * det
    if disc < 0.0:
        disc = 0.0
    root = math.sqrt(disc)
    l1 = 0.5 * (tr + root)
    l2 = 0.5 * (tr - root)
    if l1 <= 0.0:
        return False
    if l2 > 0.0 and l1 / l2 < t_eigen:
        return False
    if abs(m01) > 1e-12:
        v1x = m01
        v1y = l1 - m00
    elif m00 >= m11:
        v1x, v1y = 1.0, 0.0
    else:
        v1x, v1y = 0.0, 1.0
    vnorm = math.sqrt(v1x * v1x + v1y * v1y)
    nnorm = math.sqrt(nx_ * nx_ + ny_ * ny_)
    if vnorm == 0.0 or nnorm == 0.0:
        return False
    return abs(v1x * nx_ + v1y * ny_) >= cos_t_angle * vnorm * nnorm


@njit(cache=True)
def trial_walk(ax_, ay_, px_, py_, d, g, orient, visited, stamp, serial, need, out):
    """Dry-run walk from a landing pixel; counts drawable pixels up to ``need``.

    Nothing is marked; the walk obeys the same weak/visited/chained halts
    as a real one (including for the landing pixel itself).  Fills ``out``
    with the traversed pixels.
    """
    cx, cy = ax_, ay_
    px, py = px_, py_
    dd = d
    n = 0
    while n < need:
        if g[cy, cx] <= 0 or visited[cy, cx] != 0 or stamp[cy, cx] == serial:
            break
        out[n, 0] = cx
        out[n, 1] = cy
        n += 1
        if n >= need:
            break
        ok, nx_, ny_ = draw_next(cx, cy, px, py, dd, g, orient, False, 0.0, 0.0, 0.0)
        if not ok:
            break
        dd = next_dir(dd, nx_ - cx, ny_ - cy, orient[ny_, nx_])
        px, py = cx, cy
        cx, cy = nx_, ny_
    return n


@njit(cache=True)
def _support_extremes(seg, sup_xy, sup_next, ux, uy):
    """Min/max support pixels by projection onto the line direction (ux, uy)."""
    idx = int(seg[S_HEAD])
    tmin = 1e300
    tmax = -1e300
    minx = miny = maxx = maxy = 0
    while idx >= 0:
        x = sup_xy[idx, 0]
        y = sup_xy[idx, 1]
        t = ux * x + uy * y
        if t < tmin:
            tmin = t
            minx, miny = x, y
        if t > tmax:
            tmax = t
            maxx, maxy = x, y
        idx = int(sup_next[idx])
    return tmin, minx, miny, tmax, maxx, maxy


@njit(cache=True)
def try_jump(
    seg,
    sup_xy,
    sup_next,
    cx,
    cy,
    g,
    orient,
    gx,
    gy,
    visited,
    stamp,
    serial,
    jump_lengths,
    jump_validation,
    t_eigen,
    cos_t_angle,
):
    """Evaluate discontinuity jumps of increasing length from pixel (cx, cy).

    Implements the ordered conditions: (1) the segment is longer than the
    jump, (2) the landing pixel J steps along the Bresenham-rasterized
    line is inside the image with positive gradient, (3) a trial walk from
    the landing draws at least J pixels, (4) the gradient autocorrelation
    of the extension band stays edge-like and aligned with the segment
    normal (skipped when jump validation is off).  Returns
    (ok, landing_x, landing_y, direction).
    """
    h, w = g.shape
    la = seg[S_A]
    lb = seg[S_B]
    lc = seg[S_C]
    ux = -lb
    uy = la
    tmin, minx, miny, tmax, maxx, maxy = _support_extremes(seg, sup_xy, sup_next, ux, uy)
    tc = ux * cx + uy * cy
    # Point the line direction away from the far end of the segment.
    if abs(tc - tmax) <= abs(tc - tmin):
        fx, fy = ux, uy
    else:
        fx, fy = -ux, -uy

    # Project the stop pixel onto the line before rasterizing along it.
    dist = la * cx + lb * cy + lc
    sx = cx - dist * la
    sy = cy - dist * lb
    maxj = 0
    for i in range(jump_lengths.shape[0]):
        if jump_lengths[i] > maxj:
            maxj = jump_lengths[i]
    path = np.empty((maxj + 3, 2), dtype=np.int32)
    ex = int(round(sx + (maxj + 2) * fx))
    ey = int(round(sy + (maxj + 2) * fy))
    x0 = int(round(sx))
    y0 = int(round(sy))
    if x0 < 0 or x0 >= w or y0 < 0 or y0 >= h:
        return False, -1, -1, -1
    npath = bresenham_clipped_into(x0, y0, ex, ey, w, h, path)

    trial = np.empty((maxj, 2), dtype=np.int32)
    region = np.empty((3 * maxj, 2), dtype=np.int32)
    seg_n = seg[S_N]
    for i in range(jump_lengths.shape[0]):
        j = int(jump_lengths[i])
        if seg_n <= j:
            continue
        if npath <= j:
            continue
        axp = path[j, 0]
        ayp = path[j, 1]
        if g[ayp, axp] <= 0:
            continue
        d_trial = dominant_direction(fx, fy)
        pxp = path[j - 1, 0]
        pyp = path[j - 1, 1]
        n_drawn = trial_walk(axp, ayp, pxp, pyp, d_trial, g, orient, visited, stamp, serial, j, trial)
        if n_drawn < j:
            continue
        if jump_validation:
            # Extension pixels plus a one-pixel band on each side,
            # perpendicular to the trial walk axis.
            horiz = d_trial == DIR_LEFT or d_trial == DIR_RIGHT
            nreg = 0
            for k in range(n_drawn):
                tx = trial[k, 0]
                ty = trial[k, 1]
                for s in range(-1, 2):
                    if horiz:
                        qx, qy = tx, ty + s
                    else:
                        qx, qy = tx + s, ty
                    if qx < 0 or qy < 0 or qx >= w or qy >= h:
                        continue
                    dup = False
                    for m in range(nreg):
                        if region[m, 0] == qx and region[m, 1] == qy:
                            dup = True
                            break
                    if not dup:
                        region[nreg, 0] = qx
                        region[nreg, 1] = qy
                        nreg += 1
            if not eigen_alignment_ok(region, nreg, gx, gy, la, lb, t_eigen, cos_t_angle):
                continue
        return True, axp, ayp, d_trial
    return False, -1, -1, -1


@njit(cache=True)
def run_drawing(
    g,
    gx,
    gy,
    orient,
    anchors,
    visited,
    stamp,
    serial_base,
    t_ol,
    t_min_length,
    t_line_fit_err,
    t_px_to_seg_dist,
    t_eigen,
    cos_t_angle,
    jump_lengths,
    jumps_enabled,
    jump_validation,
    seg_buf,
    sup_xy,
    sup_next,
    jump_buf,
    stack,
    trace,
):
    """Process anchors through the full drawing state machine.

    Returns (n_segments, n_supports, n_jumps, n_trace).  ``visited`` and
    ``stamp`` are updated in place so callers can share drawing state
    across calls.
    """
    h, w = g.shape
    n_seg = 0
    n_sup = 0
    n_jump = 0
    n_trace = 0
    seg_cap = seg_buf.shape[0]
    sup_cap = sup_xy.shape[0]
    jump_cap = jump_buf.shape[0]
    stack_cap = stack.shape[0]
    trace_cap = trace.shape[0]

    chain_xy = np.empty((sup_cap, 2), dtype=np.int32)

    for ai in range(anchors.shape[0]):
        anc_x = anchors[ai, 0]
        anc_y = anchors[ai, 1]
        if g[anc_y, anc_x] <= 0 or visited[anc_y, anc_x] != 0:
            continue
        serial = serial_base + ai + 1

        # Per-anchor chain with incremental sums (reset per explore entry).
        chain_len = 0
        csx = 0.0
        csy = 0.0
        csxx = 0.0
        csyy = 0.0
        csxy = 0.0
        cminx = cmaxx = cminy = cmaxy = 0

        if orient[anc_y, anc_x] == ORIENT_V:
            d1, d2 = DIR_UP, DIR_DOWN
        else:
            d1, d2 = DIR_LEFT, DIR_RIGHT
        sp = 0
        stack[sp, 0] = anc_x
        stack[sp, 1] = anc_y
        stack[sp, 2] = d1
        stack[sp, 3] = -1
        stack[sp, 4] = K_SEED
        sp += 1
        stack[sp, 0] = anc_x
        stack[sp, 1] = anc_y
        stack[sp, 2] = d2
        stack[sp, 3] = -1
        stack[sp, 4] = K_SEED
        sp += 1

        while sp > 0:
            sp -= 1
            ex = stack[sp, 0]
            ey = stack[sp, 1]
            ed = stack[sp, 2]
            eseg = stack[sp, 3]
            ekind = stack[sp, 4]
            if n_trace < trace_cap:
                trace[n_trace, 0] = T_POP
                trace[n_trace, 1] = ex
                trace[n_trace, 2] = ey
                trace[n_trace, 3] = ekind
                n_trace += 1
            if eseg < 0:
                if visited[ey, ex] != 0 or g[ey, ex] <= 0:
                    continue
                if ekind == K_EXPLORE:
                    chain_len = 0
                    csx = csy = csxx = csyy = csxy = 0.0
                    cminx = cmaxx = cminy = cmaxy = 0

            cx = ex
            cy = ey
            d = ed
            px_ = cx - _DX[d]
            py_ = cy - _DY[d]
            live = eseg
            outliers = 0
            skip_process = ekind == K_BWD
            la = lb = lc = 0.0
            if live >= 0:
                la = seg_buf[live, S_A]
                lb = seg_buf[live, S_B]
                lc = seg_buf[live, S_C]
            stop = -1

            while True:
                if skip_process:
                    skip_process = False
                elif live >= 0:
                    dist = abs(la * cx + lb * cy + lc)
                    if dist <= t_px_to_seg_dist:
                        # Inlier: extend accumulators, refit, mark visited.
                        if n_sup < sup_cap:
                            sup_xy[n_sup, 0] = cx
                            sup_xy[n_sup, 1] = cy
                            sup_next[n_sup] = -1
                            tail = int(seg_buf[live, S_TAIL])
                            if tail >= 0:
                                sup_next[tail] = n_sup
                            else:
                                seg_buf[live, S_HEAD] = n_sup
                            seg_buf[live, S_TAIL] = n_sup
                            n_sup += 1
                        seg_buf[live, S_N] += 1
                        seg_buf[live, S_SX] += cx
                        seg_buf[live, S_SY] += cy
                        seg_buf[live, S_SXX] += cx * cx
                        seg_buf[live, S_SYY] += cy * cy
                        seg_buf[live, S_SXY] += cx * cy
                        if cx < seg_buf[live, S_MINX]:
                            seg_buf[live, S_MINX] = cx
                        if cx > seg_buf[live, S_MAXX]:
                            seg_buf[live, S_MAXX] = cx
                        if cy < seg_buf[live, S_MINY]:
                            seg_buf[live, S_MINY] = cy
                        if cy > seg_buf[live, S_MAXY]:
                            seg_buf[live, S_MAXY] = cy
                        axis = AXIS_H
                        if seg_buf[live, S_MAXY] - seg_buf[live, S_MINY] > seg_buf[live, S_MAXX] - seg_buf[live, S_MINX]:
                            axis = AXIS_V
                        okf, fa, fb, fc, _ = fit_from_sums(
                            seg_buf[live, S_N],
                            seg_buf[live, S_SX],
                            seg_buf[live, S_SY],
                            seg_buf[live, S_SXX],
                            seg_buf[live, S_SYY],
                            seg_buf[live, S_SXY],
                            axis,
                        )
                        if okf:
                            na, nb, nc, okn = normalize_line(fa, fb, fc)
                            if okn:
                                la, lb, lc = na, nb, nc
                                seg_buf[live, S_A] = na
                                seg_buf[live, S_B] = nb
                                seg_buf[live, S_C] = nc
                                seg_buf[live, S_AXIS] = axis
                        visited[cy, cx] = 1
                        outliers = 0
                    else:
                        outliers += 1
                        seg_buf[live, S_OUTLIERS] += 1
                else:
                    if stamp[cy, cx] != serial:
                        stamp[cy, cx] = serial
                        chain_xy[chain_len, 0] = cx
                        chain_xy[chain_len, 1] = cy
                        if chain_len == 0:
                            cminx = cmaxx = cx
                            cminy = cmaxy = cy
                        else:
                            if cx < cminx:
                                cminx = cx
                            if cx > cmaxx:
                                cmaxx = cx
                            if cy < cminy:
                                cminy = cy
                            if cy > cmaxy:
                                cmaxy = cy
                        chain_len += 1
                        csx += cx
                        csy += cy
                        csxx += cx * cx
                        csyy += cy * cy
                        csxy += cx * cy
                    if chain_len >= t_min_length:
                        axis = AXIS_H if (cmaxx - cminx) >= (cmaxy - cminy) else AXIS_V
                        okf, fa, fb, fc, mse = fit_from_sums(
                            float(chain_len), csx, csy, csxx, csyy, csxy, axis
                        )
                        if okf and mse <= t_line_fit_err and n_seg < seg_cap:
                            na, nb, nc, okn = normalize_line(fa, fb, fc)
                            if okn:
                                live = n_seg
                                n_seg += 1
                                row = seg_buf[live]
                                row[S_A] = na
                                row[S_B] = nb
                                row[S_C] = nc
                                row[S_N] = 0.0
                                row[S_SX] = 0.0
                                row[S_SY] = 0.0
                                row[S_SXX] = 0.0
                                row[S_SYY] = 0.0
                                row[S_SXY] = 0.0
                                row[S_HEAD] = -1.0
                                row[S_TAIL] = -1.0
                                row[S_BWD_PUSHED] = 0.0
                                row[S_AXIS] = axis
                                row[S_FITERR] = mse
                                row[S_OUTLIERS] = 0.0
                                first = True
                                for k in range(chain_len):
                                    qx = chain_xy[k, 0]
                                    qy = chain_xy[k, 1]
                                    visited[qy, qx] = 1
                                    if abs(na * qx + nb * qy + nc) <= t_px_to_seg_dist:
                                        if n_sup < sup_cap:
                                            sup_xy[n_sup, 0] = qx
                                            sup_xy[n_sup, 1] = qy
                                            sup_next[n_sup] = -1
                                            tail = int(row[S_TAIL])
                                            if tail >= 0:
                                                sup_next[tail] = n_sup
                                            else:
                                                row[S_HEAD] = n_sup
                                            row[S_TAIL] = n_sup
                                            n_sup += 1
                                        row[S_N] += 1
                                        row[S_SX] += qx
                                        row[S_SY] += qy
                                        row[S_SXX] += qx * qx
                                        row[S_SYY] += qy * qy
                                        row[S_SXY] += qx * qy
                                        if first:
                                            row[S_MINX] = qx
                                            row[S_MAXX] = qx
                                            row[S_MINY] = qy
                                            row[S_MAXY] = qy
                                            first = False
                                        else:
                                            if qx < row[S_MINX]:
                                                row[S_MINX] = qx
                                            if qx > row[S_MAXX]:
                                                row[S_MAXX] = qx
                                            if qy < row[S_MINY]:
                                                row[S_MINY] = qy
                                            if qy > row[S_MAXY]:
                                                row[S_MAXY] = qy
                                la, lb, lc = na, nb, nc
                                outliers = 0
                                if n_trace < trace_cap:
                                    trace[n_trace, 0] = T_SEG_NEW
                                    trace[n_trace, 1] = cx
                                    trace[n_trace, 2] = cy
                                    trace[n_trace, 3] = live
                                    n_trace += 1

                if live >= 0 and outliers >= t_ol:
                    stop = STOP_OUTLIERS
                    break
                ok, nx_, ny_ = draw_next(
                    cx, cy, px_, py_, d, g, orient, live >= 0, la, lb, lc
                )
                if not ok:
                    stop = STOP_WEAK
                    break
                if visited[ny_, nx_] != 0 or stamp[ny_, nx_] == serial:
                    stop = STOP_VISITED
                    break
                d = next_dir(d, nx_ - cx, ny_ - cy, orient[ny_, nx_])
                px_, py_ = cx, cy
                cx, cy = nx_, ny_

            if live < 0:
                continue

            # Discontinuity actions, pushed so pops run: forward jump,
            # backward extension, then the changed gradient direction.
            if stop == STOP_OUTLIERS and g[cy, cx] > 0 and visited[cy, cx] == 0 and sp < stack_cap:
                stack[sp, 0] = cx
                stack[sp, 1] = cy
                stack[sp, 2] = d
                stack[sp, 3] = -1
                stack[sp, 4] = K_EXPLORE
                sp += 1
                if n_trace < trace_cap:
                    trace[n_trace, 0] = T_PUSH
                    trace[n_trace, 1] = cx
                    trace[n_trace, 2] = cy
                    trace[n_trace, 3] = K_EXPLORE
                    n_trace += 1
            if seg_buf[live, S_BWD_PUSHED] == 0.0 and sp < stack_cap:
                ux = -seg_buf[live, S_B]
                uy = seg_buf[live, S_A]
                tmin, minx, miny, tmax, maxx, maxy = _support_extremes(
                    seg_buf[live], sup_xy, sup_next, ux, uy
                )
                tc = ux * cx + uy * cy
                if abs(tc - tmax) <= abs(tc - tmin):
                    bx, by = minx, miny
                    bdir = dominant_direction(-ux, -uy)
                else:
                    bx, by = maxx, maxy
                    bdir = dominant_direction(ux, uy)
                stack[sp, 0] = bx
                stack[sp, 1] = by
                stack[sp, 2] = bdir
                stack[sp, 3] = live
                stack[sp, 4] = K_BWD
                sp += 1
                seg_buf[live, S_BWD_PUSHED] = 1.0
                if n_trace < trace_cap:
                    trace[n_trace, 0] = T_PUSH
                    trace[n_trace, 1] = bx
                    trace[n_trace, 2] = by
                    trace[n_trace, 3] = K_BWD
                    n_trace += 1
            if jumps_enabled and sp < stack_cap:
                okj, jx, jy, jd = try_jump(
                    seg_buf[live],
                    sup_xy,
                    sup_next,
                    cx,
                    cy,
                    g,
                    orient,
                    gx,
                    gy,
                    visited,
                    stamp,
                    serial,
                    jump_lengths,
                    jump_validation,
                    t_eigen,
                    cos_t_angle,
                )
                if okj:
                    if n_jump < jump_cap:
                        jump_buf[n_jump, 0] = live
                        jump_buf[n_jump, 1] = cx
                        jump_buf[n_jump, 2] = cy
                        jump_buf[n_jump, 3] = jx
                        jump_buf[n_jump, 4] = jy
                        n_jump += 1
                    stack[sp, 0] = jx
                    stack[sp, 1] = jy
                    stack[sp, 2] = jd
                    stack[sp, 3] = live
                    stack[sp, 4] = K_FWD
                    sp += 1
                    if n_trace < trace_cap:
                        trace[n_trace, 0] = T_JUMP
                        trace[n_trace, 1] = jx
                        trace[n_trace, 2] = jy
                        trace[n_trace, 3] = K_FWD
                        n_trace += 1

    return n_seg, n_sup, n_jump, n_trace


@njit(cache=True)
def finalize_segments(seg_buf, n_seg, sup_xy, sup_next, endpoints, sup_out, sup_start, sup_count):
    """Project extreme supports onto each final line and compact supports.

    ``endpoints`` receives (x1, y1, x2, y2) per segment ordered by
    projection parameter; ``sup_out``/``sup_start``/``sup_count`` receive
    each segment's support pixels contiguously in insertion order.
    """
    pos = 0
    for s in range(n_seg):
        la = seg_buf[s, S_A]
        lb = seg_buf[s, S_B]
        lc = seg_buf[s, S_C]
        ux = -lb
        uy = la
        tmin = 1e300
        tmax = -1e300
        sup_start[s] = pos
        idx = int(seg_buf[s, S_HEAD])
        cnt = 0
        while idx >= 0:
            x = sup_xy[idx, 0]
            y = sup_xy[idx, 1]
            sup_out[pos, 0] = x
            sup_out[pos, 1] = y
            pos += 1
            cnt += 1
            t = ux * x + uy * y
            if t < tmin:
                tmin = t
            if t > tmax:
                tmax = t
            idx = int(sup_next[idx])
        sup_count[s] = cnt
        # Base point of the line closest to the origin, then sweep along u.
        bx = -lc * la
        by = -lc * lb
        endpoints[s, 0] = bx + tmin * ux
        endpoints[s, 1] = by + tmin * uy
        endpoints[s, 2] = bx + tmax * ux
        endpoints[s, 3] = by + tmax * uy
    return pos
