"""Anchor extraction: scan-subsampled local maxima of gradient magnitude.

A pixel is an anchor when its gradient magnitude exceeds both neighbors
along the quantized gradient direction by at least the anchor threshold.
Only pixels whose row and column are both multiples of the scan interval
are tested.  Anchors are returned strongest-first so that drawing claims
salient edges before weaker ones.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .imgproc import VERTICAL_EDGE, GradientMap


@dataclass(frozen=True)
class Anchor:
    x: int
    y: int
    orient: int
    magnitude: int


def anchor_mask(grad: GradientMap, t_anchor: float = 8.0, scan_interval: int = 1) -> np.ndarray:
    """Boolean mask of anchor pixels (no ordering applied)."""
    if t_anchor < 0:
        raise ValueError(f"t_anchor must be >= 0, got {t_anchor}")
    if scan_interval < 1:
        raise ValueError(f"scan_interval must be >= 1, got {scan_interval}")
    g = grad.g
    h, w = g.shape
    mask = np.zeros((h, w), dtype=bool)
    if h < 3 or w < 3:
        return mask

    inner = g[1:-1, 1:-1]
    vert = grad.orient[1:-1, 1:-1] == VERTICAL_EDGE
    # Vertical edges: local max along x; horizontal edges: along y.
    left_ok = inner - g[1:-1, :-2] >= t_anchor
    right_ok = inner - g[1:-1, 2:] >= t_anchor
    up_ok = inner - g[:-2, 1:-1] >= t_anchor
    down_ok = inner - g[2:, 1:-1] >= t_anchor
    local_max = np.where(vert, left_ok & right_ok, up_ok & down_ok)
    mask[1:-1, 1:-1] = (inner > 0) & local_max

    if scan_interval > 1:
        keep = np.zeros((h, w), dtype=bool)
        keep[::scan_interval, ::scan_interval] = True
        mask &= keep
    return mask


def extract_anchors(grad: GradientMap, t_anchor: float = 8.0, scan_interval: int = 1) -> list[Anchor]:
    """Anchors sorted by gradient magnitude descending, ties row-major."""
    ys, xs = np.nonzero(anchor_mask(grad, t_anchor, scan_interval))
    if len(xs) == 0:
        return []
    mags = grad.g[ys, xs]
    order = np.lexsort((xs, ys, -mags))
    return [
        Anchor(x=int(xs[i]), y=int(ys[i]), orient=int(grad.orient[ys[i], xs[i]]), magnitude=int(mags[i]))
        for i in order
    ]


def anchor_array(grad: GradientMap, t_anchor: float = 8.0, scan_interval: int = 1) -> np.ndarray:
    """Sorted anchors as an (n, 2) int32 array of (x, y), for the drawing kernel."""
    ys, xs = np.nonzero(anchor_mask(grad, t_anchor, scan_interval))
    if len(xs) == 0:
        return np.zeros((0, 2), dtype=np.int32)
    order = np.lexsort((xs, ys, -grad.g[ys, xs]))
    return np.stack([xs[order], ys[order]], axis=1).astype(np.int32)
