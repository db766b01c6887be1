"""Segment validation by gradient-orientation inlier ratio.

A candidate is kept when at least half of its usable supporting pixels
have a gradient direction within ``t_valid`` radians of the segment
normal.  Pixels inside jumped discontinuities and a small margin at each
endpoint are excluded: both regions carry gradients of neighboring
structure even for correct detections.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .eed import SegmentCandidate
from .imgproc import GradientMap
from .params import DetectorParams


@dataclass(frozen=True)
class ValidatedSegment:
    """Final detector output: endpoints plus the validation verdict."""

    x1: float
    y1: float
    x2: float
    y2: float
    score: float
    accepted: bool

    @property
    def length(self) -> float:
        return math.hypot(self.x2 - self.x1, self.y2 - self.y1)

    @property
    def endpoints(self) -> np.ndarray:
        return np.array([self.x1, self.y1, self.x2, self.y2], dtype=np.float64)


def angular_errors(sup_xy: np.ndarray, normal: tuple[float, float], grad: GradientMap) -> np.ndarray:
    """Angle between each pixel's raw gradient and the segment normal.

    Folded to [0, pi/2]: a contrast flip (g vs -g) or swapping the
    segment's endpoints must not change the error.
    """
    gxv = grad.gx[sup_xy[:, 1], sup_xy[:, 0]].astype(np.float64)
    gyv = grad.gy[sup_xy[:, 1], sup_xy[:, 0]].astype(np.float64)
    gnorm = np.hypot(gxv, gyv)
    nnorm = math.hypot(normal[0], normal[1])
    denom = gnorm * nnorm
    cosang = np.zeros(len(sup_xy), dtype=np.float64)
    nz = denom > 0
    cosang[nz] = np.abs(gxv[nz] * normal[0] + gyv[nz] * normal[1]) / denom[nz]
    return np.arccos(np.clip(cosang, 0.0, 1.0))


def usable_support_mask(
    sup_xy: np.ndarray,
    line: tuple[float, float, float],
    jumps,
    endpoint_margin: float,
) -> np.ndarray:
    """Mask of support pixels outside jumped gaps and endpoint margins."""
    la, lb, _lc = line
    ux, uy = -lb, la
    t = ux * sup_xy[:, 0] + uy * sup_xy[:, 1]
    tmin = t.min()
    tmax = t.max()
    mask = (t >= tmin + endpoint_margin) & (t <= tmax - endpoint_margin)
    for (cx, cy), (jx, jy) in jumps:
        t0 = ux * cx + uy * cy
        t1 = ux * jx + uy * jy
        lo, hi = (t0, t1) if t0 <= t1 else (t1, t0)
        mask &= ~((t >= lo) & (t <= hi))
    return mask


def validate_segment(
    cand: SegmentCandidate, grad: GradientMap, t_valid: float = 0.15, endpoint_margin: float = 2.0
) -> ValidatedSegment:
    """Score a candidate and accept it when the inlier ratio reaches 50%."""
    if len(cand.pixels) == 0:
        raise ValueError("candidate has no supporting pixels")
    la, lb, lc = cand.fit.normalized
    mask = usable_support_mask(cand.pixels, (la, lb, lc), cand.jumps, endpoint_margin)
    (x1, y1), (x2, y2) = cand.endpoints
    if not mask.any():
        return ValidatedSegment(x1, y1, x2, y2, 0.0, False)
    errors = angular_errors(cand.pixels[mask], (la, lb), grad)
    score = float(np.count_nonzero(errors < t_valid)) / float(len(errors))
    return ValidatedSegment(x1, y1, x2, y2, score, score >= 0.5)


def validate_candidates(
    candidates: list[SegmentCandidate], grad: GradientMap, params: DetectorParams
) -> list[ValidatedSegment]:
    """Validate (or pass through) a candidate list per the params switches.

    With segment validation disabled every candidate is kept and its
    length becomes the ranking score.
    """
    out = []
    for cand in candidates:
        if params.segment_validation_enabled:
            out.append(
                validate_segment(cand, grad, params.t_valid, float(params.endpoint_margin))
            )
        else:
            (x1, y1), (x2, y2) = cand.endpoints
            out.append(ValidatedSegment(x1, y1, x2, y2, cand.length, True))
    return out
