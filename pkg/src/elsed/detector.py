"""Pipeline orchestration: smoothing, gradients, anchors, drawing, validation.

:func:`detect` is the functional entry point; :class:`Detector` wraps it
in an estimator-style object (constructor keyword parameters plus
``get_params``/``set_params``) so the detector drops into pipelines and
grid-search style tooling without adapters.
"""

from __future__ import annotations

import time
from dataclasses import fields

import numpy as np

from . import _kernels as K
from .anchors import anchor_array
from .eed import DrawState, run_drawing_pass
from .imgproc import GradientMap, ImageError, as_pixel_array, compute_gradient, gaussian_blur
from .params import DetectorParams
from .validate import ValidatedSegment

MIN_IMAGE_SIDE = 16


def _score_raw(raw: dict, grad: GradientMap, params: DetectorParams):
    """Vectorized validation scores over the kernel's flat result buffers."""
    seg_buf = raw["seg_buf"]
    n_seg = len(seg_buf)
    if n_seg == 0:
        return np.empty(0), np.empty(0, dtype=bool)
    endpoints = raw["endpoints"]
    if not params.segment_validation_enabled:
        lengths = np.hypot(endpoints[:, 2] - endpoints[:, 0], endpoints[:, 3] - endpoints[:, 1])
        return lengths, np.ones(n_seg, dtype=bool)

    sup = raw["supports"]
    starts = raw["sup_start"]
    counts = raw["sup_count"]
    seg_ids = np.repeat(np.arange(n_seg), counts)
    la = seg_buf[seg_ids, K.S_A]
    lb = seg_buf[seg_ids, K.S_B]
    x = sup[:, 0].astype(np.float64)
    y = sup[:, 1].astype(np.float64)
    t = -lb * x + la * y
    tmin = np.minimum.reduceat(t, starts)
    tmax = np.maximum.reduceat(t, starts)
    margin = float(params.endpoint_margin)
    usable = (t >= tmin[seg_ids] + margin) & (t <= tmax[seg_ids] - margin)

    for s, cx, cy, jx, jy in raw["jumps"]:
        ua, ub = -seg_buf[s, K.S_B], seg_buf[s, K.S_A]
        t0 = ua * cx + ub * cy
        t1 = ua * jx + ub * jy
        lo, hi = (t0, t1) if t0 <= t1 else (t1, t0)
        span = slice(starts[s], starts[s] + counts[s])
        ts = ua * sup[span, 0] + ub * sup[span, 1]
        usable[span] &= ~((ts >= lo) & (ts <= hi))

    gxv = grad.gx[sup[:, 1], sup[:, 0]].astype(np.float64)
    gyv = grad.gy[sup[:, 1], sup[:, 0]].astype(np.float64)
    gnorm = np.hypot(gxv, gyv)
    cosang = np.abs(gxv * la + gyv * lb) / np.where(gnorm > 0, gnorm, 1.0)
    err = np.arccos(np.clip(cosang, 0.0, 1.0))
    aligned = usable & (err < params.t_valid)

    n_use = np.add.reduceat(usable.astype(np.int64), starts)
    n_good = np.add.reduceat(aligned.astype(np.int64), starts)
    scores = np.where(n_use > 0, n_good / np.maximum(n_use, 1), 0.0)
    return scores, (n_use > 0) & (scores >= 0.5)


def run_pipeline(img, params: DetectorParams | None = None):
    """Full detection with per-stage wall-clock timings.

    Returns (segments, timings) where timings maps stage name to seconds
    for the stages: blur, gradient, anchors, drawing, validation.
    """
    params = params or DetectorParams()
    px = as_pixel_array(img)
    h, w = px.shape
    if h < MIN_IMAGE_SIDE or w < MIN_IMAGE_SIDE:
        raise ImageError(f"image {w}x{h} below the {MIN_IMAGE_SIDE}px minimum side")

    timings = {}
    t0 = time.perf_counter()
    blurred = gaussian_blur(px, params.blur_kernel, params.blur_sigma)
    t1 = time.perf_counter()
    timings["blur"] = t1 - t0
    grad = compute_gradient(blurred, params.t_grad)
    t2 = time.perf_counter()
    timings["gradient"] = t2 - t1
    anchors = anchor_array(grad, params.t_anchor, params.scan_interval)
    t3 = time.perf_counter()
    timings["anchors"] = t3 - t2
    state = DrawState.for_shape(h, w)
    raw = run_drawing_pass(grad, anchors, state, params)
    t4 = time.perf_counter()
    timings["drawing"] = t4 - t3
    scores, accepted = _score_raw(raw, grad, params)
    endpoints = raw["endpoints"]
    keep = np.nonzero(accepted)[0]
    order = keep[np.argsort(-scores[keep], kind="stable")]
    segments = [
        ValidatedSegment(
            x1=float(endpoints[s, 0]),
            y1=float(endpoints[s, 1]),
            x2=float(endpoints[s, 2]),
            y2=float(endpoints[s, 3]),
            score=float(scores[s]),
            accepted=True,
        )
        for s in order
    ]
    t5 = time.perf_counter()
    timings["validation"] = t5 - t4
    timings["total"] = t5 - t0
    return segments, timings


def detect(img, params: DetectorParams | None = None) -> list[ValidatedSegment]:
    """Detect line segments; accepted segments only, best score first."""
    segments, _ = run_pipeline(img, params)
    return segments


def segments_to_array(segments) -> np.ndarray:
    """(n, 4) float64 endpoint array from ValidatedSegment records."""
    if not segments:
        return np.zeros((0, 4), dtype=np.float64)
    return np.array([[s.x1, s.y1, s.x2, s.y2] for s in segments], dtype=np.float64)


def segment_scores(segments) -> np.ndarray:
    return np.array([s.score for s in segments], dtype=np.float64)


class Detector:
    """Estimator-style wrapper around :func:`detect`.

    Parameters mirror :class:`DetectorParams` one to one; ``get_params``
    and ``set_params`` follow the scikit-learn contract so the detector
    composes with parameter sweeps and pipeline tooling.
    """

    def __init__(self, **params):
        self._params = DetectorParams(**params)

    def get_params(self, deep: bool = True) -> dict:
        return {f.name: getattr(self._params, f.name) for f in fields(DetectorParams)}

    def set_params(self, **params) -> "Detector":
        unknown = set(params) - {f.name for f in fields(DetectorParams)}
        if unknown:
            raise ValueError(f"unknown parameters: {sorted(unknown)}")
        self._params = self._params.replace(**params)
        return self

    @property
    def params(self) -> DetectorParams:
        return self._params

    def detect(self, img) -> list[ValidatedSegment]:
        return detect(img, self._params)

    def __repr__(self):
        defaults = DetectorParams()
        diff = {
            f.name: getattr(self._params, f.name)
            for f in fields(DetectorParams)
            if getattr(self._params, f.name) != getattr(defaults, f.name)
        }
        args = ", ".join(f"{k}={v!r}" for k, v in diff.items())
        return f"Detector({args})"


def ablation_params(jumps: str = "multiple", jump_validation: bool = True, segment_validation: bool = True) -> DetectorParams:
    """Build the standard ablation configurations.

    ``jumps`` is one of "none", "fixed" (single 5 px jump) or "multiple"
    (5, 7, 9 px).
    """
    if jumps == "none":
        return DetectorParams(
            jumps_enabled=False,
            jump_validation_enabled=jump_validation,
            segment_validation_enabled=segment_validation,
        )
    if jumps == "fixed":
        lengths: tuple[int, ...] = (5,)
    elif jumps == "multiple":
        lengths = (5, 7, 9)
    else:
        raise ValueError(f"jumps must be none/fixed/multiple, got {jumps!r}")
    return DetectorParams(
        jump_lengths=lengths,
        jumps_enabled=True,
        jump_validation_enabled=jump_validation,
        segment_validation_enabled=segment_validation,
    )


ABLATION_GRID = (
    ("none", False, False),
    ("none", False, True),
    ("fixed", False, False),
    ("fixed", True, False),
    ("multiple", True, False),
    ("multiple", True, True),
)
