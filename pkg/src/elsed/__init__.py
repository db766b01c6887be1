"""ELSED: line segment detection by enhanced edge drawing, plus the
matching/metrics toolkit used to evaluate segment detectors."""

from . import evaluation, segio  # noqa: F401  (public submodules)
from .anchors import Anchor, extract_anchors
from .detector import ABLATION_GRID, Detector, ablation_params, detect, run_pipeline
from .eed import (
    Direction,
    DrawState,
    LineFit,
    SegmentCandidate,
    bresenham,
    can_continue,
    draw_next_pixel,
    eed_from_anchor,
    fit_new_segment,
    add_pixel_to_segment,
)
from .imgproc import (
    HORIZONTAL_EDGE,
    VERTICAL_EDGE,
    GradientMap,
    GrayImage,
    ImageError,
    compute_gradient,
    gaussian_blur,
)
from .params import DetectorParams
from .validate import ValidatedSegment, validate_segment

__version__ = "0.1.0"

__all__ = [
    "ABLATION_GRID",
    "Anchor",
    "Detector",
    "DetectorParams",
    "Direction",
    "DrawState",
    "GradientMap",
    "GrayImage",
    "HORIZONTAL_EDGE",
    "ImageError",
    "LineFit",
    "SegmentCandidate",
    "ValidatedSegment",
    "VERTICAL_EDGE",
    "ablation_params",
    "add_pixel_to_segment",
    "bresenham",
    "can_continue",
    "compute_gradient",
    "detect",
    "draw_next_pixel",
    "eed_from_anchor",
    "extract_anchors",
    "fit_new_segment",
    "gaussian_blur",
    "run_pipeline",
    "validate_segment",
]
