"""Detector parameters and ablation switches."""

from __future__ import annotations

from dataclasses import dataclass, fields


@dataclass
class DetectorParams:
    """All tunables of the detection pipeline, with production defaults.

    The three boolean switches plus ``jump_lengths`` span the full
    ablation grid: no jumps, fixed-length jumps ``[5]`` and multi-length
    jumps ``[5, 7, 9]``, each with jump validation and segment validation
    toggled independently.
    """

    blur_kernel: int = 5
    blur_sigma: float = 1.0
    t_grad: float = 30.0
    t_anchor: float = 8.0
    scan_interval: int = 2
    t_ol: int = 3
    t_min_length: int = 15
    t_line_fit_err: float = 0.2  # px^2, mean squared residual
    t_px_to_seg_dist: float = 1.5  # px
    t_eigen_ext: float = 10.0
    t_angle_ext: float = 10.0  # degrees
    t_valid: float = 0.15  # radians
    jump_lengths: tuple[int, ...] = (5, 7, 9)
    jumps_enabled: bool = True
    jump_validation_enabled: bool = True
    segment_validation_enabled: bool = True
    endpoint_margin: int = 2  # px excluded per endpoint during validation

    def __post_init__(self):
        self.jump_lengths = tuple(int(j) for j in self.jump_lengths)
        self.validate()

    def validate(self):
        if self.blur_kernel < 3 or self.blur_kernel % 2 == 0:
            raise ValueError(f"blur_kernel must be odd and >= 3, got {self.blur_kernel}")
        if self.blur_sigma <= 0:
            raise ValueError("blur_sigma must be > 0")
        if self.t_grad < 0 or self.t_anchor < 0:
            raise ValueError("thresholds must be >= 0")
        if self.scan_interval < 1:
            raise ValueError("scan_interval must be >= 1")
        if self.t_ol < 1:
            raise ValueError("t_ol must be >= 1")
        if self.t_min_length < 2:
            raise ValueError("t_min_length must be >= 2")
        if self.t_line_fit_err <= 0 or self.t_px_to_seg_dist <= 0:
            raise ValueError("fit thresholds must be > 0")
        if self.t_eigen_ext < 1:
            raise ValueError("t_eigen_ext must be >= 1")
        if not 0 < self.t_angle_ext <= 90:
            raise ValueError("t_angle_ext must be in (0, 90] degrees")
        if not 0 < self.t_valid < 1.5707963:
            raise ValueError("t_valid must be in (0, pi/2) radians")
        if list(self.jump_lengths) != sorted(self.jump_lengths):
            raise ValueError("jump_lengths must be sorted ascending")
        if any(j < 5 for j in self.jump_lengths):
            raise ValueError("jump lengths must be >= 5 (blur spreads any gap that far)")
        if self.endpoint_margin < 0:
            raise ValueError("endpoint_margin must be >= 0")

    def replace(self, **overrides) -> "DetectorParams":
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        values.update(overrides)
        return DetectorParams(**values)
