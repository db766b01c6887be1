"""Raster containers, Gaussian smoothing and Sobel gradient maps.

Conventions used across the package:

* images are numpy arrays of shape ``(height, width)`` indexed ``[y, x]``,
  with x growing rightward, y growing downward and the origin at the
  top-left pixel center;
* per-pixel edge orientation is quantized to two labels,
  :data:`VERTICAL_EDGE` (``|gx| >= |gy|``, the intensity edge runs
  vertically) and :data:`HORIZONTAL_EDGE`.

All arithmetic in the smoothing/gradient path is integer (fixed-point
kernel for the blur, plain integer Sobel), so results are bit-exact
across platforms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Quantized edge orientation labels. Ties |gx| == |gy| are VERTICAL_EDGE.
HORIZONTAL_EDGE = 0
VERTICAL_EDGE = 1

# Fixed-point shift for the normalized Gaussian kernel.
_KERNEL_SHIFT = 15


class ImageError(ValueError):
    """Raised for images that violate an operation's preconditions."""


@dataclass(frozen=True)
class GrayImage:
    """Single-channel 8-bit raster, row-major."""

    pixels: np.ndarray  # uint8, shape (height, width)

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2:
            raise ImageError(f"expected a 2-D array, got shape {px.shape}")
        if px.size == 0:
            raise ImageError("empty image")
        if px.dtype != np.uint8:
            if np.issubdtype(px.dtype, np.floating):
                if np.nanmin(px) < 0 or np.nanmax(px) > 255:
                    raise ImageError("intensities must lie in [0, 255]")
            elif np.issubdtype(px.dtype, np.integer):
                if px.min() < 0 or px.max() > 255:
                    raise ImageError("intensities must lie in [0, 255]")
            else:
                raise ImageError(f"unsupported dtype {px.dtype}")
            px = px.astype(np.uint8)
        object.__setattr__(self, "pixels", np.ascontiguousarray(px))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True)
class GradientMap:
    """Sobel responses plus thresholded L1 magnitude and quantized orientation.

    ``gx``/``gy`` hold the raw signed Sobel responses everywhere (the border
    ring is zeroed, Sobel is undefined there).  ``g`` is ``|gx| + |gy|``
    where that sum reaches the gradient threshold and 0 elsewhere.
    ``orient`` is VERTICAL_EDGE where ``|gx| >= |gy|``.
    """

    gx: np.ndarray  # int32, (h, w)
    gy: np.ndarray  # int32, (h, w)
    g: np.ndarray  # int32, (h, w)
    orient: np.ndarray  # uint8, (h, w)

    @property
    def width(self) -> int:
        return self.g.shape[1]

    @property
    def height(self) -> int:
        return self.g.shape[0]


def as_pixel_array(img) -> np.ndarray:
    """Accept a GrayImage or a bare 2-D array and return uint8 pixels."""
    if isinstance(img, GrayImage):
        return img.pixels
    return GrayImage(np.asarray(img)).pixels


def gaussian_kernel_1d(kernel_size: int, sigma: float) -> np.ndarray:
    """Sampled 1-D Gaussian, normalized to sum exactly 1 (float64)."""
    if kernel_size < 3 or kernel_size % 2 == 0:
        raise ImageError(f"kernel size must be odd and >= 3, got {kernel_size}")
    if sigma <= 0:
        raise ImageError(f"sigma must be > 0, got {sigma}")
    half = kernel_size // 2
    xs = np.arange(-half, half + 1, dtype=np.float64)
    k = np.exp(-(xs * xs) / (2.0 * sigma * sigma))
    return k / k.sum()


def _fixed_point_kernel(kernel_size: int, sigma: float) -> np.ndarray:
    """Integer kernel taps summing to exactly 2**_KERNEL_SHIFT."""
    k = gaussian_kernel_1d(kernel_size, sigma)
    q = np.floor(k * (1 << _KERNEL_SHIFT) + 0.5).astype(np.int32)
    # Absorb quantization residue into the center tap so the taps sum to
    # exactly one in fixed point (keeps constant images constant).
    q[kernel_size // 2] += (1 << _KERNEL_SHIFT) - q.sum()
    return q


def _blur_pass(data: np.ndarray, taps: np.ndarray, axis: int) -> np.ndarray:
    """One separable pass: replicate-pad, weighted sum, round, shift back.

    int32 suffices: 255 * 2**15 taps plus rounding stays under 2**31.
    """
    half = len(taps) // 2
    pad = [(0, 0), (0, 0)]
    pad[axis] = (half, half)
    padded = np.pad(data, pad, mode="edge").astype(np.int32)
    acc = np.zeros(data.shape, dtype=np.int32)
    view = [slice(None), slice(None)]
    for i, w in enumerate(taps):
        view[axis] = slice(i, i + data.shape[axis])
        acc += w * padded[tuple(view)]
    acc += 1 << (_KERNEL_SHIFT - 1)
    return acc >> _KERNEL_SHIFT


def gaussian_blur(img, kernel_size: int = 5, sigma: float = 1.0) -> GrayImage:
    """Smooth an image with a separable sampled-Gaussian kernel.

    Intermediate arithmetic is fixed-point integer; borders are handled by
    edge replication.  Output has the same dimensions as the input.
    """
    px = as_pixel_array(img)
    blurred = _blur_pass(px, _fixed_point_kernel(kernel_size, sigma), axis=0)
    blurred = _blur_pass(blurred, _fixed_point_kernel(kernel_size, sigma), axis=1)
    return GrayImage(blurred.astype(np.uint8))


def compute_gradient(img, t_grad: float = 30.0) -> GradientMap:
    """Sobel gradients with L1 magnitude and weak-edge suppression.

    ``g = |gx| + |gy|`` where that sum is at least ``t_grad``, else 0.  The
    one-pixel border ring carries ``g = 0`` so walks never leave the image.
    """
    px = as_pixel_array(img)
    h, w = px.shape
    if h < 3 or w < 3:
        raise ImageError(f"image {w}x{h} smaller than the 3x3 Sobel kernel")

    a = px.astype(np.int32)
    gx = np.zeros((h, w), dtype=np.int32)
    gy = np.zeros((h, w), dtype=np.int32)
    # 3x3 Sobel, correlation form: gx responds to intensity increasing in +x.
    gx[1:-1, 1:-1] = (
        (a[:-2, 2:] + 2 * a[1:-1, 2:] + a[2:, 2:])
        - (a[:-2, :-2] + 2 * a[1:-1, :-2] + a[2:, :-2])
    )
    gy[1:-1, 1:-1] = (
        (a[2:, :-2] + 2 * a[2:, 1:-1] + a[2:, 2:])
        - (a[:-2, :-2] + 2 * a[:-2, 1:-1] + a[:-2, 2:])
    )

    mag = np.abs(gx) + np.abs(gy)
    g = np.where(mag >= t_grad, mag, 0).astype(np.int32)
    g[0, :] = g[-1, :] = 0
    g[:, 0] = g[:, -1] = 0
    orient = np.where(np.abs(gx) >= np.abs(gy), VERTICAL_EDGE, HORIZONTAL_EDGE)
    return GradientMap(gx=gx, gy=gy, g=g, orient=orient.astype(np.uint8))
