"""File formats: images (PGM/PNG), segment lists (CSV/JSONL), homographies.

Readers reject malformed data instead of coercing it; each failure mode
has its own exception type so callers (and the CLI) can report precise
errors.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .imgproc import GrayImage


class SegmentIOError(ValueError):
    """Base class for file-format errors."""


class UnsupportedFormatError(SegmentIOError):
    pass


class TruncatedFileError(SegmentIOError):
    pass


class SegmentFileError(SegmentIOError):
    """Malformed segment record file; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


class HomographyFileError(SegmentIOError):
    pass


# ---------------------------------------------------------------------------
# Images
# ---------------------------------------------------------------------------

_PGM_MAGIC = b"P5"
_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def load_image(path) -> GrayImage:
    """Load a grayscale image from PGM (P5) or PNG.

    RGB PNGs are converted with integer luma rounding
    (0.299 R + 0.587 G + 0.114 B); 16-bit inputs are rejected.
    """
    path = Path(path)
    with open(path, "rb") as f:
        head = f.read(8)
    if head.startswith(_PGM_MAGIC):
        return _load_pgm(path)
    if head.startswith(_PNG_MAGIC):
        return _load_png(path)
    raise UnsupportedFormatError(f"{path}: not a P5 PGM or PNG file")


def _load_pgm(path: Path) -> GrayImage:
    data = path.read_bytes()
    # Header: magic, width, height, maxval as whitespace-separated tokens,
    # with '#' comments allowed; pixel data follows the single whitespace
    # after maxval.
    pos = 2
    tokens = []
    while len(tokens) < 3:
        if pos >= len(data):
            raise TruncatedFileError(f"{path}: incomplete PGM header")
        ch = data[pos : pos + 1]
        if ch.isspace():
            pos += 1
        elif ch == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
        else:
            start = pos
            while pos < len(data) and not data[pos : pos + 1].isspace():
                pos += 1
            tokens.append(data[start:pos])
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError as exc:
        raise UnsupportedFormatError(f"{path}: bad PGM header {tokens}") from exc
    if width <= 0 or height <= 0:
        raise UnsupportedFormatError(f"{path}: bad PGM dimensions {width}x{height}")
    if maxval > 255 or maxval <= 0:
        raise UnsupportedFormatError(f"{path}: unsupported PGM maxval {maxval}")
    pos += 1  # single whitespace after maxval
    pixels = data[pos : pos + width * height]
    if len(pixels) < width * height:
        raise TruncatedFileError(
            f"{path}: expected {width * height} pixel bytes, found {len(pixels)}"
        )
    arr = np.frombuffer(pixels, dtype=np.uint8).reshape(height, width)
    return GrayImage(arr.copy())


def _load_png(path: Path) -> GrayImage:
    try:
        with Image.open(path) as im:
            im.load()
            mode = im.mode
            if mode == "L":
                return GrayImage(np.asarray(im, dtype=np.uint8))
            if mode in ("RGB", "RGBA"):
                rgb = np.asarray(im.convert("RGBA"))[:, :, :3].astype(np.float64)
                luma = 0.299 * rgb[:, :, 0] + 0.587 * rgb[:, :, 1] + 0.114 * rgb[:, :, 2]
                return GrayImage(np.floor(luma + 0.5).astype(np.uint8))
            if mode == "P":
                converted = im.convert("RGB")
                rgb = np.asarray(converted).astype(np.float64)
                luma = 0.299 * rgb[:, :, 0] + 0.587 * rgb[:, :, 1] + 0.114 * rgb[:, :, 2]
                return GrayImage(np.floor(luma + 0.5).astype(np.uint8))
            raise UnsupportedFormatError(f"{path}: unsupported PNG mode {mode}")
    except UnidentifiedImageError as exc:
        raise UnsupportedFormatError(f"{path}: unreadable PNG") from exc
    except OSError as exc:
        raise TruncatedFileError(f"{path}: truncated or corrupt PNG ({exc})") from exc


def save_pgm(path, img) -> None:
    img = img.pixels if isinstance(img, GrayImage) else np.asarray(img, dtype=np.uint8)
    h, w = img.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode())
        f.write(img.astype(np.uint8).tobytes())


# ---------------------------------------------------------------------------
# Segment records
# ---------------------------------------------------------------------------

_HEADER = ["x1", "y1", "x2", "y2", "score"]


def _check_finite(values, line):
    for v in values:
        if not math.isfinite(v):
            raise SegmentFileError(f"non-finite value {v}", line)


def write_segments(path, segments, scores=None) -> None:
    """Write segment records as CSV or JSON-lines, chosen by extension.

    ``segments`` is (n, 4); ``scores`` defaults to zeros.  Values are
    written with six decimal places so write/read round-trips are
    bit-exact.
    """
    path = Path(path)
    segs = np.asarray(segments, dtype=np.float64).reshape(-1, 4)
    if scores is None:
        scores = np.zeros(len(segs))
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    if len(scores) != len(segs):
        raise ValueError("scores length must match segments")
    rows = np.column_stack([segs, scores])
    _check_finite(rows.ravel(), None)
    suffix = path.suffix.lower()
    if suffix == ".csv":
        lines = [",".join(_HEADER)]
        for row in rows:
            lines.append(",".join(f"{v:.6f}" for v in row))
        path.write_text("\n".join(lines) + "\n")
    elif suffix in (".jsonl", ".json"):
        lines = []
        for row in rows:
            rec = {k: float(f"{v:.6f}") for k, v in zip(_HEADER, row)}
            lines.append(json.dumps(rec))
        path.write_text("\n".join(lines) + ("\n" if lines else ""))
    else:
        raise UnsupportedFormatError(f"{path}: use .csv or .jsonl for segments")


def read_segments(path) -> tuple[np.ndarray, np.ndarray]:
    """Read segment records; returns (segments (n, 4), scores (n,)).

    The score column is optional (ground-truth annotations may omit it).
    """
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".csv":
        return _read_csv(path)
    if suffix in (".jsonl", ".json"):
        return _read_jsonl(path)
    raise UnsupportedFormatError(f"{path}: use .csv or .jsonl for segments")


def _read_csv(path: Path) -> tuple[np.ndarray, np.ndarray]:
    lines = path.read_text().splitlines()
    if not lines:
        raise TruncatedFileError(f"{path}: empty segment file (missing header)")
    header = [c.strip() for c in lines[0].split(",")]
    if header not in (_HEADER, _HEADER[:4]):
        raise SegmentFileError(f"bad header {header!r}", 1)
    segs = []
    scores = []
    for ln, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.split(",")
        if len(cells) != len(header):
            raise SegmentFileError(f"expected {len(header)} columns, got {len(cells)}", ln)
        try:
            values = [float(c) for c in cells]
        except ValueError as exc:
            raise SegmentFileError(str(exc), ln) from exc
        _check_finite(values, ln)
        segs.append(values[:4])
        scores.append(values[4] if len(values) > 4 else 0.0)
    return (
        np.asarray(segs, dtype=np.float64).reshape(-1, 4),
        np.asarray(scores, dtype=np.float64),
    )


def _read_jsonl(path: Path) -> tuple[np.ndarray, np.ndarray]:
    segs = []
    scores = []
    for ln, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SegmentFileError(str(exc), ln) from exc
        try:
            values = [float(rec[k]) for k in _HEADER[:4]]
        except (KeyError, TypeError, ValueError) as exc:
            raise SegmentFileError(f"missing/invalid keys in {rec!r}", ln) from exc
        score = float(rec.get("score", 0.0))
        _check_finite(values + [score], ln)
        segs.append(values)
        scores.append(score)
    return (
        np.asarray(segs, dtype=np.float64).reshape(-1, 4),
        np.asarray(scores, dtype=np.float64),
    )


# ---------------------------------------------------------------------------
# Homographies
# ---------------------------------------------------------------------------


def load_homography(path) -> np.ndarray:
    """Read a 3x3 homography from 9 whitespace-separated reals, row-major.

    The matrix is normalized so h[2,2] == 1 when that entry is nonzero;
    singular matrices are rejected.
    """
    path = Path(path)
    try:
        values = [float(t) for t in path.read_text().split()]
    except ValueError as exc:
        raise HomographyFileError(f"{path}: non-numeric token ({exc})") from exc
    if len(values) != 9:
        raise HomographyFileError(f"{path}: expected 9 values, found {len(values)}")
    h = np.array(values, dtype=np.float64).reshape(3, 3)
    if not np.all(np.isfinite(h)):
        raise HomographyFileError(f"{path}: non-finite entries")
    if abs(np.linalg.det(h)) < 1e-12:
        raise HomographyFileError(f"{path}: singular matrix")
    if h[2, 2] != 0:
        h = h / h[2, 2]
    return h


def save_homography(path, h) -> None:
    h = np.asarray(h, dtype=np.float64).reshape(3, 3)
    Path(path).write_text("\n".join(" ".join(f"{v:.12g}" for v in row) for row in h) + "\n")


# ---------------------------------------------------------------------------
# Dataset wiring
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DatasetEntry:
    """One evaluated image with its annotations and optional paired view.

    All referenced files are checked for existence at construction; the
    ground-truth list is loaded eagerly (score column ignored).
    """

    image: Path
    ground_truth: np.ndarray  # (n, 4)
    homography: Path | None = None
    pair_image: Path | None = None

    @classmethod
    def load(cls, image, gt_file=None, homography=None, pair_image=None) -> "DatasetEntry":
        image = Path(image)
        if not image.is_file():
            raise FileNotFoundError(f"image not found: {image}")
        gt = np.zeros((0, 4))
        if gt_file is not None:
            gt_file = Path(gt_file)
            if not gt_file.is_file():
                raise FileNotFoundError(f"ground truth not found: {gt_file}")
            gt, _ = read_segments(gt_file)
        if homography is not None:
            homography = Path(homography)
            if not homography.is_file():
                raise FileNotFoundError(f"homography not found: {homography}")
        if pair_image is not None:
            pair_image = Path(pair_image)
            if not pair_image.is_file():
                raise FileNotFoundError(f"paired image not found: {pair_image}")
        return cls(image=image, ground_truth=gt, homography=homography, pair_image=pair_image)
