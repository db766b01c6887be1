"""Command-line interface: detect, eval, repeatability, ablate, bench.

Data goes to files or stdout; diagnostics go to stderr.  Exit code 0
means no fatal error.  ``ELSED_THREADS`` caps the per-image parallelism
of ``eval`` and ``repeatability``.
"""

from __future__ import annotations

import argparse
import json
import os
import statistics
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .detector import ABLATION_GRID, ablation_params, detect, run_pipeline, segments_to_array
from .evaluation import MatchGates, REPEATABILITY_GATES, evaluate_dataset, repeatability
from .params import DetectorParams
from .segio import (
    DatasetEntry,
    SegmentIOError,
    load_homography,
    load_image,
    read_segments,
    write_segments,
)

_STAGES = ("blur", "gradient", "anchors", "drawing", "validation", "total")


def _params_from_args(args) -> DetectorParams:
    overrides = {}
    for name in (
        "blur_kernel",
        "blur_sigma",
        "t_grad",
        "t_anchor",
        "scan_interval",
        "t_ol",
        "t_min_length",
        "t_line_fit_err",
        "t_px_to_seg_dist",
        "t_eigen_ext",
        "t_angle_ext",
        "t_valid",
    ):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    if getattr(args, "jump_lengths", None):
        overrides["jump_lengths"] = tuple(
            int(j) for j in str(args.jump_lengths).split(",") if j.strip()
        )
    if getattr(args, "no_jumps", False):
        overrides["jumps_enabled"] = False
    if getattr(args, "no_jump_validation", False):
        overrides["jump_validation_enabled"] = False
    if getattr(args, "no_validation", False):
        overrides["segment_validation_enabled"] = False
    return DetectorParams(**overrides)


def _add_param_flags(sub):
    sub.add_argument("--blur-kernel", dest="blur_kernel", type=int)
    sub.add_argument("--blur-sigma", dest="blur_sigma", type=float)
    sub.add_argument("--t-grad", dest="t_grad", type=float)
    sub.add_argument("--t-anchor", dest="t_anchor", type=float)
    sub.add_argument("--scan-interval", dest="scan_interval", type=int)
    sub.add_argument("--t-ol", dest="t_ol", type=int)
    sub.add_argument("--t-min-length", dest="t_min_length", type=int)
    sub.add_argument("--t-line-fit-err", dest="t_line_fit_err", type=float)
    sub.add_argument("--t-px-to-seg-dist", dest="t_px_to_seg_dist", type=float)
    sub.add_argument("--t-eigen-ext", dest="t_eigen_ext", type=float)
    sub.add_argument("--t-angle-ext", dest="t_angle_ext", type=float)
    sub.add_argument("--t-valid", dest="t_valid", type=float)
    sub.add_argument("--jump-lengths", dest="jump_lengths", type=str, metavar="5,7,9")
    sub.add_argument("--no-jumps", dest="no_jumps", action="store_true")
    sub.add_argument("--no-jump-validation", dest="no_jump_validation", action="store_true")
    sub.add_argument("--no-validation", dest="no_validation", action="store_true")


def _thread_count() -> int:
    value = os.environ.get("ELSED_THREADS", "1")
    try:
        return max(1, int(value))
    except ValueError:
        print(f"warning: ignoring non-integer ELSED_THREADS={value!r}", file=sys.stderr)
        return 1


_PALETTE = [
    (230, 25, 75), (60, 180, 75), (255, 225, 25), (0, 130, 200), (245, 130, 48),
    (145, 30, 180), (70, 240, 240), (240, 50, 230), (210, 245, 60), (250, 190, 212),
    (0, 128, 128), (220, 190, 255), (170, 110, 40), (128, 0, 0), (170, 255, 195),
]


def _write_overlay(path, img, segments) -> None:
    from PIL import Image, ImageDraw

    rgb = Image.fromarray(img.pixels).convert("RGB")
    draw = ImageDraw.Draw(rgb)
    for k, seg in enumerate(segments):
        color = _PALETTE[k % len(_PALETTE)]
        draw.line([(seg.x1, seg.y1), (seg.x2, seg.y2)], fill=color, width=2)
    rgb.save(path, format="PNG")


def cmd_detect(args) -> int:
    params = _params_from_args(args)
    img = load_image(args.image)
    segments = detect(img, params)
    write_segments(
        args.output,
        segments_to_array(segments),
        np.array([s.score for s in segments]),
    )
    if args.overlay:
        _write_overlay(args.overlay, img, segments)
    print(f"{len(segments)} segments -> {args.output}", file=sys.stderr)
    return 0


def _stems(directory: Path) -> dict[str, Path]:
    out = {}
    for p in sorted(directory.iterdir()):
        if p.suffix.lower() in (".csv", ".jsonl", ".json"):
            out[p.stem] = p
    return out


def _fmt_metrics(m) -> str:
    ap = f"{m.ap:6.4f}" if m.ap is not None else "   -  "
    bap = f"{m.bap:6.4f}" if m.bap is not None else "   -  "
    return (
        f"P={m.precision:6.4f} R={m.recall:6.4f} IoU={m.iou:6.4f} "
        f"F={m.f_score:6.4f} AP={ap} bAP={bap}"
    )


def cmd_eval(args) -> int:
    det_dir = Path(args.det_dir)
    gt_dir = Path(args.gt_dir)
    gates = MatchGates(
        lambda_overlap=args.lambda_overlap,
        lambda_ang=args.lambda_ang,
        lambda_dist=args.lambda_dist,
    )
    det_files = _stems(det_dir)
    gt_files = _stems(gt_dir)
    shared = sorted(set(det_files) & set(gt_files))
    for stem in sorted(set(det_files) ^ set(gt_files)):
        side = "detections" if stem in det_files else "ground truth"
        print(f"warning: {stem} present only in {side}; skipped", file=sys.stderr)
    if not shared:
        print("error: no matching filename stems between directories", file=sys.stderr)
        return 1

    def load_entry(stem):
        det, scores = read_segments(det_files[stem])
        gt, _ = read_segments(gt_files[stem])
        return stem, det, scores, gt

    threads = _thread_count()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            entries = list(pool.map(load_entry, shared))
    else:
        entries = [load_entry(s) for s in shared]

    result = evaluate_dataset(entries, gates, max_workers=threads)
    for name in shared:
        print(f"{name:24s} {_fmt_metrics(result.per_image[name])}")
    print(f"{'[pooled]':24s} {_fmt_metrics(result.pooled)}")
    print(f"{'[per-image mean]':24s} {_fmt_metrics(result.mean)}")
    if args.json:
        payload = {
            "per_image": {k: m.as_dict() for k, m in result.per_image.items()},
            "pooled": result.pooled.as_dict(),
            "per_image_mean": result.mean.as_dict(),
            "gates": {
                "lambda_overlap": gates.lambda_overlap,
                "lambda_ang": gates.lambda_ang,
                "lambda_dist": gates.lambda_dist,
            },
        }
        Path(args.json).write_text(json.dumps(payload, indent=2) + "\n")
    return 0


def cmd_repeatability(args) -> int:
    manifest = Path(args.manifest)
    params = _params_from_args(args)
    rows = []
    for ln, line in enumerate(manifest.read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        cells = [c.strip() for c in line.split(",")]
        if cells[:3] == ["img_a", "img_b", "homography"]:
            continue
        if len(cells) != 3:
            print(f"warning: manifest line {ln} needs 3 columns; skipped", file=sys.stderr)
            continue
        rows.append((ln, *cells))

    base = manifest.parent

    def process(row):
        ln, img_a, img_b, h_path = row
        try:
            h = load_homography(base / h_path)
        except (OSError, SegmentIOError) as exc:
            return ln, None, f"homography unavailable ({exc})"
        try:
            entry = DatasetEntry.load(base / img_a, pair_image=base / img_b)
            a = load_image(entry.image)
            b = load_image(entry.pair_image)
        except (OSError, SegmentIOError) as exc:
            return ln, None, f"image unavailable ({exc})"
        segs_a = segments_to_array(detect(a, params))
        segs_b = segments_to_array(detect(b, params))
        rep = repeatability(
            segs_a, segs_b, h, a.pixels.shape, b.pixels.shape, REPEATABILITY_GATES
        )
        return ln, (img_a, img_b, rep), None

    threads = _thread_count()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(process, rows))
    else:
        results = [process(r) for r in rows]

    lengths = []
    counts = []
    for ln, payload, err in results:
        if err is not None:
            print(f"warning: line {ln} skipped: {err}", file=sys.stderr)
            continue
        img_a, img_b, rep = payload
        flag = "" if rep.valid else " (no shared view)"
        print(
            f"{img_a} <-> {img_b}: length={rep.length_repeatability:.4f} "
            f"count={rep.count_repeatability:.4f}{flag}"
        )
        lengths.append(rep.length_repeatability)
        counts.append(rep.count_repeatability)
    if lengths:
        print(
            f"[mean] length={statistics.mean(lengths):.4f} count={statistics.mean(counts):.4f}"
        )
    else:
        print("error: no evaluable pairs", file=sys.stderr)
        return 1
    return 0


def cmd_ablate(args) -> int:
    img = load_image(args.image)
    print(f"{'jumps':10s} {'jump val':8s} {'seg val':8s} {'segments':>8s} {'ms':>9s}")
    for jumps, jv, sv in ABLATION_GRID:
        params = ablation_params(jumps, jv, sv)
        detect(img, params)  # warm cache/jit before timing
        t0 = time.perf_counter()
        for _ in range(args.repetitions):
            segments = detect(img, params)
        dt = (time.perf_counter() - t0) / args.repetitions * 1000.0
        print(
            f"{jumps:10s} {'yes' if jv else 'no':8s} {'yes' if sv else 'no':8s} "
            f"{len(segments):8d} {dt:9.2f}"
        )
    return 0


def cmd_bench(args) -> int:
    image_dir = Path(args.image_dir)
    paths = sorted(
        p for p in image_dir.iterdir() if p.suffix.lower() in (".pgm", ".png")
    )
    if not paths:
        print(f"error: no .pgm/.png images in {image_dir}", file=sys.stderr)
        return 1
    params = _params_from_args(args)
    images = [load_image(p) for p in paths]
    per_stage = {s: [] for s in _STAGES}
    for img in images:
        for _ in range(args.warmup):
            run_pipeline(img, params)
        for _ in range(args.repetitions):
            _, timings = run_pipeline(img, params)
            for s in _STAGES:
                per_stage[s].append(timings[s] * 1000.0)
    print(f"{len(images)} images x {args.repetitions} repetitions (ms per run)")
    for s in _STAGES:
        vals = per_stage[s]
        mean = statistics.mean(vals)
        std = statistics.stdev(vals) if len(vals) > 1 else 0.0
        print(f"  {s:10s} {mean:8.3f} (+-{std:.3f})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="elsed", description="Line segment detection and evaluation"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", help="detect segments in one image")
    p.add_argument("image")
    p.add_argument("output", help="segment file (.csv or .jsonl)")
    p.add_argument("--overlay", help="write a PNG with segments drawn over the image")
    _add_param_flags(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("eval", help="score detections against ground truth")
    p.add_argument("det_dir", help="directory of detection files")
    p.add_argument("gt_dir", help="directory of ground-truth files (matching stems)")
    p.add_argument("--json", help="also write a JSON report to this path")
    p.add_argument("--lambda-overlap", type=float, default=MatchGates().lambda_overlap)
    p.add_argument("--lambda-ang", type=float, default=MatchGates().lambda_ang)
    p.add_argument("--lambda-dist", type=float, default=MatchGates().lambda_dist)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser(
        "repeatability", help="two-view repeatability from an image-pair manifest"
    )
    p.add_argument(
        "manifest",
        help="CSV with rows img_a,img_b,homography (homography maps B pixels to A)",
    )
    _add_param_flags(p)
    p.set_defaults(func=cmd_repeatability)

    p = sub.add_parser("ablate", help="run the standard ablation grid on one image")
    p.add_argument("image")
    p.add_argument("--repetitions", type=int, default=5)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("bench", help="per-stage timing over an image directory")
    p.add_argument("image_dir")
    p.add_argument("--repetitions", type=int, default=50)
    p.add_argument("--warmup", type=int, default=3)
    _add_param_flags(p)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (SegmentIOError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
