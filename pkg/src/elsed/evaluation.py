"""Segment detection evaluation: optimal 1-to-1 matching and metrics.

Detected and ground-truth segments are matched by the Hungarian algorithm
over a structural-distance cost matrix, with infeasible pairs (too little
overlap, too much angular or perpendicular deviation) excluded from
matching.  Precision/recall/IoU are length-based; AP and bounded AP
summarize the score-ranked precision-recall sweep.  Repeatability
compares two views of a scene through a homography.

Segments are (4,) or (n, 4) float arrays of ``x1, y1, x2, y2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

_INFEASIBLE = np.inf
_BIG_M = 1e12


@dataclass(frozen=True)
class MatchGates:
    """Feasibility gates for segment matching."""

    lambda_overlap: float = 0.1  # min interval IoU on the reference line
    lambda_ang: float = 15.0  # max angular distance, degrees
    lambda_dist: float = 2.0 * math.sqrt(2.0)  # max midpoint-to-line distance, px


# Gates used for two-view repeatability.
REPEATABILITY_GATES = MatchGates(lambda_overlap=0.5, lambda_ang=15.0, lambda_dist=5.0)


@dataclass
class MatchResult:
    pairs: list[tuple[int, int, float]]
    unmatched_detected: list[int]
    unmatched_gt: list[int]


@dataclass
class EvalMetrics:
    precision: float
    recall: float
    iou: float
    f_score: float
    ap: float | None = None
    bap: float | None = None
    recall_defined: bool = True

    def as_dict(self) -> dict:
        return {
            "precision": float(self.precision),
            "recall": float(self.recall),
            "iou": float(self.iou),
            "f_score": float(self.f_score),
            "ap": None if self.ap is None else float(self.ap),
            "bap": None if self.bap is None else float(self.bap),
            "recall_defined": bool(self.recall_defined),
        }


def as_segment_array(segs) -> np.ndarray:
    arr = np.asarray(segs, dtype=np.float64)
    if arr.size == 0:
        return arr.reshape(0, 4)
    if arr.ndim == 1:
        arr = arr.reshape(1, 4)
    if arr.shape[1] != 4:
        raise ValueError(f"segments must be (n, 4) [x1 y1 x2 y2], got {arr.shape}")
    return arr


def segment_lengths(segs: np.ndarray) -> np.ndarray:
    segs = as_segment_array(segs)
    return np.hypot(segs[:, 2] - segs[:, 0], segs[:, 3] - segs[:, 1])


def structural_distance(s1, s2) -> float:
    """Pairing-minimized mean of the two endpoint-to-endpoint distances."""
    s1 = np.asarray(s1, dtype=np.float64).reshape(4)
    s2 = np.asarray(s2, dtype=np.float64).reshape(4)
    if segment_lengths(s1)[0] == 0 or segment_lengths(s2)[0] == 0:
        raise ValueError("degenerate segment (zero length)")
    p1, q1 = s1[:2], s1[2:]
    p2, q2 = s2[:2], s2[2:]
    straight = 0.5 * (np.linalg.norm(p1 - p2) + np.linalg.norm(q1 - q2))
    crossed = 0.5 * (np.linalg.norm(p1 - q2) + np.linalg.norm(q1 - p2))
    return float(min(straight, crossed))


def directed_overlap(a, b) -> float:
    """Length of b's orthogonal projection onto a's line, within a's extent.

    Zero when the projected interval misses a entirely (e.g. b is
    perpendicular to a through its midpoint, which projects to a point).
    """
    inter, _ = _projected_intervals(a, b)
    return inter


def directed_union(a, b) -> float:
    """Interval-union analogue of :func:`directed_overlap` on a's line."""
    _, union = _projected_intervals(a, b)
    return union


def _projected_intervals(a, b) -> tuple[float, float]:
    a = np.asarray(a, dtype=np.float64).reshape(4)
    b = np.asarray(b, dtype=np.float64).reshape(4)
    ap, aq = a[:2], a[2:]
    length = float(np.linalg.norm(aq - ap))
    if length == 0:
        raise ValueError("degenerate reference segment")
    u = (aq - ap) / length
    t0 = float(np.dot(b[:2] - ap, u))
    t1 = float(np.dot(b[2:] - ap, u))
    lo, hi = (t0, t1) if t0 <= t1 else (t1, t0)
    inter = max(0.0, min(length, hi) - max(0.0, lo))
    # Measure of the union of the two intervals (disjoint parts add up).
    union = length + (hi - lo) - inter
    return inter, union


def overlap_iou(reference, other) -> float:
    """Interval IoU on the reference segment's supporting line."""
    inter, union = _projected_intervals(reference, other)
    return inter / union if union > 0 else 0.0


def angular_distance_deg(s1, s2) -> float:
    """Angle between segment directions, folded to [0, 90] degrees."""
    s1 = np.asarray(s1, dtype=np.float64).reshape(4)
    s2 = np.asarray(s2, dtype=np.float64).reshape(4)
    d1 = s1[2:] - s1[:2]
    d2 = s2[2:] - s2[:2]
    n1 = np.linalg.norm(d1)
    n2 = np.linalg.norm(d2)
    if n1 == 0 or n2 == 0:
        raise ValueError("degenerate segment")
    cosang = abs(float(np.dot(d1, d2))) / (n1 * n2)
    return math.degrees(math.acos(min(1.0, cosang)))


def midpoint_line_distance(seg, line_seg) -> float:
    """Distance from seg's midpoint to the infinite line through line_seg."""
    seg = np.asarray(seg, dtype=np.float64).reshape(4)
    ls = np.asarray(line_seg, dtype=np.float64).reshape(4)
    mid = 0.5 * (seg[:2] + seg[2:])
    p, q = ls[:2], ls[2:]
    d = q - p
    norm = np.linalg.norm(d)
    if norm == 0:
        raise ValueError("degenerate segment")
    # Cross product magnitude / length = perpendicular distance.
    return float(abs(d[0] * (mid[1] - p[1]) - d[1] * (mid[0] - p[0])) / norm)


def match_cost_matrix(det, gt, gates: MatchGates = MatchGates()) -> np.ndarray:
    """Structural-distance costs with infeasible entries set to inf.

    Feasibility is judged on the ground-truth side: interval IoU on the gt
    line, angular distance, and the detected midpoint's perpendicular
    distance to the gt line.
    """
    det = as_segment_array(det)
    gt = as_segment_array(gt)
    cost = np.full((len(det), len(gt)), _INFEASIBLE, dtype=np.float64)
    for j in range(len(gt)):
        for i in range(len(det)):
            if overlap_iou(gt[j], det[i]) < gates.lambda_overlap:
                continue
            if angular_distance_deg(det[i], gt[j]) > gates.lambda_ang:
                continue
            if midpoint_line_distance(det[i], gt[j]) > gates.lambda_dist:
                continue
            cost[i, j] = structural_distance(det[i], gt[j])
    return cost


def solve_assignment(cost: np.ndarray) -> list[tuple[int, int, float]]:
    """Maximum-cardinality, minimum-cost assignment over feasible entries."""
    if cost.size == 0:
        return []
    finite = np.isfinite(cost)
    if not finite.any():
        return []
    work = np.where(finite, cost, _BIG_M)
    rows, cols = linear_sum_assignment(work)
    return [
        (int(i), int(j), float(cost[i, j])) for i, j in zip(rows, cols) if finite[i, j]
    ]


def match_segments(det, gt, gates: MatchGates = MatchGates()) -> MatchResult:
    """Optimal 1-to-1 matching; infeasible pairs are never matched."""
    det = as_segment_array(det)
    gt = as_segment_array(gt)
    pairs = solve_assignment(match_cost_matrix(det, gt, gates))
    used_d = {i for i, _, _ in pairs}
    used_g = {j for _, j, _ in pairs}
    return MatchResult(
        pairs=pairs,
        unmatched_detected=[i for i in range(len(det)) if i not in used_d],
        unmatched_gt=[j for j in range(len(gt)) if j not in used_g],
    )


def metrics(match: MatchResult, det, gt) -> EvalMetrics:
    """Length-based precision, recall and IoU for a given matching."""
    det = as_segment_array(det)
    gt = as_segment_array(gt)
    det_total = segment_lengths(det).sum()
    gt_total = segment_lengths(gt).sum()

    p_num = 0.0
    r_num = 0.0
    iou_num = 0.0
    iou_den = 0.0
    for i, j, _ in match.pairs:
        p_num += directed_overlap(det[i], gt[j])
        inter, union = _projected_intervals(gt[j], det[i])
        r_num += inter
        iou_num += inter
        iou_den += union

    precision = p_num / det_total if det_total > 0 else 0.0
    recall_defined = gt_total > 0
    recall = r_num / gt_total if recall_defined else 0.0
    iou = iou_num / iou_den if iou_den > 0 else 0.0
    f = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return EvalMetrics(precision, recall, iou, f, recall_defined=recall_defined)


@dataclass
class PRCurve:
    recalls: np.ndarray
    precisions: np.ndarray
    ap: float
    bap: float


def pr_curve(det, scores, gt, gates: MatchGates = MatchGates()) -> PRCurve:
    """Prefix sweep over score-ranked detections.

    AP is the trapezoidal area under P(R) starting from (0, first-point
    precision); bAP divides that area by the maximum recall reached.
    """
    det = as_segment_array(det)
    scores = np.asarray(scores, dtype=np.float64)
    gt = as_segment_array(gt)
    if len(det) == 0 or len(gt) == 0:
        return PRCurve(np.zeros(0), np.zeros(0), 0.0, 0.0)
    order = np.argsort(-scores, kind="stable")
    det = det[order]

    recalls = np.zeros(len(det))
    precisions = np.zeros(len(det))
    for k in range(1, len(det) + 1):
        m = metrics(match_segments(det[:k], gt, gates), det[:k], gt)
        recalls[k - 1] = m.recall
        precisions[k - 1] = m.precision
    ap, bap = _area_under_pr(recalls, precisions)
    return PRCurve(recalls, precisions, ap, bap)


def _area_under_pr(recalls: np.ndarray, precisions: np.ndarray) -> tuple[float, float]:
    if len(recalls) == 0:
        return 0.0, 0.0
    r = np.concatenate([[0.0], recalls])
    p = np.concatenate([[precisions[0]], precisions])
    ap = float(np.trapezoid(p, r)) if hasattr(np, "trapezoid") else float(np.trapz(p, r))
    max_r = float(recalls.max())
    bap = ap / max_r if max_r > 0 else 0.0
    return ap, bap


def project_segment(seg, homography, target_shape) -> np.ndarray | None:
    """Map a segment through a homography and clip it to the target image.

    ``target_shape`` is (height, width); the clip rectangle is
    [0, w-1] x [0, h-1].  Returns None when the segment lands entirely
    outside the target or an endpoint maps to infinity.
    """
    seg = np.asarray(seg, dtype=np.float64).reshape(4)
    h_mat = np.asarray(homography, dtype=np.float64).reshape(3, 3)
    if abs(np.linalg.det(h_mat)) < 1e-12:
        raise ValueError("homography is singular")
    pts = np.array([[seg[0], seg[1], 1.0], [seg[2], seg[3], 1.0]])
    mapped = pts @ h_mat.T
    if np.any(np.abs(mapped[:, 2]) < 1e-12):
        return None
    mapped = mapped[:, :2] / mapped[:, 2:3]
    height, width = target_shape
    clipped = _clip_to_rect(mapped[0], mapped[1], 0.0, float(width - 1), 0.0, float(height - 1))
    if clipped is None:
        return None
    (x1, y1), (x2, y2) = clipped
    if math.hypot(x2 - x1, y2 - y1) < 1e-9:
        return None
    return np.array([x1, y1, x2, y2])


def _clip_to_rect(p0, p1, xmin, xmax, ymin, ymax):
    """Liang-Barsky parametric segment clip against an axis-aligned box."""
    d = p1 - p0
    t0, t1 = 0.0, 1.0
    for coord, lo, hi in ((0, xmin, xmax), (1, ymin, ymax)):
        if d[coord] == 0:
            if p0[coord] < lo or p0[coord] > hi:
                return None
            continue
        ta = (lo - p0[coord]) / d[coord]
        tb = (hi - p0[coord]) / d[coord]
        if ta > tb:
            ta, tb = tb, ta
        t0 = max(t0, ta)
        t1 = min(t1, tb)
        if t0 > t1:
            return None
    return p0 + t0 * d, p0 + t1 * d


@dataclass
class RepeatabilityResult:
    length_repeatability: float
    count_repeatability: float
    valid: bool = True  # False when the views share no region
    matches_a: int = 0
    matches_b: int = 0


def repeatability(
    segs_a,
    segs_b,
    h_ab,
    shape_a,
    shape_b,
    gates: MatchGates = REPEATABILITY_GATES,
) -> RepeatabilityResult:
    """Symmetric two-view repeatability.

    ``h_ab`` maps B-frame coordinates into the A frame.  Each side
    restricts its segments to the region visible in both views, matches
    them 1-to-1 against the other view's projections, and contributes
    (matched overlap length) / (total length of both sets); the two sides
    sum to 1.0 for identical detections under the identity homography.
    The count variant replaces lengths with segment counts.
    """
    segs_a = as_segment_array(segs_a)
    segs_b = as_segment_array(segs_b)
    h_ab = np.asarray(h_ab, dtype=np.float64).reshape(3, 3)
    h_ba = np.linalg.inv(h_ab)

    def shared_view(segs, h_to_other, other_shape, h_back, own_shape):
        out = []
        for s in segs:
            proj = project_segment(s, h_to_other, other_shape)
            if proj is None:
                continue
            back = project_segment(proj, h_back, own_shape)
            if back is not None:
                out.append(back)
        return as_segment_array(np.array(out)) if out else np.zeros((0, 4))

    def projected(segs, h_to_other, other_shape):
        out = []
        for s in segs:
            proj = project_segment(s, h_to_other, other_shape)
            if proj is not None:
                out.append(proj)
        return as_segment_array(np.array(out)) if out else np.zeros((0, 4))

    a_vis = shared_view(segs_a, h_ba, shape_b, h_ab, shape_a)
    b_in_a = projected(segs_b, h_ab, shape_a)
    b_vis = shared_view(segs_b, h_ab, shape_a, h_ba, shape_b)
    a_in_b = projected(segs_a, h_ba, shape_b)

    def side_terms(own, proj):
        if len(own) == 0 or len(proj) == 0:
            return 0.0, 0.0, 0
        match = match_segments(own, proj, gates)
        inter = sum(directed_overlap(own[i], proj[j]) for i, j, _ in match.pairs)
        len_den = segment_lengths(own).sum() + segment_lengths(proj).sum()
        cnt_den = len(own) + len(proj)
        length_term = inter / len_den if len_den > 0 else 0.0
        count_term = len(match.pairs) / cnt_den if cnt_den > 0 else 0.0
        return length_term, count_term, len(match.pairs)

    la, ca, na = side_terms(a_vis, b_in_a)
    lb, cb, nb = side_terms(b_vis, a_in_b)
    total_side_segments = len(a_vis) + len(b_in_a) + len(b_vis) + len(a_in_b)
    valid = total_side_segments > 0 or (len(segs_a) == 0 and len(segs_b) == 0)
    return RepeatabilityResult(
        length_repeatability=la + lb,
        count_repeatability=ca + cb,
        valid=valid,
        matches_a=na,
        matches_b=nb,
    )


# ---------------------------------------------------------------------------
# Dataset-level pooling
# ---------------------------------------------------------------------------


@dataclass
class DatasetEval:
    per_image: dict[str, EvalMetrics] = field(default_factory=dict)
    pooled: EvalMetrics | None = None
    mean: EvalMetrics | None = None


def evaluate_dataset(
    entries, gates: MatchGates = MatchGates(), max_workers: int = 1
) -> DatasetEval:
    """Evaluate (name, det, scores, gt) entries with pooling across images.

    Pooled P/R/IoU sum matched lengths over all images; the pooled PR
    sweep ranks all detections globally by score and re-matches the
    affected image at each prefix step.  Per-image work is pure, so it
    may run on up to ``max_workers`` threads; results are reduced in
    input order either way.
    """
    entries = [
        (name, as_segment_array(det), scores, as_segment_array(gt))
        for name, det, scores, gt in entries
    ]

    def per_image(entry):
        name, det, scores, gt = entry
        match = match_segments(det, gt, gates)
        m = metrics(match, det, gt)
        curve = pr_curve(det, scores, gt, gates)
        m.ap = curve.ap
        m.bap = curve.bap
        return match, m

    if max_workers > 1 and len(entries) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            per_image_results = list(pool.map(per_image, entries))
    else:
        per_image_results = [per_image(e) for e in entries]

    result = DatasetEval()
    sums = {"p_num": 0.0, "r_num": 0.0, "iou_den": 0.0, "det": 0.0, "gt": 0.0}
    per_image_curves = []
    for (name, det, scores, gt), (match, m) in zip(entries, per_image_results):
        result.per_image[name] = m
        per_image_curves.append((name, det, scores, gt))
        for i, j, _ in match.pairs:
            sums["p_num"] += directed_overlap(det[i], gt[j])
            inter, union = _projected_intervals(gt[j], det[i])
            sums["r_num"] += inter
            sums["iou_den"] += union
        sums["det"] += segment_lengths(det).sum()
        sums["gt"] += segment_lengths(gt).sum()

    precision = sums["p_num"] / sums["det"] if sums["det"] > 0 else 0.0
    recall_defined = sums["gt"] > 0
    recall = sums["r_num"] / sums["gt"] if recall_defined else 0.0
    iou = sums["r_num"] / sums["iou_den"] if sums["iou_den"] > 0 else 0.0
    f = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    pooled = EvalMetrics(precision, recall, iou, f, recall_defined=recall_defined)
    pooled.ap, pooled.bap = _pooled_pr(per_image_curves, gates)
    result.pooled = pooled

    if result.per_image:
        ms = list(result.per_image.values())
        result.mean = EvalMetrics(
            precision=float(np.mean([m.precision for m in ms])),
            recall=float(np.mean([m.recall for m in ms])),
            iou=float(np.mean([m.iou for m in ms])),
            f_score=float(np.mean([m.f_score for m in ms])),
            ap=float(np.mean([m.ap for m in ms])),
            bap=float(np.mean([m.bap for m in ms])),
        )
    return result


def _pooled_pr(entries, gates: MatchGates) -> tuple[float, float]:
    """Global score sweep: per-image prefix matching, pooled P/R points."""
    order = []
    for idx, (_, det, scores, _) in enumerate(entries):
        scores = np.asarray(scores, dtype=np.float64)
        for k in np.argsort(-scores, kind="stable"):
            order.append((float(scores[k]), idx, int(k)))
    order.sort(key=lambda t: -t[0])
    if not order:
        return 0.0, 0.0

    gt_total = sum(segment_lengths(gt).sum() for _, _, _, gt in entries)
    det_sorted = [
        as_segment_array(det)[np.argsort(-np.asarray(scores, dtype=np.float64), kind="stable")]
        for _, det, scores, _ in entries
    ]
    taken = [0] * len(entries)
    per_img = [{"p": 0.0, "r": 0.0, "det_len": 0.0} for _ in entries]
    recalls = []
    precisions = []
    for _, idx, _ in order:
        taken[idx] += 1
        det = det_sorted[idx][: taken[idx]]
        gt = entries[idx][3]
        match = match_segments(det, gt, gates)
        p_num = sum(directed_overlap(det[i], as_segment_array(gt)[j]) for i, j, _ in match.pairs)
        r_num = sum(
            _projected_intervals(as_segment_array(gt)[j], det[i])[0] for i, j, _ in match.pairs
        )
        per_img[idx] = {
            "p": p_num,
            "r": r_num,
            "det_len": segment_lengths(det).sum(),
        }
        det_total = sum(d["det_len"] for d in per_img)
        precisions.append(
            sum(d["p"] for d in per_img) / det_total if det_total > 0 else 0.0
        )
        recalls.append(sum(d["r"] for d in per_img) / gt_total if gt_total > 0 else 0.0)
    return _area_under_pr(np.array(recalls), np.array(precisions))
