"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines and measured values.
"""

import itertools
import math
import os
import time
from pathlib import Path

import numpy as np
import pytest

from elsed.anchors import anchor_array
from elsed.detector import ablation_params, detect, segments_to_array
from elsed.eed import DrawState, add_pixel_to_segment, candidates_from_raw, fit_new_segment, run_drawing_pass
from elsed.evaluation import (
    evaluate_dataset,
    match_segments,
    metrics,
    repeatability,
    solve_assignment,
)
from elsed.imgproc import compute_gradient, gaussian_blur
from elsed.params import DetectorParams
from synth import banner, corner, nominal_endpoints, noise_image, scene


def report(criterion: str, ok: bool, detail: str = ""):
    tag = "PASS" if ok else "FAIL"
    print(f"[{tag}] {criterion}: {detail}")
    assert ok, f"{criterion}: {detail}"


def endpoint_error(seg, nominal):
    fwd = max(
        math.hypot(seg.x1 - nominal[0], seg.y1 - nominal[1]),
        math.hypot(seg.x2 - nominal[2], seg.y2 - nominal[3]),
    )
    rev = max(
        math.hypot(seg.x1 - nominal[2], seg.y1 - nominal[3]),
        math.hypot(seg.x2 - nominal[0], seg.y2 - nominal[1]),
    )
    return min(fwd, rev)


def angle_error_deg(seg, angle_deg):
    seg_angle = math.degrees(math.atan2(seg.y2 - seg.y1, seg.x2 - seg.x1)) % 180.0
    diff = abs(seg_angle - angle_deg % 180.0)
    return min(diff, 180.0 - diff)


class TestCriterion1SingleLineRecovery:
    def test_seven_angles(self, warm_detector):
        angles = [0, 15, 30, 45, 60, 75, 90]
        worst_ep = 0.0
        worst_ang = 0.0
        counts = []
        t0 = time.perf_counter()
        results = []
        for ang in angles:
            img = banner(size=(200, 200), center=(100.0, 100.0), angle_deg=ang,
                         length=120.0, contrast=200)
            results.append((ang, detect(img)))
        elapsed = time.perf_counter() - t0
        for ang, segs in results:
            counts.append(len(segs))
            if len(segs) == 1:
                nom = nominal_endpoints((100.0, 100.0), ang, 120.0)
                worst_ep = max(worst_ep, endpoint_error(segs[0], nom))
                worst_ang = max(worst_ang, angle_error_deg(segs[0], ang))
        ok = (
            counts == [1] * 7
            and worst_ep <= 3.0
            and worst_ang <= 2.0
            and elapsed < 1.0
        )
        report(
            "criterion 1 (single-line recovery)",
            ok,
            f"counts={counts} max endpoint err={worst_ep:.2f}px "
            f"max angle err={worst_ang:.3f}deg runtime={elapsed * 1000:.0f}ms",
        )


class TestCriterion2DiscontinuityJumping:
    GAP = 6.0

    def _broken(self):
        return banner(size=(200, 200), length=140.0, gap=self.GAP)

    def test_gap_fixture_has_zero_gradient_interruption(self, warm_detector):
        img = self._broken()
        grad = compute_gradient(gaussian_blur(img))
        mid = grad.g[100, 95:106]
        ok = (mid == 0).any()
        report(
            "criterion 2a (gap fixture)",
            ok,
            f"6px intensity gap; thresholded gradient at the gap center: {grad.g[100, 100]}",
        )

    def test_jump_merges_gap(self, warm_detector):
        img = self._broken()
        no_jumps = detect(img, DetectorParams(jumps_enabled=False))
        jumps = detect(img, DetectorParams(jump_lengths=(5, 7, 9)))
        spanning = (
            len(jumps) == 1
            and min(jumps[0].x1, jumps[0].x2) < 60
            and max(jumps[0].x1, jumps[0].x2) > 140
        )
        ok = len(no_jumps) == 2 and spanning
        report(
            "criterion 2b (gap jumping)",
            ok,
            f"no-jumps -> {len(no_jumps)} segments, jumps(5,7,9) -> {len(jumps)} "
            f"spanning={spanning}",
        )

    def test_perpendicular_corner_rejected(self, warm_detector):
        segs = detect(corner(), DetectorParams())
        horizontal = [s for s in segs if abs(s.y1 - s.y2) < 3]
        vertical = [s for s in segs if abs(s.x1 - s.x2) < 3]
        ok = (
            len(segs) == 2
            and len(horizontal) == 1
            and len(vertical) == 1
            and max(horizontal[0].x1, horizontal[0].x2) <= 103
            and min(vertical[0].y1, vertical[0].y2) >= 97
        )
        report(
            "criterion 2c (perpendicular corner)",
            ok,
            f"{len(segs)} segments; endpoints stop at the corner (no jump through it)",
        )


class TestCriterion3ValidationDiscrimination:
    def brute_force_score(self, cand, grad, t_valid=0.15, margin=2.0):
        # independent per-pixel recount of the inlier-ratio score
        a, b, c = cand.fit.normalized
        ux, uy = -b, a
        ts = [ux * x + uy * y for x, y in cand.pixels]
        tmin, tmax = min(ts), max(ts)
        intervals = []
        for (jx0, jy0), (jx1, jy1) in cand.jumps:
            t0 = ux * jx0 + uy * jy0
            t1 = ux * jx1 + uy * jy1
            intervals.append((min(t0, t1), max(t0, t1)))
        good = 0
        usable = 0
        for (x, y), t in zip(cand.pixels, ts):
            if t < tmin + margin or t > tmax - margin:
                continue
            if any(lo <= t <= hi for lo, hi in intervals):
                continue
            gx, gy = float(grad.gx[y, x]), float(grad.gy[y, x])
            norm = math.hypot(gx, gy)
            if norm == 0:
                continue
            err = math.acos(min(1.0, abs(gx * a + gy * b) / norm))
            usable += 1
            if err < t_valid:
                good += 1
        return good / usable if usable else 0.0

    def test_noise_rejection_rate(self, warm_detector):
        params_off = DetectorParams(segment_validation_enabled=False)
        total_candidates = 0
        rejected = 0
        agreement = True
        for seed in range(20):
            img = noise_image(size=(240, 320), seed=seed)
            blurred = gaussian_blur(img, params_off.blur_kernel, params_off.blur_sigma)
            grad = compute_gradient(blurred, params_off.t_grad)
            anchors = anchor_array(grad, params_off.t_anchor, params_off.scan_interval)
            state = DrawState.for_shape(240, 320)
            raw = run_drawing_pass(grad, anchors, state, params_off)
            cands = candidates_from_raw(raw)
            total_candidates += len(cands)
            for cand in cands:
                oracle = self.brute_force_score(cand, grad)
                if oracle < 0.5:
                    rejected += 1
                from elsed.validate import validate_segment

                impl = validate_segment(cand, grad)
                if abs(impl.score - oracle) > 1e-9:
                    agreement = False
        mean_candidates = total_candidates / 20.0
        rate = rejected / total_candidates if total_candidates else 0.0
        ok = mean_candidates >= 1.0 and rate >= 0.8 and agreement
        report(
            "criterion 3 (noise validation)",
            ok,
            f"mean candidates/image={mean_candidates:.1f} rejected={rate:.1%} "
            f"oracle/implementation agree={agreement}",
        )


class TestCriterion4LineFitOracle:
    def test_incremental_and_closed_form(self):
        rng = np.random.default_rng(123)
        # everything becomes an inlier so all pixels flow through the
        # incremental accumulators
        params = DetectorParams(t_px_to_seg_dist=1e9, t_line_fit_err=1e9)
        worst_residual_gap = 0.0
        exact = True
        checked = 0
        for _ in range(1000):
            n = int(rng.integers(15, 61))
            x0 = int(rng.integers(-50, 400))
            y0 = int(rng.integers(-50, 400))
            slope = float(rng.uniform(-0.9, 0.9))
            xs = x0 + np.arange(n)
            ys = np.round(y0 + slope * (xs - x0) + rng.normal(0, 0.6, n)).astype(np.int64)
            pts = np.stack([xs, ys], axis=1)

            cand = fit_new_segment(pts[:15], params)
            for p in pts[15:]:
                add_pixel_to_segment(cand, tuple(p), params)
            f = cand.fit
            batch = (
                len(pts),
                int(pts[:, 0].sum()),
                int(pts[:, 1].sum()),
                int((pts[:, 0].astype(object) ** 2).sum()),
                int((pts[:, 1].astype(object) ** 2).sum()),
                int((pts[:, 0] * pts[:, 1]).sum()),
            )
            if (f.n, f.sum_x, f.sum_y, f.sum_xx, f.sum_yy, f.sum_xy) != batch:
                exact = False

            # oracle: normal-equations solve for the same fit axis
            fx = pts[:, 0].astype(float)
            fy = pts[:, 1].astype(float)
            if f.axis == 1:  # vertical fit regresses x on y
                fx, fy = fy, fx
            a_mat = np.array([[np.sum(fx * fx), np.sum(fx)], [np.sum(fx), len(fx)]])
            rhs = np.array([np.sum(fx * fy), np.sum(fy)])
            m, b = np.linalg.solve(a_mat, rhs)
            oracle_mse = float(np.mean((m * fx + b - fy) ** 2))
            worst_residual_gap = max(worst_residual_gap, abs(f.fit_error - oracle_mse))
            checked += 1
        ok = exact and worst_residual_gap <= 1e-9 and checked == 1000
        report(
            "criterion 4 (line-fit oracle)",
            ok,
            f"chains={checked} accumulators exact={exact} "
            f"max |mse - normal equations| = {worst_residual_gap:.2e}",
        )


class TestCriterion5HungarianOptimality:
    @staticmethod
    def brute_force(cost):
        n, m = cost.shape
        for k in range(min(n, m), -1, -1):
            best = None
            for rows in itertools.combinations(range(n), k):
                for cols in itertools.permutations(range(m), k):
                    total = 0.0
                    feasible = True
                    for i, j in zip(rows, cols):
                        if not np.isfinite(cost[i, j]):
                            feasible = False
                            break
                        total += cost[i, j]
                    if feasible and (best is None or total < best):
                        best = total
            if best is not None:
                return k, best
        return 0, 0.0

    def test_500_random_gated_matrices(self):
        rng = np.random.default_rng(77)
        mismatches = 0
        for _ in range(500):
            n = int(rng.integers(1, 8))
            m = int(rng.integers(1, 8))
            cost = rng.uniform(0, 30, (n, m))
            cost[rng.uniform(size=(n, m)) < rng.uniform(0.1, 0.6)] = np.inf
            pairs = solve_assignment(cost)
            total = sum(c for _, _, c in pairs)
            k_oracle, cost_oracle = self.brute_force(cost)
            if len(pairs) != k_oracle or abs(total - cost_oracle) > 1e-9:
                mismatches += 1
        report(
            "criterion 5 (assignment optimality)",
            mismatches == 0,
            f"500 matrices up to 7x7, mismatches={mismatches}",
        )


class TestCriterion6MetricIdentities:
    def test_identities(self):
        segs = np.array([[0, 0, 37, 0], [5, 5, 5, 45], [20, 10, 50, 40]], float)
        m_eq = metrics(match_segments(segs, segs), segs, segs)
        curve_eq = evaluate_dataset([("i", segs, [3.0, 2.0, 1.0], segs)]).pooled
        perfect = all(
            abs(v - 1.0) < 1e-12
            for v in (m_eq.precision, m_eq.recall, m_eq.iou, m_eq.f_score,
                      curve_eq.ap, curve_eq.bap)
        )
        empty = evaluate_dataset([("i", np.zeros((0, 4)), [], segs)]).pooled
        all_zero = (
            empty.precision == 0.0
            and empty.recall == 0.0
            and empty.iou == 0.0
            and empty.f_score == 0.0
            and empty.ap == 0.0
            and empty.bap == 0.0
        )
        gt = np.array([[0, 0, 20, 0]], float)
        det = np.array([[0, 0, 10, 0]], float)
        m_half = metrics(match_segments(det, gt), det, gt)
        half_ok = abs(m_half.recall - 0.5) <= 1e-9
        ok = perfect and all_zero and half_ok
        report(
            "criterion 6 (metric identities)",
            ok,
            f"det==gt all ones={perfect}, empty all zeros={all_zero}, "
            f"half coverage R={m_half.recall:.12f}",
        )


class TestCriterion7RepeatabilityIdentities:
    def test_identity(self, warm_detector):
        img = banner(angle_deg=20.0)
        segs = segments_to_array(detect(img))
        rep = repeatability(segs, segs, np.eye(3), img.shape, img.shape)
        ok = abs(rep.length_repeatability - 1.0) <= 1e-9
        report(
            "criterion 7a (identity repeatability)",
            ok,
            f"length repeatability = {rep.length_repeatability:.12f}",
        )

    def test_translation_warp(self, warm_detector):
        shift = 10.0
        size = (240, 240)
        layout = [((90.0, 70.0), 0.0), ((150.0, 150.0), 90.0), ((100.0, 170.0), 30.0)]

        def render(dx):
            img = np.full(size, 20, dtype=np.uint8)
            for center, ang in layout:
                piece = banner(size=size, center=(center[0] + dx, center[1]),
                               angle_deg=ang, length=90.0)
                img = np.maximum(img, piece)
            return img

        img_a = render(0.0)
        img_b = render(shift)
        segs_a = segments_to_array(detect(img_a))
        segs_b = segments_to_array(detect(img_b))
        # b content sits +shift in x relative to a: map B pixels to A
        h_ab = np.array([[1, 0, -shift], [0, 1, 0], [0, 0, 1]], float)
        rep = repeatability(segs_a, segs_b, h_ab, size, size)
        ok = rep.length_repeatability >= 0.9
        report(
            "criterion 7b (translation repeatability)",
            ok,
            f"10px shift, {len(segs_a)}/{len(segs_b)} segments, "
            f"length repeatability = {rep.length_repeatability:.3f}",
        )


class TestCriterion8Performance:
    def test_throughput_and_ablation_ordering(self, warm_detector):
        img = scene(size=(480, 640), seed=7)
        full = DetectorParams()
        bare = ablation_params("none", jump_validation=False, segment_validation=False)
        # warm both configurations
        detect(img, full)
        detect(img, bare)

        def once(params):
            t0 = time.perf_counter()
            detect(img, params)
            return (time.perf_counter() - t0) * 1000.0

        # interleave the two configurations so clock-frequency drift hits
        # both equally; compare the median of the paired differences
        pairs = [(once(full), once(bare)) for _ in range(21)]
        full_ms = float(np.mean([p[0] for p in pairs]))
        bare_ms = float(np.mean([p[1] for p in pairs]))
        median_gap = float(np.median([f - b for f, b in pairs]))
        ok = full_ms <= 50.0 and median_gap > 0.0
        report(
            "criterion 8 (throughput)",
            ok,
            f"640x480 full config {full_ms:.2f}ms (budget 50ms); "
            f"no-jump/no-validation {bare_ms:.2f}ms, median paired gap "
            f"{median_gap:+.2f}ms (must stay faster)",
        )


class TestCriterion9OptionalDataset:
    def test_user_supplied_benchmark(self, warm_detector):
        """Environment-dependent check against a user-supplied dataset.

        Expects ELSED_YUD_DIR to contain images/ (.pgm or .png) and gt/
        (segment CSVs with matching stems).  Not CI-gating: skipped when
        the variable is unset.
        """
        root = os.environ.get("ELSED_YUD_DIR")
        if not root:
            pytest.skip(
                "ELSED_YUD_DIR not set: dataset-scale check is documented as "
                "environment-dependent and requires user-supplied data"
            )
        root = Path(root)
        from elsed.segio import load_image, read_segments

        entries = []
        for img_path in sorted((root / "images").iterdir()):
            gt_path = root / "gt" / f"{img_path.stem}.csv"
            if not gt_path.exists():
                continue
            segs = detect(load_image(img_path))
            gt, _ = read_segments(gt_path)
            entries.append(
                (img_path.stem, segments_to_array(segs), [s.score for s in segs], gt)
            )
        assert entries, "no image/gt pairs found under ELSED_YUD_DIR"
        pooled = evaluate_dataset(entries).pooled
        ok = abs(pooled.precision - 0.32) <= 0.05 and abs(pooled.recall - 0.66) <= 0.07
        report(
            "criterion 9 (dataset check)",
            ok,
            f"last-PR-point P={pooled.precision:.3f} (target 0.32+-0.05) "
            f"R={pooled.recall:.3f} (target 0.66+-0.07)",
        )
