import itertools
import math

import numpy as np
import pytest

from elsed.evaluation import (
    MatchGates,
    REPEATABILITY_GATES,
    angular_distance_deg,
    directed_overlap,
    evaluate_dataset,
    match_cost_matrix,
    match_segments,
    metrics,
    midpoint_line_distance,
    overlap_iou,
    pr_curve,
    project_segment,
    repeatability,
    solve_assignment,
    structural_distance,
)


def brute_force_assignment(cost: np.ndarray):
    """Exhaustive (max-cardinality, min-cost) matching over feasible entries."""
    n, m = cost.shape
    best = (0, 0.0, [])
    rows = list(range(n))
    for k in range(min(n, m), -1, -1):
        found_any = False
        best_cost = math.inf
        best_pairs = []
        for row_subset in itertools.combinations(rows, k):
            for col_perm in itertools.permutations(range(m), k):
                total = 0.0
                ok = True
                for i, j in zip(row_subset, col_perm):
                    c = cost[i, j]
                    if not np.isfinite(c):
                        ok = False
                        break
                    total += c
                if ok:
                    found_any = True
                    if total < best_cost:
                        best_cost = total
                        best_pairs = list(zip(row_subset, col_perm))
        if found_any:
            return k, best_cost, best_pairs
    return best


class TestStructuralDistance:
    def test_identical_zero(self):
        s = [1, 2, 9, 4]
        assert structural_distance(s, s) == 0.0

    def test_rigid_translation(self):
        s1 = [0, 0, 10, 0]
        s2 = [3, 4, 13, 4]
        assert structural_distance(s1, s2) == pytest.approx(5.0)

    def test_worked_example(self):
        s1 = [0, 0, 10, 0]
        s2 = [0, 2, 10, 4]
        assert structural_distance(s1, s2) == pytest.approx(3.0)

    def test_symmetry_and_orientation_invariance(self):
        rng = np.random.default_rng(8)
        for _ in range(100):
            s1, s2 = rng.uniform(0, 50, 4), rng.uniform(0, 50, 4)
            if np.allclose(s1[:2], s1[2:]) or np.allclose(s2[:2], s2[2:]):
                continue
            d12 = structural_distance(s1, s2)
            d21 = structural_distance(s2, s1)
            swapped = structural_distance(s1, np.r_[s2[2:], s2[:2]])
            assert d12 == pytest.approx(d21)
            assert d12 == pytest.approx(swapped)
            assert d12 >= 0
            # zero only when the endpoint sets coincide
            same = {tuple(np.round(s1[:2], 9)), tuple(np.round(s1[2:], 9))} == {
                tuple(np.round(s2[:2], 9)),
                tuple(np.round(s2[2:], 9)),
            }
            assert (d12 == 0) == same

    def test_degenerate_rejected(self):
        with pytest.raises(ValueError):
            structural_distance([0, 0, 0, 0], [0, 0, 1, 1])


class TestDirectedOverlap:
    def test_self_overlap_is_length(self):
        assert directed_overlap([0, 0, 10, 0], [0, 0, 10, 0]) == pytest.approx(10.0)

    def test_perpendicular_through_midpoint_zero(self):
        assert directed_overlap([0, 0, 10, 0], [5, -3, 5, 3]) == pytest.approx(0.0)

    def test_offset_parallel_interval(self):
        assert directed_overlap([0, 0, 10, 0], [4, 1, 14, 1]) == pytest.approx(6.0)

    def test_union_of_disjoint_projections(self):
        # projected interval [12, 20] is disjoint from [0, 10]
        from elsed.evaluation import directed_union

        assert directed_union([0, 0, 10, 0], [12, 0, 20, 0]) == pytest.approx(18.0)


class TestMatchSegments:
    def test_identity_match(self):
        segs = np.array([[0, 0, 10, 0], [5, 5, 5, 25], [30, 7, 50, 9]], float)
        res = match_segments(segs, segs)
        assert sorted((i, j) for i, j, _ in res.pairs) == [(0, 0), (1, 1), (2, 2)]
        assert sum(c for _, _, c in res.pairs) == 0.0
        assert res.unmatched_detected == [] and res.unmatched_gt == []

    def test_structural_distance_picks_closer_candidate(self):
        # Cost is endpoint-based, so the geometrically closer candidate
        # wins even when another overlaps equally along the line.
        gt = np.array([[0, 0, 30, 0]], float)
        det = np.array([[0, 2.0, 30, 2.0], [0, 0.5, 30, 0.5]], float)
        res = match_segments(det, gt)
        assert [(i, j) for i, j, _ in res.pairs] == [(1, 0)]

    def test_gates_forbid_matches(self):
        gt = np.array([[0, 0, 30, 0]], float)
        too_far = np.array([[0, 5, 30, 5]], float)  # perpendicular gate
        assert match_segments(too_far, gt).pairs == []
        tilted = np.array([[0, -10, 30, 10]], float)  # angular gate
        assert match_segments(tilted, gt).pairs == []
        disjoint = np.array([[40, 0, 70, 0]], float)  # overlap gate
        assert match_segments(disjoint, gt).pairs == []

    def test_empty_inputs(self):
        res = match_segments(np.zeros((0, 4)), np.zeros((0, 4)))
        assert res.pairs == [] and res.unmatched_detected == [] and res.unmatched_gt == []

    def test_assignment_matches_brute_force(self):
        rng = np.random.default_rng(17)
        for _ in range(200):
            n = int(rng.integers(1, 6))
            m = int(rng.integers(1, 6))
            cost = rng.uniform(0, 20, (n, m))
            cost[rng.uniform(size=(n, m)) < 0.3] = np.inf
            pairs = solve_assignment(cost)
            total = sum(c for _, _, c in pairs)
            k_b, cost_b, _ = brute_force_assignment(cost)
            assert len(pairs) == k_b
            assert total == pytest.approx(cost_b, abs=1e-9)

    def test_gate_feasibility_is_pairwise(self):
        rng = np.random.default_rng(23)
        gt = rng.uniform(10, 50, (4, 4))
        det = rng.uniform(10, 50, (5, 4))
        gates = MatchGates()
        cost = match_cost_matrix(det, gt, gates)
        for i in range(len(det)):
            for j in range(len(gt)):
                feasible = (
                    overlap_iou(gt[j], det[i]) >= gates.lambda_overlap
                    and angular_distance_deg(det[i], gt[j]) <= gates.lambda_ang
                    and midpoint_line_distance(det[i], gt[j]) <= gates.lambda_dist
                )
                assert np.isfinite(cost[i, j]) == feasible


class TestMetrics:
    def test_perfect_detection(self):
        segs = np.array([[0, 0, 10, 0], [5, 5, 5, 25]], float)
        m = metrics(match_segments(segs, segs), segs, segs)
        assert m.precision == pytest.approx(1.0)
        assert m.recall == pytest.approx(1.0)
        assert m.iou == pytest.approx(1.0)
        assert m.f_score == pytest.approx(1.0)

    def test_half_coverage(self):
        gt = np.array([[0, 0, 20, 0]], float)
        det = np.array([[0, 0, 10, 0]], float)
        m = metrics(match_segments(det, gt), det, gt)
        assert m.precision == pytest.approx(1.0)
        assert m.recall == pytest.approx(0.5, abs=1e-9)

    def test_no_matches(self):
        gt = np.array([[0, 0, 20, 0]], float)
        det = np.array([[0, 50, 20, 50]], float)
        m = metrics(match_segments(det, gt), det, gt)
        assert (m.precision, m.recall, m.iou, m.f_score) == (0.0, 0.0, 0.0, 0.0)

    def test_empty_gt_flagged(self):
        det = np.array([[0, 0, 20, 0]], float)
        m = metrics(match_segments(det, np.zeros((0, 4))), det, np.zeros((0, 4)))
        assert m.recall == 0.0
        assert not m.recall_defined

    def test_ranges(self):
        rng = np.random.default_rng(31)
        for _ in range(50):
            det = rng.uniform(0, 60, (int(rng.integers(1, 8)), 4))
            gt = rng.uniform(0, 60, (int(rng.integers(1, 8)), 4))
            m = metrics(match_segments(det, gt), det, gt)
            for v in (m.precision, m.recall, m.iou):
                assert 0.0 <= v <= 1.0 + 1e-12

    def test_pair_iou_bounded_by_coverage(self):
        # per matched pair the interval IoU can never exceed the coverage
        # of either side (the union contains both intervals)
        from elsed.evaluation import _projected_intervals, segment_lengths

        rng = np.random.default_rng(33)
        for _ in range(50):
            det = rng.uniform(0, 60, (int(rng.integers(1, 6)), 4))
            gt = rng.uniform(0, 60, (int(rng.integers(1, 6)), 4))
            for i, j, _ in match_segments(det, gt).pairs:
                inter, union = _projected_intervals(gt[j], det[i])
                gt_len = segment_lengths(gt[j])[0]
                assert inter / union <= inter / gt_len + 1e-12


class TestPRCurve:
    def test_perfect_detector(self):
        segs = np.array([[0, 0, 10, 0], [5, 5, 5, 25], [30, 7, 50, 7]], float)
        curve = pr_curve(segs, [0.9, 0.8, 0.7], segs)
        assert curve.ap == pytest.approx(1.0)
        assert curve.bap == pytest.approx(1.0)

    def test_longest_half_detector(self):
        gt = np.array([[0, 0, 40, 0], [0, 10, 30, 10], [0, 20, 20, 20], [0, 30, 10, 30]], float)
        det = gt[:2]
        curve = pr_curve(det, [2.0, 1.0], gt)
        assert np.allclose(curve.precisions, 1.0)
        assert curve.bap == pytest.approx(1.0)
        assert curve.ap == pytest.approx(curve.recalls.max())
        assert curve.ap == pytest.approx(70.0 / 100.0)

    def test_empty_detections(self):
        curve = pr_curve(np.zeros((0, 4)), [], np.array([[0, 0, 10, 0]], float))
        assert curve.ap == 0.0 and curve.bap == 0.0


class TestProjectSegment:
    def test_identity(self):
        seg = [3, 4, 20, 30]
        out = project_segment(seg, np.eye(3), (64, 64))
        assert out == pytest.approx(seg)

    def test_translation_with_clipping(self):
        h = np.array([[1, 0, 5], [0, 1, 0], [0, 0, 1]], float)
        out = project_segment([0, 0, 10, 0], h, (12, 12))
        assert out == pytest.approx([5, 0, 11, 0])

    def test_fully_outside(self):
        h = np.array([[1, 0, 500], [0, 1, 0], [0, 0, 1]], float)
        assert project_segment([0, 0, 10, 0], h, (12, 12)) is None

    def test_scale(self):
        h = np.diag([2.0, 2.0, 1.0])
        out = project_segment([1, 1, 5, 5], h, (64, 64))
        assert out == pytest.approx([2, 2, 10, 10])

    def test_singular_rejected(self):
        with pytest.raises(ValueError):
            project_segment([0, 0, 10, 0], np.zeros((3, 3)), (12, 12))


class TestRepeatability:
    def test_identity_is_one(self):
        segs = np.array([[5, 5, 50, 5], [10, 20, 10, 55], [30, 30, 58, 58]], float)
        rep = repeatability(segs, segs, np.eye(3), (64, 64), (64, 64))
        assert rep.length_repeatability == pytest.approx(1.0, abs=1e-9)
        assert rep.count_repeatability == pytest.approx(1.0, abs=1e-9)

    def test_disjoint_detections(self):
        a = np.array([[5, 5, 50, 5]], float)
        b = np.array([[5, 55, 50, 55]], float)
        rep = repeatability(a, b, np.eye(3), (64, 64), (64, 64))
        assert rep.length_repeatability == 0.0

    def test_translation_beyond_distance_gate(self):
        a = np.array([[5, 20, 50, 20]], float)
        shift = REPEATABILITY_GATES.lambda_dist + 2.0
        b = a.copy()
        b[:, [1, 3]] += shift
        rep = repeatability(a, b, np.eye(3), (64, 64), (64, 64))
        assert rep.length_repeatability == 0.0

    def test_symmetric_under_swap(self):
        rng = np.random.default_rng(2)
        a = rng.uniform(5, 58, (4, 4))
        b = rng.uniform(5, 58, (5, 4))
        h = np.array([[1, 0, 3], [0, 1, -2], [0, 0, 1]], float)
        r1 = repeatability(a, b, h, (64, 64), (64, 64))
        r2 = repeatability(b, a, np.linalg.inv(h), (64, 64), (64, 64))
        assert r1.length_repeatability == pytest.approx(r2.length_repeatability, abs=1e-9)
        assert r1.count_repeatability == pytest.approx(r2.count_repeatability, abs=1e-9)

    def test_no_shared_region_flagged(self):
        a = np.array([[5, 5, 50, 5]], float)
        b = np.array([[5, 5, 50, 5]], float)
        h = np.array([[1, 0, 1000], [0, 1, 0], [0, 0, 1]], float)  # no overlap
        rep = repeatability(a, b, h, (64, 64), (64, 64))
        assert rep.length_repeatability == 0.0
        assert not rep.valid


class TestDatasetEval:
    def test_identity_dataset(self):
        segs = np.array([[0, 0, 10, 0], [5, 5, 5, 25]], float)
        entries = [("a", segs, [1.0, 0.5], segs), ("b", segs, [1.0, 0.5], segs)]
        out = evaluate_dataset(entries)
        assert out.pooled.precision == pytest.approx(1.0)
        assert out.pooled.recall == pytest.approx(1.0)
        assert out.pooled.ap == pytest.approx(1.0)
        assert out.mean.f_score == pytest.approx(1.0)

    def test_empty_detections_pool_to_zero(self):
        gt = np.array([[0, 0, 10, 0]], float)
        entries = [("a", np.zeros((0, 4)), [], gt)]
        out = evaluate_dataset(entries)
        assert out.pooled.precision == 0.0
        assert out.pooled.recall == 0.0
