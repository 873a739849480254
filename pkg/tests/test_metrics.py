import itertools
import json
import math

import numpy as np
import pytest

from blobvid.embedding import write_embedding
from blobvid.errors import (
    DegenerateVector,
    RangeError,
    ShapeError,
    UndefinedMetric,
)
from blobvid.metrics import (
    BBox,
    FrameEval,
    RegionEmbedding,
    bbox_iou,
    load_frame_evals,
    load_region_embeddings,
    match_detections,
    mean_iou,
    region_cosine_metrics,
)


def best_total_by_permutation(dets, gts):
    """Exhaustive optimum over injective det -> gt assignments."""
    n_d, n_g = len(dets), len(gts)
    best = 0.0
    k = min(n_d, n_g)
    for det_subset in itertools.permutations(range(n_d), k):
        for gt_subset in itertools.combinations(range(n_g), k):
            total = sum(bbox_iou(dets[d], gts[g]) for d, g in zip(det_subset, gt_subset))
            best = max(best, total)
    return best


def random_boxes(rng, n):
    out = []
    for _ in range(n):
        x0 = rng.uniform(0, 30)
        y0 = rng.uniform(0, 30)
        out.append(BBox(x0, y0, x0 + rng.uniform(1, 15), y0 + rng.uniform(1, 15),
                        confidence=float(rng.uniform(0, 1))))
    return out


class TestBBox:
    def test_area(self):
        assert BBox(1, 2, 4, 6).area == 12.0

    def test_rejects_unordered(self):
        with pytest.raises(RangeError):
            BBox(5, 0, 4, 2)
        with pytest.raises(RangeError):
            BBox(0, 5, 2, 4)

    def test_rejects_bad_confidence(self):
        with pytest.raises(RangeError):
            BBox(0, 0, 1, 1, confidence=1.5)


class TestBBoxIou:
    def test_identical(self):
        b = BBox(0, 0, 10, 10)
        assert bbox_iou(b, b) == 1.0

    def test_disjoint(self):
        assert bbox_iou(BBox(0, 0, 1, 1), BBox(2, 2, 3, 3)) == 0.0

    def test_touching_edges_are_disjoint(self):
        assert bbox_iou(BBox(0, 0, 1, 1), BBox(1, 0, 2, 1)) == 0.0

    def test_hand_computed_overlap(self):
        # 5x10 intersection, 100 + 100 - 50 union.
        assert bbox_iou(BBox(0, 0, 10, 10), BBox(5, 0, 15, 10)) == pytest.approx(50 / 150)

    def test_symmetric(self, rng):
        for _ in range(20):
            a, b = random_boxes(rng, 2)
            assert bbox_iou(a, b) == bbox_iou(b, a)


class TestMatchDetections:
    def test_optimal_vs_permutation_oracle(self, rng):
        for _ in range(50):
            dets = random_boxes(rng, int(rng.integers(1, 6)))
            gts = [BBox(b.x0, b.y0, b.x1, b.y1) for b in random_boxes(rng, int(rng.integers(1, 6)))]
            # Matching happens after confidence truncation; re-state that
            # contract here rather than trusting result.kept.
            keep = sorted(range(len(dets)), key=lambda i: -dets[i].confidence)[: len(gts)]
            result = match_detections(dets, gts)
            assert sum(result.per_gt_iou) == pytest.approx(
                best_total_by_permutation([dets[i] for i in keep], gts), abs=1e-12
            )

    def test_greedy_can_be_suboptimal(self):
        # Largest single overlap sits on the wrong pairing.
        gts = [BBox(0, 0, 20, 2), BBox(20, 0, 40, 2)]
        dets = [BBox(8, 0, 28, 2), BBox(0, 0, 7, 2)]
        h = match_detections(dets, gts, method="hungarian")
        g = match_detections(dets, gts, method="greedy")
        assert sum(h.per_gt_iou) == pytest.approx(0.6)
        assert sum(g.per_gt_iou) == pytest.approx(3.0 / 7.0)
        assert sum(h.per_gt_iou) > sum(g.per_gt_iou)

    def test_extra_detections_dropped_by_confidence(self):
        gt = [BBox(0, 0, 10, 10)]
        dets = [
            BBox(0, 0, 10, 10, confidence=0.2),   # perfect but low confidence
            BBox(100, 100, 110, 110, confidence=0.9),
        ]
        result = match_detections(dets, gt)
        assert result.kept == (1,)
        assert result.per_gt_iou == (0.0,)

    def test_confidence_tie_keeps_input_order(self):
        gt = [BBox(0, 0, 10, 10)]
        dets = [BBox(0, 0, 5, 10, confidence=0.5), BBox(0, 0, 10, 10, confidence=0.5)]
        result = match_detections(dets, gt)
        assert result.kept == (0,)

    def test_unmatched_gt_scores_zero(self):
        gts = [BBox(0, 0, 10, 10), BBox(50, 50, 60, 60)]
        dets = [BBox(0, 0, 10, 10, confidence=1.0)]
        result = match_detections(dets, gts)
        assert result.per_gt_iou[0] == 1.0
        assert result.per_gt_iou[1] == 0.0

    def test_no_gt(self):
        result = match_detections([BBox(0, 0, 1, 1)], [])
        assert result.pairs == () and result.per_gt_iou == ()

    def test_no_detections(self):
        result = match_detections([], [BBox(0, 0, 1, 1)])
        assert result.per_gt_iou == (0.0,)

    def test_unknown_method(self):
        with pytest.raises(RangeError):
            match_detections([], [], method="auction")

    def test_pairs_use_original_detection_indices(self):
        gt = [BBox(0, 0, 10, 10)]
        dets = [
            BBox(90, 90, 95, 95, confidence=0.1),
            BBox(0, 0, 10, 10, confidence=0.9),
        ]
        result = match_detections(dets, gt)
        assert result.pairs == ((1, 0),)


class TestMeanIou:
    def make_eval(self, frame, det_boxes, gt_boxes):
        return FrameEval(frame, tuple(det_boxes),
                         tuple((i, b) for i, b in enumerate(gt_boxes)))

    def test_pools_over_frames(self):
        # Frame 0: one GT matched at 1.0. Frame 8: two GT at 0.5 and 0.0.
        half = BBox(0, 0, 5, 10)
        evals = [
            self.make_eval(0, [BBox(0, 0, 10, 10)], [BBox(0, 0, 10, 10)]),
            self.make_eval(8, [half], [BBox(0, 0, 10, 10), BBox(50, 0, 60, 10)]),
        ]
        got = mean_iou(evals, [0, 8])
        assert got == pytest.approx((1.0 + 0.5 + 0.0) / 3)

    def test_restricts_to_eval_frames(self):
        evals = [
            self.make_eval(0, [BBox(0, 0, 10, 10)], [BBox(0, 0, 10, 10)]),
            self.make_eval(1, [], [BBox(0, 0, 10, 10)]),
        ]
        assert mean_iou(evals, [0]) == 1.0

    def test_empty_frames_rejected(self):
        with pytest.raises(RangeError):
            mean_iou([], [])

    def test_no_gt_undefined(self):
        evals = [self.make_eval(0, [BBox(0, 0, 1, 1)], [])]
        with pytest.raises(UndefinedMetric):
            mean_iou(evals, [0])


def unit2(angle: float) -> np.ndarray:
    return np.array([math.cos(angle), math.sin(angle)])


class TestRegionCosineMetrics:
    def test_rclip_t_exact(self):
        embs = (
            RegionEmbedding(0, 0, "caption", unit2(0.0)),
            RegionEmbedding(0, 0, "generated", unit2(math.acos(0.25))),
            RegionEmbedding(1, 0, "caption", unit2(1.0)),
            RegionEmbedding(1, 0, "generated", unit2(1.0 + math.acos(0.75))),
        )
        report = region_cosine_metrics(embs, "rclip_t")
        assert report.value == pytest.approx(0.5, abs=1e-12)
        assert report.num_pairs == 2 and report.skipped == 0

    def test_rclip_i_uses_ground_truth(self):
        embs = (
            RegionEmbedding(0, 0, "ground_truth", unit2(0.2)),
            RegionEmbedding(0, 0, "generated", unit2(0.2)),
            RegionEmbedding(0, 0, "caption", unit2(2.0)),
        )
        report = region_cosine_metrics(embs, "rclip_i")
        assert report.value == pytest.approx(1.0)
        assert report.num_pairs == 1

    def test_missing_generated_counts_skipped(self):
        embs = (
            RegionEmbedding(0, 0, "caption", unit2(0.1)),
            RegionEmbedding(1, 0, "caption", unit2(0.4)),
            RegionEmbedding(1, 0, "generated", unit2(0.4)),
        )
        report = region_cosine_metrics(embs, "rclip_t")
        assert report.num_pairs == 1 and report.skipped == 1

    def test_rcfc_consecutive_frames_exact(self):
        # Object 0 cosines 0.5 then 0.8; object 1 cosines 1.0 then 0.9.
        a1 = math.acos(0.5)
        a2 = a1 + math.acos(0.8)
        b2 = math.acos(0.9)
        embs = (
            RegionEmbedding(0, 0, "generated", unit2(0.0)),
            RegionEmbedding(0, 1, "generated", unit2(a1)),
            RegionEmbedding(0, 2, "generated", unit2(a2)),
            RegionEmbedding(1, 0, "generated", unit2(0.0)),
            RegionEmbedding(1, 1, "generated", unit2(0.0)),
            RegionEmbedding(1, 2, "generated", unit2(b2)),
        )
        report = region_cosine_metrics(embs, "rcfc")
        assert report.value == pytest.approx((0.5 + 0.8 + 1.0 + 0.9) / 4, abs=1e-12)
        assert report.num_pairs == 4 and report.skipped == 0

    def test_rcfc_gap_counts_skipped_pairs(self):
        # Frames 0 and 2 with nothing at 1: both consecutive pairs touch the
        # missing frame, and with a second object supplying real pairs the
        # gaps show up in the skipped count instead of aborting the metric.
        embs = (
            RegionEmbedding(0, 0, "generated", unit2(0.0)),
            RegionEmbedding(0, 2, "generated", unit2(0.3)),
            RegionEmbedding(1, 0, "generated", unit2(0.0)),
            RegionEmbedding(1, 1, "generated", unit2(0.0)),
            RegionEmbedding(1, 2, "generated", unit2(0.0)),
        )
        report = region_cosine_metrics(embs, "rcfc")
        assert report.num_pairs == 2 and report.skipped == 2
        assert report.value == pytest.approx(1.0)

    def test_rcfc_all_gaps_undefined(self):
        embs = (
            RegionEmbedding(0, 0, "generated", unit2(0.0)),
            RegionEmbedding(0, 2, "generated", unit2(0.3)),
        )
        with pytest.raises(UndefinedMetric):
            region_cosine_metrics(embs, "rcfc")

    def test_duplicate_key_rejected(self):
        embs = (
            RegionEmbedding(0, 0, "generated", unit2(0.0)),
            RegionEmbedding(0, 0, "generated", unit2(0.1)),
        )
        with pytest.raises(ShapeError):
            region_cosine_metrics(embs, "rclip_t")

    def test_unknown_mode(self):
        with pytest.raises(RangeError):
            region_cosine_metrics((), "rclip_x")

    def test_no_pairs_undefined(self):
        with pytest.raises(UndefinedMetric):
            region_cosine_metrics((), "rclip_t")

    def test_zero_vector_rejected(self):
        with pytest.raises(DegenerateVector):
            RegionEmbedding(0, 0, "generated", np.zeros(3))


class TestLoaders:
    def test_frame_evals(self, tmp_path):
        (tmp_path / "dets.json").write_text(json.dumps({"frames": [
            {"frame": 0, "detections": [{"bbox": [0, 0, 5, 5], "confidence": 0.7}]},
            {"frame": 2, "detections": []},
        ]}))
        (tmp_path / "gt.json").write_text(json.dumps({"frames": [
            {"frame": 0, "objects": [{"id": 3, "bbox": [0, 0, 5, 5]}]},
            {"frame": 1, "objects": [{"id": 3, "bbox": [1, 1, 6, 6]}]},
        ]}))
        evals = load_frame_evals(tmp_path / "dets.json", tmp_path / "gt.json")
        assert [e.frame for e in evals] == [0, 1, 2]
        assert evals[0].detections[0].confidence == 0.7
        assert evals[1].ground_truth[0][0] == 3
        assert evals[2].detections == () and evals[2].ground_truth == ()

    def test_region_embeddings(self, tmp_path):
        write_embedding(tmp_path / "v.bin", np.array([[1.0, 0.0]]))
        (tmp_path / "manifest.json").write_text(json.dumps({"embeddings": [
            {"object": 4, "frame": 2, "kind": "generated", "path": "v.bin"},
        ]}))
        embs = load_region_embeddings(tmp_path / "manifest.json")
        assert len(embs) == 1
        assert embs[0].object_id == 4 and embs[0].frame == 2
        assert embs[0].kind == "generated"
        assert np.array_equal(embs[0].vector, [1.0, 0.0])
