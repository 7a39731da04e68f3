from __future__ import annotations

import random

import numpy as np
import pytest

from ladder.annotations import AnnotationDoc, Shape
from ladder.errors import UndefinedRecallError
from ladder.evaluation import (
    ConfusionMatrix,
    MatchResult,
    auc,
    confusion_matrix,
    match,
    pr_curve,
    report,
)
from ladder.geometry import BBox, iou
from ladder.postprocess import Detection, PostprocessConfig, rank_order

CLASSES = ["low", "moderate", "high"]


def gt_shape(label, box, sid=None):
    return Shape(sid or f"g{id(box) % 99999}", label, BBox(*map(float, box)))


def det(cls, box, conf):
    return Detection(class_index=cls, bbox=BBox(*map(float, box)), confidence=conf)


def random_match_instance(rng: random.Random):
    def boxes(n):
        out = []
        for _ in range(n):
            x1 = rng.uniform(0, 30)
            y1 = rng.uniform(0, 30)
            out.append((x1, y1, x1 + rng.uniform(4, 20), y1 + rng.uniform(4, 20)))
        return out

    gt = [
        gt_shape(CLASSES[rng.randint(0, 2)], b, sid=f"g{i}")
        for i, b in enumerate(boxes(rng.randint(0, 5)))
    ]
    preds = [
        det(rng.randint(0, 2), b, round(rng.uniform(0, 1), 2))
        for b in boxes(rng.randint(0, 5))
    ]
    return gt, preds


def assignment_oracle(gt, preds, thr, class_aware, classes=CLASSES):
    """Brute-force search over all one-to-one assignments, picking the one
    that is lexicographically best under the greedy processing order: for
    each prediction in rank order, matched beats unmatched, then higher IoU,
    then the earlier ground-truth box."""
    order = rank_order(list(preds))

    def eligible(pi):
        p = preds[pi]
        out = []
        for gi, g in enumerate(gt):
            if class_aware and classes[p.class_index] != g.label:
                continue
            ov = iou(g.bbox, p.bbox)
            if ov >= thr:
                out.append((gi, ov))
        return out

    best_key = None
    best = None

    def rec(i, used, assignment):
        nonlocal best_key, best
        if i == len(order):
            key = tuple(
                (1, assignment[pi][1], -assignment[pi][0])
                if pi in assignment
                else (0, 0.0, 0)
                for pi in order
            )
            if best_key is None or key > best_key:
                best_key = key
                best = dict(assignment)
            return
        pi = order[i]
        rec(i + 1, used, assignment)
        for gi, ov in eligible(pi):
            if gi not in used:
                assignment[pi] = (gi, ov)
                rec(i + 1, used | {gi}, assignment)
                del assignment[pi]

    rec(0, frozenset(), {})
    return best


class TestMatch:
    def test_pair_above_threshold(self):
        gt = [gt_shape("low", (0, 0, 10, 10), "g0")]
        preds = [det(0, (0, 4, 10, 14), 0.9)]  # iou = 6/14 ~ 0.43
        assert iou(gt[0].bbox, preds[0].bbox) == pytest.approx(6 / 14)
        res = match(gt, preds, 0.4, class_aware=False)
        assert [(p.gt_id, p.pred_index) for p in res.pairs] == [("g0", 0)]
        assert res.unmatched_gt == [] and res.unmatched_pred == []

    def test_below_threshold_unmatched(self):
        gt = [gt_shape("low", (0, 0, 10, 10), "g0")]
        preds = [det(0, (0, 7, 10, 17), 0.9)]  # iou = 3/17 < 0.5
        res = match(gt, preds, 0.5, class_aware=False)
        assert res.pairs == []
        assert res.unmatched_gt == ["g0"]
        assert res.unmatched_pred == [0]

    def test_no_predictions(self):
        gt = [gt_shape("low", (0, 0, 10, 10), "g0"), gt_shape("high", (20, 20, 30, 30), "g1")]
        res = match(gt, [], 0.5, class_aware=False)
        assert res.unmatched_gt == ["g0", "g1"]

    def test_class_aware_requires_label_agreement(self):
        gt = [gt_shape("low", (0, 0, 10, 10), "g0")]
        preds = [det(2, (0, 0, 10, 10), 0.9)]
        agnostic = match(gt, preds, 0.5, class_aware=False)
        aware = match(gt, preds, 0.5, class_aware=True, classes=CLASSES)
        assert len(agnostic.pairs) == 1
        assert aware.pairs == []

    def test_equals_bruteforce_oracle(self):
        rng = random.Random(2024)
        for _ in range(500):
            gt, preds = random_match_instance(rng)
            thr = rng.choice([0.3, 0.5, 0.7])
            class_aware = rng.random() < 0.5
            res = match(gt, preds, thr, class_aware, classes=CLASSES)
            got = {p.pred_index: (int(p.gt_id[1:]), p.iou) for p in res.pairs}
            want = assignment_oracle(gt, preds, thr, class_aware)
            assert got.keys() == want.keys()
            for pi in got:
                assert got[pi][0] == want[pi][0]
                assert got[pi][1] == pytest.approx(want[pi][1])

    def test_raising_threshold_never_adds_matches(self):
        rng = random.Random(77)
        for _ in range(200):
            gt, preds = random_match_instance(rng)
            lo = match(gt, preds, 0.3, class_aware=False)
            hi = match(gt, preds, 0.6, class_aware=False)
            assert len(hi.pairs) <= len(lo.pairs)

    def test_one_to_one(self):
        rng = random.Random(31)
        for _ in range(100):
            gt, preds = random_match_instance(rng)
            res = match(gt, preds, 0.4, class_aware=False)
            gt_ids = [p.gt_id for p in res.pairs]
            pred_idx = [p.pred_index for p in res.pairs]
            assert len(set(gt_ids)) == len(gt_ids)
            assert len(set(pred_idx)) == len(pred_idx)


class TestConfusionMatrix:
    def test_single_cross_class_cell(self):
        gt = [gt_shape("high", (0, 0, 10, 10), "g0")]
        preds = [det(0, (0, 0, 10, 10), 0.9)]
        res = match(gt, preds, 0.5, class_aware=False)
        cm = confusion_matrix([(gt, preds, res)], CLASSES)
        assert cm.counts[2][0] == 1
        assert cm.counts.sum() == 1

    def test_row_normalization_worked_example(self):
        counts = np.zeros((4, 4), dtype=np.int64)
        counts[0] = [72, 7, 0, 21]
        cm = ConfusionMatrix(list(CLASSES), counts)
        assert cm.normalized()[0].tolist() == pytest.approx([0.72, 0.07, 0.0, 0.21])

    def test_empty_inputs(self):
        cm = confusion_matrix([], CLASSES)
        assert cm.counts.sum() == 0
        assert cm.normalized().sum() == 0
        assert cm.undefined_rows() == [0, 1, 2, 3]

    def test_miss_and_false_alarm_buckets(self):
        gt = [gt_shape("low", (0, 0, 10, 10), "g0")]
        preds = [det(1, (50, 50, 60, 60), 0.9)]
        res = match(gt, preds, 0.5, class_aware=False)
        cm = confusion_matrix([(gt, preds, res)], CLASSES)
        assert cm.counts[0][3] == 1  # miss: low predicted as background
        assert cm.counts[3][1] == 1  # false alarm: background predicted moderate
        assert cm.counts[3][3] == 0

    def test_row_conservation(self):
        rng = random.Random(11)
        per_image = []
        gt_per_class = {0: 0, 1: 0, 2: 0}
        unmatched_preds = 0
        for _ in range(20):
            gt, preds = random_match_instance(rng)
            res = match(gt, preds, 0.5, class_aware=False)
            per_image.append((gt, preds, res))
            for g in gt:
                gt_per_class[CLASSES.index(g.label)] += 1
            unmatched_preds += len(res.unmatched_pred)
        cm = confusion_matrix(per_image, CLASSES)
        for ci in range(3):
            assert cm.counts[ci].sum() == gt_per_class[ci]
        assert cm.counts[3].sum() == unmatched_preds


def pr_sweep_oracle(per_image, class_index, match_iou, classes=CLASSES):
    """Literal re-match at every distinct confidence threshold."""
    label = classes[class_index]
    n_gt = sum(sum(1 for s in gt if s.label == label) for gt, _ in per_image)
    thresholds = sorted(
        {
            p.confidence
            for _, preds in per_image
            for p in preds
            if p.class_index == class_index
        },
        reverse=True,
    )
    points = []
    for t in thresholds:
        tp = fp = 0
        for gt, preds in per_image:
            cls_gt = [s for s in gt if s.label == label]
            kept = [
                p for p in preds if p.class_index == class_index and p.confidence >= t
            ]
            res = match(cls_gt, kept, match_iou, class_aware=True, classes=classes)
            tp += len(res.pairs)
            fp += len(kept) - len(res.pairs)
        points.append((tp / n_gt, tp / (tp + fp)))
    return points


class TestPrCurve:
    def test_perfect_detector_single_point(self):
        gt = [gt_shape("low", (0, 0, 10, 10), "g0"), gt_shape("low", (20, 20, 30, 30), "g1")]
        preds = [det(0, (0, 0, 10, 10), 0.9), det(0, (20, 20, 30, 30), 0.9)]
        curve = pr_curve([(gt, preds)], 0, 0.5, CLASSES)
        assert curve.points == [(1.0, 1.0)]
        assert curve.auc == 1.0

    def test_zero_predictions(self):
        gt = [gt_shape("low", (0, 0, 10, 10), "g0")]
        curve = pr_curve([(gt, [])], 0, 0.5, CLASSES)
        assert curve.points == []
        assert curve.auc == 0.0

    def test_two_gt_one_correct_one_wrong_location(self):
        gt = [gt_shape("low", (0, 0, 10, 10), "g0"), gt_shape("low", (40, 40, 50, 50), "g1")]
        preds = [det(0, (0, 0, 10, 10), 0.9), det(0, (70, 70, 80, 80), 0.8)]
        curve = pr_curve([(gt, preds)], 0, 0.5, CLASSES)
        assert curve.points == [(0.5, 1.0), (0.5, 0.5)]
        assert curve.auc == 0.5

    def test_zero_gt_raises(self):
        gt = [gt_shape("low", (0, 0, 10, 10), "g0")]
        with pytest.raises(UndefinedRecallError):
            pr_curve([(gt, [])], 2, 0.5, CLASSES)

    def test_matches_exhaustive_threshold_oracle(self):
        rng = random.Random(404)
        checked = 0
        while checked < 60:
            per_image = [random_match_instance(rng) for _ in range(3)]
            for ci in range(3):
                n_gt = sum(sum(1 for s in gt if s.label == CLASSES[ci]) for gt, _ in per_image)
                if n_gt == 0:
                    continue
                curve = pr_curve(per_image, ci, 0.5, CLASSES)
                assert curve.points == pytest.approx(pr_sweep_oracle(per_image, ci, 0.5))
                checked += 1

    def test_recall_nondecreasing_precision_bounded(self):
        rng = random.Random(555)
        for _ in range(40):
            per_image = [random_match_instance(rng) for _ in range(2)]
            for ci in range(3):
                try:
                    curve = pr_curve(per_image, ci, 0.5, CLASSES)
                except UndefinedRecallError:
                    continue
                recalls = [r for r, _ in curve.points]
                assert recalls == sorted(recalls)
                assert all(0 <= p <= 1 for _, p in curve.points)
                assert all(0 <= r <= 1 for r, _ in curve.points)


class TestAuc:
    def test_perfect(self):
        assert auc([(1.0, 1.0)]) == 1.0

    def test_empty(self):
        assert auc([]) == 0.0

    def test_two_point_hand_example(self):
        assert auc([(0.5, 1.0), (0.5, 0.5)]) == 0.5

    def test_three_point_hand_example(self):
        # envelope: precision 1.0 up to recall 0.5, zero beyond
        assert auc([(0.5, 1.0), (0.5, 0.5), (1.0, 0.0)]) == 0.5

    def test_invariant_under_dominated_points(self):
        rng = random.Random(9)
        for _ in range(50):
            n = rng.randint(1, 6)
            recalls = sorted(round(rng.uniform(0, 1), 2) for _ in range(n))
            points = [(r, round(rng.uniform(0, 1), 2)) for r in recalls]
            base = auc(points)

            def envelope_at(r):
                vals = [p for (pr, p) in points if pr >= r]
                return max(vals) if vals else 0.0

            r = round(rng.uniform(0, max(r for r, _ in points)), 2)
            dominated = (r, rng.uniform(0, envelope_at(r)))
            assert auc(points + [dominated]) == pytest.approx(base)


def fig2a_fixture():
    """300 ground-truth boxes (100 per class) engineered so the report's
    normalized confusion matrix has diagonal [0.72, 0.50, 0.80] and
    background column [0.21, 0.20, 0.15]."""
    rows = {0: [72, 7, 0, 21], 1: [15, 50, 15, 20], 2: [3, 2, 80, 15]}
    pitch, size = 30.0, 20.0
    side = 3000
    cols = int(side // pitch)
    shapes: list[Shape] = []
    dets: list[Detection] = []
    slot = 0

    def next_box():
        nonlocal slot
        x = (slot % cols) * pitch
        y = (slot // cols) * pitch
        slot += 1
        return BBox(x, y, x + size, y + size)

    for true_cls, row in rows.items():
        for pred_cls, count in enumerate(row[:3]):
            for _ in range(count):
                box = next_box()
                shapes.append(Shape(f"g{slot}", CLASSES[true_cls], box))
                dets.append(Detection(pred_cls, box, 0.9))
        for _ in range(row[3]):
            shapes.append(Shape(f"g{slot}", CLASSES[true_cls], next_box()))
    doc = AnnotationDoc("fig2a.png", side, side, shapes)
    return doc, dets


class TestReport:
    cfg = PostprocessConfig(conf_threshold=0.25, nms_iou_threshold=0.45)

    def test_engineered_rates_reproduced(self):
        doc, dets = fig2a_fixture()
        rep = report([(doc, dets)], self.cfg, 0.5, CLASSES)
        normalized = rep.confusion.normalized()
        for i, want in enumerate([0.72, 0.50, 0.80]):
            assert abs(normalized[i][i] - want) <= 1e-9
        for i, want in enumerate([0.21, 0.20, 0.15]):
            assert abs(normalized[i][3] - want) <= 1e-9

    def test_echoed_ground_truth_is_identity(self):
        gt = [
            gt_shape("low", (0, 0, 10, 10), "g0"),
            gt_shape("moderate", (20, 20, 30, 30), "g1"),
            gt_shape("high", (40, 40, 55, 55), "g2"),
        ]
        preds = [det(CLASSES.index(s.label), (s.bbox.x1, s.bbox.y1, s.bbox.x2, s.bbox.y2), 1.0) for s in gt]
        doc = AnnotationDoc("img.png", 100, 100, gt)
        rep = report([(doc, preds)], self.cfg, 0.5, CLASSES)
        counts = rep.confusion.counts
        assert counts[:3, :3].tolist() == np.eye(3, dtype=int).tolist()
        assert counts[:, 3].sum() == 0 and counts[3, :].sum() == 0
        assert [c.auc for c in rep.curves] == [1.0, 1.0, 1.0]
        assert rep.undefined_recall == []

    def test_no_predictions_all_missed(self):
        gt_docs = [
            AnnotationDoc("a.png", 100, 100, [gt_shape("low", (0, 0, 10, 10), "g0")]),
            AnnotationDoc("b.png", 100, 100, [gt_shape("moderate", (0, 0, 10, 10), "g1")]),
            AnnotationDoc("c.png", 100, 100, [gt_shape("high", (0, 0, 10, 10), "g2")]),
        ]
        rep = report([(d, []) for d in gt_docs], self.cfg, 0.5, CLASSES)
        normalized = rep.confusion.normalized()
        assert [normalized[i][3] for i in range(3)] == [1.0, 1.0, 1.0]
        assert [normalized[i][i] for i in range(3)] == [0.0, 0.0, 0.0]
        assert all(c.auc == 0.0 for c in rep.curves)

    def test_model_shapes_ignored_as_ground_truth(self):
        from ladder.annotations import SOURCE_MODEL

        doc = AnnotationDoc(
            "img.png", 100, 100,
            [Shape("m0", "low", BBox(0, 0, 10, 10), SOURCE_MODEL, 0.9)],
        )
        rep = report([(doc, [])], self.cfg, 0.5, CLASSES)
        assert rep.confusion.counts.sum() == 0
        assert rep.undefined_recall == [0, 1, 2]

    def test_curve_tp_consistent_with_direct_matching(self):
        # The curve's final point aggregates every NMS'd prediction; its
        # recall must equal direct class-aware matching over the same set.
        from ladder.postprocess import nms

        rng = random.Random(123)
        per_image = [random_match_instance(rng) for _ in range(4)]
        items = [
            (AnnotationDoc(f"i{i}.png", 100, 100, gt), preds)
            for i, (gt, preds) in enumerate(per_image)
        ]
        rep = report(items, self.cfg, 0.5, CLASSES)
        for curve in rep.curves:
            label = CLASSES[curve.class_index]
            n_gt = sum(1 for gt, _ in per_image for s in gt if s.label == label)
            tp = 0
            any_preds = False
            for gt, preds in per_image:
                kept = nms(list(preds), self.cfg)
                cls_gt = [s for s in gt if s.label == label]
                cls_preds = [p for p in kept if p.class_index == curve.class_index]
                any_preds = any_preds or bool(cls_preds)
                tp += len(match(cls_gt, cls_preds, 0.5, True, CLASSES).pairs)
            if any_preds:
                assert curve.points[-1][0] == pytest.approx(tp / n_gt)
            else:
                assert curve.points == []


def test_report_serialization(tmp_path):
    from ladder.evaluation import write_report

    doc, dets = fig2a_fixture()
    rep = report([(doc, dets)], PostprocessConfig(), 0.5, CLASSES)
    path = write_report(rep, tmp_path)
    data = __import__("json").loads(path.read_text())
    assert data["matrix_orientation"] == "true-on-rows"
    assert data["classes"] == CLASSES
    assert len(data["counts"]) == 4
    assert (tmp_path / "confusion.csv").exists()
    for label in CLASSES:
        assert (tmp_path / f"pr_{label}.csv").exists()
