"""Detection evaluation: greedy IoU matching, confusion matrix with a
background class, per-class precision-recall curves, and AUC.

The confusion matrix is built from class-agnostic matching so cross-class
cells get populated; PR curves use the standard per-class (class-aware)
definition. Rows of the matrix are the true classes, columns the predicted
ones, with the extra background index accounting for misses (column) and
false alarms (row).
"""

from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .annotations import SOURCE_HUMAN, AnnotationDoc, Shape
from .errors import MappingError, UndefinedRecallError, ValidationError
from .geometry import iou
from .postprocess import Detection, PostprocessConfig, filter_by_confidence, nms, rank_order


@dataclass(frozen=True)
class MatchPair:
    gt_id: str
    pred_index: int
    iou: float


@dataclass
class MatchResult:
    """One-to-one assignment between ground truth and predictions."""

    pairs: list[MatchPair]
    unmatched_gt: list[str]
    unmatched_pred: list[int]


def match(
    gt: Sequence[Shape],
    preds: Sequence[Detection],
    match_iou: float,
    class_aware: bool,
    classes: Sequence[str] | None = None,
) -> MatchResult:
    """Greedy one-to-one matching.

    Predictions are visited in rank order (confidence desc, class index asc,
    input order); each takes the still-unmatched ground truth with the
    highest IoU >= ``match_iou``, ties broken by ground-truth input order.
    When ``class_aware``, the ground-truth label must equal the prediction's
    class name under ``classes``.
    """
    if class_aware and classes is None:
        raise ValidationError("class_aware matching needs a class map")
    taken: set[int] = set()
    pairs: list[MatchPair] = []
    matched_preds: set[int] = set()
    for pi in rank_order(list(preds)):
        p = preds[pi]
        best: tuple[float, int] | None = None  # (iou, -gt_index) to maximize
        for gi, g in enumerate(gt):
            if gi in taken:
                continue
            if class_aware:
                if not 0 <= p.class_index < len(classes):  # type: ignore[arg-type]
                    continue
                if classes[p.class_index] != g.label:  # type: ignore[index]
                    continue
            ov = iou(g.bbox, p.bbox)
            if ov < match_iou:
                continue
            key = (ov, -gi)
            if best is None or key > best:
                best = key
        if best is not None:
            ov, neg_gi = best
            gi = -neg_gi
            taken.add(gi)
            matched_preds.add(pi)
            pairs.append(MatchPair(gt[gi].shape_id, pi, ov))
    unmatched_gt = [g.shape_id for gi, g in enumerate(gt) if gi not in taken]
    unmatched_pred = [pi for pi in range(len(preds)) if pi not in matched_preds]
    return MatchResult(pairs, unmatched_gt, unmatched_pred)


@dataclass
class ConfusionMatrix:
    """(K+1)x(K+1) counts indexed [true][pred]; index K is background.

    counts[K][K] stays 0: background-vs-background is undefined.
    """

    classes: list[str]
    counts: np.ndarray

    @property
    def background_index(self) -> int:
        return len(self.classes)

    def normalized(self) -> np.ndarray:
        """Row-normalized rates; all-zero rows stay zero (see undefined_rows)."""
        counts = self.counts.astype(float)
        sums = counts.sum(axis=1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            rates = np.where(sums > 0, counts / np.where(sums > 0, sums, 1), 0.0)
        return rates

    def undefined_rows(self) -> list[int]:
        """Rows with zero observations, reported rather than silently zeroed."""
        return [i for i, s in enumerate(self.counts.sum(axis=1)) if s == 0]


def confusion_matrix(
    per_image: Iterable[tuple[Sequence[Shape], Sequence[Detection], MatchResult]],
    classes: Sequence[str],
) -> ConfusionMatrix:
    """Accumulate per-image match results into the confusion counts.

    Matching must have run class-agnostically, otherwise cross-class cells
    can never be populated. Matched pairs land in [gt class][pred class],
    missed ground truth in the background column, false alarms in the
    background row.
    """
    k = len(classes)
    index = {label: i for i, label in enumerate(classes)}
    counts = np.zeros((k + 1, k + 1), dtype=np.int64)
    for gt, preds, result in per_image:
        by_id = {s.shape_id: s for s in gt}
        for pair in result.pairs:
            g = by_id[pair.gt_id]
            if g.label not in index:
                raise MappingError(f"ground-truth label {g.label!r} not in class map")
            p = preds[pair.pred_index]
            if not 0 <= p.class_index < k:
                raise MappingError(f"prediction class {p.class_index} not in class map")
            counts[index[g.label], p.class_index] += 1
        for gt_id in result.unmatched_gt:
            g = by_id[gt_id]
            if g.label not in index:
                raise MappingError(f"ground-truth label {g.label!r} not in class map")
            counts[index[g.label], k] += 1
        for pi in result.unmatched_pred:
            p = preds[pi]
            if not 0 <= p.class_index < k:
                raise MappingError(f"prediction class {p.class_index} not in class map")
            counts[k, p.class_index] += 1
    return ConfusionMatrix(list(classes), counts)


@dataclass
class PRCurve:
    """Precision-recall sweep for one class; recall is non-decreasing."""

    class_index: int
    points: list[tuple[float, float]]  # (recall, precision)
    auc: float


def auc(curve: PRCurve | Sequence[tuple[float, float]]) -> float:
    """Area under the PR curve via all-point interpolation.

    Precision at each recall is replaced by the maximum precision at any
    greater-or-equal recall (monotone envelope); rectangles are then summed
    over recall increments starting from 0.
    """
    points = curve.points if isinstance(curve, PRCurve) else list(curve)
    if not points:
        return 0.0
    pts = sorted(points, key=lambda rp: rp[0])
    envelope = [0.0] * len(pts)
    best = 0.0
    for i in range(len(pts) - 1, -1, -1):
        best = max(best, pts[i][1])
        envelope[i] = best
    total = 0.0
    prev_r = 0.0
    for (r, _), env in zip(pts, envelope):
        if r > prev_r:
            total += (r - prev_r) * env
            prev_r = r
    return total


def pr_curve(
    per_image: Sequence[tuple[Sequence[Shape], Sequence[Detection]]],
    class_index: int,
    match_iou: float,
    classes: Sequence[str],
) -> PRCurve:
    """Sweep the confidence threshold over all distinct scores of this class.

    Predictions should be NMS'd but not confidence-filtered. Greedy matching
    has the prefix property (adding lower-confidence predictions never
    changes earlier matches), so each prediction's TP/FP verdict at the full
    set holds for every threshold that includes it.
    """
    label = classes[class_index]
    n_gt = 0
    verdicts: list[tuple[float, bool]] = []  # (confidence, is_tp)
    for gt, preds in per_image:
        cls_gt = [s for s in gt if s.label == label]
        cls_preds = [p for p in preds if p.class_index == class_index]
        n_gt += len(cls_gt)
        result = match(cls_gt, cls_preds, match_iou, class_aware=True, classes=classes)
        matched = {pair.pred_index for pair in result.pairs}
        verdicts.extend((p.confidence, j in matched) for j, p in enumerate(cls_preds))
    if n_gt == 0:
        raise UndefinedRecallError(
            f"class {label!r} has zero ground-truth instances; recall is undefined"
        )
    if not verdicts:
        return PRCurve(class_index, [], 0.0)
    verdicts.sort(key=lambda v: -v[0])
    points: list[tuple[float, float]] = []
    tp = fp = 0
    i = 0
    while i < len(verdicts):
        threshold = verdicts[i][0]
        while i < len(verdicts) and verdicts[i][0] == threshold:
            if verdicts[i][1]:
                tp += 1
            else:
                fp += 1
            i += 1
        points.append((tp / n_gt, tp / (tp + fp)))
    return PRCurve(class_index, points, auc(points))


@dataclass
class EvalReport:
    """Joint accounting: confusion at the operating point plus PR/AUC per class."""

    confusion: ConfusionMatrix
    curves: list[PRCurve]
    undefined_recall: list[int]
    conf_threshold: float
    nms_iou_threshold: float
    match_iou: float
    snapshot_id: str | None = None

    def to_json(self) -> dict:
        classes = self.confusion.classes
        return {
            "config": {
                "conf_threshold": self.conf_threshold,
                "nms_iou_threshold": self.nms_iou_threshold,
                "match_iou": self.match_iou,
            },
            "snapshot_id": self.snapshot_id,
            "classes": classes,
            # Rows are true classes, columns predicted; last index is background.
            "matrix_orientation": "true-on-rows",
            "counts": self.confusion.counts.tolist(),
            "normalized": self.confusion.normalized().tolist(),
            "undefined_rows": self.confusion.undefined_rows(),
            "curves": [
                {
                    "class_index": c.class_index,
                    "label": classes[c.class_index],
                    "points": [[r, p] for r, p in c.points],
                    "auc": c.auc,
                }
                for c in self.curves
            ],
            "undefined_recall_classes": self.undefined_recall,
            "totals": {
                "ground_truth": int(self.confusion.counts[:-1, :].sum()),
                "predictions_matched_or_false": int(self.confusion.counts[:, :-1].sum()),
                "missed": int(self.confusion.counts[:-1, -1].sum()),
                "false_alarms": int(self.confusion.counts[-1, :-1].sum()),
            },
        }


def report(
    items: Sequence[tuple[AnnotationDoc, Sequence[Detection]]],
    cfg: PostprocessConfig,
    match_iou: float,
    classes: Sequence[str],
    snapshot_id: str | None = None,
) -> EvalReport:
    """Full evaluation over (document, raw predictions) pairs.

    Ground truth is the human shapes of each document (model pre-labels are
    assist overlays, not truth). The confusion matrix sees predictions at
    the operating point (confidence filter + NMS); PR curves see NMS'd but
    unfiltered predictions so the sweep covers every score.
    """
    conf_items: list[tuple[list[Shape], list[Detection], MatchResult]] = []
    pr_items: list[tuple[list[Shape], list[Detection]]] = []
    for doc, raw in items:
        gt = [s for s in doc.shapes if s.source == SOURCE_HUMAN]
        raw = list(raw)
        operating = nms(filter_by_confidence(raw, cfg), cfg)
        conf_items.append(
            (gt, operating, match(gt, operating, match_iou, class_aware=False))
        )
        pr_items.append((gt, nms(raw, cfg)))
    cm = confusion_matrix(conf_items, classes)
    curves: list[PRCurve] = []
    undefined: list[int] = []
    for ci in range(len(classes)):
        try:
            curves.append(pr_curve(pr_items, ci, match_iou, classes))
        except UndefinedRecallError:
            undefined.append(ci)
    return EvalReport(
        confusion=cm,
        curves=curves,
        undefined_recall=undefined,
        conf_threshold=cfg.conf_threshold,
        nms_iou_threshold=cfg.nms_iou_threshold,
        match_iou=match_iou,
        snapshot_id=snapshot_id,
    )


def _safe_name(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9_-]+", "_", label) or "class"


def write_report(rep: EvalReport, out_dir: Path | str) -> Path:
    """Write eval_report.json plus CSV companions for plotting."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report_path = out_dir / "eval_report.json"
    report_path.write_text(
        json.dumps(rep.to_json(), indent=2) + "\n", encoding="utf-8"
    )

    classes = rep.confusion.classes
    headers = list(classes) + ["background"]
    with open(out_dir / "confusion.csv", "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["true\\pred"] + headers)
        for i, row in enumerate(rep.confusion.counts.tolist()):
            w.writerow([headers[i]] + row)

    used: set[str] = set()
    for curve in rep.curves:
        name = _safe_name(classes[curve.class_index])
        if name in used:
            name = f"{name}_{curve.class_index}"
        used.add(name)
        with open(out_dir / f"pr_{name}.csv", "w", newline="", encoding="utf-8") as f:
            w = csv.writer(f)
            w.writerow(["recall", "precision"])
            for r, p in curve.points:
                w.writerow([f"{r:.6f}", f"{p:.6f}"])
    return report_path
