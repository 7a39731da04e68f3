"""Raw detector outputs to clean proposal sets: confidence filter and greedy NMS."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ValidationError
from .geometry import BBox, iou


@dataclass(frozen=True)
class Detection:
    """One raw detector output: class index, box in image pixels, confidence."""

    class_index: int
    bbox: BBox
    confidence: float

    def __post_init__(self):
        if self.class_index < 0:
            raise ValidationError(f"negative class index {self.class_index}")
        if not math.isfinite(self.confidence) or not 0.0 <= self.confidence <= 1.0:
            raise ValidationError(f"confidence {self.confidence!r} outside [0, 1]")


@dataclass(frozen=True)
class PostprocessConfig:
    """Operating point for proposal cleanup.

    Defaults are the deployed operating point: keep predictions with
    confidence >= 0.25 and suppress same-class overlaps at IoU >= 0.45.
    """

    conf_threshold: float = 0.25
    nms_iou_threshold: float = 0.45
    class_agnostic: bool = False

    def __post_init__(self):
        for name in ("conf_threshold", "nms_iou_threshold"):
            v = getattr(self, name)
            if not math.isfinite(v) or not 0.0 <= v <= 1.0:
                raise ValidationError(f"{name}={v!r} outside [0, 1]")


def filter_by_confidence(
    dets: list[Detection], cfg: PostprocessConfig
) -> list[Detection]:
    """Keep detections with confidence >= threshold (inclusive), stable order."""
    return [d for d in dets if d.confidence >= cfg.conf_threshold]


def rank_order(dets: list[Detection]) -> list[int]:
    """Deterministic processing order: confidence desc, class index asc, input order."""
    return sorted(
        range(len(dets)), key=lambda i: (-dets[i].confidence, dets[i].class_index, i)
    )


def nms(dets: list[Detection], cfg: PostprocessConfig) -> list[Detection]:
    """Greedy non-maximum suppression.

    Walks detections in rank order, keeping each box unless an already-kept
    box of the same class (any class when ``class_agnostic``) overlaps it at
    IoU >= the threshold. Output follows the rank order, so it is sorted by
    descending confidence.
    """
    kept: list[int] = []
    for i in rank_order(dets):
        d = dets[i]
        suppressed = any(
            (cfg.class_agnostic or dets[k].class_index == d.class_index)
            and iou(dets[k].bbox, d.bbox) >= cfg.nms_iou_threshold
            for k in kept
        )
        if not suppressed:
            kept.append(i)
    return [dets[i] for i in kept]
