"""Axis-aligned box arithmetic: canonical rectangles, IoU, YOLO-style normalization.

Coordinates are continuous pixels, origin at the top-left, y growing downward.
Right and bottom edges are exclusive for rasterization purposes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .errors import GeometryError, ImageError

EPS = 1e-9


@dataclass(frozen=True)
class BBox:
    """Canonical axis-aligned rectangle: x1 <= x2, y1 <= y2, all finite.

    Zero-area boxes are representable (intermediate drag states pass
    through them); they are rejected at annotation-commit time, not here.
    """

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        for v in (self.x1, self.y1, self.x2, self.y2):
            if not isinstance(v, (int, float)) or not math.isfinite(v):
                raise GeometryError(f"non-finite coordinate in box {v!r}")
        if self.x1 > self.x2 or self.y1 > self.y2:
            raise GeometryError(
                f"non-canonical box ({self.x1}, {self.y1}, {self.x2}, {self.y2})"
            )

    @property
    def width(self) -> float:
        return self.x2 - self.x1

    @property
    def height(self) -> float:
        return self.y2 - self.y1

    def as_points(self) -> list[list[float]]:
        """Top-left / bottom-right corner pair, the sidecar wire form."""
        return [[self.x1, self.y1], [self.x2, self.y2]]


@dataclass(frozen=True)
class NormalizedBox:
    """Center-size box as fractions of image width/height, each in [0, 1]."""

    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self):
        for name in ("cx", "cy", "w", "h"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < -EPS or v > 1 + EPS:
                raise GeometryError(f"normalized field {name}={v!r} outside [0, 1]")
        if self.cx - self.w / 2 < -EPS or self.cx + self.w / 2 > 1 + EPS:
            raise GeometryError("normalized box spills over a horizontal edge")
        if self.cy - self.h / 2 < -EPS or self.cy + self.h / 2 > 1 + EPS:
            raise GeometryError("normalized box spills over a vertical edge")


def from_anchor_points(p1: Sequence[float], p2: Sequence[float]) -> BBox:
    """Canonical box from two corner clicks, in either drag direction."""
    x1, y1 = float(p1[0]), float(p1[1])
    x2, y2 = float(p2[0]), float(p2[1])
    for v in (x1, y1, x2, y2):
        if not math.isfinite(v):
            raise GeometryError(f"non-finite anchor point coordinate {v!r}")
    return BBox(min(x1, x2), min(y1, y2), max(x1, x2), max(y1, y2))


def area(b: BBox) -> float:
    return (b.x2 - b.x1) * (b.y2 - b.y1)


def intersection_area(a: BBox, b: BBox) -> float:
    iw = min(a.x2, b.x2) - max(a.x1, b.x1)
    ih = min(a.y2, b.y2) - max(a.y1, b.y1)
    if iw <= 0 or ih <= 0:
        return 0.0
    return iw * ih


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union in [0, 1]; 0 when the union has zero area."""
    inter = intersection_area(a, b)
    union = area(a) + area(b) - inter
    if union <= 0:
        return 0.0
    return inter / union


def clamp(b: BBox, image_w: float, image_h: float) -> BBox:
    """Clamp a box to [0, image_w] x [0, image_h]."""
    if image_w <= 0 or image_h <= 0:
        raise ImageError(f"non-positive image dimensions {image_w}x{image_h}")

    def _cl(v: float, hi: float) -> float:
        return min(max(v, 0.0), hi)

    return BBox(
        _cl(b.x1, image_w), _cl(b.y1, image_h), _cl(b.x2, image_w), _cl(b.y2, image_h)
    )


def normalize(b: BBox, image_w: float, image_h: float) -> NormalizedBox:
    """Center-size fractions for YOLO label lines.

    The box must already lie within the image (clamp first if unsure).
    """
    if image_w <= 0 or image_h <= 0:
        raise ImageError(f"non-positive image dimensions {image_w}x{image_h}")
    return NormalizedBox(
        cx=(b.x1 + b.x2) / 2 / image_w,
        cy=(b.y1 + b.y2) / 2 / image_h,
        w=(b.x2 - b.x1) / image_w,
        h=(b.y2 - b.y1) / image_h,
    )


def denormalize(n: NormalizedBox, image_w: float, image_h: float) -> BBox:
    """Inverse of :func:`normalize`."""
    if image_w <= 0 or image_h <= 0:
        raise ImageError(f"non-positive image dimensions {image_w}x{image_h}")
    half_w = n.w * image_w / 2
    half_h = n.h * image_h / 2
    cx = n.cx * image_w
    cy = n.cy * image_h
    return BBox(cx - half_w, cy - half_h, cx + half_w, cy + half_h)
