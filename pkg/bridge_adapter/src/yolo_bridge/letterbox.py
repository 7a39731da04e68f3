"""Letterbox resize and the inverse mapping back to original image pixels."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image


@dataclass(frozen=True)
class LetterboxMapping:
    scale: float
    pad_x: float
    pad_y: float
    orig_w: int
    orig_h: int

    def to_original(self, x1: float, y1: float, x2: float, y2: float):
        """Network-space box -> original pixels, clamped to the image."""

        def back_x(v: float) -> float:
            return min(max((v - self.pad_x) / self.scale, 0.0), float(self.orig_w))

        def back_y(v: float) -> float:
            return min(max((v - self.pad_y) / self.scale, 0.0), float(self.orig_h))

        return back_x(x1), back_y(y1), back_x(x2), back_y(y2)


def letterbox(im: Image.Image, size: int, fill: int = 114):
    """Aspect-preserving resize onto a size x size canvas, centered."""
    w, h = im.size
    scale = min(size / w, size / h)
    new_w = max(1, round(w * scale))
    new_h = max(1, round(h * scale))
    resized = im.convert("RGB").resize((new_w, new_h), Image.BILINEAR)
    canvas = Image.new("RGB", (size, size), (fill, fill, fill))
    pad_x = (size - new_w) // 2
    pad_y = (size - new_h) // 2
    canvas.paste(resized, (pad_x, pad_y))
    array = np.asarray(canvas, dtype=np.float32) / 255.0
    return array, LetterboxMapping(scale, float(pad_x), float(pad_y), w, h)
