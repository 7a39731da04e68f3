from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ladder.errors import GeometryError, ImageError
from ladder.geometry import (
    BBox,
    NormalizedBox,
    area,
    clamp,
    denormalize,
    from_anchor_points,
    iou,
    normalize,
)


def rasterized_iou(a: BBox, b: BBox, grid: int = 50) -> tuple[float, int]:
    """Pixel-counting oracle: boolean masks on an integer grid, right/bottom
    edges exclusive. Returns (iou, union pixel count)."""
    ys, xs = np.mgrid[0:grid, 0:grid]

    def mask(box: BBox) -> np.ndarray:
        return (xs >= box.x1) & (xs < box.x2) & (ys >= box.y1) & (ys < box.y2)

    ma, mb = mask(a), mask(b)
    union = int(np.count_nonzero(ma | mb))
    if union == 0:
        return 0.0, 0
    return np.count_nonzero(ma & mb) / union, union


int_coord = st.integers(min_value=0, max_value=50)


@st.composite
def integer_boxes(draw):
    x1, x2 = sorted((draw(int_coord), draw(int_coord)))
    y1, y2 = sorted((draw(int_coord), draw(int_coord)))
    return BBox(float(x1), float(y1), float(x2), float(y2))


class TestFromAnchorPoints:
    def test_already_canonical(self):
        assert from_anchor_points((10, 20), (30, 60)) == BBox(10, 20, 30, 60)

    def test_reversed_drag(self):
        assert from_anchor_points((30, 60), (10, 20)) == BBox(10, 20, 30, 60)

    def test_mixed_corners(self):
        # componentwise min/max: (10,60),(30,20) -> (10,20,30,60)
        assert from_anchor_points((10, 60), (30, 20)) == BBox(10, 20, 30, 60)

    def test_non_finite_rejected(self):
        with pytest.raises(GeometryError):
            from_anchor_points((float("nan"), 0), (1, 1))
        with pytest.raises(GeometryError):
            from_anchor_points((0, 0), (math.inf, 1))

    @given(
        st.tuples(int_coord, int_coord),
        st.tuples(int_coord, int_coord),
    )
    def test_argument_order_invariance(self, p1, p2):
        assert from_anchor_points(p1, p2) == from_anchor_points(p2, p1)


class TestArea:
    def test_square(self):
        assert area(BBox(0, 0, 10, 10)) == 100

    def test_degenerate_zero_width(self):
        assert area(BBox(5, 5, 5, 9)) == 0

    def test_rectangle(self):
        assert area(BBox(10, 20, 30, 60)) == 800


class TestIou:
    def test_identity(self):
        assert iou(BBox(0, 0, 10, 10), BBox(0, 0, 10, 10)) == 1.0

    def test_disjoint(self):
        assert iou(BBox(0, 0, 10, 10), BBox(20, 20, 30, 30)) == 0.0

    def test_half_overlap(self):
        # intersection 50, union 150
        assert iou(BBox(0, 0, 10, 10), BBox(0, 5, 10, 15)) == pytest.approx(1 / 3)

    def test_two_degenerate_boxes(self):
        assert iou(BBox(3, 3, 3, 3), BBox(3, 3, 3, 3)) == 0.0

    @given(integer_boxes(), integer_boxes())
    def test_symmetry(self, a, b):
        assert iou(a, b) == iou(b, a)

    @given(integer_boxes())
    def test_self_iou_is_one_for_positive_area(self, box):
        if area(box) > 0:
            assert iou(box, box) == 1.0

    @given(integer_boxes(), integer_boxes())
    def test_bounded_by_area_ratio(self, a, b):
        if area(a) > 0 and area(b) > 0:
            bound = min(area(a), area(b)) / max(area(a), area(b))
            assert 0.0 <= iou(a, b) <= bound + 1e-12

    @settings(max_examples=200)
    @given(integer_boxes(), integer_boxes())
    def test_matches_rasterization_oracle(self, a, b):
        expected, union = rasterized_iou(a, b)
        tol = 2 / union if union > 0 else 1e-9
        assert iou(a, b) == pytest.approx(expected, abs=tol)


class TestNormalize:
    def test_worked_example(self):
        n = normalize(BBox(10, 20, 30, 60), 100, 200)
        assert (n.cx, n.cy, n.w, n.h) == (0.2, 0.2, 0.2, 0.2)

    def test_full_image_box(self):
        assert normalize(BBox(0, 0, 100, 200), 100, 200) == NormalizedBox(0.5, 0.5, 1.0, 1.0)

    def test_non_positive_dims(self):
        with pytest.raises(ImageError):
            normalize(BBox(0, 0, 1, 1), 0, 10)
        with pytest.raises(ImageError):
            denormalize(NormalizedBox(0.5, 0.5, 0.1, 0.1), 10, -1)

    def test_denormalize_examples(self):
        assert denormalize(NormalizedBox(0.5, 0.5, 1.0, 1.0), 100, 200) == BBox(0, 0, 100, 200)
        b = denormalize(NormalizedBox(0.2, 0.2, 0.2, 0.2), 100, 200)
        assert (b.x1, b.y1, b.x2, b.y2) == pytest.approx((10, 20, 30, 60))

    def test_degenerate_point_box(self):
        b = denormalize(NormalizedBox(0.5, 0.5, 0.0, 0.0), 64, 64)
        assert (b.x1, b.y1) == (b.x2, b.y2) == (32, 32)

    @given(
        st.integers(1, 4000),
        st.integers(1, 4000),
        st.floats(0, 1),
        st.floats(0, 1),
        st.floats(0, 1),
        st.floats(0, 1),
    )
    def test_round_trip(self, w, h, fx1, fy1, fx2, fy2):
        box = from_anchor_points((fx1 * w, fy1 * h), (fx2 * w, fy2 * h))
        back = denormalize(normalize(box, w, h), w, h)
        for got, want in zip(
            (back.x1, back.y1, back.x2, back.y2), (box.x1, box.y1, box.x2, box.y2)
        ):
            assert got == pytest.approx(want, abs=1e-9 * max(w, h))


class TestClamp:
    def test_out_of_bounds_corners(self):
        assert clamp(BBox(-5, -5, 120, 90), 100, 80) == BBox(0, 0, 100, 80)

    def test_inside_untouched(self):
        b = BBox(1, 2, 3, 4)
        assert clamp(b, 100, 80) == b


class TestBBoxInvariants:
    def test_non_canonical_rejected(self):
        with pytest.raises(GeometryError):
            BBox(10, 0, 0, 10)

    def test_non_finite_rejected(self):
        with pytest.raises(GeometryError):
            BBox(0, 0, math.nan, 1)
