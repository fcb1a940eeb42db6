import math

import numpy as np
import pytest

from bevkit.boxes import Box3D, bottom_points, footprint_corners


class TestBox3D:
    def test_negative_dims_rejected(self):
        with pytest.raises(ValueError):
            Box3D((0.0, 0.0, 0.0), (4.0, -2.0, 1.5), 0.0)

    def test_yaw_wrapped(self):
        box = Box3D((0.0, 0.0, 0.0), (4.0, 2.0, 1.5), yaw=math.pi + 0.25)
        assert box.yaw == pytest.approx(-math.pi + 0.25)

    def test_score_bounds(self):
        with pytest.raises(ValueError):
            Box3D((0.0, 0.0, 0.0), (4.0, 2.0, 1.5), 0.0, score=1.2)
        assert Box3D((0.0, 0.0, 0.0), (4.0, 2.0, 1.5), 0.0, score=0.5).score == 0.5


class TestBottomPoints:
    def test_axis_aligned_footprint(self):
        box = Box3D((0.0, 0.0, 1.0), (4.0, 2.0, 2.0), 0.0)
        points = bottom_points(box)
        assert points.shape == (5, 3)
        assert np.array_equal(points[0], (0.0, 0.0, 0.0))
        assert np.all(points[:, 2] == 0.0)
        corners = {(round(x, 9), round(y, 9)) for x, y in points[1:, :2]}
        assert corners == {(2.0, 1.0), (2.0, -1.0), (-2.0, -1.0), (-2.0, 1.0)}

    def test_quarter_turn_swaps_extents(self):
        box = Box3D((0.0, 0.0, 1.0), (4.0, 2.0, 2.0), math.pi / 2)
        corners = bottom_points(box)[1:, :2]
        expected = {(1.0, 2.0), (1.0, -2.0), (-1.0, -2.0), (-1.0, 2.0)}
        got = {(round(x, 9), round(y, 9)) for x, y in corners}
        assert got == expected

    def test_zero_height_bottom_center_is_center(self):
        box = Box3D((3.0, -1.0, 0.5), (4.0, 2.0, 0.0), 0.3)
        assert np.array_equal(bottom_points(box)[0], (3.0, -1.0, 0.5))

    def test_offsets_translate_with_center(self):
        base = bottom_points(Box3D((0.0, 0.0, 1.0), (4.0, 2.0, 2.0), 0.7))
        moved = bottom_points(Box3D((5.0, -3.0, 1.0), (4.0, 2.0, 2.0), 0.7))
        assert np.abs((moved - base) - np.array([5.0, -3.0, 0.0])).max() < 1e-12

    def test_corner_distances_preserved_under_yaw(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            dims = tuple(rng.uniform(0.5, 5.0, size=3))
            yaw = float(rng.uniform(-math.pi, math.pi))
            corners = footprint_corners(Box3D((0.0, 0.0, 0.0), dims, yaw))
            radius = math.hypot(dims[0] / 2.0, dims[1] / 2.0)
            assert np.abs(np.linalg.norm(corners, axis=1) - radius).max() < 1e-9
