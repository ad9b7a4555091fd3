import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mouthwarp.core import (
    AffineTransform,
    CropSpec,
    LandmarkFrame,
    LandmarkWindow,
    align_face,
    crop_image_at,
    crop_mouth,
    crop_origin,
    load_landmarks,
    mouth_center,
    save_landmarks,
)
from mouthwarp.errors import (
    ConventionError,
    DegenerateGeometryError,
    InvalidInputError,
)


def mouth_frame(lips, jaw=None):
    """Assemble a 39-point frame from 20 lip points and 19 jaw points."""
    lips = np.asarray(lips, dtype=float)
    if jaw is None:
        jaw = np.tile([50.0, 120.0], (19, 1)) + np.arange(19)[:, None] * [1.0, 0.0]
    return np.vstack([lips, jaw])


class TestMouthCenter:
    def test_all_lips_at_one_point(self):
        frame = mouth_frame(np.tile([10.0, 20.0], (20, 1)))
        assert np.allclose(mouth_center(frame), [10.0, 20.0])

    def test_regular_20gon_center(self):
        angles = np.linspace(0, 2 * np.pi, 20, endpoint=False)
        lips = np.stack([74 + 30 * np.cos(angles), 74 + 30 * np.sin(angles)], axis=1)
        assert np.allclose(mouth_center(mouth_frame(lips)), [74.0, 74.0], atol=1e-12)

    def test_random_matches_summation_oracle(self):
        rng = np.random.default_rng(7)
        lips = rng.uniform(0, 148, (20, 2))
        center = mouth_center(mouth_frame(lips))
        # independent oracle: plain scalar accumulation
        sx = sy = 0.0
        for x, y in lips:
            sx += x
            sy += y
        assert np.allclose(center, [sx / 20, sy / 20], atol=1e-12)

    @given(
        dx=st.floats(-500, 500, allow_nan=False),
        dy=st.floats(-500, 500, allow_nan=False),
    )
    @settings(max_examples=30, deadline=None)
    def test_translation_equivariance(self, dx, dy):
        rng = np.random.default_rng(11)
        frame = rng.uniform(0, 148, (39, 2))
        shifted = frame + [dx, dy]
        assert np.allclose(
            mouth_center(shifted), mouth_center(frame) + [dx, dy], atol=1e-9
        )

    def test_wrong_point_count_raises(self):
        with pytest.raises(ConventionError):
            mouth_center(np.zeros((5, 2)))


class TestCrop:
    def test_crop_arithmetic(self):
        img = np.arange(300 * 300, dtype=np.uint8).reshape(300, 300)
        lips = np.tile([150.0, 150.0], (20, 1))
        crop = crop_mouth(img, mouth_frame(lips), CropSpec(side=148))
        assert crop.shape == (148, 148)
        assert np.array_equal(crop, img[76:224, 76:224])

    def test_boundary_clamps(self):
        rng = np.random.default_rng(0)
        img = rng.integers(0, 256, (200, 200), dtype=np.uint8)
        crop = crop_image_at(img, (10.0, 10.0), 148)
        # the out-of-range band replicates row/column 0
        assert np.array_equal(crop[0], crop[50])  # rows -64..0 all clamp to row 0
        assert crop.shape == (148, 148)

    def test_random_crop_matches_pixel_copy_oracle(self):
        rng = np.random.default_rng(3)
        img = rng.integers(0, 256, (60, 80, 3), dtype=np.uint8)
        center = rng.uniform(-10, 90, 2)
        side = 24
        crop = crop_image_at(img, center, side)
        ox, oy = crop_origin(center, side)
        expected = np.empty((side, side, 3), dtype=np.uint8)
        for r in range(side):
            for c in range(side):
                yy = min(max(oy + r, 0), img.shape[0] - 1)
                xx = min(max(ox + c, 0), img.shape[1] - 1)
                expected[r, c] = img[yy, xx]
        assert np.array_equal(crop, expected)

    def test_interior_crop_idempotent(self):
        rng = np.random.default_rng(5)
        img = rng.integers(0, 256, (300, 300), dtype=np.uint8)
        center = np.array([150.0, 150.0])
        once = crop_image_at(img, center, 40)
        again = crop_image_at(once, (20.0, 20.0), 40)
        assert np.array_equal(once, again)

    def test_degenerate_image_raises(self):
        with pytest.raises(InvalidInputError):
            crop_image_at(np.zeros((0, 10), dtype=np.uint8), (5, 5), 8)

    def test_odd_side_rejected(self):
        with pytest.raises(InvalidInputError):
            CropSpec(side=147)


class TestAlignFace:
    FIVE = np.array([[30.0, 40.0], [70.0, 40.0], [50.0, 60.0], [35.0, 80.0], [65.0, 80.0]])

    def test_identity(self):
        t = align_face(self.FIVE, self.FIVE)
        assert np.allclose(t.matrix, AffineTransform.identity().matrix, atol=1e-10)

    def test_pure_translation(self):
        t = align_face(self.FIVE + [5.0, -3.0], self.FIVE)
        assert np.allclose(t.matrix[:, :2], np.eye(2), atol=1e-9)
        assert np.allclose(t.matrix[:, 2], [-5.0, 3.0], atol=1e-9)

    def test_random_matches_normal_equations_oracle(self):
        rng = np.random.default_rng(9)
        src = self.FIVE + rng.normal(0, 4, (5, 2))
        dst = self.FIVE + rng.normal(0, 4, (5, 2))
        t = align_face(src, dst)
        design = np.hstack([src, np.ones((5, 1))])
        expected = np.linalg.solve(design.T @ design, design.T @ dst).T
        assert np.allclose(t.matrix, expected, atol=1e-8)

    def test_self_alignment_identity(self):
        rng = np.random.default_rng(13)
        pts = rng.uniform(0, 100, (5, 2))
        t = align_face(pts, pts)
        assert np.max(np.abs(t.matrix - AffineTransform.identity().matrix)) <= 1e-10

    def test_collinear_raises(self):
        line = np.stack([np.arange(5.0), 2 * np.arange(5.0)], axis=1)
        with pytest.raises(DegenerateGeometryError):
            align_face(line, self.FIVE)

    def test_residual_at_least_squares_optimum(self):
        rng = np.random.default_rng(21)
        src = self.FIVE + rng.normal(0, 3, (5, 2))
        dst = self.FIVE + rng.normal(0, 3, (5, 2))
        t = align_face(src, dst)
        ours = np.sum((t.apply(src) - dst) ** 2)
        for _ in range(50):  # no random affine does better
            m = t.matrix + rng.normal(0, 1e-3, (2, 3))
            other = np.sum((AffineTransform(m).apply(src) - dst) ** 2)
            assert ours <= other + 1e-12


class TestTypes:
    def test_landmark_frame_rejects_nan(self):
        with pytest.raises(InvalidInputError):
            LandmarkFrame(np.array([[0.0, np.nan]]))

    def test_window_shape_validation(self):
        with pytest.raises(InvalidInputError):
            LandmarkWindow(np.zeros((3, 5)))

    def test_window_is_frozen(self):
        w = LandmarkWindow(np.zeros((2, 4, 2)))
        with pytest.raises(ValueError):
            w.frames[0, 0, 0] = 1.0


class TestLandmarkFiles:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(2)
        frames = rng.uniform(0, 148, (4, 39, 2))
        path = tmp_path / "landmarks.json"
        save_landmarks(path, frames, fps=25.0)
        loaded, fps = load_landmarks(path)
        assert fps == 25.0
        assert np.allclose(loaded, frames)

    def test_schema_fields(self, tmp_path):
        path = tmp_path / "landmarks.json"
        save_landmarks(path, np.zeros((2, 3, 2)), fps=30.0)
        doc = json.loads(path.read_text())
        assert set(doc) == {"fps", "points_per_frame", "frames"}
        assert doc["points_per_frame"] == 3

    def test_malformed_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"fps": 30, "points_per_frame": 4, "frames": [[[0, 1]]]}')
        with pytest.raises(InvalidInputError):
            load_landmarks(path)
