import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mouthwarp.bank import (
    build_bank,
    crop_local_landmarks,
    landmark_l1,
    load_bank,
    retrieve,
    retrieval_distances,
    save_bank,
    TextureBank,
)
from mouthwarp.core import CropSpec, LandmarkWindow, crop_image_at, crop_origin, mouth_center
from mouthwarp.errors import EmptyBankError, InsufficientDataError, InvalidInputError


def synthetic_clip(rng, frames, size=96):
    """Frames plus 39-point landmarks whose lip mean stays inside the canvas."""
    imgs = rng.integers(0, 256, (frames, size, size, 3), dtype=np.uint8)
    landmarks = np.empty((frames, 39, 2))
    for t in range(frames):
        center = np.array([size / 2, size / 2]) + rng.normal(0, 3, 2)
        landmarks[t, :20] = center + rng.normal(0, 5, (20, 2))
        landmarks[t, 20:] = center + rng.normal(0, 12, (19, 2))
    return imgs, landmarks


class TestBuildBank:
    def test_single_entry_clip(self):
        rng = np.random.default_rng(0)
        imgs, lms = synthetic_clip(rng, 6)
        bank = build_bank(imgs, lms, window_len=6, crop=CropSpec(side=48))
        assert bank.size == 1

    def test_entry_counting(self):
        rng = np.random.default_rng(1)
        imgs, lms = synthetic_clip(rng, 17)
        bank = build_bank(imgs, lms, window_len=6, crop=CropSpec(side=48))
        assert bank.size == 17 - 6 + 1

    def test_too_short_clip(self):
        rng = np.random.default_rng(2)
        imgs, lms = synthetic_clip(rng, 5)
        with pytest.raises(InsufficientDataError):
            build_bank(imgs, lms, window_len=6, crop=CropSpec(side=48))

    def test_matches_slicing_oracle(self):
        rng = np.random.default_rng(3)
        imgs, lms = synthetic_clip(rng, 10)
        side = 48
        bank = build_bank(imgs, lms, window_len=4, crop=CropSpec(side=side))
        for k in (0, 3, 6):
            for t in range(4):
                frame = lms[k + t]
                center = mouth_center(frame)
                expected_img = crop_image_at(imgs[k + t], center, side)
                origin = crop_origin(center, side)
                assert np.array_equal(bank.images[k, t], expected_img)
                assert np.allclose(bank.landmarks[k, t], frame - origin)

    def test_crop_local_origins(self):
        rng = np.random.default_rng(4)
        _, lms = synthetic_clip(rng, 5)
        local, origins = crop_local_landmarks(lms, 48)
        assert origins.shape == (5, 2)
        assert np.allclose(local + origins[:, None, :], lms)


class TestLandmarkL1:
    def test_identical_windows(self):
        rng = np.random.default_rng(5)
        w = rng.uniform(0, 100, (6, 39, 2))
        assert landmark_l1(w, w) == 0.0

    def test_uniform_unit_shift(self):
        rng = np.random.default_rng(6)
        a = rng.uniform(0, 100, (6, 39, 2))
        assert landmark_l1(a, a + [1.0, 0.0]) == pytest.approx(234.0, abs=1e-9)

    def test_matches_double_loop_oracle(self):
        rng = np.random.default_rng(7)
        a = rng.uniform(0, 100, (4, 7, 2))
        b = rng.uniform(0, 100, (4, 7, 2))
        total = 0.0
        for t in range(4):
            for i in range(7):
                total += abs(a[t, i, 0] - b[t, i, 0]) + abs(a[t, i, 1] - b[t, i, 1])
        assert landmark_l1(a, b) == pytest.approx(total, rel=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(InvalidInputError):
            landmark_l1(np.zeros((2, 3, 2)), np.zeros((3, 3, 2)))

    @given(st.integers(0, 2 ** 31 - 1))
    @settings(max_examples=25, deadline=None)
    def test_metric_properties(self, seed):
        rng = np.random.default_rng(seed)
        a, b, c = rng.uniform(0, 50, (3, 3, 5, 2))
        dab = landmark_l1(a, b)
        assert dab == pytest.approx(landmark_l1(b, a), rel=1e-12)  # symmetry
        assert dab >= 0
        assert landmark_l1(a, a) == 0.0
        assert dab <= landmark_l1(a, c) + landmark_l1(c, b) + 1e-9  # triangle


class TestRetrieve:
    def bank_of(self, rng, entries, t=3, p=5):
        landmarks = rng.uniform(0, 48, (entries, t, p, 2))
        images = rng.integers(0, 256, (entries, t, 48, 48), dtype=np.uint8)
        return TextureBank(
            landmarks=landmarks, images=images,
            starts=tuple(range(entries)), window_len=t, crop=CropSpec(side=48),
        )

    def test_exact_member_query(self):
        rng = np.random.default_rng(8)
        bank = self.bank_of(rng, 10)
        idx, entry = retrieve(bank, LandmarkWindow(bank.landmarks[3]))
        assert idx == 3
        assert np.allclose(entry.landmarks.frames, bank.landmarks[3])

    def test_single_entry_bank(self):
        rng = np.random.default_rng(9)
        bank = self.bank_of(rng, 1)
        idx, _ = retrieve(bank, LandmarkWindow(rng.uniform(0, 48, (3, 5, 2))))
        assert idx == 0

    def test_matches_brute_force_argmin(self):
        rng = np.random.default_rng(10)
        bank = self.bank_of(rng, 50)
        for _ in range(20):
            query = rng.uniform(0, 48, (3, 5, 2))
            idx, _ = retrieve(bank, query)
            dists = [landmark_l1(bank.landmarks[i], query) for i in range(50)]
            best = min(range(50), key=lambda i: (dists[i], i))
            assert idx == best

    def test_tie_breaks_to_lowest_index(self):
        rng = np.random.default_rng(11)
        bank = self.bank_of(rng, 6)
        duplicated = np.array(bank.landmarks)
        duplicated[4] = duplicated[1]  # same distance as entry 1
        bank = TextureBank(
            landmarks=duplicated, images=bank.images,
            starts=bank.starts, window_len=3, crop=CropSpec(side=48),
        )
        idx, _ = retrieve(bank, LandmarkWindow(duplicated[1]))
        assert idx == 1

    def test_appending_worse_entries_is_invariant(self):
        rng = np.random.default_rng(12)
        bank = self.bank_of(rng, 8)
        query = rng.uniform(0, 48, (3, 5, 2))
        idx, _ = retrieve(bank, query)
        worst = retrieval_distances(bank, query).max()
        far = np.array(bank.landmarks[idx]) + 10 * worst
        grown = TextureBank(
            landmarks=np.concatenate([bank.landmarks, far[None]]),
            images=np.concatenate([bank.images, bank.images[:1]]),
            starts=bank.starts + (99,), window_len=3, crop=CropSpec(side=48),
        )
        idx2, _ = retrieve(grown, query)
        assert idx2 == idx

    def test_empty_bank(self):
        rng = np.random.default_rng(13)
        bank = self.bank_of(rng, 2)
        empty = TextureBank(
            landmarks=bank.landmarks[:0], images=bank.images[:0],
            starts=(), window_len=3, crop=CropSpec(side=48),
        )
        with pytest.raises(EmptyBankError):
            retrieve(empty, LandmarkWindow(np.zeros((3, 5, 2))))

    def test_query_shape_mismatch(self):
        rng = np.random.default_rng(14)
        bank = self.bank_of(rng, 3)
        with pytest.raises(InvalidInputError):
            retrieve(bank, np.zeros((2, 5, 2)))


class TestPersistence:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(15)
        imgs, lms = synthetic_clip(rng, 8)
        bank = build_bank(imgs, lms, window_len=4, crop=CropSpec(side=48), fps=25.0)
        save_bank(bank, tmp_path / "bank")
        loaded = load_bank(tmp_path / "bank")
        assert loaded.size == bank.size
        assert loaded.window_len == bank.window_len
        assert loaded.crop.side == bank.crop.side
        assert loaded.fps == bank.fps
        assert np.array_equal(loaded.images, bank.images)
        assert np.allclose(loaded.landmarks, bank.landmarks)

    def test_layout(self, tmp_path):
        rng = np.random.default_rng(16)
        imgs, lms = synthetic_clip(rng, 6)
        bank = build_bank(imgs, lms, window_len=6, crop=CropSpec(side=48))
        save_bank(bank, tmp_path / "bank")
        assert (tmp_path / "bank" / "manifest.json").is_file()
        assert (tmp_path / "bank" / "0000" / "000.png").is_file()
        assert (tmp_path / "bank" / "0000" / "005.png").is_file()

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(InvalidInputError):
            load_bank(tmp_path)
