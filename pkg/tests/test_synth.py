import filecmp
import json
from pathlib import Path

import numpy as np
import pytest

from mouthwarp.bank import build_bank, crop_local_landmarks, retrieval_distances, retrieve
from mouthwarp.core import CropSpec, LandmarkWindow
from mouthwarp.errors import InvalidInputError
from mouthwarp.metrics import lip_aperture
from mouthwarp.synth import SynthConfig, generate_clip, mouth_landmarks, write_corpus
from mouthwarp.temporal import OptimizerConfig, optimize


def tree_bytes(root: Path) -> dict:
    return {
        str(p.relative_to(root)): p.read_bytes()
        for p in sorted(root.rglob("*"))
        if p.is_file()
    }


class TestDeterminism:
    def test_same_seed_byte_identical(self, tmp_path):
        cfg = SynthConfig(seed=5, frames=8, jitter=0.7)
        write_corpus(tmp_path / "a", cfg)
        write_corpus(tmp_path / "b", cfg)
        a = tree_bytes(tmp_path / "a")
        b = tree_bytes(tmp_path / "b")
        assert a.keys() == b.keys()
        for name in a:
            assert a[name] == b[name], name

    def test_different_seeds_differ(self, tmp_path):
        write_corpus(tmp_path / "a", SynthConfig(seed=1, frames=4))
        write_corpus(tmp_path / "b", SynthConfig(seed=2, frames=4))
        assert not filecmp.cmp(tmp_path / "a" / "landmarks.json",
                               tmp_path / "b" / "landmarks.json", shallow=False)

    def test_jitter_preserves_trajectory(self):
        clean_run = generate_clip(SynthConfig(seed=9, frames=6, jitter=0.0))
        noisy_run = generate_clip(SynthConfig(seed=9, frames=6, jitter=1.0))
        assert np.array_equal(clean_run.clean_landmarks, noisy_run.clean_landmarks)
        assert np.array_equal(clean_run.frames, noisy_run.frames)
        assert not np.allclose(noisy_run.landmarks, noisy_run.clean_landmarks)


class TestGeometry:
    def test_landmark_convention(self):
        pts = mouth_landmarks(96.0, 92.0, 0.5)
        assert pts.shape == (39, 2)
        # jawline arcs below the lips
        assert pts[20:, 1].max() > pts[:20, 1].max()

    def test_aperture_follows_openness(self):
        clip = generate_clip(SynthConfig(seed=3, frames=30))
        curve = lip_aperture(clip.clean_landmarks)
        assert curve.samples.std() > 0.5  # the trajectory actually moves

    def test_corpus_files(self, tmp_path):
        write_corpus(tmp_path, SynthConfig(seed=0, frames=5, jitter=0.5))
        assert (tmp_path / "frames" / "000.png").is_file()
        assert (tmp_path / "landmarks.json").is_file()
        assert (tmp_path / "landmarks_clean.json").is_file()
        meta = json.loads((tmp_path / "meta.json").read_text())
        assert meta["frames"] == 5

    def test_no_clean_file_without_jitter(self, tmp_path):
        write_corpus(tmp_path, SynthConfig(seed=0, frames=5))
        assert not (tmp_path / "landmarks_clean.json").exists()

    def test_config_validation(self):
        with pytest.raises(InvalidInputError):
            SynthConfig(frames=0)
        with pytest.raises(InvalidInputError):
            SynthConfig(size=63)
        with pytest.raises(InvalidInputError):
            SynthConfig(jitter=-1.0)


class TestEnergyBehavior:
    def _self_bank_solution(self, jitter):
        # retrieve a clip's own windows: with jitter 0 the fits are
        # already temporally consistent and joint optimization has
        # nothing left to remove; with jitter the gap is large
        clip = generate_clip(SynthConfig(seed=101, frames=9, jitter=jitter))
        side = 64
        bank = build_bank(clip.frames, clip.landmarks, window_len=6, crop=CropSpec(side=side))
        local, _ = crop_local_landmarks(clip.landmarks, side)
        window = LandmarkWindow(local[1:7])
        _, entry = retrieve(bank, window)
        return optimize(window, entry.landmarks, side, side,
                        config=OptimizerConfig(max_iters=60))

    def test_jitter_free_naive_warp_is_near_temporal_optimum(self):
        solution = self._self_bank_solution(jitter=0.0)
        init_e_t = solution.init_report.e_t
        final_e_t = solution.final_report.e_t
        assert init_e_t - final_e_t <= 0.05 * max(init_e_t, 1e-9)
        assert init_e_t <= 1e-9  # self-retrieval leaves no temporal error

    def test_jittered_clip_leaves_a_large_gap(self):
        clip = generate_clip(SynthConfig(seed=101, frames=9, jitter=1.0))
        side = 64
        bank = build_bank(clip.frames, clip.clean_landmarks,
                          window_len=6, crop=CropSpec(side=side))
        local, _ = crop_local_landmarks(clip.landmarks, side)
        window = LandmarkWindow(local[1:7])
        _, entry = retrieve(bank, window)
        solution = optimize(window, entry.landmarks, side, side,
                            config=OptimizerConfig(max_iters=60))
        assert solution.final_report.e_t < 0.5 * solution.init_report.e_t

    def test_retrieval_distance_tracks_injected_jitter(self):
        sigma = 1.0
        clip = generate_clip(SynthConfig(seed=77, frames=12, jitter=sigma))
        side = 64
        bank = build_bank(clip.frames, clip.landmarks, window_len=6, crop=CropSpec(side=side))
        clean_local, _ = crop_local_landmarks(clip.clean_landmarks, side)
        t, p = 6, 39
        expected = t * p * 2 * sigma * np.sqrt(2 / np.pi)
        for start in (0, 3, 6):
            query = LandmarkWindow(clean_local[start:start + 6])
            index, _ = retrieve(bank, query)
            distances = retrieval_distances(bank, query)
            # exhaustive oracle: the scan is a true argmin
            brute = min(range(bank.size), key=lambda i: (distances[i], i))
            assert index == brute
            assert 0.3 * expected <= distances[index] <= 1.5 * expected
