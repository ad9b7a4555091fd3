import numpy as np
import pytest

from mouthwarp.errors import InvalidInputError
from mouthwarp.tps import TpsSequenceParams, solve_frame, warp_field
from mouthwarp.warping import SamplingConfig, remap_frame, remap_window

from test_tps import random_points


def identity_params(rng, hi=16.0):
    src = random_points(rng, 4, 0, hi, min_dist=1.0)
    return solve_frame(src, src)


def translation_params(rng, dx, dy, hi=16.0):
    src = random_points(rng, 4, 0, hi, min_dist=1.0)
    return solve_frame(src, src + [dx, dy])


def gradient_image(h, w, channels=None):
    ys, xs = np.mgrid[0:h, 0:w]
    base = ((xs * 7 + ys * 13) % 256).astype(np.uint8)
    if channels is None:
        return base
    return np.stack([base, base[::-1], base.T[:h, :w]], axis=2)


class TestRemapFrame:
    def test_identity_bit_exact_bilinear(self):
        rng = np.random.default_rng(0)
        img = rng.integers(0, 256, (16, 16, 3), dtype=np.uint8)
        out = remap_frame(img, identity_params(rng))
        assert np.array_equal(out, img)

    def test_identity_bit_exact_nearest(self):
        rng = np.random.default_rng(1)
        img = rng.integers(0, 256, (16, 16), dtype=np.uint8)
        out = remap_frame(img, identity_params(rng), SamplingConfig(interpolation="nearest"))
        assert np.array_equal(out, img)

    def test_integer_translation_shifts_with_clamp_fill(self):
        rng = np.random.default_rng(2)
        img = gradient_image(12, 12)
        # backward map: output(x) samples source at x + 2, i.e. content
        # shifts left by two columns and the right edge replicates
        out = remap_frame(img, translation_params(rng, 2.0, 0.0, hi=12))
        assert np.array_equal(out[:, :-2], img[:, 2:])
        assert np.array_equal(out[:, -1], img[:, -1])
        assert np.array_equal(out[:, -2], img[:, -1])

    def test_matches_scalar_sampling_oracle(self):
        rng = np.random.default_rng(3)
        img = gradient_image(10, 10, channels=3)
        src = random_points(rng, 4, 0, 10, min_dist=1.0)
        dst = src + rng.normal(0, 0.7, (4, 2))
        params = solve_frame(dst, src)  # small inverse warp
        out = remap_frame(img, params)

        field = warp_field(params, 10, 10)
        expected = np.empty_like(img)
        for y in range(10):
            for x in range(10):
                sx = min(max(field[y, x, 0], 0.0), 9.0)
                sy = min(max(field[y, x, 1], 0.0), 9.0)
                x0, y0 = int(np.floor(sx)), int(np.floor(sy))
                x1, y1 = min(x0 + 1, 9), min(y0 + 1, 9)
                fx, fy = sx - x0, sy - y0
                for c in range(3):
                    top = img[y0, x0, c] * (1 - fx) + img[y0, x1, c] * fx
                    bottom = img[y1, x0, c] * (1 - fx) + img[y1, x1, c] * fx
                    expected[y, x, c] = np.clip(np.rint(top * (1 - fy) + bottom * fy), 0, 255)
        assert np.array_equal(out, expected)

    def test_constant_border(self):
        rng = np.random.default_rng(4)
        img = np.full((8, 8), 200, dtype=np.uint8)
        params = translation_params(rng, 5.0, 0.0, hi=8)
        out = remap_frame(img, params, SamplingConfig(border="constant", constant_value=7))
        assert np.all(out[:, -4:] == 7)  # fully outside taps
        assert np.all(out[:, :3] == 200)

    def test_output_range_never_exceeds_input_range(self):
        rng = np.random.default_rng(5)
        img = rng.integers(40, 200, (12, 12), dtype=np.uint8)
        src = random_points(rng, 5, 0, 12, min_dist=1.0)
        params = solve_frame(src, src + rng.normal(0, 1.0, (5, 2)))
        out = remap_frame(img, params)
        assert out.min() >= img.min()
        assert out.max() <= img.max()


class TestRemapWindow:
    def test_identity_sequence(self):
        rng = np.random.default_rng(6)
        imgs = rng.integers(0, 256, (3, 10, 10), dtype=np.uint8)
        seq = TpsSequenceParams(tuple(identity_params(rng, hi=10) for _ in range(3)))
        assert np.array_equal(remap_window(imgs, seq), imgs)

    def test_matches_per_frame_remap(self):
        rng = np.random.default_rng(7)
        imgs = rng.integers(0, 256, (3, 10, 10, 3), dtype=np.uint8)
        frames = []
        for _ in range(3):
            src = random_points(rng, 4, 0, 10, min_dist=1.0)
            frames.append(solve_frame(src, src + rng.normal(0, 0.5, (4, 2))))
        seq = TpsSequenceParams(tuple(frames))
        out = remap_window(imgs, seq)
        for t in range(3):
            assert np.array_equal(out[t], remap_frame(imgs[t], seq.frames[t]))

    def test_count_mismatch(self):
        rng = np.random.default_rng(8)
        imgs = np.zeros((2, 8, 8), dtype=np.uint8)
        seq = TpsSequenceParams(tuple(identity_params(rng, hi=8) for _ in range(3)))
        with pytest.raises(InvalidInputError):
            remap_window(imgs, seq)


class TestSamplingConfig:
    def test_bad_values(self):
        with pytest.raises(InvalidInputError):
            SamplingConfig(interpolation="cubic")
        with pytest.raises(InvalidInputError):
            SamplingConfig(border="wrap")
        with pytest.raises(InvalidInputError):
            SamplingConfig(border="constant", constant_value=300)
