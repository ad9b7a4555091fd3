"""Mouth masking and seamless compositing.

The mouth mask is the scanline fill of the closed polygon formed by the
uppermost landmark followed by the jawline points in index order. The
warped mouth is pasted onto the target face at the mouth center and the
result is fused with the original face through Laplacian pyramid
blending: band-pass decompositions of foreground and background are
mixed level-wise under a Gaussian pyramid of the mask, then collapsed.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import convolve1d

from .core import require_mouth_convention, round_half_up, JAW_SLICE
from .errors import DegenerateMaskError, InvalidInputError

#: 5-tap binomial smoothing kernel used by every pyramid stage.
PYRAMID_KERNEL = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0


@dataclass(frozen=True)
class PyramidConfig:
    levels: int = 4

    def __post_init__(self):
        if self.levels < 1:
            raise InvalidInputError(f"pyramid needs at least 1 level, got {self.levels}")


def mouth_mask(inferred, width: int, height: int) -> np.ndarray:
    """Binary 0/1 mask of the mouth region, shape (height, width) uint8.

    Pixel centers are tested with the even-odd rule against the polygon
    [uppermost landmark, jawline in index order], closed. Ties for the
    uppermost point resolve to the lowest landmark index.
    """
    pts = require_mouth_convention(inferred)
    if width < 1 or height < 1:
        raise InvalidInputError(f"mask grid must be at least 1x1, got {width}x{height}")
    apex = int(np.argmin(pts[:, 1]))
    polygon = np.vstack([pts[apex:apex + 1], pts[JAW_SLICE]])

    # Shoelace area of the closed polygon.
    x, y = polygon[:, 0], polygon[:, 1]
    area = 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))
    if abs(area) < 1e-9:
        raise DegenerateMaskError("mask polygon has zero area")

    starts = polygon
    ends = np.roll(polygon, -1, axis=0)
    mask = np.zeros((height, width), dtype=np.uint8)
    columns = np.arange(width, dtype=np.float64)
    for row in range(height):
        yc = float(row)
        y1, y2 = starts[:, 1], ends[:, 1]
        crossing = ((y1 <= yc) & (yc < y2)) | ((y2 <= yc) & (yc < y1))
        if not np.any(crossing):
            continue
        t = (yc - y1[crossing]) / (y2[crossing] - y1[crossing])
        xs = np.sort(starts[crossing, 0] + t * (ends[crossing, 0] - starts[crossing, 0]))
        # even-odd: inside iff an odd number of crossings lie strictly right
        right = len(xs) - np.searchsorted(xs, columns, side="right")
        mask[row] = (right % 2).astype(np.uint8)

    if mask.min() == mask.max():
        raise DegenerateMaskError("mask polygon rasterizes to a single value")
    return mask


def _blur(arr: np.ndarray) -> np.ndarray:
    """Separable binomial blur, clamp-to-edge borders, spatial axes only."""
    out = convolve1d(arr, PYRAMID_KERNEL, axis=0, mode="nearest")
    return convolve1d(out, PYRAMID_KERNEL, axis=1, mode="nearest")


def _down(arr: np.ndarray) -> np.ndarray:
    return _blur(arr)[::2, ::2]


@functools.lru_cache(maxsize=32)
def _up_normalizer(height: int, width: int) -> np.ndarray:
    comb = np.zeros((height, width), dtype=np.float64)
    comb[::2, ::2] = 1.0
    kernel = 2.0 * PYRAMID_KERNEL
    den = convolve1d(comb, kernel, axis=0, mode="constant", cval=0.0)
    den = convolve1d(den, kernel, axis=1, mode="constant", cval=0.0)
    den.flags.writeable = False
    return den


def _up(arr: np.ndarray, shape) -> np.ndarray:
    """Zero-insert upsample to ``shape``, normalized so constants survive."""
    target = np.zeros(shape[:2] + arr.shape[2:], dtype=np.float64)
    target[::2, ::2] = arr
    kernel = 2.0 * PYRAMID_KERNEL
    num = convolve1d(target, kernel, axis=0, mode="constant", cval=0.0)
    num = convolve1d(num, kernel, axis=1, mode="constant", cval=0.0)
    den = _up_normalizer(shape[0], shape[1])
    if target.ndim == 3:
        den = den[..., None]
    return num / den


def laplacian_blend(fg: np.ndarray, bg: np.ndarray, mask: np.ndarray,
                    config: PyramidConfig = PyramidConfig()) -> np.ndarray:
    """Compose fg over bg under the mask via Laplacian pyramids.

    The binary mask is smoothed once before the pyramid is built, so a
    single-level blend reduces to a per-pixel linear mix with the
    once-smoothed mask. Output is clamped to 0..255 uint8.
    """
    fg = np.asarray(fg)
    bg = np.asarray(bg)
    m = np.asarray(mask)
    if fg.shape != bg.shape:
        raise InvalidInputError(f"fg/bg shapes differ: {fg.shape} vs {bg.shape}")
    if m.shape != fg.shape[:2]:
        raise InvalidInputError(f"mask shape {m.shape} does not match images {fg.shape[:2]}")
    if not np.all((m == 0) | (m == 1)):
        raise InvalidInputError("mask values must be 0 or 1")
    if min(fg.shape[0], fg.shape[1]) < 2 ** config.levels:
        raise InvalidInputError(
            f"image dimensions {fg.shape[:2]} cannot support {config.levels} pyramid levels"
        )

    levels = config.levels
    gauss_f = [fg.astype(np.float64)]
    gauss_b = [bg.astype(np.float64)]
    gauss_m = [_blur(m.astype(np.float64))]
    for _ in range(levels - 1):
        gauss_f.append(_down(gauss_f[-1]))
        gauss_b.append(_down(gauss_b[-1]))
        gauss_m.append(_down(gauss_m[-1]))

    blended = []
    for i in range(levels):
        if i < levels - 1:
            lap_f = gauss_f[i] - _up(gauss_f[i + 1], gauss_f[i].shape)
            lap_b = gauss_b[i] - _up(gauss_b[i + 1], gauss_b[i].shape)
        else:
            lap_f = gauss_f[i]
            lap_b = gauss_b[i]
        weight = gauss_m[i] if lap_f.ndim == 2 else gauss_m[i][..., None]
        blended.append(weight * lap_f + (1.0 - weight) * lap_b)

    result = blended[-1]
    for i in range(levels - 2, -1, -1):
        result = _up(result, blended[i].shape) + blended[i]
    return np.clip(np.rint(result), 0, 255).astype(np.uint8)


def retarget(face: np.ndarray, mouth_crop: np.ndarray, center) -> np.ndarray:
    """Paste the crop so its center pixel lands at the rounded center.

    Parts of the crop falling outside the face are dropped; the crop may
    not exceed the face in either dimension.
    """
    face = np.asarray(face)
    crop = np.asarray(mouth_crop)
    if face.ndim != crop.ndim or (face.ndim == 3 and face.shape[2] != crop.shape[2]):
        raise InvalidInputError(
            f"face and crop must share channel layout, got {face.shape} and {crop.shape}"
        )
    if crop.shape[0] > face.shape[0] or crop.shape[1] > face.shape[1]:
        raise InvalidInputError(
            f"crop {crop.shape[:2]} does not fit the face frame {face.shape[:2]}"
        )
    cx, cy = round_half_up(np.asarray(center, dtype=np.float64))
    ox = int(cx) - crop.shape[1] // 2
    oy = int(cy) - crop.shape[0] // 2

    x0 = max(ox, 0)
    y0 = max(oy, 0)
    x1 = min(ox + crop.shape[1], face.shape[1])
    y1 = min(oy + crop.shape[0], face.shape[0])
    out = face.copy()
    if x1 > x0 and y1 > y0:
        out[y0:y1, x0:x1] = crop[y0 - oy:y1 - oy, x0 - ox:x1 - ox]
    return out
