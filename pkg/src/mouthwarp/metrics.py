"""Non-neural evaluation metrics: lip-aperture style similarity and
photometric error.

The aperture curve tracks the vertical opening of the inner lips over
time. Two curves are compared by the intersection-over-union of the
regions under them on a shared time grid, which reduces to
``sum(min) / sum(max)``. Photometric error is the mean absolute
intensity difference on the 0-255 scale, with an optional region mask.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import INNER_LIP_PAIRS, DEFAULT_FPS, require_mouth_convention
from .errors import InvalidInputError, UndefinedMetricError


@dataclass(frozen=True)
class ApertureCurve:
    """Per-frame lip opening in pixels."""

    samples: np.ndarray
    fps: float = DEFAULT_FPS

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.float64).reshape(-1)
        if arr.size < 1:
            raise InvalidInputError("aperture curve needs at least one sample")
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise InvalidInputError("aperture samples must be finite and nonnegative")
        object.__setattr__(self, "samples", arr)

    @property
    def length(self) -> int:
        return self.samples.shape[0]


def lip_aperture(landmarks, pairs=INNER_LIP_PAIRS, fps: float = DEFAULT_FPS) -> ApertureCurve:
    """Mean vertical distance over the inner-lip pairs, per frame."""
    arr = np.asarray(landmarks, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise InvalidInputError(f"landmark sequence must be (F, P, 2), got {arr.shape}")
    for frame in arr:
        require_mouth_convention(frame)
    upper = np.array([p[0] for p in pairs])
    lower = np.array([p[1] for p in pairs])
    gaps = np.abs(arr[:, lower, 1] - arr[:, upper, 1])
    return ApertureCurve(samples=gaps.mean(axis=1), fps=fps)


def _resample(samples: np.ndarray, length: int) -> np.ndarray:
    if samples.shape[0] == length:
        return samples
    if samples.shape[0] == 1:
        return np.full(length, samples[0])
    src = np.linspace(0.0, 1.0, samples.shape[0])
    dst = np.linspace(0.0, 1.0, length)
    return np.interp(dst, src, samples)


def ssiou(a: ApertureCurve, b: ApertureCurve) -> float:
    """IOU of the areas under two aperture curves, in [0, 1].

    Curves of different lengths are linearly resampled onto the longer
    one's grid. Undefined when both curves are identically zero.
    """
    length = max(a.length, b.length)
    sa = _resample(a.samples, length)
    sb = _resample(b.samples, length)
    union = np.maximum(sa, sb).sum()
    if union == 0.0:
        raise UndefinedMetricError("both aperture curves are identically zero")
    return float(np.minimum(sa, sb).sum() / union)


def photometric_error(gen: np.ndarray, gt: np.ndarray,
                      mask: np.ndarray | None = None) -> tuple[float, np.ndarray]:
    """Mean absolute intensity difference and its per-pixel map.

    ``gen`` and ``gt`` are (T, H, W[, C]) uint8 windows. The map is the
    per-pixel difference averaged over frames and channels; the scalar
    averages the map over masked pixels (all pixels when no mask).
    """
    gen = np.asarray(gen)
    gt = np.asarray(gt)
    if gen.shape != gt.shape:
        raise InvalidInputError(f"window shapes differ: {gen.shape} vs {gt.shape}")
    if gen.ndim not in (3, 4):
        raise InvalidInputError(f"windows must be (T, H, W[, C]), got shape {gen.shape}")
    diff = np.abs(gen.astype(np.float64) - gt.astype(np.float64))
    distance_map = diff.mean(axis=0) if gen.ndim == 3 else diff.mean(axis=(0, 3))
    if mask is None:
        return float(distance_map.mean()), distance_map
    m = np.asarray(mask)
    if m.shape != distance_map.shape:
        raise InvalidInputError(
            f"mask shape {m.shape} does not match frames {distance_map.shape}"
        )
    selected = m != 0
    if not np.any(selected):
        raise InvalidInputError("mask selects no pixels")
    return float(distance_map[selected].mean()), distance_map
