"""Per-channel feature map normalization kernels.

A feature map is a (C, L) float array. ``instance_norm`` standardizes
each channel to zero mean and unit spread using the population standard
deviation, with ``eps`` added to the deviation itself; ``adain``
re-modulates the standardized channels with per-channel scale and shift
carrying style statistics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError


@dataclass(frozen=True)
class StyleParams:
    """Per-channel affine modulation: ``gamma * normalized + beta``."""

    gamma: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.gamma, dtype=np.float64).reshape(-1)
        b = np.asarray(self.beta, dtype=np.float64).reshape(-1)
        if g.shape != b.shape:
            raise InvalidInputError(f"gamma and beta lengths differ: {g.shape} vs {b.shape}")
        if not (np.all(np.isfinite(g)) and np.all(np.isfinite(b))):
            raise InvalidInputError("style parameters must be finite")
        object.__setattr__(self, "gamma", g)
        object.__setattr__(self, "beta", b)

    @property
    def channels(self) -> int:
        return self.gamma.shape[0]


def _as_feature_map(m) -> np.ndarray:
    arr = np.asarray(m, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] < 1:
        raise InvalidInputError(f"feature map must be (C, L) with L >= 1, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("feature map must be finite")
    return arr


def instance_norm(m, eps: float = 1e-5) -> np.ndarray:
    """Standardize each channel: ``(M_c - mean_c) / (std_c + eps)``."""
    arr = _as_feature_map(m)
    mean = arr.mean(axis=1, keepdims=True)
    std = arr.std(axis=1, keepdims=True)  # population (1/L) convention
    return (arr - mean) / (std + eps)


def adain(content, style: StyleParams, eps: float = 1e-5) -> np.ndarray:
    """Standardize, then apply per-channel scale/shift from the style."""
    arr = _as_feature_map(content)
    if style.channels != arr.shape[0]:
        raise InvalidInputError(
            f"style carries {style.channels} channels but the map has {arr.shape[0]}"
        )
    normalized = instance_norm(arr, eps)
    return style.gamma[:, None] * normalized + style.beta[:, None]
