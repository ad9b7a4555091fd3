"""Backward image remapping driven by warp coefficients.

Output pixel ``(x, y)`` pulls from the source image at ``f(x, y)``, so
the coefficients must map output coordinates to source coordinates (fit
them from the target landmarks to the source landmarks). Backward
mapping leaves no holes, unlike pushing source pixels forward.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .tps import TpsFrameParams, TpsSequenceParams, warp_field

INTERPOLATIONS = ("bilinear", "nearest")
BORDERS = ("clamp", "constant")


@dataclass(frozen=True)
class SamplingConfig:
    interpolation: str = "bilinear"
    border: str = "clamp"
    constant_value: int = 0

    def __post_init__(self):
        if self.interpolation not in INTERPOLATIONS:
            raise InvalidInputError(f"interpolation must be one of {INTERPOLATIONS}")
        if self.border not in BORDERS:
            raise InvalidInputError(f"border must be one of {BORDERS}")
        if not 0 <= self.constant_value <= 255:
            raise InvalidInputError(
                f"constant border value must lie in 0..255, got {self.constant_value}"
            )


def _gather(img: np.ndarray, ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
    return img[ys, xs].astype(np.float64)


def _sample(img: np.ndarray, sx: np.ndarray, sy: np.ndarray, config: SamplingConfig) -> np.ndarray:
    height, width = img.shape[:2]
    if config.interpolation == "nearest":
        xi = np.floor(sx + 0.5).astype(np.int64)
        yi = np.floor(sy + 0.5).astype(np.int64)
        if config.border == "clamp":
            return _gather(img, np.clip(yi, 0, height - 1), np.clip(xi, 0, width - 1))
        inside = (xi >= 0) & (xi < width) & (yi >= 0) & (yi < height)
        out = np.full(sx.shape + img.shape[2:], float(config.constant_value))
        out[inside] = _gather(img, yi[inside], xi[inside])
        return out

    if config.border == "clamp":
        sxc = np.clip(sx, 0.0, width - 1.0)
        syc = np.clip(sy, 0.0, height - 1.0)
        x0 = np.floor(sxc).astype(np.int64)
        y0 = np.floor(syc).astype(np.int64)
        x1 = np.minimum(x0 + 1, width - 1)
        y1 = np.minimum(y0 + 1, height - 1)
        fx = sxc - x0
        fy = syc - y0
        if img.ndim == 3:
            fx = fx[..., None]
            fy = fy[..., None]
        top = _gather(img, y0, x0) * (1.0 - fx) + _gather(img, y0, x1) * fx
        bottom = _gather(img, y1, x0) * (1.0 - fx) + _gather(img, y1, x1) * fx
        return top * (1.0 - fy) + bottom * fy

    # constant border: out-of-range taps contribute the constant value
    x0 = np.floor(sx).astype(np.int64)
    y0 = np.floor(sy).astype(np.int64)
    fx = sx - x0
    fy = sy - y0
    if img.ndim == 3:
        fx = fx[..., None]
        fy = fy[..., None]
    const = float(config.constant_value)

    def tap(yi, xi):
        inside = (xi >= 0) & (xi < width) & (yi >= 0) & (yi < height)
        vals = _gather(img, np.clip(yi, 0, height - 1), np.clip(xi, 0, width - 1))
        mask = inside if img.ndim == 2 else inside[..., None]
        return np.where(mask, vals, const)

    top = tap(y0, x0) * (1.0 - fx) + tap(y0, x0 + 1) * fx
    bottom = tap(y0 + 1, x0) * (1.0 - fx) + tap(y0 + 1, x0 + 1) * fx
    return top * (1.0 - fy) + bottom * fy


def remap_frame(image: np.ndarray, inverse_params: TpsFrameParams,
                config: SamplingConfig = SamplingConfig()) -> np.ndarray:
    """Warp one image; output matches the input's shape and dtype."""
    img = np.asarray(image)
    if img.ndim not in (2, 3):
        raise InvalidInputError(f"image must be (H, W) or (H, W, C), got shape {img.shape}")
    height, width = img.shape[:2]
    coords = warp_field(inverse_params, width, height)
    sampled = _sample(img, coords[..., 0], coords[..., 1], config)
    return np.clip(np.rint(sampled), 0, 255).astype(np.uint8)


def remap_window(images: np.ndarray, inverse_seq: TpsSequenceParams,
                 config: SamplingConfig = SamplingConfig()) -> np.ndarray:
    """Frame-wise remap of a (T, H, W[, C]) stack; frames are independent."""
    stack = np.asarray(images)
    if stack.ndim not in (3, 4):
        raise InvalidInputError(f"image window must be (T, H, W[, C]), got shape {stack.shape}")
    if stack.shape[0] != inverse_seq.length:
        raise InvalidInputError(
            f"frame count mismatch: {stack.shape[0]} images vs {inverse_seq.length} parameter frames"
        )
    return np.stack(
        [remap_frame(stack[t], inverse_seq.frames[t], config) for t in range(stack.shape[0])]
    )
