"""PNG image loading and saving (8-bit, 1 or 3 channels)."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from .errors import InvalidInputError


def load_image(path) -> np.ndarray:
    """Read a PNG as uint8, shape (H, W) or (H, W, 3)."""
    with PILImage.open(path) as img:
        if img.mode in ("L", "RGB"):
            arr = np.asarray(img)
        elif img.mode in ("I", "I;16", "LA"):
            arr = np.asarray(img.convert("L"))
        else:  # palette and alpha variants flatten to RGB
            arr = np.asarray(img.convert("RGB"))
    return arr.astype(np.uint8)


def save_image(path, array: np.ndarray) -> None:
    arr = np.asarray(array)
    if arr.dtype != np.uint8:
        raise InvalidInputError(f"images are 8-bit, got dtype {arr.dtype}")
    if arr.ndim == 2:
        img = PILImage.fromarray(arr, mode="L")
    elif arr.ndim == 3 and arr.shape[2] == 3:
        img = PILImage.fromarray(arr, mode="RGB")
    else:
        raise InvalidInputError(f"unsupported image shape {arr.shape}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    img.save(path, format="PNG")


def load_frame_dir(directory) -> np.ndarray:
    """Stack every PNG in a directory, sorted by filename."""
    root = Path(directory)
    files = sorted(root.glob("*.png"))
    if not files:
        raise InvalidInputError(f"{root} contains no PNG frames")
    frames = [load_image(f) for f in files]
    shapes = {f.shape for f in frames}
    if len(shapes) != 1:
        raise InvalidInputError(f"{root}: frames disagree on shape: {sorted(shapes)}")
    return np.stack(frames)


def save_frame_dir(directory, frames: np.ndarray) -> list:
    """Write frames as zero-padded ``{index}.png``; returns the paths."""
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, frame in enumerate(np.asarray(frames)):
        p = root / f"{i:03d}.png"
        save_image(p, frame)
        paths.append(p)
    return paths
