"""Core geometric types, the mouth landmark convention and preprocessing ops.

Coordinates are continuous pixel positions (origin top-left, x right,
y down). Rounding to integer pixels happens only inside crop/paste and
resampling operations.

The 39-point mouth convention used throughout the package:

* indices 0-19   lip landmarks
  * 0-11  outer lip ring, index 0 at the left corner, advancing over the
          upper lip to the right corner (index 6) and back under
  * 12-19 inner lip ring, same ordering (12 left corner, 16 right corner)
* indices 20-38  jawline, ordered right to left along the jaw arc

The inner-lip pairing used for aperture measurements is
``INNER_LIP_PAIRS``: (upper index, lower index) tuples that face each
other vertically.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConventionError, DegenerateGeometryError, InvalidInputError

MOUTH_POINT_COUNT = 39
LIP_COUNT = 20
LIP_SLICE = slice(0, 20)
JAW_SLICE = slice(20, 39)
OUTER_LIP_SLICE = slice(0, 12)
INNER_LIP_SLICE = slice(12, 20)

#: (upper, lower) inner-lip index pairs, left to right.
INNER_LIP_PAIRS = ((13, 19), (14, 18), (15, 17))

DEFAULT_FPS = 30.0


def _as_points(obj, name="points") -> np.ndarray:
    """Coerce to a finite (N, 2) float64 array."""
    pts = np.asarray(getattr(obj, "points", obj), dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise InvalidInputError(f"{name} must have shape (N, 2), got {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise InvalidInputError(f"{name} must be finite")
    return pts


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, copy=True)
    out.flags.writeable = False
    return out


def round_half_up(x) -> np.ndarray:
    """Deterministic rounding, halves away from zero toward +inf."""
    return np.floor(np.asarray(x, dtype=np.float64) + 0.5).astype(np.int64)


@dataclass(frozen=True)
class LandmarkFrame:
    """An ordered set of 2-D landmarks for one frame, shape (P, 2)."""

    points: np.ndarray

    def __post_init__(self):
        pts = _as_points(self.points, "LandmarkFrame.points")
        object.__setattr__(self, "points", _freeze(pts))

    @property
    def count(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class LandmarkWindow:
    """A T x P grid of landmarks: T consecutive frames sharing P points.

    ``frames`` has shape (T, P, 2). This is the unit of retrieval,
    warping supervision and style measurement.
    """

    frames: np.ndarray
    fps: float = DEFAULT_FPS

    def __post_init__(self):
        arr = np.asarray(self.frames, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[2] != 2:
            raise InvalidInputError(
                f"LandmarkWindow.frames must have shape (T, P, 2), got {arr.shape}"
            )
        if arr.shape[0] < 1:
            raise InvalidInputError("LandmarkWindow needs at least one frame")
        if not np.all(np.isfinite(arr)):
            raise InvalidInputError("LandmarkWindow.frames must be finite")
        if not (np.isfinite(self.fps) and self.fps > 0):
            raise InvalidInputError(f"fps must be positive, got {self.fps}")
        object.__setattr__(self, "frames", _freeze(arr))

    @property
    def length(self) -> int:
        return self.frames.shape[0]

    @property
    def points_per_frame(self) -> int:
        return self.frames.shape[1]

    def frame(self, t: int) -> LandmarkFrame:
        return LandmarkFrame(self.frames[t])


@dataclass(frozen=True)
class CropSpec:
    """Square mouth crop: side length in pixels, centered on the lip mean."""

    side: int = 148

    def __post_init__(self):
        if self.side <= 0 or self.side % 2 != 0:
            raise InvalidInputError(f"crop side must be positive and even, got {self.side}")


@dataclass(frozen=True)
class AffineTransform:
    """2-D affine map ``p -> matrix[:, :2] @ p + matrix[:, 2]``."""

    matrix: np.ndarray  # (2, 3)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.shape != (2, 3):
            raise InvalidInputError(f"affine matrix must be (2, 3), got {m.shape}")
        if not np.all(np.isfinite(m)):
            raise InvalidInputError("affine matrix must be finite")
        object.__setattr__(self, "matrix", _freeze(m))

    def apply(self, points) -> np.ndarray:
        pts = _as_points(points)
        return pts @ self.matrix[:, :2].T + self.matrix[:, 2]

    @classmethod
    def identity(cls) -> "AffineTransform":
        return cls(np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]))


def require_mouth_convention(points) -> np.ndarray:
    pts = _as_points(points)
    if pts.shape[0] != MOUTH_POINT_COUNT:
        raise ConventionError(
            f"mouth convention requires {MOUTH_POINT_COUNT} landmarks, got {pts.shape[0]}"
        )
    return pts


def mouth_center(frame) -> np.ndarray:
    """Mean of the 20 lip landmarks, the crop anchor of the pipeline."""
    pts = require_mouth_convention(frame)
    return pts[LIP_SLICE].mean(axis=0)


def crop_origin(center, side: int) -> np.ndarray:
    """Top-left corner of a side x side crop centered at ``center``."""
    c = np.asarray(center, dtype=np.float64)
    return round_half_up(c) - side // 2


def crop_image_at(image: np.ndarray, center, side: int) -> np.ndarray:
    """Extract a side x side sub-image, replicating edge pixels out of bounds."""
    img = np.asarray(image)
    if img.ndim not in (2, 3):
        raise InvalidInputError(f"image must be (H, W) or (H, W, C), got shape {img.shape}")
    height, width = img.shape[:2]
    if width == 0 or height == 0:
        raise InvalidInputError("cannot crop a zero-sized image")
    ox, oy = crop_origin(center, side)
    xs = np.clip(np.arange(ox, ox + side), 0, width - 1)
    ys = np.clip(np.arange(oy, oy + side), 0, height - 1)
    return img[np.ix_(ys, xs)].copy()


def crop_mouth(image: np.ndarray, frame, spec: CropSpec = CropSpec()) -> np.ndarray:
    """Crop the mouth region around the lip-mean center of ``frame``."""
    center = mouth_center(frame)
    return crop_image_at(image, center, spec.side)


def align_face(frame, reference) -> AffineTransform:
    """Least-squares affine mapping 5 facial anchor points onto a reference.

    Both inputs carry exactly 5 points (eye centers, nose tip, mouth
    corners). Raises ``DegenerateGeometryError`` when the source points
    are collinear or coincident.
    """
    src = _as_points(frame, "frame")
    dst = _as_points(reference, "reference")
    if src.shape != (5, 2) or dst.shape != (5, 2):
        raise InvalidInputError(
            f"align_face expects two (5, 2) point sets, got {src.shape} and {dst.shape}"
        )
    design = np.hstack([src, np.ones((5, 1))])
    if np.linalg.matrix_rank(design, tol=1e-8) < 3:
        raise DegenerateGeometryError("alignment points are collinear or coincident")
    coef, _, _, _ = np.linalg.lstsq(design, dst, rcond=None)
    return AffineTransform(coef.T)


# --- landmark file format -------------------------------------------------
#
# {"fps": number, "points_per_frame": int, "frames": [[[x, y], ...], ...]}
# Coordinates in image pixels, origin top-left, y downward.


def save_landmarks(path, frames: np.ndarray, fps: float = DEFAULT_FPS) -> None:
    arr = np.asarray(frames, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise InvalidInputError(f"landmark sequence must be (F, P, 2), got {arr.shape}")
    doc = {
        "fps": float(fps),
        "points_per_frame": int(arr.shape[1]),
        "frames": arr.tolist(),
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True))


def load_landmarks(path) -> tuple[np.ndarray, float]:
    """Load a landmark sequence file, returning ((F, P, 2) array, fps)."""
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"{path}: not valid JSON: {exc}") from exc
    try:
        fps = float(doc["fps"])
        ppf = int(doc["points_per_frame"])
        frames = np.asarray(doc["frames"], dtype=np.float64)
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidInputError(f"{path}: malformed landmark document: {exc}") from exc
    if frames.ndim != 3 or frames.shape[2] != 2 or frames.shape[1] != ppf:
        raise InvalidInputError(
            f"{path}: frames shape {frames.shape} disagrees with points_per_frame={ppf}"
        )
    if not np.all(np.isfinite(frames)):
        raise InvalidInputError(f"{path}: landmark coordinates must be finite")
    return frames, fps
