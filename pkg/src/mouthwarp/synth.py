"""Deterministic synthetic mouth clips for desk-scale evaluation.

Each clip is an ellipse-based mouth on a skin-toned canvas whose
39 landmarks follow a smooth, seeded aperture trajectory. Optional
per-landmark Gaussian jitter models landmark-measurement noise: frames
are always rendered from the smooth geometry, the emitted landmark
track carries the noise, and the noise-free track is written alongside
as ground truth. The same seed always produces byte-identical output.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import save_landmarks
from .errors import InvalidInputError
from .imgio import save_frame_dir

_BASE_SIZE = 192.0

_SKIN = np.array([205.0, 170.0, 150.0])
_LIP = np.array([158.0, 66.0, 70.0])
_CAVITY = np.array([38.0, 18.0, 20.0])
_TEETH = np.array([235.0, 228.0, 214.0])


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    frames: int = 25
    jitter: float = 0.0
    size: int = 192
    fps: float = 30.0

    def __post_init__(self):
        if self.frames < 1:
            raise InvalidInputError(f"need at least 1 frame, got {self.frames}")
        if self.size < 64 or self.size % 2 != 0:
            raise InvalidInputError(f"canvas size must be even and >= 64, got {self.size}")
        if not (np.isfinite(self.jitter) and self.jitter >= 0):
            raise InvalidInputError(f"jitter must be a nonnegative real, got {self.jitter}")


@dataclass(frozen=True)
class SynthClip:
    frames: np.ndarray  # (F, size, size, 3) uint8
    clean_landmarks: np.ndarray  # (F, 39, 2)
    landmarks: np.ndarray  # clean plus jitter; equals clean when jitter = 0
    meta: dict


def _mouth_shape(openness: float, scale: float):
    o = float(np.clip(openness, 0.0, 1.0))
    a_out = 40.0 * scale
    b_out = (9.0 + 15.0 * o) * scale
    a_in = 24.0 * scale
    b_in = max(0.8 * scale, 0.55 * (b_out - 8.0 * scale))
    return a_out, b_out, a_in, b_in


def mouth_landmarks(cx: float, cy: float, openness: float, scale: float = 1.0) -> np.ndarray:
    """The 39-point mouth at a given center and opening fraction."""
    a_out, b_out, a_in, b_in = _mouth_shape(openness, scale)

    outer = np.pi + np.arange(12) * (np.pi / 6.0)
    inner = np.pi + np.arange(8) * (np.pi / 4.0)
    jaw = -0.08 * np.pi + np.arange(19) * (1.16 * np.pi / 18.0)

    pts = np.empty((39, 2))
    pts[0:12, 0] = cx + a_out * np.cos(outer)
    pts[0:12, 1] = cy + b_out * np.sin(outer)
    pts[12:20, 0] = cx + a_in * np.cos(inner)
    pts[12:20, 1] = cy + b_in * np.sin(inner)
    pts[20:39, 0] = cx + 60.0 * scale * np.cos(jaw)
    pts[20:39, 1] = (cy - 6.0 * scale) + 52.0 * scale * np.sin(jaw)
    return pts


def _soft_region(distance_px: np.ndarray, edge: float = 1.5) -> np.ndarray:
    return np.clip(distance_px / edge + 0.5, 0.0, 1.0)


def render_mouth_frame(size: int, cx: float, cy: float, openness: float,
                       scale: float = 1.0) -> np.ndarray:
    """Render one frame of the synthetic mouth, (size, size, 3) uint8."""
    a_out, b_out, a_in, b_in = _mouth_shape(openness, scale)
    ys, xs = np.mgrid[0:size, 0:size].astype(np.float64)

    canvas = np.empty((size, size, 3))
    canvas[:] = _SKIN
    canvas += ((ys - size / 2.0) / size * 24.0)[..., None] * np.array([0.9, 1.0, 1.1])
    canvas += ((xs - size / 2.0) / size * 10.0)[..., None] * np.array([1.0, 0.8, 0.6])

    rho_out = np.sqrt(((xs - cx) / a_out) ** 2 + ((ys - cy) / b_out) ** 2)
    rho_in = np.sqrt(((xs - cx) / a_in) ** 2 + ((ys - cy) / max(b_in, 1e-6)) ** 2)
    lip_cov = _soft_region((1.0 - rho_out) * min(a_out, b_out))
    cavity_cov = _soft_region((1.0 - rho_in) * min(a_in, b_in))

    canvas = canvas * (1.0 - lip_cov[..., None]) + _LIP * lip_cov[..., None]
    canvas = canvas * (1.0 - cavity_cov[..., None]) + _CAVITY * cavity_cov[..., None]

    if b_in > 2.5 * scale:
        teeth_line = cy - 0.15 * b_in
        teeth_cov = cavity_cov * _soft_region(teeth_line - ys)
        canvas = canvas * (1.0 - teeth_cov[..., None]) + _TEETH * teeth_cov[..., None]

    return np.clip(np.rint(canvas), 0, 255).astype(np.uint8)


def generate_clip(config: SynthConfig) -> SynthClip:
    rng = np.random.default_rng(config.seed)
    scale = config.size / _BASE_SIZE
    base_cx = config.size / 2.0
    base_cy = config.size / 2.0 - 4.0 * scale

    f1 = rng.uniform(0.5, 1.0)
    f2 = rng.uniform(1.2, 2.0)
    p1, p2, p3, p4 = rng.uniform(0.0, 2.0 * np.pi, size=4)
    amp1 = rng.uniform(0.25, 0.35)
    amp2 = rng.uniform(0.05, 0.12)
    drift_x = rng.uniform(1.5, 3.0) * scale
    drift_y = rng.uniform(1.0, 2.5) * scale

    times = np.arange(config.frames) / config.fps
    openness = np.clip(
        0.55 + amp1 * np.sin(2 * np.pi * f1 * times + p1)
        + amp2 * np.sin(2 * np.pi * f2 * times + p2),
        0.08,
        1.0,
    )
    cx = base_cx + drift_x * np.sin(2 * np.pi * 0.3 * times + p3)
    cy = base_cy + drift_y * np.sin(2 * np.pi * 0.25 * times + p4)

    clean = np.stack(
        [mouth_landmarks(cx[t], cy[t], openness[t], scale) for t in range(config.frames)]
    )
    frames = np.stack(
        [render_mouth_frame(config.size, cx[t], cy[t], openness[t], scale)
         for t in range(config.frames)]
    )
    if config.jitter > 0:
        noisy = clean + rng.normal(0.0, config.jitter, size=clean.shape)
    else:
        noisy = clean.copy()

    meta = {
        "seed": config.seed,
        "frames": config.frames,
        "jitter": config.jitter,
        "size": config.size,
        "fps": config.fps,
    }
    return SynthClip(frames=frames, clean_landmarks=clean, landmarks=noisy, meta=meta)


def write_corpus(out_dir, config: SynthConfig) -> dict:
    """Render a clip to disk: frames/, landmark JSON, metadata.

    With jitter > 0 the noise-free track is written as
    ``landmarks_clean.json`` next to the jittered ``landmarks.json``.
    """
    clip = generate_clip(config)
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    save_frame_dir(root / "frames", clip.frames)
    save_landmarks(root / "landmarks.json", clip.landmarks, fps=config.fps)
    if config.jitter > 0:
        save_landmarks(root / "landmarks_clean.json", clip.clean_landmarks, fps=config.fps)
    (root / "meta.json").write_text(json.dumps(clip.meta, sort_keys=True))
    return clip.meta
