"""Sliding-window texture bank and landmark-sequence retrieval.

The bank holds every stride-1 window of (mouth landmarks, mouth crop)
pairs harvested from a clip. Landmark windows are stored in crop-local
coordinates so retrieval compares mouth shape, not head position.
Retrieval is an exhaustive scan for the entry with the smallest L1
landmark distance; at sub-minute clip lengths (at most a few hundred
entries) nothing fancier is justified.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import CropSpec, LandmarkWindow, crop_image_at, crop_origin, mouth_center
from .imgio import load_image, save_image
from .errors import EmptyBankError, InsufficientDataError, InvalidInputError

_MANIFEST = "manifest.json"


@dataclass(frozen=True)
class BankEntry:
    start: int
    landmarks: LandmarkWindow
    images: np.ndarray  # (T, side, side[, C]) uint8


@dataclass(frozen=True)
class TextureBank:
    """Ordered windows of crop-local landmarks and mouth crops."""

    landmarks: np.ndarray  # (B, T, P, 2) crop-local
    images: np.ndarray  # (B, T, side, side[, C]) uint8
    starts: tuple
    window_len: int
    crop: CropSpec
    fps: float = 30.0

    def __post_init__(self):
        lm = np.asarray(self.landmarks, dtype=np.float64)
        im = np.asarray(self.images)
        if lm.ndim != 4 or lm.shape[3] != 2:
            raise InvalidInputError(f"bank landmarks must be (B, T, P, 2), got {lm.shape}")
        if im.shape[:2] != lm.shape[:2]:
            raise InvalidInputError(
                f"bank images ({im.shape[:2]}) disagree with landmarks ({lm.shape[:2]})"
            )
        if lm.shape[1] != self.window_len:
            raise InvalidInputError(
                f"entries have {lm.shape[1]} frames but window_len is {self.window_len}"
            )
        if im.shape[2] != self.crop.side or im.shape[3] != self.crop.side:
            raise InvalidInputError(
                f"crops are {im.shape[2]}x{im.shape[3]} but the crop spec says {self.crop.side}"
            )
        if len(self.starts) != lm.shape[0]:
            raise InvalidInputError("starts must name one source frame index per entry")
        object.__setattr__(self, "landmarks", lm)
        object.__setattr__(self, "images", im)
        object.__setattr__(self, "starts", tuple(int(s) for s in self.starts))

    @property
    def size(self) -> int:
        return self.landmarks.shape[0]

    def entry(self, index: int) -> BankEntry:
        return BankEntry(
            start=self.starts[index],
            landmarks=LandmarkWindow(self.landmarks[index], fps=self.fps),
            images=self.images[index],
        )


def crop_local_landmarks(landmarks: np.ndarray, side: int) -> tuple[np.ndarray, np.ndarray]:
    """Re-express full-frame mouth landmarks in per-frame crop coordinates.

    Returns (local landmarks, per-frame crop origins), shapes (F, P, 2)
    and (F, 2).
    """
    arr = np.asarray(landmarks, dtype=np.float64)
    origins = np.stack([crop_origin(mouth_center(frame), side) for frame in arr])
    return arr - origins[:, None, :].astype(np.float64), origins


def build_bank(frames: np.ndarray, landmarks: np.ndarray, window_len: int = 6,
               crop: CropSpec = CropSpec(), fps: float = 30.0) -> TextureBank:
    """Slice a clip into stride-1 windows of cropped mouths and local landmarks."""
    frames = np.asarray(frames)
    landmarks = np.asarray(landmarks, dtype=np.float64)
    if frames.ndim not in (3, 4):
        raise InvalidInputError(f"frames must be (F, H, W[, C]), got shape {frames.shape}")
    if landmarks.ndim != 3 or landmarks.shape[2] != 2:
        raise InvalidInputError(f"landmarks must be (F, P, 2), got shape {landmarks.shape}")
    if frames.shape[0] != landmarks.shape[0]:
        raise InvalidInputError(
            f"frame count {frames.shape[0]} does not match landmark count {landmarks.shape[0]}"
        )
    if window_len < 1:
        raise InvalidInputError(f"window_len must be at least 1, got {window_len}")
    count = frames.shape[0]
    if count < window_len:
        raise InsufficientDataError(
            f"clip of {count} frames is shorter than the window length {window_len}"
        )

    local, origins = crop_local_landmarks(landmarks, crop.side)
    crops = np.stack(
        [crop_image_at(frames[t], mouth_center(landmarks[t]), crop.side) for t in range(count)]
    )
    n_entries = count - window_len + 1
    entry_lm = np.stack([local[k:k + window_len] for k in range(n_entries)])
    entry_im = np.stack([crops[k:k + window_len] for k in range(n_entries)])
    return TextureBank(
        landmarks=entry_lm,
        images=entry_im,
        starts=tuple(range(n_entries)),
        window_len=window_len,
        crop=crop,
        fps=fps,
    )


def _window_array(obj, name) -> np.ndarray:
    arr = obj.frames if isinstance(obj, LandmarkWindow) else np.asarray(obj, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise InvalidInputError(f"{name} must be a (T, P, 2) landmark window, got {arr.shape}")
    return arr


def landmark_l1(a, b) -> float:
    """Unnormalized L1 distance between two equal-shape landmark windows."""
    wa = _window_array(a, "a")
    wb = _window_array(b, "b")
    if wa.shape != wb.shape:
        raise InvalidInputError(f"window shapes differ: {wa.shape} vs {wb.shape}")
    return float(np.sum(np.abs(wa - wb)))


def retrieve(bank: TextureBank, query) -> tuple[int, BankEntry]:
    """Index and entry of the bank window closest to the query in L1.

    Ties break toward the lowest index; the scan is a true argmin.
    """
    if bank.size == 0:
        raise EmptyBankError("cannot retrieve from an empty texture bank")
    q = _window_array(query, "query")
    if q.shape != bank.landmarks.shape[1:]:
        raise InvalidInputError(
            f"query shape {q.shape} does not match bank entries {bank.landmarks.shape[1:]}"
        )
    distances = np.sum(np.abs(bank.landmarks - q[None]), axis=(1, 2, 3))
    index = int(np.argmin(distances))  # argmin returns the first minimum
    return index, bank.entry(index)


def retrieval_distances(bank: TextureBank, query) -> np.ndarray:
    """Per-entry L1 distances from the query, in bank order."""
    q = _window_array(query, "query")
    return np.sum(np.abs(bank.landmarks - q[None]), axis=(1, 2, 3))


def save_bank(bank: TextureBank, directory) -> None:
    """Persist as manifest JSON plus one PNG per window frame."""
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    entries = []
    for i in range(bank.size):
        entry_dir = root / f"{i:04d}"
        entry_dir.mkdir(exist_ok=True)
        files = []
        for t in range(bank.window_len):
            name = f"{i:04d}/{t:03d}.png"
            save_image(root / name, bank.images[i, t])
            files.append(name)
        entries.append(
            {
                "start": bank.starts[i],
                "frames": files,
                "landmarks": bank.landmarks[i].tolist(),
            }
        )
    manifest = {
        "window_len": bank.window_len,
        "crop": {"side": bank.crop.side},
        "fps": bank.fps,
        "entries": entries,
    }
    (root / _MANIFEST).write_text(json.dumps(manifest, sort_keys=True))


def load_bank(directory) -> TextureBank:
    root = Path(directory)
    path = root / _MANIFEST
    if not path.is_file():
        raise InvalidInputError(f"{root} has no bank manifest")
    doc = json.loads(path.read_text())
    window_len = int(doc["window_len"])
    crop = CropSpec(side=int(doc["crop"]["side"]))
    fps = float(doc.get("fps", 30.0))
    lm = []
    im = []
    starts = []
    for entry in doc["entries"]:
        starts.append(int(entry["start"]))
        lm.append(np.asarray(entry["landmarks"], dtype=np.float64))
        im.append(np.stack([load_image(root / name) for name in entry["frames"]]))
    if not lm:
        raise EmptyBankError(f"{root} contains an empty bank")
    return TextureBank(
        landmarks=np.stack(lm),
        images=np.stack(im),
        starts=tuple(starts),
        window_len=window_len,
        crop=crop,
        fps=fps,
    )
