"""End-to-end window processing: retrieve, warp, retarget, mask, blend.

For every stride-1 window of the query landmark sequence the pipeline
retrieves the closest texture-bank entry, fits the warp from query
coordinates to bank-crop coordinates (backward mapping), optionally
runs the joint window optimization, resamples the retrieved crops,
pastes them at the query mouth centers and fuses them into the target
face frames under the landmark-derived mouth mask.

Failures are isolated per window: a bad window is recorded and skipped,
the rest of the clip still renders.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import reporting
from .bank import TextureBank, crop_local_landmarks, retrieve
from .blending import PyramidConfig, laplacian_blend, mouth_mask, retarget
from .core import CropSpec, LandmarkWindow, mouth_center
from .energy import EnergyWeights, total_objective
from .errors import InsufficientDataError, InvalidInputError, NumericalFailureError
from .imgio import save_image
from .temporal import OptimizerConfig, WarpSolution, init_naive, optimize
from .tps import RADIAL_NORMS
from .warping import SamplingConfig, remap_window

MODES = ("naive", "temporal")


@dataclass(frozen=True)
class PipelineConfig:
    """CLI-facing knobs, validated against module preconditions at load."""

    window_len: int = 6
    crop_side: int = 148
    alpha1: float = 1.0
    alpha2: float = 1.0
    alpha3: float = 1.0
    max_iters: int = 200
    huber_eps: float = 0.1
    grad_tol: float = 1e-6
    initial_step: float = 1e-2
    backtrack_factor: float = 0.5
    min_step: float = 1e-12
    levels: int = 4
    tps_distance: str = "euclidean"
    ridge: float = 0.0
    interpolation: str = "bilinear"
    border: str = "clamp"

    def __post_init__(self):
        if self.window_len < 1:
            raise InvalidInputError(f"window_len must be at least 1, got {self.window_len}")
        if self.tps_distance not in RADIAL_NORMS:
            raise InvalidInputError(
                f"tps_distance must be one of {RADIAL_NORMS}, got {self.tps_distance!r}"
            )
        if not (np.isfinite(self.ridge) and self.ridge >= 0):
            raise InvalidInputError(f"ridge must be a nonnegative real, got {self.ridge}")
        # delegate the rest to the owning modules
        self.crop()
        self.weights()
        self.optimizer()
        self.sampling()
        self.pyramid()

    def crop(self) -> CropSpec:
        return CropSpec(side=self.crop_side)

    def weights(self) -> EnergyWeights:
        return EnergyWeights(alpha1=self.alpha1, alpha2=self.alpha2, alpha3=self.alpha3)

    def optimizer(self) -> OptimizerConfig:
        return OptimizerConfig(
            weights=self.weights(),
            max_iters=self.max_iters,
            huber_eps=self.huber_eps,
            grad_tol=self.grad_tol,
            initial_step=self.initial_step,
            backtrack_factor=self.backtrack_factor,
            min_step=self.min_step,
        )

    def sampling(self) -> SamplingConfig:
        return SamplingConfig(interpolation=self.interpolation, border=self.border)

    def pyramid(self) -> PyramidConfig:
        return PyramidConfig(levels=self.levels)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise InvalidInputError(f"{path}: not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise InvalidInputError(f"{path}: config must be a JSON object")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise InvalidInputError(f"{path}: unknown config keys {sorted(unknown)}")
        return cls(**doc)

    def overridden(self, **overrides) -> "PipelineConfig":
        """New config with the non-None overrides applied (flags win)."""
        changes = {k: v for k, v in overrides.items() if v is not None}
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class WindowOutcome:
    index: int
    start: int
    retrieved_index: int | None = None
    retrieved_distance: float | None = None
    solution: WarpSolution | None = None
    frames: np.ndarray | None = None
    masks: np.ndarray | None = None
    error: str | None = None

    def report_entry(self) -> dict:
        entry = {
            "index": self.index,
            "start": self.start,
            "retrieved_index": self.retrieved_index,
            "retrieved_distance": self.retrieved_distance,
            "error": self.error,
        }
        if self.solution is not None:
            entry.update(json.loads(self.solution.to_json()))
        return entry


def process_window(bank: TextureBank, query_full: np.ndarray, query_local: np.ndarray,
                   faces: np.ndarray, config: PipelineConfig, mode: str) -> WindowOutcome:
    """Run one window through retrieve/warp/composite. Raises on failure."""
    if mode not in MODES:
        raise InvalidInputError(f"mode must be one of {MODES}, got {mode!r}")
    window = LandmarkWindow(query_local, fps=bank.fps)
    index, entry = retrieve(bank, window)
    distance = float(np.sum(np.abs(entry.landmarks.frames - query_local)))

    naive = init_naive(window, entry.landmarks, ridge=config.ridge, norm=config.tps_distance)
    side = bank.crop.side
    if mode == "temporal":
        solution = optimize(
            window, entry.landmarks, side, side,
            config=config.optimizer(), ridge=config.ridge,
            norm=config.tps_distance, initial=naive,
        )
    else:
        report = total_objective(naive, window, entry.landmarks, side, side, config.weights())
        solution = WarpSolution(
            params=naive,
            init_report=report,
            final_report=report,
            iterations=0,
            converged=True,
            objective=report.l_tw,
            objective_history=(report.l_tw,),
        )

    warped = remap_window(entry.images, solution.params, config.sampling())
    height, width = faces.shape[1:3]
    out_frames = []
    masks = []
    for t in range(window.length):
        center = mouth_center(query_full[t])
        pasted = retarget(faces[t], warped[t], center)
        mask = mouth_mask(query_full[t], width, height)
        out_frames.append(laplacian_blend(pasted, faces[t], mask, config.pyramid()))
        masks.append(mask)
    return WindowOutcome(
        index=0,
        start=0,
        retrieved_index=index,
        retrieved_distance=distance,
        solution=solution,
        frames=np.stack(out_frames),
        masks=np.stack(masks),
    )


def run_warp(bank: TextureBank, query_landmarks: np.ndarray, faces: np.ndarray,
             out_dir, mode: str, config: PipelineConfig,
             emit_masks: bool = False) -> dict:
    """Process every stride-1 query window; write frames, report, figures.

    Returns the report dict. ``failures`` counts windows that raised;
    their entries carry the diagnostic instead of results.
    """
    query = np.asarray(query_landmarks, dtype=np.float64)
    faces = np.asarray(faces)
    if query.ndim != 3 or query.shape[2] != 2:
        raise InvalidInputError(f"query landmarks must be (F, P, 2), got {query.shape}")
    if faces.ndim not in (3, 4) or faces.shape[0] < query.shape[0]:
        raise InvalidInputError(
            f"need one face frame per query frame, got {faces.shape[0]} faces "
            f"for {query.shape[0]} query frames"
        )
    if config.window_len < 3:
        raise InvalidInputError("warping needs window_len >= 3 for the temporal term")
    if query.shape[0] < config.window_len:
        raise InsufficientDataError(
            f"query of {query.shape[0]} frames is shorter than the window ({config.window_len})"
        )

    local, _ = crop_local_landmarks(query, bank.crop.side)
    out_root = Path(out_dir)
    out_root.mkdir(parents=True, exist_ok=True)

    outcomes = []
    n_windows = query.shape[0] - config.window_len + 1
    for k in range(n_windows):
        window_dir = out_root / "windows" / f"{k:04d}"
        try:
            outcome = process_window(
                bank,
                query[k:k + config.window_len],
                local[k:k + config.window_len],
                faces[k:k + config.window_len],
                config,
                mode,
            )
            outcome = dataclasses.replace(outcome, index=k, start=k)
            for t in range(outcome.frames.shape[0]):
                save_image(window_dir / f"{t:03d}.png", outcome.frames[t])
                if emit_masks:
                    save_image(window_dir / f"mask_{t:03d}.png",
                               (outcome.masks[t] * 255).astype(np.uint8))
        except (InvalidInputError, NumericalFailureError) as exc:
            outcome = WindowOutcome(index=k, start=k, error=f"{type(exc).__name__}: {exc}")
        outcomes.append(outcome)

    report = {
        "mode": mode,
        "config": config.as_dict(),
        "windows": [o.report_entry() for o in outcomes],
        "failures": sum(1 for o in outcomes if o.error is not None),
    }
    (out_root / "report.json").write_text(json.dumps(report, sort_keys=True))
    reporting.write_energy_outputs(out_root, report)
    return report
