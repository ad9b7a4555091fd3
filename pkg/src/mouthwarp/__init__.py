"""Landmark-driven mouth video warping toolkit.

Retrieves mouth textures from a sliding-window bank, warps them with
thin-plate splines whose coefficients are optimized jointly over each
frame window under a temporal smoothness term, and composites the
result onto target faces with Laplacian pyramid blending.
"""

from .bank import TextureBank, build_bank, landmark_l1, load_bank, retrieve, save_bank
from .blending import PyramidConfig, laplacian_blend, mouth_mask, retarget
from .core import (
    AffineTransform,
    CropSpec,
    LandmarkFrame,
    LandmarkWindow,
    align_face,
    crop_mouth,
    load_landmarks,
    mouth_center,
    save_landmarks,
)
from .energy import (
    EnergyReport,
    EnergyWeights,
    bending_energy,
    fitting_error,
    temporal_energy,
    total_objective,
)
from .features import StyleParams, adain, instance_norm
from .metrics import ApertureCurve, lip_aperture, photometric_error, ssiou
from .pipeline import PipelineConfig, process_window, run_warp
from .synth import SynthConfig, generate_clip, write_corpus
from .temporal import (
    OptimizerConfig,
    WarpSolution,
    init_naive,
    objective_gradient,
    optimize,
    smoothed_objective,
)
from .tps import (
    TpsFrameParams,
    TpsSequenceParams,
    eval_point,
    eval_points,
    kernel_u,
    solve_frame,
    warp_field,
)
from .warping import SamplingConfig, remap_frame, remap_window

__version__ = "0.1.0"

__all__ = [
    "AffineTransform",
    "ApertureCurve",
    "CropSpec",
    "EnergyReport",
    "EnergyWeights",
    "LandmarkFrame",
    "LandmarkWindow",
    "OptimizerConfig",
    "PipelineConfig",
    "PyramidConfig",
    "SamplingConfig",
    "StyleParams",
    "SynthConfig",
    "TextureBank",
    "TpsFrameParams",
    "TpsSequenceParams",
    "WarpSolution",
    "adain",
    "align_face",
    "bending_energy",
    "build_bank",
    "crop_mouth",
    "eval_point",
    "eval_points",
    "fitting_error",
    "generate_clip",
    "init_naive",
    "instance_norm",
    "kernel_u",
    "landmark_l1",
    "laplacian_blend",
    "lip_aperture",
    "load_bank",
    "load_landmarks",
    "mouth_center",
    "mouth_mask",
    "objective_gradient",
    "optimize",
    "photometric_error",
    "process_window",
    "remap_frame",
    "remap_window",
    "retarget",
    "retrieve",
    "run_warp",
    "save_bank",
    "save_landmarks",
    "smoothed_objective",
    "solve_frame",
    "ssiou",
    "temporal_energy",
    "total_objective",
    "warp_field",
    "write_corpus",
]
