"""Warp quality energies on a discrete pixel/time grid.

Three terms measure a parameter sequence over a frame window:

* fitting error  -- mean L1 deviation of warped source landmarks from
  their targets, in pixels;
* bending energy -- mean of squared second spatial derivatives
  (``f_xx^2 + 2 f_xy^2 + f_yy^2``) of the dense warp field, central
  differences with unit pixel spacing, interior cells only;
* temporal energy -- mean squared second temporal difference of the
  field across the window, interior frames only.

Derivatives are taken of the rasterized field rather than analytically:
the discrete sums are the contract, and the analytic kernel second
derivatives diverge logarithmically at the basis centers. Both output
coordinate functions contribute to every term. Means count only the
cells/frames where the stencil is defined, which keeps the values
comparable across grid and window sizes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import LandmarkWindow
from .errors import InsufficientDataError, InvalidInputError
from .tps import TpsSequenceParams, eval_points, warp_field


@dataclass(frozen=True)
class EnergyWeights:
    """Nonnegative weights of the combined objective."""

    alpha1: float = 1.0  # fitting error
    alpha2: float = 1.0  # bending energy
    alpha3: float = 1.0  # temporal energy

    def __post_init__(self):
        for name in ("alpha1", "alpha2", "alpha3"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                raise InvalidInputError(f"{name} must be finite and nonnegative, got {v}")


@dataclass(frozen=True)
class EnergyReport:
    """The (e_f, e_b, e_t) triple and their weighted sum l_tw."""

    e_f: float
    e_b: float
    e_t: float
    l_tw: float

    def __post_init__(self):
        for name in ("e_f", "e_b", "e_t", "l_tw"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0.0):
                raise InvalidInputError(f"{name} must be finite and nonnegative, got {v}")

    def as_dict(self) -> dict:
        return {"e_f": self.e_f, "e_b": self.e_b, "e_t": self.e_t, "l_tw": self.l_tw}


def stencil_xx(a: np.ndarray) -> np.ndarray:
    """Second difference along x on the interior, any trailing dims."""
    return a[1:-1, 2:] - 2.0 * a[1:-1, 1:-1] + a[1:-1, :-2]


def stencil_yy(a: np.ndarray) -> np.ndarray:
    return a[2:, 1:-1] - 2.0 * a[1:-1, 1:-1] + a[:-2, 1:-1]


def stencil_xy(a: np.ndarray) -> np.ndarray:
    return 0.25 * (a[2:, 2:] - a[2:, :-2] - a[:-2, 2:] + a[:-2, :-2])


def _check_window_shapes(params: TpsSequenceParams, src: LandmarkWindow, dst: LandmarkWindow):
    if src.frames.shape != dst.frames.shape:
        raise InvalidInputError(
            f"src and dst windows must share shape, got {src.frames.shape} and {dst.frames.shape}"
        )
    if params.length != src.length:
        raise InvalidInputError(
            f"parameter frames ({params.length}) disagree with window length ({src.length})"
        )


def fitting_error(params: TpsSequenceParams, src: LandmarkWindow, dst: LandmarkWindow) -> float:
    """Mean per-landmark L1 deviation ``|dx| + |dy|`` of f(src) from dst."""
    _check_window_shapes(params, src, dst)
    total = 0.0
    for t, frame_params in enumerate(params.frames):
        predicted = eval_points(frame_params, src.frames[t])
        total += float(np.sum(np.abs(predicted - dst.frames[t])))
    return total / (src.length * src.points_per_frame)


def _bending_from_fields(fields, width: int, height: int) -> float:
    total = 0.0
    for field in fields:
        fxx = stencil_xx(field)
        fyy = stencil_yy(field)
        fxy = stencil_xy(field)
        total += float(np.sum(fxx * fxx) + 2.0 * np.sum(fxy * fxy) + np.sum(fyy * fyy))
    interior = (width - 2) * (height - 2)
    return total / (interior * len(fields))


def _temporal_from_fields(fields, width: int, height: int) -> float:
    total = 0.0
    for t in range(1, len(fields) - 1):
        second = fields[t + 1] - 2.0 * fields[t] + fields[t - 1]
        total += float(np.sum(second * second))
    return total / (width * height * (len(fields) - 2))


def bending_energy(params: TpsSequenceParams, width: int, height: int) -> float:
    """Mean squared spatial curvature of the dense field over the window."""
    if width < 3 or height < 3:
        raise InvalidInputError(
            f"bending energy needs a grid of at least 3x3, got {width}x{height}"
        )
    fields = [warp_field(f, width, height) for f in params.frames]
    return _bending_from_fields(fields, width, height)


def temporal_energy(params: TpsSequenceParams, width: int, height: int) -> float:
    """Mean squared second temporal difference of the field per cell."""
    if params.length < 3:
        raise InsufficientDataError(
            f"temporal energy needs at least 3 frames, got {params.length}"
        )
    if width < 1 or height < 1:
        raise InvalidInputError(f"grid must be at least 1x1, got {width}x{height}")
    fields = [warp_field(f, width, height) for f in params.frames]
    return _temporal_from_fields(fields, width, height)


def total_objective(
    params: TpsSequenceParams,
    src: LandmarkWindow,
    dst: LandmarkWindow,
    width: int,
    height: int,
    weights: EnergyWeights = EnergyWeights(),
) -> EnergyReport:
    """Evaluate all three energies and their weighted sum.

    The dense field is rasterized once and shared by the bending and
    temporal terms.
    """
    if width < 3 or height < 3:
        raise InvalidInputError(
            f"bending energy needs a grid of at least 3x3, got {width}x{height}"
        )
    if params.length < 3:
        raise InsufficientDataError(
            f"temporal energy needs at least 3 frames, got {params.length}"
        )
    e_f = fitting_error(params, src, dst)
    fields = [warp_field(f, width, height) for f in params.frames]
    e_b = _bending_from_fields(fields, width, height)
    e_t = _temporal_from_fields(fields, width, height)
    l_tw = weights.alpha1 * e_f + weights.alpha2 * e_b + weights.alpha3 * e_t
    return EnergyReport(e_f=e_f, e_b=e_b, e_t=e_t, l_tw=l_tw)
