"""Thin-plate-spline fitting and evaluation.

A warp ``f: R^2 -> R^2`` is represented as two scalar interpolants
sharing the same radial basis::

    f_j(q) = a1_j + ax_j * q_x + ay_j * q_y + sum_i w_ij * U(d(c_i, q))

with kernel ``U(r) = r^2 log r`` (``U(0) = 0``) and basis centers ``c_i``
at the source landmarks. Fitting solves the classical bordered linear
system, so with ``ridge = 0`` the warp reproduces every target point
exactly, and the radial weights satisfy the vanishing-moment side
conditions ``sum w = sum w*x = sum w*y = 0`` per output coordinate.

``d`` is the Euclidean distance by default; ``norm="l1"`` switches to
the Manhattan distance for diagnostics.
"""

from __future__ import annotations

import functools
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg

from .core import _as_points, _freeze
from .errors import InvalidInputError, SingularSystemError

RADIAL_NORMS = ("euclidean", "l1")

#: Relative residual above which a linear solve is declared singular.
_SOLVE_RESIDUAL_TOL = 1e-6


def kernel_u(r: float) -> float:
    """Radial kernel ``r^2 ln r``, continued with 0 at ``r = 0``."""
    if not np.isfinite(r) or r < 0:
        raise InvalidInputError(f"kernel argument must be a nonnegative real, got {r}")
    if r == 0.0:
        return 0.0
    return r * r * math.log(r)


def _kernel_arr(r: np.ndarray) -> np.ndarray:
    # U(0) = 0 removes the log singularity; where() keeps vectorization.
    safe = np.where(r > 0.0, r, 1.0)
    return np.where(r > 0.0, r * r * np.log(safe), 0.0)


def _pairwise_dist(points: np.ndarray, centers: np.ndarray, norm: str) -> np.ndarray:
    diff = points[:, None, :] - centers[None, :, :]
    if norm == "euclidean":
        return np.sqrt(np.sum(diff * diff, axis=2))
    if norm == "l1":
        return np.sum(np.abs(diff), axis=2)
    raise InvalidInputError(f"unknown radial norm {norm!r}, expected one of {RADIAL_NORMS}")


def basis_matrix(points, centers, norm: str = "euclidean") -> np.ndarray:
    """Rows ``[1, x, y, U(d(c_1, q)), ..., U(d(c_P, q))]`` for each query point."""
    pts = _as_points(points, "points")
    ctr = _as_points(centers, "centers")
    out = np.empty((pts.shape[0], 3 + ctr.shape[0]), dtype=np.float64)
    out[:, 0] = 1.0
    out[:, 1] = pts[:, 0]
    out[:, 2] = pts[:, 1]
    if norm == "euclidean":
        # sqrt-free: r^2 log r = 0.5 * d2 * log(d2) with d2 the squared distance
        dx = np.subtract.outer(pts[:, 0], ctr[:, 0])
        dy = np.subtract.outer(pts[:, 1], ctr[:, 1])
        d2 = dx * dx
        d2 += dy * dy
        safe = np.where(d2 > 0.0, d2, 1.0)
        out[:, 3:] = 0.5 * safe * np.log(safe)
    else:
        out[:, 3:] = _kernel_arr(_pairwise_dist(pts, ctr, norm))
    return out


@dataclass(frozen=True)
class TpsFrameParams:
    """Coefficients of one frame's warp.

    ``a1``, ``ax``, ``ay`` are 2-vectors (one component per output
    coordinate); ``w`` is (P, 2); ``centers`` holds the P source
    landmarks the radial basis is anchored at.
    """

    a1: np.ndarray
    ax: np.ndarray
    ay: np.ndarray
    w: np.ndarray
    centers: np.ndarray
    norm: str = "euclidean"

    def __post_init__(self):
        a1 = np.asarray(self.a1, dtype=np.float64).reshape(2)
        ax = np.asarray(self.ax, dtype=np.float64).reshape(2)
        ay = np.asarray(self.ay, dtype=np.float64).reshape(2)
        w = np.asarray(self.w, dtype=np.float64)
        centers = _as_points(self.centers, "centers")
        if w.ndim != 2 or w.shape[1] != 2 or w.shape[0] != centers.shape[0]:
            raise InvalidInputError(
                f"w must be (P, 2) matching centers, got {w.shape} for P={centers.shape[0]}"
            )
        for name, arr in (("a1", a1), ("ax", ax), ("ay", ay), ("w", w)):
            if not np.all(np.isfinite(arr)):
                raise InvalidInputError(f"{name} must be finite")
        if self.norm not in RADIAL_NORMS:
            raise InvalidInputError(f"unknown radial norm {self.norm!r}")
        object.__setattr__(self, "a1", _freeze(a1))
        object.__setattr__(self, "ax", _freeze(ax))
        object.__setattr__(self, "ay", _freeze(ay))
        object.__setattr__(self, "w", _freeze(w))
        object.__setattr__(self, "centers", _freeze(centers))

    @property
    def point_count(self) -> int:
        return self.centers.shape[0]

    def coeff_matrix(self) -> np.ndarray:
        """Stacked coefficients, shape (P+3, 2): rows a1, ax, ay, w_1..w_P."""
        return np.vstack([self.a1, self.ax, self.ay, self.w])

    @classmethod
    def from_coeff_matrix(cls, centers, coeff, norm="euclidean") -> "TpsFrameParams":
        coeff = np.asarray(coeff, dtype=np.float64)
        return cls(a1=coeff[0], ax=coeff[1], ay=coeff[2], w=coeff[3:], centers=centers, norm=norm)

    def side_condition_residual(self) -> float:
        """Max violation of the vanishing-moment conditions on ``w``."""
        poly = np.hstack([np.ones((self.point_count, 1)), self.centers])
        return float(np.max(np.abs(poly.T @ self.w)))

    def to_dict(self) -> dict:
        return {
            "a1": self.a1.tolist(),
            "ax": self.ax.tolist(),
            "ay": self.ay.tolist(),
            "w": self.w.tolist(),
            "centers": self.centers.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict, norm: str = "euclidean") -> "TpsFrameParams":
        return cls(
            a1=np.asarray(doc["a1"]),
            ax=np.asarray(doc["ax"]),
            ay=np.asarray(doc["ay"]),
            w=np.asarray(doc["w"]),
            centers=np.asarray(doc["centers"]),
            norm=norm,
        )


@dataclass(frozen=True)
class TpsSequenceParams:
    """Per-frame warp coefficients over a window, uniform point count."""

    frames: tuple

    def __post_init__(self):
        frames = tuple(self.frames)
        if not frames:
            raise InvalidInputError("TpsSequenceParams needs at least one frame")
        counts = {f.point_count for f in frames}
        if len(counts) != 1:
            raise InvalidInputError(f"frames disagree on point count: {sorted(counts)}")
        norms = {f.norm for f in frames}
        if len(norms) != 1:
            raise InvalidInputError(f"frames disagree on radial norm: {sorted(norms)}")
        object.__setattr__(self, "frames", frames)

    @property
    def length(self) -> int:
        return len(self.frames)

    @property
    def point_count(self) -> int:
        return self.frames[0].point_count

    @property
    def norm(self) -> str:
        return self.frames[0].norm

    def coeff_array(self) -> np.ndarray:
        """All coefficients stacked, shape (T, P+3, 2)."""
        return np.stack([f.coeff_matrix() for f in self.frames])

    def to_json(self) -> str:
        doc = {"norm": self.norm, "frames": [f.to_dict() for f in self.frames]}
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "TpsSequenceParams":
        doc = json.loads(text)
        norm = doc.get("norm", "euclidean")
        return cls(tuple(TpsFrameParams.from_dict(d, norm) for d in doc["frames"]))

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "TpsSequenceParams":
        return cls.from_json(Path(path).read_text())


def _check_solvable(src: np.ndarray, ridge: float) -> None:
    p = src.shape[0]
    if p < 3:
        raise InvalidInputError(f"TPS fitting needs at least 3 points, got {p}")
    centered = src - src.mean(axis=0)
    svals = np.linalg.svd(centered, compute_uv=False)
    scale = max(float(svals[0]), 1.0)
    if svals[1] <= 1e-9 * scale:
        raise SingularSystemError("source points are collinear")
    if ridge == 0.0:
        diff = src[:, None, :] - src[None, :, :]
        dist2 = np.sum(diff * diff, axis=2)
        np.fill_diagonal(dist2, np.inf)
        if np.min(dist2) == 0.0:
            raise SingularSystemError("duplicate source points with ridge = 0")


def solve_frame(src, dst, ridge: float = 0.0, norm: str = "euclidean") -> TpsFrameParams:
    """Fit warp coefficients mapping ``src`` landmarks onto ``dst``.

    With ``ridge = 0`` the result interpolates exactly; ``ridge > 0``
    adds ``ridge * I`` to the kernel block, trading exactness for
    conditioning on noisy landmarks.
    """
    src_pts = _as_points(src, "src")
    dst_pts = _as_points(dst, "dst")
    if src_pts.shape != dst_pts.shape:
        raise InvalidInputError(
            f"src and dst must share shape, got {src_pts.shape} and {dst_pts.shape}"
        )
    if not np.isfinite(ridge) or ridge < 0:
        raise InvalidInputError(f"ridge must be a nonnegative real, got {ridge}")
    _check_solvable(src_pts, ridge)

    p = src_pts.shape[0]
    # Reuse the evaluation basis so solving and evaluating agree bit-exactly.
    node_basis = basis_matrix(src_pts, src_pts, norm)
    kern = node_basis[:, 3:].copy()
    if ridge > 0:
        kern += ridge * np.eye(p)
    poly = node_basis[:, :3]  # columns [1, x, y]

    # Symmetric bordered system over [a; w]: side conditions first,
    # interpolation equations second.
    system = np.zeros((p + 3, p + 3), dtype=np.float64)
    system[:3, 3:] = poly.T
    system[3:, :3] = poly
    system[3:, 3:] = kern
    rhs = np.zeros((p + 3, 2), dtype=np.float64)
    rhs[3:] = dst_pts

    try:
        lu, piv = scipy.linalg.lu_factor(system)
        sol = scipy.linalg.lu_solve((lu, piv), rhs)
        # One step of iterative refinement tightens w toward the exact
        # solution (matters for the affine-reproduction guarantee).
        resid = rhs - system @ sol
        sol = sol + scipy.linalg.lu_solve((lu, piv), resid)
    except (scipy.linalg.LinAlgError, ValueError) as exc:
        raise SingularSystemError(f"TPS system could not be factorized: {exc}") from exc
    if not np.all(np.isfinite(sol)):
        raise SingularSystemError("TPS system produced non-finite coefficients")
    resid = rhs - system @ sol
    scale = max(float(np.max(np.abs(rhs))), 1.0)
    if float(np.max(np.abs(resid))) > _SOLVE_RESIDUAL_TOL * scale:
        raise SingularSystemError("TPS system is numerically singular")

    return TpsFrameParams(
        a1=sol[0], ax=sol[1], ay=sol[2], w=sol[3:], centers=src_pts, norm=norm
    )


def eval_points(params: TpsFrameParams, points) -> np.ndarray:
    """Evaluate the warp at an (N, 2) array of query points."""
    basis = basis_matrix(points, params.centers, params.norm)
    return basis @ params.coeff_matrix()


def eval_point(params: TpsFrameParams, q) -> np.ndarray:
    """Evaluate the warp at a single point, returning a length-2 array."""
    q = np.asarray(q, dtype=np.float64).reshape(1, 2)
    return eval_points(params, q)[0]


def grid_points(width: int, height: int) -> np.ndarray:
    """Pixel centers of a width x height grid, shape (H*W, 2), row-major."""
    xs, ys = np.meshgrid(np.arange(width, dtype=np.float64), np.arange(height, dtype=np.float64))
    return np.stack([xs.ravel(), ys.ravel()], axis=1)


@functools.lru_cache(maxsize=12)
def _cached_grid_basis(centers_bytes: bytes, count: int, width: int, height: int,
                       norm: str) -> np.ndarray:
    # Dense per-frame bases recur across overlapping windows, reports and
    # resampling; they depend only on the centers, not the coefficients.
    centers = np.frombuffer(centers_bytes, dtype=np.float64).reshape(count, 2)
    basis = basis_matrix(grid_points(width, height), centers, norm)
    basis.flags.writeable = False
    return basis


def grid_basis(params_or_centers, width: int, height: int, norm: str = "euclidean") -> np.ndarray:
    """Read-only (H*W, P+3) basis over the pixel grid, cached by centers."""
    if isinstance(params_or_centers, TpsFrameParams):
        centers = params_or_centers.centers
        norm = params_or_centers.norm
    else:
        centers = np.ascontiguousarray(params_or_centers, dtype=np.float64)
    return _cached_grid_basis(centers.tobytes(), centers.shape[0], width, height, norm)


def warp_field(params: TpsFrameParams, width: int, height: int) -> np.ndarray:
    """Dense evaluation on the pixel grid; ``field[y, x] = f(x, y)``.

    Returns an (H, W, 2) float array. Every cell is an independent
    evaluation, so the result is deterministic under any evaluation
    order.
    """
    if width < 1 or height < 1:
        raise InvalidInputError(f"grid must be at least 1x1, got {width}x{height}")
    values = grid_basis(params, width, height) @ params.coeff_matrix()
    return values.reshape(height, width, 2)
