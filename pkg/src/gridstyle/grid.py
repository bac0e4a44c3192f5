"""Affine bilateral grids and the slicing renderer.

A grid is a gh x gw x gd lattice of 3x4 affine color matrices. Slicing
samples the lattice per pixel at half-cell-centered coordinates

    (u*gw - 0.5, v*gh - 0.5, z*gd - 0.5),
    (u, v) = ((x+0.5)/W, (y+0.5)/H),  z = guidance(r, g, b)

with trilinear interpolation and clamp-to-edge boundaries, then applies
the interpolated matrix to (r, g, b, 1). Output is not clamped; local
affine models legitimately overshoot [0, 1] and export decides.

Half-cell centering plus nested-form lerps (a + t*(b-a)) make two
guarantees exact rather than approximate: an identity grid reproduces
the input bitwise, and a constant grid equals applying its single
affine matrix directly.
"""

from dataclasses import dataclass

import numba
import numpy as np

from . import _kernels


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class FixedLuma:
    """Rec.601 luma guidance: clamp(0.299 r + 0.587 g + 0.114 b, 0, 1)."""


@dataclass(frozen=True)
class PiecewiseLinearLUT:
    """Learned guidance: K >= 2 knots, uniformly spaced over [0, 1],
    linearly interpolated on the Rec.601 luma, output clamped to [0, 1].
    """

    knots: np.ndarray

    def __post_init__(self):
        k = np.asarray(self.knots, np.float64)
        if k.ndim != 1 or k.shape[0] < 2:
            raise GridError("guidance LUT needs at least 2 knots")
        if not np.all(np.isfinite(k)):
            raise GridError("guidance LUT knots must be finite")
        object.__setattr__(self, "knots", k)


DEFAULT_GUIDANCE = FixedLuma()


class AffineBilateralGrid:
    """cells has shape (gh, gw, gd, 3, 4), C order."""

    def __init__(self, cells: np.ndarray):
        cells = np.ascontiguousarray(cells)
        if cells.ndim != 5 or cells.shape[3:] != (3, 4):
            raise GridError("grid cells must have shape (gh, gw, gd, 3, 4)")
        if cells.shape[0] < 1 or cells.shape[1] < 1 or cells.shape[2] < 1:
            raise GridError("grid dims must be >= 1")
        if not np.all(np.isfinite(cells)):
            raise GridError("grid coefficients must be finite")
        self.cells = cells

    @property
    def gh(self) -> int:
        return self.cells.shape[0]

    @property
    def gw(self) -> int:
        return self.cells.shape[1]

    @property
    def gd(self) -> int:
        return self.cells.shape[2]

    def __repr__(self):
        return (f"AffineBilateralGrid(gw={self.gw}, gh={self.gh}, "
                f"gd={self.gd}, dtype={self.cells.dtype})")


def make_identity_grid(gw: int, gh: int, gd: int,
                       dtype=np.float64) -> AffineBilateralGrid:
    if gw < 1 or gh < 1 or gd < 1:
        raise GridError("grid dims must be >= 1")
    cell = np.zeros((3, 4), dtype)
    cell[:, :3] = np.eye(3, dtype=dtype)
    cells = np.broadcast_to(cell, (gh, gw, gd, 3, 4)).copy()
    return AffineBilateralGrid(cells)


def guidance(img: np.ndarray, curve=DEFAULT_GUIDANCE) -> np.ndarray:
    """Per-pixel z in [0, 1]. Mirrors the kernels' arithmetic exactly
    (same lerp form, same clamps) so numpy-side consumers agree with
    the renderer."""
    img = np.asarray(img)
    # term order matters: r + b + g makes the weights sum to exactly 1.0
    # in binary64, so pure white lands on z = 1.0 rather than an ulp shy
    luma = 0.299 * img[..., 0] + 0.114 * img[..., 2] + 0.587 * img[..., 1]
    luma = np.clip(luma, 0.0, 1.0)
    if isinstance(curve, FixedLuma):
        return luma
    if isinstance(curve, PiecewiseLinearLUT):
        lut = curve.knots.astype(luma.dtype, copy=False)
        K = lut.shape[0]
        pos = luma * (K - 1)
        i0 = np.clip(np.floor(pos).astype(np.int64), 0, K - 2)
        frac = pos - i0
        z = lut[i0] + frac * (lut[i0 + 1] - lut[i0])
        return np.clip(z, 0.0, 1.0)
    raise GridError(f"unknown guidance curve {type(curve).__name__}")


def _cells2(cells):
    return cells.reshape(cells.shape[0], -1)


def slice_apply(grid: AffineBilateralGrid, img: np.ndarray,
                curve=DEFAULT_GUIDANCE) -> np.ndarray:
    """Render img through the grid. Returns an array of img's dtype and
    shape. Unclamped."""
    img = np.ascontiguousarray(img)
    if img.ndim != 3 or img.shape[2] != 3:
        raise GridError("image must have shape (H, W, 3)")
    cells = grid.cells
    if cells.dtype != img.dtype:
        # f32 grids promote exactly into f64 images
        cells = cells.astype(img.dtype)
    lut = None
    if isinstance(curve, PiecewiseLinearLUT):
        lut = curve.knots.astype(img.dtype, copy=False)
    elif not isinstance(curve, FixedLuma):
        raise GridError(f"unknown guidance curve {type(curve).__name__}")
    if grid.gw == 1 and grid.gh == 1 and grid.gd == 1:
        # a one-cell grid interpolates to that cell at every coordinate
        # (clamp-to-edge), so slicing IS its affine: take the direct
        # path, which guarantees bitwise agreement with apply_affine
        return apply_affine(img, cells[0, 0, 0])
    # prange scheduling costs ~7% when there is only one worker
    par = numba.get_num_threads() > 1
    return _kernels.slice_forward(img, _cells2(cells), grid.gw, grid.gh,
                                  grid.gd, lut=lut, parallel=par)


def apply_affine(img: np.ndarray, A: np.ndarray) -> np.ndarray:
    """Apply one 3x4 affine color matrix everywhere. One-cell grids
    slice to exactly this (shared code path); larger constant grids
    agree to within an ulp, the renderer being free to fuse its
    multiply-adds."""
    A = np.asarray(A, img.dtype)
    if A.shape != (3, 4):
        raise GridError("affine matrix must be 3x4")
    r, g, b = img[..., 0], img[..., 1], img[..., 2]
    out = np.empty_like(img)
    for i in range(3):
        out[..., i] = A[i, 0] * r + A[i, 1] * g + A[i, 2] * b + A[i, 3]
    return out


def resample_grid(grid: AffineBilateralGrid, gw: int, gh: int,
                  gd: int) -> AffineBilateralGrid:
    """Resample coefficients to new dims by evaluating the slicing
    interpolant at the new cell centers (same half-cell convention,
    clamp-to-edge). Constant grids stay constant for any dims.

    Note this is genuinely lossy both ways: coarse-grid interpolation
    kinks sit at (i+0.5)/g, which is never a knot of a different
    resolution, so even a 2x upsample does not reproduce the original
    interpolant between cells. Tests pin down what does hold: resampled
    values lie exactly on the source interpolant.
    """
    if gw < 1 or gh < 1 or gd < 1:
        raise GridError("grid dims must be >= 1")
    cells = grid.cells.astype(np.float64, copy=False)

    def axis_positions(n_new, n_old):
        pos = (np.arange(n_new) + 0.5) / n_new * n_old - 0.5
        i0 = np.floor(pos)
        t = pos - i0
        i0 = i0.astype(np.int64)
        i1 = np.clip(i0 + 1, 0, n_old - 1)
        i0 = np.clip(i0, 0, n_old - 1)
        return i0, i1, t

    def lerp_axis(arr, axis, n_new):
        i0, i1, t = axis_positions(n_new, arr.shape[axis])
        a = np.take(arr, i0, axis=axis)
        b = np.take(arr, i1, axis=axis)
        shape = [1] * arr.ndim
        shape[axis] = n_new
        t = t.reshape(shape)
        return a + t * (b - a)

    cells = lerp_axis(cells, 0, gh)
    cells = lerp_axis(cells, 1, gw)
    cells = lerp_axis(cells, 2, gd)
    return AffineBilateralGrid(cells.astype(grid.cells.dtype))
