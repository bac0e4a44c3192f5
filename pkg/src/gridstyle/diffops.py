"""Adjoints of slicing and of the smoothness regularizer.

slice_apply is linear in the grid coefficients, so its derivative is a
scatter: each pixel deposits upstream . (r,g,b,1)^T outer products into
its eight supporting cells, weighted by the trilinear weights. Guidance
is treated as a constant per pixel (no gradient through z), which is
where the sub-differentiability lives: z crossing a bin boundary moves
support, and we take the one-sided value.

The regularizer is the double-counted six-connected sum

    L_r = sum_s sum_{t in N(s)} ||G[s] - G[t]||_F^2

(each unordered pair appears twice). Its gradient per cell is
4 (deg(s) G[s] - sum_{t in N(s)} G[t]).
"""

import numpy as np

from . import _kernels
from .grid import (AffineBilateralGrid, DEFAULT_GUIDANCE, FixedLuma,
                   GridError, PiecewiseLinearLUT)


def slice_backward(grid: AffineBilateralGrid, img: np.ndarray,
                   upstream: np.ndarray,
                   curve=DEFAULT_GUIDANCE) -> np.ndarray:
    """Gradient of sum(upstream * slice_apply(grid, img)) w.r.t. the
    cells. Returns an array shaped like grid.cells, img's dtype.

    Deterministic: scatter runs into a fixed number of per-block
    buffers merged in index order, independent of worker count.
    """
    img = np.ascontiguousarray(img)
    upstream = np.ascontiguousarray(upstream, img.dtype)
    if img.shape != upstream.shape or img.ndim != 3 or img.shape[2] != 3:
        raise GridError("img and upstream must both be (H, W, 3)")
    lut = None
    if isinstance(curve, PiecewiseLinearLUT):
        lut = curve.knots.astype(img.dtype, copy=False)
    elif not isinstance(curve, FixedLuma):
        raise GridError(f"unknown guidance curve {type(curve).__name__}")
    flat = _kernels.slice_backward_scatter(img, upstream, grid.gw, grid.gh,
                                           grid.gd, lut=lut)
    return flat.reshape(grid.gh, grid.gw, grid.gd, 3, 4)


def _pairwise_sq(cells):
    total = 0.0
    for axis in range(3):
        d = np.diff(cells, axis=axis)
        total += float(np.sum(d * d))
    return total


def laplacian_energy(grid: AffineBilateralGrid) -> float:
    """Double-counted six-connected smoothness energy (each adjacent
    pair contributes twice)."""
    cells = grid.cells.astype(np.float64, copy=False)
    return 2.0 * _pairwise_sq(cells)


def laplacian_backward(grid: AffineBilateralGrid) -> np.ndarray:
    """Gradient of laplacian_energy w.r.t. the cells, float64."""
    cells = grid.cells.astype(np.float64, copy=False)
    g = np.zeros_like(cells)
    for axis in range(3):
        d = np.diff(cells, axis=axis)
        lo = [slice(None)] * 5
        hi = [slice(None)] * 5
        lo[axis] = slice(None, -1)
        hi[axis] = slice(1, None)
        g[tuple(hi)] += 4.0 * d
        g[tuple(lo)] -= 4.0 * d
    return g
