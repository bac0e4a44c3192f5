"""Least-squares grid fitting.

Given a low-resolution input/output image pair, find grid coefficients
minimizing

    sum_p ||slice(G)(p) - output(p)||^2 + lambda_r * L_r(G).

Slicing is linear in G, so this is a sparse linear least-squares
problem. We run conjugate gradient on the normal equations

    (S^T S + lambda_r * H) G = S^T b,

matrix-free: S is the forward slicer, S^T the adjoint scatter, and
H G = laplacian_backward(G) / 2 (L_r is the quadratic form G^T H G up
to the factor absorbed here). Initialization is the identity grid, so
unsupported cells with lambda_r = 0 simply keep it, and the fit
degrades toward a passthrough rather than toward black.

CG is block-Jacobi preconditioned. Two things make the plain normal
equations crawl: cell support is wildly uneven (a cell under a flat sky
sees thousands of pixels, one in a rare luma band almost none), and
within a cell the columns couple through the 4x4 color Gram

    B_c = sum_p w_c(p)^2 q(p) q(p)^T + 2 lambda_r deg(c) I,

q = (r, g, b, 1), which is nearly singular wherever the local colors
are close to constant (r, g, b and 1 collinear). Solving against the
per-cell B_c (same block for all 3 matrix rows) removes both effects;
recovery problems that plain CG could not finish in a thousand
iterations converge in about a hundred. Blocks of empty cells at
lambda_r = 0 fall back to the identity: their residual is identically
zero, so those cells never move off the identity start either way.

Everything runs in float64; the returned grid is quantized to float32,
matching the file format, so writing and re-reading a fit result
changes nothing.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from . import diffops
from .grid import (AffineBilateralGrid, DEFAULT_GUIDANCE, GridError,
                   guidance, make_identity_grid, slice_apply)


class FitError(ValueError):
    pass


@dataclass
class FitProblem:
    input_lowres: np.ndarray
    output_lowres: np.ndarray
    gw: int = 16
    gh: int = 16
    gd: int = 8
    curve: object = field(default_factory=lambda: DEFAULT_GUIDANCE)
    lambda_r: float = 0.15
    max_iters: int = 200
    tol: float = 1e-6

    def __post_init__(self):
        a = np.asarray(self.input_lowres)
        b = np.asarray(self.output_lowres)
        if a.ndim != 3 or a.shape[2] != 3 or a.shape[0] < 1 or a.shape[1] < 1:
            raise FitError("input image must be a nonempty (H, W, 3) array")
        if a.shape != b.shape:
            raise FitError(f"input/output shapes differ ({a.shape} vs {b.shape})")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise FitError("images must be finite")
        if min(self.gw, self.gh, self.gd) < 1:
            raise FitError("grid dims must be >= 1")
        if self.lambda_r < 0:
            raise FitError("lambda_r must be >= 0")
        if self.tol <= 0:
            raise FitError("tol must be > 0")
        if self.max_iters < 0:
            raise FitError("max_iters must be >= 0")


def _axis_splat(coord, count):
    """Floor/clamp one axis the way the slicer does. Returns the two
    cell indices and the interpolation weight of the second one."""
    i0f = np.floor(coord)
    t = coord - i0f
    i0 = np.clip(i0f.astype(np.int64), 0, count - 1)
    i1 = np.clip(i0f.astype(np.int64) + 1, 0, count - 1)
    return i0, i1, t


def _normal_blocks(inp, curve, gw, gh, gd, lam):
    """Per-cell 4x4 blocks B_c of S^T S + lambda_r H, shaped
    (gh*gw*gd, 4, 4). Exact: splatting weights replicate the slicer."""
    H, W, _ = inp.shape
    z = guidance(inp, curve)
    y0, y1, ty = _axis_splat((np.arange(H) + 0.5) / H * gh - 0.5, gh)
    x0, x1, tx = _axis_splat((np.arange(W) + 0.5) / W * gw - 0.5, gw)
    z0, z1, tz = _axis_splat(z * gd - 0.5, gd)

    q = np.empty((H, W, 4))
    q[..., :3] = inp
    q[..., 3] = 1.0
    q = q.reshape(-1, 4)

    ncells = gh * gw * gd
    blocks = np.zeros((ncells, 4, 4))
    ys = (y0, y1)
    xs = (x0, x1)
    zs = (z0, z1)
    wys = (1.0 - ty, ty)
    wxs = (1.0 - tx, tx)
    wzs = (1.0 - tz, tz)
    for cy in (0, 1):
        for cx in (0, 1):
            wyx = np.outer(wys[cy], wxs[cx])
            iyx = (ys[cy][:, None] * gw + xs[cx][None, :]) * gd
            for cz in (0, 1):
                w2 = ((wyx * wzs[cz]) ** 2).ravel()
                idx = (iyx + zs[cz]).ravel()
                for j in range(4):
                    for k in range(j, 4):
                        acc = np.bincount(idx, weights=w2 * q[:, j] * q[:, k],
                                          minlength=ncells)
                        blocks[:, j, k] += acc
                        if k > j:
                            blocks[:, k, j] += acc

    if lam > 0.0:
        deg = np.zeros((gh, gw, gd))
        for axis, count in enumerate((gh, gw, gd)):
            if count > 1:
                sl = [slice(None)] * 3
                sl[axis] = slice(1, None)
                deg[tuple(sl)] += 1.0
                sl[axis] = slice(None, -1)
                deg[tuple(sl)] += 1.0
        blocks[:, np.arange(4), np.arange(4)] += \
            2.0 * lam * deg.reshape(-1, 1)

    return blocks


def _block_inverses(blocks):
    """Inverses of the preconditioner blocks, identity where a block has
    no support. A preconditioner only has to be SPD, not exact, so a
    ridge of 1e-9 * trace makes the batch inverse safe on blocks that
    are singular through color collinearity (a cell seeing one flat
    color has rank-1 q q^T) without measurably blunting it."""
    tr = np.trace(blocks, axis1=1, axis2=2)
    supported = tr > 0.0
    ridge = np.where(supported, tr, 1.0) * 1e-9
    safe = blocks + ridge[:, None, None] * np.eye(4)
    out = np.broadcast_to(np.eye(4), blocks.shape).copy()
    if np.any(supported):
        inv = np.linalg.inv(safe[supported])
        # CG wants the preconditioner exactly symmetric
        out[supported] = 0.5 * (inv + inv.transpose(0, 2, 1))
    return out


@dataclass
class FitReport:
    iterations: int
    relative_residual: float
    data_term: float
    laplacian_energy: float
    seconds: float
    converged: bool


def fit_grid(problem: FitProblem):
    """Returns (AffineBilateralGrid float32, FitReport)."""
    t0 = time.perf_counter()
    inp = np.ascontiguousarray(problem.input_lowres, np.float64)
    target = np.ascontiguousarray(problem.output_lowres, np.float64)
    gw, gh, gd = problem.gw, problem.gh, problem.gd
    curve = problem.curve
    lam = float(problem.lambda_r)

    shape = (gh, gw, gd, 3, 4)

    def grid_of(vec):
        return AffineBilateralGrid(vec.reshape(shape))

    def forward(vec):
        return slice_apply(grid_of(vec), inp, curve)

    def adjoint(img_like):
        return diffops.slice_backward(grid_of(np.zeros(n)), inp, img_like,
                                      curve).ravel()

    def operator(vec):
        out = adjoint(forward(vec))
        if lam > 0.0:
            out = out + (lam / 2.0) * diffops.laplacian_backward(
                grid_of(vec)).ravel()
        return out

    n = gh * gw * gd * 12
    x = make_identity_grid(gw, gh, gd).cells.ravel().copy()
    rhs = adjoint(target)
    rhs_norm = float(np.linalg.norm(rhs))
    denom = rhs_norm if rhs_norm > 0.0 else 1.0

    minv = _block_inverses(_normal_blocks(inp, curve, gw, gh, gd, lam))

    def precondition(vec):
        # same 4x4 block for each of a cell's 3 matrix rows
        rows = vec.reshape(-1, 3, 4)
        return np.einsum('cjk,cik->cij', minv, rows).ravel()

    r = rhs - operator(x)
    p = precondition(r)
    rz = float(r @ p)
    iters = 0
    relres = float(np.linalg.norm(r)) / denom
    while relres > problem.tol and iters < problem.max_iters:
        ap = operator(p)
        pap = float(p @ ap)
        if pap <= 0.0:
            # numerically exhausted search direction; residual stands
            break
        alpha = rz / pap
        x += alpha * p
        r -= alpha * ap
        z = precondition(r)
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
        iters += 1
        relres = float(np.linalg.norm(r)) / denom

    fitted = AffineBilateralGrid(
        x.reshape(shape).astype(np.float32))
    resid = slice_apply(fitted, inp, curve) - target
    report = FitReport(
        iterations=iters,
        relative_residual=float(relres),
        data_term=float(np.sum(resid * resid)),
        laplacian_energy=diffops.laplacian_energy(fitted),
        seconds=time.perf_counter() - t0,
        converged=bool(relres <= problem.tol),
    )
    return fitted, report
