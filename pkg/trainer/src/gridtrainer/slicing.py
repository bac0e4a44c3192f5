"""Differentiable grid slicing, mirroring the renderer's semantics.

Pixel (x, y) with color (r, g, b) samples the grid at continuous
coordinates ((x+0.5)/W*gw - 0.5, (y+0.5)/H*gh - 0.5, z*gd - 0.5) where
z is Rec.601 luma clamped to [0, 1]; interpolation is trilinear with
clamp-to-edge, and the sampled 3x4 matrix multiplies (r, g, b, 1).
The output is not clamped.

Everything is expressed as gathers and products, so autograd provides
the adjoint; training never needs a hand-written backward. Agreement
with the renderer is a test obligation (1e-4 per channel), not an
implementation dependency: this file shares no code with it.
"""

import torch


def guidance(img: torch.Tensor) -> torch.Tensor:
    """(N, 3, H, W) -> (N, H, W) luma in [0, 1]."""
    r, g, b = img[:, 0], img[:, 1], img[:, 2]
    z = 0.299 * r + 0.587 * g + 0.114 * b
    return z.clamp(0.0, 1.0)


def _axis(coord, count):
    i0f = torch.floor(coord)
    t = coord - i0f
    i0 = i0f.long().clamp(0, count - 1)
    i1 = (i0f.long() + 1).clamp(0, count - 1)
    return i0, i1, t


def slice_apply(grid: torch.Tensor, img: torch.Tensor) -> torch.Tensor:
    """grid: (N, gh, gw, gd, 3, 4); img: (N, 3, H, W) in [0, 1]."""
    n, gh, gw, gd = grid.shape[:4]
    _, _, h, w = img.shape
    dt = img.dtype

    ys = (torch.arange(h, dtype=dt) + 0.5) / h * gh - 0.5
    xs = (torch.arange(w, dtype=dt) + 0.5) / w * gw - 0.5
    y0, y1, ty = _axis(ys, gh)
    x0, x1, tx = _axis(xs, gw)
    z0, z1, tz = _axis(guidance(img) * gd - 0.5, gd)

    # flat cell index per pixel for each of the 8 corners
    yy0 = (y0 * gw).view(1, h, 1)
    yy1 = (y1 * gw).view(1, h, 1)
    xx0 = x0.view(1, 1, w)
    xx1 = x1.view(1, 1, w)
    flat = grid.reshape(n, gh * gw * gd, 12)

    def corner(yy, xx, zz):
        idx = ((yy + xx) * gd + zz).reshape(n, h * w, 1).expand(-1, -1, 12)
        return flat.gather(1, idx).view(n, h, w, 12)

    ty = ty.view(1, h, 1, 1)
    tx = tx.view(1, 1, w, 1)
    tz = tz.view(n, h, w, 1)

    def lerp(a, b, t):
        return a + t * (b - a)

    a = lerp(corner(yy0, xx0, z0), corner(yy0, xx0, z1), tz)
    b = lerp(corner(yy0, xx1, z0), corner(yy0, xx1, z1), tz)
    c = lerp(corner(yy1, xx0, z0), corner(yy1, xx0, z1), tz)
    d = lerp(corner(yy1, xx1, z0), corner(yy1, xx1, z1), tz)
    top = lerp(a, b, tx)
    bot = lerp(c, d, tx)
    m = lerp(top, bot, ty)  # (n, h, w, 12)

    m = m.view(n, h, w, 3, 4)
    rgb1 = torch.cat([img.permute(0, 2, 3, 1),
                      torch.ones(n, h, w, 1, dtype=dt)], dim=3)
    out = torch.einsum('nhwij,nhwj->nhwi', m, rgb1)
    return out.permute(0, 3, 1, 2)


def grid_laplacian(grid: torch.Tensor) -> torch.Tensor:
    """Sum over ordered six-connected neighbor pairs of squared cell
    differences, matching the renderer's smoothness energy convention
    (each unordered pair counts twice)."""
    total = grid.new_zeros(())
    for axis in (1, 2, 3):
        d = grid.narrow(axis, 1, grid.shape[axis] - 1) - \
            grid.narrow(axis, 0, grid.shape[axis] - 1)
        total = total + 2.0 * (d * d).sum()
    return total
