"""Independent reference implementations the tests check against.

These deliberately share no code or structure with the package: the
slicer oracle gathers full per-pixel matrices with product-form weights
and einsum, the energy oracle is a quadruple loop over cell pairs, the
statistics oracles are two-pass loops. Slow and obvious on purpose.
"""

import numpy as np


def oracle_guidance(img, knots=None):
    luma = np.clip(0.299 * img[..., 0] + 0.587 * img[..., 1]
                   + 0.114 * img[..., 2], 0.0, 1.0)
    if knots is None:
        return luma
    K = len(knots)
    z = np.interp(luma * (K - 1), np.arange(K), knots)
    return np.clip(z, 0.0, 1.0)


def _axis_corners(pos, n):
    i0 = np.floor(pos)
    t = pos - i0
    i0 = i0.astype(np.int64)
    i1 = np.clip(i0 + 1, 0, n - 1)
    i0 = np.clip(i0, 0, n - 1)
    return i0, i1, t


def oracle_slice(cells, img, z):
    """Trilinear slice with product weights. cells (gh, gw, gd, 3, 4),
    z a precomputed (H, W) guidance plane."""
    cells = np.asarray(cells, np.float64)
    gh, gw, gd = cells.shape[:3]
    H, W, _ = img.shape
    u = (np.arange(W) + 0.5) / W * gw - 0.5
    v = (np.arange(H) + 0.5) / H * gh - 0.5
    x0, x1, tx = _axis_corners(u, gw)
    y0, y1, ty = _axis_corners(v, gh)
    z0, z1, tz = _axis_corners(z * gd - 0.5, gd)

    tx = tx[None, :]
    ty = ty[:, None]
    A = np.zeros((H, W, 3, 4))
    for cy, wy in ((y0[:, None], 1 - ty), (y1[:, None], ty)):
        cyb = np.broadcast_to(cy, (H, W))
        for cx, wx in ((x0[None, :], 1 - tx), (x1[None, :], tx)):
            cxb = np.broadcast_to(cx, (H, W))
            for cz, wz in ((z0, 1 - tz), (z1, tz)):
                w = (wy * wx * wz)[..., None, None]
                A += w * cells[cyb, cxb, cz]
    rgb1 = np.concatenate([img, np.ones_like(img[..., :1])], axis=-1)
    return np.einsum("hwij,hwj->hwi", A, rgb1), A


def oracle_support_weights(cells_shape, img, z, cell_index):
    """Trilinear weight each pixel puts on one given cell."""
    gh, gw, gd = cells_shape[:3]
    H, W, _ = img.shape
    u = (np.arange(W) + 0.5) / W * gw - 0.5
    v = (np.arange(H) + 0.5) / H * gh - 0.5
    x0, x1, tx = _axis_corners(u, gw)
    y0, y1, ty = _axis_corners(v, gh)
    z0, z1, tz = _axis_corners(z * gd - 0.5, gd)
    cy, cx, cz = cell_index
    wy = (y0 == cy) * (1 - ty) + (y1 == cy) * ty
    wx = (x0 == cx) * (1 - tx) + (x1 == cx) * tx
    wz = (z0 == cz) * (1 - tz) + (z1 == cz) * tz
    return wy[:, None] * wx[None, :] * wz


def oracle_laplacian_energy(cells):
    cells = np.asarray(cells, np.float64)
    gh, gw, gd = cells.shape[:3]
    total = 0.0
    for y in range(gh):
        for x in range(gw):
            for z in range(gd):
                for dy, dx, dz in ((1, 0, 0), (-1, 0, 0), (0, 1, 0),
                                   (0, -1, 0), (0, 0, 1), (0, 0, -1)):
                    ny, nx, nz = y + dy, x + dx, z + dz
                    if 0 <= ny < gh and 0 <= nx < gw and 0 <= nz < gd:
                        d = cells[y, x, z] - cells[ny, nx, nz]
                        total += float(np.sum(d * d))
    return total


def oracle_channel_stats(fmap, eps=1e-5):
    h, w, c = fmap.shape
    mus, sds = [], []
    for ch in range(c):
        vals = [float(fmap[y, x, ch]) for y in range(h) for x in range(w)]
        mu = sum(vals) / len(vals)
        var = sum((v - mu) ** 2 for v in vals) / len(vals)
        mus.append(mu)
        sds.append((var + eps) ** 0.5)
    return np.array(mus), np.array(sds)


def oracle_gram(fmap):
    h, w, c = fmap.shape
    g = np.zeros((c, c))
    for i in range(c):
        for j in range(c):
            g[i, j] = float(np.sum(fmap[..., i] * fmap[..., j])) / (h * w)
    return g


def psnr(a, b):
    mse = float(np.mean((np.asarray(a, np.float64)
                         - np.asarray(b, np.float64)) ** 2))
    if mse == 0.0:
        return np.inf
    return 10.0 * np.log10(1.0 / mse)


def synth_photo(h, w, seed=0, lo=0.0, hi=1.0):
    """Photo-like test image: smooth gradients, a soft vignette and
    band-limited texture, with broad luma coverage."""
    rng = np.random.default_rng(seed)
    y, x = np.mgrid[0:h, 0:w]
    base = 0.55 + 0.35 * np.sin(2.2 * np.pi * x / w + rng.uniform(0, 6))
    base = base[None].repeat(3, 0)
    base[1] = 0.5 + 0.4 * np.cos(1.7 * np.pi * y / h + rng.uniform(0, 6))
    base[2] = 0.5 + 0.3 * np.sin(1.3 * np.pi * (x + y) / (w + h))
    img = np.moveaxis(base, 0, -1)
    noise = rng.standard_normal((max(2, h // 8), max(2, w // 8), 3))
    import cv2
    noise = cv2.resize(noise, (w, h), interpolation=cv2.INTER_LINEAR)
    if noise.ndim == 2:
        noise = noise[:, :, None].repeat(3, axis=2)
    img = img + 0.08 * noise
    vign = 1.0 - 0.3 * (((x / w - 0.5) ** 2 + (y / h - 0.5) ** 2) * 2)
    img *= vign[..., None]
    mn, mx = img.min(), img.max()
    return lo + (hi - lo) * (img - mn) / (mx - mn)
