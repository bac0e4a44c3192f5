"""Channel statistics matching and the loss stack.

Feature maps are (H, W, C) arrays. The default pipeline uses raw RGB
at low resolution as its "features", which turns statistics matching
into a Reinhard-style color transfer; externally computed maps (e.g.
VGG activations written to an FMAP file) drop in through the same
functions.

Statistics are population moments over spatial positions with a fixed
eps = 1e-5 added under the square root, which keeps the renormalization
defined on constant channels. Losses are normalized per layer by
element count (Gram terms by C^2) so their magnitude does not depend
on resolution.
"""

import numpy as np

EPS = 1e-5


class StatsError(ValueError):
    pass


def _check_map(fmap, need_stats=False):
    fmap = np.asarray(fmap, np.float64)
    if fmap.ndim != 3:
        raise StatsError("feature map must be (H, W, C)")
    # the 2-position floor only matters where moments are taken
    if need_stats and fmap.shape[0] * fmap.shape[1] < 2:
        raise StatsError("feature map needs at least 2 spatial positions")
    return fmap


def channel_stats(fmap):
    """Per-channel (mean, std) over spatial positions; std includes the
    eps term: sqrt(var + 1e-5)."""
    fmap = _check_map(fmap, need_stats=True)
    mu = fmap.mean(axis=(0, 1))
    var = fmap.var(axis=(0, 1))
    return mu, np.sqrt(var + EPS)


def adain(content, style):
    """sigma(y) * (x - mu(x)) / sigma(x) + mu(y), per channel."""
    content = _check_map(content, need_stats=True)
    style = _check_map(style, need_stats=True)
    if content.shape[2] != style.shape[2]:
        raise StatsError("channel counts differ "
                         f"({content.shape[2]} vs {style.shape[2]})")
    mu_c, sd_c = channel_stats(content)
    mu_s, sd_s = channel_stats(style)
    return sd_s * (content - mu_c) / sd_c + mu_s


def gram_matrix(fmap):
    """C x C Gram matrix of the spatially flattened map, normalized by
    spatial size."""
    fmap = _check_map(fmap)
    h, w, c = fmap.shape
    flat = fmap.reshape(h * w, c).T
    return (flat @ flat.T) / (h * w)


def _check_sets(a, b):
    if len(a) != len(b):
        raise StatsError(f"layer counts differ ({len(a)} vs {len(b)})")


def content_loss(out_features, content_features) -> float:
    """Sum over layers of mean squared feature difference."""
    _check_sets(out_features, content_features)
    total = 0.0
    for fo, fc in zip(out_features, content_features):
        fo = _check_map(fo)
        fc = _check_map(fc)
        if fo.shape != fc.shape:
            raise StatsError(f"feature shapes differ ({fo.shape} vs {fc.shape})")
        d = fo - fc
        total += float(np.sum(d * d)) / d.size
    return total


def style_loss_gram(out_features, style_features) -> float:
    """Sum over layers of squared Gram differences, each normalized by
    C^2."""
    _check_sets(out_features, style_features)
    total = 0.0
    for fo, fs in zip(out_features, style_features):
        go = gram_matrix(fo)
        gs = gram_matrix(fs)
        if go.shape != gs.shape:
            raise StatsError("channel counts differ between layers")
        d = go - gs
        total += float(np.sum(d * d)) / d.size
    return total


def style_loss_adain(out_features, style_features) -> float:
    """Sum over layers of ||mu diff||^2 + ||sigma diff||^2, each layer
    normalized by its channel count."""
    _check_sets(out_features, style_features)
    total = 0.0
    for fo, fs in zip(out_features, style_features):
        mu_o, sd_o = channel_stats(fo)
        mu_s, sd_s = channel_stats(fs)
        if mu_o.shape != mu_s.shape:
            raise StatsError("channel counts differ between layers")
        c = mu_o.shape[0]
        total += (float(np.sum((mu_o - mu_s) ** 2))
                  + float(np.sum((sd_o - sd_s) ** 2))) / c
    return total


def total_loss(out_features, content_features, style_features, grid,
               weights=(0.5, 1.0, 0.15)) -> float:
    """lambda_c * content + lambda_sa * stats-style + lambda_r *
    grid smoothness."""
    from .diffops import laplacian_energy

    lc, lsa, lr = weights
    if lc < 0 or lsa < 0 or lr < 0:
        raise StatsError("loss weights must be nonnegative")
    return (lc * content_loss(out_features, content_features)
            + lsa * style_loss_adain(out_features, style_features)
            + lr * laplacian_energy(grid))


def total_loss_gram(out_features, content_features, style_features,
                    alpha=1.0, beta=1.0) -> float:
    """Gram-based alternative: alpha * content + beta * gram-style."""
    return (alpha * content_loss(out_features, content_features)
            + beta * style_loss_gram(out_features, style_features))
