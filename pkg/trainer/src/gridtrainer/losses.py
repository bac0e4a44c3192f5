"""Training losses on the rendered output.

total = lambda_c * content + lambda_sa * style_stats + lambda_r * smooth
with lambda_c = 0.5, lambda_sa = 1, lambda_r = 0.15.

Content fidelity is the mean squared feature difference at the deepest
tap (conv4_1); style fidelity is the squared difference of per-channel
mean and standard deviation at all four taps, averaged per channel and
summed over taps. The smoothness term divides the raw neighbor-pair
energy by the number of ordered pairs times 12, i.e. it is the mean
squared coefficient step between adjacent cells, so lambda_r means the
same thing at any grid size. All reductions are means so none of the
weights depends on resolution.
"""

import torch

from .blocks import EPS
from .slicing import grid_laplacian

LAMBDA_C = 0.5
LAMBDA_SA = 1.0
LAMBDA_R = 0.15


def content_loss(feats_out: list, feats_content: list) -> torch.Tensor:
    return ((feats_out[-1] - feats_content[-1]) ** 2).mean()


def _stats(f):
    mu = f.mean(dim=(2, 3))
    var = f.var(dim=(2, 3), unbiased=False)
    return mu, torch.sqrt(var + EPS)


def style_stat_loss(feats_out: list, feats_style: list) -> torch.Tensor:
    total = feats_out[0].new_zeros(())
    for fo, fs in zip(feats_out, feats_style):
        mu_o, sd_o = _stats(fo)
        mu_s, sd_s = _stats(fs)
        total = total + ((mu_o - mu_s) ** 2).mean() + \
            ((sd_o - sd_s) ** 2).mean()
    return total


def smoothness_loss(grid: torch.Tensor) -> torch.Tensor:
    n, gh, gw, gd = grid.shape[:4]
    pairs = 2 * ((gh - 1) * gw * gd + gh * (gw - 1) * gd + gh * gw * (gd - 1))
    if pairs == 0:
        return grid.new_zeros(())
    return grid_laplacian(grid) / (n * pairs * 12)


def total_loss(feats_out, feats_content, feats_style, grid,
               lambda_r: float = LAMBDA_R) -> dict:
    lc = content_loss(feats_out, feats_content)
    lsa = style_stat_loss(feats_out, feats_style)
    lr = smoothness_loss(grid)
    return {
        "content": lc,
        "style": lsa,
        "smooth": lr,
        "total": LAMBDA_C * lc + LAMBDA_SA * lsa + lambda_r * lr,
    }
