"""Training loop, checkpointing, grid export.

One step: draw a batch of (content, style) pairs, predict grids, slice
the content images through them, push the sliced output through the
frozen extractor, and take a loss step. Features of the dataset images
never change, so they are computed once up front; only the rendered
output is re-encoded each step.

Divergence (non-finite total loss) aborts with the recent loss history
in the exception rather than letting Adam march NaNs through the
weights.
"""

from dataclasses import asdict, dataclass

import numpy as np
import torch

from . import gridfile, losses
from .features import FeatureExtractor
from .model import CoeffNet
from .slicing import slice_apply


class TrainingDiverged(RuntimeError):
    def __init__(self, step, history_tail):
        self.step = step
        self.history_tail = history_tail
        super().__init__(
            f"non-finite loss at step {step}; recent totals: "
            + ", ".join(f"{h['total']:.4g}" for h in history_tail))


@dataclass
class TrainConfig:
    steps: int = 300
    batch_size: int = 4
    lr: float = 1e-4
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8
    lambda_r: float = losses.LAMBDA_R
    seed: int = 0
    style_path: str = "cascade"

    def __post_init__(self):
        if self.steps < 1 or self.batch_size < 1:
            raise ValueError("steps and batch_size must be >= 1")
        if self.lr <= 0 or self.lambda_r < 0:
            raise ValueError("lr must be > 0 and lambda_r >= 0")


def _features_per_image(extractor, images):
    with torch.no_grad():
        feats = extractor(images)
    return [[f[i:i + 1] for f in feats] for i in range(images.shape[0])]


def _batched_feats(cached, idxs):
    return [torch.cat([cached[i][k] for i in idxs]) for k in range(4)]


def evaluate(model, extractor, images, pairs, lambda_r) -> float:
    """Mean total loss over the given pairs, no gradients."""
    model.eval()
    cached = _features_per_image(extractor, images)
    total = 0.0
    with torch.no_grad():
        for c, s in pairs:
            fc, fs = cached[c], cached[s]
            grid = model.forward_features(fc, fs)
            out = slice_apply(grid, images[c:c + 1])
            fo = extractor(out)
            parts = losses.total_loss(fo, fc, fs, grid, lambda_r)
            total += float(parts["total"])
    return total / len(pairs)


def train(images: torch.Tensor, pairs: list, config: TrainConfig,
          extractor: FeatureExtractor, model: CoeffNet = None):
    """images: (M, 3, 256, 256); pairs: (content, style) index tuples.
    Returns (model, history), history one dict per step."""
    if len(pairs) < 2:
        raise ValueError("need at least 2 training pairs")
    torch.manual_seed(config.seed)
    if model is None:
        model = CoeffNet(style_path=config.style_path)
    model.train()
    opt = torch.optim.Adam(model.parameters(), lr=config.lr,
                           betas=config.betas, eps=config.eps)
    cached = _features_per_image(extractor, images)
    rng = np.random.default_rng(config.seed)

    history = []
    for step in range(config.steps):
        take = rng.choice(len(pairs), size=min(config.batch_size,
                                               len(pairs)), replace=False)
        cs = [pairs[i] for i in take]
        fc = _batched_feats(cached, [c for c, _ in cs])
        fs = _batched_feats(cached, [s for _, s in cs])
        batch_imgs = torch.stack([images[c] for c, _ in cs])

        grid = model.forward_features(fc, fs)
        out = slice_apply(grid, batch_imgs)
        fo = extractor(out)
        parts = losses.total_loss(fo, fc, fs, grid, config.lambda_r)

        record = {k: float(v.detach()) for k, v in parts.items()}
        record["step"] = step
        history.append(record)
        if not np.isfinite(record["total"]):
            raise TrainingDiverged(step, history[-5:])

        opt.zero_grad()
        parts["total"].backward()
        opt.step()
    return model, history


def save_checkpoint(path, model, config: TrainConfig, feature_mode) -> None:
    """feature_mode: "pretrained" or ("untrained", seed)."""
    torch.save({"model": model.state_dict(),
                "config": asdict(config),
                "feature_mode": feature_mode}, path)


def load_checkpoint(path):
    """Returns (model, config, extractor) rebuilt from the checkpoint."""
    ckpt = torch.load(path, weights_only=False)
    config = TrainConfig(**ckpt["config"])
    model = CoeffNet(style_path=config.style_path)
    model.load_state_dict(ckpt["model"])
    model.eval()
    mode = ckpt["feature_mode"]
    if mode == "pretrained":
        extractor = FeatureExtractor()
    else:
        extractor = FeatureExtractor(pretrained=False, seed=mode[1])
    return model, config, extractor


def export_grid(model, extractor, content: torch.Tensor,
                style: torch.Tensor, path) -> np.ndarray:
    """Predicts the grid for one pair and writes it as a GridFile.
    content/style: (3, 256, 256). Returns the cells as float32."""
    model.eval()
    with torch.no_grad():
        grid = model.forward_features(extractor(content[None]),
                                      extractor(style[None]))
    cells = grid[0].numpy().astype(np.float32)
    gridfile.write(path, cells)
    return cells
