"""Image folder loading and pair sampling for toy training runs."""

import os

import cv2
import numpy as np
import torch

EXTS = (".png", ".jpg", ".jpeg")


class DataError(ValueError):
    pass


def load_image_256(path) -> torch.Tensor:
    """Reads one image, resizes the short side to 256 (area average)
    and center-crops to 256x256. Returns (3, 256, 256) float32 [0, 1]."""
    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise DataError(f"cannot read image: {path}")
    if raw.ndim == 2:
        raw = raw[:, :, None].repeat(3, axis=2)
    raw = raw[:, :, :3]
    scale = 65535.0 if raw.dtype == np.uint16 else 255.0
    img = raw[:, :, ::-1].astype(np.float32) / scale  # BGR -> RGB

    h, w = img.shape[:2]
    s = 256.0 / min(h, w)
    nh, nw = max(256, round(h * s)), max(256, round(w * s))
    img = cv2.resize(img, (nw, nh), interpolation=cv2.INTER_AREA)
    oy, ox = (nh - 256) // 2, (nw - 256) // 2
    img = img[oy:oy + 256, ox:ox + 256]
    return torch.from_numpy(np.ascontiguousarray(img.transpose(2, 0, 1)))


def load_folder(folder) -> torch.Tensor:
    paths = sorted(p for p in os.listdir(folder)
                   if os.path.splitext(p)[1].lower() in EXTS)
    if len(paths) < 2:
        raise DataError(
            f"need at least 2 images in {folder}, found {len(paths)}")
    return torch.stack([load_image_256(os.path.join(folder, p))
                        for p in paths])


def make_pairs(n_images: int, n_pairs: int, seed: int) -> list:
    """Deterministic (content, style) index pairs, style != content."""
    if n_images < 2:
        raise DataError("pairing needs at least 2 images")
    rng = np.random.default_rng(seed)
    pairs = []
    for _ in range(n_pairs):
        c = int(rng.integers(n_images))
        s = int(rng.integers(n_images - 1))
        if s >= c:
            s += 1
        pairs.append((c, s))
    return pairs
