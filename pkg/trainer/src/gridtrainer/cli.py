"""Command line: train on an image folder, export grids.

Failures print one "error: <reason>" line to stderr and exit nonzero,
matching the renderer CLI's convention so scripts can treat the two
tools uniformly.
"""

import argparse
import sys

from . import data
from .features import FeatureExtractor
from .train import (TrainConfig, evaluate, export_grid,
                    load_checkpoint, save_checkpoint, train)


def _build_parser():
    p = argparse.ArgumentParser(
        prog="gridtrainer",
        description="Train a coefficient-prediction network and export "
                    "affine bilateral grids")
    sub = p.add_subparsers(dest="command", required=True)

    tr = sub.add_parser("train", help="toy training run on a photo folder")
    tr.add_argument("--data", required=True, help="folder of images")
    tr.add_argument("--out", required=True, help="checkpoint path")
    tr.add_argument("--steps", type=int, default=300)
    tr.add_argument("--batch", type=int, default=4)
    tr.add_argument("--pairs", type=int, default=10)
    tr.add_argument("--lambda-r", type=float, default=0.15)
    tr.add_argument("--seed", type=int, default=0)
    tr.add_argument("--style-path", choices=("cascade", "refresh"),
                    default="cascade")
    tr.add_argument("--untrained-features", type=int, metavar="SEED",
                    help="use a seeded untrained extractor instead of "
                         "pretrained weights (testing mode)")

    ex = sub.add_parser("export", help="predict one grid and write it")
    ex.add_argument("--ckpt", required=True)
    ex.add_argument("--content", required=True)
    ex.add_argument("--style", required=True)
    ex.add_argument("--out", required=True, help="GridFile path")
    return p


def _extractor(args):
    if getattr(args, "untrained_features", None) is not None:
        return FeatureExtractor(pretrained=False,
                                seed=args.untrained_features), \
            ("untrained", args.untrained_features)
    return FeatureExtractor(), "pretrained"


def _cmd_train(args):
    import torch

    from .model import CoeffNet

    images = data.load_folder(args.data)
    pairs = data.make_pairs(images.shape[0], args.pairs, args.seed)
    extractor, mode = _extractor(args)
    config = TrainConfig(steps=args.steps, batch_size=args.batch,
                         lambda_r=args.lambda_r, seed=args.seed,
                         style_path=args.style_path)
    torch.manual_seed(config.seed)
    model = CoeffNet(style_path=config.style_path)
    before = evaluate(model, extractor, images, pairs,
                               config.lambda_r)
    model, history = train(images, pairs, config, extractor,
                                    model=model)
    after = evaluate(model, extractor, images, pairs,
                              config.lambda_r)
    save_checkpoint(args.out, model, config, mode)
    print(f"pairs={len(pairs)}")
    print(f"steps={len(history)}")
    print(f"loss_before={before:.6f}")
    print(f"loss_after={after:.6f}")
    print(f"checkpoint={args.out}")
    return 0


def _cmd_export(args):
    model, _, extractor = load_checkpoint(args.ckpt)
    content = data.load_image_256(args.content)
    style = data.load_image_256(args.style)
    cells = export_grid(model, extractor, content, style, args.out)
    print(f"grid={args.out}")
    print(f"cells={cells.shape[0]}x{cells.shape[1]}x{cells.shape[2]}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "train":
            return _cmd_train(args)
        return _cmd_export(args)
    except (OSError, ValueError, RuntimeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
