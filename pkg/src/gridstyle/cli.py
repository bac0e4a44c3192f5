"""Command-line surface.

Every failure exits nonzero after printing a single machine-parsable
line of the form "error: <reason>" to stderr. Success prints key=value
report lines where a command has something to report.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from . import pipeline
from .fit import FitProblem, fit_grid
from .grid import DEFAULT_GUIDANCE, slice_apply
from .io import load_image, read_fmap, read_grid_file, save_image, write_grid_file


def _build_parser():
    p = argparse.ArgumentParser(
        prog="gridstyle",
        description="Photorealistic style transfer through affine "
                    "bilateral grids")
    sub = p.add_subparsers(dest="command", required=True)

    st = sub.add_parser("stylize", help="match a style and render")
    st.add_argument("--content", required=True)
    st.add_argument("--style", required=True)
    st.add_argument("--out", required=True)
    st.add_argument("--lowres", type=int, default=256)
    st.add_argument("--gw", type=int, default=16)
    st.add_argument("--gh", type=int, default=16)
    st.add_argument("--gd", type=int, default=8)
    st.add_argument("--lambda-r", type=float, default=0.15)
    st.add_argument("--clamp", action="store_true")
    st.add_argument("--features-content")
    st.add_argument("--features-style")
    st.add_argument("--save-grid")

    ft = sub.add_parser("fit", help="fit a grid to an image pair")
    ft.add_argument("--input", required=True)
    ft.add_argument("--output", required=True)
    ft.add_argument("--grid", required=True)
    ft.add_argument("--gw", type=int, default=16)
    ft.add_argument("--gh", type=int, default=16)
    ft.add_argument("--gd", type=int, default=8)
    ft.add_argument("--lambda-r", type=float, default=0.15)
    ft.add_argument("--max-iters", type=int, default=200)
    ft.add_argument("--tol", type=float, default=1e-6)

    ap = sub.add_parser("apply", help="render an image through a grid file")
    ap.add_argument("--grid", required=True)
    ap.add_argument("--input", required=True)
    ap.add_argument("--out", required=True)
    ap.add_argument("--clamp", action="store_true")

    be = sub.add_parser("bench", help="time the slicer")
    be.add_argument("--width", type=int, required=True)
    be.add_argument("--height", type=int, required=True)
    be.add_argument("--gw", type=int, default=16)
    be.add_argument("--gh", type=int, default=16)
    be.add_argument("--gd", type=int, default=8)
    be.add_argument("--iters", type=int, default=9)

    gc = sub.add_parser("gradcheck", help="finite-difference the adjoints")
    gc.add_argument("--seed", type=int, default=0)

    fr = sub.add_parser("frames", help="render a frame directory")
    fr.add_argument("--grid")
    fr.add_argument("--in-dir", required=True)
    fr.add_argument("--out-dir", required=True)
    fr.add_argument("--style",
                    help="fit a grid from this style instead of --grid")
    fr.add_argument("--refit", action="store_true",
                    help="with --style, refit per frame instead of "
                         "reusing one grid")
    fr.add_argument("--clamp", action="store_true")
    return p


def _load_feature_planes(path):
    layers = read_fmap(path)
    if len(layers) != 1:
        raise pipeline.PipelineError(
            f"feature file {path} holds {len(layers)} layers; stylize "
            "needs exactly one 3-channel map usable as color planes")
    return layers[0][1].astype(np.float64)


def _cmd_stylize(args):
    content, depth = load_image(args.content)
    style, _ = load_image(args.style)
    cfg = pipeline.StylizeConfig(
        lowres=args.lowres, gw=args.gw, gh=args.gh, gd=args.gd,
        lambda_r=args.lambda_r, clamp=args.clamp)
    if args.features_content:
        cfg.features_content = _load_feature_planes(args.features_content)
    if args.features_style:
        cfg.features_style = _load_feature_planes(args.features_style)
    out, grid, report = pipeline.stylize(content, style, cfg)
    save_image(args.out, out, clamp=args.clamp, depth=depth)
    if args.save_grid:
        write_grid_file(args.save_grid, grid)
    print(f"iterations={report.iterations} "
          f"relative_residual={report.relative_residual:.3e} "
          f"converged={report.converged}")
    return 0


def _cmd_fit(args):
    inp, _ = load_image(args.input)
    outimg, _ = load_image(args.output)
    problem = FitProblem(input_lowres=inp, output_lowres=outimg,
                         gw=args.gw, gh=args.gh, gd=args.gd,
                         lambda_r=args.lambda_r, max_iters=args.max_iters,
                         tol=args.tol)
    grid, report = fit_grid(problem)
    write_grid_file(args.grid, grid)
    print(f"iterations={report.iterations} "
          f"relative_residual={report.relative_residual:.3e} "
          f"data_term={report.data_term:.6e} "
          f"laplacian_energy={report.laplacian_energy:.6e} "
          f"seconds={report.seconds:.3f} converged={report.converged}")
    return 0


def _cmd_apply(args):
    grid, curve = read_grid_file(args.grid)
    img, depth = load_image(args.input)
    out = slice_apply(grid, img, curve)
    save_image(args.out, out, clamp=args.clamp, depth=depth)
    return 0


def _cmd_bench(args):
    rep = pipeline.bench_slice(args.width, args.height, gw=args.gw,
                               gh=args.gh, gd=args.gd, iters=args.iters)
    print(f"size={rep['width']}x{rep['height']} "
          f"grid={rep['gw']}x{rep['gh']}x{rep['gd']} iters={rep['iters']}")
    print(f"median_ms={rep['median_ms']:.2f} min_ms={rep['min_ms']:.2f} "
          f"mpix_per_s={rep['mpix_per_s']:.2f} "
          f"ms_per_frame={rep['ms_per_frame']:.2f}")
    return 0


def _cmd_gradcheck(args):
    rep = pipeline.gradcheck(seed=args.seed)
    print(f"instances={rep['instances']} seed={rep['seed']} "
          f"step={rep['step']:g}")
    print(f"max_rel_err_slice={rep['max_rel_err_slice']:.3e} "
          f"max_rel_err_laplacian={rep['max_rel_err_laplacian']:.3e} "
          f"seconds={rep['seconds']:.2f}")
    if max(rep["max_rel_err_slice"], rep["max_rel_err_laplacian"]) > 1e-3:
        print("error: gradient check exceeded 1e-3 relative error",
              file=sys.stderr)
        return 1
    return 0


def _cmd_frames(args):
    if bool(args.grid) == bool(args.style):
        raise pipeline.PipelineError(
            "frames needs exactly one of --grid or --style")
    in_dir = Path(args.in_dir)
    out_dir = Path(args.out_dir)
    if not in_dir.is_dir():
        raise pipeline.PipelineError(f"not a directory: {in_dir}")
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = sorted(in_dir.glob("*.png"))
    if not paths:
        raise pipeline.PipelineError(f"no .png frames in {in_dir}")

    if args.grid:
        grid, curve = read_grid_file(args.grid)
        style = None
    else:
        style, _ = load_image(args.style)
        grid, curve = None, None

    for i, path in enumerate(paths):
        img, depth = load_image(path)
        if args.style and (args.refit or grid is None):
            # one grid per style by default, fitted on the first frame;
            # --refit trades temporal stability for per-frame accuracy
            _, grid, _ = pipeline.stylize(img, style)
            curve = DEFAULT_GUIDANCE
        out = slice_apply(grid, img, curve)
        save_image(out_dir / path.name, out, clamp=args.clamp, depth=depth)
    print(f"frames={len(paths)} out_dir={out_dir}")
    return 0


_HANDLERS = {
    "stylize": _cmd_stylize,
    "fit": _cmd_fit,
    "apply": _cmd_apply,
    "bench": _cmd_bench,
    "gradcheck": _cmd_gradcheck,
    "frames": _cmd_frames,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except Exception as e:  # noqa: BLE001 - the contract is one line + code
        msg = str(e).replace("\n", " ").strip() or type(e).__name__
        print(f"error: {msg}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
