"""Bilateral-space image transformation: fit affine bilateral grids at
low resolution, slice them at full resolution."""

from .diffops import laplacian_backward, laplacian_energy, slice_backward
from .fit import FitError, FitProblem, FitReport, fit_grid
from .grid import (AffineBilateralGrid, FixedLuma, GridError,
                   PiecewiseLinearLUT, apply_affine, guidance,
                   make_identity_grid, resample_grid, slice_apply)
from .io import (FileFormatError, ImageIOError, downsample_to_edge,
                 load_image, read_fmap, read_grid_file, save_image,
                 write_fmap, write_grid_file)
from .pipeline import (PipelineError, StylizeConfig, bench_slice, gradcheck,
                       stylize, warmup)
from .stats import (StatsError, adain, channel_stats, content_loss,
                    gram_matrix, style_loss_adain, style_loss_gram,
                    total_loss, total_loss_gram)

__version__ = "0.1.0"

__all__ = [
    "AffineBilateralGrid", "FixedLuma", "PiecewiseLinearLUT",
    "make_identity_grid", "resample_grid", "slice_apply", "apply_affine",
    "guidance", "GridError",
    "slice_backward", "laplacian_energy", "laplacian_backward",
    "FitProblem", "FitReport", "fit_grid", "FitError",
    "channel_stats", "adain", "gram_matrix", "content_loss", "StatsError",
    "style_loss_gram", "style_loss_adain", "total_loss", "total_loss_gram",
    "read_grid_file", "write_grid_file", "read_fmap", "write_fmap",
    "load_image", "save_image", "downsample_to_edge",
    "FileFormatError", "ImageIOError",
    "StylizeConfig", "stylize", "bench_slice", "gradcheck", "warmup",
    "PipelineError",
]
