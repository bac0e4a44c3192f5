"""Toy-scale trainer for the grid renderer's coefficient network.

Predicts an affine bilateral grid from a 256x256 content/style pair and
trains against losses on the sliced output. The renderer is a separate
package; the only things crossing the boundary are GridFile bytes and
its command line. Nothing here imports it.
"""

from .features import FeatureExtractor, PretrainedWeightsError
from .model import CoeffNet
from .slicing import guidance, slice_apply
from .train import TrainConfig, TrainingDiverged, export_grid, train

__all__ = [
    "CoeffNet",
    "FeatureExtractor",
    "PretrainedWeightsError",
    "TrainConfig",
    "TrainingDiverged",
    "export_grid",
    "guidance",
    "slice_apply",
    "train",
]
