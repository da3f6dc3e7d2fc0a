"""Conditional prompt learning with augmentation-attribute decoupling.

A self-contained desk-scale stack: a reverse-mode autodiff tape, a synthetic
shape/color image world with frozen stand-in encoders, an instance-conditional
prompt model whose metanet response to augmentations (delta meta tokens) is
shaped by an adversarial triplet loss, silhouette-score profiling of those
tokens, and silhouette-driven weighted augmentation sampling.
"""

from .augment import STOCHASTIC, Augmentation, ToyImage, apply_augmentation
from .autodiff import Tensor, backward, finite_difference_check, no_grad
from .checkpoint import load_checkpoint, save_checkpoint
from .config import ExperimentConfig, load_config, save_config
from .dataset import ToyDataset, generate_dataset, load_dataset, save_dataset
from .encoders import FrozenEncoders
from .episodes import Episode, sample_episode
from .errors import (
    ConfigError,
    DataError,
    NumericError,
    SamplingError,
    ShapeError,
    TapeError,
)
from .losses import (
    LossWeights,
    adtriplet_loss,
    cross_entropy,
    total_loss,
    triplet_loss,
)
from .metrics import RunMetrics, harmonic_mean
from .profiling import (
    SamplerWeights,
    SilhouetteReport,
    pca_project,
    profile_deltas,
    silhouette_scores,
    wrs_sample,
    wrs_weights,
)
from .prompts import DeltaMetaToken, PromptModel
from .train import TrainResult, build_world, evaluate, train

__version__ = "0.1.0"

__all__ = [
    "Augmentation",
    "ToyImage",
    "apply_augmentation",
    "STOCHASTIC",
    "Tensor",
    "backward",
    "no_grad",
    "finite_difference_check",
    "save_checkpoint",
    "load_checkpoint",
    "ExperimentConfig",
    "load_config",
    "save_config",
    "ToyDataset",
    "generate_dataset",
    "save_dataset",
    "load_dataset",
    "FrozenEncoders",
    "Episode",
    "sample_episode",
    "ConfigError",
    "DataError",
    "NumericError",
    "SamplingError",
    "ShapeError",
    "TapeError",
    "LossWeights",
    "cross_entropy",
    "triplet_loss",
    "adtriplet_loss",
    "total_loss",
    "RunMetrics",
    "harmonic_mean",
    "SamplerWeights",
    "SilhouetteReport",
    "silhouette_scores",
    "wrs_weights",
    "wrs_sample",
    "pca_project",
    "profile_deltas",
    "DeltaMetaToken",
    "PromptModel",
    "TrainResult",
    "build_world",
    "train",
    "evaluate",
    "__version__",
]
