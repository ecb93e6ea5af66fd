"""depfuse: depression screening from social-media timelines.

Statistical behavior features and a token sequence per user are fused by a
cross-attention network (with a concat baseline for ablation) trained with
Adam and cross-entropy on a from-scratch 2-D autodiff engine. Everything is
seed-deterministic and verifiable at desk scale on synthetic corpora.
"""

__version__ = "0.1.0"

from .corpus import ParseIssue, SplitSpec, Tweet, UserRecord, parse_corpus, split_dataset
from .features import (
    FeatureNormalizer,
    LexiconScorer,
    StatFeatureVector,
    extract_features,
    fit_normalizer,
)
from .metrics import ConfusionMatrix, MetricsReport, compute_confusion, metrics_from_confusion
from .model import FusionModel, ModelConfig, init_params, load_checkpoint, save_checkpoint
from .synth import SynthDatasetSpec, SynthParams, generate_dataset
from .tensor import Tensor
from .train import TrainConfig, cross_entropy_loss, evaluate, train

__all__ = [
    "ConfusionMatrix",
    "FeatureNormalizer",
    "FusionModel",
    "LexiconScorer",
    "MetricsReport",
    "ModelConfig",
    "ParseIssue",
    "SplitSpec",
    "StatFeatureVector",
    "SynthDatasetSpec",
    "SynthParams",
    "Tensor",
    "TrainConfig",
    "Tweet",
    "UserRecord",
    "compute_confusion",
    "cross_entropy_loss",
    "evaluate",
    "extract_features",
    "fit_normalizer",
    "generate_dataset",
    "init_params",
    "load_checkpoint",
    "metrics_from_confusion",
    "parse_corpus",
    "save_checkpoint",
    "split_dataset",
    "train",
]
