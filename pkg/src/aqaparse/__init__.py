"""Action quality assessment via spatial-temporal action parsing.

Pipeline: a mask-supervised spatial parser gates the video embedding, a
temporal parser localizes step transitions and splits the action into
steps, a static per-frame encoder adds context, and contrastive regression
scores the query against exemplars of the same action type.
"""

from .config import EvalConfig, ExperimentConfig, TrainConfig, load_config
from .data import (
    QueryExemplarPair,
    SnippetLayout,
    TransitionSet,
    VideoSample,
    select_exemplars,
    snippetize,
    split_train_test,
)
from .manifest import load_annotations, save_corpus
from .metrics import MetricConfig, MetricReport
from .model import AQAModel, ModelConfig, build_model
from .synthetic import SyntheticConfig, generate_synthetic

__version__ = "0.1.0"

__all__ = [
    "AQAModel",
    "EvalConfig",
    "ExperimentConfig",
    "MetricConfig",
    "MetricReport",
    "ModelConfig",
    "QueryExemplarPair",
    "SnippetLayout",
    "SyntheticConfig",
    "TrainConfig",
    "TransitionSet",
    "VideoSample",
    "build_model",
    "generate_synthetic",
    "load_annotations",
    "load_config",
    "save_corpus",
    "select_exemplars",
    "snippetize",
    "split_train_test",
    "__version__",
]
