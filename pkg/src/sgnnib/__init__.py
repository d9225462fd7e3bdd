"""Spectral graph network with information-bottleneck denoising for fraud
detection on multi-relation graphs."""

from .data import (
    DatasetManifest,
    RelationSpec,
    SyntheticSpec,
    generate_synthetic,
    load_checkpoint,
    load_dataset,
    save_checkpoint,
    save_dataset,
)
from .estimator import SGNNIBClassifier
from .graph import EdgeList, MultiRelationGraph, SparseOperator
from .losses import LossConfig
from .metrics import MetricsReport, evaluate_scores
from .trainer import TrainConfig, TrainReport, evaluate, train

__version__ = "0.1.0"

__all__ = [
    "DatasetManifest",
    "EdgeList",
    "LossConfig",
    "MetricsReport",
    "MultiRelationGraph",
    "RelationSpec",
    "SGNNIBClassifier",
    "SparseOperator",
    "SyntheticSpec",
    "TrainConfig",
    "TrainReport",
    "evaluate",
    "evaluate_scores",
    "generate_synthetic",
    "load_checkpoint",
    "load_dataset",
    "save_checkpoint",
    "save_dataset",
    "train",
    "__version__",
]
