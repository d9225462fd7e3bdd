"""Scikit-learn style estimator facade over the training pipeline.

SGNNIBClassifier exposes fit/predict/predict_proba/score plus
get_params/set_params, so it clones and grid-searches like any sklearn
estimator while operating on MultiRelationGraph inputs. Training is
transductive; a fitted model can still score any graph with the same
feature dimensionality and relation count.
"""
from __future__ import annotations

import inspect

import numpy as np

from .data import load_checkpoint, save_checkpoint
from .graph import MultiRelationGraph
from .losses import LossConfig
from .metrics import MetricsReport
from .model import init_params
from .trainer import TrainConfig, evaluate, predict, train
from .validation import check_compatible, check_graph


class NotFittedError(ValueError):
    """Raised when predict/score is called before fit."""


class SGNNIBClassifier:
    """Fraud classifier on multi-relation graphs.

    Parameters mirror TrainConfig; loss weights are exposed flat
    (edge_loss_weight = lambda, ib_loss_weight = eta, ib_balance = mu) so
    they sweep naturally with sklearn tooling.
    """

    def __init__(self, hidden_dim: int = 64, epochs: int = 200,
                 lr: float = 0.005, lr_warmup_epochs: int = 0,
                 edge_lr_scale: float = 1.5, head_lr_scale: float = 10.0,
                 weight_decay: float = 0.0,
                 filter_alpha: int = 1, filter_beta: int = 2,
                 edge_loss_weight: float = 1.0, ib_loss_weight: float = 0.6,
                 ib_balance: float = 1e-6, mi_metric: str = "cosine",
                 include_cross_frequency_term: bool = False,
                 split_refresh_every: int = 1, patience: int = 30,
                 split_threshold: float = 0.5,
                 allow_zero_order_filters: bool = False,
                 disable_edge_classifier: bool = False,
                 disable_low_pass: bool = False,
                 disable_high_pass: bool = False,
                 disable_relation_fusion: bool = False,
                 disable_ib: bool = False, seed: int = 0):
        self.hidden_dim = hidden_dim
        self.epochs = epochs
        self.lr = lr
        self.lr_warmup_epochs = lr_warmup_epochs
        self.edge_lr_scale = edge_lr_scale
        self.head_lr_scale = head_lr_scale
        self.weight_decay = weight_decay
        self.filter_alpha = filter_alpha
        self.filter_beta = filter_beta
        self.edge_loss_weight = edge_loss_weight
        self.ib_loss_weight = ib_loss_weight
        self.ib_balance = ib_balance
        self.mi_metric = mi_metric
        self.include_cross_frequency_term = include_cross_frequency_term
        self.split_refresh_every = split_refresh_every
        self.patience = patience
        self.split_threshold = split_threshold
        self.allow_zero_order_filters = allow_zero_order_filters
        self.disable_edge_classifier = disable_edge_classifier
        self.disable_low_pass = disable_low_pass
        self.disable_high_pass = disable_high_pass
        self.disable_relation_fusion = disable_relation_fusion
        self.disable_ib = disable_ib
        self.seed = seed

    @classmethod
    def _param_names(cls) -> list[str]:
        sig = inspect.signature(cls.__init__)
        return [p for p in sig.parameters if p != "self"]

    def get_params(self, deep: bool = True) -> dict:
        return {name: getattr(self, name) for name in self._param_names()}

    def set_params(self, **params) -> "SGNNIBClassifier":
        valid = set(self._param_names())
        for key, value in params.items():
            if key not in valid:
                raise ValueError(
                    f"invalid parameter {key!r} for SGNNIBClassifier")
            setattr(self, key, value)
        return self

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs, lr=self.lr,
            lr_warmup_epochs=self.lr_warmup_epochs,
            edge_lr_scale=self.edge_lr_scale,
            head_lr_scale=self.head_lr_scale,
            weight_decay=self.weight_decay, seed=self.seed,
            hidden_dim=self.hidden_dim,
            filter_alpha=self.filter_alpha, filter_beta=self.filter_beta,
            loss=LossConfig(
                mu=self.ib_balance, edge_weight=self.edge_loss_weight,
                ib_weight=self.ib_loss_weight, mi_metric=self.mi_metric,
                include_cross_frequency_term=self.include_cross_frequency_term),
            split_refresh_every=self.split_refresh_every,
            patience=self.patience, split_threshold=self.split_threshold,
            allow_zero_order_filters=self.allow_zero_order_filters,
            disable_edge_classifier=self.disable_edge_classifier,
            disable_low_pass=self.disable_low_pass,
            disable_high_pass=self.disable_high_pass,
            disable_relation_fusion=self.disable_relation_fusion,
            disable_ib=self.disable_ib)

    def fit(self, graph: MultiRelationGraph, y=None) -> "SGNNIBClassifier":
        """Train on a graph carrying labels and splits; y is ignored
        (labels live on the graph)."""
        graph = check_graph(graph, require_split=True, require_labels=True)
        self._store, self.report_ = train(graph, self.train_config())
        self.feature_dim_ = graph.feature_dim
        self.num_relations_ = graph.num_relations
        self.graph_ = graph
        self.classes_ = np.array([0, 1])
        return self

    def _require_fitted(self):
        if not hasattr(self, "_store"):
            raise NotFittedError("call fit before predicting or scoring")

    def _target_graph(self, graph) -> MultiRelationGraph:
        self._require_fitted()
        if graph is None:
            return self.graph_
        graph = check_graph(graph)
        check_compatible(graph, self.feature_dim_, self.num_relations_)
        return graph

    def predict_proba(self, graph: MultiRelationGraph | None = None) -> np.ndarray:
        """(N, 2) class probabilities; defaults to the fitted graph."""
        graph = self._target_graph(graph)
        fraud = predict(graph, self._store, self.train_config())
        return np.column_stack([1.0 - fraud, fraud])

    def decision_function(self, graph: MultiRelationGraph | None = None) -> np.ndarray:
        return self.predict_proba(graph)[:, 1]

    def predict(self, graph: MultiRelationGraph | None = None) -> np.ndarray:
        """0/1 fraud labels at the 0.5 probability threshold."""
        return (self.decision_function(graph) >= 0.5).astype(np.int8)

    def evaluate(self, split: str = "test",
                 graph: MultiRelationGraph | None = None) -> MetricsReport:
        graph = self._target_graph(graph)
        return evaluate(graph, self._store, split, self.train_config())

    def score(self, graph: MultiRelationGraph | None = None, y=None,
              split: str = "test") -> float:
        """AUC on the requested split, sklearn-style single number."""
        return self.evaluate(split=split, graph=graph).auc

    def save(self, path) -> None:
        self._require_fitted()
        save_checkpoint(self._store, self.train_config(), path)

    def load(self, path, graph: MultiRelationGraph) -> "SGNNIBClassifier":
        """Restore parameters from a checkpoint for the given graph."""
        values, cfg = load_checkpoint(path)
        graph = check_graph(graph)
        self.set_params(**_estimator_params_from_config(cfg))
        store = init_params(graph.feature_dim, graph.num_relations,
                            cfg.model_config(), seed=cfg.seed)
        store.load_values(values)
        self._store = store
        self.feature_dim_ = graph.feature_dim
        self.num_relations_ = graph.num_relations
        self.graph_ = graph
        self.classes_ = np.array([0, 1])
        return self


def _estimator_params_from_config(cfg: TrainConfig) -> dict:
    return {
        "hidden_dim": cfg.hidden_dim, "epochs": cfg.epochs, "lr": cfg.lr,
        "lr_warmup_epochs": cfg.lr_warmup_epochs,
        "edge_lr_scale": cfg.edge_lr_scale,
        "head_lr_scale": cfg.head_lr_scale,
        "weight_decay": cfg.weight_decay,
        "filter_alpha": cfg.filter_alpha, "filter_beta": cfg.filter_beta,
        "edge_loss_weight": cfg.loss.edge_weight,
        "ib_loss_weight": cfg.loss.ib_weight, "ib_balance": cfg.loss.mu,
        "mi_metric": cfg.loss.mi_metric,
        "include_cross_frequency_term": cfg.loss.include_cross_frequency_term,
        "split_refresh_every": cfg.split_refresh_every,
        "patience": cfg.patience, "split_threshold": cfg.split_threshold,
        "allow_zero_order_filters": cfg.allow_zero_order_filters,
        "disable_edge_classifier": cfg.disable_edge_classifier,
        "disable_low_pass": cfg.disable_low_pass,
        "disable_high_pass": cfg.disable_high_pass,
        "disable_relation_fusion": cfg.disable_relation_fusion,
        "disable_ib": cfg.disable_ib, "seed": cfg.seed,
    }
