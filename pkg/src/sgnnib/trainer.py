"""Full-batch training loop with per-epoch edge splitting, balanced
sampling, validation-based early stopping, and final test evaluation."""
from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import ParamStore, adam_step, backward
from .edges import build_training_edges, edge_loss, sample_balanced_edges
from .graph import (
    LABEL_UNKNOWN,
    GraphError,
    MultiRelationGraph,
    normalized_laplacian,
)
from .losses import (
    LossConfig,
    LossError,
    LossReport,
    classification_loss,
    joint_loss,
    sample_balanced_nodes,
)
from .metrics import MetricsError, MetricsReport, evaluate_scores
from .model import ModelConfig, forward, init_params


class TrainError(ValueError):
    """Raised for unusable training setups (degenerate splits, bad config)."""


@dataclass
class TrainConfig:
    """Everything that determines a run; serializable for checkpoints."""

    epochs: int = 200
    lr: float = 0.005
    lr_warmup_epochs: int = 0
    edge_lr_scale: float = 1.5
    head_lr_scale: float = 10.0
    weight_decay: float = 0.0
    seed: int = 0
    hidden_dim: int = 64
    filter_alpha: int = 1
    filter_beta: int = 2
    loss: LossConfig = field(default_factory=LossConfig)
    split_refresh_every: int = 1
    patience: int = 30
    split_threshold: float = 0.5
    allow_zero_order_filters: bool = False
    disable_edge_classifier: bool = False
    disable_low_pass: bool = False
    disable_high_pass: bool = False
    disable_relation_fusion: bool = False
    disable_ib: bool = False

    def __post_init__(self):
        if self.epochs < 1:
            raise TrainError(f"epochs must be >= 1, got {self.epochs}")
        if self.lr <= 0:
            raise TrainError(f"lr must be positive, got {self.lr}")
        if self.patience < 1:
            raise TrainError(f"patience must be >= 1, got {self.patience}")
        if self.split_refresh_every < 1:
            raise TrainError("split_refresh_every must be >= 1")

    def model_config(self) -> ModelConfig:
        return ModelConfig(
            hidden_dim=self.hidden_dim,
            filter_alpha=self.filter_alpha,
            filter_beta=self.filter_beta,
            split_threshold=self.split_threshold,
            allow_zero_order_filters=self.allow_zero_order_filters,
            disable_edge_classifier=self.disable_edge_classifier,
            disable_low_pass=self.disable_low_pass,
            disable_high_pass=self.disable_high_pass,
            disable_relation_fusion=self.disable_relation_fusion,
            disable_ib=self.disable_ib,
        )

    def variant_label(self) -> str:
        return self.model_config().variant_label()

    def to_dict(self) -> dict:
        d = asdict(self)
        d["loss"] = asdict(self.loss)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        loss = d.pop("loss", {})
        return cls(loss=LossConfig(**loss), **d)


@dataclass
class EpochRecord:
    epoch: int
    losses: LossReport
    val_metrics: MetricsReport


@dataclass
class TrainReport:
    variant: str
    epochs: list[EpochRecord]
    best_epoch: int
    best_val_auc: float
    test_metrics: MetricsReport
    wall_seconds: float

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "best_epoch": self.best_epoch,
            "best_val_auc": self.best_val_auc,
            "wall_seconds": self.wall_seconds,
            "test_metrics": self.test_metrics.to_dict(),
            "epochs": [
                {"epoch": r.epoch,
                 "loss": asdict(r.losses),
                 "val": r.val_metrics.to_dict()}
                for r in self.epochs
            ],
        }


def _check_trainable(graph: MultiRelationGraph):
    if graph.split is None:
        raise TrainError("graph has no train/val/test split")
    for which in ("train", "val", "test"):
        nodes = graph.split_nodes(which)
        labeled = nodes[graph.labels[nodes] != LABEL_UNKNOWN]
        if labeled.size == 0:
            raise TrainError(f"{which} split has no labeled nodes")
    train = graph.split_nodes("train")
    train_labels = graph.labels[train]
    if not ((train_labels == 0).any() and (train_labels == 1).any()):
        raise TrainError("train split must contain both classes")


def _split_scores(graph: MultiRelationGraph, probs: np.ndarray, which: str):
    nodes = graph.split_nodes(which)
    labeled = nodes[graph.labels[nodes] != LABEL_UNKNOWN]
    if labeled.size == 0:
        raise MetricsError(f"{which} split has no labeled nodes")
    return probs[labeled], graph.labels[labeled].astype(int)


def train(graph: MultiRelationGraph, cfg: TrainConfig,
          epoch_callback=None) -> tuple[ParamStore, TrainReport]:
    """Train on the whole graph; returns parameters at the best validation
    AUC and the per-epoch report.

    epoch_callback(epoch, state, store) runs after each forward pass and may
    inspect splits and losses; it must not mutate anything.
    """
    _check_trainable(graph)
    model_cfg = cfg.model_config()
    store = init_params(graph.feature_dim, graph.num_relations, model_cfg,
                        seed=cfg.seed)
    rng = np.random.default_rng(cfg.seed + 1)

    laps_orig = [normalized_laplacian(graph.adjacency(r))
                 for r in range(graph.num_relations)]

    labeled_edges = None
    if not cfg.disable_edge_classifier:
        labeled_edges = []
        for r in range(graph.num_relations):
            labeled_edges.extend(build_training_edges(graph, r))

    train_nodes = graph.split_nodes("train")
    train_nodes = train_nodes[graph.labels[train_nodes] != LABEL_UNKNOWN]

    started = time.perf_counter()
    records: list[EpochRecord] = []
    best_val_auc = -np.inf
    best_epoch = -1
    best_values = None
    cached_masks = None

    for epoch in range(cfg.epochs):
        refresh = epoch % cfg.split_refresh_every == 0
        state = forward(graph, store, model_cfg, cfg.loss, laps_orig,
                        cached_masks=None if refresh else cached_masks)
        if not cfg.disable_edge_classifier:
            cached_masks = [rs.split_masks for rs in state.relations]

        sampled_nodes = sample_balanced_nodes(train_nodes, graph.labels, rng)
        l_c, probs = classification_loss(state.h_all, store["head_w"],
                                          sampled_nodes, graph.labels)
        l_h = None
        if labeled_edges is not None:
            edge_sample = sample_balanced_edges(labeled_edges, rng)
            l_h = edge_loss([rs.scores for rs in state.relations], edge_sample)
        total, loss_report = joint_loss(l_c, l_h, state.ib_loss, cfg.loss)

        val_scores, val_labels = _split_scores(graph, probs[:, 1], "val")
        val_metrics = evaluate_scores(val_scores, val_labels)
        records.append(EpochRecord(epoch=epoch, losses=loss_report,
                                   val_metrics=val_metrics))
        if epoch_callback is not None:
            epoch_callback(epoch, state, store)

        if val_metrics.auc > best_val_auc:
            best_val_auc = val_metrics.auc
            best_epoch = epoch
            best_values = store.values_copy()
        elif epoch - best_epoch >= cfg.patience:
            break

        backward(total, store)
        lr = cfg.lr
        if cfg.lr_warmup_epochs > 0:
            lr *= min(1.0, (epoch + 1) / cfg.lr_warmup_epochs)
        adam_step(store, lr=lr, weight_decay=cfg.weight_decay,
                  lr_scales={"edge_": cfg.edge_lr_scale,
                             "head_": cfg.head_lr_scale})

    if best_values is not None:
        # node-classification params revert to the best validation epoch;
        # the edge classifier trains monotonically under its own loss and
        # keeps its most-trained state, so final splits use the best splits
        final = store.values_copy()
        for name in best_values:
            if name.startswith("edge_"):
                best_values[name] = final[name]
        store.load_values(best_values)

    test_metrics = evaluate(graph, store, "test", cfg)
    report = TrainReport(
        variant=cfg.variant_label(),
        epochs=records,
        best_epoch=best_epoch,
        best_val_auc=best_val_auc,
        test_metrics=test_metrics,
        wall_seconds=time.perf_counter() - started,
    )
    return store, report


def predict(graph: MultiRelationGraph, store: ParamStore,
            cfg: TrainConfig) -> np.ndarray:
    """Fraud probability per node from a full forward pass with the current
    edge classifier's split."""
    model_cfg = cfg.model_config()
    laps_orig = [normalized_laplacian(graph.adjacency(r))
                 for r in range(graph.num_relations)]
    state = forward(graph, store, model_cfg, cfg.loss, laps_orig)
    logits = ad.matmul(state.h_all, store["head_w"])
    return ad.softmax_rows(logits).data[:, 1].copy()


def evaluate(graph: MultiRelationGraph, store: ParamStore, split: str,
             cfg: TrainConfig) -> MetricsReport:
    """Metrics on one split from a fresh forward pass."""
    probs = predict(graph, store, cfg)
    scores, labels = _split_scores(graph, probs, split)
    return evaluate_scores(scores, labels)
