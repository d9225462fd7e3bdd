"""Training objectives: denoising loss, balanced node classification, and
the joint combination.

The denoising term treats the band signals filtered from the original graph
as clean targets for the corresponding subgraph-filtered signals: it
rewards agreement between each subgraph band and its full-graph
counterpart while penalizing (scaled by mu) agreement between band signals
and the unfiltered features. Agreement is a pairwise per-row similarity;
cosine is the default, with mse/kl/js variants for comparison, all
oriented so that larger means more similar.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import ShapeError, Tensor

PROB_CLAMP = 1e-7

MI_METRICS = ("cosine", "mse", "kl", "js")


class LossError(ValueError):
    """Raised for unusable loss inputs (single-class splits, bad metric)."""


@dataclass
class LossConfig:
    """Weights of the joint objective and the similarity metric choice."""

    mu: float = 1e-6                 # compression weight inside the denoising term
    edge_weight: float = 1.0         # lambda: edge-classifier loss weight
    ib_weight: float = 0.6           # eta: denoising loss weight
    mi_metric: str = "cosine"
    include_cross_frequency_term: bool = False

    def __post_init__(self):
        for name in ("mu", "edge_weight", "ib_weight"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise LossError(f"{name} must be finite and nonnegative, got {v}")
        if self.mi_metric not in MI_METRICS:
            raise LossError(
                f"mi_metric must be one of {MI_METRICS}, got {self.mi_metric!r}")


@dataclass
class LossReport:
    """Scalar loss values for one training step."""

    classification: float
    edge: float
    denoising: float
    total: float


def mutual_info_surrogate(a: Tensor, b: Tensor, metric: str = "cosine") -> Tensor:
    """Mean per-row similarity between paired rows of a and b.

    cosine: raw cosine similarity. mse: negated mean squared difference.
    kl/js: negated divergence between row-softmax distributions.
    """
    if a.shape != b.shape:
        raise ShapeError(
            f"mutual_info_surrogate: shapes {a.shape} and {b.shape} differ")
    if metric == "cosine":
        return ad.cosine_rows(a, b)
    if metric == "mse":
        diff = ad.sub(a, b)
        return ad.scale(ad.mean_all(ad.mul(diff, diff)), -1.0)
    if metric in ("kl", "js"):
        p = ad.clip(ad.softmax_rows(a), PROB_CLAMP, 1.0)
        q = ad.clip(ad.softmax_rows(b), PROB_CLAMP, 1.0)
        n = a.shape[0]

        def kl(p_t, q_t):
            ratio = ad.sub(ad.log(p_t), ad.log(q_t))
            return ad.scale(ad.sum_all(ad.mul(p_t, ratio)), 1.0 / n)

        if metric == "kl":
            return ad.scale(kl(p, q), -1.0)
        m = ad.scale(ad.add(p, q), 0.5)
        return ad.scale(ad.add(kl(p, m), kl(q, m)), -0.5)
    raise LossError(f"unknown mi metric {metric!r}")


def _as_list(x) -> list[Tensor]:
    return list(x) if isinstance(x, (list, tuple)) else [x]


def ib_loss(h_high, h_low, h_high_orig, h_low_orig, h, cfg: LossConfig) -> Tensor:
    """Denoising objective over one or more relations.

    Per relation, with I the chosen similarity:
      1/2 * [-(I(high, high_orig) + I(low, low_orig))
             + mu * (I(high, h) + I(low, h))]
    plus, when configured, mu * I(high, low) to decorrelate the bands.
    Inputs may be single tensors or per-relation lists; relations average.
    """
    highs, lows = _as_list(h_high), _as_list(h_low)
    highs_o, lows_o = _as_list(h_high_orig), _as_list(h_low_orig)
    hs = _as_list(h)
    if not len(highs) == len(lows) == len(highs_o) == len(lows_o) == len(hs):
        raise ShapeError("ib_loss: per-relation lists have different lengths")
    metric = cfg.mi_metric
    total = None
    for hh, hl, hho, hlo, hx in zip(highs, lows, highs_o, lows_o, hs):
        keep = ad.add(mutual_info_surrogate(hh, hho, metric),
                      mutual_info_surrogate(hl, hlo, metric))
        compress = ad.add(mutual_info_surrogate(hh, hx, metric),
                          mutual_info_surrogate(hl, hx, metric))
        term = ad.scale(ad.add(ad.scale(keep, -1.0),
                               ad.scale(compress, cfg.mu)), 0.5)
        if cfg.include_cross_frequency_term:
            term = ad.add(term, ad.scale(
                mutual_info_surrogate(hh, hl, metric), cfg.mu))
        total = term if total is None else ad.add(total, term)
    return ad.scale(total, 1.0 / len(highs))


def partial_ib_loss(bands: list[tuple[Tensor, Tensor]], h: Tensor,
                    cfg: LossConfig) -> Tensor | None:
    """Single-relation denoising term over whichever bands are enabled.

    bands holds (subgraph_signal, original_graph_signal) pairs; with both
    bands present this equals the full two-band objective. Returns None when
    no band is enabled.
    """
    if not bands:
        return None
    metric = cfg.mi_metric
    keep = None
    compress = None
    for sub_t, orig_t in bands:
        k = mutual_info_surrogate(sub_t, orig_t, metric)
        c = mutual_info_surrogate(sub_t, h, metric)
        keep = k if keep is None else ad.add(keep, k)
        compress = c if compress is None else ad.add(compress, c)
    term = ad.scale(ad.add(ad.scale(keep, -1.0),
                           ad.scale(compress, cfg.mu)), 1.0 / len(bands))
    if cfg.include_cross_frequency_term and len(bands) == 2:
        term = ad.add(term, ad.scale(
            mutual_info_surrogate(bands[0][0], bands[1][0], metric), cfg.mu))
    return term


def sample_balanced_nodes(train_nodes: np.ndarray, labels: np.ndarray,
                          rng: np.random.Generator) -> np.ndarray:
    """All minority-class train nodes plus an equal-count uniform sample of
    the majority class. With fraud in the minority this keeps every fraud
    node, per the usual imbalance regime."""
    train_nodes = np.asarray(train_nodes)
    fraud = train_nodes[labels[train_nodes] == 1]
    benign = train_nodes[labels[train_nodes] == 0]
    if fraud.size == 0 or benign.size == 0:
        raise LossError("train split must contain both classes")
    minority, majority = (fraud, benign) if fraud.size <= benign.size else (benign, fraud)
    pick = rng.choice(majority.size, size=minority.size, replace=False)
    return np.concatenate([minority, np.sort(majority[pick])])


def classification_loss(h_all: Tensor, head_weight: Tensor,
                        sampled_nodes: np.ndarray, labels: np.ndarray,
                        ) -> tuple[Tensor, np.ndarray]:
    """Softmax cross-entropy over the sampled nodes.

    Returns the loss and the full (N, 2) probability matrix so callers can
    evaluate any split from the same forward pass.
    """
    logits = ad.matmul(h_all, head_weight)
    probs = ad.softmax_rows(logits)
    sampled = ad.clip(ad.gather_rows(probs, sampled_nodes),
                      PROB_CLAMP, 1.0 - PROB_CLAMP)
    y = labels[np.asarray(sampled_nodes)]
    onehot = np.zeros((len(y), 2))
    onehot[np.arange(len(y)), y] = 1.0
    loss = ad.scale(ad.sum_all(ad.mul(Tensor(onehot), ad.log(sampled))), -1.0)
    return loss, probs.data.copy()


def joint_loss(l_c: Tensor, l_h: Tensor | None, l_ib: Tensor | None,
               cfg: LossConfig) -> tuple[Tensor, LossReport]:
    """total = classification + lambda * edge + eta * denoising."""
    total = l_c
    if l_h is not None:
        total = ad.add(total, ad.scale(l_h, cfg.edge_weight))
    if l_ib is not None:
        total = ad.add(total, ad.scale(l_ib, cfg.ib_weight))
    report = LossReport(
        classification=l_c.item(),
        edge=l_h.item() if l_h is not None else 0.0,
        denoising=l_ib.item() if l_ib is not None else 0.0,
        total=total.item(),
    )
    return total, report
