"""Prototype-weighted fusion of frequency bands and relation embeddings.

Each band is summarized by its prototype (the mean node embedding); the
band's affinity is the mean cosine similarity between node embeddings and
that prototype. Bands are then mixed with weights proportional to their
affinities, so the fused signal leans toward the band whose nodes agree
most with their own summary.

Negative affinities are clamped to zero before normalization, which keeps
the mixing weights nonnegative and summing to one; if both clamped
affinities vanish the bands are averaged.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import ShapeError, Tensor

AFFINITY_FLOOR = 1e-12


@dataclass
class PrototypeState:
    """Prototypes and affinity scalars of the two bands for one fusion call."""

    proto_high: np.ndarray
    proto_low: np.ndarray
    affinity_high: float
    affinity_low: float
    weight_high: float
    weight_low: float


@dataclass
class FusionParams:
    """Learned mixing weights: residual concat (2*d_h -> d_h) and relation
    concat (R*d_h -> d_out)."""

    residual_weight: Tensor
    relation_weight: Tensor


def prototype(h: Tensor) -> Tensor:
    """Column-wise mean over node rows, shape (1, d)."""
    if h.shape[0] == 0:
        raise ShapeError("prototype of an empty tensor")
    return ad.row_mean(h)


def affinity(h: Tensor, proto: Tensor, metric: str = "cosine") -> Tensor:
    """Mean similarity between node rows and a prototype row."""
    if metric == "cosine":
        return ad.cosine_rows(h, proto)
    if metric == "euclidean":
        return ad.euclidean_affinity_rows(h, proto)
    raise ValueError(f"unknown affinity metric {metric!r}")


def fuse_frequencies(h_high: Tensor, h_low: Tensor, metric: str = "cosine",
                     ) -> tuple[Tensor, PrototypeState]:
    """Affinity-weighted combination of the two bands.

    Fully differentiable through both the weights and the operands; the
    zero-affinity fallback mixes the bands equally.
    """
    if h_high.shape != h_low.shape:
        raise ShapeError(
            f"fuse_frequencies: shapes {h_high.shape} and {h_low.shape} differ")
    c_high = prototype(h_high)
    c_low = prototype(h_low)
    s_high = affinity(h_high, c_high, metric)
    s_low = affinity(h_low, c_low, metric)
    a_high = ad.relu(s_high)
    a_low = ad.relu(s_low)
    denom = a_high.item() + a_low.item()
    if denom > AFFINITY_FLOOR:
        total = ad.add(a_high, a_low)
        w_high = ad.div(a_high, total)
        w_low = ad.div(a_low, total)
    else:
        w_high = Tensor(0.5)
        w_low = Tensor(0.5)
    fused = ad.add(ad.mul(h_high, w_high), ad.mul(h_low, w_low))
    state = PrototypeState(
        proto_high=c_high.data.copy(), proto_low=c_low.data.copy(),
        affinity_high=s_high.item(), affinity_low=s_low.item(),
        weight_high=w_high.item(), weight_low=w_low.item())
    return fused, state


def residual_concat(h_fused_orig: Tensor, h_fused_split: Tensor,
                    residual_weight: Tensor) -> Tensor:
    """relu([H_orig || H_split] W); preserves full-graph semantics alongside
    the split-filtered signal."""
    if h_fused_orig.shape[0] != h_fused_split.shape[0]:
        raise ShapeError(
            f"residual_concat: row counts differ "
            f"({h_fused_orig.shape} vs {h_fused_split.shape})")
    return ad.relu(ad.matmul(ad.concat_cols([h_fused_orig, h_fused_split]),
                             residual_weight))


def relation_fusion(per_relation: list[Tensor], relation_weight: Tensor) -> Tensor:
    """Linear map over the column-concatenation of per-relation embeddings."""
    rows = per_relation[0].shape[0]
    for t in per_relation[1:]:
        if t.shape[0] != rows:
            raise ShapeError("relation_fusion: row counts differ across relations")
    concat = ad.concat_cols(per_relation)
    if concat.shape[1] != relation_weight.shape[0]:
        raise ShapeError(
            f"relation_fusion: concatenated width {concat.shape[1]} does not "
            f"match weight shape {relation_weight.shape}; wrong relation count?")
    return ad.matmul(concat, relation_weight)
