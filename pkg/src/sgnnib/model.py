"""Forward-pass assembly: projection, edge scoring, splitting, filtering,
fusion, and the classifier head, with ablation switches.

Ablations degrade gracefully: without the edge classifier both filters run
on the full relation graph; with one band disabled fusion passes the other
band through; with both bands disabled the pipeline reduces to a
projected-feature classifier. Relation fusion falls back to the mean
embedding when its learned weight is disabled.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import ParamStore, Tensor
from .edges import EdgeClassifierParams, EdgeScores, score_edges, hidden_features
from .filters import FilterSpec, apply_filter, beta_poly
from .fusion import PrototypeState, fuse_frequencies, relation_fusion, residual_concat
from .graph import MultiRelationGraph, SparseOperator, normalized_laplacian, subgraph_by_edge_mask
from .losses import LossConfig, partial_ib_loss


@dataclass
class ModelConfig:
    """Architecture and ablation switches shared by trainer and estimator."""

    hidden_dim: int = 64
    filter_alpha: int = 1
    filter_beta: int = 2
    split_threshold: float = 0.5
    allow_zero_order_filters: bool = False
    disable_edge_classifier: bool = False
    disable_low_pass: bool = False
    disable_high_pass: bool = False
    disable_relation_fusion: bool = False
    disable_ib: bool = False

    def variant_label(self) -> str:
        """Ablation naming: full model plus one suffix per disabled part."""
        suffixes = []
        if self.disable_edge_classifier:
            suffixes.append("edge")
        if self.disable_low_pass:
            suffixes.append("low")
        if self.disable_high_pass:
            suffixes.append("high")
        if self.disable_relation_fusion:
            suffixes.append("rel")
        if self.disable_ib:
            suffixes.append("IB")
        return "SGNN-IB" + ("_" + "_".join(suffixes) if suffixes else "")


def init_params(feature_dim: int, num_relations: int, cfg: ModelConfig,
                seed: int) -> ParamStore:
    """Xavier-initialized weights for every enabled component."""
    d_h = cfg.hidden_dim
    store = ParamStore(seed=seed)
    store.add("input_proj", (feature_dim, d_h))
    if not cfg.disable_edge_classifier:
        store.add("edge_hidden_w", (feature_dim, d_h))
        store.add("edge_hidden_b", (1, d_h), init="zeros")
        # zero-init scoring heads: phi starts at exactly 1/2 and class
        # probabilities at exactly 1/2, so ranking quality and calibration
        # mature together instead of starting from random miscalibration
        store.add("edge_score_w", (3 * d_h, 1), init="zeros")
    store.add("residual_w", (2 * d_h, d_h))
    if not cfg.disable_relation_fusion:
        store.add("relation_w", (num_relations * d_h, d_h))
    store.add("head_w", (d_h, 2), init="zeros")
    return store


def edge_params_view(store: ParamStore) -> EdgeClassifierParams:
    return EdgeClassifierParams(
        hidden_weight=store["edge_hidden_w"],
        hidden_bias=store["edge_hidden_b"],
        score_weight=store["edge_score_w"],
    )


@dataclass
class RelationForward:
    """Per-relation intermediates kept for losses and introspection."""

    scores: EdgeScores | None
    split_masks: np.ndarray | None          # boolean, True = homophilic
    lap_homo: SparseOperator | None
    lap_heter: SparseOperator | None
    fused_split: Tensor
    fused_orig: Tensor
    fusion_states: list[PrototypeState] = field(default_factory=list)
    ib_term: Tensor | None = None


@dataclass
class ForwardState:
    """One full-graph pass: everything the losses and metrics need."""

    h_proj: Tensor
    relations: list[RelationForward]
    h_all: Tensor
    ib_loss: Tensor | None


def forward(graph: MultiRelationGraph, store: ParamStore, cfg: ModelConfig,
            loss_cfg: LossConfig,
            laps_orig: list[SparseOperator],
            cached_masks: list[np.ndarray] | None = None) -> ForwardState:
    """Run the whole pipeline on the graph.

    cached_masks reuses a previous epoch's homophilic/heterophilic split
    instead of thresholding fresh scores; edge scores themselves are always
    recomputed so the edge loss stays differentiable.
    """
    x = Tensor(graph.features)
    h_proj = ad.relu(ad.matmul(x, store["input_proj"]))

    spec = FilterSpec(cfg.filter_alpha, cfg.filter_beta)
    low_poly = beta_poly(FilterSpec(spec.alpha, spec.beta, "low"),
                         cfg.allow_zero_order_filters)
    high_poly = beta_poly(FilterSpec(spec.alpha, spec.beta, "high"),
                          cfg.allow_zero_order_filters)

    edge_hidden = None
    if not cfg.disable_edge_classifier:
        edge_hidden = hidden_features(x, edge_params_view(store))

    rel_states: list[RelationForward] = []
    rel_embeddings: list[Tensor] = []
    for r in range(graph.num_relations):
        lap_o = laps_orig[r]
        scores = None
        masks = None
        if cfg.disable_edge_classifier:
            lap_homo = lap_heter = lap_o
        else:
            scores = score_edges(graph, r, edge_params_view(store),
                                 hidden=edge_hidden)
            if cached_masks is not None:
                masks = cached_masks[r]
            else:
                masks = scores.phi_values() >= cfg.split_threshold
            adj = graph.adjacency(r)
            lap_homo = normalized_laplacian(subgraph_by_edge_mask(adj, masks))
            lap_heter = normalized_laplacian(subgraph_by_edge_mask(adj, ~masks))

        bands_split: list[Tensor] = []
        bands_orig: list[Tensor] = []
        ib_pairs: list[tuple[Tensor, Tensor]] = []
        if not cfg.disable_high_pass:
            h_high = apply_filter(high_poly, lap_heter, h_proj)
            h_high_orig = apply_filter(high_poly, lap_o, h_proj)
            bands_split.append(h_high)
            bands_orig.append(h_high_orig)
            ib_pairs.append((h_high, h_high_orig))
        if not cfg.disable_low_pass:
            h_low = apply_filter(low_poly, lap_homo, h_proj)
            h_low_orig = apply_filter(low_poly, lap_o, h_proj)
            bands_split.append(h_low)
            bands_orig.append(h_low_orig)
            ib_pairs.append((h_low, h_low_orig))

        fusion_states = []
        if len(bands_split) == 2:
            fused_split, st1 = fuse_frequencies(bands_split[0], bands_split[1])
            fused_orig, st2 = fuse_frequencies(bands_orig[0], bands_orig[1])
            fusion_states = [st1, st2]
        elif len(bands_split) == 1:
            fused_split, fused_orig = bands_split[0], bands_orig[0]
        else:
            fused_split = fused_orig = h_proj

        h_bar = residual_concat(fused_orig, fused_split, store["residual_w"])
        rel_embeddings.append(h_bar)

        ib_term = None
        if not cfg.disable_ib:
            ib_term = partial_ib_loss(ib_pairs, h_proj, loss_cfg)
        rel_states.append(RelationForward(
            scores=scores, split_masks=masks,
            lap_homo=None if cfg.disable_edge_classifier else lap_homo,
            lap_heter=None if cfg.disable_edge_classifier else lap_heter,
            fused_split=fused_split, fused_orig=fused_orig,
            fusion_states=fusion_states, ib_term=ib_term))

    if cfg.disable_relation_fusion or "relation_w" not in store:
        h_all = rel_embeddings[0]
        for t in rel_embeddings[1:]:
            h_all = ad.add(h_all, t)
        h_all = ad.scale(h_all, 1.0 / len(rel_embeddings))
    else:
        h_all = relation_fusion(rel_embeddings, store["relation_w"])

    total_ib = None
    terms = [rs.ib_term for rs in rel_states if rs.ib_term is not None]
    if terms:
        total_ib = terms[0]
        for t in terms[1:]:
            total_ib = ad.add(total_ib, t)
        total_ib = ad.scale(total_ib, 1.0 / len(terms))

    return ForwardState(h_proj=h_proj, relations=rel_states, h_all=h_all,
                        ib_loss=total_ib)


def fraud_probabilities(state: ForwardState, store: ParamStore) -> np.ndarray:
    """Per-node fraud probability from the classifier head."""
    logits = ad.matmul(state.h_all, store["head_w"])
    probs = ad.softmax_rows(logits)
    return probs.data[:, 1].copy()
