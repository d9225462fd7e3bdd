"""Heterophily-aware edge classification and graph splitting.

A small MLP scores every canonical edge of a relation with the probability
that its endpoints share a label. Scores split the relation into a
homophilic and a heterophilic subgraph; the classifier itself trains on a
class-balanced sample of edges whose endpoints are both labeled train
nodes.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .graph import (
    LABEL_UNKNOWN,
    SPLIT_TRAIN,
    GraphError,
    MultiRelationGraph,
    SparseOperator,
    subgraph_by_edge_mask,
)

PHI_CLAMP = 1e-7


class EdgeClassifierError(ValueError):
    """Raised when training edges cannot be constructed or sampled."""


@dataclass
class EdgeClassifierParams:
    """Weights of the edge MLP: a shared hidden transform and a scoring head
    over [h_u || h_v || h_u - h_v]."""

    hidden_weight: Tensor  # (D, d_h)
    hidden_bias: Tensor    # (1, d_h)
    score_weight: Tensor   # (3 * d_h, 1)


@dataclass(frozen=True)
class EdgeScore:
    """Homophily probability phi in (0, 1) and its signed form pi = 2*phi - 1."""

    edge: tuple[int, int]
    phi: float
    pi: float


@dataclass(frozen=True)
class LabeledEdge:
    """Training edge with label 1 iff both endpoints share a class."""

    edge: tuple[int, int]
    y: int
    index: int      # position in the relation's canonical edge list
    relation: int = 0


@dataclass
class EdgeScores:
    """Differentiable per-edge scores for one relation, in canonical order."""

    relation: int
    edges: np.ndarray  # (E, 2)
    phi: Tensor        # (E, 1)
    pi: Tensor         # (E, 1)

    def phi_values(self) -> np.ndarray:
        return self.phi.data[:, 0]

    def records(self) -> list[EdgeScore]:
        phi = self.phi_values()
        pi = self.pi.data[:, 0]
        return [EdgeScore(edge=(int(u), int(v)), phi=float(p), pi=float(q))
                for (u, v), p, q in zip(self.edges, phi, pi)]


def hidden_features(features: Tensor, params: EdgeClassifierParams) -> Tensor:
    """Shared node transform h = relu(X W + b)."""
    return ad.relu(ad.add(ad.matmul(features, params.hidden_weight),
                          params.hidden_bias))


def score_edges(graph: MultiRelationGraph, relation: int | str,
                params: EdgeClassifierParams,
                features: Tensor | None = None,
                hidden: Tensor | None = None) -> EdgeScores:
    """Score every canonical edge of a relation.

    Each orientation is scored as sigmoid(w . [h_u || h_v || h_u - h_v]) and
    the two probabilities are averaged, so phi does not depend on which
    endpoint the canonical ordering puts first (undirected edges score
    identically under any node relabeling). Pass a precomputed hidden tensor
    to share the node transform across relations.
    """
    r = graph.relation_index(relation)
    edges = graph.relation_edges(r).pairs
    if hidden is None:
        if features is None:
            features = Tensor(graph.features)
        hidden = hidden_features(features, params)
    h_u = ad.gather_rows(hidden, edges[:, 0])
    h_v = ad.gather_rows(hidden, edges[:, 1])
    diff = ad.sub(h_u, h_v)
    z_uv = ad.matmul(ad.concat_cols([h_u, h_v, diff]), params.score_weight)
    z_vu = ad.matmul(ad.concat_cols([h_v, h_u, ad.scale(diff, -1.0)]),
                     params.score_weight)
    phi = ad.scale(ad.add(ad.sigmoid(z_uv), ad.sigmoid(z_vu)), 0.5)
    pi = ad.add_scalar(ad.scale(phi, 2.0), -1.0)
    return EdgeScores(relation=r, edges=edges, phi=phi, pi=pi)


def build_training_edges(graph: MultiRelationGraph,
                         relation: int | str) -> list[LabeledEdge]:
    """Edges whose endpoints are both labeled train nodes, labeled by
    endpoint-label agreement."""
    r = graph.relation_index(relation)
    if graph.split is None:
        raise GraphError("graph has no train/val/test split")
    edges = graph.relation_edges(r).pairs
    labels = graph.labels
    in_train = (graph.split == SPLIT_TRAIN) & (labels != LABEL_UNKNOWN)
    both = in_train[edges[:, 0]] & in_train[edges[:, 1]]
    idx = np.flatnonzero(both)
    if idx.size == 0:
        raise EdgeClassifierError(
            f"relation {r} has no edges with both endpoints in the train "
            "split; enlarge the train split")
    agree = labels[edges[idx, 0]] == labels[edges[idx, 1]]
    return [LabeledEdge(edge=(int(edges[i, 0]), int(edges[i, 1])),
                        y=int(a), index=int(i), relation=r)
            for i, a in zip(idx, agree)]


def sample_balanced_edges(labeled: list[LabeledEdge],
                          rng: np.random.Generator) -> list[LabeledEdge]:
    """All edges of the minority class plus an equal-size uniform sample of
    the majority class."""
    homo = [e for e in labeled if e.y == 1]
    heter = [e for e in labeled if e.y == 0]
    if not homo or not heter:
        raise EdgeClassifierError(
            "training edges contain a single class; cannot balance")
    minority, majority = (homo, heter) if len(homo) <= len(heter) else (heter, homo)
    pick = rng.choice(len(majority), size=len(minority), replace=False)
    return minority + [majority[i] for i in sorted(pick)]


def edge_loss(scores: EdgeScores | list[EdgeScores],
              labeled_sample: list[LabeledEdge]) -> Tensor:
    """Binary cross-entropy of phi against edge labels, summed over the
    sample; phi is clamped away from {0, 1}."""
    by_relation = {s.relation: s for s in
                   (scores if isinstance(scores, list) else [scores])}
    total = None
    for r in sorted({e.relation for e in labeled_sample}):
        batch = [e for e in labeled_sample if e.relation == r]
        if r not in by_relation:
            raise EdgeClassifierError(f"no scores for relation {r}")
        phi = ad.clip(ad.gather_rows(by_relation[r].phi, [e.index for e in batch]),
                      PHI_CLAMP, 1.0 - PHI_CLAMP)
        y = Tensor(np.array([[float(e.y)] for e in batch]))
        one_minus_y = ad.add_scalar(ad.scale(y, -1.0), 1.0)
        one_minus_phi = ad.add_scalar(ad.scale(phi, -1.0), 1.0)
        nll = ad.add(ad.mul(y, ad.log(phi)),
                     ad.mul(one_minus_y, ad.log(one_minus_phi)))
        term = ad.scale(ad.sum_all(nll), -1.0)
        total = term if total is None else ad.add(total, term)
    if total is None:
        raise EdgeClassifierError("empty edge sample")
    return total


def split_graph(graph: MultiRelationGraph, relation: int | str,
                scores: EdgeScores, threshold: float = 0.5
                ) -> tuple[SparseOperator, SparseOperator]:
    """Partition a relation into homophilic (phi >= threshold) and
    heterophilic subgraph adjacencies over the unchanged node set."""
    r = graph.relation_index(relation)
    if scores.relation != r:
        raise EdgeClassifierError(
            f"scores belong to relation {scores.relation}, expected {r}")
    adj = graph.adjacency(r)
    mask = scores.phi_values() >= threshold
    return subgraph_by_edge_mask(adj, mask), subgraph_by_edge_mask(adj, ~mask)
