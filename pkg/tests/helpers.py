"""Shared test oracles: finite differences, dense spectral filtering, and
small random-graph builders. These stay independent of the code paths they
check."""
from __future__ import annotations

import numpy as np

from sgnnib.graph import EdgeList, MultiRelationGraph, build_adjacency


def finite_difference_grads(store, loss_fn, step: float = 1e-4) -> dict[str, np.ndarray]:
    """Central-difference gradients of loss_fn() for every parameter in store.

    loss_fn must recompute the scalar loss from the store's current values.
    """
    grads = {}
    for name, p in store.items():
        g = np.zeros_like(p.data)
        flat = p.data.ravel()
        gflat = g.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            lp = loss_fn()
            flat[i] = orig - step
            lm = loss_fn()
            flat[i] = orig
            gflat[i] = (lp - lm) / (2.0 * step)
        grads[name] = g
    return grads


def grad_rel_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Max absolute deviation normalized by the larger gradient magnitude."""
    denom = max(np.abs(analytic).max(initial=0.0),
                np.abs(numeric).max(initial=0.0), 1e-8)
    return float(np.abs(analytic - numeric).max(initial=0.0) / denom)


def dense_filter_oracle(poly_coeffs, lap_dense: np.ndarray, h: np.ndarray) -> np.ndarray:
    """U f(Lambda) U^T h via dense eigendecomposition."""
    eigvals, eigvecs = np.linalg.eigh(lap_dense)
    fvals = np.zeros_like(eigvals)
    for k, c in enumerate(poly_coeffs):
        fvals += c * eigvals ** k
    return eigvecs @ (fvals[:, None] * (eigvecs.T @ h))


def random_adjacency(rng: np.random.Generator, n: int, density: float = 0.3):
    """Random symmetric 0/1 adjacency as a SparseOperator."""
    mask = rng.random((n, n)) < density
    mask = np.triu(mask, k=1)
    pairs = np.argwhere(mask)
    return build_adjacency(EdgeList.from_pairs(pairs), n)


def random_multi_relation_graph(rng: np.random.Generator, n: int = 8,
                                d: int = 3, relations: int = 2,
                                density: float = 0.4) -> MultiRelationGraph:
    """Small labeled graph with every node in the train split."""
    features = rng.normal(size=(n, d))
    labels = rng.integers(0, 2, size=n).astype(np.int8)
    # force both classes to be present
    labels[0] = 0
    labels[1] = 1
    rels = []
    for r in range(relations):
        mask = np.triu(rng.random((n, n)) < density, k=1)
        pairs = np.argwhere(mask)
        if len(pairs) == 0:
            pairs = np.array([[0, 1]])
        rels.append((f"rel{r}", EdgeList.from_pairs(pairs)))
    split = np.zeros(n, dtype=np.int8)
    return MultiRelationGraph(num_nodes=n, feature_dim=d, features=features,
                              labels=labels, relations=rels, split=split)
