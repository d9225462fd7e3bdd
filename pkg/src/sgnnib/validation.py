"""Input validation helpers shared by the estimator and CLI layers."""
from __future__ import annotations

import numbers

import numpy as np

from .graph import GraphError, MultiRelationGraph


def check_graph(graph, require_split: bool = False,
                require_labels: bool = False) -> MultiRelationGraph:
    """Validate an input graph; MultiRelationGraph revalidates on touch."""
    if not isinstance(graph, MultiRelationGraph):
        raise TypeError(
            f"expected MultiRelationGraph, got {type(graph).__name__}")
    if require_split and graph.split is None:
        raise GraphError("graph has no train/val/test split; assign one or "
                         "load a dataset with split.txt")
    if require_labels and not (graph.labels != -1).any():
        raise GraphError("graph has no labeled nodes")
    return graph


def check_random_state(seed) -> np.random.Generator:
    """Accept None, an int seed, or an existing Generator."""
    if seed is None:
        return np.random.default_rng()
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, numbers.Integral):
        return np.random.default_rng(int(seed))
    raise TypeError(f"seed must be None, an int, or a Generator, got {seed!r}")


def check_positive(name: str, value, strict: bool = True):
    if not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise ValueError(f"{name} must be a finite number, got {value!r}")
    if strict and value <= 0:
        raise ValueError(f"{name} must be positive, got {value}")
    if not strict and value < 0:
        raise ValueError(f"{name} must be nonnegative, got {value}")
    return value


def check_compatible(graph: MultiRelationGraph, feature_dim: int,
                     num_relations: int):
    """Raise when a fitted model cannot score this graph."""
    if graph.feature_dim != feature_dim:
        raise GraphError(
            f"graph has {graph.feature_dim} features, model was fit with "
            f"{feature_dim}")
    if graph.num_relations != num_relations:
        raise GraphError(
            f"graph has {graph.num_relations} relations, model was fit with "
            f"{num_relations}")
