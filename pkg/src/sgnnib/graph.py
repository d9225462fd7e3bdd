"""Multi-relation sparse graph representation and Laplacian construction.

Graphs are undirected and symmetrized on ingestion. Edges are kept in a
canonical order (u < v, sorted lexicographically) so that per-edge masks and
classifier outputs align deterministically across the whole pipeline.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

LABEL_BENIGN = 0
LABEL_FRAUD = 1
LABEL_UNKNOWN = -1

SPLIT_TRAIN = 0
SPLIT_VAL = 1
SPLIT_TEST = 2

SPLIT_NAMES = {"train": SPLIT_TRAIN, "val": SPLIT_VAL, "test": SPLIT_TEST}


class GraphError(ValueError):
    """Raised for structurally invalid graphs, edges, or operators."""


@dataclass(frozen=True)
class EdgeList:
    """Canonical undirected edge list: pairs (u, v) with u < v, deduplicated,
    sorted lexicographically."""

    pairs: np.ndarray  # (E, 2) int64

    @classmethod
    def from_pairs(cls, pairs) -> "EdgeList":
        """Canonicalize raw (u, v) pairs: drop self-pairs, orient u < v,
        deduplicate, sort."""
        arr = np.asarray(list(pairs) if not isinstance(pairs, np.ndarray) else pairs,
                         dtype=np.int64)
        if arr.size == 0:
            return cls(np.empty((0, 2), dtype=np.int64))
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise GraphError(f"edge pairs must be (E, 2), got shape {arr.shape}")
        if (arr < 0).any():
            bad = arr[(arr < 0).any(axis=1)][0]
            raise GraphError(f"negative node index in edge ({bad[0]}, {bad[1]})")
        arr = arr[arr[:, 0] != arr[:, 1]]
        lo = np.minimum(arr[:, 0], arr[:, 1])
        hi = np.maximum(arr[:, 0], arr[:, 1])
        canon = np.unique(np.stack([lo, hi], axis=1), axis=0)
        return cls(canon)

    def __post_init__(self):
        arr = self.pairs
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise GraphError(f"edge pairs must be (E, 2), got shape {arr.shape}")
        if arr.shape[0]:
            if (arr[:, 0] >= arr[:, 1]).any():
                bad = arr[arr[:, 0] >= arr[:, 1]][0]
                raise GraphError(f"edge ({bad[0]}, {bad[1]}) violates u < v ordering")
            if len(np.unique(arr, axis=0)) != len(arr):
                raise GraphError("duplicate edges in edge list")

    def __len__(self) -> int:
        return int(self.pairs.shape[0])

    def max_node(self) -> int:
        return int(self.pairs.max()) if len(self) else -1


@dataclass(frozen=True)
class SparseOperator:
    """Symmetric sparse matrix in CSR form, used for adjacencies and
    normalized Laplacians."""

    dim: int
    rows: np.ndarray  # CSR row offsets, len dim + 1
    cols: np.ndarray  # column indices
    vals: np.ndarray  # float64 entries
    _csr: sp.csr_matrix = field(repr=False, compare=False, default=None)

    @classmethod
    def from_csr(cls, mat: sp.csr_matrix) -> "SparseOperator":
        mat = sp.csr_matrix(mat)
        mat.sum_duplicates()
        mat.sort_indices()
        n, m = mat.shape
        if n != m:
            raise GraphError(f"operator must be square, got {n}x{m}")
        if not np.all(np.isfinite(mat.data)):
            raise GraphError("operator entries must be finite")
        asym = abs(mat - mat.T)
        if asym.nnz and asym.max() > 1e-12:
            raise GraphError("operator must be symmetric")
        return cls(dim=n, rows=mat.indptr, cols=mat.indices,
                   vals=mat.data.astype(np.float64), _csr=mat)

    @property
    def csr(self) -> sp.csr_matrix:
        return self._csr

    @property
    def nnz(self) -> int:
        return int(self._csr.nnz)

    def apply(self, dense: np.ndarray) -> np.ndarray:
        """Matrix product with a dense (dim, k) matrix."""
        if dense.shape[0] != self.dim:
            raise GraphError(
                f"dimension mismatch: operator is {self.dim}x{self.dim}, "
                f"input has {dense.shape[0]} rows")
        return self._csr @ dense

    def transpose_apply(self, dense: np.ndarray) -> np.ndarray:
        if dense.shape[0] != self.dim:
            raise GraphError(
                f"dimension mismatch: operator is {self.dim}x{self.dim}, "
                f"input has {dense.shape[0]} rows")
        return self._csr.T @ dense

    def to_dense(self) -> np.ndarray:
        return self._csr.toarray()

    def canonical_edges(self) -> np.ndarray:
        """Upper-triangular (u, v) entries with u < v, lexicographically sorted."""
        coo = self._csr.tocoo()
        keep = coo.row < coo.col
        edges = np.stack([coo.row[keep], coo.col[keep]], axis=1).astype(np.int64)
        order = np.lexsort((edges[:, 1], edges[:, 0]))
        return edges[order]


def build_adjacency(edges, n: int) -> SparseOperator:
    """Symmetric 0/1 adjacency from an edge list.

    Duplicate pairs collapse to a single entry and self-pairs are dropped.
    Raises GraphError naming the offending edge if an endpoint is out of range.
    """
    el = edges if isinstance(edges, EdgeList) else EdgeList.from_pairs(edges)
    if el.max_node() >= n:
        bad = el.pairs[(el.pairs >= n).any(axis=1)][0]
        raise GraphError(
            f"edge ({bad[0]}, {bad[1]}) has endpoint >= num_nodes ({n})")
    pairs = el.pairs
    if len(pairs) == 0:
        return SparseOperator.from_csr(sp.csr_matrix((n, n), dtype=np.float64))
    row = np.concatenate([pairs[:, 0], pairs[:, 1]])
    col = np.concatenate([pairs[:, 1], pairs[:, 0]])
    data = np.ones(len(row), dtype=np.float64)
    return SparseOperator.from_csr(
        sp.csr_matrix((data, (row, col)), shape=(n, n)))


def normalized_laplacian(adj: SparseOperator) -> SparseOperator:
    """L = I - D^{-1/2} A D^{-1/2}; rows of isolated nodes reduce to the
    identity row, keeping the spectrum inside [0, 2]."""
    a = adj.csr
    if (a.data < 0).any():
        raise GraphError("adjacency must be nonnegative")
    deg = np.asarray(a.sum(axis=1)).ravel()
    with np.errstate(divide="ignore"):
        inv_sqrt = 1.0 / np.sqrt(deg)
    inv_sqrt[~np.isfinite(inv_sqrt)] = 0.0
    d = sp.diags(inv_sqrt)
    lap = sp.eye(adj.dim, format="csr") - d @ a @ d
    return SparseOperator.from_csr(lap)


def subgraph_by_edge_mask(graph_adj: SparseOperator, keep: np.ndarray) -> SparseOperator:
    """Adjacency containing exactly the kept canonical edges; the node set is
    unchanged so feature rows stay aligned."""
    edges = graph_adj.canonical_edges()
    keep = np.asarray(keep, dtype=bool)
    if keep.shape != (len(edges),):
        raise GraphError(
            f"edge mask length {keep.shape} does not match edge count {len(edges)}")
    return build_adjacency(EdgeList(edges[keep]), graph_adj.dim)


@dataclass
class MultiRelationGraph:
    """Node features, labels, per-node split, and one adjacency per relation."""

    num_nodes: int
    feature_dim: int
    features: np.ndarray          # (N, D) float64
    labels: np.ndarray            # (N,) int8: 0 benign, 1 fraud, -1 unknown
    relations: list[tuple[str, EdgeList]]
    split: np.ndarray | None = None  # (N,) int8: 0 train, 1 val, 2 test

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int8)
        if self.features.shape != (self.num_nodes, self.feature_dim):
            raise GraphError(
                f"features shape {self.features.shape} does not match "
                f"(num_nodes, feature_dim) = ({self.num_nodes}, {self.feature_dim})")
        if not np.all(np.isfinite(self.features)):
            raise GraphError("features must be finite")
        if self.labels.shape != (self.num_nodes,):
            raise GraphError(
                f"labels shape {self.labels.shape} does not match num_nodes {self.num_nodes}")
        bad = ~np.isin(self.labels, (LABEL_BENIGN, LABEL_FRAUD, LABEL_UNKNOWN))
        if bad.any():
            raise GraphError(
                f"label at node {int(np.flatnonzero(bad)[0])} is not 0, 1, or unknown")
        if not self.relations:
            raise GraphError("graph needs at least one relation")
        names = [name for name, _ in self.relations]
        if len(set(names)) != len(names):
            raise GraphError("relation names must be unique")
        for name, el in self.relations:
            if el.max_node() >= self.num_nodes:
                raise GraphError(
                    f"relation {name!r} has edge endpoint >= num_nodes")
        if self.split is not None:
            self.split = np.asarray(self.split, dtype=np.int8)
            if self.split.shape != (self.num_nodes,):
                raise GraphError("split length does not match num_nodes")
            if not np.isin(self.split, (SPLIT_TRAIN, SPLIT_VAL, SPLIT_TEST)).all():
                raise GraphError("split values must be train/val/test")

    @property
    def num_relations(self) -> int:
        return len(self.relations)

    @property
    def relation_names(self) -> list[str]:
        return [name for name, _ in self.relations]

    def relation_edges(self, relation: int | str) -> EdgeList:
        return self.relations[self.relation_index(relation)][1]

    def relation_index(self, relation: int | str) -> int:
        if isinstance(relation, str):
            for i, (name, _) in enumerate(self.relations):
                if name == relation:
                    return i
            raise GraphError(f"unknown relation {relation!r}")
        if not 0 <= relation < len(self.relations):
            raise GraphError(f"relation index {relation} out of range")
        return int(relation)

    def adjacency(self, relation: int | str) -> SparseOperator:
        return build_adjacency(self.relation_edges(relation), self.num_nodes)

    def split_nodes(self, which: str) -> np.ndarray:
        if self.split is None:
            raise GraphError("graph has no train/val/test split")
        if which not in SPLIT_NAMES:
            raise GraphError(f"unknown split {which!r}")
        return np.flatnonzero(self.split == SPLIT_NAMES[which])


def stratified_split(labels: np.ndarray, seed: int,
                     fractions: tuple[float, float, float] = (0.4, 0.2, 0.4)) -> np.ndarray:
    """Per-node train/val/test assignment, stratified by label.

    Unknown-label nodes land in the test bucket; they carry no supervision
    and are skipped by every metric.
    """
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise GraphError(f"split fractions must sum to 1, got {fractions}")
    rng = np.random.default_rng(seed)
    split = np.full(len(labels), SPLIT_TEST, dtype=np.int8)
    for cls in (LABEL_BENIGN, LABEL_FRAUD):
        idx = np.flatnonzero(labels == cls)
        idx = rng.permutation(idx)
        n_train = int(round(fractions[0] * len(idx)))
        n_val = int(round(fractions[1] * len(idx)))
        split[idx[:n_train]] = SPLIT_TRAIN
        split[idx[n_train:n_train + n_val]] = SPLIT_VAL
    return split
