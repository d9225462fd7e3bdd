"""Reverse-mode automatic differentiation over dense 2-D float64 matrices.

A Tensor records the operation that produced it; calling backward() on a
scalar walks the recorded graph in reverse topological order and accumulates
gradients into leaf tensors. The operator set is exactly what the model
needs: matmul, sparse application, broadcast add/mul, concatenation, row
gather, relu/sigmoid/log/clip, row softmax, row means, and per-row cosine
and Euclidean affinities.

Scalars are (1, 1) tensors. A computation record is single-threaded;
gradient accumulation order is fixed by the (ordered) parent tuples, so
repeated runs with identical inputs produce bitwise-identical gradients.
"""
from __future__ import annotations

import numpy as np

from .graph import SparseOperator

NORM_EPS = 1e-12


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible."""


def _as_matrix(data) -> np.ndarray:
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(1, -1)
    elif arr.ndim != 2:
        raise ShapeError(f"tensors are 2-D, got shape {arr.shape}")
    return arr


def _broadcastable(sa, sb) -> bool:
    return all(sa[i] == sb[i] or sa[i] == 1 or sb[i] == 1 for i in (0, 1))


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    if g.shape == shape:
        return g
    if shape[0] == 1 and g.shape[0] > 1:
        g = g.sum(axis=0, keepdims=True)
    if shape[1] == 1 and g.shape[1] > 1:
        g = g.sum(axis=1, keepdims=True)
    return g


class Tensor:
    __slots__ = ("data", "grad", "parents", "trainable", "name", "_backward")

    def __init__(self, data, parents=(), backward=None, trainable=False, name=None):
        self.data = _as_matrix(data)
        self.grad: np.ndarray | None = None
        self.parents: tuple[Tensor, ...] = tuple(parents)
        self.trainable = trainable
        self.name = name
        self._backward = backward

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        if self.data.shape != (1, 1):
            raise ShapeError(f"item() requires a scalar, got shape {self.data.shape}")
        return float(self.data[0, 0])

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.data.shape}{tag})"

    def _accumulate(self, g: np.ndarray):
        # leaf constants never consume their gradient; skip the allocation
        if not self.trainable and self._backward is None and not self.parents:
            return
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def backward(self):
        """Populate grads of every reachable tensor; self must be scalar."""
        if self.data.shape != (1, 1):
            raise ShapeError(
                f"backward() requires a scalar loss, got shape {self.data.shape}")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node.parents:
                stack.append((p, False))
        self.grad = np.ones((1, 1))
        for node in reversed(topo):
            if node._backward is not None:
                node._backward(node.grad)

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


def constant(data, name=None) -> Tensor:
    return Tensor(data, name=name)


def _coerce(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _binary_shapes(a: Tensor, b: Tensor, op: str):
    if not _broadcastable(a.shape, b.shape):
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} are incompatible")


def add(a, b) -> Tensor:
    a, b = _coerce(a), _coerce(b)
    _binary_shapes(a, b, "add")
    out = Tensor(a.data + b.data, parents=(a, b))

    def backward(g):
        a._accumulate(_unbroadcast(g, a.shape))
        b._accumulate(_unbroadcast(g, b.shape))

    out._backward = backward
    return out


def sub(a, b) -> Tensor:
    a, b = _coerce(a), _coerce(b)
    _binary_shapes(a, b, "sub")
    out = Tensor(a.data - b.data, parents=(a, b))

    def backward(g):
        a._accumulate(_unbroadcast(g, a.shape))
        b._accumulate(-_unbroadcast(g, b.shape))

    out._backward = backward
    return out


def mul(a, b) -> Tensor:
    a, b = _coerce(a), _coerce(b)
    _binary_shapes(a, b, "mul")
    out = Tensor(a.data * b.data, parents=(a, b))

    def backward(g):
        a._accumulate(_unbroadcast(g * b.data, a.shape))
        b._accumulate(_unbroadcast(g * a.data, b.shape))

    out._backward = backward
    return out


def div(a, b) -> Tensor:
    a, b = _coerce(a), _coerce(b)
    _binary_shapes(a, b, "div")
    out = Tensor(a.data / b.data, parents=(a, b))

    def backward(g):
        a._accumulate(_unbroadcast(g / b.data, a.shape))
        b._accumulate(_unbroadcast(-g * a.data / (b.data * b.data), b.shape))

    out._backward = backward
    return out


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)
    out = Tensor(a.data * c, parents=(a,))
    out._backward = lambda g: a._accumulate(g * c)
    return out


def add_scalar(a: Tensor, c: float) -> Tensor:
    out = Tensor(a.data + float(c), parents=(a,))
    out._backward = lambda g: a._accumulate(g)
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: shapes {a.shape} and {b.shape} are incompatible")
    out = Tensor(a.data @ b.data, parents=(a, b))

    def backward(g):
        a._accumulate(g @ b.data.T)
        b._accumulate(a.data.T @ g)

    out._backward = backward
    return out


def sparse_apply(op: SparseOperator, a: Tensor) -> Tensor:
    """Left-multiply by a sparse operator; gradient applies the transpose."""
    if a.shape[0] != op.dim:
        raise ShapeError(
            f"sparse_apply: operator dim {op.dim} does not match tensor shape {a.shape}")
    out = Tensor(op.apply(a.data), parents=(a,))
    out._backward = lambda g: a._accumulate(op.transpose_apply(g))
    return out


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    out = Tensor(np.where(mask, a.data, 0.0), parents=(a,))
    out._backward = lambda g: a._accumulate(g * mask)
    return out


def sigmoid(a: Tensor) -> Tensor:
    x = a.data
    s = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.clip(x, 0, None))),
                 np.exp(np.clip(x, None, 0)) / (1.0 + np.exp(np.clip(x, None, 0))))
    out = Tensor(s, parents=(a,))
    out._backward = lambda g: a._accumulate(g * s * (1.0 - s))
    return out


def log(a: Tensor) -> Tensor:
    out = Tensor(np.log(a.data), parents=(a,))
    out._backward = lambda g: a._accumulate(g / a.data)
    return out


def clip(a: Tensor, lo: float, hi: float) -> Tensor:
    clipped = np.clip(a.data, lo, hi)
    mask = (a.data >= lo) & (a.data <= hi)
    out = Tensor(clipped, parents=(a,))
    out._backward = lambda g: a._accumulate(g * mask)
    return out


def concat_cols(tensors) -> Tensor:
    tensors = list(tensors)
    rows = tensors[0].shape[0]
    for t in tensors[1:]:
        if t.shape[0] != rows:
            raise ShapeError(
                f"concat_cols: row counts differ ({tensors[0].shape} vs {t.shape})")
    out = Tensor(np.concatenate([t.data for t in tensors], axis=1),
                 parents=tuple(tensors))
    offsets = np.cumsum([0] + [t.shape[1] for t in tensors])

    def backward(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            t._accumulate(g[:, lo:hi])

    out._backward = backward
    return out


def gather_rows(a: Tensor, indices) -> Tensor:
    idx = np.asarray(indices, dtype=np.int64).ravel()
    if idx.size and (idx.min() < 0 or idx.max() >= a.shape[0]):
        raise ShapeError(
            f"gather_rows: index out of range for tensor with {a.shape[0]} rows")
    out = Tensor(a.data[idx], parents=(a,))

    def backward(g):
        acc = np.zeros_like(a.data)
        np.add.at(acc, idx, g)
        a._accumulate(acc)

    out._backward = backward
    return out


def sum_all(a: Tensor) -> Tensor:
    out = Tensor(a.data.sum(), parents=(a,))
    out._backward = lambda g: a._accumulate(np.full_like(a.data, g[0, 0]))
    return out


def mean_all(a: Tensor) -> Tensor:
    return scale(sum_all(a), 1.0 / a.data.size)


def row_mean(a: Tensor) -> Tensor:
    """Column-wise mean over all rows, shape (1, cols)."""
    n = a.shape[0]
    if n == 0:
        raise ShapeError("row_mean: tensor has zero rows")
    out = Tensor(a.data.mean(axis=0, keepdims=True), parents=(a,))
    out._backward = lambda g: a._accumulate(np.repeat(g, n, axis=0) / n)
    return out


def softmax_rows(a: Tensor) -> Tensor:
    z = a.data - a.data.max(axis=1, keepdims=True)
    e = np.exp(z)
    p = e / e.sum(axis=1, keepdims=True)
    out = Tensor(p, parents=(a,))

    def backward(g):
        dot = (g * p).sum(axis=1, keepdims=True)
        a._accumulate(p * (g - dot))

    out._backward = backward
    return out


def _paired_rows(a: Tensor, b: Tensor, op: str):
    if a.shape[1] != b.shape[1] or (b.shape[0] not in (1, a.shape[0])):
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} are incompatible")
    return np.broadcast_to(b.data, a.shape)


def cosine_rows(a: Tensor, b: Tensor) -> Tensor:
    """Mean over rows of the cosine similarity between paired rows of a and b.

    b may be a single row, broadcast against every row of a. Norms carry a
    1e-12 guard so zero rows yield similarity 0 with a finite gradient.
    """
    bv = _paired_rows(a, b, "cosine_rows")
    av = a.data
    n = av.shape[0]
    dot = (av * bv).sum(axis=1)
    na = np.sqrt((av * av).sum(axis=1)) + NORM_EPS
    nb = np.sqrt((bv * bv).sum(axis=1)) + NORM_EPS
    cos = dot / (na * nb)
    out = Tensor(cos.mean(), parents=(a, b))

    def backward(g):
        gs = g[0, 0] / n
        da = gs * (bv / (na * nb)[:, None] - av * (dot / (na ** 3 * nb))[:, None])
        db = gs * (av / (na * nb)[:, None] - bv * (dot / (na * nb ** 3))[:, None])
        a._accumulate(da)
        b._accumulate(_unbroadcast(db, b.shape))

    out._backward = backward
    return out


def euclidean_affinity_rows(a: Tensor, b: Tensor) -> Tensor:
    """Mean over rows of exp(-||a_i - b_i||_2); b may be a single row."""
    bv = _paired_rows(a, b, "euclidean_affinity_rows")
    av = a.data
    n = av.shape[0]
    diff = av - bv
    dist = np.sqrt((diff * diff).sum(axis=1) + NORM_EPS ** 2)
    aff = np.exp(-dist)
    out = Tensor(aff.mean(), parents=(a, b))

    def backward(g):
        gs = g[0, 0] / n
        d = gs * (-aff / dist)[:, None] * diff
        a._accumulate(d)
        b._accumulate(_unbroadcast(-d, b.shape))

    out._backward = backward
    return out


class ParamStore:
    """Named trainable tensors with deterministic initialization and Adam state."""

    def __init__(self, seed: int = 0):
        self.rng = np.random.default_rng(seed)
        self._params: dict[str, Tensor] = {}
        self._adam: dict[str, tuple[np.ndarray, np.ndarray]] = {}
        self._step = 0

    def add(self, name: str, shape: tuple[int, int], init: str = "xavier") -> Tensor:
        if name in self._params:
            raise ValueError(f"parameter {name!r} already exists")
        rows, cols = shape
        if init == "xavier":
            limit = np.sqrt(6.0 / (rows + cols))
            data = self.rng.uniform(-limit, limit, size=shape)
        elif init == "zeros":
            data = np.zeros(shape)
        else:
            raise ValueError(f"unknown init {init!r}")
        t = Tensor(data, trainable=True, name=name)
        self._params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list[str]:
        return list(self._params)

    def items(self):
        return self._params.items()

    def zero_grad(self):
        for t in self._params.values():
            t.grad = np.zeros_like(t.data)

    def values_copy(self) -> dict[str, np.ndarray]:
        return {k: t.data.copy() for k, t in self._params.items()}

    def load_values(self, values: dict[str, np.ndarray]):
        for k, t in self._params.items():
            if k not in values:
                raise KeyError(f"missing value for parameter {k!r}")
            v = np.asarray(values[k], dtype=np.float64)
            if v.shape != t.data.shape:
                raise ShapeError(
                    f"parameter {k!r}: stored shape {v.shape} != expected {t.data.shape}")
            t.data = v.copy()


def backward(loss: Tensor, store: ParamStore):
    """Backpropagate a scalar loss; unreachable parameters keep zero grads."""
    store.zero_grad()
    loss.backward()


def adam_step(store: ParamStore, lr: float = 0.01,
              betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8,
              weight_decay: float = 0.0,
              lr_scales: dict[str, float] | None = None):
    """Standard Adam update with bias correction; moment state persists.

    weight_decay applies decoupled L2 shrinkage (AdamW-style). lr_scales
    maps parameter-name prefixes to per-group learning-rate multipliers.
    """
    b1, b2 = betas
    store._step += 1
    t = store._step
    for name, p in store.items():
        if p.grad is None:
            raise ValueError(f"parameter {name!r} has no gradient; run backward first")
        if name not in store._adam:
            store._adam[name] = (np.zeros_like(p.data), np.zeros_like(p.data))
        m, v = store._adam[name]
        m[...] = b1 * m + (1.0 - b1) * p.grad
        v[...] = b2 * v + (1.0 - b2) * p.grad ** 2
        m_hat = m / (1.0 - b1 ** t)
        v_hat = v / (1.0 - b2 ** t)
        group_lr = lr
        if lr_scales:
            for prefix, scale in lr_scales.items():
                if name.startswith(prefix):
                    group_lr = lr * scale
                    break
        p.data = p.data - group_lr * (m_hat / (np.sqrt(v_hat) + eps)
                                      + weight_decay * p.data)
