"""Dense 2-D float64 tensors with reverse-mode automatic differentiation.

The engine is deliberately minimal: every value is a rank-2 matrix, batching
is expressed by stacking rows, and each forward pass records a fresh acyclic
graph that is consumed by a single backward() call. Forward results are
checked for NaN/Inf on every operation. Recorded tensors must not be mutated
in place while their graph is alive; the optimizer mutates leaf parameters
only between passes.
"""

from __future__ import annotations

from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import DimensionError, NumericalError, UsageError

Shape = Tuple[int, int]


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "_consumed")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim != 2:
            raise DimensionError(f"tensors are 2-D; got array of shape {arr.shape}")
        self.data = arr
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self._parents: Tuple[Tensor, ...] = ()
        self._backward: Optional[Callable[[np.ndarray], None]] = None
        self._consumed = False

    @property
    def shape(self) -> Shape:
        return self.data.shape  # type: ignore[return-value]

    def zero_grad(self) -> None:
        self.grad = None

    def item(self) -> float:
        if self.shape != (1, 1):
            raise UsageError(f"item() requires a 1x1 tensor, got {self.shape}")
        return float(self.data[0, 0])

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = g.copy()
        else:
            self.grad += g

    def backward(self) -> None:
        """Populate grad = d(self)/d(tensor) for every requires_grad tensor
        reachable from this scalar node. One shot per graph."""
        if self.shape != (1, 1):
            raise UsageError(f"backward requires a 1x1 loss tensor, got {self.shape}")
        if not self.requires_grad:
            raise UsageError("backward on a graph with no gradient-tracked tensors")
        if self._consumed:
            raise UsageError("backward already ran on this graph; rebuild the forward pass")
        self._consumed = True
        # Iterative post-order DFS (reverse topological order for the sweep).
        order: List[Tensor] = []
        seen = set()
        stack: List[Tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in seen:
                    stack.append((parent, False))
        self._accumulate(np.ones((1, 1)))
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)


def tensor(data, requires_grad: bool = False) -> Tensor:
    return Tensor(data, requires_grad=requires_grad)


def _node(
    op: str,
    data: np.ndarray,
    inputs: Sequence[Tensor],
    backward: Optional[Callable[[np.ndarray], None]],
) -> Tensor:
    if not np.isfinite(data).all():
        raise NumericalError(f"{op} produced a non-finite value")
    out = Tensor(data)
    if any(t.requires_grad for t in inputs):
        out.requires_grad = True
        out._parents = tuple(t for t in inputs if t.requires_grad)
        out._backward = backward
    return out


def _reduce_to(g: np.ndarray, shape: Shape) -> np.ndarray:
    """Sum a broadcasted gradient back down to the operand's shape."""
    if g.shape == shape:
        return g
    out = g
    if shape[0] == 1 and g.shape[0] != 1:
        out = out.sum(axis=0, keepdims=True)
    if shape[1] == 1 and g.shape[1] != 1:
        out = out.sum(axis=1, keepdims=True)
    return out


def _broadcastable(a: Shape, b: Shape) -> bool:
    rows_ok = a[0] == b[0] or a[0] == 1 or b[0] == 1
    cols_ok = a[1] == b[1] or a[1] == 1 or b[1] == 1
    return rows_ok and cols_ok


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: inner dimensions differ, {a.shape} @ {b.shape}")
    data = a.data @ b.data

    def backward(g: np.ndarray) -> None:
        if a.requires_grad:
            a._accumulate(g @ b.data.T)
        if b.requires_grad:
            b._accumulate(a.data.T @ g)

    return _node("matmul", data, (a, b), backward)


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum; a 1xC row broadcasts against RxC (either side)."""
    if not _broadcastable(a.shape, b.shape):
        raise DimensionError(f"add: incompatible shapes {a.shape} + {b.shape}")
    data = a.data + b.data

    def backward(g: np.ndarray) -> None:
        if a.requires_grad:
            a._accumulate(_reduce_to(g, a.shape))
        if b.requires_grad:
            b._accumulate(_reduce_to(g, b.shape))

    return _node("add", data, (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise product with the same row/column broadcasting as add."""
    if not _broadcastable(a.shape, b.shape):
        raise DimensionError(f"mul: incompatible shapes {a.shape} * {b.shape}")
    data = a.data * b.data

    def backward(g: np.ndarray) -> None:
        if a.requires_grad:
            a._accumulate(_reduce_to(g * b.data, a.shape))
        if b.requires_grad:
            b._accumulate(_reduce_to(g * a.data, b.shape))

    return _node("mul", data, (a, b), backward)


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0

    def backward(g: np.ndarray) -> None:
        a._accumulate(g * mask)

    return _node("relu", np.where(mask, a.data, 0.0), (a,), backward)


def softmax_rows(a: Tensor) -> Tensor:
    """Row-wise softmax with max subtraction for stability."""
    shifted = a.data - a.data.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=1, keepdims=True)

    def backward(g: np.ndarray) -> None:
        inner = (g * s).sum(axis=1, keepdims=True)
        a._accumulate(s * (g - inner))

    return _node("softmax_rows", s, (a,), backward)


def scale(a: Tensor, factor: float) -> Tensor:
    def backward(g: np.ndarray) -> None:
        a._accumulate(g * factor)

    return _node("scale", a.data * factor, (a,), backward)


def scale_rows(a: Tensor, factors: np.ndarray) -> Tensor:
    """Multiply row i by the constant factors[i] (no gradient to factors)."""
    col = np.asarray(factors, dtype=np.float64).reshape(-1, 1)
    if col.shape[0] != a.shape[0]:
        raise DimensionError(f"scale_rows: {col.shape[0]} factors for shape {a.shape}")

    def backward(g: np.ndarray) -> None:
        a._accumulate(g * col)

    return _node("scale_rows", a.data * col, (a,), backward)


def mean_rows(a: Tensor) -> Tensor:
    r = a.shape[0]
    data = a.data.mean(axis=0, keepdims=True)

    def backward(g: np.ndarray) -> None:
        a._accumulate(np.broadcast_to(g / r, a.shape).copy())

    return _node("mean_rows", data, (a,), backward)


def sum_all(a: Tensor) -> Tensor:
    data = np.array([[a.data.sum()]])

    def backward(g: np.ndarray) -> None:
        a._accumulate(np.full(a.shape, g[0, 0]))

    return _node("sum_all", data, (a,), backward)


def concat_cols(a: Tensor, b: Tensor) -> Tensor:
    if a.shape[0] != b.shape[0]:
        raise DimensionError(f"concat_cols: row counts differ, {a.shape} vs {b.shape}")
    split = a.shape[1]

    def backward(g: np.ndarray) -> None:
        if a.requires_grad:
            a._accumulate(g[:, :split])
        if b.requires_grad:
            b._accumulate(g[:, split:])

    return _node("concat_cols", np.hstack([a.data, b.data]), (a, b), backward)


def stack_rows(tensors: Sequence[Tensor]) -> Tensor:
    """Vertically stack tensors that share a column count."""
    if not tensors:
        raise UsageError("stack_rows needs at least one tensor")
    cols = tensors[0].shape[1]
    for t in tensors[1:]:
        if t.shape[1] != cols:
            raise DimensionError(
                f"stack_rows: column counts differ, {tensors[0].shape} vs {t.shape}"
            )
    offsets = []
    row = 0
    for t in tensors:
        offsets.append(row)
        row += t.shape[0]

    def backward(g: np.ndarray) -> None:
        for t, start in zip(tensors, offsets):
            if t.requires_grad:
                t._accumulate(g[start : start + t.shape[0]])

    return _node("stack_rows", np.vstack([t.data for t in tensors]), tuple(tensors), backward)


def transpose(a: Tensor) -> Tensor:
    def backward(g: np.ndarray) -> None:
        a._accumulate(g.T)

    return _node("transpose", a.data.T.copy(), (a,), backward)


def slice_rows(a: Tensor, start: int, stop: int) -> Tensor:
    if not (0 <= start < stop <= a.shape[0]):
        raise DimensionError(f"slice_rows: [{start}:{stop}] out of range for {a.shape}")

    def backward(g: np.ndarray) -> None:
        buf = np.zeros(a.shape)
        buf[start:stop] = g
        a._accumulate(buf)

    return _node("slice_rows", a.data[start:stop].copy(), (a,), backward)


def slice_cols(a: Tensor, start: int, stop: int) -> Tensor:
    if not (0 <= start < stop <= a.shape[1]):
        raise DimensionError(f"slice_cols: [{start}:{stop}] out of range for {a.shape}")

    def backward(g: np.ndarray) -> None:
        buf = np.zeros(a.shape)
        buf[:, start:stop] = g
        a._accumulate(buf)

    return _node("slice_cols", a.data[:, start:stop].copy(), (a,), backward)


def gather_rows(table: Tensor, ids: Sequence[int]) -> Tensor:
    """Select rows of a table by index (embedding lookup)."""
    idx = np.asarray(ids, dtype=np.int64)
    if idx.ndim != 1 or idx.size == 0:
        raise UsageError("gather_rows needs a non-empty 1-D id list")
    if idx.min() < 0 or idx.max() >= table.shape[0]:
        raise UsageError(
            f"gather_rows: id out of range [0, {table.shape[0]}): {int(idx.min())}..{int(idx.max())}"
        )

    def backward(g: np.ndarray) -> None:
        buf = np.zeros(table.shape)
        np.add.at(buf, idx, g)
        table._accumulate(buf)

    return _node("gather_rows", table.data[idx].copy(), (table,), backward)


def flatten_row(a: Tensor) -> Tensor:
    """Reshape RxC to 1x(R*C), row-major."""
    r, c = a.shape

    def backward(g: np.ndarray) -> None:
        a._accumulate(g.reshape(r, c))

    return _node("flatten_row", a.data.reshape(1, r * c).copy(), (a,), backward)


def layernorm_rows(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Per-row layer normalization with learned 1xC gain and bias."""
    c = x.shape[1]
    if gain.shape != (1, c) or bias.shape != (1, c):
        raise DimensionError(
            f"layernorm_rows: gain {gain.shape} / bias {bias.shape} must be (1, {c})"
        )
    mu = x.data.mean(axis=1, keepdims=True)
    var = ((x.data - mu) ** 2).mean(axis=1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv
    data = xhat * gain.data + bias.data

    def backward(g: np.ndarray) -> None:
        if gain.requires_grad:
            gain._accumulate((g * xhat).sum(axis=0, keepdims=True))
        if bias.requires_grad:
            bias._accumulate(g.sum(axis=0, keepdims=True))
        if x.requires_grad:
            gh = g * gain.data
            term = gh - gh.mean(axis=1, keepdims=True) - xhat * (gh * xhat).mean(axis=1, keepdims=True)
            x._accumulate(inv * term)

    return _node("layernorm_rows", data, (x, gain, bias), backward)
