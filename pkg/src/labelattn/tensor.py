"""Dense float64 tensors with reverse-mode automatic differentiation.

The op set is deliberately small: exactly what a label-attention classifier
over 2-D matrices needs (no batch axis, no general broadcasting). Every op
records a backward closure on its result; ``Tensor.backward()`` runs the
recorded graph once in reverse topological order and then frees it.
"""

from __future__ import annotations

import math
from typing import Callable, Iterable, Mapping, Optional, Sequence, Union

import numpy as np

ArrayLike = Union[np.ndarray, Sequence, float, int]


class ShapeError(ValueError):
    """Operand shapes do not fit the requested operation."""


class GraphError(RuntimeError):
    """Compute-graph misuse: non-scalar backward, or reuse of a freed graph."""


class OptimizerError(RuntimeError):
    """Optimizer stepped over a parameter with no gradient."""


class Tensor:
    """A dense float64 array, optionally tracked by the autodiff graph.

    ``grad`` is populated by ``backward()`` on every tensor reachable from
    the loss that has ``requires_grad`` set. Intermediate results are freed
    once the backward pass completes.
    """

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "_released")

    def __init__(self, data: ArrayLike, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self._parents: tuple = ()
        self._backward: Optional[Callable[[np.ndarray], None]] = None
        self._released = False

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def zero_grad(self) -> None:
        self.grad = None

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(()))

    def backward(self) -> None:
        """Populate ``grad`` on every reachable ``requires_grad`` tensor.

        Only a scalar produced by recorded operations may start a backward
        pass. The graph is consumed: a second call without a new forward
        pass raises ``GraphError``.
        """
        if self._released:
            raise GraphError("backward() called twice on the same graph; run a new forward pass")
        if not self._parents:
            raise GraphError("backward() needs a tensor produced by recorded operations")
        if self.data.size != 1:
            raise ShapeError(f"backward() needs a scalar loss, got shape {self.shape}")

        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
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
                stack.append((parent, False))

        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)
        for node in order:
            if node._parents:
                node._parents = ()
                node._backward = None
                node._released = True
                if not node.requires_grad:
                    node.grad = None

    # Operator sugar; named functions below carry the real logic.
    def __add__(self, other: "Tensor") -> "Tensor":
        return add(self, other)

    def __sub__(self, other: "Tensor") -> "Tensor":
        return sub(self, other)

    def __mul__(self, other) -> "Tensor":
        return mul(self, other) if isinstance(other, Tensor) else scale(self, other)

    def __rmul__(self, other) -> "Tensor":
        return scale(self, other)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        return matmul(self, other)

    def __neg__(self) -> "Tensor":
        return scale(self, -1.0)

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _result(data: np.ndarray, parents: tuple, backward: Callable[[np.ndarray], None]) -> Tensor:
    out = Tensor(data)
    if any(p.requires_grad or p._parents for p in parents):
        out._parents = parents
        out._backward = backward
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product for [p x q] @ [q x r] and [p x q] @ [q] operands."""
    if a.data.ndim != 2 or b.data.ndim not in (1, 2):
        raise ShapeError(f"matmul supports 2-D @ 1-or-2-D, got {a.shape} and {b.shape}")
    if a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(f"matmul inner dimensions differ: {a.shape} and {b.shape}")
    a_data, b_data = a.data, b.data

    def backward(g: np.ndarray) -> None:
        if b_data.ndim == 2:
            _accumulate(a, g @ b_data.T)
            _accumulate(b, a_data.T @ g)
        else:
            _accumulate(a, np.outer(g, b_data))
            _accumulate(b, a_data.T @ g)

    return _result(a_data @ b_data, (a, b), backward)


def transpose(x: Tensor) -> Tensor:
    def backward(g: np.ndarray) -> None:
        _accumulate(x, g.T)

    return _result(x.data.T.copy(), (x,), backward)


def _check_same_shape(op: str, a: Tensor, b: Tensor) -> None:
    if a.data.shape != b.data.shape:
        raise ShapeError(f"{op} needs matching shapes, got {a.shape} and {b.shape}")


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape("add", a, b)

    def backward(g: np.ndarray) -> None:
        _accumulate(a, g)
        _accumulate(b, g)

    return _result(a.data + b.data, (a, b), backward)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape("sub", a, b)

    def backward(g: np.ndarray) -> None:
        _accumulate(a, g)
        _accumulate(b, -g)

    return _result(a.data - b.data, (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise product of same-shape tensors."""
    _check_same_shape("mul", a, b)
    a_data, b_data = a.data, b.data

    def backward(g: np.ndarray) -> None:
        _accumulate(a, g * b_data)
        _accumulate(b, g * a_data)

    return _result(a_data * b_data, (a, b), backward)


def scale(x: Tensor, c: ArrayLike) -> Tensor:
    """Multiply by a constant scalar or array; the constant gets no gradient."""
    c_arr = np.asarray(c, dtype=np.float64)

    def backward(g: np.ndarray) -> None:
        _accumulate(x, g * c_arr)

    return _result(x.data * c_arr, (x,), backward)


def div_const(x: Tensor, c: ArrayLike) -> Tensor:
    """Divide by a constant; kept separate from scale() so integer divisors stay exact."""
    c_arr = np.asarray(c, dtype=np.float64)

    def backward(g: np.ndarray) -> None:
        _accumulate(x, g / c_arr)

    return _result(x.data / c_arr, (x,), backward)


def rsub_const(c: ArrayLike, x: Tensor) -> Tensor:
    """Constant minus tensor, elementwise."""
    c_arr = np.asarray(c, dtype=np.float64)

    def backward(g: np.ndarray) -> None:
        _accumulate(x, -g)

    return _result(c_arr - x.data, (x,), backward)


def rowwise_dot(a: Tensor, b: Tensor) -> Tensor:
    """Per-row inner product: [m x k], [m x k] -> [m]."""
    _check_same_shape("rowwise_dot", a, b)
    if a.data.ndim != 2:
        raise ShapeError(f"rowwise_dot needs matrices, got shape {a.shape}")
    a_data, b_data = a.data, b.data

    def backward(g: np.ndarray) -> None:
        _accumulate(a, g[:, None] * b_data)
        _accumulate(b, g[:, None] * a_data)

    return _result(np.einsum("ij,ij->i", a_data, b_data), (a, b), backward)


def mean_rows(x: Tensor) -> Tensor:
    """Mean over rows: [t x d] -> [d]."""
    if x.data.ndim != 2:
        raise ShapeError(f"mean_rows needs a matrix, got shape {x.shape}")
    t = x.data.shape[0]

    def backward(g: np.ndarray) -> None:
        _accumulate(x, np.repeat(g[None, :] / t, t, axis=0))

    return _result(x.data.mean(axis=0), (x,), backward)


def sum_all(x: Tensor) -> Tensor:
    """Sum of all elements, as a scalar tensor."""
    shape = x.data.shape

    def backward(g: np.ndarray) -> None:
        _accumulate(x, np.broadcast_to(g, shape).copy() if shape else g)

    return _result(np.asarray(x.data.sum()), (x,), backward)


def log(x: Tensor) -> Tensor:
    x_data = x.data

    def backward(g: np.ndarray) -> None:
        _accumulate(x, g / x_data)

    return _result(np.log(x_data), (x,), backward)


def sigmoid(x: Tensor) -> Tensor:
    """Elementwise logistic function, computed branch-wise for stability."""
    x_data = x.data
    out = np.empty_like(x_data)
    pos = x_data >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x_data[pos]))
    ex = np.exp(x_data[~pos])
    out[~pos] = ex / (1.0 + ex)

    def backward(g: np.ndarray) -> None:
        _accumulate(x, g * out * (1.0 - out))

    return _result(out, (x,), backward)


def clip(x: Tensor, lo: float, hi: float) -> Tensor:
    """Clamp values to [lo, hi]; gradient passes only through unclipped entries."""
    inside = (x.data > lo) & (x.data < hi)

    def backward(g: np.ndarray) -> None:
        _accumulate(x, g * inside)

    return _result(np.clip(x.data, lo, hi), (x,), backward)


def _softmax(x: Tensor, axis: int, mask: Optional[np.ndarray]) -> Tensor:
    z = x.data
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.ndim == 1:
            if mask.shape[0] != z.shape[0]:
                raise ShapeError(f"mask length {mask.shape[0]} does not match {z.shape}")
            mask = np.broadcast_to(mask[:, None], z.shape)
        elif mask.shape != z.shape:
            raise ShapeError(f"mask shape {mask.shape} does not match {z.shape}")
        if not mask.any(axis=axis).all():
            raise ValueError("softmax mask excludes every position along the normalized axis")
        z = np.where(mask, z, -np.inf)
    # Max subtraction keeps exp() in range for magnitudes up to +-1e4 and beyond.
    shifted = z - z.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(g: np.ndarray) -> None:
        inner = (g * out).sum(axis=axis, keepdims=True)
        _accumulate(x, out * (g - inner))

    return _result(out, (x,), backward)


def column_softmax(x: Tensor, mask: Optional[np.ndarray] = None) -> Tensor:
    """Softmax down each column of [t x k]: every column sums to 1.

    ``mask`` is an optional boolean keep-mask over the t rows (or the full
    matrix); excluded positions get probability 0, as if their logits were
    minus infinity.
    """
    if x.data.ndim != 2:
        raise ShapeError(f"column_softmax needs a matrix, got shape {x.shape}")
    return _softmax(x, axis=0, mask=mask)


def row_softmax(x: Tensor, mask: Optional[np.ndarray] = None) -> Tensor:
    """Softmax along each row of [t x k]: every row sums to 1."""
    if x.data.ndim != 2:
        raise ShapeError(f"row_softmax needs a matrix, got shape {x.shape}")
    return _softmax(x, axis=1, mask=mask)


def embedding_rows(table: Tensor, ids: Sequence[int]) -> Tensor:
    """Gather rows of [v x d] by id; gradients scatter-add back into the table."""
    idx = np.asarray(ids, dtype=np.intp)
    if idx.ndim != 1 or idx.size == 0:
        raise ShapeError("embedding_rows needs a non-empty 1-D id sequence")
    v = table.data.shape[0]
    if (idx < 0).any() or (idx >= v).any():
        bad = int(idx[(idx < 0) | (idx >= v)][0])
        raise IndexError(f"embedding id {bad} outside table of {v} rows")

    def backward(g: np.ndarray) -> None:
        if table.grad is None:
            table.grad = np.zeros_like(table.data)
        np.add.at(table.grad, idx, g)

    return _result(table.data[idx], (table,), backward)


def pad_rows(x: Tensor, start: int, total_rows: int) -> Tensor:
    """Embed [n x d] into a [total_rows x d] zero matrix at row offset ``start``."""
    n, d = x.data.shape
    if start < 0 or start + n > total_rows:
        raise ShapeError(f"rows [{start}, {start + n}) do not fit in {total_rows}")
    out = np.zeros((total_rows, d))
    out[start:start + n] = x.data

    def backward(g: np.ndarray) -> None:
        _accumulate(x, g[start:start + n])

    return _result(out, (x,), backward)


def div_rows(x: Tensor, divisors: ArrayLike) -> Tensor:
    """Divide each row of [t x d] by a fixed positive per-row constant.

    True division, not reciprocal multiply: dividing by small integer
    counts (1, 2, 4...) is then exact in float64.
    """
    d = np.asarray(divisors, dtype=np.float64)
    if x.data.ndim != 2 or d.shape != (x.data.shape[0],):
        raise ShapeError(f"div_rows needs [t x d] and t divisors, got {x.shape} and {d.shape}")
    if (d <= 0).any():
        raise ValueError("row divisors must be positive")

    def backward(g: np.ndarray) -> None:
        _accumulate(x, g / d[:, None])

    return _result(x.data / d[:, None], (x,), backward)


def dropout(x: Tensor, p: float, training: bool, rng: Optional[np.random.Generator] = None) -> Tensor:
    """Zero elements with probability ``p`` and rescale survivors by 1/(1-p).

    Identity in eval mode and at p=0. Requires 0 <= p < 1.
    """
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout probability must be in [0, 1), got {p}")
    if not training or p == 0.0:
        return x
    if rng is None:
        raise ValueError("dropout in training mode needs an rng")
    keep = rng.random(x.data.shape) >= p
    factor = keep / (1.0 - p)

    def backward(g: np.ndarray) -> None:
        _accumulate(x, g * factor)

    return _result(x.data * factor, (x,), backward)


class Adam:
    """Adam with bias correction over a named parameter mapping.

    Moment buffers live on the optimizer, shape-matched to each parameter;
    the step counter is shared and strictly increasing.
    """

    def __init__(self, params: Mapping[str, Tensor], lr: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        if lr < 0:
            raise ValueError(f"learning rate must be non-negative, got {lr}")
        self.params = dict(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = {name: np.zeros_like(p.data) for name, p in self.params.items()}
        self.v = {name: np.zeros_like(p.data) for name, p in self.params.items()}

    def step(self) -> None:
        for name, p in self.params.items():
            if p.grad is None:
                raise OptimizerError(f"parameter '{name}' has no gradient")
        self.step_count += 1
        t = self.step_count
        bias1 = 1.0 - self.beta1 ** t
        bias2 = 1.0 - self.beta2 ** t
        for name, p in self.params.items():
            g = p.grad
            self.m[name] = self.beta1 * self.m[name] + (1.0 - self.beta1) * g
            self.v[name] = self.beta2 * self.v[name] + (1.0 - self.beta2) * g * g
            m_hat = self.m[name] / bias1
            v_hat = self.v[name] / bias2
            p.data -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None


def clip_gradient_norm(params: Iterable[Tensor], max_norm: float) -> float:
    """Scale all gradients so their global L2 norm is at most ``max_norm``."""
    grads = [p.grad for p in params if p.grad is not None]
    total = math.sqrt(sum(float((g * g).sum()) for g in grads))
    if total > max_norm > 0:
        factor = max_norm / total
        for g in grads:
            g *= factor
    return total
