"""Reverse-mode automatic differentiation over dense float64 arrays.

A small define-by-run engine: every operation returns a new :class:`Tensor`
holding the forward value plus closures that push adjoints back to its
parents.  ``backward`` walks the graph in reverse topological order with a
fixed accumulation order, so identical inputs give bit-identical gradients.

Subgraphs that do not reach a trainable tensor are pruned at construction
time, which keeps the tape small when large constant inputs (node features,
aggregation matrices) flow through the model.
"""

from __future__ import annotations

import zlib
from typing import Callable, Sequence

import numpy as np

from .seeds import substream

__all__ = [
    "Tensor",
    "parameter",
    "constant",
    "add",
    "sub",
    "mul",
    "neg",
    "scale",
    "transpose",
    "matmul",
    "matvec",
    "dot",
    "rowwise_dot",
    "rows",
    "take_pairs",
    "sigmoid",
    "log",
    "absolute",
    "relu",
    "sum_all",
    "mean_all",
    "mean_axis0",
    "softmax_t",
    "euclidean_distance",
    "cosine_similarity",
    "backward",
    "grad_check",
]


class Tensor:
    """Dense float64 array plus bookkeeping for reverse-mode differentiation."""

    __slots__ = ("data", "grad", "requires_grad", "name", "_parents")

    def __init__(self, data, requires_grad: bool = False, name: str = "", _parents=()):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.name = name
        # tuple of (parent Tensor, fn: adjoint -> contribution to parent)
        self._parents = _parents

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ""
        return f"<Tensor{label} shape={self.shape}>"


def parameter(data, name: str = "") -> Tensor:
    """Wrap an array as a trainable leaf; gradients accumulate into ``.grad``."""
    arr = np.array(data, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"parameter {name!r} contains non-finite values")
    return Tensor(arr, requires_grad=True, name=name)


def constant(data, name: str = "") -> Tensor:
    """Wrap an array as a non-trainable leaf."""
    if isinstance(data, Tensor):
        return data
    arr = np.asarray(data, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"constant {name!r} contains non-finite values")
    return Tensor(arr, requires_grad=False, name=name)


def _result(data, parents) -> Tensor:
    """Build an op output, dropping edges to parents that need no gradient."""
    kept = tuple((p, fn) for p, fn in parents if p.requires_grad or p._parents)
    return Tensor(data, requires_grad=bool(kept), _parents=kept)


def _check_same_shape(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape != b.shape:
        raise ValueError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


# ---------------------------------------------------------------------------
# elementwise and linear-algebra kernels
# ---------------------------------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape(a, b, "add")
    return _result(a.data + b.data, [(a, lambda g: g), (b, lambda g: g)])


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape(a, b, "sub")
    return _result(a.data - b.data, [(a, lambda g: g), (b, lambda g: -g)])


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape(a, b, "mul")
    return _result(
        a.data * b.data,
        [(a, lambda g: g * b.data), (b, lambda g: g * a.data)],
    )


def neg(a: Tensor) -> Tensor:
    return _result(-a.data, [(a, lambda g: -g)])


def scale(x: Tensor, s) -> Tensor:
    """Multiply ``x`` by a scalar, either a plain float or a 0-d Tensor."""
    if isinstance(s, Tensor):
        if s.ndim != 0:
            raise ValueError(f"scale: scalar operand must be 0-d, got {s.shape}")
        return _result(
            x.data * s.data,
            [(x, lambda g: g * s.data), (s, lambda g: np.sum(g * x.data))],
        )
    factor = float(s)
    return _result(x.data * factor, [(x, lambda g: g * factor)])


def transpose(x: Tensor) -> Tensor:
    if x.ndim != 2:
        raise ValueError(f"transpose: expected 2-d, got {x.shape}")
    return _result(x.data.T.copy(), [(x, lambda g: g.T)])


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul: incompatible shapes {a.shape} @ {b.shape}")
    return _result(
        a.data @ b.data,
        [(a, lambda g: g @ b.data.T), (b, lambda g: a.data.T @ g)],
    )


def matvec(a: Tensor, x: Tensor) -> Tensor:
    if a.ndim != 2 or x.ndim != 1 or a.shape[1] != x.shape[0]:
        raise ValueError(f"matvec: incompatible shapes {a.shape} @ {x.shape}")
    return _result(
        a.data @ x.data,
        [(a, lambda g: np.outer(g, x.data)), (x, lambda g: a.data.T @ g)],
    )


def dot(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 1 or b.ndim != 1:
        raise ValueError(f"dot: expected vectors, got {a.shape} and {b.shape}")
    _check_same_shape(a, b, "dot")
    return _result(
        np.dot(a.data, b.data),
        [(a, lambda g: g * b.data), (b, lambda g: g * a.data)],
    )


def rowwise_dot(a: Tensor, b: Tensor) -> Tensor:
    """Per-row inner products of two equally shaped matrices -> 1-d vector."""
    if a.ndim != 2:
        raise ValueError(f"rowwise_dot: expected matrices, got {a.shape}")
    _check_same_shape(a, b, "rowwise_dot")
    return _result(
        np.einsum("ij,ij->i", a.data, b.data),
        [(a, lambda g: g[:, None] * b.data), (b, lambda g: g[:, None] * a.data)],
    )


def rows(x: Tensor, indices) -> Tensor:
    """Gather rows of a matrix; the adjoint scatter-adds back."""
    if x.ndim != 2:
        raise ValueError(f"rows: expected a matrix, got {x.shape}")
    idx = np.asarray(indices, dtype=np.intp)

    def push(g):
        out = np.zeros_like(x.data)
        np.add.at(out, idx, g)
        return out

    return _result(x.data[idx], [(x, push)])


def take_pairs(x: Tensor, row_indices, col_indices) -> Tensor:
    """Gather ``x[r_i, c_i]`` into a vector; adjoint scatter-adds back."""
    if x.ndim != 2:
        raise ValueError(f"take_pairs: expected a matrix, got {x.shape}")
    ri = np.asarray(row_indices, dtype=np.intp)
    ci = np.asarray(col_indices, dtype=np.intp)
    if ri.shape != ci.shape:
        raise ValueError("take_pairs: index arrays differ in shape")

    def push(g):
        out = np.zeros_like(x.data)
        np.add.at(out, (ri, ci), g)
        return out

    return _result(x.data[ri, ci], [(x, push)])


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # Both np.where branches are evaluated; overflow in the discarded one is benign.
    with np.errstate(over="ignore", invalid="ignore"):
        ex = np.exp(x)
        return np.where(x >= 0, 1.0 / (1.0 + np.exp(-x)), ex / (1.0 + ex))


def sigmoid(x: Tensor) -> Tensor:
    y = _sigmoid(x.data)
    return _result(y, [(x, lambda g: g * y * (1.0 - y))])


def log(x: Tensor) -> Tensor:
    if np.any(x.data <= 0.0):
        raise ValueError("log: input must be strictly positive")
    return _result(np.log(x.data), [(x, lambda g: g / x.data)])


def absolute(x: Tensor) -> Tensor:
    # subgradient 0 at the kink
    return _result(np.abs(x.data), [(x, lambda g: g * np.sign(x.data))])


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0.0
    return _result(x.data * mask, [(x, lambda g: g * mask)])


def sum_all(x: Tensor) -> Tensor:
    return _result(np.sum(x.data), [(x, lambda g: np.broadcast_to(g, x.shape).copy())])


def mean_all(x: Tensor) -> Tensor:
    n = x.data.size
    return _result(
        np.mean(x.data),
        [(x, lambda g: np.broadcast_to(g / n, x.shape).copy())],
    )


def mean_axis0(x: Tensor) -> Tensor:
    """Column means of a matrix -> 1-d vector."""
    if x.ndim != 2:
        raise ValueError(f"mean_axis0: expected a matrix, got {x.shape}")
    n = x.shape[0]
    return _result(
        np.mean(x.data, axis=0),
        [(x, lambda g: np.broadcast_to(g / n, x.shape).copy())],
    )


def softmax_t(x: Tensor, temperature: float = 1.0) -> Tensor:
    """Temperature softmax over a vector, or over each row of a matrix.

    Uses max-subtraction for stability; the output of each row sums to one.
    """
    if temperature <= 0.0:
        raise ValueError("softmax_t: temperature must be positive")
    if x.ndim not in (1, 2):
        raise ValueError(f"softmax_t: expected 1-d or 2-d input, got {x.shape}")
    z = x.data / temperature
    z = z - np.max(z, axis=-1, keepdims=True)
    e = np.exp(z)
    y = e / np.sum(e, axis=-1, keepdims=True)

    def push(g):
        inner = np.sum(g * y, axis=-1, keepdims=True)
        return y * (g - inner) / temperature

    return _result(y, [(x, push)])


def euclidean_distance(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 1 or b.ndim != 1:
        raise ValueError("euclidean_distance: expected vectors")
    _check_same_shape(a, b, "euclidean_distance")
    diff = a.data - b.data
    dist = float(np.sqrt(np.sum(diff * diff)))

    def push_a(g):
        if dist == 0.0:
            return np.zeros_like(diff)  # subgradient at coincident points
        return g * diff / dist

    def push_b(g):
        if dist == 0.0:
            return np.zeros_like(diff)
        return -g * diff / dist

    return _result(dist, [(a, push_a), (b, push_b)])


def cosine_similarity(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 1 or b.ndim != 1:
        raise ValueError("cosine_similarity: expected vectors")
    _check_same_shape(a, b, "cosine_similarity")
    na = float(np.linalg.norm(a.data))
    nb = float(np.linalg.norm(b.data))
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine_similarity: zero-norm input")
    cos = float(np.dot(a.data, b.data) / (na * nb))
    return _result(
        cos,
        [
            (a, lambda g: g * (b.data / (na * nb) - cos * a.data / (na * na))),
            (b, lambda g: g * (a.data / (na * nb) - cos * b.data / (nb * nb))),
        ],
    )


# ---------------------------------------------------------------------------
# backward pass and gradient verification
# ---------------------------------------------------------------------------


def _topological_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent, _ in node._parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    return order


def backward(loss: Tensor) -> None:
    """Populate ``.grad`` on every trainable tensor reachable from a scalar loss.

    Gradients from previous calls are cleared for all tensors in the graph,
    so parameter tensors can be reused across steps.
    """
    if loss.ndim != 0:
        raise ValueError(f"backward: loss must be a scalar, got shape {loss.shape}")
    order = _topological_order(loss)
    for node in order:
        node.grad = None
    loss.grad = np.ones((), dtype=np.float64)
    for node in reversed(order):
        if node.grad is None:
            continue
        for parent, push in node._parents:
            contribution = push(node.grad)
            if parent.grad is None:
                parent.grad = np.array(contribution, dtype=np.float64)
            else:
                parent.grad = parent.grad + contribution


def grad_check(
    loss_fn: Callable[[dict[str, Tensor]], Tensor],
    params: dict[str, np.ndarray],
    eps: float = 1e-5,
    max_coords: int | None = None,
    seed: int = 0,
) -> float:
    """Compare analytic gradients of ``loss_fn`` against central differences.

    ``loss_fn`` must rebuild its graph from the supplied parameter tensors on
    every call.  Coordinates are subsampled deterministically when a parameter
    has more than ``max_coords`` entries.  Returns the worst relative error;
    coordinates where both gradients are below 1e-8 count as exact.
    """
    if not 1e-7 <= eps <= 1e-3:
        raise ValueError("grad_check: eps must lie in [1e-7, 1e-3]")

    def evaluate(values: dict[str, np.ndarray]) -> float:
        tensors = {k: parameter(v, name=k) for k, v in values.items()}
        return loss_fn(tensors).item()

    base = {k: np.array(v, dtype=np.float64) for k, v in params.items()}
    tensors = {k: parameter(v, name=k) for k, v in base.items()}
    backward(loss_fn(tensors))

    worst = 0.0
    for name in sorted(base):
        analytic = tensors[name].grad
        if analytic is None:
            analytic = np.zeros_like(base[name])
        flat_size = base[name].size
        coords: Sequence[int] = range(flat_size)
        if max_coords is not None and flat_size > max_coords:
            rng = substream(seed, "gradcheck", zlib.crc32(name.encode("utf-8")))
            coords = sorted(rng.choice(flat_size, size=max_coords, replace=False))
        for c in coords:
            perturbed = {k: v.copy() for k, v in base.items()}
            perturbed[name].flat[c] += eps
            hi = evaluate(perturbed)
            perturbed[name].flat[c] -= 2 * eps
            lo = evaluate(perturbed)
            numeric = (hi - lo) / (2 * eps)
            a = float(analytic.flat[c])
            denom = max(abs(a), abs(numeric))
            if denom < 1e-8:
                continue
            worst = max(worst, abs(a - numeric) / denom)
    return worst
