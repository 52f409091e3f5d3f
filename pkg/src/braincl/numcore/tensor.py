"""Dense float64 tensors with reverse-mode automatic differentiation.

Every operation records its parents and the vector-Jacobian products needed
to run the chain rule backwards. Graphs are built immutably: a Tensor never
changes after construction, so sharing subgraphs (e.g. one orthonormalized
center matrix feeding every sample in a batch) is safe and gradients simply
accumulate where paths merge.

Scope is deliberately small: 1-D/2-D arrays, float64 only, and just the
broadcasting the model needs (scalars and row vectors against matrices).
"""

from __future__ import annotations

import itertools
from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "Tensor",
    "GraphError",
    "NonFiniteError",
    "backward",
    "concat",
    "stack",
]

_seq_counter = itertools.count()


class GraphError(ValueError):
    """Raised for structural problems: non-scalar loss, cycles, bad shapes."""


class NonFiniteError(FloatingPointError):
    """Raised when an operation would produce NaN or Inf values."""


def _as_array(values) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim > 2:
        raise GraphError(f"tensors are limited to 2 dimensions, got shape {arr.shape}")
    return arr


class Tensor:
    """A node in the computation graph.

    Leaves are created directly (``Tensor([1., 2.])``); interior nodes are
    created by operations and carry one vjp callable per parent. ``data`` is
    read-only; build a new Tensor instead of mutating.
    """

    __slots__ = ("data", "op", "parents", "_vjps", "requires_grad", "_seq")

    def __init__(self, values, requires_grad: bool = True, *, op: str = "leaf",
                 parents: tuple["Tensor", ...] = (),
                 vjps: tuple[Callable[[np.ndarray], np.ndarray], ...] = ()):
        data = _as_array(values)
        if not np.isfinite(data).all():
            raise NonFiniteError(f"non-finite values in '{op}' result")
        data.flags.writeable = False
        self.data = data
        self.op = op
        self.parents = parents
        self._vjps = vjps
        self.requires_grad = requires_grad
        self._seq = next(_seq_counter)

    # ------------------------------------------------------------------
    # basics

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise GraphError(f"item() on tensor of shape {self.shape}")
        return float(self.data.reshape(()))

    def detach(self) -> "Tensor":
        """A leaf with the same values and no history."""
        return Tensor(self.data, requires_grad=False)

    def __repr__(self) -> str:
        return f"Tensor(op={self.op!r}, shape={self.shape})"

    def __hash__(self) -> int:
        return id(self)

    def __eq__(self, other) -> bool:
        return self is other

    # ------------------------------------------------------------------
    # arithmetic

    def __add__(self, other) -> "Tensor":
        return _binary(self, other, "add", np.add,
                       lambda a, b, out, g: g,
                       lambda a, b, out, g: g)

    __radd__ = __add__

    def __sub__(self, other) -> "Tensor":
        return _binary(self, other, "sub", np.subtract,
                       lambda a, b, out, g: g,
                       lambda a, b, out, g: -g)

    def __rsub__(self, other) -> "Tensor":
        return _coerce(other).__sub__(self)

    def __mul__(self, other) -> "Tensor":
        return _binary(self, other, "mul", np.multiply,
                       lambda a, b, out, g: g * b,
                       lambda a, b, out, g: g * a)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Tensor":
        return _binary(self, other, "div", np.divide,
                       lambda a, b, out, g: g / b,
                       lambda a, b, out, g: -g * a / (b * b))

    def __rtruediv__(self, other) -> "Tensor":
        return _coerce(other).__truediv__(self)

    def __neg__(self) -> "Tensor":
        return Tensor(-self.data, op="neg", parents=(self,),
                      vjps=(lambda g: -g,), requires_grad=self.requires_grad)

    def __matmul__(self, other) -> "Tensor":
        other = _coerce(other)
        a, b = self.data, other.data
        if a.ndim == 0 or b.ndim == 0:
            raise GraphError("matmul requires 1-D or 2-D operands")
        try:
            out = a @ b
        except ValueError as exc:
            raise GraphError(f"matmul shape mismatch {a.shape} @ {b.shape}") from exc

        if a.ndim == 2 and b.ndim == 2:
            vjp_a = lambda g: g @ b.T
            vjp_b = lambda g: a.T @ g
        elif a.ndim == 2 and b.ndim == 1:
            vjp_a = lambda g: np.outer(g, b)
            vjp_b = lambda g: a.T @ g
        elif a.ndim == 1 and b.ndim == 2:
            vjp_a = lambda g: b @ g
            vjp_b = lambda g: np.outer(a, g)
        else:
            vjp_a = lambda g: g * b
            vjp_b = lambda g: g * a
        return Tensor(out, op="matmul", parents=(self, other), vjps=(vjp_a, vjp_b),
                      requires_grad=self.requires_grad or other.requires_grad)

    # ------------------------------------------------------------------
    # shape ops

    @property
    def T(self) -> "Tensor":
        if self.ndim != 2:
            raise GraphError(f"transpose needs a 2-D tensor, got shape {self.shape}")
        return Tensor(self.data.T, op="transpose", parents=(self,),
                      vjps=(lambda g: g.T,), requires_grad=self.requires_grad)

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        old = self.data.shape
        return Tensor(self.data.reshape(shape), op="reshape", parents=(self,),
                      vjps=(lambda g: g.reshape(old),), requires_grad=self.requires_grad)

    def flatten(self) -> "Tensor":
        return self.reshape(self.data.size)

    def __getitem__(self, idx) -> "Tensor":
        out = self.data[idx]
        shape = self.data.shape

        def vjp(g):
            full = np.zeros(shape)
            np.add.at(full, idx, g)
            return full

        return Tensor(out, op="getitem", parents=(self,), vjps=(vjp,),
                      requires_grad=self.requires_grad)

    # ------------------------------------------------------------------
    # reductions

    def sum(self, axis: int | None = None) -> "Tensor":
        shape = self.data.shape

        def vjp(g):
            if axis is None:
                return np.broadcast_to(g, shape).copy()
            return np.broadcast_to(np.expand_dims(g, axis), shape).copy()

        return Tensor(self.data.sum(axis=axis), op="sum", parents=(self,),
                      vjps=(vjp,), requires_grad=self.requires_grad)

    def mean(self, axis: int | None = None) -> "Tensor":
        shape = self.data.shape
        n = self.data.size if axis is None else shape[axis]

        def vjp(g):
            if axis is None:
                return np.broadcast_to(g / n, shape).copy()
            return np.broadcast_to(np.expand_dims(g, axis) / n, shape).copy()

        return Tensor(self.data.mean(axis=axis), op="mean", parents=(self,),
                      vjps=(vjp,), requires_grad=self.requires_grad)

    # ------------------------------------------------------------------
    # pointwise nonlinearities

    def exp(self) -> "Tensor":
        with np.errstate(over="ignore"):
            out = np.exp(self.data)
        return Tensor(out, op="exp", parents=(self,),
                      vjps=(lambda g: g * out,), requires_grad=self.requires_grad)

    def log(self) -> "Tensor":
        x = self.data
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.log(x)
        return Tensor(out, op="log", parents=(self,),
                      vjps=(lambda g: g / x,), requires_grad=self.requires_grad)

    def sqrt(self) -> "Tensor":
        with np.errstate(invalid="ignore"):
            out = np.sqrt(self.data)
        return Tensor(out, op="sqrt", parents=(self,),
                      vjps=(lambda g: g * 0.5 / out,), requires_grad=self.requires_grad)

    def leaky_relu(self, negative_slope: float = 0.01) -> "Tensor":
        x = self.data
        slope = np.where(x > 0, 1.0, negative_slope)
        return Tensor(np.where(x > 0, x, x * negative_slope), op="leaky_relu",
                      parents=(self,), vjps=(lambda g: g * slope,),
                      requires_grad=self.requires_grad)

    def softmax(self, axis: int = -1) -> "Tensor":
        # max subtraction keeps exp() in range
        z = self.data - self.data.max(axis=axis, keepdims=True)
        e = np.exp(z)
        out = e / e.sum(axis=axis, keepdims=True)

        def vjp(g):
            dot = (g * out).sum(axis=axis, keepdims=True)
            return out * (g - dot)

        return Tensor(out, op="softmax", parents=(self,), vjps=(vjp,),
                      requires_grad=self.requires_grad)

    def log_softmax(self, axis: int = -1) -> "Tensor":
        z = self.data - self.data.max(axis=axis, keepdims=True)
        lse = np.log(np.exp(z).sum(axis=axis, keepdims=True))
        out = z - lse

        def vjp(g):
            return g - np.exp(out) * g.sum(axis=axis, keepdims=True)

        return Tensor(out, op="log_softmax", parents=(self,), vjps=(vjp,),
                      requires_grad=self.requires_grad)

    def layer_norm(self, axis: int = -1, eps: float = 1e-5) -> "Tensor":
        x = self.data
        mu = x.mean(axis=axis, keepdims=True)
        xc = x - mu
        var = (xc * xc).mean(axis=axis, keepdims=True)
        inv = 1.0 / np.sqrt(var + eps)
        out = xc * inv

        def vjp(g):
            gm = g.mean(axis=axis, keepdims=True)
            gym = (g * out).mean(axis=axis, keepdims=True)
            return inv * (g - gm - out * gym)

        return Tensor(out, op="layer_norm", parents=(self,), vjps=(vjp,),
                      requires_grad=self.requires_grad)


def _coerce(value) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(value, requires_grad=False)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Reduce a gradient back to ``shape`` after numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for ax, dim in enumerate(shape):
        if dim == 1 and grad.shape[ax] != 1:
            grad = grad.sum(axis=ax, keepdims=True)
    return grad.reshape(shape)


_ALLOWED_BROADCASTS = "equal shapes, a scalar, or a row vector against a matrix"


def _binary(a: Tensor, other, op: str, fwd, vjp_a, vjp_b) -> Tensor:
    b = _coerce(other)
    sa, sb = a.data.shape, b.data.shape
    if not (sa == sb or a.data.size == 1 or b.data.size == 1
            or (len(sa) == 2 and sb == sa[1:]) or (len(sb) == 2 and sa == sb[1:])):
        raise GraphError(f"{op} shape mismatch {sa} vs {sb}; supported: {_ALLOWED_BROADCASTS}")
    with np.errstate(invalid="ignore", divide="ignore"):
        out = fwd(a.data, b.data)
    ad, bd = a.data, b.data
    return Tensor(
        out, op=op, parents=(a, b),
        vjps=(lambda g: _unbroadcast(vjp_a(ad, bd, out, g), sa),
              lambda g: _unbroadcast(vjp_b(ad, bd, out, g), sb)),
        requires_grad=a.requires_grad or b.requires_grad,
    )


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    """Concatenate along ``axis``; gradients slice back to each input."""
    tensors = [_coerce(t) for t in tensors]
    if not tensors:
        raise GraphError("concat of zero tensors")
    out = np.concatenate([t.data for t in tensors], axis=axis)
    offsets = np.cumsum([0] + [t.data.shape[axis] for t in tensors])

    def make_vjp(i):
        sl = [slice(None)] * out.ndim
        sl[axis] = slice(offsets[i], offsets[i + 1])
        sl = tuple(sl)
        return lambda g: g[sl]

    return Tensor(out, op="concat", parents=tuple(tensors),
                  vjps=tuple(make_vjp(i) for i in range(len(tensors))),
                  requires_grad=any(t.requires_grad for t in tensors))


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    """Stack same-shape tensors along a new axis."""
    tensors = [_coerce(t) for t in tensors]
    if not tensors:
        raise GraphError("stack of zero tensors")
    out = np.stack([t.data for t in tensors], axis=axis)

    def make_vjp(i):
        return lambda g: np.take(g, i, axis=axis)

    return Tensor(out, op="stack", parents=tuple(tensors),
                  vjps=tuple(make_vjp(i) for i in range(len(tensors))),
                  requires_grad=any(t.requires_grad for t in tensors))


def _toposort(root: Tensor) -> list[Tensor]:
    """Iterative DFS postorder; detects cycles injected by graph tampering."""
    order: list[Tensor] = []
    state: dict[int, int] = {}  # 1 = on stack, 2 = done
    stack: list[tuple[Tensor, int]] = [(root, 0)]
    while stack:
        node, child = stack[-1]
        if child == 0:
            st = state.get(id(node))
            if st == 1:
                raise GraphError("cycle detected in computation graph")
            if st == 2:
                stack.pop()
                continue
            state[id(node)] = 1
        if child < len(node.parents):
            stack[-1] = (node, child + 1)
            parent = node.parents[child]
            if state.get(id(parent)) != 2:
                stack.append((parent, 0))
        else:
            state[id(node)] = 2
            order.append(node)
            stack.pop()
    return order


def backward(loss: Tensor, wrt: Iterable[Tensor] | None = None) -> dict[Tensor, Tensor]:
    """Gradients of a scalar loss.

    Returns a map from tensor to gradient tensor. With ``wrt`` given, every
    requested tensor appears in the result, unreachable ones with zero
    gradients; otherwise all reachable leaves that require grad are returned.
    Accumulation order is fixed by graph construction order, so repeated runs
    produce bit-identical gradients.
    """
    if loss.data.size != 1:
        raise GraphError(f"backward needs a scalar loss, got shape {loss.shape}")
    order = _toposort(loss)
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node.parents:
            for parent, vjp in zip(node.parents, node._vjps):
                if not parent.requires_grad:
                    continue
                contribution = vjp(g)
                acc = grads.get(id(parent))
                if acc is None:
                    grads[id(parent)] = np.asarray(contribution, dtype=np.float64).copy()
                else:
                    acc += contribution
        else:
            grads[id(node)] = g  # keep leaf gradients

    leaves = {node: grads[id(node)] for node in order
              if not node.parents and node.requires_grad and id(node) in grads}
    if wrt is None:
        return {t: Tensor(g, requires_grad=False) for t, g in leaves.items()}
    result: dict[Tensor, Tensor] = {}
    for t in wrt:
        g = leaves.get(t)
        if g is None:
            g = np.zeros_like(t.data)
        result[t] = Tensor(g, requires_grad=False)
    return result
