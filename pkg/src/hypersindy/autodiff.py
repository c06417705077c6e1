"""Minimal reverse-mode automatic differentiation over dense float64 arrays.

Every op returns a new :class:`Tensor`. When any input requires a gradient the
result is appended to the global tape: it receives a monotonically increasing
node id and a closure that pushes its output gradient back to its inputs.
``backward`` walks the nodes reachable from the loss in reverse insertion
order, so each node is visited exactly once.
"""

from __future__ import annotations

import itertools
import threading
from contextlib import contextmanager
from typing import Callable, Iterator, Sequence

import numpy as np

_node_ids = itertools.count()
_state = threading.local()


@contextmanager
def no_grad() -> Iterator[None]:
    """Evaluate ops without recording graph nodes (this thread only)."""
    prev = getattr(_state, "disabled", False)
    _state.disabled = True
    try:
        yield
    finally:
        _state.disabled = prev


class DimensionError(ValueError):
    """Operand shapes are incompatible for an op."""


class DomainError(ValueError):
    """An op was evaluated outside its mathematical domain."""


class ContractError(RuntimeError):
    """A caller broke an API precondition."""


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_id", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.array(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self._id = next(_node_ids)
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None

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
        return float(self.data)

    def numpy(self) -> np.ndarray:
        return self.data

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.data)))

    def zero_grad(self) -> None:
        self.grad = None

    def detach(self) -> Tensor:
        return Tensor(self.data)

    def backward(self) -> None:
        backward(self)

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

    # operator sugar; all real work happens in the module-level ops
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _record(out_data: np.ndarray, parents: Sequence[Tensor], backward_fn) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.data = out_data
    out.grad = None
    out._id = next(_node_ids)
    if not getattr(_state, "disabled", False) and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward_fn
    else:
        out.requires_grad = False
        out._parents = ()
        out._backward = None
    return out


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.array(g, dtype=np.float64, copy=True)
    else:
        t.grad = t.grad + g


def _broadcast_shape(op: str, a: tuple, b: tuple) -> tuple:
    # leading-axis broadcasting only: equal shapes, a scalar, or one shape a suffix of the other
    if a == b:
        return a
    if len(a) == 0 or (len(a) <= len(b) and b[len(b) - len(a):] == a):
        return b
    if len(b) == 0 or (len(b) <= len(a) and a[len(a) - len(b):] == b):
        return a
    raise DimensionError(f"{op}: incompatible shapes {a} and {b}")


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    return g


# ---------------------------------------------------------------- binary ops


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("add", a.shape, b.shape)

    def bw(g):
        _accumulate(a, _unbroadcast(g, a.shape))
        _accumulate(b, _unbroadcast(g, b.shape))

    return _record(a.data + b.data, (a, b), bw)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("sub", a.shape, b.shape)

    def bw(g):
        _accumulate(a, _unbroadcast(g, a.shape))
        _accumulate(b, -_unbroadcast(g, b.shape))

    return _record(a.data - b.data, (a, b), bw)


def mul(a, b) -> Tensor:
    """Elementwise product with leading-axis broadcasting."""
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("mul", a.shape, b.shape)

    def bw(g):
        if a.requires_grad:
            _accumulate(a, _unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            _accumulate(b, _unbroadcast(g * a.data, b.shape))

    return _record(a.data * b.data, (a, b), bw)


def scale(a, c: float) -> Tensor:
    a = as_tensor(a)
    c = float(c)
    return _record(a.data * c, (a,), lambda g: _accumulate(a, g * c))


def matmul(a, b) -> Tensor:
    """2-D ``(m,k)@(k,p)``, batched ``(B,m,k)@(B,k,p)``, or ``(B,m,k)@(k,p)``."""
    a, b = as_tensor(a), as_tensor(b)
    ok = (
        (a.ndim == 2 and b.ndim == 2)
        or (a.ndim == 3 and b.ndim == 3 and a.shape[0] == b.shape[0])
        or (a.ndim == 3 and b.ndim == 2)
    )
    if not ok or a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul: incompatible shapes {a.shape} and {b.shape}")

    def bw(g):
        if a.requires_grad:
            _accumulate(a, g @ np.swapaxes(b.data, -1, -2))
        if b.requires_grad:
            gb = np.swapaxes(a.data, -1, -2) @ g
            if b.ndim == 2 and gb.ndim == 3:
                gb = gb.sum(axis=0)
            _accumulate(b, gb)

    return _record(a.data @ b.data, (a, b), bw)


# ----------------------------------------------------------------- unary ops


def exp(a) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.data)
    return _record(out, (a,), lambda g: _accumulate(a, g * out))


def log(a) -> Tensor:
    a = as_tensor(a)
    if np.any(a.data <= 0):
        raise DomainError("log: argument has nonpositive entries")
    return _record(np.log(a.data), (a,), lambda g: _accumulate(a, g / a.data))


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # tanh form never overflows
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    out = _sigmoid(a.data)
    return _record(out, (a,), lambda g: _accumulate(a, g * out * (1.0 - out)))


def elu(a, alpha: float = 1.0) -> Tensor:
    a = as_tensor(a)
    neg = a.data < 0
    ex = np.exp(np.where(neg, a.data, 0.0))
    out = np.where(neg, alpha * (ex - 1.0), a.data)
    dout = np.where(neg, alpha * ex, 1.0)
    return _record(out, (a,), lambda g: _accumulate(a, g * dout))


def square(a) -> Tensor:
    a = as_tensor(a)
    return _record(a.data * a.data, (a,), lambda g: _accumulate(a, 2.0 * g * a.data))


def clamp(a, lo: float, hi: float) -> Tensor:
    """Clip to ``[lo, hi]``; gradient passes only through unclipped entries."""
    a = as_tensor(a)
    inside = (a.data > lo) & (a.data < hi)
    return _record(np.clip(a.data, lo, hi), (a,), lambda g: _accumulate(a, g * inside))


# ---------------------------------------------------------- shape/reductions


def reshape(a, shape: Sequence[int]) -> Tensor:
    a = as_tensor(a)
    try:
        out = a.data.reshape(shape)
    except ValueError as exc:
        raise DimensionError(f"reshape: cannot view {a.shape} as {tuple(shape)}") from exc
    return _record(out, (a,), lambda g: _accumulate(a, g.reshape(a.shape)))


def sum(a, axis: int | tuple[int, ...] | None = None) -> Tensor:  # noqa: A001
    a = as_tensor(a)
    out = a.data.sum(axis=axis)

    def bw(g):
        if axis is not None:
            g = np.expand_dims(g, axis)
        _accumulate(a, np.broadcast_to(g, a.shape))

    return _record(np.asarray(out), (a,), bw)


def mean(a, axis: int | tuple[int, ...] | None = None) -> Tensor:
    a = as_tensor(a)
    n = a.size if axis is None else int(np.prod([a.shape[i] for i in np.atleast_1d(axis)]))
    return scale(sum(a, axis), 1.0 / n)


# ------------------------------------------------------------------ backward


def backward(loss: Tensor) -> None:
    """Populate ``.grad`` on every leaf that requires it and feeds ``loss``."""
    if loss.size != 1 or loss.ndim != 0:
        raise ContractError(f"backward: loss must be a scalar, got shape {loss.shape}")
    if not loss.requires_grad:
        raise ContractError("backward: loss does not depend on any tensor requiring grad")

    nodes: dict[int, Tensor] = {}
    stack = [loss]
    while stack:
        t = stack.pop()
        if t._id in nodes:
            continue
        nodes[t._id] = t
        stack.extend(p for p in t._parents if p.requires_grad)

    # interior nodes get fresh grads; leaves accumulate across calls
    for t in nodes.values():
        if t._backward is not None:
            t.grad = None
    loss.grad = np.ones_like(loss.data)
    for node_id in sorted(nodes, reverse=True):
        t = nodes[node_id]
        if t._backward is not None and t.grad is not None:
            t._backward(t.grad)
            t.grad = None if t is not loss else t.grad
