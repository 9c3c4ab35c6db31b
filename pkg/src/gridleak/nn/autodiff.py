"""Reverse-mode automatic differentiation over dense float64 arrays.

A ``Variable`` wraps a numpy array and remembers how it was produced so
that ``backward`` can push gradients from a scalar loss to every leaf.
Plain numpy arrays and Python scalars mix freely with Variables and are
treated as constants (no gradient is accumulated for them).
"""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from ..errors import ContractError, ShapeError

Array = np.ndarray


def _as_f64(data) -> Array:
    arr = np.asarray(data, dtype=np.float64)
    return arr


class Variable:
    """Node in the compute graph: a value, its gradient, and a backward rule."""

    __slots__ = ("data", "grad", "_parents", "_backward")

    def __init__(self, data, parents: tuple = (), backward: Callable[[Array], None] | None = None):
        self.data = _as_f64(data)
        self.grad: Array | None = None
        self._parents = parents
        self._backward = backward

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Variable(shape={self.data.shape}, leaf={self._backward is None})"

    # -- operator sugar ------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __rsub__(self, other):
        return add(mul(self, -1.0), other)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def backward(self):
        backward(self)


def _accumulate(node: Variable, g: Array) -> None:
    if node.grad is None:
        # copy: several rules hand the same buffer to multiple parents
        node.grad = np.array(g, dtype=np.float64)
    else:
        node.grad += g


def _unbroadcast(g: Array, shape: tuple) -> Array:
    """Sum ``g`` down to ``shape`` (inverse of numpy broadcasting)."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def _value(x) -> Array:
    return x.data if isinstance(x, Variable) else _as_f64(x)


def backward(loss: Variable) -> None:
    """Propagate gradients from a scalar ``loss`` to every reachable leaf."""
    if not isinstance(loss, Variable):
        raise ContractError("backward() needs a Variable loss")
    if loss.data.size != 1:
        raise ContractError(f"loss must be scalar, got shape {loss.data.shape}")

    order: list[Variable] = []
    seen: set[int] = set()
    stack: list[tuple[Variable, bool]] = [(loss, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))

    loss.grad = np.ones_like(loss.data)
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


def zero_grads(params: Sequence[Variable]) -> None:
    for p in params:
        p.grad = None


# -- primitive operations ----------------------------------------------

def add(a, b) -> Variable:
    av, bv = _value(a), _value(b)
    out_parents = tuple(x for x in (a, b) if isinstance(x, Variable))
    out = Variable(av + bv, out_parents)

    def back(g: Array) -> None:
        if isinstance(a, Variable):
            _accumulate(a, _unbroadcast(g, av.shape))
        if isinstance(b, Variable):
            _accumulate(b, _unbroadcast(g, bv.shape))

    out._backward = back
    return out


def mul(a, b) -> Variable:
    av, bv = _value(a), _value(b)
    out = Variable(av * bv, tuple(x for x in (a, b) if isinstance(x, Variable)))

    def back(g: Array) -> None:
        if isinstance(a, Variable):
            _accumulate(a, _unbroadcast(g * bv, av.shape))
        if isinstance(b, Variable):
            _accumulate(b, _unbroadcast(g * av, bv.shape))

    out._backward = back
    return out


def matmul(a, b) -> Variable:
    av, bv = _value(a), _value(b)
    if av.ndim != 2 or bv.ndim != 2 or av.shape[1] != bv.shape[0]:
        raise ShapeError(f"matmul shapes {av.shape} x {bv.shape}")
    out = Variable(av @ bv, tuple(x for x in (a, b) if isinstance(x, Variable)))

    def back(g: Array) -> None:
        if isinstance(a, Variable):
            _accumulate(a, g @ bv.T)
        if isinstance(b, Variable):
            _accumulate(b, av.T @ g)

    out._backward = back
    return out


def sigmoid(a: Variable) -> Variable:
    av = _value(a)
    s = _sigmoid_np(av)
    out = Variable(s, (a,) if isinstance(a, Variable) else ())

    def back(g: Array) -> None:
        _accumulate(a, g * s * (1.0 - s))

    if isinstance(a, Variable):
        out._backward = back
    return out


def tanh(a: Variable) -> Variable:
    av = _value(a)
    t = np.tanh(av)
    out = Variable(t, (a,) if isinstance(a, Variable) else ())

    def back(g: Array) -> None:
        _accumulate(a, g * (1.0 - t * t))

    if isinstance(a, Variable):
        out._backward = back
    return out


def softplus(a: Variable) -> Variable:
    """log(1 + exp(a)), computed without overflow."""
    av = _value(a)
    val = np.logaddexp(0.0, av)
    out = Variable(val, (a,) if isinstance(a, Variable) else ())

    def back(g: Array) -> None:
        _accumulate(a, g * _sigmoid_np(av))

    if isinstance(a, Variable):
        out._backward = back
    return out


def square(a: Variable) -> Variable:
    av = _value(a)
    out = Variable(av * av, (a,) if isinstance(a, Variable) else ())

    def back(g: Array) -> None:
        _accumulate(a, g * (2.0 * av))

    if isinstance(a, Variable):
        out._backward = back
    return out


def vsum(a: Variable, axis=None, keepdims: bool = False) -> Variable:
    av = _value(a)
    out = Variable(av.sum(axis=axis, keepdims=keepdims), (a,) if isinstance(a, Variable) else ())

    def back(g: Array) -> None:
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accumulate(a, np.broadcast_to(g, av.shape))

    if isinstance(a, Variable):
        out._backward = back
    return out


def vmean(a: Variable, axis=None, keepdims: bool = False) -> Variable:
    av = _value(a)
    n = av.size if axis is None else np.prod([av.shape[i] for i in np.atleast_1d(axis)])
    return mul(vsum(a, axis=axis, keepdims=keepdims), 1.0 / float(n))


def reshape(a: Variable, shape) -> Variable:
    av = _value(a)
    out = Variable(av.reshape(shape), (a,) if isinstance(a, Variable) else ())

    def back(g: Array) -> None:
        _accumulate(a, g.reshape(av.shape))

    if isinstance(a, Variable):
        out._backward = back
    return out


def concat(parts: Sequence, axis: int = 1) -> Variable:
    vals = [_value(p) for p in parts]
    out = Variable(np.concatenate(vals, axis=axis),
                   tuple(p for p in parts if isinstance(p, Variable)))
    sizes = [v.shape[axis] for v in vals]
    offsets = np.cumsum([0] + sizes)

    def back(g: Array) -> None:
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            if isinstance(p, Variable):
                idx = [slice(None)] * g.ndim
                idx[axis] = slice(lo, hi)
                _accumulate(p, g[tuple(idx)])

    out._backward = back
    return out


def slice_cols(a: Variable, lo: int, hi: int) -> Variable:
    """Columns [lo, hi) of a 2-D value."""
    av = _value(a)
    out = Variable(av[:, lo:hi], (a,) if isinstance(a, Variable) else ())

    def back(g: Array) -> None:
        full = np.zeros_like(av)
        full[:, lo:hi] = g
        _accumulate(a, full)

    if isinstance(a, Variable):
        out._backward = back
    return out


def _sigmoid_np(x: Array) -> Array:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out
