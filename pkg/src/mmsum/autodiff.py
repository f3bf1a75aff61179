"""Minimal reverse-mode automatic differentiation over numpy arrays.

Float64 tape with just the operations the summarizer needs: broadcasting
arithmetic, matmul, activations, row gather/scatter, row softmax, and a few
shape utilities. Gradients are exact and are cross-checked against central
finite differences by the gradient-check harness and the test suite.
"""
from __future__ import annotations

import numpy as np

_GRAD_ENABLED = True


class no_grad:
    """Disable tape recording inside a ``with`` block (plain numpy forward)."""

    def __enter__(self):
        global _GRAD_ENABLED
        self._prev = _GRAD_ENABLED
        _GRAD_ENABLED = False
        return self

    def __exit__(self, *exc):
        global _GRAD_ENABLED
        _GRAD_ENABLED = self._prev
        return False


def grad_enabled():
    return _GRAD_ENABLED


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_bw")

    # make numpy defer to the reflected operators instead of broadcasting
    # elementwise over the Tensor object
    __array_ufunc__ = None

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._bw = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def item(self):
        return float(self.data)

    def detach(self):
        return Tensor(self.data.copy())

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __pow__(self, exponent):
        return power(self, exponent)

    def __getitem__(self, idx):
        if isinstance(idx, (int, np.integer)):
            return getrow(self, int(idx))
        raise TypeError("only integer row indexing is supported")


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _acc(t, g):
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _node(data, parents, bw):
    req = _GRAD_ENABLED and any(p.requires_grad for p in parents)
    out = Tensor(data, requires_grad=req)
    if req:
        out._parents = parents
        out._bw = bw
    return out


def _unbroadcast(g, shape):
    """Sum a gradient back down to ``shape`` after numpy broadcasting."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data + b.data

    def bw(g):
        if a.requires_grad:
            _acc(a, _unbroadcast(g, a.data.shape))
        if b.requires_grad:
            _acc(b, _unbroadcast(g, b.data.shape))

    return _node(out_data, (a, b), bw)


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data - b.data

    def bw(g):
        if a.requires_grad:
            _acc(a, _unbroadcast(g, a.data.shape))
        if b.requires_grad:
            _acc(b, _unbroadcast(-g, b.data.shape))

    return _node(out_data, (a, b), bw)


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data * b.data

    def bw(g):
        if a.requires_grad:
            _acc(a, _unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            _acc(b, _unbroadcast(g * a.data, b.data.shape))

    return _node(out_data, (a, b), bw)


def div(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data / b.data

    def bw(g):
        if a.requires_grad:
            _acc(a, _unbroadcast(g / b.data, a.data.shape))
        if b.requires_grad:
            _acc(b, _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape))

    return _node(out_data, (a, b), bw)


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data @ b.data
    an, bn = a.data.ndim, b.data.ndim

    def bw(g):
        if an == 2 and bn == 2:
            if a.requires_grad:
                _acc(a, g @ b.data.T)
            if b.requires_grad:
                _acc(b, a.data.T @ g)
        elif an == 2 and bn == 1:
            if a.requires_grad:
                _acc(a, np.outer(g, b.data))
            if b.requires_grad:
                _acc(b, a.data.T @ g)
        elif an == 1 and bn == 2:
            if a.requires_grad:
                _acc(a, b.data @ g)
            if b.requires_grad:
                _acc(b, np.outer(a.data, g))
        elif an == 1 and bn == 1:
            if a.requires_grad:
                _acc(a, g * b.data)
            if b.requires_grad:
                _acc(b, g * a.data)
        else:  # pragma: no cover - shapes are controlled by callers
            raise ValueError(f"unsupported matmul ranks {an} @ {bn}")

    return _node(out_data, (a, b), bw)


def transpose(a):
    a = as_tensor(a)

    def bw(g):
        if a.requires_grad:
            _acc(a, g.T)

    return _node(a.data.T, (a,), bw)


def tanh(a):
    a = as_tensor(a)
    out_data = np.tanh(a.data)

    def bw(g):
        if a.requires_grad:
            _acc(a, g * (1.0 - out_data * out_data))

    return _node(out_data, (a,), bw)


def sigmoid(a):
    a = as_tensor(a)
    x = a.data
    out_data = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                        np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))

    def bw(g):
        if a.requires_grad:
            _acc(a, g * out_data * (1.0 - out_data))

    return _node(out_data, (a,), bw)


def exp(a):
    a = as_tensor(a)
    out_data = np.exp(a.data)

    def bw(g):
        if a.requires_grad:
            _acc(a, g * out_data)

    return _node(out_data, (a,), bw)


def log(a):
    a = as_tensor(a)
    out_data = np.log(a.data)

    def bw(g):
        if a.requires_grad:
            _acc(a, g / a.data)

    return _node(out_data, (a,), bw)


def power(a, exponent):
    """Elementwise a**p for a constant float p.

    The derivative at a == 0 with 0 < p < 1 is unbounded; it is defined as 0
    here so that saturated fusion weights never poison the tape with inf.
    """
    p = float(exponent)
    a = as_tensor(a)
    out_data = np.power(a.data, p)

    def bw(g):
        if not a.requires_grad:
            return
        if p == 0.0:
            return
        if p == 1.0:
            _acc(a, g.copy())
            return
        nonzero = a.data != 0.0
        base = np.where(nonzero, a.data, 1.0)
        deriv = np.where(nonzero, p * np.power(base, p - 1.0), 0.0)
        _acc(a, g * deriv)

    return _node(out_data, (a,), bw)


def clip(a, lo, hi):
    a = as_tensor(a)
    out_data = np.clip(a.data, lo, hi)

    def bw(g):
        if a.requires_grad:
            inside = (a.data >= lo) & (a.data <= hi)
            _acc(a, g * inside)

    return _node(out_data, (a,), bw)


def tsum(a, axis=None):
    a = as_tensor(a)
    out_data = a.data.sum(axis=axis)

    def bw(g):
        if not a.requires_grad:
            return
        if axis is None:
            _acc(a, np.full_like(a.data, g))
        else:
            _acc(a, np.broadcast_to(np.expand_dims(g, axis), a.data.shape).copy())

    return _node(out_data, (a,), bw)


def tmean(a, axis=None):
    a = as_tensor(a)
    n = a.data.size if axis is None else a.data.shape[axis]
    return mul(tsum(a, axis=axis), 1.0 / n)


def concat(parts, axis=0):
    parts = [as_tensor(p) for p in parts]
    out_data = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.data.shape[axis] for p in parts]

    def bw(g):
        offset = 0
        for p, size in zip(parts, sizes):
            if p.requires_grad:
                sl = [slice(None)] * g.ndim
                sl[axis] = slice(offset, offset + size)
                _acc(p, g[tuple(sl)])
            offset += size

    return _node(out_data, tuple(parts), bw)


def stack_rows(rows):
    rows = [as_tensor(r) for r in rows]
    out_data = np.stack([r.data for r in rows], axis=0)

    def bw(g):
        for i, r in enumerate(rows):
            if r.requires_grad:
                _acc(r, g[i])

    return _node(out_data, tuple(rows), bw)


def getrow(a, i):
    a = as_tensor(a)

    def bw(g):
        if a.requires_grad:
            if a.grad is None:
                a.grad = np.zeros_like(a.data)
            a.grad[i] += g

    return _node(a.data[i].copy(), (a,), bw)


def slice1d(a, start, stop):
    a = as_tensor(a)

    def bw(g):
        if a.requires_grad:
            if a.grad is None:
                a.grad = np.zeros_like(a.data)
            a.grad[start:stop] += g

    return _node(a.data[start:stop].copy(), (a,), bw)


def take_rows(a, indices):
    """Row gather (embedding lookup); backward scatter-adds into the table."""
    a = as_tensor(a)
    idx = np.asarray(indices, dtype=np.intp)
    out_data = a.data[idx]

    def bw(g):
        if a.requires_grad:
            if a.grad is None:
                a.grad = np.zeros_like(a.data)
            np.add.at(a.grad, idx, g)

    return _node(out_data, (a,), bw)


def repeat_rows(a, k):
    """Repeat each row k times: (n, d) -> (n*k, d)."""
    a = as_tensor(a)
    out_data = np.repeat(a.data, k, axis=0)
    n, d = a.data.shape

    def bw(g):
        if a.requires_grad:
            _acc(a, g.reshape(n, k, d).sum(axis=1))

    return _node(out_data, (a,), bw)


def tile_rows(a, k):
    """Tile the whole block k times: (n, d) -> (k*n, d)."""
    a = as_tensor(a)
    out_data = np.tile(a.data, (k, 1))
    n, d = a.data.shape

    def bw(g):
        if a.requires_grad:
            _acc(a, g.reshape(k, n, d).sum(axis=0))

    return _node(out_data, (a,), bw)


def reshape(a, shape):
    a = as_tensor(a)

    def bw(g):
        if a.requires_grad:
            _acc(a, g.reshape(a.data.shape))

    return _node(a.data.reshape(shape), (a,), bw)


def outer(u, v):
    u, v = as_tensor(u), as_tensor(v)
    out_data = np.outer(u.data, v.data)

    def bw(g):
        if u.requires_grad:
            _acc(u, g @ v.data)
        if v.requires_grad:
            _acc(v, u.data @ g)

    return _node(out_data, (u, v), bw)


def softmax_rows(a):
    """Row-wise softmax with max subtraction for numerical stability."""
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    out_data = e / e.sum(axis=1, keepdims=True)

    def bw(g):
        if a.requires_grad:
            dot = (g * out_data).sum(axis=1, keepdims=True)
            _acc(a, out_data * (g - dot))

    return _node(out_data, (a,), bw)


def backward(t):
    """Run reverse-mode accumulation from ``t`` (seeded with ones)."""
    order = []
    visited = set()
    stack = [(t, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in visited:
                stack.append((p, False))
    t.grad = np.ones_like(t.data)
    for node in reversed(order):
        # grad can stay None when no child contributed (e.g. x**0 is constant)
        if node._bw is not None and node.grad is not None:
            node._bw(node.grad)
