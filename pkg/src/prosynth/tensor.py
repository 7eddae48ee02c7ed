"""Dense float64 tensors with reverse-mode differentiation.

Every model computation runs through the primitives in this module. Each
primitive validates shapes, checks its output for NaN/Inf, and records a
backward closure on the computation graph when any input participates in
gradient tracking. Gradients are accumulated by :func:`backward` starting
from a scalar loss.
"""

from __future__ import annotations

import math
from contextlib import contextmanager

import numpy as np


class ShapeError(ValueError):
    """Operand shapes do not conform to an op's contract."""


class NumericError(ArithmeticError):
    """A primitive produced NaN or Inf."""


class TapeError(RuntimeError):
    """Backward called on an invalid or already-consumed graph."""


# Global switches. `finite_checks` can be dropped for micro-benchmarks;
# everything in the library runs with it on.
_grad_enabled = True
finite_checks = True


@contextmanager
def no_grad():
    """Disable graph recording inside the block (inference, finite diffs)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def grad_enabled():
    return _grad_enabled


class Tensor:
    """N-d float64 array, optionally tracked on the gradient graph.

    `data` is always a C-contiguous float64 ndarray. `grad`, once
    populated, has the same shape as `data`.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "_spent")

    def __init__(self, data, requires_grad=False):
        arr = np.ascontiguousarray(data, dtype=np.float64)
        if finite_checks and not np.all(np.isfinite(arr)):
            raise NumericError("tensor constructed with non-finite values")
        self.data = arr
        self.grad = np.zeros_like(arr) if requires_grad else None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None
        self._spent = False

    # -- introspection -------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    @property
    def ndim(self):
        return self.data.ndim

    def item(self):
        if self.data.size != 1:
            raise ShapeError(f"item() on non-scalar tensor of shape {self.data.shape}")
        return float(self.data.reshape(()))

    def numpy(self):
        """The underlying array (not a copy); treat as read-only."""
        return self.data

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}{flag})"

    # -- graph ---------------------------------------------------------

    def zero_grad(self):
        if self.grad is not None:
            self.grad[...] = 0.0
        elif self.requires_grad:
            self.grad = np.zeros_like(self.data)

    def backward(self):
        backward(self)

    # -- operator sugar (floats are promoted to constants) --------------

    def __add__(self, other):
        return add(self, _as_tensor(other))

    def __radd__(self, other):
        return add(_as_tensor(other), self)

    def __sub__(self, other):
        return sub(self, _as_tensor(other))

    def __rsub__(self, other):
        return sub(_as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, _as_tensor(other))

    def __rmul__(self, other):
        return mul(_as_tensor(other), self)

    def __truediv__(self, other):
        return div(self, _as_tensor(other))

    def __rtruediv__(self, other):
        return div(_as_tensor(other), self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    # -- method sugar ----------------------------------------------------

    def sum(self, axis=None, keepdims=False):
        return tensor_sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return tensor_mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    @property
    def T(self):
        return transpose(self)


def _as_tensor(x):
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=np.float64))


def constant(data):
    """Untracked tensor, for fixed inputs (positions, targets, masks)."""
    return Tensor(data)


def _finite_or_raise(arr, op):
    # One-pass probe: a NaN/Inf anywhere poisons the sum.
    if finite_checks and not math.isfinite(float(np.sum(arr))):
        if not np.all(np.isfinite(arr)):
            raise NumericError(f"{op} produced non-finite values")


def _node(data, op, parents, backward_fn):
    """Wrap an op result, attaching the backward closure when tracked."""
    _finite_or_raise(data, op)
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out.requires_grad = False
    out._parents = ()
    out._backward = None
    out._spent = False
    if _grad_enabled and any(p.requires_grad or p._backward is not None or p._parents
                             for p in parents):
        out._parents = tuple(parents)
        out._backward = backward_fn
    return out


def _accum(t, g):
    if t.requires_grad or t._backward is not None or t._parents:
        if t.grad is None:
            t.grad = g.copy() if isinstance(g, np.ndarray) else np.asarray(g, dtype=np.float64)
        else:
            t.grad += g


def _unbroadcast(g, shape):
    """Reduce gradient `g` back to `shape` after numpy broadcasting."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def backward(loss):
    """Accumulate d(loss)/d(t) into `.grad` for every tracked tensor.

    Repeated backward calls on *separate* graphs accumulate into the same
    parameter grads (zero them with `zero_grad` between optimizer steps).
    The traversed graph is released afterwards; backing the same loss a
    second time raises TapeError.
    """
    if not isinstance(loss, Tensor):
        raise TapeError("backward expects a Tensor")
    if loss.data.size != 1:
        raise TapeError(f"backward requires a scalar loss, got shape {loss.data.shape}")
    if loss._spent:
        raise TapeError("graph already consumed by a previous backward call")
    if loss._backward is None and not loss.requires_grad:
        raise TapeError("loss is not connected to any tracked tensor")

    # Iterative topological order (graphs routinely exceed the recursion limit).
    order = []
    visited = set()
    stack = [(loss, False)]
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
            if id(p) not in visited:
                stack.append((p, False))

    loss.grad = np.ones_like(loss.data)
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)
    # Release closures; interior grads are not needed past this point.
    for node in order:
        node._backward = None
        node._parents = ()
        node._spent = True
        if not node.requires_grad:
            node.grad = None


# ---------------------------------------------------------------------------
# Elementwise arithmetic (numpy broadcasting, gradients unbroadcast)
# ---------------------------------------------------------------------------


def add(a, b):
    data = a.data + b.data
    def bwd(g):
        _accum(a, _unbroadcast(g, a.data.shape))
        _accum(b, _unbroadcast(g, b.data.shape))
    return _node(data, "add", (a, b), bwd)


def sub(a, b):
    data = a.data - b.data
    def bwd(g):
        _accum(a, _unbroadcast(g, a.data.shape))
        _accum(b, _unbroadcast(-g, b.data.shape))
    return _node(data, "sub", (a, b), bwd)


def mul(a, b):
    data = a.data * b.data
    def bwd(g):
        _accum(a, _unbroadcast(g * b.data, a.data.shape))
        _accum(b, _unbroadcast(g * a.data, b.data.shape))
    return _node(data, "mul", (a, b), bwd)


def div(a, b):
    with np.errstate(divide="ignore", invalid="ignore"):
        data = a.data / b.data
    def bwd(g):
        _accum(a, _unbroadcast(g / b.data, a.data.shape))
        _accum(b, _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape))
    return _node(data, "div", (a, b), bwd)


def neg(a):
    def bwd(g):
        _accum(a, -g)
    return _node(-a.data, "neg", (a,), bwd)


# ---------------------------------------------------------------------------
# Linear algebra and shape ops
# ---------------------------------------------------------------------------


def matmul(a, b):
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ShapeError(f"matmul expects 2-D operands, got {a.data.shape} @ {b.data.shape}")
    if a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(f"matmul inner dims differ: {a.data.shape} @ {b.data.shape}")
    data = a.data @ b.data
    def bwd(g):
        _accum(a, g @ b.data.T)
        _accum(b, a.data.T @ g)
    return _node(data, "matmul", (a, b), bwd)


def transpose(a, axes=None):
    data = np.ascontiguousarray(np.transpose(a.data, axes))
    if axes is None:
        inv = None
    else:
        inv = tuple(np.argsort(axes))
    def bwd(g):
        _accum(a, np.ascontiguousarray(np.transpose(g, inv)))
    return _node(data, "transpose", (a,), bwd)


def reshape(a, shape):
    data = a.data.reshape(shape)
    def bwd(g):
        _accum(a, g.reshape(a.data.shape))
    return _node(np.ascontiguousarray(data), "reshape", (a,), bwd)


def concat(tensors, axis=0):
    tensors = list(tensors)
    if not tensors:
        raise ShapeError("concat of zero tensors")
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)
    def bwd(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(lo, hi)
            _accum(t, g[tuple(idx)])
    return _node(data, "concat", tuple(tensors), bwd)


def narrow(a, axis, start, length):
    """Contiguous slice of `length` entries along `axis` (concat's inverse)."""
    if start < 0 or start + length > a.data.shape[axis]:
        raise ShapeError(
            f"narrow [{start}:{start + length}] out of range for axis {axis} of {a.data.shape}")
    idx = [slice(None)] * a.data.ndim
    idx[axis] = slice(start, start + length)
    idx = tuple(idx)
    data = np.ascontiguousarray(a.data[idx])
    def bwd(g):
        full = np.zeros_like(a.data)
        full[idx] = g
        _accum(a, full)
    return _node(data, "narrow", (a,), bwd)


def tensor_sum(a, axis=None, keepdims=False):
    data = np.asarray(a.data.sum(axis=axis, keepdims=keepdims))
    def bwd(g):
        if axis is None:
            _accum(a, np.broadcast_to(g, a.data.shape).copy())
        else:
            gg = g if keepdims else np.expand_dims(g, axis)
            _accum(a, np.broadcast_to(gg, a.data.shape).copy())
    return _node(data, "sum", (a,), bwd)


def tensor_mean(a, axis=None, keepdims=False):
    data = np.asarray(a.data.mean(axis=axis, keepdims=keepdims))
    count = a.data.size if axis is None else a.data.shape[axis]
    def bwd(g):
        if axis is None:
            _accum(a, np.broadcast_to(g / count, a.data.shape).copy())
        else:
            gg = g if keepdims else np.expand_dims(g, axis)
            _accum(a, np.broadcast_to(gg / count, a.data.shape).copy())
    return _node(data, "mean", (a,), bwd)


def mean_pool(a, axis=0):
    """Mean over the sequence axis; [T, d] -> [d]."""
    return tensor_mean(a, axis=axis)


# ---------------------------------------------------------------------------
# Nonlinearities
# ---------------------------------------------------------------------------


def relu(a):
    data = np.maximum(a.data, 0.0)
    def bwd(g):
        _accum(a, g * (a.data > 0.0))
    return _node(data, "relu", (a,), bwd)


def tanh(a):
    data = np.tanh(a.data)
    def bwd(g):
        _accum(a, g * (1.0 - data * data))
    return _node(data, "tanh", (a,), bwd)


def sigmoid(a):
    # Stable piecewise logistic.
    x = a.data
    data = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                    np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
    def bwd(g):
        _accum(a, g * data * (1.0 - data))
    return _node(data, "sigmoid", (a,), bwd)


def softplus(a):
    # log(1 + e^x) = max(x, 0) + log1p(e^-|x|)
    x = a.data
    data = np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))
    sig = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                   np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
    def bwd(g):
        _accum(a, g * sig)
    return _node(data, "softplus", (a,), bwd)


def exp(a):
    with np.errstate(over="ignore"):
        data = np.exp(a.data)
    def bwd(g):
        _accum(a, g * data)
    return _node(data, "exp", (a,), bwd)


def log(a):
    with np.errstate(divide="ignore", invalid="ignore"):
        data = np.log(a.data)
    def bwd(g):
        _accum(a, g / a.data)
    return _node(data, "log", (a,), bwd)


def softmax(a, axis=-1):
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    data = e / e.sum(axis=axis, keepdims=True)
    def bwd(g):
        dot = (g * data).sum(axis=axis, keepdims=True)
        _accum(a, data * (g - dot))
    return _node(data, "softmax", (a,), bwd)


LAYER_NORM_EPS = 1e-8


def layer_norm(a, eps=LAYER_NORM_EPS):
    """Normalize the last axis to zero mean / unit variance (no gain/bias)."""
    mu = a.data.mean(axis=-1, keepdims=True)
    centered = a.data - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    data = centered * inv
    n = a.data.shape[-1]
    def bwd(g):
        # d/dx of (x - mu) / sqrt(var + eps)
        gm = g.mean(axis=-1, keepdims=True)
        gx = (g * data).mean(axis=-1, keepdims=True)
        _accum(a, inv * (g - gm - data * gx))
    return _node(data, "layer_norm", (a,), bwd)


# ---------------------------------------------------------------------------
# Sequence ops
# ---------------------------------------------------------------------------


def conv1d(x, w, b=None):
    """1-D convolution over the sequence axis, stride 1, zero 'same' padding.

    x: [T, C_in], w: [k, C_in, C_out], b: [C_out] or None -> [T, C_out].
    """
    if x.data.ndim != 2 or w.data.ndim != 3:
        raise ShapeError(f"conv1d expects x [T, C_in] and w [k, C_in, C_out], "
                         f"got {x.data.shape} and {w.data.shape}")
    k, c_in, c_out = w.data.shape
    if x.data.shape[1] != c_in:
        raise ShapeError(f"conv1d channel mismatch: x {x.data.shape} vs w {w.data.shape}")
    t = x.data.shape[0]
    left = (k - 1) // 2
    xp = np.zeros((t + k - 1, c_in))
    xp[left:left + t] = x.data
    # windows[i, j, c] = xp[i + j, c]
    windows = np.lib.stride_tricks.sliding_window_view(xp, k, axis=0)  # [T, C_in, k]
    flat = np.ascontiguousarray(windows.transpose(0, 2, 1)).reshape(t, k * c_in)
    wf = w.data.reshape(k * c_in, c_out)
    data = flat @ wf
    if b is not None:
        data = data + b.data

    def bwd(g):
        _accum(w, (flat.T @ g).reshape(k, c_in, c_out))
        if b is not None:
            _accum(b, g.sum(axis=0))
        dwin = (g @ wf.T).reshape(t, k, c_in)
        dxp = np.zeros_like(xp)
        for j in range(k):
            dxp[j:j + t] += dwin[:, j, :]
        _accum(x, dxp[left:left + t])

    parents = (x, w) if b is None else (x, w, b)
    return _node(data, "conv1d", parents, bwd)


def embed_lookup(table, ids):
    """Row gather: table [V, d], ids int array [T] -> [T, d]."""
    ids = np.asarray(ids, dtype=np.int64)
    v = table.data.shape[0]
    bad = (ids < 0) | (ids >= v)
    if bad.any():
        pos = int(np.argmax(bad))
        raise ShapeError(f"embed_lookup id {ids[pos]} out of range [0, {v}) at position {pos}")
    data = table.data[ids]
    def bwd(g):
        dt = np.zeros_like(table.data)
        np.add.at(dt, ids, g)
        _accum(table, dt)
    return _node(data, "embed_lookup", (table,), bwd)


def dropout(a, p, rng, training=True):
    """Inverted dropout with an explicit Generator. No-op when off or p == 0."""
    if not training or p <= 0.0:
        return a
    if not 0.0 <= p < 1.0:
        raise ShapeError(f"dropout rate must be in [0, 1), got {p}")
    mask = (rng.random(a.data.shape) >= p) / (1.0 - p)
    data = a.data * mask
    def bwd(g):
        _accum(a, g * mask)
    return _node(data, "dropout", (a,), bwd)
