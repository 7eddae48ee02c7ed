"""Parameter containers and the small set of trainable building blocks.

Modules are plain attribute trees; parameter names are the dotted
attribute paths from the root module and double as checkpoint keys.
"""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .tensor import Tensor


class Parameter:
    """A named trainable tensor."""

    __slots__ = ("tensor", "name")

    def __init__(self, data, name=""):
        self.tensor = Tensor(data, requires_grad=True)
        self.name = name

    @property
    def data(self):
        return self.tensor.data

    @property
    def grad(self):
        return self.tensor.grad

    @property
    def shape(self):
        return self.tensor.data.shape

    def __repr__(self):
        return f"Parameter({self.name or '<unnamed>'}, shape={self.tensor.data.shape})"


class Module:
    """Base for anything holding Parameters or sub-Modules as attributes."""

    def named_parameters(self, prefix=""):
        """Yield (dotted_name, Parameter), refreshing each Parameter.name."""
        for key, value in vars(self).items():
            path = f"{prefix}.{key}" if prefix else key
            if isinstance(value, Parameter):
                value.name = path
                yield path, value
            elif isinstance(value, Module):
                yield from value.named_parameters(path)
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{path}.{i}")
                    elif isinstance(item, Parameter):
                        item.name = f"{path}.{i}"
                        yield f"{path}.{i}", item

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def zero_grad(self):
        for _, p in self.named_parameters():
            p.tensor.zero_grad()

    def param_count(self):
        return sum(p.tensor.data.size for _, p in self.named_parameters())

    def state_dict(self):
        return {name: p.tensor.data.copy() for name, p in self.named_parameters()}

    def load_state(self, state):
        """Assign parameter arrays by name; unknown/missing names are errors."""
        own = dict(self.named_parameters())
        missing = sorted(set(own) - set(state))
        extra = sorted(set(state) - set(own))
        if missing or extra:
            raise KeyError(f"state mismatch: missing={missing[:4]} extra={extra[:4]}")
        for name, p in own.items():
            arr = np.asarray(state[name], dtype=np.float64)
            if arr.shape != p.tensor.data.shape:
                raise T.ShapeError(
                    f"parameter {name}: checkpoint shape {arr.shape} != model shape "
                    f"{p.tensor.data.shape}")
            p.tensor.data[...] = arr


def xavier_uniform(rng, fan_in, fan_out, shape=None):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape or (fan_in, fan_out))


class Linear(Module):
    def __init__(self, in_dim, out_dim, rng, bias=True):
        self.w = Parameter(xavier_uniform(rng, in_dim, out_dim))
        self.b = Parameter(np.zeros(out_dim)) if bias else None

    def __call__(self, x):
        out = T.matmul(x, self.w.tensor)
        if self.b is not None:
            out = out + self.b.tensor
        return out


class LayerNorm(Module):
    """Last-axis normalization with learned gain and bias."""

    def __init__(self, dim, eps=T.LAYER_NORM_EPS):
        self.gain = Parameter(np.ones(dim))
        self.bias = Parameter(np.zeros(dim))
        self.eps = eps

    def __call__(self, x):
        return T.layer_norm(x, eps=self.eps) * self.gain.tensor + self.bias.tensor


class Conv1d(Module):
    """Sequence convolution, stride 1, zero 'same' padding; x is [T, C_in]."""

    def __init__(self, in_channels, out_channels, kernel_width, rng, bias=True):
        fan_in = kernel_width * in_channels
        self.w = Parameter(xavier_uniform(rng, fan_in, out_channels,
                                          shape=(kernel_width, in_channels, out_channels)))
        self.b = Parameter(np.zeros(out_channels)) if bias else None

    def __call__(self, x):
        return T.conv1d(x, self.w.tensor, self.b.tensor if self.b is not None else None)


class Embedding(Module):
    def __init__(self, vocab_size, dim, rng):
        self.table = Parameter(rng.normal(0.0, 0.3, size=(vocab_size, dim)))

    def __call__(self, ids):
        return T.embed_lookup(self.table.tensor, ids)


class FeedForward(Module):
    """Two linear maps with a ReLU between (the FFN sub-network shape)."""

    def __init__(self, dim, inner_dim, rng):
        self.w1 = Linear(dim, inner_dim, rng)
        self.w2 = Linear(inner_dim, dim, rng)

    def __call__(self, x):
        return self.w2(T.relu(self.w1(x)))


class MultiHeadSelfAttention(Module):
    """Scaled dot-product self-attention with per-head 1/sqrt(d_head) scaling.

    Returns (output [T, d], weights ndarray [H, T, T]); the weights are a
    detached copy for inspection.
    """

    def __init__(self, dim, num_heads, rng):
        if dim % num_heads != 0:
            raise T.ShapeError(f"model dim {dim} not divisible by {num_heads} heads")
        self.num_heads = num_heads
        self.head_dim = dim // num_heads
        self.wq = Linear(dim, dim, rng)
        self.wk = Linear(dim, dim, rng)
        self.wv = Linear(dim, dim, rng)
        self.wo = Linear(dim, dim, rng)

    def __call__(self, x):
        q = self.wq(x)
        k = self.wk(x)
        v = self.wv(x)
        scale = 1.0 / np.sqrt(self.head_dim)
        heads = []
        weights = []
        for h in range(self.num_heads):
            lo = h * self.head_dim
            qh = T.narrow(q, 1, lo, self.head_dim)
            kh = T.narrow(k, 1, lo, self.head_dim)
            vh = T.narrow(v, 1, lo, self.head_dim)
            alpha = T.softmax(T.matmul(qh, kh.T) * scale, axis=-1)
            weights.append(alpha.data.copy())
            heads.append(T.matmul(alpha, vh))
        out = self.wo(T.concat(heads, axis=1))
        return out, np.stack(weights)


class LSTMCell(Module):
    """Input/forget/output-gated memory cell; one step per call."""

    def __init__(self, in_dim, hidden_dim, rng):
        self.hidden_dim = hidden_dim
        self.w = Parameter(xavier_uniform(rng, in_dim + hidden_dim, 4 * hidden_dim))
        # Forget gate bias starts at 1 so early training keeps cell memory.
        b = np.zeros(4 * hidden_dim)
        b[hidden_dim:2 * hidden_dim] = 1.0
        self.b = Parameter(b)

    def initial_state(self):
        h = Tensor(np.zeros((1, self.hidden_dim)))
        c = Tensor(np.zeros((1, self.hidden_dim)))
        return h, c

    def __call__(self, x, state):
        h_prev, c_prev = state
        gates = T.matmul(T.concat([x, h_prev], axis=1), self.w.tensor) + self.b.tensor
        d = self.hidden_dim
        i = T.sigmoid(T.narrow(gates, 1, 0, d))
        f = T.sigmoid(T.narrow(gates, 1, d, d))
        g = T.tanh(T.narrow(gates, 1, 2 * d, d))
        o = T.sigmoid(T.narrow(gates, 1, 3 * d, d))
        c = f * c_prev + i * g
        h = o * T.tanh(c)
        return h, (h, c)
