"""Monotonic encoder-decoder attention from a mixture of Gaussians.

Each decoder step predicts per-mixture weight, forward shift, and width
from the query; mixture means only ever move forward, which is what makes
the alignment monotonic. Position weights come from the mixture density
normalized over an integer grid, so they stay in [0, 1] and sum to at
most 1 even at the width floor (mass falling outside the sequence is
simply lost).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .layers import Linear, Module
from .tensor import ShapeError, Tensor

SIGMA_FLOOR = 1e-4
# Grid margin in standard deviations when normalizing the densities;
# truncated tail mass is below exp(-32).
_GRID_MARGIN_SIGMAS = 8.0


@dataclass
class GmmAttentionState:
    """Per-utterance alignment state (means advance monotonically)."""

    mu: Tensor  # [1, K]
    memory: Tensor  # [T, d]
    num_mixtures: int

    def to_arrays(self):
        return {"mu": self.mu.data.copy(), "memory": self.memory.data.copy()}

    @classmethod
    def from_arrays(cls, arrays):
        mu = np.asarray(arrays["mu"], dtype=np.float64)
        return cls(mu=Tensor(mu), memory=Tensor(arrays["memory"]),
                   num_mixtures=mu.shape[1])


def init_state(memory, num_mixtures):
    if num_mixtures < 1:
        raise ValueError(f"num_mixtures must be >= 1, got {num_mixtures}")
    if not isinstance(memory, Tensor):
        memory = Tensor(memory)
    if memory.data.ndim != 2 or memory.data.shape[0] < 1:
        raise ShapeError(f"attention memory must be a non-empty [T, d] matrix, "
                         f"got shape {memory.data.shape}")
    return GmmAttentionState(mu=Tensor(np.zeros((1, num_mixtures))),
                             memory=memory, num_mixtures=num_mixtures)


class GmmAttention(Module):
    """Query -> (mixture weights, shifts, widths) via a 2-layer MLP."""

    def __init__(self, query_dim, num_mixtures=5, hidden_dim=128, rng=None,
                 init_shift=0.35, init_width=2.0):
        if num_mixtures < 1:
            raise ValueError(f"num_mixtures must be >= 1, got {num_mixtures}")
        self.num_mixtures = num_mixtures
        self.hidden = Linear(query_dim, hidden_dim, rng)
        self.out = Linear(hidden_dim, 3 * num_mixtures, rng)
        # Bias the raw outputs so initial softplus values land at sensible
        # shift/width scales instead of depending on random projections.
        b = self.out.b.tensor.data
        b[num_mixtures:2 * num_mixtures] = _softplus_inverse(init_shift)
        b[2 * num_mixtures:] = _softplus_inverse(init_width)

    def init_state(self, memory):
        return init_state(memory, self.num_mixtures)

    def __call__(self, state: GmmAttentionState, query):
        """One alignment step.

        query: [1, query_dim] -> (context [1, d], weights [T], new state).
        """
        k = self.num_mixtures
        raw = self.out(T.tanh(self.hidden(query)))  # [1, 3K]
        w_raw = T.narrow(raw, 1, 0, k)
        shift_raw = T.narrow(raw, 1, k, k)
        width_raw = T.narrow(raw, 1, 2 * k, k)

        mix_w = T.softmax(w_raw, axis=-1)                      # [1, K]
        mu = state.mu + T.softplus(shift_raw)                  # [1, K]
        sigma = T.softplus(width_raw) + SIGMA_FLOOR            # [1, K]

        length = state.memory.data.shape[0]
        lo, hi = _grid_bounds(mu.data, sigma.data, length)
        grid = Tensor(np.arange(lo, hi + 1, dtype=np.float64)[None, :])  # [1, G]

        # Per mixture, a normalized density over the integer grid:
        # softmax of -(j - mu)^2 / (2 sigma^2) along the grid axis.
        diff = grid - mu.T                                      # [K, G]
        scores = -(diff * diff) / (2.0 * (sigma * sigma).T)
        density = T.softmax(scores, axis=-1)
        in_seq = T.narrow(density, 1, -lo, length)              # [K, T]

        weights = T.matmul(mix_w, in_seq)                       # [1, T]
        context = T.matmul(weights, state.memory)               # [1, d]
        new_state = GmmAttentionState(mu=mu, memory=state.memory,
                                      num_mixtures=k)
        return context, weights, new_state


def _grid_bounds(mu, sigma, length):
    margin = _GRID_MARGIN_SIGMAS * float(sigma.max()) + 2.0
    lo = min(0, int(np.floor(mu.min() - margin)))
    hi = max(length - 1, int(np.ceil(mu.max() + margin)))
    return lo, hi


def _softplus_inverse(y):
    return float(np.log(np.expm1(y)))
