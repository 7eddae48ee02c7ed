"""Text-side front end: embedding, convolutional prenet, self-attention stack.

The encoder keeps every intermediate block output so the sentence-context
extractor can tap all levels, not just the top.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .layers import Conv1d, Embedding, FeedForward, LayerNorm, Module, MultiHeadSelfAttention
from .tensor import ShapeError, Tensor


@dataclass
class EncoderConfig:
    vocab_size: int
    num_blocks: int = 6
    num_heads: int = 8
    model_dim: int = 512
    ffn_inner_dim: int = 2048
    prenet_layers: int = 3
    prenet_kernel: int = 5
    dropout: float = 0.0

    def __post_init__(self):
        if self.vocab_size < 1:
            raise ValueError("vocab_size must be >= 1")
        if self.num_blocks < 0:
            raise ValueError("num_blocks must be >= 0")
        if self.model_dim % self.num_heads != 0:
            raise ShapeError(
                f"model_dim {self.model_dim} not divisible by num_heads {self.num_heads}")


@dataclass
class EncoderStackOutput:
    """All block outputs; index 0 is the prenet output feeding block 1."""

    layer_outputs: list = field(default_factory=list)

    @property
    def top(self):
        return self.layer_outputs[-1]

    @property
    def num_levels(self):
        return len(self.layer_outputs)


def sinusoidal_positions(length, dim):
    """Classic sin/cos position table, [length, dim]."""
    pos = np.arange(length)[:, None]
    i = np.arange((dim + 1) // 2)[None, :]
    angle = pos / np.power(10000.0, 2.0 * i / dim)
    table = np.zeros((length, dim))
    table[:, 0::2] = np.sin(angle)
    table[:, 1::2] = np.cos(angle[:, : dim // 2])
    return table


class SelfAttentionBlock(Module):
    """One encoder block: attention and FFN sub-networks, each wrapped in
    a residual connection and layer normalization."""

    def __init__(self, cfg: EncoderConfig, rng):
        self.attn = MultiHeadSelfAttention(cfg.model_dim, cfg.num_heads, rng)
        self.ln_attn = LayerNorm(cfg.model_dim)
        self.ffn = FeedForward(cfg.model_dim, cfg.ffn_inner_dim, rng)
        self.ln_ffn = LayerNorm(cfg.model_dim)

    def __call__(self, h_prev):
        attn_out, weights = self.attn(h_prev)
        c = self.ln_attn(attn_out + h_prev)
        h = self.ln_ffn(self.ffn(c) + c)
        return h, weights


class TextEncoder(Module):
    """Symbol ids -> per-position representations at every block level."""

    def __init__(self, cfg: EncoderConfig, rng):
        self.cfg = cfg
        self.embedding = Embedding(cfg.vocab_size, cfg.model_dim, rng)
        self.prenet_convs = [
            Conv1d(cfg.model_dim, cfg.model_dim, cfg.prenet_kernel, rng)
            for _ in range(cfg.prenet_layers)
        ]
        self.prenet_norms = [LayerNorm(cfg.model_dim) for _ in range(cfg.prenet_layers)]
        self.blocks = [SelfAttentionBlock(cfg, rng) for _ in range(cfg.num_blocks)]

    def embed_and_prenet(self, ids):
        """Embedding, 3-layer convolutional prenet, then positional encoding."""
        ids = np.asarray(ids, dtype=np.int64)
        if ids.size == 0:
            raise ShapeError("encoder input is empty")
        x = self.embedding(ids)
        for conv, norm in zip(self.prenet_convs, self.prenet_norms):
            x = T.relu(norm(conv(x)))
        pos = Tensor(sinusoidal_positions(ids.size, self.cfg.model_dim))
        return x + pos

    def __call__(self, ids):
        h = self.embed_and_prenet(ids)
        outputs = [h]
        for block in self.blocks:
            h, _ = block(h)
            outputs.append(h)
        return EncoderStackOutput(layer_outputs=outputs)

    encode = __call__
