"""Sentence-context extraction and aggregation.

Each encoder level is summarized into one vector (convolution over the
sequence, then mean pooling). The per-level vectors are then combined
into a single sentence vector either by concatenation + projection
("direct") or by multi-head attention over the levels ("weighted"), and
finally broadcast back onto the encoder output the decoder attends to.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .encoder import EncoderConfig, EncoderStackOutput
from .layers import Conv1d, FeedForward, LayerNorm, Linear, Module
from .tensor import ShapeError, Tensor

AGGREGATION_MODES = ("none", "direct", "weighted")

# The top-level summary vector is fed twice into the weighted-aggregation
# attention: once as a memory slot and once as the query slot, giving
# num_levels + 1 slots (8 at the reference depth of 6 blocks).


@dataclass
class SentenceContext:
    """Aggregated sentence vector plus the per-level summaries behind it."""

    mode: str
    g: Tensor | None = None
    layer_contexts: list | None = None
    attention_weights: np.ndarray | None = None  # [heads, slots, slots], weighted mode only


class LayerContextExtractor(Module):
    """Conv1d over the sequence followed by mean pooling -> one vector."""

    def __init__(self, dim, rng, kernel_width=3):
        self.conv = Conv1d(dim, dim, kernel_width, rng)

    def __call__(self, h):
        if h.data.ndim != 2 or h.data.shape[0] < 1:
            raise ShapeError(f"context extraction needs a non-empty [T, d] input, got {h.data.shape}")
        return T.mean_pool(self.conv(h), axis=0)


class DirectAggregator(Module):
    """Concatenate the level summaries, project to d, add the top summary,
    normalize, then a feed-forward round with the same residual pattern."""

    def __init__(self, num_levels, cfg: EncoderConfig, rng):
        d = cfg.model_dim
        self.proj = Linear(num_levels * d, d, rng)
        self.ln_concat = LayerNorm(d)
        self.ffn = FeedForward(d, cfg.ffn_inner_dim, rng)
        self.ln_ffn = LayerNorm(d)

    def __call__(self, contexts):
        g_top = contexts[-1]
        stacked = T.concat([g.reshape(1, -1) for g in contexts], axis=1)
        c = self.ln_concat(self.proj(stacked) + g_top.reshape(1, -1))
        g = self.ln_ffn(self.ffn(c) + c)
        return g.reshape(-1), None


class WeightedAggregator(Module):
    """Multi-head attention over the level summaries.

    The memory holds every level summary plus a duplicate of the top one;
    the duplicate slot acts as the query whose attended output (residual-
    added and normalized) becomes the sentence vector. Full slot-by-slot
    weights are retained for inspection.
    """

    def __init__(self, num_levels, cfg: EncoderConfig, rng):
        d = cfg.model_dim
        if d % cfg.num_heads != 0:
            raise ShapeError(f"model_dim {d} not divisible by {cfg.num_heads} heads")
        self.num_heads = cfg.num_heads
        self.head_dim = d // cfg.num_heads
        self.num_slots = num_levels + 1
        self.wq = Linear(d, d, rng)
        self.wk = Linear(d, d, rng)
        self.wv = Linear(d, d, rng)
        self.wo = Linear(d, d, rng)
        self.ln_attn = LayerNorm(d)
        self.ffn = FeedForward(d, cfg.ffn_inner_dim, rng)
        self.ln_ffn = LayerNorm(d)

    def __call__(self, contexts):
        g_top = contexts[-1]
        memory = T.concat([g.reshape(1, -1) for g in contexts] + [g_top.reshape(1, -1)], axis=0)
        q = self.wq(memory)
        k = self.wk(memory)
        v = self.wv(memory)
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
        attended = self.wo(T.concat(heads, axis=1))
        # Only the duplicated-top slot's row feeds the sentence vector.
        query_row = T.narrow(attended, 0, self.num_slots - 1, 1)
        c = self.ln_attn(query_row + g_top.reshape(1, -1))
        g = self.ln_ffn(self.ffn(c) + c)
        return g.reshape(-1), np.stack(weights)


class ContextFusion(Module):
    """Broadcast the sentence vector onto every encoder frame and project
    the concatenation back to model width.

    The projection starts as a pass-through of the encoder half with a
    down-scaled context half, so an untrained sentence vector perturbs
    the decoder memory only mildly and blends in as training shapes it.
    """

    def __init__(self, dim, rng):
        self.proj = Linear(2 * dim, dim, rng)
        w = self.proj.w.tensor.data
        w[:dim] = np.eye(dim) + 0.02 * rng.standard_normal((dim, dim))
        w[dim:] *= 0.1

    def __call__(self, encoder_top, g):
        t = encoder_top.data.shape[0]
        if g.data.ndim != 1 or g.data.shape[0] != encoder_top.data.shape[1]:
            raise ShapeError(
                f"sentence vector shape {g.data.shape} does not match encoder width "
                f"{encoder_top.data.shape}")
        tiled = T.matmul(Tensor(np.ones((t, 1))), g.reshape(1, -1))
        return self.proj(T.concat([encoder_top, tiled], axis=1))


class SentenceContextModule(Module):
    """Extract per-level contexts, aggregate them, and fuse into the memory.

    mode "none" bypasses everything and passes the encoder output through
    untouched (the plain self-attention baseline).
    """

    def __init__(self, cfg: EncoderConfig, mode, rng):
        if mode not in AGGREGATION_MODES:
            raise ValueError(f"aggregation mode must be one of {AGGREGATION_MODES}, got {mode!r}")
        self.mode = mode
        num_levels = cfg.num_blocks + 1
        if mode == "none":
            return
        self.extractors = [LayerContextExtractor(cfg.model_dim, rng)
                           for _ in range(num_levels)]
        if mode == "direct":
            self.aggregator = DirectAggregator(num_levels, cfg, rng)
        else:
            self.aggregator = WeightedAggregator(num_levels, cfg, rng)
        self.fusion = ContextFusion(cfg.model_dim, rng)

    def extract_contexts(self, stack: EncoderStackOutput):
        if len(stack.layer_outputs) != len(self.extractors):
            raise ShapeError(
                f"encoder produced {len(stack.layer_outputs)} levels but "
                f"{len(self.extractors)} extractors are configured")
        return [ex(h) for ex, h in zip(self.extractors, stack.layer_outputs)]

    def __call__(self, stack: EncoderStackOutput):
        if self.mode == "none":
            return stack.top, SentenceContext(mode="none")
        contexts = self.extract_contexts(stack)
        g, weights = self.aggregator(contexts)
        memory = self.fusion(stack.top, g)
        return memory, SentenceContext(mode=self.mode, g=g,
                                       layer_contexts=contexts,
                                       attention_weights=weights)
