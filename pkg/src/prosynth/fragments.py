"""Small deterministic model fragments for gradient verification.

One fragment per parameterized subsystem; each returns (name, loss_fn,
params) where loss_fn rebuilds the graph on every call.
"""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .attention import GmmAttention
from .context import DirectAggregator, LayerContextExtractor, WeightedAggregator
from .decoder import DecoderConfig, MelDecoder
from .encoder import EncoderConfig, SelfAttentionBlock
from .layers import Linear
from .tensor import Tensor


def _toy_encoder_cfg(rng_unused=None):
    return EncoderConfig(vocab_size=7, num_blocks=2, num_heads=2,
                         model_dim=8, ffn_inner_dim=16)


def linear_fragment(seed=0):
    rng = np.random.default_rng(seed)
    layer = Linear(6, 4, rng)
    x = Tensor(rng.normal(size=(3, 6)))
    def loss_fn():
        return T.tanh(layer(x)).mean()
    return "linear", loss_fn, layer.parameters()


def encoder_block_fragment(seed=0):
    rng = np.random.default_rng(seed)
    block = SelfAttentionBlock(_toy_encoder_cfg(), rng)
    x = Tensor(rng.normal(size=(5, 8)))
    def loss_fn():
        h, _ = block(x)
        return (h * h).mean()
    return "encoder_block", loss_fn, block.parameters()


def direct_aggregation_fragment(seed=0):
    rng = np.random.default_rng(seed)
    cfg = _toy_encoder_cfg()
    extractors = [LayerContextExtractor(cfg.model_dim, rng) for _ in range(3)]
    agg = DirectAggregator(3, cfg, rng)
    levels = [Tensor(rng.normal(size=(4, 8))) for _ in range(3)]
    params = [p for ex in extractors for p in ex.parameters()] + agg.parameters()
    def loss_fn():
        contexts = [ex(h) for ex, h in zip(extractors, levels)]
        g, _ = agg(contexts)
        return (g * g).mean()
    return "direct_aggregation", loss_fn, params


def weighted_aggregation_fragment(seed=0):
    rng = np.random.default_rng(seed)
    cfg = _toy_encoder_cfg()
    extractors = [LayerContextExtractor(cfg.model_dim, rng) for _ in range(3)]
    agg = WeightedAggregator(3, cfg, rng)
    levels = [Tensor(rng.normal(size=(4, 8))) for _ in range(3)]
    params = [p for ex in extractors for p in ex.parameters()] + agg.parameters()
    def loss_fn():
        contexts = [ex(h) for ex, h in zip(extractors, levels)]
        g, _ = agg(contexts)
        return (g * g).mean()
    return "weighted_aggregation", loss_fn, params


def gmm_attention_fragment(seed=0):
    rng = np.random.default_rng(seed)
    attn = GmmAttention(query_dim=6, num_mixtures=3, hidden_dim=8, rng=rng)
    memory = Tensor(rng.normal(size=(5, 4)))
    queries = [Tensor(rng.normal(size=(1, 6))) for _ in range(3)]
    def loss_fn():
        state = attn.init_state(memory)
        total = None
        for q in queries:  # roll a few steps so mu-chain gradients are exercised
            ctx, _, state = attn(state, q)
            term = (ctx * ctx).mean()
            total = term if total is None else total + term
        return total
    return "gmm_attention", loss_fn, attn.parameters()


def decoder_step_fragment(seed=0):
    rng = np.random.default_rng(seed)
    cfg = DecoderConfig(num_mels=80, prenet_dims=(8, 8), recurrent_dims=(12, 12),
                        reduction_factor=2, postnet_layers=3, postnet_channels=8,
                        max_steps=8)
    dec = MelDecoder(cfg, memory_dim=8, rng=rng)
    # Jitter the zero-initialized biases: the go frame is exactly zero in
    # the decoder's normalized space, and a ReLU preactivation sitting
    # exactly on its kink turns the subgradient choice into a spurious
    # finite-difference mismatch.
    for name, p in dec.named_parameters():
        if p.tensor.data.ndim == 1:
            p.tensor.data += rng.normal(0.0, 0.02, size=p.tensor.data.shape)
    memory = Tensor(rng.normal(size=(4, 8)))
    # realistic log-mel range so normalized inputs span (0, 1)
    target = rng.uniform(float(np.log(1e-5)), 0.0, size=(5, 80))
    def loss_fn():
        pre, post, stops, = dec.teacher_forced(memory, target)
        tt = Tensor(target)
        return (((pre - tt) * (pre - tt)).mean()
                + ((post - tt) * (post - tt)).mean()
                + T.sigmoid(stops).mean())
    return "decoder_step", loss_fn, dec.parameters()


def standard_fragments(seed=0):
    """The fragments the acceptance suite verifies, in check order."""
    return [
        encoder_block_fragment(seed),
        direct_aggregation_fragment(seed),
        weighted_aggregation_fragment(seed),
        gmm_attention_fragment(seed),
        decoder_step_fragment(seed),
    ]
