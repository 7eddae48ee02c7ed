#!/usr/bin/env python3
# Encode a symbol sequence, tap every attention level, and compare the
# three sentence-context modes (none / direct / weighted).

import numpy as np

from prosynth.context import SentenceContextModule
from prosynth.encoder import EncoderConfig, TextEncoder

cfg = EncoderConfig(vocab_size=12, num_blocks=2, num_heads=4, model_dim=64,
                    ffn_inner_dim=128)
enc = TextEncoder(cfg, np.random.default_rng(0))

ids = [3, 1, 4, 1, 5, 9, 2, 6]
stack = enc(ids)
print(f"{len(ids)} symbols -> {stack.num_levels} levels "
      f"(prenet output + {cfg.num_blocks} blocks), each {stack.top.data.shape}")

for mode in ("none", "direct", "weighted"):
    module = SentenceContextModule(cfg, mode, np.random.default_rng(1))
    memory, ctx = module(stack)
    line = f"mode={mode:8s} memory={memory.data.shape}"
    if ctx.g is not None:
        line += f" sentence_vector_norm={np.linalg.norm(ctx.g.data):.3f}"
    print(line)

print("\nweighted aggregation keeps its per-head slot weights:")
module = SentenceContextModule(cfg, "weighted", np.random.default_rng(1))
_, ctx = module(stack)
w = ctx.attention_weights  # [heads, slots, slots]
print("weights tensor:", w.shape, "(heads x slots x slots)")
print("query-slot row of head 0 (one weight per level + duplicated top):")
print(np.round(w[0, -1], 3))
print("rows sum to", w[0, -1].sum())
