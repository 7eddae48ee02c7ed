#!/usr/bin/env python3
# Roll the mixture-of-Gaussians attention over a memory and watch the
# means march forward while position weights sweep the sequence.

import numpy as np

from prosynth.attention import GmmAttention
from prosynth.tensor import Tensor

rng = np.random.default_rng(3)
attn = GmmAttention(query_dim=16, num_mixtures=3, hidden_dim=32, rng=rng)

memory = Tensor(rng.normal(size=(12, 8)))
state = attn.init_state(memory)
print("initial means:", state.mu.data.ravel())

for step in range(8):
    query = Tensor(rng.normal(size=(1, 16)))
    context, weights, state = attn(state, query)
    w = weights.data.ravel()
    bar = "".join("#" if v > 0.15 else ("+" if v > 0.05 else ".") for v in w)
    print(f"step {step}: weights |{bar}| sum={w.sum():.3f} "
          f"means={np.round(state.mu.data.ravel(), 2)}")

print("\nmeans never move backwards: the shift is passed through softplus,")
print("so every decoder step advances each mixture by a non-negative amount.")
