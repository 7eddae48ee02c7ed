"""The complete acoustic model: text encoder, sentence-context module,
and attention-driven mel decoder glued together."""

from __future__ import annotations

import numpy as np

from .context import SentenceContextModule
from .decoder import DecoderConfig, MelDecoder
from .encoder import EncoderConfig, TextEncoder


class AcousticModel:
    """Symbol ids in, mel frames out, with a pluggable aggregation mode."""

    def __init__(self, enc_cfg: EncoderConfig, dec_cfg: DecoderConfig,
                 aggregation_mode="none", rng=None):
        if rng is None:
            rng = np.random.default_rng(0)
        self.enc_cfg = enc_cfg
        self.dec_cfg = dec_cfg
        self.aggregation_mode = aggregation_mode
        self.encoder = TextEncoder(enc_cfg, rng)
        self.context = SentenceContextModule(enc_cfg, aggregation_mode, rng)
        self.decoder = MelDecoder(dec_cfg, enc_cfg.model_dim, rng)

    # Module protocol, delegated to the three submodules.

    def named_parameters(self):
        yield from self.encoder.named_parameters("encoder")
        yield from self.context.named_parameters("context")
        yield from self.decoder.named_parameters("decoder")

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
        own = dict(self.named_parameters())
        missing = sorted(set(own) - set(state))
        extra = sorted(set(state) - set(own))
        if missing or extra:
            raise KeyError(f"state mismatch: missing={missing[:4]} extra={extra[:4]}")
        for name, p in own.items():
            arr = np.asarray(state[name], dtype=np.float64)
            if arr.shape != p.tensor.data.shape:
                raise ValueError(f"parameter {name}: checkpoint shape {arr.shape} != "
                                 f"model shape {p.tensor.data.shape}")
            p.tensor.data[...] = arr

    # Forward paths.

    def build_memory(self, ids):
        """Encode and fuse the sentence context into the decoder memory."""
        stack = self.encoder(ids)
        memory, ctx = self.context(stack)
        return memory, ctx

    def teacher_forced(self, ids, target):
        memory, ctx = self.build_memory(ids)
        pre, post, stops = self.decoder.teacher_forced(memory, target)
        return pre, post, stops, ctx

    def infer(self, ids):
        from . import tensor as T
        with T.no_grad():
            memory, ctx = self.build_memory(ids)
        mel, info = self.decoder.infer(memory)
        return mel, info, ctx
