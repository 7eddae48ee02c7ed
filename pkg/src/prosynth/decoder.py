"""Autoregressive mel decoder: bottleneck prenet, two gated recurrent
layers around monotonic attention, frame/stop projections, and a
convolutional postnet refining the raw frames."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .attention import GmmAttention
from .layers import Conv1d, LSTMCell, Linear, Module
from .tensor import ShapeError, Tensor

# log of the mel-energy floor; silence frames sit at this value, so it is
# also the natural "previous frame" before the first decoder step.
LOG_MEL_FLOOR = float(np.log(1e-5))


@dataclass
class DecoderConfig:
    num_mels: int = 80
    prenet_dims: tuple = (256, 256)
    recurrent_dims: tuple = (1024, 1024)
    reduction_factor: int = 2
    postnet_layers: int = 5
    postnet_channels: int = 512
    postnet_kernel: int = 5
    stop_threshold: float = 0.5
    max_steps: int = 1000
    num_mixtures: int = 5
    attention_hidden: int = 128
    attention_init_shift: float = 0.35
    prenet_dropout: float = 0.0
    # The decoder computes in (mel - offset) / scale space; silence maps
    # to 0 and typical peaks to ~1, which keeps the recurrent inputs and
    # frame projections well-conditioned. I/O stays in raw log-mel space.
    mel_offset: float = LOG_MEL_FLOOR
    mel_scale: float = -LOG_MEL_FLOOR
    go_value: float = LOG_MEL_FLOOR

    def __post_init__(self):
        if self.num_mels < 1:
            raise ValueError("num_mels must be >= 1")
        if not 0.0 < self.stop_threshold < 1.0:
            raise ValueError(f"stop_threshold must lie in (0, 1), got {self.stop_threshold}")
        if self.reduction_factor < 1:
            raise ValueError("reduction_factor must be >= 1")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if self.mel_scale <= 0:
            raise ValueError("mel_scale must be positive")


@dataclass
class InferenceInfo:
    """Bookkeeping from one autoregressive rollout."""

    num_steps: int
    stopped_early: bool
    mu_trace: list = field(default_factory=list)      # per step, [K] means
    weight_trace: list = field(default_factory=list)  # per step, [T] weights


class Postnet(Module):
    """Conv stack whose output is added to the raw frames as a residual."""

    def __init__(self, cfg: DecoderConfig, rng):
        dims = ([cfg.num_mels] + [cfg.postnet_channels] * (cfg.postnet_layers - 1)
                + [cfg.num_mels])
        self.convs = [Conv1d(dims[i], dims[i + 1], cfg.postnet_kernel, rng)
                      for i in range(cfg.postnet_layers)]

    def __call__(self, x):
        for conv in self.convs[:-1]:
            x = T.tanh(conv(x))
        return self.convs[-1](x)


class MelDecoder(Module):
    def __init__(self, cfg: DecoderConfig, memory_dim, rng):
        self.cfg = cfg
        p1, p2 = cfg.prenet_dims
        r1, r2 = cfg.recurrent_dims
        self.prenet1 = Linear(cfg.num_mels, p1, rng)
        self.prenet2 = Linear(p1, p2, rng)
        self.attn_lstm = LSTMCell(p2 + memory_dim, r1, rng)
        self.attention = GmmAttention(r1, cfg.num_mixtures, cfg.attention_hidden, rng,
                                      init_shift=cfg.attention_init_shift)
        self.dec_lstm = LSTMCell(r1 + memory_dim, r2, rng)
        self.frame_proj = Linear(r2 + memory_dim, cfg.num_mels * cfg.reduction_factor, rng)
        self.stop_proj = Linear(r2 + memory_dim, 1, rng)
        self.postnet = Postnet(cfg, rng)
        self.memory_dim = memory_dim
        self._dropout_rng = np.random.default_rng(0)

    def _normalize(self, frames):
        return (np.asarray(frames, dtype=np.float64) - self.cfg.mel_offset) / self.cfg.mel_scale

    def _denormalize(self, t):
        return t * self.cfg.mel_scale + self.cfg.mel_offset

    def _prenet(self, frame):
        x = T.relu(self.prenet1(frame))
        x = T.dropout(x, self.cfg.prenet_dropout, self._dropout_rng,
                      training=self.cfg.prenet_dropout > 0.0)
        x = T.relu(self.prenet2(x))
        return T.dropout(x, self.cfg.prenet_dropout, self._dropout_rng,
                         training=self.cfg.prenet_dropout > 0.0)

    def _step(self, prev_frame, ctx, attn_state, s1, s2):
        x = self._prenet(prev_frame)
        h1, s1 = self.attn_lstm(T.concat([x, ctx], axis=1), s1)
        ctx, weights, attn_state = self.attention(attn_state, h1)
        h2, s2 = self.dec_lstm(T.concat([h1, ctx], axis=1), s2)
        proj_in = T.concat([h2, ctx], axis=1)
        frames = self.frame_proj(proj_in)        # [1, r * num_mels]
        stop_logit = self.stop_proj(proj_in)     # [1, 1]
        return frames, stop_logit, ctx, weights, attn_state, s1, s2

    def _initial(self, memory):
        if memory.data.ndim != 2 or memory.data.shape[0] < 1:
            raise ShapeError(f"decoder memory must be non-empty [T, d], got {memory.data.shape}")
        if memory.data.shape[1] != self.memory_dim:
            raise ShapeError(f"decoder built for memory width {self.memory_dim}, "
                             f"got {memory.data.shape}")
        ctx = Tensor(np.zeros((1, self.memory_dim)))
        attn_state = self.attention.init_state(memory)
        return ctx, attn_state, self.attn_lstm.initial_state(), self.dec_lstm.initial_state()

    def teacher_forced(self, memory, target):
        """Run one decoder step per reduction-factor group of target frames,
        feeding ground truth. Returns (pre_mel, post_mel, stop_logits) with
        pre/post aligned to the target length."""
        target = np.asarray(target, dtype=np.float64)
        if target.ndim != 2 or target.shape[0] < 1:
            raise ShapeError(f"teacher forcing needs a non-empty [T, num_mels] target, "
                             f"got {target.shape}")
        if target.shape[1] != self.cfg.num_mels:
            raise ShapeError(f"target has {target.shape[1]} mel bands, decoder expects "
                             f"{self.cfg.num_mels}")
        r = self.cfg.reduction_factor
        t = target.shape[0]
        num_steps = math.ceil(t / r)
        norm_target = self._normalize(target)

        ctx, attn_state, s1, s2 = self._initial(memory)
        prev = Tensor(self._normalize(np.full((1, self.cfg.num_mels), self.cfg.go_value)))
        frame_groups = []
        stop_logits = []
        for i in range(num_steps):
            frames, stop_logit, ctx, _, attn_state, s1, s2 = self._step(
                prev, ctx, attn_state, s1, s2)
            frame_groups.append(frames.reshape(r, self.cfg.num_mels))
            stop_logits.append(stop_logit)
            last = min((i + 1) * r, t) - 1  # ground-truth frame fed to the next step
            prev = Tensor(norm_target[last:last + 1])

        pre = T.concat(frame_groups, axis=0)
        if pre.data.shape[0] > t:
            pre = T.narrow(pre, 0, 0, t)
        post = pre + self.postnet(pre)
        stops = T.concat(stop_logits, axis=0).reshape(num_steps)
        return self._denormalize(pre), self._denormalize(post), stops

    def infer(self, memory):
        """Autoregressive rollout; halts on the stop head or at max_steps.

        Returns (post_mel ndarray [T, num_mels], InferenceInfo).
        """
        cfg = self.cfg
        with T.no_grad():
            ctx, attn_state, s1, s2 = self._initial(memory)
            prev = Tensor(self._normalize(np.full((1, cfg.num_mels), cfg.go_value)))
            groups = []
            info = InferenceInfo(num_steps=0, stopped_early=False)
            for _ in range(cfg.max_steps):
                frames, stop_logit, ctx, weights, attn_state, s1, s2 = self._step(
                    prev, ctx, attn_state, s1, s2)
                group = frames.data.reshape(cfg.reduction_factor, cfg.num_mels)
                groups.append(group)
                info.num_steps += 1
                info.mu_trace.append(attn_state.mu.data.ravel().copy())
                info.weight_trace.append(weights.data.ravel().copy())
                stop_prob = 1.0 / (1.0 + np.exp(-stop_logit.item()))
                if stop_prob > cfg.stop_threshold:
                    info.stopped_early = True
                    break
                prev = Tensor(group[-1:])
            pre = Tensor(np.concatenate(groups, axis=0))
            post = self._denormalize(pre + self.postnet(pre))
        return post.data.copy(), info
