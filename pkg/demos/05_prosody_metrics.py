#!/usr/bin/env python3
# Per-phoneme prosody attributes (relative energy, duration, mean F0) and
# the correlation / diversity statistics computed over them.

import numpy as np

from prosynth.audio import Waveform
from prosynth.prosody import (FrameGrid, PhonemeAlignment, diversity_stddev,
                              estimate_f0, extract_prosody_attributes,
                              pearson_correlation)

rate = 22050
grid = FrameGrid(hop_samples=276, win_samples=1102)

# A little three-"phoneme" utterance: quiet 150 Hz, loud 250 Hz, quiet noise.
rng = np.random.default_rng(0)
t1 = np.arange(int(0.35 * rate)) / rate
t2 = np.arange(int(0.25 * rate)) / rate
seg1 = 0.25 * np.sin(2 * np.pi * 150.0 * t1)
seg2 = 0.70 * np.sin(2 * np.pi * 250.0 * t2)
seg3 = 0.15 * rng.uniform(-1, 1, size=int(0.30 * rate))
wav = Waveform(samples=np.concatenate([seg1, seg2, seg3]), sample_rate=rate)

f1 = len(seg1) // grid.hop_samples
f2 = f1 + len(seg2) // grid.hop_samples
f3 = (len(wav.samples)) // grid.hop_samples
align = PhonemeAlignment(entries=[("lo", 0, f1), ("hi", f1, f2), ("uv", f2, f3)])

attrs = extract_prosody_attributes(wav, align, grid)
print("label  rel_energy  frames  mean_f0")
for label, e, d, f0 in zip(attrs.labels, attrs.relative_energy,
                           attrs.duration_frames, attrs.mean_f0):
    f0s = f"{f0:7.1f}" if f0 is not None else "   (uv)"
    print(f"{label:5s}  {e:10.3f}  {d:6d}  {f0s}")

track = estimate_f0(wav, grid)
print(f"\nvoiced frames: {int(track.voiced.sum())} of {track.num_frames}")

print("\n== statistics over a fake 4-utterance evaluation ==")
truth = [rng.uniform(0.5, 2.0, size=8) for _ in range(4)]
system = [t + rng.normal(0, 0.15, size=8) for t in truth]
pooled_t = np.concatenate(truth)
pooled_s = np.concatenate(system)
print("pooled energy correlation:", round(pearson_correlation(pooled_t, pooled_s), 3))
print("diversity (ground truth):", round(diversity_stddev(truth), 3))
print("diversity (system):      ", round(diversity_stddev(system), 3))
