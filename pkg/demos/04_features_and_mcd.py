#!/usr/bin/env python3
# Waveform -> log-mel -> cepstra -> distortion, and back to audio through
# iterative phase reconstruction.

import numpy as np

from prosynth.audio import FeatureConfig, Waveform, griffin_lim, mel_spectrogram
from prosynth.metrics import mcd, mel_cepstrum

rate = 22050
t = np.arange(int(0.5 * rate)) / rate
tone = Waveform(samples=0.5 * np.sin(2 * np.pi * 440.0 * t), sample_rate=rate)

cfg = FeatureConfig()
mel = mel_spectrogram(tone, cfg)
print(f"440 Hz tone -> {mel.num_frames} frames x {mel.num_mels} bands "
      f"(win {cfg.win_samples} / hop {cfg.hop_samples} samples)")
print("strongest band per frame:", np.unique(np.argmax(mel.frames, axis=1)))

print("\n== mel-cepstral distortion ==")
cep = mel_cepstrum(mel)
print("identical sequences:", mcd(cep, cep), "dB")
detuned = mel_spectrogram(
    Waveform(samples=0.5 * np.sin(2 * np.pi * 392.0 * t), sample_rate=rate), cfg)
print("440 Hz vs 392 Hz:", round(mcd(cep, mel_cepstrum(detuned)), 2), "dB")

print("\n== phase reconstruction ==")
for iters in (1, 5, 50):
    wav = griffin_lim(mel, iterations=iters)
    re = mel_spectrogram(wav, cfg)
    n = min(re.num_frames, mel.num_frames)
    err = np.sqrt(np.mean((re.frames[:n] - mel.frames[:n]) ** 2))
    print(f"{iters:3d} iterations: mel re-analysis rmse {err:.4f}")
