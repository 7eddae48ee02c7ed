"""Waveform I/O and acoustic feature extraction.

Covers 16-bit PCM WAV files, magnitude STFT analysis, the 80-band
triangular mel filterbank with log compression, a flat binary container
for mel matrices, and iterative phase reconstruction back to audio.
"""

from __future__ import annotations

import struct
import wave
from dataclasses import dataclass

import numpy as np

SUPPORTED_SAMPLE_RATES = (22050, 16000)
MEL_FLOOR = 1e-5
LOG_MEL_FLOOR = float(np.log(MEL_FLOOR))

_MEL_MAGIC = b"MELB"
_MEL_VERSION = 1


@dataclass
class Waveform:
    samples: np.ndarray  # float64 in [-1, 1]
    sample_rate: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64).ravel()
        if self.sample_rate not in SUPPORTED_SAMPLE_RATES:
            raise ValueError(f"sample_rate must be one of {SUPPORTED_SAMPLE_RATES}, "
                             f"got {self.sample_rate}")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("waveform contains non-finite samples")

    @property
    def duration(self):
        return len(self.samples) / self.sample_rate


@dataclass
class FeatureConfig:
    sample_rate: int = 22050
    frame_length_ms: float = 50.0
    frame_shift_ms: float = 12.5
    num_mels: int = 80
    fmin: float = 0.0
    fmax: float | None = None  # defaults to Nyquist

    @property
    def win_samples(self):
        return int(round(self.frame_length_ms * self.sample_rate / 1000.0))

    @property
    def hop_samples(self):
        return int(round(self.frame_shift_ms * self.sample_rate / 1000.0))

    @property
    def n_fft(self):
        n = 1
        while n < self.win_samples:
            n *= 2
        return n


@dataclass
class MelSpectrogram:
    """Log-mel frames plus the analysis metadata downstream ops need."""

    frames: np.ndarray  # [T, num_mels]
    sample_rate: int
    hop_samples: int
    win_samples: int

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        if self.frames.ndim != 2:
            raise ValueError(f"mel frames must be [T, num_mels], got {self.frames.shape}")
        if not np.all(np.isfinite(self.frames)):
            raise ValueError("mel frames contain non-finite values")

    @property
    def num_frames(self):
        return self.frames.shape[0]

    @property
    def num_mels(self):
        return self.frames.shape[1]

    @property
    def frame_shift_ms(self):
        return self.hop_samples * 1000.0 / self.sample_rate

    @property
    def frame_length_ms(self):
        return self.win_samples * 1000.0 / self.sample_rate


# ---------------------------------------------------------------------------
# WAV files (mono 16-bit PCM RIFF)
# ---------------------------------------------------------------------------


def read_wav(path):
    with wave.open(str(path), "rb") as f:
        if f.getnchannels() != 1:
            raise ValueError(f"{path}: only mono WAV is supported")
        if f.getsampwidth() != 2:
            raise ValueError(f"{path}: only 16-bit PCM is supported")
        rate = f.getframerate()
        raw = f.readframes(f.getnframes())
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32767.0
    return Waveform(samples=np.clip(samples, -1.0, 1.0), sample_rate=rate)


def write_wav(path, wav: Waveform):
    pcm = np.clip(wav.samples, -1.0, 1.0)
    pcm = (pcm * 32767.0).round().astype("<i2")
    with wave.open(str(path), "wb") as f:
        f.setnchannels(1)
        f.setsampwidth(2)
        f.setframerate(wav.sample_rate)
        f.writeframes(pcm.tobytes())


# ---------------------------------------------------------------------------
# STFT / mel analysis
# ---------------------------------------------------------------------------


def _hann(n):
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def frame_count(num_samples, cfg: FeatureConfig):
    """1 + floor((N - frame_length) / hop); frames lie fully inside the signal."""
    if num_samples < cfg.win_samples:
        return 0
    return 1 + (num_samples - cfg.win_samples) // cfg.hop_samples


def stft(samples, cfg: FeatureConfig):
    """Complex spectra, [frames, n_fft // 2 + 1]."""
    samples = np.asarray(samples, dtype=np.float64)
    n = frame_count(len(samples), cfg)
    if n <= 0:
        raise ValueError(f"signal of {len(samples)} samples is shorter than one "
                         f"{cfg.win_samples}-sample analysis frame")
    win = _hann(cfg.win_samples)
    hop = cfg.hop_samples
    idx = np.arange(cfg.win_samples)[None, :] + hop * np.arange(n)[:, None]
    return np.fft.rfft(samples[idx] * win, n=cfg.n_fft, axis=1)


def istft(spectra, num_samples, cfg: FeatureConfig):
    """Overlap-add inverse with window-sum normalization."""
    win = _hann(cfg.win_samples)
    hop = cfg.hop_samples
    frames = np.fft.irfft(spectra, n=cfg.n_fft, axis=1)[:, : cfg.win_samples]
    out = np.zeros(num_samples)
    norm = np.zeros(num_samples)
    for i in range(frames.shape[0]):
        lo = i * hop
        hi = min(lo + cfg.win_samples, num_samples)
        out[lo:hi] += frames[i, : hi - lo] * win[: hi - lo]
        norm[lo:hi] += win[: hi - lo] ** 2
    return out / np.maximum(norm, 1e-10)


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (np.power(10.0, np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(cfg: FeatureConfig):
    """Triangular filters, [num_mels, n_fft // 2 + 1]; rows sum > 0."""
    fmax = cfg.fmax if cfg.fmax is not None else cfg.sample_rate / 2.0
    bins = cfg.n_fft // 2 + 1
    freqs = np.arange(bins) * cfg.sample_rate / cfg.n_fft
    mel_pts = np.linspace(hz_to_mel(cfg.fmin), hz_to_mel(fmax), cfg.num_mels + 2)
    hz_pts = mel_to_hz(mel_pts)
    fb = np.zeros((cfg.num_mels, bins))
    for m in range(cfg.num_mels):
        left, center, right = hz_pts[m], hz_pts[m + 1], hz_pts[m + 2]
        up = (freqs - left) / max(center - left, 1e-10)
        down = (right - freqs) / max(right - center, 1e-10)
        fb[m] = np.maximum(0.0, np.minimum(up, down))
    return fb


def filterbank_center_bands(cfg: FeatureConfig):
    """Center frequency (Hz) of each mel band, for band-identification checks."""
    fmax = cfg.fmax if cfg.fmax is not None else cfg.sample_rate / 2.0
    mel_pts = np.linspace(hz_to_mel(cfg.fmin), hz_to_mel(fmax), cfg.num_mels + 2)
    return mel_to_hz(mel_pts[1:-1])


def mel_spectrogram(wav: Waveform, cfg: FeatureConfig | None = None):
    """Magnitude STFT -> triangular mel filterbank -> floored natural log."""
    if cfg is None:
        cfg = FeatureConfig(sample_rate=wav.sample_rate)
    if cfg.sample_rate != wav.sample_rate:
        raise ValueError(f"config expects {cfg.sample_rate} Hz, waveform is "
                         f"{wav.sample_rate} Hz")
    if len(wav.samples) == 0:
        raise ValueError("cannot analyze an empty waveform")
    mag = np.abs(stft(wav.samples, cfg))
    mel = mag @ mel_filterbank(cfg).T
    frames = np.log(np.maximum(mel, MEL_FLOOR))
    return MelSpectrogram(frames=frames, sample_rate=cfg.sample_rate,
                          hop_samples=cfg.hop_samples, win_samples=cfg.win_samples)


# ---------------------------------------------------------------------------
# Mel binary container
# ---------------------------------------------------------------------------


def save_mel(path, mel: MelSpectrogram):
    header = struct.pack("<4sIIIIII", _MEL_MAGIC, _MEL_VERSION,
                         mel.num_frames, mel.num_mels, mel.sample_rate,
                         mel.hop_samples, mel.win_samples)
    with open(path, "wb") as f:
        f.write(header)
        f.write(np.ascontiguousarray(mel.frames).tobytes())


def load_mel(path):
    with open(path, "rb") as f:
        header = f.read(struct.calcsize("<4sIIIIII"))
        magic, version, t, m, rate, hop, win = struct.unpack("<4sIIIIII", header)
        if magic != _MEL_MAGIC:
            raise ValueError(f"{path}: not a mel file (bad magic {magic!r})")
        if version != _MEL_VERSION:
            raise ValueError(f"{path}: unsupported mel format version {version}")
        data = np.frombuffer(f.read(t * m * 8), dtype="<f8").reshape(t, m)
    return MelSpectrogram(frames=data.copy(), sample_rate=rate,
                          hop_samples=hop, win_samples=win)


# ---------------------------------------------------------------------------
# Phase reconstruction
# ---------------------------------------------------------------------------


def mel_to_linear(mel: MelSpectrogram, cfg: FeatureConfig):
    """Invert the filterbank by pseudo-inverse; clamps to non-negative."""
    fb = mel_filterbank(cfg)
    energies = np.exp(mel.frames)
    mag = energies @ np.linalg.pinv(fb).T
    return np.maximum(mag, 0.0)


def griffin_lim(mel: MelSpectrogram, iterations=50, return_convergence=False):
    """Classic alternating-projection phase recovery from a log-mel matrix.

    The objective - the relative magnitude mismatch between the target
    spectrogram and the running estimate's re-analysis - is non-increasing
    in the iteration count; pass return_convergence=True to also get the
    per-iteration values.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    cfg = FeatureConfig(sample_rate=mel.sample_rate,
                        frame_length_ms=mel.frame_length_ms,
                        frame_shift_ms=mel.frame_shift_ms,
                        num_mels=mel.num_mels)
    target = mel_to_linear(mel, cfg)
    target_norm = max(np.linalg.norm(target), 1e-12)
    num_samples = (mel.num_frames - 1) * cfg.hop_samples + cfg.win_samples
    spectra = target.astype(complex)  # zero initial phase
    convergence = []
    for _ in range(iterations):
        wav = istft(spectra, num_samples, cfg)
        reanalysis = stft(wav, cfg)
        convergence.append(np.linalg.norm(np.abs(reanalysis) - target) / target_norm)
        spectra = target * np.exp(1j * np.angle(reanalysis))
    wav = istft(spectra, num_samples, cfg)
    peak = np.max(np.abs(wav))
    if peak > 1.0:
        wav = wav / peak
    out = Waveform(samples=wav, sample_rate=mel.sample_rate)
    return (out, convergence) if return_convergence else out
