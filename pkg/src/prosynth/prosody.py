"""Per-phoneme prosody attributes and the statistics reported over them.

Three attributes per phoneme: relative energy (mean signal magnitude in
the phoneme over the utterance mean), duration in frames, and mean F0 of
the voiced frames. Correlation against ground truth uses the plain
product-moment coefficient; diversity is the average per-utterance
standard deviation.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .audio import Waveform

F0_MIN = 50.0
F0_MAX = 600.0


@dataclass
class PhonemeAlignment:
    """Ordered, non-overlapping (label, start_frame, end_frame) spans."""

    entries: list  # of (label, start, end), end exclusive

    def __post_init__(self):
        prev_end = 0
        for label, start, end in self.entries:
            if end <= start or start < 0:
                raise ValueError(f"bad span for {label!r}: [{start}, {end})")
            if start < prev_end:
                raise ValueError(f"overlapping/unordered span for {label!r} at {start}")
            prev_end = end

    @property
    def num_phonemes(self):
        return len(self.entries)

    @property
    def total_frames(self):
        return self.entries[-1][2] if self.entries else 0

    def durations(self):
        return [end - start for _, start, end in self.entries]


def load_alignment(path):
    """One line per phoneme: label<TAB>start_frame<TAB>end_frame."""
    entries = []
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ValueError(f"{path}:{line_no}: expected 3 tab-separated fields")
            entries.append((parts[0], int(parts[1]), int(parts[2])))
    return PhonemeAlignment(entries=entries)


def save_alignment(path, align: PhonemeAlignment):
    with open(path, "w", encoding="utf-8") as f:
        for label, start, end in align.entries:
            f.write(f"{label}\t{start}\t{end}\n")


@dataclass
class FrameGrid:
    """Frame-to-sample mapping used when slicing waveforms by frame index."""

    hop_samples: int
    win_samples: int

    @classmethod
    def from_mel(cls, mel):
        return cls(hop_samples=mel.hop_samples, win_samples=mel.win_samples)


@dataclass
class F0Track:
    f0: np.ndarray      # [T] Hz; undefined where unvoiced
    voiced: np.ndarray  # [T] bool

    @property
    def num_frames(self):
        return len(self.f0)


def estimate_f0(wav: Waveform, grid: FrameGrid, f0_min=F0_MIN, f0_max=F0_MAX,
                voicing_threshold=0.55, silence_rms=1e-4):
    """Normalized-autocorrelation pitch per frame with parabolic refinement.

    A frame is voiced when its best normalized correlation in the search
    band exceeds the threshold and the frame is not near-silent.
    """
    x = wav.samples
    sr = wav.sample_rate
    win = grid.win_samples
    hop = grid.hop_samples
    if len(x) < win:
        return F0Track(f0=np.zeros(0), voiced=np.zeros(0, dtype=bool))
    lag_min = max(2, int(np.floor(sr / f0_max)))
    lag_max = int(np.ceil(sr / f0_min))
    if lag_max >= win:
        raise ValueError(f"window of {win} samples too short for {f0_min} Hz search")

    num = 1 + (len(x) - win) // hop
    f0 = np.zeros(num)
    voiced = np.zeros(num, dtype=bool)
    for i in range(num):
        frame = x[i * hop: i * hop + win]
        frame = frame - frame.mean()
        if np.sqrt(np.mean(frame * frame)) < silence_rms:
            continue
        # r[tau] = sum x[t] x[t+tau] / sqrt(E0 * E_tau)
        corr = np.correlate(frame, frame, mode="full")[win - 1:]
        energy = np.cumsum(frame * frame)
        e0 = energy[-1]
        e_tau = e0 - np.concatenate(([0.0], energy[:-1]))
        denom = np.sqrt(np.maximum(e0 * e_tau, 1e-20))
        r = corr / denom
        band = r[lag_min: lag_max + 1]
        k = int(np.argmax(band)) + lag_min
        if r[k] < voicing_threshold:
            continue
        lag = _parabolic_peak(r, k)
        hz = sr / lag
        if f0_min <= hz <= f0_max:
            f0[i] = hz
            voiced[i] = True
    return F0Track(f0=f0, voiced=voiced)


def _parabolic_peak(r, k):
    if k <= 0 or k >= len(r) - 1:
        return float(k)
    denom = r[k - 1] - 2.0 * r[k] + r[k + 1]
    if abs(denom) < 1e-12:
        return float(k)
    return k + 0.5 * (r[k - 1] - r[k + 1]) / denom


@dataclass
class ProsodyAttributes:
    """Per-phoneme triples; f0 entries are None for unvoiced phonemes."""

    labels: list
    relative_energy: list
    duration_frames: list
    mean_f0: list  # floats or None

    def __len__(self):
        return len(self.labels)


def extract_prosody_attributes(wav: Waveform, align: PhonemeAlignment,
                               grid: FrameGrid, f0_track: F0Track | None = None):
    """Relative energy, frame duration, and mean voiced F0 per phoneme.

    Magnitudes are averaged over hop-aligned sample spans so that an
    alignment covering the whole utterance yields relative energy 1.0.
    """
    if not align.entries:
        raise ValueError("alignment has no phonemes")
    x = np.abs(wav.samples)
    hop = grid.hop_samples
    total_frames = align.total_frames
    limit = min(len(x), total_frames * hop)
    max_frame = (len(x) + hop - 1) // hop
    if total_frames > max_frame:
        raise ValueError(f"alignment spans {total_frames} frames but waveform only "
                         f"covers {max_frame}")
    utt_mean = x[:limit].mean()
    if f0_track is None:
        f0_track = estimate_f0(wav, grid)

    labels, energies, durations, f0s = [], [], [], []
    for label, start, end in align.entries:
        seg = x[start * hop: min(end * hop, limit)]
        if seg.size == 0:
            raise ValueError(f"phoneme {label!r} at [{start}, {end}) maps to no samples")
        labels.append(label)
        energies.append(float(seg.mean() / utt_mean) if utt_mean > 0 else 0.0)
        durations.append(end - start)
        v = [f0_track.f0[i] for i in range(start, min(end, f0_track.num_frames))
             if f0_track.voiced[i]]
        f0s.append(float(np.mean(v)) if v else None)
    return ProsodyAttributes(labels=labels, relative_energy=energies,
                             duration_frames=durations, mean_f0=f0s)


def pearson_correlation(x, y):
    """Product-moment correlation; raises on degenerate input."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1 or len(x) < 2:
        raise ValueError(f"need two equal-length sequences of >= 2 values, "
                         f"got {x.shape} and {y.shape}")
    xc = x - x.mean()
    yc = y - y.mean()
    denom = np.sqrt((xc * xc).sum() * (yc * yc).sum())
    if denom == 0.0:
        raise ValueError("correlation undefined: an input has zero variance")
    return float((xc * yc).sum() / denom)


def diversity_stddev(per_utterance_values):
    """Mean over utterances of the population standard deviation of each
    utterance's phoneme values. Utterances with < 2 values are skipped."""
    stds = []
    for i, values in enumerate(per_utterance_values):
        values = [v for v in values if v is not None]
        if len(values) < 2:
            warnings.warn(f"utterance {i} has < 2 values; skipped in diversity")
            continue
        stds.append(float(np.std(np.asarray(values, dtype=np.float64))))
    if not stds:
        raise ValueError("no utterance had >= 2 values")
    return float(np.mean(stds))
