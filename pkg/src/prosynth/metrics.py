"""Objective distance between mel sequences: cepstral analysis and
time-warped mel-cepstral distortion."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.fft import dct

from .audio import MelSpectrogram

# dB conversion constant for cepstral distortion.
MCD_COEF = (10.0 / np.log(10.0)) * np.sqrt(2.0)


@dataclass
class MelCepstrum:
    coeffs: np.ndarray  # [T, C]
    includes_c0: bool = True

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=np.float64)
        if self.coeffs.ndim != 2 or self.coeffs.shape[1] < 2:
            raise ValueError(f"cepstra must be [T, C>=2], got {self.coeffs.shape}")

    @property
    def num_frames(self):
        return self.coeffs.shape[0]

    def distortion_coeffs(self):
        """Coefficients entering the distance; c0 (overall energy) is dropped."""
        return self.coeffs[:, 1:] if self.includes_c0 else self.coeffs


def mel_cepstrum(mel, num_coeffs=13):
    """Orthonormal DCT-II over the mel axis of log energies, first C coeffs."""
    frames = mel.frames if isinstance(mel, MelSpectrogram) else np.asarray(mel, dtype=np.float64)
    if frames.ndim != 2 or frames.shape[0] < 1:
        raise ValueError(f"need a non-empty [T, num_mels] log-mel matrix, got {frames.shape}")
    if num_coeffs > frames.shape[1]:
        raise ValueError(f"requested {num_coeffs} coefficients from {frames.shape[1]} bands")
    full = dct(frames, type=2, norm="ortho", axis=1)
    return MelCepstrum(coeffs=full[:, :num_coeffs], includes_c0=True)


def dtw_path(ref, hyp):
    """Minimum-total-cost monotone alignment under Euclidean frame distance.

    Steps are (1,0), (0,1), (1,1); ties prefer the diagonal. Returns
    (path as list of (i, j), total cost along it).
    """
    ref = np.asarray(ref, dtype=np.float64)
    hyp = np.asarray(hyp, dtype=np.float64)
    if ref.ndim != 2 or hyp.ndim != 2 or ref.shape[1] != hyp.shape[1]:
        raise ValueError(f"incompatible sequences: {ref.shape} vs {hyp.shape}")
    n, m = ref.shape[0], hyp.shape[0]
    if n == 0 or m == 0:
        raise ValueError("cannot align an empty sequence")

    # Direct differences keep dist(a, a) exactly zero (the Gram-matrix
    # shortcut does not, and identical inputs must score 0).
    diff = ref[:, None, :] - hyp[None, :, :]
    dist = np.sqrt((diff * diff).sum(axis=2))

    acc = np.full((n, m), np.inf)
    move = np.zeros((n, m), dtype=np.int8)  # 0 diag, 1 up (i-1), 2 left (j-1)
    acc[0, 0] = dist[0, 0]
    for i in range(1, n):
        acc[i, 0] = acc[i - 1, 0] + dist[i, 0]
        move[i, 0] = 1
    for j in range(1, m):
        acc[0, j] = acc[0, j - 1] + dist[0, j]
        move[0, j] = 2
    for i in range(1, n):
        row = acc[i - 1]
        for j in range(1, m):
            diag = row[j - 1]
            up = row[j]
            left = acc[i, j - 1]
            best = diag
            k = 0
            if up < best:
                best, k = up, 1
            if left < best:
                best, k = left, 2
            acc[i, j] = best + dist[i, j]
            move[i, j] = k

    path = []
    i, j = n - 1, m - 1
    while True:
        path.append((i, j))
        if i == 0 and j == 0:
            break
        k = move[i, j]
        if k == 0:
            i, j = i - 1, j - 1
        elif k == 1:
            i -= 1
        else:
            j -= 1
    path.reverse()
    return path, float(acc[n - 1, m - 1])


def mcd(ref: MelCepstrum, hyp: MelCepstrum):
    """Mel-cepstral distortion in dB under the DTW alignment above: the
    mean Euclidean distance over aligned pairs times (10/ln10) * sqrt(2)."""
    a = ref.distortion_coeffs()
    b = hyp.distortion_coeffs()
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"coefficient counts differ: {a.shape[1]} vs {b.shape[1]}")
    path, total = dtw_path(a, b)
    return MCD_COEF * total / len(path)
