"""Feature extraction, file formats, and phase reconstruction."""

import numpy as np
import pytest

from prosynth.audio import (LOG_MEL_FLOOR, FeatureConfig, MelSpectrogram, Waveform,
                            filterbank_center_bands, frame_count, griffin_lim,
                            load_mel, mel_filterbank, mel_spectrogram, read_wav,
                            save_mel, write_wav)


def sine(freq, seconds=0.5, rate=22050, amp=0.6):
    t = np.arange(int(seconds * rate)) / rate
    return Waveform(samples=amp * np.sin(2 * np.pi * freq * t), sample_rate=rate)


def test_sample_rate_restriction():
    with pytest.raises(ValueError):
        Waveform(samples=np.zeros(10), sample_rate=44100)
    Waveform(samples=np.zeros(10), sample_rate=16000)  # allowed


def test_wav_roundtrip(tmp_path):
    wav = sine(440)
    path = tmp_path / "tone.wav"
    write_wav(path, wav)
    back = read_wav(path)
    assert back.sample_rate == 22050
    assert len(back.samples) == len(wav.samples)
    assert np.max(np.abs(back.samples - wav.samples)) < 1.0 / 32768


def test_silence_maps_to_log_floor():
    wav = Waveform(samples=np.zeros(22050), sample_rate=22050)
    mel = mel_spectrogram(wav)
    np.testing.assert_allclose(mel.frames, LOG_MEL_FLOOR, atol=1e-12)


def test_frame_count_formula():
    cfg = FeatureConfig()
    for n in (cfg.win_samples, 22050, 30011, cfg.win_samples + cfg.hop_samples - 1):
        wav = Waveform(samples=np.zeros(n), sample_rate=22050)
        mel = mel_spectrogram(wav, cfg)
        assert mel.num_frames == 1 + (n - cfg.win_samples) // cfg.hop_samples
        assert mel.num_frames == frame_count(n, cfg)


def test_too_short_waveform_rejected():
    cfg = FeatureConfig()
    wav = Waveform(samples=np.zeros(cfg.win_samples - 1), sample_rate=22050)
    with pytest.raises(ValueError):
        mel_spectrogram(wav, cfg)


def test_pure_tone_peaks_at_band_from_center_frequency_oracle():
    cfg = FeatureConfig()
    mel = mel_spectrogram(sine(440.0), cfg)
    argmax = np.argmax(mel.frames, axis=1)
    assert len(set(argmax.tolist())) == 1  # constant across frames
    centers = filterbank_center_bands(cfg)
    oracle_band = int(np.argmin(np.abs(centers - 440.0)))
    assert abs(int(argmax[0]) - oracle_band) <= 1


def test_mel_spectrogram_deterministic():
    wav = sine(220)
    a = mel_spectrogram(wav)
    b = mel_spectrogram(wav)
    assert a.frames.tobytes() == b.frames.tobytes()


def test_filterbank_rows_positive_and_overlapping():
    cfg = FeatureConfig()
    fb = mel_filterbank(cfg)
    assert fb.shape == (80, cfg.n_fft // 2 + 1)
    assert np.all(fb.sum(axis=1) > 0)
    assert np.all(fb >= 0)
    # interior frequencies are covered by at least one filter
    coverage = fb.sum(axis=0)
    lo = int(np.ceil(50 / (cfg.sample_rate / cfg.n_fft)))
    hi = int((cfg.sample_rate / 2 - 200) / (cfg.sample_rate / cfg.n_fft))
    assert np.all(coverage[lo:hi] > 0)


def test_mel_binary_roundtrip_bit_exact(tmp_path):
    mel = mel_spectrogram(sine(330))
    path = tmp_path / "m.mel"
    save_mel(path, mel)
    back = load_mel(path)
    assert back.frames.tobytes() == mel.frames.tobytes()
    assert (back.sample_rate, back.hop_samples, back.win_samples) == \
        (mel.sample_rate, mel.hop_samples, mel.win_samples)


def test_bad_mel_magic_rejected(tmp_path):
    path = tmp_path / "junk.mel"
    path.write_bytes(b"NOPE" + b"\x00" * 64)
    with pytest.raises(ValueError, match="magic"):
        load_mel(path)


def mel_error(mel: MelSpectrogram, wav: Waveform):
    re = mel_spectrogram(wav, FeatureConfig(sample_rate=mel.sample_rate))
    n = min(re.num_frames, mel.num_frames)
    return float(np.sqrt(np.mean((re.frames[:n] - mel.frames[:n]) ** 2)))


def test_griffin_lim_more_iterations_not_worse():
    mel = mel_spectrogram(sine(440, seconds=0.4))
    err1 = mel_error(mel, griffin_lim(mel, iterations=1))
    err50 = mel_error(mel, griffin_lim(mel, iterations=50))
    assert err50 <= err1


def test_griffin_lim_objective_monotone_non_increasing():
    mel = mel_spectrogram(sine(330, seconds=0.3))
    _, convergence = griffin_lim(mel, iterations=40, return_convergence=True)
    assert len(convergence) == 40
    for a, b in zip(convergence, convergence[1:]):
        assert b <= a + 1e-12


def test_griffin_lim_silence_stays_quiet():
    frames = np.full((40, 80), LOG_MEL_FLOOR)
    cfg = FeatureConfig()
    mel = MelSpectrogram(frames=frames, sample_rate=22050,
                         hop_samples=cfg.hop_samples, win_samples=cfg.win_samples)
    wav = griffin_lim(mel, iterations=5)
    assert np.sqrt(np.mean(wav.samples ** 2)) < 1e-3


def test_griffin_lim_recovers_tone_frequency():
    cfg = FeatureConfig()
    mel = mel_spectrogram(sine(440, seconds=0.5), cfg)
    wav = griffin_lim(mel, iterations=60)
    spectrum = np.abs(np.fft.rfft(wav.samples * np.hanning(len(wav.samples))))
    peak_hz = np.argmax(spectrum) * wav.sample_rate / len(wav.samples)
    bin_hz = cfg.sample_rate / cfg.n_fft
    assert abs(peak_hz - 440.0) <= bin_hz


def test_griffin_lim_rejects_zero_iterations():
    mel = mel_spectrogram(sine(440))
    with pytest.raises(ValueError):
        griffin_lim(mel, iterations=0)
