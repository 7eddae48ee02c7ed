"""Checkpoint evaluation: synthesize the manifest's utterances and score
them against the references (mel-cepstral distortion, per-phoneme prosody
correlation, prosody diversity), writing one TSV table per metric."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .audio import MelSpectrogram, griffin_lim
from .checkpoint import load_model
from .corpus import CorpusManifest
from .metrics import mcd, mel_cepstrum
from .prosody import (FrameGrid, PhonemeAlignment, diversity_stddev,
                      extract_prosody_attributes, pearson_correlation)

METRIC_NAMES = ("mcd", "prosody_corr", "diversity")
SYSTEM_LABELS = {"none": "SA", "direct": "SA-DA", "weighted": "SA-WA"}
ATTRIBUTE_ROWS = ("E", "Dur.", "F0")


@dataclass
class EvalReport:
    system: str
    mcd_mean: float | None = None
    mcd_per_utterance: dict = field(default_factory=dict)
    correlations: dict = field(default_factory=dict)   # attribute -> float or None
    diversity: dict = field(default_factory=dict)      # attribute -> (system, ground truth)
    table_paths: dict = field(default_factory=dict)


def _clamp_alignment(align: PhonemeAlignment, max_frames):
    """Clip spans to the frames a (possibly shorter) synthesis covers."""
    entries = []
    for label, start, end in align.entries:
        if start >= max_frames:
            break
        entries.append((label, start, min(end, max_frames)))
    return PhonemeAlignment(entries=entries) if entries else None


def _attribute_values(attrs):
    return {"E": attrs.relative_energy,
            "Dur.": attrs.duration_frames,
            "F0": attrs.mean_f0}


def evaluate(checkpoint_path, manifest: CorpusManifest, metrics, out_dir,
             correlation_scope="pooled", griffin_lim_iterations=30,
             synthesize_fn=None):
    """Score one checkpoint on a manifest.

    metrics: subset of {"mcd", "prosody_corr", "diversity"}. prosody
    metrics need an alignment file per utterance and reuse it for the
    synthesized audio (no forced aligner here). `synthesize_fn(ids, entry)
    -> MelSpectrogram` overrides model inference when given.
    """
    metrics = list(metrics)
    if not metrics:
        raise ValueError("no metrics requested")
    unknown = [m for m in metrics if m not in METRIC_NAMES]
    if unknown:
        raise ValueError(f"unknown metrics {unknown}; valid: {METRIC_NAMES}")
    if correlation_scope not in ("pooled", "per_utterance"):
        raise ValueError(f"correlation_scope must be 'pooled' or 'per_utterance', "
                         f"got {correlation_scope!r}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    model, meta, ckpt_vocab = load_model(checkpoint_path)
    system = SYSTEM_LABELS.get(model.aggregation_mode, model.aggregation_mode)
    vocab = manifest.vocabulary()
    if ckpt_vocab is not None and ckpt_vocab != vocab.symbols:
        raise ValueError("checkpoint vocabulary does not match the manifest's")

    need_prosody = "prosody_corr" in metrics or "diversity" in metrics
    if need_prosody:
        missing = [e.utt_id for e in manifest.entries if e.align_path is None]
        if missing:
            raise ValueError(f"prosody metrics need alignments; missing for: "
                             f"{', '.join(missing)}")

    if synthesize_fn is None:
        def synthesize_fn(ids, entry):
            frames, _, _ = model.infer(ids)
            return frames

    report = EvalReport(system=system)
    per_utt = []  # (entry, ref mel, hyp mel, align)
    for entry in manifest.entries:
        ids, ref_mel, align = manifest.load_utterance(entry, vocab)
        hyp = synthesize_fn(ids, entry)
        if isinstance(hyp, MelSpectrogram):
            hyp_mel = hyp
        else:
            hyp_mel = MelSpectrogram(frames=np.asarray(hyp),
                                     sample_rate=ref_mel.sample_rate,
                                     hop_samples=ref_mel.hop_samples,
                                     win_samples=ref_mel.win_samples)
        per_utt.append((entry, ref_mel, hyp_mel, align))

    if "mcd" in metrics:
        for entry, ref_mel, hyp_mel, _ in per_utt:
            value = mcd(mel_cepstrum(ref_mel), mel_cepstrum(hyp_mel))
            report.mcd_per_utterance[entry.utt_id] = value
        report.mcd_mean = float(np.mean(list(report.mcd_per_utterance.values())))
        path = out_dir / "mcd.tsv"
        with open(path, "w", encoding="utf-8") as f:
            f.write(f"Corpus\t{system}\n")
            f.write(f"toy\t{report.mcd_mean:.4f}\n")
        report.table_paths["mcd"] = path

    if need_prosody:
        ref_attr_lists = {a: [] for a in ATTRIBUTE_ROWS}   # per utterance lists
        hyp_attr_lists = {a: [] for a in ATTRIBUTE_ROWS}
        pair_lists = {a: [] for a in ATTRIBUTE_ROWS}       # pooled (ref, hyp) pairs
        per_utt_corr = {a: [] for a in ATTRIBUTE_ROWS}
        for entry, ref_mel, hyp_mel, align in per_utt:
            grid = FrameGrid.from_mel(ref_mel)
            ref_wav = griffin_lim(ref_mel, iterations=griffin_lim_iterations)
            hyp_wav = griffin_lim(hyp_mel, iterations=griffin_lim_iterations)
            hyp_align = _clamp_alignment(align, hyp_mel.num_frames)
            if hyp_align is None or hyp_align.num_phonemes < align.num_phonemes:
                warnings.warn(f"{entry.utt_id}: synthesis shorter than alignment; "
                              f"truncated phonemes are skipped")
            if hyp_align is None:
                continue
            ref_attrs = extract_prosody_attributes(ref_wav, align, grid)
            hyp_attrs = extract_prosody_attributes(hyp_wav, hyp_align,
                                                   FrameGrid.from_mel(hyp_mel))
            ref_vals = _attribute_values(ref_attrs)
            hyp_vals = _attribute_values(hyp_attrs)
            n = hyp_align.num_phonemes
            utt_pairs = {a: [] for a in ATTRIBUTE_ROWS}
            for a in ATTRIBUTE_ROWS:
                ref_attr_lists[a].append(ref_vals[a])
                hyp_attr_lists[a].append(hyp_vals[a])
                for r, h in zip(ref_vals[a][:n], hyp_vals[a]):
                    if r is not None and h is not None:
                        utt_pairs[a].append((r, h))
                pair_lists[a].extend(utt_pairs[a])
                if correlation_scope == "per_utterance":
                    corr = _safe_corr(utt_pairs[a])
                    if corr is not None:
                        per_utt_corr[a].append(corr)

        if "prosody_corr" in metrics:
            for a in ATTRIBUTE_ROWS:
                if correlation_scope == "pooled":
                    report.correlations[a] = _safe_corr(pair_lists[a])
                else:
                    report.correlations[a] = (float(np.mean(per_utt_corr[a]))
                                              if per_utt_corr[a] else None)
            path = out_dir / "prosody_corr.tsv"
            with open(path, "w", encoding="utf-8") as f:
                f.write(f"Attribute\t{system}\n")
                for a in ATTRIBUTE_ROWS:
                    v = report.correlations[a]
                    f.write(f"{a}\t{'NA' if v is None else f'{v:.4f}'}\n")
            report.table_paths["prosody_corr"] = path

        if "diversity" in metrics:
            shift_ms = per_utt[0][1].frame_shift_ms
            for a in ATTRIBUTE_ROWS:
                report.diversity[a] = (
                    _safe_diversity(hyp_attr_lists[a], a, shift_ms),
                    _safe_diversity(ref_attr_lists[a], a, shift_ms))
            path = out_dir / "diversity.tsv"
            with open(path, "w", encoding="utf-8") as f:
                f.write(f"Attribute\t{system}\tGT\n")
                for a in ATTRIBUTE_ROWS:
                    sys_v, gt_v = report.diversity[a]
                    f.write(f"{a}\t{'NA' if sys_v is None else f'{sys_v:.4f}'}"
                            f"\t{'NA' if gt_v is None else f'{gt_v:.4f}'}\n")
            report.table_paths["diversity"] = path

    return report


def _safe_corr(pairs):
    if len(pairs) < 2:
        return None
    x = [p[0] for p in pairs]
    y = [p[1] for p in pairs]
    try:
        return pearson_correlation(x, y)
    except ValueError:
        return None


def _safe_diversity(per_utt_values, attribute, frame_shift_ms):
    # Durations are stored in frames; reports convert to milliseconds.
    if attribute == "Dur.":
        per_utt_values = [[v * frame_shift_ms for v in utt] for utt in per_utt_values]
    try:
        return diversity_stddev(per_utt_values)
    except ValueError:
        return None
