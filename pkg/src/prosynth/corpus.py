"""Vocabulary and corpus plumbing, plus a synthetic toy corpus whose
text -> mel mapping is known exactly.

Each toy symbol paints a characteristic band-energy stripe for a
characteristic number of frames (both drawn once per corpus from the
seed). Every utterance additionally has a "theme": symbols are drawn
preferentially from one of two symbol classes, and the realized class
fraction sets a global energy register for the whole utterance. The
register is a sentence-level statistic of the text, so the data has a
genuinely global component for a sentence-context pathway to carry.
Text alone determines the mel pattern, including its timing.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio import LOG_MEL_FLOOR, FeatureConfig, MelSpectrogram, load_mel, save_mel
from .prosody import PhonemeAlignment, save_alignment


class VocabularyError(ValueError):
    """A symbol or id is not covered by the vocabulary."""


class Vocabulary:
    """Symbol list where a symbol's id is its line number in the file."""

    def __init__(self, symbols):
        self.symbols = list(symbols)
        if len(set(self.symbols)) != len(self.symbols):
            raise VocabularyError("duplicate symbols in vocabulary")
        self._index = {s: i for i, s in enumerate(self.symbols)}

    def __len__(self):
        return len(self.symbols)

    def __contains__(self, symbol):
        return symbol in self._index

    def encode(self, names):
        ids = []
        for pos, name in enumerate(names):
            if name not in self._index:
                raise VocabularyError(f"unknown symbol {name!r} at position {pos}")
            ids.append(self._index[name])
        return np.asarray(ids, dtype=np.int64)

    def decode(self, ids):
        out = []
        for pos, i in enumerate(ids):
            if not 0 <= int(i) < len(self.symbols):
                raise VocabularyError(f"id {i} out of range at position {pos}")
            out.append(self.symbols[int(i)])
        return out

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as f:
            symbols = [line.rstrip("\n") for line in f if line.rstrip("\n")]
        return cls(symbols)

    def save(self, path):
        with open(path, "w", encoding="utf-8") as f:
            for s in self.symbols:
                f.write(s + "\n")


def load_symbol_file(path):
    """Whitespace-separated symbol names; empty file is an error."""
    text = Path(path).read_text(encoding="utf-8")
    names = text.split()
    if not names:
        raise ValueError(f"{path}: symbol file is empty")
    return names


def save_symbol_file(path, names):
    Path(path).write_text(" ".join(names) + "\n", encoding="utf-8")


@dataclass
class ManifestEntry:
    utt_id: str
    symbols_path: Path
    mel_path: Path
    align_path: Path | None = None


@dataclass
class CorpusManifest:
    root: Path
    vocab_path: Path
    entries: list

    def __len__(self):
        return len(self.entries)

    def vocabulary(self):
        return Vocabulary.load(self.vocab_path)

    def load_utterance(self, entry: ManifestEntry, vocab: Vocabulary):
        from .prosody import load_alignment
        names = load_symbol_file(entry.symbols_path)
        ids = vocab.encode(names)
        mel = load_mel(entry.mel_path)
        align = load_alignment(entry.align_path) if entry.align_path else None
        return ids, mel, align


MANIFEST_NAME = "manifest.tsv"
VOCAB_NAME = "vocab.txt"


def save_manifest(manifest: CorpusManifest):
    path = manifest.root / MANIFEST_NAME
    with open(path, "w", encoding="utf-8") as f:
        for e in manifest.entries:
            fields = [e.utt_id,
                      str(e.symbols_path.relative_to(manifest.root)),
                      str(e.mel_path.relative_to(manifest.root))]
            if e.align_path is not None:
                fields.append(str(e.align_path.relative_to(manifest.root)))
            f.write("\t".join(fields) + "\n")
    return path


def load_manifest(path):
    path = Path(path)
    root = path.parent
    entries = []
    seen = set()
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) not in (3, 4):
                raise ValueError(f"{path}:{line_no}: expected 3 or 4 tab-separated fields")
            utt_id = fields[0]
            if utt_id in seen:
                raise ValueError(f"{path}:{line_no}: duplicate utterance id {utt_id!r}")
            seen.add(utt_id)
            entry = ManifestEntry(
                utt_id=utt_id,
                symbols_path=root / fields[1],
                mel_path=root / fields[2],
                align_path=root / fields[3] if len(fields) == 4 else None)
            for p in (entry.symbols_path, entry.mel_path, entry.align_path):
                if p is not None and not p.exists():
                    raise FileNotFoundError(f"{path}:{line_no}: missing file {p}")
            entries.append(entry)
    vocab_path = root / VOCAB_NAME
    if not vocab_path.exists():
        raise FileNotFoundError(f"vocabulary file {vocab_path} not found next to manifest")
    return CorpusManifest(root=root, vocab_path=vocab_path, entries=entries)


# ---------------------------------------------------------------------------
# Toy corpus
# ---------------------------------------------------------------------------

TOY_NUM_SYMBOLS = 12
TOY_MIN_LEN, TOY_MAX_LEN = 5, 20
TOY_MIN_DUR, TOY_MAX_DUR = 2, 6
_STRIPE_PROFILE = np.array([0.35, 0.7, 1.0, 0.7, 0.35])


def toy_symbol_names():
    return [f"p{i:02d}" for i in range(TOY_NUM_SYMBOLS)]


def _toy_stripe(symbol_id, num_mels, register, frame_index):
    """One mel frame for `symbol_id`: a band bump whose height decays over
    the phoneme, so consecutive frames are never identical."""
    frame = np.full(num_mels, LOG_MEL_FLOOR)
    center = 4 + int(round(symbol_id * (num_mels - 10) / (TOY_NUM_SYMBOLS - 1)))
    height = 6.0 + 1.5 * (symbol_id % 3) + 4.5 * register
    height = max(height - 0.7 * frame_index, 0.4 * height)
    lo = center - 2
    for off, w in enumerate(_STRIPE_PROFILE):
        band = lo + off
        if 0 <= band < num_mels:
            frame[band] += height * w
    return frame


TOY_CLASS_A = tuple(range(TOY_NUM_SYMBOLS // 2))


def toy_register(symbol_ids):
    """Sentence-level energy register: the fraction of class-A symbols."""
    ids = np.asarray(symbol_ids)
    return float(np.mean(np.isin(ids, TOY_CLASS_A)))


def generate_toy_corpus(out_dir, num_utterances, seed, num_mels=80,
                        feature_config: FeatureConfig | None = None):
    """Write vocab, symbol/mel/alignment files and a manifest under out_dir."""
    if num_utterances < 1:
        raise ValueError("num_utterances must be >= 1")
    if feature_config is None:
        feature_config = FeatureConfig(num_mels=num_mels)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    vocab = Vocabulary(toy_symbol_names())
    vocab_path = out_dir / VOCAB_NAME
    vocab.save(vocab_path)

    rng = np.random.default_rng(seed)
    # Characteristic per-symbol durations; drawn once so timing is a pure
    # function of the text (free-running inference can match it exactly).
    duration_map = rng.integers(TOY_MIN_DUR, TOY_MAX_DUR + 1, size=TOY_NUM_SYMBOLS)
    half = TOY_NUM_SYMBOLS // 2
    entries = []
    for u in range(num_utterances):
        length = int(rng.integers(TOY_MIN_LEN, TOY_MAX_LEN + 1))
        theme = rng.uniform(0.15, 0.85)  # class-A draw probability
        in_a = rng.random(length) < theme
        symbol_ids = np.where(in_a, rng.integers(0, half, size=length),
                              rng.integers(half, TOY_NUM_SYMBOLS, size=length))
        register = toy_register(symbol_ids)

        frames = []
        align_entries = []
        cursor = 0
        for sid in symbol_ids:
            dur = int(duration_map[int(sid)])
            frames.extend(_toy_stripe(int(sid), num_mels, register, t)
                          for t in range(dur))
            align_entries.append((vocab.symbols[int(sid)], cursor, cursor + dur))
            cursor += dur

        utt_id = f"utt{u:04d}"
        mel = MelSpectrogram(frames=np.asarray(frames),
                             sample_rate=feature_config.sample_rate,
                             hop_samples=feature_config.hop_samples,
                             win_samples=feature_config.win_samples)
        entry = ManifestEntry(
            utt_id=utt_id,
            symbols_path=out_dir / f"{utt_id}.sym",
            mel_path=out_dir / f"{utt_id}.mel",
            align_path=out_dir / f"{utt_id}.align")
        save_symbol_file(entry.symbols_path, vocab.decode(symbol_ids))
        save_mel(entry.mel_path, mel)
        save_alignment(entry.align_path, PhonemeAlignment(entries=align_entries))
        entries.append(entry)

    manifest = CorpusManifest(root=out_dir, vocab_path=vocab_path, entries=entries)
    save_manifest(manifest)
    return manifest
