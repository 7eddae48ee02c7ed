"""prosynth: a desk-scale seq2seq acoustic model whose text encoder taps
every self-attention level for a sentence-context vector, plus the
objective evaluation suite (mel-cepstral distortion, per-phoneme prosody
correlation and diversity) used to study it."""

from .attention import GmmAttention, GmmAttentionState, init_state
from .audio import (FeatureConfig, MelSpectrogram, Waveform, griffin_lim,
                    load_mel, mel_spectrogram, read_wav, save_mel, write_wav)
from .checkpoint import load_arrays, load_model, save_arrays, save_model
from .config import TrainingConfig, decoder_config, encoder_config
from .context import SentenceContext, SentenceContextModule
from .corpus import (CorpusManifest, Vocabulary, generate_toy_corpus,
                     load_manifest, load_symbol_file)
from .decoder import DecoderConfig, MelDecoder
from .encoder import EncoderConfig, EncoderStackOutput, TextEncoder
from .evaluate import evaluate
from .gradcheck import check_gradients
from .metrics import MelCepstrum, mcd, mel_cepstrum
from .model import AcousticModel
from .prosody import (F0Track, FrameGrid, PhonemeAlignment, ProsodyAttributes,
                      diversity_stddev, estimate_f0, extract_prosody_attributes,
                      load_alignment, pearson_correlation)
from .tensor import NumericError, ShapeError, TapeError, Tensor, no_grad
from .training import TrainResult, train, utterance_loss

__version__ = "0.1.0"

__all__ = [
    "AcousticModel", "CorpusManifest", "DecoderConfig", "EncoderConfig",
    "EncoderStackOutput", "F0Track", "FeatureConfig", "FrameGrid",
    "GmmAttention", "GmmAttentionState", "MelCepstrum", "MelDecoder",
    "MelSpectrogram", "NumericError", "PhonemeAlignment", "ProsodyAttributes",
    "SentenceContext", "SentenceContextModule", "ShapeError", "TapeError",
    "Tensor", "TextEncoder", "TrainResult", "TrainingConfig", "Vocabulary",
    "Waveform", "check_gradients", "decoder_config", "diversity_stddev",
    "encoder_config", "estimate_f0", "evaluate", "extract_prosody_attributes",
    "generate_toy_corpus", "griffin_lim", "init_state", "load_alignment",
    "load_arrays", "load_manifest", "load_mel", "load_model",
    "load_symbol_file", "mcd", "mel_cepstrum", "mel_spectrogram", "no_grad",
    "pearson_correlation", "read_wav", "save_arrays", "save_mel", "save_model",
    "train", "utterance_loss", "write_wav",
]
