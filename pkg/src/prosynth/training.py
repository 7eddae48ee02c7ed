"""Teacher-forced training with adaptive-moment updates, gradient-norm
clipping, periodic checkpoints, and a step -> loss log."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import tensor as T
from .checkpoint import save_model
from .config import TrainingConfig, decoder_config, encoder_config
from .corpus import CorpusManifest
from .model import AcousticModel
from .optim import Adam, clip_grad_norm, warmup_scale
from .tensor import NumericError, Tensor


@dataclass
class TrainResult:
    model: AcousticModel
    losses: list            # (step, loss)
    loss_log_path: Path
    checkpoint_paths: list
    final_checkpoint: Path


def build_model(config: TrainingConfig, vocab_size):
    rng = np.random.default_rng([config.seed, 0])
    enc = encoder_config(config.preset, vocab_size)
    dec = decoder_config(config.preset, config.reduction_factor)
    return AcousticModel(enc, dec, config.aggregation_mode, rng)


def stop_targets_for(num_frames, reduction_factor):
    """0 everywhere except the final decoder step."""
    steps = -(-num_frames // reduction_factor)
    t = np.zeros(steps)
    t[-1] = 1.0
    return t


def utterance_loss(model: AcousticModel, ids, target_frames):
    """Teacher-forced loss: frame MSE before and after the postnet plus
    stop-token cross-entropy. Returns a scalar Tensor."""
    pre, post, stops, _ = model.teacher_forced(ids, target_frames)
    target = Tensor(target_frames)
    mse_pre = ((pre - target) * (pre - target)).mean()
    mse_post = ((post - target) * (post - target)).mean()
    stop_t = Tensor(stop_targets_for(target_frames.shape[0],
                                     model.dec_cfg.reduction_factor))
    bce = (T.softplus(stops) - stops * stop_t).mean()
    return mse_pre + mse_post + bce


def evaluate_teacher_forced(model, utterances):
    """Mean teacher-forced loss over (ids, mel) pairs, no grad."""
    with T.no_grad():
        total = 0.0
        for ids, mel in utterances:
            total += utterance_loss(model, ids, mel.frames).item()
    return total / len(utterances)


def _first_non_finite_parameter(model):
    for name, p in model.named_parameters():
        if p.tensor.grad is not None and not np.all(np.isfinite(p.tensor.grad)):
            return name + " (gradient)"
        if not np.all(np.isfinite(p.tensor.data)):
            return name + " (value)"
    return "<none located>"


def load_training_set(manifest: CorpusManifest):
    vocab = manifest.vocabulary()
    data = []
    for entry in manifest.entries:
        ids, mel, _ = manifest.load_utterance(entry, vocab)
        data.append((ids, mel))
    return vocab, data


def train(config: TrainingConfig, manifest: CorpusManifest, out_dir,
          progress=None, stop_when=None):
    """Optimize on the manifest's utterances for config.max_steps updates.

    One step accumulates gradients over `batch_size` utterances (each on
    its own graph), clips the global norm, and applies one update.
    `stop_when(step, loss)` may end the run early (overfit experiments).
    """
    if len(manifest) == 0:
        raise ValueError("manifest is empty")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    vocab, data = load_training_set(manifest)
    model = build_model(config, len(vocab))
    optimizer = Adam(model.parameters(), learning_rate=config.learning_rate)
    order_rng = np.random.default_rng([config.seed, 1])
    mel_meta = {"sample_rate": data[0][1].sample_rate,
                "hop_samples": data[0][1].hop_samples,
                "win_samples": data[0][1].win_samples}

    losses = []
    checkpoint_paths = []
    order = []
    log_path = out_dir / "loss_log.tsv"
    with open(log_path, "w", encoding="utf-8") as log:
        for step in range(config.max_steps):
            optimizer.zero_grad()
            batch_loss = 0.0
            for _ in range(config.batch_size):
                if not order:
                    order = list(order_rng.permutation(len(data)))
                ids, mel = data[order.pop()]
                try:
                    loss = utterance_loss(model, ids, mel.frames)
                    loss.backward()
                except NumericError as exc:
                    raise NumericError(
                        f"non-finite loss at step {step}; first offending parameter "
                        f"block: {_first_non_finite_parameter(model)}") from exc
                batch_loss += loss.item()
            batch_loss /= config.batch_size
            if not np.isfinite(batch_loss):
                raise NumericError(
                    f"non-finite loss at step {step}; first offending parameter "
                    f"block: {_first_non_finite_parameter(model)}")
            # Per-utterance graphs accumulated raw sums; average them.
            if config.batch_size > 1:
                for p in optimizer.params:
                    p.tensor.grad /= config.batch_size
            clip_grad_norm(optimizer.params, config.grad_clip_norm)
            optimizer.step(lr_scale=warmup_scale(step, config.warmup_steps))

            losses.append((step, batch_loss))
            log.write(f"{step}\t{batch_loss:.10f}\n")
            if progress is not None:
                progress(step, batch_loss)
            if config.checkpoint_interval > 0 and (step + 1) % config.checkpoint_interval == 0:
                path = out_dir / f"checkpoint_{step + 1:06d}.ckpt"
                save_model(path, model, vocab_symbols=vocab.symbols,
                           extra_metadata={"step": step + 1, "seed": config.seed,
                                           **mel_meta})
                checkpoint_paths.append(path)
            if stop_when is not None and stop_when(step, batch_loss):
                break

    final = out_dir / "checkpoint_final.ckpt"
    save_model(final, model, vocab_symbols=vocab.symbols,
               extra_metadata={"step": config.max_steps, "seed": config.seed,
                               **mel_meta})
    checkpoint_paths.append(final)
    return TrainResult(model=model, losses=losses, loss_log_path=log_path,
                       checkpoint_paths=checkpoint_paths, final_checkpoint=final)
