"""Command-line interface: train, synth, eval, gen-corpus, grad-check.

Failures print one line to stderr of the form `error:<category>: message`
and exit nonzero.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .audio import FeatureConfig, MelSpectrogram, griffin_lim, save_mel, write_wav
from .checkpoint import load_model
from .config import ConfigError, parse_config_file, training_config_from
from .corpus import Vocabulary, VocabularyError, generate_toy_corpus, load_manifest, load_symbol_file
from .evaluate import evaluate
from .gradcheck import check_gradients
from .fragments import standard_fragments
from .tensor import NumericError, ShapeError
from .training import train


def _category(exc):
    if isinstance(exc, (ConfigError,)):
        return "config"
    if isinstance(exc, VocabularyError):
        return "vocab"
    if isinstance(exc, NumericError):
        return "numeric"
    if isinstance(exc, ShapeError):
        return "shape"
    if isinstance(exc, (FileNotFoundError, IsADirectoryError, PermissionError, OSError)):
        return "io"
    if isinstance(exc, (ValueError, KeyError)):
        return "invalid"
    return "internal"


def cmd_train(args):
    file_values = parse_config_file(args.config) if args.config else {}
    overrides = {
        "aggregation_mode": args.mode,
        "preset": args.preset,
        "max_steps": args.steps,
        "seed": args.seed,
        "learning_rate": args.learning_rate,
        "batch_size": args.batch_size,
    }
    config = training_config_from(file_values, overrides)
    manifest = load_manifest(args.manifest)
    progress = None
    if not args.quiet:
        def progress(step, loss):
            if step % 50 == 0 or step == config.max_steps - 1:
                print(f"step {step}\tloss {loss:.6f}")
    result = train(config, manifest, args.out, progress=progress)
    print(f"final checkpoint: {result.final_checkpoint}")
    print(f"loss log: {result.loss_log_path}")
    return 0


def cmd_synth(args):
    model, meta, vocab_symbols = load_model(args.checkpoint)
    if vocab_symbols is None:
        raise VocabularyError("checkpoint carries no vocabulary")
    vocab = Vocabulary(vocab_symbols)
    names = load_symbol_file(args.symbols)
    ids = vocab.encode(names)
    frames, info, _ = model.infer(ids)
    feature_cfg = FeatureConfig()
    mel = MelSpectrogram(
        frames=frames,
        sample_rate=int(meta.get("sample_rate", feature_cfg.sample_rate)),
        hop_samples=int(meta.get("hop_samples", feature_cfg.hop_samples)),
        win_samples=int(meta.get("win_samples", feature_cfg.win_samples)))
    save_mel(args.out_mel, mel)
    print(f"wrote {mel.num_frames} frames to {args.out_mel} "
          f"({info.num_steps} decoder steps, stopped_early={info.stopped_early})")
    if args.out_wav:
        wav = griffin_lim(mel, iterations=args.griffin_lim_iters)
        write_wav(args.out_wav, wav)
        print(f"wrote {args.out_wav}")
    return 0


def cmd_eval(args):
    manifest = load_manifest(args.manifest)
    metrics = [m.strip() for m in args.metrics.split(",") if m.strip()]
    report = evaluate(args.checkpoint, manifest, metrics, args.out,
                      correlation_scope=args.correlation_scope,
                      griffin_lim_iterations=args.griffin_lim_iters)
    if report.mcd_mean is not None:
        print(f"MCD\t{report.mcd_mean:.4f}")
    for attr, value in report.correlations.items():
        print(f"corr[{attr}]\t{'NA' if value is None else f'{value:.4f}'}")
    for attr, (sys_v, gt_v) in report.diversity.items():
        print(f"diversity[{attr}]\t{'NA' if sys_v is None else f'{sys_v:.4f}'}"
              f"\tGT {'NA' if gt_v is None else f'{gt_v:.4f}'}")
    for name, path in report.table_paths.items():
        print(f"table[{name}]: {path}")
    return 0


def cmd_gen_corpus(args):
    manifest = generate_toy_corpus(args.out, args.num_utterances, args.seed)
    print(f"wrote {len(manifest)} utterances under {manifest.root}")
    return 0


def cmd_grad_check(args):
    rng = np.random.default_rng(args.seed)
    all_ok = True
    for name, loss_fn, params in standard_fragments(args.seed):
        report = check_gradients(loss_fn, params, step=args.step,
                                 tolerance=args.tolerance,
                                 max_elements_per_param=args.max_elements, rng=rng)
        status = "ok" if report.passed else "FAIL"
        print(f"{name}: {status} (max_rel_err={report.max_rel_err:.3e})")
        if args.verbose or not report.passed:
            for e in report.entries:
                mark = "ok  " if e.passed else "FAIL"
                print(f"  {mark} {e.name}: {e.max_rel_err:.3e}")
        all_ok = all_ok and report.passed
    if not all_ok:
        raise NumericError("analytic gradients disagree with finite differences")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="prosynth",
        description="Desk-scale expressive TTS with sentence-context aggregation.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train an acoustic model on a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--mode", choices=("none", "direct", "weighted"))
    p.add_argument("--preset", choices=("toy", "paper"))
    p.add_argument("--steps", type=int, dest="steps")
    p.add_argument("--seed", type=int)
    p.add_argument("--learning-rate", type=float, dest="learning_rate")
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("synth", help="synthesize a mel (and optional WAV) from symbols")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--symbols", required=True)
    p.add_argument("--out-mel", required=True)
    p.add_argument("--out-wav")
    p.add_argument("--griffin-lim-iters", type=int, default=50)
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("eval", help="score a checkpoint against references")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--metrics", default="mcd",
                   help="comma-separated subset of mcd,prosody_corr,diversity")
    p.add_argument("--correlation-scope", choices=("pooled", "per_utterance"),
                   default="pooled")
    p.add_argument("--griffin-lim-iters", type=int, default=30)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("gen-corpus", help="generate the synthetic toy corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--num-utterances", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_gen_corpus)

    p = sub.add_parser("grad-check", help="verify analytic gradients by finite differences")
    p.add_argument("--step", type=float, default=1e-4)
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.add_argument("--max-elements", type=int, default=40,
                   help="sampled elements per parameter")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(fn=cmd_grad_check)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error:{_category(exc)}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
