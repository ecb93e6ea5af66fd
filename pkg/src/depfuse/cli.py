"""Command-line surface: gen-synth, featurize, train, eval, predict.

Configuration precedence is defaults < config file < flags. The config file
is flat ``key = value`` text ('#' starts a comment); keys are the long flag
names with underscores, e.g.::

    seed = 7
    epochs = 30
    learning_rate = 1e-3
    fusion = cross_attention

Exit codes: 0 success, 2 usage/configuration, 3 data/format, 4 numerical
failure. All randomness is driven by --seed; outputs are byte-identical
across reruns with identical inputs and flags.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import fields
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from .corpus import ParseIssue, SplitSpec, UserRecord, parse_corpus, serialize_records, split_dataset
from .errors import ConfigError, DataFormatError, NumericalError, UsageError
from .features import extract_features
from .metrics import report_to_json
from .model import load_checkpoint, vocab_fingerprint
from .pipeline import RunConfig, make_scorer, run_training
from .synth import SynthDatasetSpec, generate_dataset, spec_to_json
from .text import build_vocab
from .train import (
    evaluate,
    predict_logits,
    predictions_from_logits,
    prepare_examples,
    probability_depressed,
)

_RUN_KEYS = {f.name: f.type for f in fields(RunConfig)}

# key -> coercion for config files; mirrors the flag types.
_KEY_PARSERS = {
    "n": int,
    "corpus": str,
    "out": str,
    "out_dir": str,
    "checkpoint": str,
    "lexicon": str,
    "split": str,
    "threshold": float,
    "ratio": float,
    "seed": int,
    "min_freq": int,
    "max_len": int,
    "d1": int,
    "d2": int,
    "d_k": int,
    "refine_layers": int,
    "refine_heads": int,
    "mlp_hidden": int,
    "fusion": str,
    "value_projection": str,
    "fusion_query": str,
    "outer_relu": "bool",
    "learning_rate": float,
    "batch_size": int,
    "epochs": int,
    "early_stop_patience": int,
    "shuffle_each_epoch": "bool",
    "timing": "bool",
}


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "1", "yes", "on"):
        return True
    if lowered in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def parse_config_file(path: Path) -> Dict[str, object]:
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    values: Dict[str, object] = {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _KEY_PARSERS:
            raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
        parser = _KEY_PARSERS[key]
        try:
            values[key] = _parse_bool(value) if parser == "bool" else parser(value)
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}") from None
    return values


def _merge(args: argparse.Namespace, keys: Sequence[str]) -> Dict[str, object]:
    """defaults < config file < explicit flags, restricted to ``keys``."""
    merged: Dict[str, object] = {}
    file_values: Dict[str, object] = {}
    if getattr(args, "config", None):
        file_values = parse_config_file(Path(args.config))
    for key in keys:
        if key in file_values:
            merged[key] = file_values[key]
        flag = getattr(args, key, None)
        if flag is not None:
            merged[key] = flag
    return merged


def _run_config(args: argparse.Namespace) -> RunConfig:
    return RunConfig(**_merge(args, list(_RUN_KEYS)))


def _report_issues(issues: List[ParseIssue]) -> None:
    for issue in issues:
        print(f"parse issue: line {issue.line}: {issue.reason}", file=sys.stderr)


def _load_records(corpus: str) -> tuple[List[UserRecord], List[ParseIssue]]:
    path = Path(corpus)
    if not path.exists():
        raise ConfigError(f"corpus not found: {path}")
    with path.open("rb") as fh:
        records, issues = parse_corpus(fh)
    _report_issues(issues)
    return records, issues


def _write_text(out: Optional[str], text: str) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8")


def cmd_gen_synth(args: argparse.Namespace) -> int:
    merged = _merge(args, ["n", "seed", "out"])
    n = int(merged.get("n", 250))
    seed = int(merged.get("seed", 0))
    out = merged.get("out")
    if out is None:
        raise ConfigError("gen-synth requires --out PATH")
    spec = SynthDatasetSpec(n_per_class=n, seed=seed)
    records = generate_dataset(spec)
    out_path = Path(out)
    if out_path.parent != Path(""):
        out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_bytes(serialize_records(records))
    Path(str(out_path) + ".spec.json").write_text(spec_to_json(spec), encoding="utf-8")
    per_class = {0: 0, 1: 0}
    for r in records:
        per_class[r.label] += 1
    print(
        f"wrote {len(records)} records ({per_class[0]} normal, {per_class[1]} depressed)"
        f" to {out_path}"
    )
    return 0


def cmd_featurize(args: argparse.Namespace) -> int:
    config = _run_config(args)
    merged = _merge(args, ["out"])
    records, _ = _load_records(config.corpus)
    scorer = make_scorer(config)
    lines = ["user_id,label,p_original,p_late_night,posts_per_week,posting_time_sd,p_negative,image_freq"]
    for record in records:
        v = extract_features(record, scorer, config.threshold)
        lines.append(
            f"{record.user_id},{record.label},{v.p_original:.6f},{v.p_late_night:.6f},"
            f"{v.posts_per_week:.6f},{v.posting_time_sd:.6f},{v.p_negative:.6f},"
            f"{v.image_freq:.6f}"
        )
    _write_text(merged.get("out"), "\n".join(lines) + "\n")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    config = _run_config(args)
    result = run_training(config)
    _report_issues(result.issues)
    for row in result.history.epochs:
        print(
            f"epoch {row.epoch}: train_loss={row.train_loss:.6f}"
            f" val_acc={row.val_accuracy:.4f} val_f1={row.val_f1:.4f}",
            file=sys.stderr,
        )
    out_dir = Path(config.out_dir)
    print(
        f"trained on {result.n_train} users, validated on {result.n_validation}:"
        f" accuracy={result.report.accuracy:.6f} f1={result.report.f1:.6f}"
    )
    print(f"artifacts in {out_dir}: checkpoint.json history.csv metrics.json")
    return 0


def _select_slice(
    records: List[UserRecord], split: str, ratio: float, seed: int
) -> List[UserRecord]:
    if split == "all":
        return records
    train_records, val_records = split_dataset(records, SplitSpec(ratio=ratio, seed=seed))
    return train_records if split == "train" else val_records


def _load_model_for(args: argparse.Namespace):
    merged = _merge(args, ["checkpoint"])
    checkpoint = merged.get("checkpoint")
    if checkpoint is None:
        raise ConfigError("missing --checkpoint PATH")
    path = Path(checkpoint)
    if not path.exists():
        raise ConfigError(f"checkpoint not found: {path}")
    return load_checkpoint(path)


def _prepare_for_model(model, records, config: RunConfig):
    if model.vocab is None or model.normalizer is None:
        raise ConfigError("checkpoint lacks a vocabulary or normalizer; cannot featurize")
    scorer = make_scorer(config)
    return prepare_examples(
        records,
        model.vocab,
        model.normalizer,
        scorer,
        config.threshold,
        model.config.max_len,
    )


def cmd_eval(args: argparse.Namespace) -> int:
    config = _run_config(args)
    merged = _merge(args, ["out", "split"])
    split = str(merged.get("split", "all"))
    if split not in ("all", "train", "validation"):
        raise ConfigError(f"--split must be all|train|validation, got {split!r}")
    model = _load_model_for(args)
    records, _ = _load_records(config.corpus)
    subset = _select_slice(records, split, config.ratio, config.seed)
    if split != "all" and model.vocab is not None:
        # Reproduction mode claims this is the training corpus; verify that
        # the vocabulary rebuilt from its training slice matches the
        # checkpoint before trusting the slice assignment.
        train_records, _ = split_dataset(records, SplitSpec(config.ratio, config.seed))
        rebuilt = build_vocab(train_records, min_freq=model.vocab.min_freq)
        if vocab_fingerprint(rebuilt) != vocab_fingerprint(model.vocab):
            raise ConfigError(
                "checkpoint/corpus mismatch (vocab hash): this corpus+seed+ratio does"
                " not reproduce the checkpoint's training slice"
            )
    if not subset:
        raise ConfigError("selected slice is empty")
    examples = _prepare_for_model(model, subset, config)
    report = evaluate(model, examples)
    _write_text(merged.get("out"), report_to_json(report) + "\n")
    return 0


def cmd_predict(args: argparse.Namespace) -> int:
    config = _run_config(args)
    merged = _merge(args, ["out"])
    model = _load_model_for(args)
    records, _ = _load_records(config.corpus)
    if not records:
        raise ConfigError("no valid records to predict on")
    examples = _prepare_for_model(model, records, config)
    logits = predict_logits(model, examples)
    probs = probability_depressed(logits)
    preds = predictions_from_logits(logits)
    lines = ["user_id,prob_depressed,prediction"]
    for example, prob, pred in zip(examples, probs, preds):
        lines.append(f"{example.user_id},{prob:.6f},{pred}")
    _write_text(merged.get("out"), "\n".join(lines) + "\n")
    return 0


def _add_shared(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--seed", type=int, help="root seed for all randomness")


def _add_featurize_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--corpus", help="JSONL corpus path")
    parser.add_argument("--lexicon", help="negative-term lexicon file (default: shipped)")
    parser.add_argument("--threshold", type=float, help="negativity threshold (default 0.5)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="depfuse",
        description="Depression screening pipeline over social-media timeline corpora.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-synth", help="generate a labeled synthetic corpus")
    _add_shared(p)
    p.add_argument("--n", type=int, help="users per class (default 250)")
    p.add_argument("--out", help="output JSONL path (sidecar: <out>.spec.json)")
    p.set_defaults(func=cmd_gen_synth)

    p = sub.add_parser("featurize", help="emit the per-user statistic CSV")
    _add_shared(p)
    _add_featurize_flags(p)
    p.add_argument("--out", help="CSV path (default: stdout)")
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("train", help="train a fusion classifier")
    _add_shared(p)
    _add_featurize_flags(p)
    p.add_argument("--out-dir", "--out", dest="out_dir", help="artifact directory")
    p.add_argument("--ratio", type=float, help="train fraction of the split (default 0.8)")
    p.add_argument("--min-freq", type=int, dest="min_freq")
    p.add_argument("--max-len", type=int, dest="max_len")
    p.add_argument("--d1", type=int)
    p.add_argument("--d2", type=int)
    p.add_argument("--d-k", type=int, dest="d_k")
    p.add_argument("--refine-layers", type=int, dest="refine_layers")
    p.add_argument("--refine-heads", type=int, dest="refine_heads")
    p.add_argument("--mlp-hidden", type=int, dest="mlp_hidden")
    p.add_argument("--fusion", choices=("cross_attention", "concat"))
    p.add_argument("--value-projection", choices=("shared_with_key", "separate"),
                   dest="value_projection")
    p.add_argument("--fusion-query", choices=("tokens", "stats"), dest="fusion_query")
    p.add_argument("--outer-relu", action=argparse.BooleanOptionalAction, default=None,
                   dest="outer_relu")
    p.add_argument("--lr", type=float, dest="learning_rate")
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--epochs", type=int)
    p.add_argument("--early-stop-patience", type=int, dest="early_stop_patience")
    p.add_argument("--shuffle-each-epoch", action=argparse.BooleanOptionalAction,
                   default=None, dest="shuffle_each_epoch")
    p.add_argument("--timing", action=argparse.BooleanOptionalAction, default=None,
                   help="write real wall-clock seconds into history.csv")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a corpus")
    _add_shared(p)
    _add_featurize_flags(p)
    p.add_argument("--checkpoint", help="checkpoint JSON path")
    p.add_argument("--out", help="metrics JSON path (default: stdout)")
    p.add_argument("--split", choices=("all", "train", "validation"),
                   help="evaluate a reproduced split slice instead of all users")
    p.add_argument("--ratio", type=float, help="split ratio when --split is used")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="per-user probabilities from a checkpoint")
    _add_shared(p)
    _add_featurize_flags(p)
    p.add_argument("--checkpoint", help="checkpoint JSON path")
    p.add_argument("--out", help="predictions CSV path (default: stdout)")
    p.set_defaults(func=cmd_predict)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DataFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
