"""End-to-end wiring: corpus -> features -> model -> training -> metrics.

RunConfig is the flat merged view the CLI exposes: model dimensions,
optimizer settings, split parameters and file paths, every field with a
default. The same pipeline backs the ``train`` subcommand and the ablation
harness.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from .corpus import ParseIssue, SplitSpec, UserRecord, parse_corpus, split_dataset
from .errors import ConfigError
from .features import (
    DEFAULT_NEGATIVITY_THRESHOLD,
    LexiconScorer,
    default_scorer,
    extract_features,
    fit_normalizer,
    load_lexicon,
)
from .metrics import MetricsReport, report_to_json
from .model import FusionModel, ModelConfig, init_params, save_checkpoint
from .text import build_vocab
from .train import (
    TrainConfig,
    TrainHistory,
    evaluate,
    history_to_csv,
    prepare_examples,
    train,
)


@dataclass(frozen=True)
class RunConfig:
    # paths
    corpus: str = "corpus.jsonl"
    out_dir: str = "run"
    lexicon: Optional[str] = None  # None -> shipped default lexicon
    # featurization
    threshold: float = DEFAULT_NEGATIVITY_THRESHOLD
    # split
    ratio: float = 0.8
    seed: int = 0
    # text
    min_freq: int = 1
    max_len: int = 256
    # model
    d1: int = 32
    d2: int = 32
    d_k: int = 32
    refine_layers: int = 0
    refine_heads: int = 4
    mlp_hidden: int = 32
    fusion: str = "cross_attention"
    value_projection: str = "shared_with_key"
    outer_relu: bool = False
    fusion_query: str = "tokens"
    # optimization
    learning_rate: float = 1e-3
    batch_size: int = 8
    epochs: int = 10
    early_stop_patience: int = 0
    shuffle_each_epoch: bool = True
    # output
    timing: bool = False

    def model_config(self, vocab_size: int) -> ModelConfig:
        return ModelConfig(
            d1=self.d1,
            d2=self.d2,
            d_k=self.d_k,
            refine_layers=self.refine_layers,
            refine_heads=self.refine_heads,
            mlp_hidden=self.mlp_hidden,
            fusion=self.fusion,
            value_projection=self.value_projection,
            outer_relu=self.outer_relu,
            fusion_query=self.fusion_query,
            vocab_size=vocab_size,
            max_len=self.max_len,
        )

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            epochs=self.epochs,
            seed=self.seed,
            shuffle_each_epoch=self.shuffle_each_epoch,
            early_stop_patience=self.early_stop_patience,
        )


@dataclass
class PipelineResult:
    model: FusionModel
    history: TrainHistory
    report: MetricsReport
    issues: List[ParseIssue] = field(default_factory=list)
    n_train: int = 0
    n_validation: int = 0


def make_scorer(config: RunConfig) -> LexiconScorer:
    if config.lexicon is None:
        return default_scorer()
    path = Path(config.lexicon)
    with path.open(encoding="utf-8") as fh:
        terms = load_lexicon(fh)
    return LexiconScorer(terms, name=path.name)


def train_from_records(
    records: List[UserRecord], config: RunConfig
) -> PipelineResult:
    """Split, fit the vocabulary and normalizer on the training slice only,
    train, and evaluate on the validation slice."""
    if not records:
        raise ConfigError("no valid records in the corpus")
    train_records, val_records = split_dataset(
        records, SplitSpec(ratio=config.ratio, seed=config.seed)
    )
    if not train_records or not val_records:
        raise ConfigError(
            f"split produced an empty side (train={len(train_records)},"
            f" validation={len(val_records)}); adjust ratio or corpus size"
        )
    vocab = build_vocab(train_records, min_freq=config.min_freq)
    scorer = make_scorer(config)
    train_vectors = [
        extract_features(r, scorer, config.threshold) for r in train_records
    ]
    normalizer = fit_normalizer(train_vectors)
    train_set = prepare_examples(
        train_records, vocab, normalizer, scorer, config.threshold, config.max_len
    )
    val_set = prepare_examples(
        val_records, vocab, normalizer, scorer, config.threshold, config.max_len
    )
    model = init_params(
        config.model_config(vocab_size=len(vocab)),
        seed=config.seed,
        vocab=vocab,
        normalizer=normalizer,
    )
    model, history = train(model, train_set, val_set, config.train_config())
    report = evaluate(model, val_set)
    return PipelineResult(
        model=model,
        history=history,
        report=report,
        n_train=len(train_set),
        n_validation=len(val_set),
    )


def run_training(config: RunConfig) -> PipelineResult:
    """Full file-to-files run: parse the corpus, train, write artifacts."""
    path = Path(config.corpus)
    if not path.exists():
        raise ConfigError(f"corpus not found: {path}")
    with path.open("rb") as fh:
        records, issues = parse_corpus(fh)
    result = train_from_records(records, config)
    result.issues = issues
    write_artifacts(result, config)
    return result


def write_artifacts(result: PipelineResult, config: RunConfig) -> Dict[str, Path]:
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "checkpoint": out_dir / "checkpoint.json",
        "history": out_dir / "history.csv",
        "metrics": out_dir / "metrics.json",
    }
    save_checkpoint(result.model, paths["checkpoint"])
    paths["history"].write_text(
        history_to_csv(result.history, include_timing=config.timing), encoding="utf-8"
    )
    paths["metrics"].write_text(report_to_json(result.report) + "\n", encoding="utf-8")
    return paths


def ablation_variants(config: RunConfig) -> List[Tuple[str, RunConfig]]:
    """The four comparison runs: fusion mode x refinement depth, sharing one
    seed and otherwise-identical configuration."""
    variants = []
    for fusion in ("cross_attention", "concat"):
        for layers in (0, 2):
            name = f"{fusion}_refine{layers}"
            variants.append(
                (
                    name,
                    replace(
                        config,
                        fusion=fusion,
                        refine_layers=layers,
                        out_dir=str(Path(config.out_dir) / name),
                    ),
                )
            )
    return variants


def run_ablation(config: RunConfig) -> List[Tuple[str, MetricsReport]]:
    """Run all ablation variants and write a summary CSV next to them."""
    path = Path(config.corpus)
    if not path.exists():
        raise ConfigError(f"corpus not found: {path}")
    with path.open("rb") as fh:
        records, _issues = parse_corpus(fh)
    results: List[Tuple[str, MetricsReport]] = []
    for name, variant in ablation_variants(config):
        result = train_from_records(records, variant)
        write_artifacts(result, variant)
        results.append((name, result.report))
    summary = ["variant,accuracy,precision,recall,f1"]
    for name, report in results:
        summary.append(
            f"{name},{report.accuracy:.6f},{report.precision:.6f},"
            f"{report.recall:.6f},{report.f1:.6f}"
        )
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "summary.csv").write_text("\n".join(summary) + "\n", encoding="utf-8")
    return results
