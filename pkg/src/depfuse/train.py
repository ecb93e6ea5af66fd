"""Adam optimization with cross-entropy loss, the mini-batch training loop,
and the evaluation driver.

``learning_rate`` defaults to the desk-scale 1e-3. FULL_SCALE_LEARNING_RATE
(1e-6) is the conservative setting appropriate when fine-tuning on top of a
large pretrained encoder; with the toy trainable encoder and random init it
is far too small to converge in any reasonable number of epochs, so it is
kept only as a documented reference value.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import tensor as T
from .corpus import UserRecord
from .errors import ConfigError, DataFormatError, UsageError
from .features import (
    DEFAULT_NEGATIVITY_THRESHOLD,
    FeatureNormalizer,
    SentimentScorer,
    apply_normalizer,
    extract_features,
)
from .metrics import MetricsReport, evaluate_predictions
from .model import FusionModel, TokenInput, forward
from .rng import STREAM_TRAIN, SplitMix64, derive_seed
from .tensor import Tensor
from .text import Vocab, build_user_sequence

FULL_SCALE_LEARNING_RATE = 1e-6


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 8
    epochs: int = 10
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 0
    shuffle_each_epoch: bool = True
    early_stop_patience: int = 0  # 0 disables best-checkpoint tracking

    def validate(self) -> None:
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ConfigError("Adam betas must lie in [0, 1)")
        if self.early_stop_patience < 0:
            raise ConfigError("early_stop_patience must be >= 0")


@dataclass
class AdamState:
    m: Dict[str, np.ndarray]
    v: Dict[str, np.ndarray]
    t: int = 0

    @classmethod
    def for_params(cls, params: Dict[str, Tensor]) -> "AdamState":
        return cls(
            m={name: np.zeros(p.shape) for name, p in params.items()},
            v={name: np.zeros(p.shape) for name, p in params.items()},
        )


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    train_loss: float
    val_accuracy: float
    val_f1: float
    seconds: float


@dataclass
class TrainHistory:
    epochs: List[EpochStats] = field(default_factory=list)


def cross_entropy_loss(logits: Tensor, labels: Sequence[int]) -> Tensor:
    """Mean of -log softmax(logits)[label], stabilized via log-sum-exp."""
    label_arr = np.asarray(list(labels), dtype=np.int64)
    if label_arr.ndim != 1 or label_arr.shape[0] != logits.shape[0]:
        raise UsageError(
            f"labels ({label_arr.shape}) must match logit rows ({logits.shape[0]})"
        )
    if label_arr.size == 0:
        raise UsageError("cross_entropy_loss needs at least one row")
    if ((label_arr != 0) & (label_arr != 1)).any():
        raise UsageError("labels must be 0 or 1")
    z = logits.data
    m = z.max(axis=1, keepdims=True)
    lse = m + np.log(np.exp(z - m).sum(axis=1, keepdims=True))
    rows = np.arange(label_arr.shape[0])
    losses = lse[:, 0] - z[rows, label_arr]
    softmax = np.exp(z - lse)

    def backward(g: np.ndarray) -> None:
        onehot = np.zeros_like(z)
        onehot[rows, label_arr] = 1.0
        logits._accumulate(g[0, 0] * (softmax - onehot) / label_arr.shape[0])

    return T._node("cross_entropy", np.array([[losses.mean()]]), (logits,), backward)


def adam_step(
    params: Dict[str, Tensor], state: AdamState, config: TrainConfig
) -> None:
    """One Adam update with bias correction; parameters are edited in place."""
    state.t += 1
    t = state.t
    b1, b2 = config.beta1, config.beta2
    for name, p in params.items():
        if p.grad is None:
            raise UsageError(f"parameter {name} has no gradient; run backward first")
        g = p.grad
        state.m[name] = b1 * state.m[name] + (1.0 - b1) * g
        state.v[name] = b2 * state.v[name] + (1.0 - b2) * g * g
        m_hat = state.m[name] / (1.0 - b1**t)
        v_hat = state.v[name] / (1.0 - b2**t)
        p.data = p.data - config.learning_rate * m_hat / (np.sqrt(v_hat) + config.epsilon)


@dataclass(frozen=True)
class PreparedExample:
    user_id: str
    tokens: TokenInput
    stats: np.ndarray  # normalized 6-vector
    label: int


def prepare_examples(
    records: Sequence[UserRecord],
    vocab: Vocab,
    normalizer: FeatureNormalizer,
    scorer: SentimentScorer,
    threshold: float = DEFAULT_NEGATIVITY_THRESHOLD,
    max_len: int = 256,
    embeddings: Optional[Dict[str, np.ndarray]] = None,
) -> List[PreparedExample]:
    """Turn records into model inputs. When an embeddings map is supplied,
    every record must appear in it (the toy encoder is bypassed)."""
    out: List[PreparedExample] = []
    for record in records:
        if embeddings is not None:
            if record.user_id not in embeddings:
                raise DataFormatError(
                    f"no precomputed embedding for user {record.user_id}"
                )
            tokens: TokenInput = embeddings[record.user_id]
        else:
            tokens = build_user_sequence(record, vocab, max_len)
        stats = apply_normalizer(extract_features(record, scorer, threshold), normalizer)
        out.append(
            PreparedExample(
                user_id=record.user_id, tokens=tokens, stats=stats, label=record.label
            )
        )
    return out


def predict_logits(model: FusionModel, examples: Sequence[PreparedExample]) -> np.ndarray:
    """Logit matrix for a dataset, computed in fixed-size chunks."""
    if not examples:
        raise UsageError("cannot run the model on an empty dataset")
    rows: List[np.ndarray] = []
    chunk = 64
    for start in range(0, len(examples), chunk):
        batch = examples[start : start + chunk]
        logits = forward(model, [(e.tokens, e.stats) for e in batch])
        rows.append(logits.data.copy())
    return np.vstack(rows)


def predictions_from_logits(logits: np.ndarray) -> List[int]:
    # Ties go to class 0 (normal): a screening tool defaults to the
    # conservative side, and the rule is deterministic.
    return [1 if row[1] > row[0] else 0 for row in logits]


def probability_depressed(logits: np.ndarray) -> np.ndarray:
    """softmax(logits)[:, 1] computed without overflow."""
    shifted = np.exp(logits - logits.max(axis=1, keepdims=True))
    return shifted[:, 1] / shifted.sum(axis=1)


def evaluate(model: FusionModel, dataset: Sequence[PreparedExample]) -> MetricsReport:
    logits = predict_logits(model, dataset)
    preds = predictions_from_logits(logits)
    return evaluate_predictions(preds, [e.label for e in dataset])


def train(
    model: FusionModel,
    train_set: Sequence[PreparedExample],
    val_set: Sequence[PreparedExample],
    config: TrainConfig,
) -> Tuple[FusionModel, TrainHistory]:
    """Seeded mini-batch training. With early_stop_patience > 0 the model is
    rolled back to the best-validation-accuracy epoch; otherwise the final
    parameters are returned. Fully deterministic for a fixed seed."""
    config.validate()
    if not train_set:
        raise ConfigError("training set is empty")
    if not val_set:
        raise ConfigError("validation set is empty")
    history = TrainHistory()
    if config.epochs == 0:
        return model, history
    rng = SplitMix64(derive_seed(config.seed, STREAM_TRAIN))
    order = list(range(len(train_set)))
    rng.shuffle(order)
    state = AdamState.for_params(model.params)
    best_accuracy = -1.0
    best_params: Optional[Dict[str, np.ndarray]] = None
    epochs_since_best = 0
    for epoch in range(1, config.epochs + 1):
        started = time.perf_counter()
        if config.shuffle_each_epoch and epoch > 1:
            rng.shuffle(order)
        loss_sum = 0.0
        for start in range(0, len(order), config.batch_size):
            batch = [train_set[i] for i in order[start : start + config.batch_size]]
            logits = forward(model, [(e.tokens, e.stats) for e in batch])
            loss = cross_entropy_loss(logits, [e.label for e in batch])
            loss.backward()
            adam_step(model.params, state, config)
            loss_sum += loss.item() * len(batch)
            model.zero_grad()
        report = evaluate(model, val_set)
        history.epochs.append(
            EpochStats(
                epoch=epoch,
                train_loss=loss_sum / len(train_set),
                val_accuracy=report.accuracy,
                val_f1=report.f1,
                seconds=time.perf_counter() - started,
            )
        )
        if config.early_stop_patience > 0:
            if report.accuracy > best_accuracy:
                best_accuracy = report.accuracy
                best_params = model.copy_params()
                epochs_since_best = 0
            else:
                epochs_since_best += 1
                if epochs_since_best >= config.early_stop_patience:
                    break
    if config.early_stop_patience > 0 and best_params is not None:
        model.set_params(best_params)
    return model, history


def history_to_csv(history: TrainHistory, include_timing: bool = False) -> str:
    """Render per-epoch statistics as CSV.

    The seconds column is written as 0.000000 unless include_timing is set:
    persisted artifacts stay byte-reproducible for a fixed seed, and timing
    remains available on the in-memory history.
    """
    lines = ["epoch,train_loss,val_acc,val_f1,seconds"]
    for row in history.epochs:
        seconds = row.seconds if include_timing else 0.0
        lines.append(
            f"{row.epoch},{row.train_loss:.6f},{row.val_accuracy:.6f},"
            f"{row.val_f1:.6f},{seconds:.6f}"
        )
    return "\n".join(lines) + "\n"
