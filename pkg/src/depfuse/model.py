"""The fusion classifier: token encoder, statistic encoder, cross-attention
fusion (or a concat baseline), and a two-layer MLP head.

Two inputs per user: a token sequence (or an externally produced embedding
matrix) and the normalized 6-component statistic vector. The statistic rows
act as keys/values under the default ``fusion_query="tokens"``; flipping to
``"stats"`` swaps the roles, in which case the query/key projection widths
swap with them so each projection matches its input side.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from . import tensor as T
from .errors import ConfigError, DataFormatError, DimensionError, UsageError
from .features import N_FEATURES, FeatureNormalizer
from .rng import STREAM_INIT, SplitMix64, derive_seed
from .tensor import Tensor
from .text import CLS, TokenSequence, Vocab

FUSION_MODES = ("cross_attention", "concat")
VALUE_PROJECTIONS = ("shared_with_key", "separate")
FUSION_QUERIES = ("tokens", "stats")

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    d1: int = 32  # token embedding width
    d2: int = 32  # statistic embedding width
    d_k: int = 32  # query/key/value projection width
    refine_layers: int = 0  # self-attention blocks after the embedding
    refine_heads: int = 4
    mlp_hidden: int = 32
    fusion: str = "cross_attention"
    value_projection: str = "shared_with_key"
    outer_relu: bool = False
    fusion_query: str = "tokens"
    vocab_size: int = 0  # set from the built vocabulary
    max_len: int = 256

    def validate(self) -> None:
        if min(self.d1, self.d2, self.d_k, self.mlp_hidden) < 1:
            raise ConfigError("model widths must be >= 1")
        if self.refine_layers < 0:
            raise ConfigError("refine_layers must be >= 0")
        if self.refine_layers > 0:
            if self.refine_heads < 1 or self.d1 % self.refine_heads != 0:
                raise ConfigError(
                    f"refine_heads ({self.refine_heads}) must divide d1 ({self.d1})"
                )
        if self.fusion not in FUSION_MODES:
            raise ConfigError(f"fusion must be one of {FUSION_MODES}, got {self.fusion!r}")
        if self.value_projection not in VALUE_PROJECTIONS:
            raise ConfigError(
                f"value_projection must be one of {VALUE_PROJECTIONS}, got {self.value_projection!r}"
            )
        if self.fusion_query not in FUSION_QUERIES:
            raise ConfigError(
                f"fusion_query must be one of {FUSION_QUERIES}, got {self.fusion_query!r}"
            )
        if self.vocab_size < 4:
            raise ConfigError(f"vocab_size must cover the specials, got {self.vocab_size}")
        if self.max_len < 8:
            raise ConfigError(f"max_len must be >= 8, got {self.max_len}")

    def fused_width(self) -> int:
        """Input width of the MLP head, determined by the fusion mode."""
        if self.fusion == "concat":
            return self.d1 + self.d2
        if self.fusion_query == "tokens":
            return self.d_k
        return N_FEATURES * self.d_k


@dataclass(frozen=True)
class CrossAttentionLayer:
    """Projections for the fusion attention; w_v may alias w_k."""

    w_q: Tensor
    w_k: Tensor
    w_v: Tensor
    d_k: int


@dataclass(frozen=True)
class MlpHead:
    w1: Tensor
    b1: Tensor
    w2: Tensor
    b2: Tensor


def _expected_shapes(config: ModelConfig) -> Dict[str, Tuple[int, int]]:
    """Parameter name -> shape map; dict order is the creation order."""
    d1, d2, dk = config.d1, config.d2, config.d_k
    shapes: Dict[str, Tuple[int, int]] = {
        "embedding": (config.vocab_size, d1),
        "positional": (config.max_len, d1),
    }
    for i in range(config.refine_layers):
        p = f"refine{i}."
        shapes[p + "attn_q"] = (d1, d1)
        shapes[p + "attn_k"] = (d1, d1)
        shapes[p + "attn_v"] = (d1, d1)
        shapes[p + "attn_o"] = (d1, d1)
        shapes[p + "ln1_gain"] = (1, d1)
        shapes[p + "ln1_bias"] = (1, d1)
        shapes[p + "ffn_w1"] = (d1, 4 * d1)
        shapes[p + "ffn_b1"] = (1, 4 * d1)
        shapes[p + "ffn_w2"] = (4 * d1, d1)
        shapes[p + "ffn_b2"] = (1, d1)
        shapes[p + "ln2_gain"] = (1, d1)
        shapes[p + "ln2_bias"] = (1, d1)
    shapes["stat_scale"] = (N_FEATURES, d2)
    shapes["stat_bias"] = (N_FEATURES, d2)
    if config.fusion == "cross_attention":
        # Query projection matches the query side's width; keys/values the other.
        q_width, kv_width = (d1, d2) if config.fusion_query == "tokens" else (d2, d1)
        shapes["attn_wq"] = (q_width, dk)
        shapes["attn_wk"] = (kv_width, dk)
        if config.value_projection == "separate":
            shapes["attn_wv"] = (kv_width, dk)
    shapes["mlp_w1"] = (config.fused_width(), config.mlp_hidden)
    shapes["mlp_b1"] = (1, config.mlp_hidden)
    shapes["mlp_w2"] = (config.mlp_hidden, 2)
    shapes["mlp_b2"] = (1, 2)
    return shapes


class FusionModel:
    """Parameter set plus the vocabulary and feature normalizer it expects."""

    def __init__(
        self,
        config: ModelConfig,
        params: Dict[str, Tensor],
        vocab: Optional[Vocab] = None,
        normalizer: Optional[FeatureNormalizer] = None,
    ):
        self.config = config
        self.params = params
        self.vocab = vocab
        self.normalizer = normalizer

    def parameter_count(self) -> int:
        return sum(t.data.size for t in self.params.values())

    def zero_grad(self) -> None:
        for t in self.params.values():
            t.zero_grad()

    def attention_layer(self) -> CrossAttentionLayer:
        if "attn_wq" not in self.params:
            raise UsageError("model was configured with fusion='concat'; no attention layer")
        w_k = self.params["attn_wk"]
        w_v = self.params["attn_wv"] if "attn_wv" in self.params else w_k
        return CrossAttentionLayer(
            w_q=self.params["attn_wq"], w_k=w_k, w_v=w_v, d_k=self.config.d_k
        )

    def mlp_head(self) -> MlpHead:
        return MlpHead(
            w1=self.params["mlp_w1"],
            b1=self.params["mlp_b1"],
            w2=self.params["mlp_w2"],
            b2=self.params["mlp_b2"],
        )

    def copy_params(self) -> Dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self.params.items()}

    def set_params(self, values: Dict[str, np.ndarray]) -> None:
        for name, arr in values.items():
            self.params[name].data = arr.copy()


def init_params(
    config: ModelConfig,
    seed: int,
    vocab: Optional[Vocab] = None,
    normalizer: Optional[FeatureNormalizer] = None,
) -> FusionModel:
    """Deterministic initialization: Glorot-uniform weight matrices, zero
    biases, unit layernorm gains, N(0, 0.02) embedding and positional tables.
    Parameters are drawn from one seeded stream in creation order, so a fixed
    (config, seed) reproduces bit-identical values."""
    config.validate()
    rng = SplitMix64(derive_seed(seed, STREAM_INIT))

    def uniform_fill(rows: int, cols: int, limit: float) -> np.ndarray:
        out = np.empty((rows, cols))
        flat = out.reshape(-1)
        for i in range(flat.size):
            flat[i] = (rng.uniform() * 2.0 - 1.0) * limit
        return out

    def glorot(rows: int, cols: int) -> np.ndarray:
        return uniform_fill(rows, cols, math.sqrt(6.0 / (rows + cols)))

    def table(rows: int, cols: int) -> np.ndarray:
        out = np.empty((rows, cols))
        flat = out.reshape(-1)
        for i in range(flat.size):
            flat[i] = rng.normal(0.0, 0.02)
        return out

    params: Dict[str, Tensor] = {}
    for name, (rows, cols) in _expected_shapes(config).items():
        short = name.rsplit(".", 1)[-1]
        if name in ("embedding", "positional"):
            data = table(rows, cols)
        elif short.endswith("_gain"):
            data = np.ones((rows, cols))
        elif short.endswith("_bias") or short in ("ffn_b1", "ffn_b2", "mlp_b1", "mlp_b2"):
            data = np.zeros((rows, cols))
        elif name == "stat_scale":
            # Each row embeds one scalar statistic: fan_in 1, fan_out d2.
            data = uniform_fill(rows, cols, math.sqrt(6.0 / (1 + cols)))
        else:
            data = glorot(rows, cols)
        params[name] = Tensor(data, requires_grad=True)
    return FusionModel(config=config, params=params, vocab=vocab, normalizer=normalizer)


TokenInput = Union[TokenSequence, np.ndarray]


def _refine_block(model: FusionModel, x: Tensor, index: int) -> Tensor:
    """Post-norm transformer encoder block: multi-head self-attention and a
    width-4*d1 feed-forward, each with a residual then layer normalization."""
    cfg = model.config
    p = f"refine{index}."
    heads = cfg.refine_heads
    dh = cfg.d1 // heads
    q = T.matmul(x, model.params[p + "attn_q"])
    k = T.matmul(x, model.params[p + "attn_k"])
    v = T.matmul(x, model.params[p + "attn_v"])
    head_outs: List[Tensor] = []
    for h in range(heads):
        lo, hi = h * dh, (h + 1) * dh
        qh = T.slice_cols(q, lo, hi)
        kh = T.slice_cols(k, lo, hi)
        vh = T.slice_cols(v, lo, hi)
        weights = T.softmax_rows(T.scale(T.matmul(qh, T.transpose(kh)), 1.0 / math.sqrt(dh)))
        head_outs.append(T.matmul(weights, vh))
    merged = head_outs[0]
    for extra in head_outs[1:]:
        merged = T.concat_cols(merged, extra)
    attended = T.matmul(merged, model.params[p + "attn_o"])
    x = T.layernorm_rows(
        T.add(x, attended), model.params[p + "ln1_gain"], model.params[p + "ln1_bias"]
    )
    hidden = T.relu(T.add(T.matmul(x, model.params[p + "ffn_w1"]), model.params[p + "ffn_b1"]))
    ff = T.add(T.matmul(hidden, model.params[p + "ffn_w2"]), model.params[p + "ffn_b2"])
    return T.layernorm_rows(
        T.add(x, ff), model.params[p + "ln2_gain"], model.params[p + "ln2_bias"]
    )


def encode_tokens(model: FusionModel, item: TokenInput) -> Tensor:
    """Token matrix for one user: embedding + positional rows through any
    refinement blocks. PAD rows never enter the computation: ids are cut at
    true_len first (an all-PAD sequence falls back to the CLS row alone).
    Precomputed matrices skip the tables and feed the blocks directly."""
    cfg = model.config
    if isinstance(item, TokenSequence):
        length = item.true_len
        ids: Sequence[int] = item.ids[:length] if length > 0 else (CLS,)
        length = max(length, 1)
        if length > cfg.max_len:
            raise UsageError(f"sequence length {length} exceeds max_len {cfg.max_len}")
        emb = T.gather_rows(model.params["embedding"], ids)
        pos = T.slice_rows(model.params["positional"], 0, length)
        x = T.add(emb, pos)
    else:
        matrix = np.asarray(item, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[1] != cfg.d1:
            raise DimensionError(
                f"precomputed matrix must be Lx{cfg.d1}, got {matrix.shape}"
            )
        x = Tensor(matrix)
    for i in range(cfg.refine_layers):
        x = _refine_block(model, x, i)
    return x


def encode_stats(model: FusionModel, normalized: np.ndarray) -> Tensor:
    """6 x d2 statistic matrix: row j is scale_j * value_j + bias_j."""
    values = np.asarray(normalized, dtype=np.float64).reshape(-1)
    if values.shape[0] != N_FEATURES:
        raise DimensionError(f"expected {N_FEATURES} statistics, got {values.shape[0]}")
    scaled = T.scale_rows(model.params["stat_scale"], values)
    return T.add(scaled, model.params["stat_bias"])


def cross_attention(layer: CrossAttentionLayer, x_query: Tensor, x_kv: Tensor) -> Tensor:
    """Scaled dot-product attention of one sequence over another: softmax
    rows of (Q K^T / sqrt(d_k)) aggregate the projected values."""
    q = T.matmul(x_query, layer.w_q)
    k = T.matmul(x_kv, layer.w_k)
    v = T.matmul(x_kv, layer.w_v)
    scores = T.scale(T.matmul(q, T.transpose(k)), 1.0 / math.sqrt(layer.d_k))
    return T.matmul(T.softmax_rows(scores), v)


def attention_weights(layer: CrossAttentionLayer, x_query: Tensor, x_kv: Tensor) -> Tensor:
    q = T.matmul(x_query, layer.w_q)
    k = T.matmul(x_kv, layer.w_k)
    return T.softmax_rows(T.scale(T.matmul(q, T.transpose(k)), 1.0 / math.sqrt(layer.d_k)))


def mlp_forward(head: MlpHead, x: Tensor, outer_relu: bool = False) -> Tensor:
    hidden = T.relu(T.add(T.matmul(x, head.w1), head.b1))
    out = T.add(T.matmul(hidden, head.w2), head.b2)
    return T.relu(out) if outer_relu else out


def forward_one(model: FusionModel, item: TokenInput, normalized_stats: np.ndarray) -> Tensor:
    """1x2 logits for a single user."""
    cfg = model.config
    tokens = encode_tokens(model, item)
    stats = encode_stats(model, normalized_stats)
    if cfg.fusion == "cross_attention":
        layer = model.attention_layer()
        if cfg.fusion_query == "tokens":
            fused = T.mean_rows(cross_attention(layer, tokens, stats))
        else:
            fused = T.flatten_row(cross_attention(layer, stats, tokens))
    else:
        fused = T.concat_cols(T.mean_rows(tokens), T.mean_rows(stats))
    return mlp_forward(model.mlp_head(), fused, cfg.outer_relu)


def forward(
    model: FusionModel, batch: Sequence[Tuple[TokenInput, np.ndarray]]
) -> Tensor:
    """B x 2 logits for a batch of (token input, normalized statistics)."""
    if not batch:
        raise UsageError("forward needs a non-empty batch")
    rows = [forward_one(model, item, stats) for item, stats in batch]
    return rows[0] if len(rows) == 1 else T.stack_rows(rows)


def _vocab_payload(vocab: Optional[Vocab]):
    if vocab is None:
        return None
    return {"min_freq": vocab.min_freq, "tokens": vocab.token_to_id}


def vocab_fingerprint(vocab: Optional[Vocab]) -> str:
    payload = json.dumps(_vocab_payload(vocab), sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def save_checkpoint(model: FusionModel, path: Union[str, Path]) -> None:
    """Versioned JSON checkpoint; round-trips parameters bit for bit."""
    payload = {
        "version": CHECKPOINT_VERSION,
        "config": asdict(model.config),
        "vocab": _vocab_payload(model.vocab),
        "vocab_sha256": vocab_fingerprint(model.vocab),
        "normalizer": (
            None
            if model.normalizer is None
            else {
                "mean": model.normalizer.mean.tolist(),
                "std": model.normalizer.std.tolist(),
            }
        ),
        "params": {
            name: {"shape": list(t.shape), "data": t.data.reshape(-1).tolist()}
            for name, t in model.params.items()
        },
    }
    text = json.dumps(payload, sort_keys=True, ensure_ascii=False, separators=(",", ":"))
    Path(path).write_bytes(text.encode("utf-8"))


def load_checkpoint(path: Union[str, Path]) -> FusionModel:
    try:
        payload = json.loads(Path(path).read_bytes().decode("utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise DataFormatError(f"unreadable checkpoint {path}: {exc}") from exc
    if not isinstance(payload, dict) or payload.get("version") != CHECKPOINT_VERSION:
        raise DataFormatError(
            f"unsupported checkpoint version {payload.get('version')!r} in {path}"
        )
    try:
        config = ModelConfig(**payload["config"])
    except (KeyError, TypeError) as exc:
        raise DataFormatError(f"bad checkpoint config: {exc}") from exc
    config.validate()
    vocab = None
    if payload.get("vocab") is not None:
        vocab = Vocab(
            token_to_id={str(k): int(v) for k, v in payload["vocab"]["tokens"].items()},
            min_freq=int(payload["vocab"]["min_freq"]),
        )
    if payload.get("vocab_sha256") != vocab_fingerprint(vocab):
        raise DataFormatError(f"checkpoint {path}: vocabulary hash mismatch")
    normalizer = None
    if payload.get("normalizer") is not None:
        normalizer = FeatureNormalizer(
            mean=np.asarray(payload["normalizer"]["mean"], dtype=np.float64),
            std=np.asarray(payload["normalizer"]["std"], dtype=np.float64),
        )
    expected = _expected_shapes(config)
    raw_params = payload.get("params", {})
    if set(raw_params) != set(expected):
        missing = sorted(set(expected) - set(raw_params))
        extra = sorted(set(raw_params) - set(expected))
        raise DataFormatError(
            f"checkpoint parameters do not match config (missing {missing}, extra {extra})"
        )
    params: Dict[str, Tensor] = {}
    for name, (rows, cols) in expected.items():
        entry = raw_params[name]
        if tuple(entry["shape"]) != (rows, cols) or len(entry["data"]) != rows * cols:
            raise DataFormatError(
                f"checkpoint param {name}: shape {tuple(entry['shape'])} does not match"
                f" expected ({rows}, {cols})"
            )
        params[name] = Tensor(
            np.asarray(entry["data"], dtype=np.float64).reshape(rows, cols),
            requires_grad=True,
        )
    return FusionModel(config=config, params=params, vocab=vocab, normalizer=normalizer)
