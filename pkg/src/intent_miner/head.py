"""The trainable fusion head over title/description embeddings and the
14-dimensional auxiliary feature vector.

Layers: an optional shared pooler (dense 768->768 + tanh) applied to each
embedding, a merge layer over the concatenated pair (ReLU), a fusion
layer over merged-embedding ++ features (ReLU), and a 7-way sigmoid
output, one unit per intention. The loss sums binary cross-entropy over
the seven outputs and averages over the batch. Gradients are computed
analytically; the optimizer is Adam with separate learning rates for the
pooler and everything else.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .core import NUM_INTENTIONS, Intention
from .embedding import EmbeddingProviderSpec
from .features import FEATURE_DIM, FeatureVector, Standardizer

_ADAM_BETA1 = 0.9
_ADAM_BETA2 = 0.999
_ADAM_EPS = 1e-8
_PROB_CLAMP = 1e-12

MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class HeadConfig:
    """Architecture and training hyperparameters."""

    embedding_dim: int = 768
    merge_dim: int = 256
    fusion_dim: int = 64
    feature_dim: int = FEATURE_DIM
    fine_tune_pooler: bool = False
    learning_rate_head: float = 1e-3
    learning_rate_pooler: float = 1e-4
    batch_size: int = 16
    max_epochs: int = 50
    patience: int = 10
    seed: int = 0
    threshold: float = 0.5

    def __post_init__(self) -> None:
        for name in ("embedding_dim", "merge_dim", "fusion_dim", "feature_dim"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        if self.learning_rate_head <= 0 or self.learning_rate_pooler <= 0:
            raise ValueError("learning rates must be > 0")
        if self.batch_size <= 0:
            raise ValueError("batch_size must be > 0")
        if self.max_epochs <= 0:
            raise ValueError("max_epochs must be > 0")
        if self.patience <= 0:
            raise ValueError("patience must be > 0")
        if not 0.0 < self.threshold < 1.0:
            raise ValueError("threshold must lie strictly between 0 and 1")

    def to_dict(self) -> dict:
        return {
            "embedding_dim": self.embedding_dim,
            "merge_dim": self.merge_dim,
            "fusion_dim": self.fusion_dim,
            "feature_dim": self.feature_dim,
            "fine_tune_pooler": self.fine_tune_pooler,
            "learning_rate_head": self.learning_rate_head,
            "learning_rate_pooler": self.learning_rate_pooler,
            "batch_size": self.batch_size,
            "max_epochs": self.max_epochs,
            "patience": self.patience,
            "seed": self.seed,
            "threshold": self.threshold,
        }

    @classmethod
    def from_dict(cls, obj: Mapping) -> "HeadConfig":
        return cls(**{k: obj[k] for k in cls().to_dict() if k in obj})


@dataclass(frozen=True)
class PredictionScores:
    """Seven sigmoid outputs, indexed by intention."""

    scores: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.scores) != NUM_INTENTIONS:
            raise ValueError(f"need {NUM_INTENTIONS} scores")
        if not all(0.0 < s < 1.0 for s in self.scores):
            raise ValueError("scores must lie strictly in (0, 1)")

    def __getitem__(self, intention: Intention) -> float:
        return self.scores[int(intention)]

    def as_array(self) -> np.ndarray:
        return np.asarray(self.scores, dtype=float)


@dataclass
class HeadModel:
    """Weights plus everything needed to reproduce its inputs.

    Treat instances as immutable once trained; predict-time use is safe
    from multiple threads.
    """

    config: HeadConfig
    weights: dict[str, np.ndarray]
    standardizer: Standardizer
    provider_spec: EmbeddingProviderSpec

    def __post_init__(self) -> None:
        expected = _expected_shapes(self.config)
        if set(self.weights) != set(expected):
            raise ValueError(
                f"weight tensors {sorted(self.weights)} != expected {sorted(expected)}"
            )
        for name, shape in expected.items():
            got = self.weights[name].shape
            if got != shape:
                raise ValueError(f"{name} has shape {got}, expected {shape}")
            if not np.all(np.isfinite(self.weights[name])):
                raise ValueError(f"{name} contains non-finite values")

    # -- serialization -------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "format_version": MODEL_FORMAT_VERSION,
            "config": self.config.to_dict(),
            "weights": {k: v.tolist() for k, v in sorted(self.weights.items())},
            "standardizer": self.standardizer.to_dict(),
            "provider": self.provider_spec.to_dict(),
        }

    @classmethod
    def from_dict(cls, obj: Mapping) -> "HeadModel":
        version = obj.get("format_version")
        if version != MODEL_FORMAT_VERSION:
            raise ValueError(f"unsupported model format version: {version!r}")
        return cls(
            config=HeadConfig.from_dict(obj["config"]),
            weights={k: np.asarray(v, dtype=float) for k, v in obj["weights"].items()},
            standardizer=Standardizer.from_dict(obj["standardizer"]),
            provider_spec=EmbeddingProviderSpec.from_dict(obj["provider"]),
        )

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(self.to_dict(), handle, sort_keys=True)

    @classmethod
    def load(cls, path: str | Path) -> "HeadModel":
        with open(path, encoding="utf-8") as handle:
            return cls.from_dict(json.load(handle))


def _expected_shapes(config: HeadConfig) -> dict[str, tuple[int, ...]]:
    e, m, f = config.embedding_dim, config.merge_dim, config.fusion_dim
    shapes = {
        "w_merge": (2 * e, m),
        "b_merge": (m,),
        "w_fusion": (m + config.feature_dim, f),
        "b_fusion": (f,),
        "w_out": (f, NUM_INTENTIONS),
        "b_out": (NUM_INTENTIONS,),
    }
    if config.fine_tune_pooler:
        shapes["w_pool"] = (e, e)
        shapes["b_pool"] = (e,)
    return shapes


def initialize(
    config: HeadConfig,
    standardizer: Standardizer,
    provider_spec: EmbeddingProviderSpec,
    rng: np.random.Generator | None = None,
) -> HeadModel:
    """Seeded weight initialization: scaled Gaussians, zero biases."""

    if rng is None:
        rng = np.random.default_rng(config.seed)
    e, m, f = config.embedding_dim, config.merge_dim, config.fusion_dim
    weights: dict[str, np.ndarray] = {}
    if config.fine_tune_pooler:
        weights["w_pool"] = rng.normal(0.0, 1.0 / math.sqrt(e), size=(e, e))
        weights["b_pool"] = np.zeros(e)
    weights["w_merge"] = rng.normal(0.0, math.sqrt(2.0 / (2 * e)), size=(2 * e, m))
    weights["b_merge"] = np.zeros(m)
    weights["w_fusion"] = rng.normal(
        0.0, math.sqrt(2.0 / (m + config.feature_dim)), size=(m + config.feature_dim, f)
    )
    weights["b_fusion"] = np.zeros(f)
    weights["w_out"] = rng.normal(0.0, 1.0 / math.sqrt(f), size=(f, NUM_INTENTIONS))
    weights["b_out"] = np.zeros(NUM_INTENTIONS)
    return HeadModel(
        config=config,
        weights=weights,
        standardizer=standardizer,
        provider_spec=provider_spec,
    )


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    # Keep outputs strictly inside (0, 1) so logs stay finite.
    return np.clip(out, _PROB_CLAMP, 1.0 - _PROB_CLAMP)


@dataclass
class _ForwardCache:
    pooled_title: np.ndarray
    pooled_desc: np.ndarray
    concat: np.ndarray
    merge_pre: np.ndarray
    merged: np.ndarray
    fused_input: np.ndarray
    fusion_pre: np.ndarray
    fused: np.ndarray
    logits: np.ndarray
    probs: np.ndarray


def _forward_arrays(
    weights: Mapping[str, np.ndarray],
    config: HeadConfig,
    titles: np.ndarray,
    descs: np.ndarray,
    features: np.ndarray,
) -> _ForwardCache:
    if config.fine_tune_pooler:
        pooled_title = np.tanh(titles @ weights["w_pool"] + weights["b_pool"])
        pooled_desc = np.tanh(descs @ weights["w_pool"] + weights["b_pool"])
    else:
        pooled_title, pooled_desc = titles, descs
    concat = np.hstack([pooled_title, pooled_desc])
    merge_pre = concat @ weights["w_merge"] + weights["b_merge"]
    merged = np.maximum(merge_pre, 0.0)
    fused_input = np.hstack([merged, features])
    fusion_pre = fused_input @ weights["w_fusion"] + weights["b_fusion"]
    fused = np.maximum(fusion_pre, 0.0)
    logits = fused @ weights["w_out"] + weights["b_out"]
    return _ForwardCache(
        pooled_title=pooled_title,
        pooled_desc=pooled_desc,
        concat=concat,
        merge_pre=merge_pre,
        merged=merged,
        fused_input=fused_input,
        fusion_pre=fusion_pre,
        fused=fused,
        logits=logits,
        probs=_sigmoid(logits),
    )


def forward(
    model: HeadModel,
    title_emb: np.ndarray,
    desc_emb: np.ndarray,
    features: FeatureVector,
) -> PredictionScores:
    """Score a single post from its embeddings and standardized features."""

    e = model.config.embedding_dim
    title_emb = np.asarray(title_emb, dtype=float)
    desc_emb = np.asarray(desc_emb, dtype=float)
    if title_emb.shape != (e,):
        raise ValueError(
            f"title embedding has shape {title_emb.shape}, expected ({e},) (merge layer input)"
        )
    if desc_emb.shape != (e,):
        raise ValueError(
            f"description embedding has shape {desc_emb.shape}, expected ({e},) (merge layer input)"
        )
    feats = features.as_array()
    if feats.shape != (model.config.feature_dim,):
        raise ValueError(
            f"feature vector has shape {feats.shape}, expected "
            f"({model.config.feature_dim},) (fusion layer input)"
        )
    cache = _forward_arrays(
        model.weights,
        model.config,
        title_emb[None, :],
        desc_emb[None, :],
        feats[None, :],
    )
    return PredictionScores(scores=tuple(float(p) for p in cache.probs[0]))


def targets_from_labels(label_sets: Sequence[frozenset[Intention]]) -> np.ndarray:
    """Binary (n, 7) target matrix from intention label sets."""

    out = np.zeros((len(label_sets), NUM_INTENTIONS))
    for i, labels in enumerate(label_sets):
        if not labels:
            raise ValueError(f"sample {i} has an empty label set")
        for intention in labels:
            out[i, int(intention)] = 1.0
    return out


def _batch_loss(probs: np.ndarray, targets: np.ndarray) -> float:
    p = np.clip(probs, _PROB_CLAMP, 1.0 - _PROB_CLAMP)
    per_sample = -(targets * np.log(p) + (1.0 - targets) * np.log(1.0 - p)).sum(axis=1)
    return float(per_sample.mean())


def loss(scores: PredictionScores, target: frozenset[Intention]) -> float:
    """Summed binary cross-entropy of one prediction against its labels."""

    probs = scores.as_array()[None, :]
    return _batch_loss(probs, targets_from_labels([target]))


@dataclass(frozen=True)
class EncodedDataset:
    """Embeddings, standardized features, and binary targets, row-aligned."""

    titles: np.ndarray
    descriptions: np.ndarray
    features: np.ndarray
    targets: np.ndarray

    def __post_init__(self) -> None:
        n = self.titles.shape[0]
        for name in ("descriptions", "features", "targets"):
            if getattr(self, name).shape[0] != n:
                raise ValueError(f"{name} row count differs from titles")
        if self.targets.ndim != 2 or self.targets.shape[1] != NUM_INTENTIONS:
            raise ValueError(f"targets must be (n, {NUM_INTENTIONS})")

    def __len__(self) -> int:
        return self.titles.shape[0]

    def take(self, indices: np.ndarray) -> "EncodedDataset":
        return EncodedDataset(
            titles=self.titles[indices],
            descriptions=self.descriptions[indices],
            features=self.features[indices],
            targets=self.targets[indices],
        )


def backward(
    model: HeadModel, batch: EncodedDataset
) -> tuple[float, dict[str, np.ndarray]]:
    """Batch loss and its exact gradients for every trainable tensor."""

    weights, config = model.weights, model.config
    cache = _forward_arrays(
        weights, config, batch.titles, batch.descriptions, batch.features
    )
    n = len(batch)
    value = _batch_loss(cache.probs, batch.targets)

    grads: dict[str, np.ndarray] = {}
    # d(batch loss)/d(logits) of BCE(sigmoid) collapses to (p - y) / n.
    d_logits = (cache.probs - batch.targets) / n
    grads["w_out"] = cache.fused.T @ d_logits
    grads["b_out"] = d_logits.sum(axis=0)

    d_fused = d_logits @ weights["w_out"].T
    d_fused = np.where(cache.fusion_pre > 0, d_fused, 0.0)
    grads["w_fusion"] = cache.fused_input.T @ d_fused
    grads["b_fusion"] = d_fused.sum(axis=0)

    d_fused_input = d_fused @ weights["w_fusion"].T
    d_merged = d_fused_input[:, : config.merge_dim]
    d_merged = np.where(cache.merge_pre > 0, d_merged, 0.0)
    grads["w_merge"] = cache.concat.T @ d_merged
    grads["b_merge"] = d_merged.sum(axis=0)

    if config.fine_tune_pooler:
        d_concat = d_merged @ weights["w_merge"].T
        e = config.embedding_dim
        d_title = d_concat[:, :e] * (1.0 - cache.pooled_title**2)
        d_desc = d_concat[:, e:] * (1.0 - cache.pooled_desc**2)
        grads["w_pool"] = batch.titles.T @ d_title + batch.descriptions.T @ d_desc
        grads["b_pool"] = d_title.sum(axis=0) + d_desc.sum(axis=0)

    return value, grads


def evaluate_loss(model: HeadModel, data: EncodedDataset) -> float:
    cache = _forward_arrays(
        model.weights, model.config, data.titles, data.descriptions, data.features
    )
    return _batch_loss(cache.probs, data.targets)


def score_batch(model: HeadModel, data: EncodedDataset) -> np.ndarray:
    """Sigmoid scores for every row, shape (n, 7)."""

    cache = _forward_arrays(
        model.weights, model.config, data.titles, data.descriptions, data.features
    )
    return cache.probs


@dataclass(frozen=True)
class TrainResult:
    model: HeadModel
    log: tuple[dict, ...]
    best_epoch: int
    best_validation_loss: float


def train(
    config: HeadConfig,
    train_set: EncodedDataset,
    validation_set: EncodedDataset,
    standardizer: Standardizer,
    provider_spec: EmbeddingProviderSpec,
) -> TrainResult:
    """Adam training with per-epoch seeded shuffling and early stopping.

    Stops after `patience` epochs without a validation-loss improvement
    (or at max_epochs) and returns the snapshot with the best validation
    loss. Deterministic for a fixed config and data.
    """

    if len(train_set) == 0 or len(validation_set) == 0:
        raise ValueError("training and validation sets must be non-empty")
    rng = np.random.default_rng(config.seed)
    model = initialize(config, standardizer, provider_spec, rng=rng)

    lr_for = {
        name: config.learning_rate_pooler if name.endswith("_pool") else config.learning_rate_head
        for name in model.weights
    }
    adam_m = {k: np.zeros_like(v) for k, v in model.weights.items()}
    adam_v = {k: np.zeros_like(v) for k, v in model.weights.items()}
    step = 0

    n = len(train_set)
    best_loss = math.inf
    best_weights = {k: v.copy() for k, v in model.weights.items()}
    best_epoch = 0
    stale = 0
    log: list[dict] = []

    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            batch = train_set.take(order[start : start + config.batch_size])
            value, grads = backward(model, batch)
            if not math.isfinite(value):
                raise ValueError(
                    f"non-finite training loss at epoch {epoch}; "
                    "the learning rate is probably too high"
                )
            total += value * len(batch)
            step += 1
            bias1 = 1.0 - _ADAM_BETA1**step
            bias2 = 1.0 - _ADAM_BETA2**step
            for name, grad in grads.items():
                adam_m[name] = _ADAM_BETA1 * adam_m[name] + (1 - _ADAM_BETA1) * grad
                adam_v[name] = _ADAM_BETA2 * adam_v[name] + (1 - _ADAM_BETA2) * grad**2
                update = (adam_m[name] / bias1) / (
                    np.sqrt(adam_v[name] / bias2) + _ADAM_EPS
                )
                model.weights[name] = model.weights[name] - lr_for[name] * update

        train_loss = total / n
        val_loss = evaluate_loss(model, validation_set)
        if not math.isfinite(val_loss):
            raise ValueError(
                f"non-finite validation loss at epoch {epoch}; "
                "the learning rate is probably too high"
            )
        log.append(
            {"epoch": epoch, "train_loss": train_loss, "validation_loss": val_loss}
        )
        if val_loss < best_loss:
            best_loss = val_loss
            best_weights = {k: v.copy() for k, v in model.weights.items()}
            best_epoch = epoch
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                break

    final = HeadModel(
        config=config,
        weights=best_weights,
        standardizer=standardizer,
        provider_spec=provider_spec,
    )
    return TrainResult(
        model=final,
        log=tuple(log),
        best_epoch=best_epoch,
        best_validation_loss=best_loss,
    )


def refine(
    scores: PredictionScores | np.ndarray, threshold: float = 0.5
) -> frozenset[Intention]:
    """Turn sigmoid scores into the final label set.

    Labels above the threshold are kept; an empty set falls back to the
    argmax (ties resolve to the lowest index); a set containing `other`
    collapses to just `other`.
    """

    probs = scores.as_array() if isinstance(scores, PredictionScores) else np.asarray(scores)
    selected = {Intention(c) for c in range(NUM_INTENTIONS) if probs[c] > threshold}
    if not selected:
        selected = {Intention(int(np.argmax(probs)))}
    if Intention.OTHER in selected:
        selected = {Intention.OTHER}
    return frozenset(selected)
