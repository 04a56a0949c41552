"""End-to-end glue: turn posts into model inputs and bundle everything a
prediction needs into one self-contained artifact.

The feature side composes preprocessing, the code-block content
classifier, and the textual features into the 14-dimensional auxiliary
vector; the artifact side pairs a trained head with the content
classifier and sentiment lexicon it was built with, so a single JSON file
suffices to score new posts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .codeblock import CodeBlockClassifier
from .core import AnnotatedPost, Intention, Post
from .embedding import EmbeddingProvider, EmbeddingProviderSpec, make_provider
from .features import (
    FEATURE_DIM,
    FeatureVector,
    Standardizer,
    compute_textual,
    raw_features,
)
from .head import (
    EncodedDataset,
    HeadConfig,
    HeadModel,
    PredictionScores,
    TrainResult,
    forward,
    refine,
    targets_from_labels,
    train,
)
from .preprocess import CleanPost, clean

PIPELINE_FORMAT_VERSION = 1


def raw_feature_matrix(
    cleaned: Sequence[CleanPost],
    content_model: CodeBlockClassifier,
    lexicon: Mapping[str, float],
) -> np.ndarray:
    """Unstandardized (n, 14) auxiliary features for cleaned posts."""

    rows = np.empty((len(cleaned), FEATURE_DIM))
    for i, post in enumerate(cleaned):
        dist = content_model.distribution(list(post.code_blocks))
        textual = compute_textual(post.description_text, lexicon)
        rows[i] = raw_features(dist, textual)
    return rows


def embed_posts(
    cleaned: Sequence[CleanPost], provider: EmbeddingProvider
) -> tuple[np.ndarray, np.ndarray]:
    """Title and description embedding matrices, row-aligned with input."""

    titles = provider.embed_batch([post.title_text for post in cleaned])
    descs = provider.embed_batch([post.description_text for post in cleaned])
    return np.array(titles), np.array(descs)


def encode_dataset(
    titles: np.ndarray,
    descs: np.ndarray,
    raw_feats: np.ndarray,
    labels: Sequence[frozenset[Intention]],
    standardizer: Standardizer,
) -> EncodedDataset:
    """Standardize features and pack arrays for the head."""

    features = np.vstack([standardizer.transform(row) for row in raw_feats])
    return EncodedDataset(
        titles=titles,
        descriptions=descs,
        features=features,
        targets=targets_from_labels(labels),
    )


def train_head_on_posts(
    train_records: Sequence[AnnotatedPost],
    validation_records: Sequence[AnnotatedPost],
    config: HeadConfig,
    provider: EmbeddingProvider,
    provider_spec: EmbeddingProviderSpec,
    content_model: CodeBlockClassifier,
    lexicon: Mapping[str, float],
) -> TrainResult:
    """Fit the standardizer on all non-test posts (training plus
    validation), encode both splits, and train the head."""

    cleaned_train = [clean(r.post) for r in train_records]
    cleaned_val = [clean(r.post) for r in validation_records]
    raw_train = raw_feature_matrix(cleaned_train, content_model, lexicon)
    raw_val = raw_feature_matrix(cleaned_val, content_model, lexicon)
    standardizer = Standardizer.fit(np.vstack([raw_train, raw_val]))
    t_train, d_train = embed_posts(cleaned_train, provider)
    t_val, d_val = embed_posts(cleaned_val, provider)
    encoded_train = encode_dataset(
        t_train, d_train, raw_train, [r.labels for r in train_records], standardizer
    )
    encoded_val = encode_dataset(
        t_val, d_val, raw_val, [r.labels for r in validation_records], standardizer
    )
    return train(config, encoded_train, encoded_val, standardizer, provider_spec)


@dataclass
class PipelineModel:
    """A trained head bundled with its content classifier and lexicon.

    Everything a prediction needs except the embedding provider, which is
    reconstructed from the stored provider spec (or passed explicitly,
    e.g. a connected sidecar client).
    """

    head: HeadModel
    content_model: CodeBlockClassifier
    lexicon: dict[str, float]

    def feature_vector(self, cleaned: CleanPost) -> FeatureVector:
        dist = self.content_model.distribution(list(cleaned.code_blocks))
        textual = compute_textual(cleaned.description_text, self.lexicon)
        scaled = self.head.standardizer.transform(raw_features(dist, textual))
        return FeatureVector(values=tuple(float(v) for v in scaled))

    def predict_clean(
        self, cleaned: CleanPost, provider: EmbeddingProvider
    ) -> tuple[PredictionScores, frozenset[Intention]]:
        title_emb = provider.embed(cleaned.title_text)
        desc_emb = provider.embed(cleaned.description_text)
        scores = forward(self.head, title_emb, desc_emb, self.feature_vector(cleaned))
        return scores, refine(scores, self.head.config.threshold)

    def predict(
        self, post: Post, provider: EmbeddingProvider | None = None
    ) -> tuple[PredictionScores, frozenset[Intention]]:
        if provider is None:
            provider = make_provider(self.head.provider_spec)
        return self.predict_clean(clean(post), provider)

    # -- serialization -------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "format_version": PIPELINE_FORMAT_VERSION,
            "head": self.head.to_dict(),
            "codeblock": self.content_model.to_dict(),
            "lexicon": self.lexicon,
        }

    @classmethod
    def from_dict(cls, obj: Mapping) -> "PipelineModel":
        version = obj.get("format_version")
        if version != PIPELINE_FORMAT_VERSION:
            raise ValueError(f"unsupported pipeline format version: {version!r}")
        return cls(
            head=HeadModel.from_dict(obj["head"]),
            content_model=CodeBlockClassifier.from_dict(obj["codeblock"]),
            lexicon={str(k): float(v) for k, v in obj["lexicon"].items()},
        )

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(self.to_dict(), handle, sort_keys=True)

    @classmethod
    def load(cls, path: str | Path) -> "PipelineModel":
        with open(path, encoding="utf-8") as handle:
            return cls.from_dict(json.load(handle))
