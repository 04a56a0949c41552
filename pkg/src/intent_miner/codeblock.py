"""Code-block content classification.

A multinomial naive Bayes classifier over TF-IDF'd code tokens assigns
each post's code blocks a probability distribution over six content
categories (natural language, code, error message, config, command line,
others). That distribution is consumed downstream as a feature. Training
rebalances minority categories with SMOTE and tunes the smoothing
parameter by grid search on a validation split.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import NUM_CONTENT_CATEGORIES, ContentCategory

# Lexeme classes: identifiers, numbers, single brackets, operator runs.
_TOKEN_RE = re.compile(
    r"[A-Za-z_][A-Za-z0-9_]*"  # identifier
    r"|\d+(?:\.\d+)?"  # number
    r"|[()\[\]{}]"  # individual bracket
    r"|[^\w\s()\[\]{}]+"  # operator / punctuation run
)

SparseVector = dict[int, float]


def lex_code(text: str) -> list[str]:
    """Tokenize code-block text into identifiers, numbers, brackets and
    operator runs; whitespace is discarded."""

    return _TOKEN_RE.findall(text)


@dataclass
class TfidfModel:
    """Vocabulary and smoothed inverse document frequencies."""

    vocabulary: dict[str, int]
    idf: np.ndarray
    document_count: int

    @property
    def vocab_size(self) -> int:
        return len(self.vocabulary)


def fit_tfidf(corpus: Sequence[Sequence[str]]) -> TfidfModel:
    """Fit vocabulary and idf weights on a tokenized corpus.

    idf(t) = ln((1 + N) / (1 + df(t))) + 1, which keeps every weight
    finite and positive even for tokens present in all documents.
    """

    if not corpus:
        raise ValueError("tf-idf corpus must be non-empty")
    doc_freq: dict[str, int] = {}
    for tokens in corpus:
        for tok in set(tokens):
            doc_freq[tok] = doc_freq.get(tok, 0) + 1
    vocabulary = {tok: i for i, tok in enumerate(sorted(doc_freq))}
    n_docs = len(corpus)
    idf = np.empty(len(vocabulary))
    for tok, col in vocabulary.items():
        idf[col] = math.log((1 + n_docs) / (1 + doc_freq[tok])) + 1.0
    return TfidfModel(vocabulary=vocabulary, idf=idf, document_count=n_docs)


def transform(model: TfidfModel, tokens: Iterable[str]) -> SparseVector:
    """Map tokens to an L2-normalized sparse tf-idf vector.

    Out-of-vocabulary tokens contribute nothing; a stream with no known
    tokens yields the zero vector.
    """

    counts: dict[int, int] = {}
    for tok in tokens:
        col = model.vocabulary.get(tok)
        if col is not None:
            counts[col] = counts.get(col, 0) + 1
    vec = {col: n * model.idf[col] for col, n in counts.items()}
    norm = math.sqrt(sum(v * v for v in vec.values()))
    if norm > 0:
        vec = {col: v / norm for col, v in vec.items()}
    return vec


def densify(vectors: Sequence[SparseVector], dim: int) -> np.ndarray:
    out = np.zeros((len(vectors), dim))
    for i, vec in enumerate(vectors):
        for col, val in vec.items():
            out[i, col] = val
    return out


def sparsify(row: np.ndarray) -> SparseVector:
    return {int(col): float(row[col]) for col in np.nonzero(row)[0]}


def smote(
    samples: np.ndarray, k: int, amount: int, rng_seed: int
) -> np.ndarray:
    """Generate synthetic minority-class points by segment interpolation.

    Each synthetic point is x + t * (x_nn - x) for a uniform t in [0, 1],
    where x is a uniformly drawn class member and x_nn one of its k
    nearest Euclidean neighbors within the class (k is capped at n - 1).
    Deterministic for a fixed seed.
    """

    samples = np.asarray(samples, dtype=float)
    n = samples.shape[0]
    if n < 2:
        raise ValueError("SMOTE needs at least 2 samples to interpolate between")
    if k < 1:
        raise ValueError("neighbor count k must be >= 1")
    k = min(k, n - 1)

    # Pairwise distances; argsort with self excluded gives each row's
    # neighbor candidates in a deterministic order.
    sq = np.sum(samples**2, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (samples @ samples.T)
    np.fill_diagonal(d2, np.inf)
    neighbor_idx = np.argsort(d2, axis=1, kind="stable")[:, :k]

    rng = np.random.default_rng(rng_seed)
    out = np.empty((amount, samples.shape[1]))
    for s in range(amount):
        base = int(rng.integers(n))
        nn = int(neighbor_idx[base, int(rng.integers(k))])
        t = float(rng.random())
        out[s] = samples[base] + t * (samples[nn] - samples[base])
    return out


@dataclass
class NaiveBayesModel:
    """Multinomial naive Bayes with additive smoothing, in log space."""

    class_log_priors: np.ndarray
    feature_log_likelihoods: np.ndarray  # shape (n_classes, vocab_size)
    alpha: float

    @property
    def n_classes(self) -> int:
        return len(self.class_log_priors)


def train_nb(
    X: Sequence[SparseVector],
    y: Sequence[int],
    alpha: float,
    n_classes: int,
    vocab_size: int,
) -> NaiveBayesModel:
    """Fit priors and smoothed per-class feature likelihoods.

    Every class index in [0, n_classes) must occur in y; feature weights
    may be fractional (tf-idf mass counts as evidence mass).
    """

    if alpha <= 0:
        raise ValueError("smoothing alpha must be > 0")
    if len(X) != len(y):
        raise ValueError("X and y length mismatch")
    class_counts = np.zeros(n_classes)
    feature_mass = np.zeros((n_classes, vocab_size))
    for vec, cls in zip(X, y):
        class_counts[cls] += 1
        for col, val in vec.items():
            feature_mass[cls, col] += val
    for cls in range(n_classes):
        if class_counts[cls] == 0:
            raise ValueError(f"class {cls} has no training samples")
    log_priors = np.log(class_counts / class_counts.sum())
    totals = feature_mass.sum(axis=1, keepdims=True)
    log_lik = np.log(feature_mass + alpha) - np.log(totals + alpha * vocab_size)
    return NaiveBayesModel(
        class_log_priors=log_priors, feature_log_likelihoods=log_lik, alpha=alpha
    )


def log_posterior(model: NaiveBayesModel, vec: SparseVector) -> np.ndarray:
    """Unnormalized class log-posteriors for a tf-idf vector."""

    scores = model.class_log_priors.copy()
    for col, val in vec.items():
        scores += val * model.feature_log_likelihoods[:, col]
    return scores


def predict_proba(model: NaiveBayesModel, vec: SparseVector) -> np.ndarray:
    scores = log_posterior(model, vec)
    scores -= scores.max()  # log-sum-exp shift
    probs = np.exp(scores)
    return probs / probs.sum()


@dataclass(frozen=True)
class ContentCategoryDistribution:
    """Probabilities over the six content categories (sum to 1)."""

    probs: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.probs) != NUM_CONTENT_CATEGORIES:
            raise ValueError("distribution must have 6 entries")
        if not all(0.0 <= p <= 1.0 for p in self.probs):
            raise ValueError("probabilities must lie in [0, 1]")
        if abs(sum(self.probs) - 1.0) > 1e-9:
            raise ValueError("probabilities must sum to 1")

    def __getitem__(self, category: ContentCategory) -> float:
        return self.probs[int(category)]


NO_CODE_DISTRIBUTION = ContentCategoryDistribution(
    probs=(1.0, 0.0, 0.0, 0.0, 0.0, 0.0)
)


def predict_content(
    nb: NaiveBayesModel,
    tfidf: TfidfModel,
    code_blocks: str | Sequence[str],
) -> ContentCategoryDistribution:
    """Class posterior over content categories for a post's code blocks.

    Multiple blocks are concatenated with newlines and classified as one
    document. A post with no code blocks gets the degenerate
    natural-language distribution so the feature always sums to 1.
    """

    if isinstance(code_blocks, str):
        text = code_blocks
    else:
        if not code_blocks:
            return NO_CODE_DISTRIBUTION
        text = "\n".join(code_blocks)
    if nb.n_classes != NUM_CONTENT_CATEGORIES:
        raise ValueError("content model must cover all 6 categories")
    probs = predict_proba(nb, transform(tfidf, lex_code(text)))
    return ContentCategoryDistribution(probs=tuple(float(p) for p in probs))


def grid_search_alpha(
    train: tuple[Sequence[SparseVector], Sequence[int]],
    validation: tuple[Sequence[SparseVector], Sequence[frozenset[int]]],
    grid: Sequence[float],
    n_classes: int,
    vocab_size: int,
) -> float:
    """Pick the smoothing value maximizing validation accuracy.

    A validation sample counts as correct when at least one class with
    posterior above 0.5 is among its ground-truth categories. Ties are
    broken toward the smaller alpha.
    """

    if not grid:
        raise ValueError("alpha grid must be non-empty")
    X_train, y_train = train
    X_val, val_labels = validation
    best_alpha = None
    best_acc = -1.0
    for alpha in sorted(grid):
        model = train_nb(X_train, y_train, alpha, n_classes, vocab_size)
        acc = threshold_accuracy(model, X_val, val_labels)
        if acc > best_acc:
            best_acc = acc
            best_alpha = alpha
    return best_alpha


def threshold_accuracy(
    model: NaiveBayesModel,
    X: Sequence[SparseVector],
    label_sets: Sequence[frozenset[int]],
    threshold: float = 0.5,
) -> float:
    """Fraction of samples whose above-threshold classes hit the truth."""

    if not X:
        return 0.0
    hits = 0
    for vec, truth in zip(X, label_sets):
        probs = predict_proba(model, vec)
        predicted = {c for c in range(model.n_classes) if probs[c] > threshold}
        if predicted & set(truth):
            hits += 1
    return hits / len(X)


# --- corpus I/O and the end-to-end training pipeline ---------------------

DEFAULT_ALPHA_GRID = (0.01, 0.1, 0.5, 1.0, 2.0)


@dataclass(frozen=True)
class CodeBlockRecord:
    text: str
    categories: frozenset[ContentCategory]

    def __post_init__(self) -> None:
        if not self.categories:
            raise ValueError("code-block record needs at least one category")

    @property
    def primary(self) -> ContentCategory:
        return min(self.categories)


def load_codeblock_corpus(path: str | Path) -> list[CodeBlockRecord]:
    """Read a JSONL corpus of {"text": ..., "categories": [...]} records."""

    records = []
    with open(path, encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            if not raw.strip():
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}: line {lineno}: malformed JSON ({exc.msg})") from None
            cats = frozenset(ContentCategory.from_code(c) for c in obj["categories"])
            records.append(CodeBlockRecord(text=obj["text"], categories=cats))
    return records


@dataclass
class CodeBlockClassifier:
    """Trained tf-idf + naive Bayes bundle with JSON serialization."""

    tfidf: TfidfModel
    nb: NaiveBayesModel

    def distribution(self, code_blocks: str | Sequence[str]) -> ContentCategoryDistribution:
        return predict_content(self.nb, self.tfidf, code_blocks)

    def to_dict(self) -> dict:
        return {
            "format_version": 1,
            "vocabulary": self.tfidf.vocabulary,
            "idf": self.tfidf.idf.tolist(),
            "document_count": self.tfidf.document_count,
            "class_log_priors": self.nb.class_log_priors.tolist(),
            "feature_log_likelihoods": self.nb.feature_log_likelihoods.tolist(),
            "alpha": self.nb.alpha,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "CodeBlockClassifier":
        tfidf = TfidfModel(
            vocabulary={str(k): int(v) for k, v in obj["vocabulary"].items()},
            idf=np.asarray(obj["idf"], dtype=float),
            document_count=int(obj["document_count"]),
        )
        nb = NaiveBayesModel(
            class_log_priors=np.asarray(obj["class_log_priors"], dtype=float),
            feature_log_likelihoods=np.asarray(obj["feature_log_likelihoods"], dtype=float),
            alpha=float(obj["alpha"]),
        )
        return cls(tfidf=tfidf, nb=nb)

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(self.to_dict(), handle, sort_keys=True)

    @classmethod
    def load(cls, path: str | Path) -> "CodeBlockClassifier":
        with open(path, encoding="utf-8") as handle:
            return cls.from_dict(json.load(handle))


def train_codeblock_classifier(
    records: Sequence[CodeBlockRecord],
    seed: int,
    alpha_grid: Sequence[float] = DEFAULT_ALPHA_GRID,
    smote_k: int = 5,
) -> tuple[CodeBlockClassifier, dict]:
    """Train on an 80/10/10 split with SMOTE rebalancing of the training
    portion and a grid-searched smoothing parameter.

    Multi-category records train on their lowest-indexed category but
    count as correct if any of their categories is predicted. Returns the
    classifier and a report with split sizes, the chosen alpha, and test
    accuracy under the above-0.5 rule.
    """

    if len(records) < 10:
        raise ValueError("corpus too small to split 80/10/10")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(records))
    n_train = int(len(records) * 0.8)
    n_val = int(len(records) * 0.1)
    idx_train = order[:n_train]
    idx_val = order[n_train : n_train + n_val]
    idx_test = order[n_train + n_val :]

    def subset(indices):
        return [records[i] for i in indices]

    train_recs, val_recs, test_recs = subset(idx_train), subset(idx_val), subset(idx_test)

    token_corpus = [lex_code(r.text) for r in train_recs]
    tfidf = fit_tfidf(token_corpus)
    X_train = [transform(tfidf, toks) for toks in token_corpus]
    y_train = [int(r.primary) for r in train_recs]
    for cat in ContentCategory:
        if int(cat) not in y_train:
            raise ValueError(f"training split lacks category {cat.code!r}")

    X_train, y_train = _rebalance(X_train, y_train, tfidf.vocab_size, smote_k, seed)

    def eval_split(recs):
        X = [transform(tfidf, lex_code(r.text)) for r in recs]
        labels = [frozenset(int(c) for c in r.categories) for r in recs]
        return X, labels

    X_val, val_labels = eval_split(val_recs)
    best_alpha = grid_search_alpha(
        (X_train, y_train),
        (X_val, val_labels),
        alpha_grid,
        NUM_CONTENT_CATEGORIES,
        tfidf.vocab_size,
    )
    nb = train_nb(X_train, y_train, best_alpha, NUM_CONTENT_CATEGORIES, tfidf.vocab_size)
    clf = CodeBlockClassifier(tfidf=tfidf, nb=nb)

    X_test, test_labels = eval_split(test_recs)
    report = {
        "n_train": len(train_recs),
        "n_validation": len(val_recs),
        "n_test": len(test_recs),
        "n_train_after_resampling": len(y_train),
        "alpha": best_alpha,
        "validation_accuracy": threshold_accuracy(nb, X_val, val_labels),
        "test_accuracy": threshold_accuracy(nb, X_test, test_labels),
    }
    return clf, report


def _rebalance(
    X: list[SparseVector],
    y: list[int],
    vocab_size: int,
    smote_k: int,
    seed: int,
) -> tuple[list[SparseVector], list[int]]:
    """Oversample every minority class up to the majority count.

    Classes with a single sample cannot be interpolated and are left
    untouched.
    """

    counts: dict[int, int] = {}
    for cls in y:
        counts[cls] = counts.get(cls, 0) + 1
    target = max(counts.values())
    X_out = list(X)
    y_out = list(y)
    for cls in sorted(counts):
        deficit = target - counts[cls]
        if deficit <= 0 or counts[cls] < 2:
            continue
        members = densify([x for x, c in zip(X, y) if c == cls], vocab_size)
        synth = smote(members, smote_k, deficit, rng_seed=seed + cls)
        for row in synth:
            X_out.append(sparsify(row))
            y_out.append(cls)
    return X_out, y_out
