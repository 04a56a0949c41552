"""Textual features: word count, readability indices, sentiment, and the
assembled 14-dimensional feature vector.

The non-embedding features concatenate the six code-block content
probabilities with eight text statistics computed on the cleaned
description: word count, three readability grades (Flesch-Kincaid, ARI,
SMOG), and four sentiment components from a lexicon-and-rule scorer.
Each dimension is z-scored with statistics fit on the training split.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .codeblock import ContentCategoryDistribution

FEATURE_DIM = 14

# One or more terminators count once; they must precede whitespace or the
# end of text so decimals like "3.14" do not split sentences.
_SENTENCE_BREAK_RE = re.compile(r"[.?!]+(?=\s|$)")
_VOWEL_RUN_RE = re.compile(r"[aeiouy]+")

_NEGATIONS = frozenset(
    {
        "not",
        "no",
        "never",
        "none",
        "neither",
        "nor",
        "cannot",
        "can't",
        "cant",
        "don't",
        "dont",
        "doesn't",
        "doesnt",
        "didn't",
        "didnt",
        "isn't",
        "isnt",
        "wasn't",
        "wasnt",
        "aren't",
        "arent",
        "won't",
        "wont",
        "wouldn't",
        "wouldnt",
        "couldn't",
        "couldnt",
        "shouldn't",
        "shouldnt",
        "hardly",
        "without",
    }
)
_NEGATION_WINDOW = 3


def count_syllables(word: str) -> int:
    """Heuristic syllable count: vowel-group runs (a e i o u y) over the
    word's letters, minus a trailing silent "e", floored at 1."""

    letters = "".join(ch for ch in word.lower() if ch.isalpha())
    groups = len(_VOWEL_RUN_RE.findall(letters))
    if letters.endswith("e"):
        groups -= 1
    return max(1, groups)


def count_sentences(text: str) -> int:
    """Number of sentence segments; any text has at least one."""

    segments = _SENTENCE_BREAK_RE.split(text)
    n = sum(1 for seg in segments if seg.strip())
    return max(1, n)


def readability(text: str) -> tuple[float, float, float]:
    """Flesch-Kincaid grade, ARI, and SMOG for a text.

    Letters are alphanumeric characters; words are whitespace tokens;
    polysyllables are words of three or more syllables. Empty (or
    whitespace-only) text yields (0, 0, 0).
    """

    words = text.split()
    if not words:
        return (0.0, 0.0, 0.0)
    n_words = len(words)
    n_sentences = count_sentences(text)
    n_letters = sum(1 for tok in words for ch in tok if ch.isalnum())
    syllables = [count_syllables(tok) for tok in words]
    n_syllables = sum(syllables)
    n_poly = sum(1 for s in syllables if s >= 3)

    fk = 0.39 * (n_words / n_sentences) + 11.8 * (n_syllables / n_words) - 15.59
    ari = 4.71 * (n_letters / n_words) + 0.5 * (n_words / n_sentences) - 21.43
    smog = 1.0430 * math.sqrt(n_poly * 30 / n_sentences) + 3.1291
    return (fk, ari, smog)


def _lexicon_key(token: str) -> str:
    # Strip surrounding punctuation but keep internal apostrophes so
    # contractions like "don't" survive.
    lowered = token.lower()
    start, end = 0, len(lowered)
    while start < end and not (lowered[start].isalnum() or lowered[start] == "'"):
        start += 1
    while end > start and not (lowered[end - 1].isalnum() or lowered[end - 1] == "'"):
        end -= 1
    return lowered[start:end]


def sentiment(
    text: str, lexicon: Mapping[str, float]
) -> tuple[float, float, float, float]:
    """Lexicon-and-rule sentiment: (pos, neu, neg, compound).

    Each token's valence comes from the lexicon (0 when absent) and flips
    sign when a negation word occurs within the three preceding tokens.
    pos and neg are the shares of positive and negative valence mass,
    with unmatched tokens counting one unit of neutral mass each;
    compound squashes the raw sum s to s / sqrt(s^2 + 15). Empty text is
    (0, 1, 0, 0).
    """

    tokens = [_lexicon_key(tok) for tok in text.split()]
    if not tokens:
        return (0.0, 1.0, 0.0, 0.0)
    pos_mass = 0.0
    neg_mass = 0.0
    neu_mass = 0.0
    total_valence = 0.0
    for i, tok in enumerate(tokens):
        valence = lexicon.get(tok, 0.0)
        if valence != 0.0:
            window = tokens[max(0, i - _NEGATION_WINDOW) : i]
            if any(w in _NEGATIONS for w in window):
                valence = -valence
        if valence > 0:
            pos_mass += valence
        elif valence < 0:
            neg_mass += -valence
        else:
            neu_mass += 1.0
        total_valence += valence
    total = pos_mass + neg_mass + neu_mass
    compound = total_valence / math.sqrt(total_valence**2 + 15.0)
    return (pos_mass / total, neu_mass / total, neg_mass / total, compound)


def parse_lexicon(lines: Iterable[str]) -> dict[str, float]:
    """Parse "word<TAB>valence" lines; '#' starts a comment line."""

    lexicon: dict[str, float] = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise ValueError(f"lexicon line {lineno}: expected 'word<TAB>valence'")
        word, valence_str = parts
        try:
            valence = float(valence_str)
        except ValueError:
            raise ValueError(f"lexicon line {lineno}: bad valence {valence_str!r}") from None
        if not -4.0 <= valence <= 4.0:
            raise ValueError(f"lexicon line {lineno}: valence outside [-4, 4]")
        lexicon[word.lower()] = valence
    return lexicon


def load_lexicon(path: str | Path) -> dict[str, float]:
    with open(path, encoding="utf-8") as handle:
        return parse_lexicon(handle)


def load_default_lexicon() -> dict[str, float]:
    """The lexicon bundled with the package."""

    text = (
        resources.files("intent_miner")
        .joinpath("data/sentiment_lexicon.txt")
        .read_text(encoding="utf-8")
    )
    return parse_lexicon(text.splitlines())


@dataclass(frozen=True)
class TextualFeatures:
    """The eight per-post text statistics, in feature-vector order."""

    word_count: int
    flesch_kincaid: float
    ari: float
    smog: float
    sentiment_pos: float
    sentiment_neu: float
    sentiment_neg: float
    sentiment_compound: float

    def __post_init__(self) -> None:
        values = (
            self.word_count,
            self.flesch_kincaid,
            self.ari,
            self.smog,
            self.sentiment_pos,
            self.sentiment_neu,
            self.sentiment_neg,
            self.sentiment_compound,
        )
        if not all(math.isfinite(v) for v in values):
            raise ValueError("textual features must be finite")
        if self.word_count < 0:
            raise ValueError("word count must be >= 0")
        shares = self.sentiment_pos + self.sentiment_neu + self.sentiment_neg
        if abs(shares - 1.0) > 1e-6:
            raise ValueError("sentiment shares must sum to 1")

    def as_tuple(self) -> tuple[float, ...]:
        return (
            float(self.word_count),
            self.flesch_kincaid,
            self.ari,
            self.smog,
            self.sentiment_pos,
            self.sentiment_neu,
            self.sentiment_neg,
            self.sentiment_compound,
        )


def compute_textual(text: str, lexicon: Mapping[str, float]) -> TextualFeatures:
    """All eight text statistics for a cleaned description."""

    fk, ari, smog = readability(text)
    pos, neu, neg, compound = sentiment(text, lexicon)
    return TextualFeatures(
        word_count=len(text.split()),
        flesch_kincaid=fk,
        ari=ari,
        smog=smog,
        sentiment_pos=pos,
        sentiment_neu=neu,
        sentiment_neg=neg,
        sentiment_compound=compound,
    )


@dataclass(frozen=True)
class Standardizer:
    """Per-dimension z-scoring parameters fit on the training split.

    Dimensions whose training standard deviation is zero pass raw values
    through unchanged.
    """

    mean: tuple[float, ...]
    std: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.mean) != len(self.std):
            raise ValueError("mean/std length mismatch")
        if any(s < 0 for s in self.std):
            raise ValueError("standard deviations must be >= 0")

    @classmethod
    def fit(cls, rows: np.ndarray) -> "Standardizer":
        rows = np.asarray(rows, dtype=float)
        if rows.ndim != 2 or rows.shape[0] == 0:
            raise ValueError("need a non-empty 2-d array of feature rows")
        return cls(
            mean=tuple(float(v) for v in rows.mean(axis=0)),
            std=tuple(float(v) for v in rows.std(axis=0)),
        )

    @classmethod
    def identity(cls, dim: int) -> "Standardizer":
        return cls(mean=(0.0,) * dim, std=(1.0,) * dim)

    def transform(self, values: Sequence[float]) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        if values.shape != (len(self.mean),):
            raise ValueError("dimension mismatch with fitted parameters")
        mean = np.asarray(self.mean)
        std = np.asarray(self.std)
        out = values.copy()
        scale = std > 0
        out[scale] = (values[scale] - mean[scale]) / std[scale]
        return out

    def to_dict(self) -> dict:
        return {"mean": list(self.mean), "std": list(self.std)}

    @classmethod
    def from_dict(cls, obj: dict) -> "Standardizer":
        return cls(
            mean=tuple(float(v) for v in obj["mean"]),
            std=tuple(float(v) for v in obj["std"]),
        )


@dataclass(frozen=True)
class FeatureVector:
    """The standardized 14-dimensional auxiliary feature vector."""

    values: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.values) != FEATURE_DIM:
            raise ValueError(f"feature vector must have {FEATURE_DIM} entries")
        if not all(math.isfinite(v) for v in self.values):
            raise ValueError("feature values must be finite")

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)


def raw_features(
    dist: ContentCategoryDistribution, tf: TextualFeatures
) -> np.ndarray:
    """Unstandardized 14-vector: 6 content probabilities then 8 text stats."""

    return np.asarray(dist.probs + tf.as_tuple(), dtype=float)


def assemble_features(
    dist: ContentCategoryDistribution,
    tf: TextualFeatures,
    standardizer: Standardizer,
) -> FeatureVector:
    """Concatenate and z-score the auxiliary features, in fixed order."""

    scaled = standardizer.transform(raw_features(dist, tf))
    return FeatureVector(values=tuple(float(v) for v in scaled))
