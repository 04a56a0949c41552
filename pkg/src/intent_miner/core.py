"""Domain types, canonical label vocabularies, and dataset I/O.

The seven intention categories and six code-block content categories use
fixed, stable indices so that score vectors and serialized models stay
comparable across runs. Canonical label strings are lowercase hyphenated
codes; display names are derived, never parsed.
"""

from __future__ import annotations

import enum
import json
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence


class Intention(enum.IntEnum):
    """The seven post-intention categories, in fixed index order."""

    DISCREPANCY = 0
    EXPLICIT_ERROR = 1
    REVIEW = 2
    CONCEPTUAL = 3
    LEARNING = 4
    HOW_TO = 5
    OTHER = 6

    @property
    def code(self) -> str:
        return _INTENTION_CODES[self]

    @classmethod
    def from_code(cls, code: str) -> "Intention":
        try:
            return _INTENTION_BY_CODE[code]
        except KeyError:
            raise ValueError(f"unknown intention label: {code!r}") from None


_INTENTION_CODES: dict[Intention, str] = {
    Intention.DISCREPANCY: "discrepancy",
    Intention.EXPLICIT_ERROR: "explicit-error",
    Intention.REVIEW: "review",
    Intention.CONCEPTUAL: "conceptual",
    Intention.LEARNING: "learning",
    Intention.HOW_TO: "how-to",
    Intention.OTHER: "other",
}
_INTENTION_BY_CODE = {code: member for member, code in _INTENTION_CODES.items()}

INTENTION_CODES: tuple[str, ...] = tuple(_INTENTION_CODES[m] for m in Intention)
NUM_INTENTIONS = len(Intention)


class ContentCategory(enum.IntEnum):
    """Code-block content categories, in fixed index order."""

    NATURAL_LANGUAGE = 0
    CODE = 1
    ERROR_MESSAGE = 2
    CONFIG = 3
    COMMAND_LINE = 4
    OTHERS = 5

    @property
    def code(self) -> str:
        return _CONTENT_CODES[self]

    @classmethod
    def from_code(cls, code: str) -> "ContentCategory":
        try:
            return _CONTENT_BY_CODE[code]
        except KeyError:
            raise ValueError(f"unknown content category: {code!r}") from None


_CONTENT_CODES: dict[ContentCategory, str] = {
    ContentCategory.NATURAL_LANGUAGE: "natural-language",
    ContentCategory.CODE: "code",
    ContentCategory.ERROR_MESSAGE: "error-message",
    ContentCategory.CONFIG: "config",
    ContentCategory.COMMAND_LINE: "command-line",
    ContentCategory.OTHERS: "others",
}
_CONTENT_BY_CODE = {code: member for member, code in _CONTENT_CODES.items()}

CONTENT_CODES: tuple[str, ...] = tuple(_CONTENT_CODES[m] for m in ContentCategory)
NUM_CONTENT_CATEGORIES = len(ContentCategory)

SOURCES = ("stackexchange", "lithium", "discourse", "other")

# A label set is just a frozenset of Intention; helpers below validate the
# non-empty invariant where one is required.
IntentionLabelSet = frozenset


def label_set(labels: Iterable[Intention | str]) -> frozenset[Intention]:
    """Build a non-empty intention label set from members or codes."""

    members = frozenset(
        lab if isinstance(lab, Intention) else Intention.from_code(lab) for lab in labels
    )
    if not members:
        raise ValueError("intention label set must be non-empty")
    return members


@dataclass(frozen=True)
class Post:
    """A raw forum question post as it appears in a dump."""

    id: str
    source: str
    title: str
    body_html: str
    url: str | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("post id must be non-empty")
        if not self.title:
            raise ValueError(f"post {self.id!r}: title must be non-empty")
        if self.source not in SOURCES:
            raise ValueError(f"post {self.id!r}: unknown source {self.source!r}")


@dataclass(frozen=True)
class AnnotatedPost:
    """A post together with its ground-truth intention labels."""

    post: Post
    labels: frozenset[Intention]

    def __post_init__(self) -> None:
        if not self.labels:
            raise ValueError(f"post {self.post.id!r}: labels must be non-empty")


class DatasetError(ValueError):
    """Raised for malformed or invalid dataset records.

    ``line`` is the 1-based line number when the error is tied to one.
    """

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


def load_dataset(path: str | Path) -> list[AnnotatedPost]:
    """Load an annotated-post JSONL file.

    Each line is an object with keys ``id``, ``source``, ``title``,
    ``body_html``, ``labels`` and optional ``url``; unknown keys are
    ignored. Records are returned in file order. Unknown label strings,
    empty label arrays and duplicate ids are rejected.
    """

    records: list[AnnotatedPost] = []
    seen_ids: set[str] = set()
    with open(path, encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            if not raw.strip():
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"malformed JSON ({exc.msg})", line=lineno) from None
            if not isinstance(obj, dict):
                raise DatasetError("record is not a JSON object", line=lineno)
            try:
                record = _record_from_obj(obj)
            except (KeyError, TypeError, ValueError) as exc:
                raise DatasetError(str(exc), line=lineno) from None
            if record.post.id in seen_ids:
                raise DatasetError(f"duplicate post id {record.post.id!r}", line=lineno)
            seen_ids.add(record.post.id)
            records.append(record)
    return records


def _record_from_obj(obj: Mapping) -> AnnotatedPost:
    for key in ("id", "source", "title", "body_html", "labels"):
        if key not in obj:
            raise ValueError(f"missing required key {key!r}")
    labels_raw = obj["labels"]
    if not isinstance(labels_raw, list):
        raise ValueError("labels must be an array of label strings")
    if not labels_raw:
        raise ValueError("labels array must be non-empty")
    post = Post(
        id=str(obj["id"]),
        source=obj["source"],
        title=obj["title"],
        body_html=obj["body_html"],
        url=obj.get("url"),
    )
    return AnnotatedPost(post=post, labels=label_set(labels_raw))


def save_dataset(records: Sequence[AnnotatedPost], path: str | Path) -> None:
    """Write records as JSONL with canonical key and label order."""

    with open(path, "w", encoding="utf-8") as handle:
        for rec in records:
            handle.write(record_to_json(rec))
            handle.write("\n")


def record_to_json(rec: AnnotatedPost) -> str:
    obj: dict = {
        "id": rec.post.id,
        "source": rec.post.source,
        "title": rec.post.title,
        "body_html": rec.post.body_html,
        "labels": [lab.code for lab in sorted(rec.labels)],
    }
    if rec.post.url is not None:
        obj["url"] = rec.post.url
    return json.dumps(obj, ensure_ascii=False)


@dataclass
class DatasetStats:
    """Summary counts for an annotated dataset."""

    n_posts: int
    label_counts: dict[str, int]
    cardinality_counts: dict[int, int] = field(default_factory=dict)
    token_mean: float = 0.0
    token_median: float = 0.0
    token_max: int = 0

    def to_dict(self) -> dict:
        return {
            "n_posts": self.n_posts,
            "label_counts": self.label_counts,
            "cardinality_counts": {str(k): v for k, v in self.cardinality_counts.items()},
            "description_tokens": {
                "mean": self.token_mean,
                "median": self.token_median,
                "max": self.token_max,
            },
        }


def dataset_stats(records: Sequence[AnnotatedPost]) -> DatasetStats:
    """Per-label counts, label-cardinality histogram, and description
    token-length statistics (computed on the preprocessed description)."""

    from . import preprocess

    label_counts = {code: 0 for code in INTENTION_CODES}
    cardinality_counts = {k: 0 for k in range(1, NUM_INTENTIONS + 1)}
    token_lengths: list[int] = []
    for rec in records:
        for lab in rec.labels:
            label_counts[lab.code] += 1
        cardinality_counts[len(rec.labels)] += 1
        cleaned = preprocess.clean(rec.post)
        token_lengths.append(len(preprocess.word_tokens(cleaned.description_text)))
    if token_lengths:
        mean = sum(token_lengths) / len(token_lengths)
        median = float(statistics.median(token_lengths))
        longest = max(token_lengths)
    else:
        mean, median, longest = 0.0, 0.0, 0
    return DatasetStats(
        n_posts=len(records),
        label_counts=label_counts,
        cardinality_counts=cardinality_counts,
        token_mean=mean,
        token_median=median,
        token_max=longest,
    )
