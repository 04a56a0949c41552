"""Shared fixtures: a small trained code-block classifier, the bundled
sentiment lexicon, synthetic learnable posts, and resolution of the
replication dataset path.

Set INTENT_MINER_DATASET / INTENT_MINER_CODEBLOCK_CORPUS to run the
dataset-dependent tests against a real annotated dump instead of the
committed replica fixtures.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np
import pytest

from intent_miner.codeblock import (
    CodeBlockRecord,
    train_codeblock_classifier,
)
from intent_miner.core import AnnotatedPost, ContentCategory, Intention, Post
from intent_miner.features import load_default_lexicon

REPO_ROOT = Path(__file__).resolve().parent.parent

# Distinctive token pools per content category; enough signal that the
# classifier separates them from a few dozen examples.
_CATEGORY_TOKENS = {
    ContentCategory.NATURAL_LANGUAGE: [
        "please", "explain", "the", "reason", "behind", "this", "thanks",
    ],
    ContentCategory.CODE: [
        "def", "return", "import", "class", "self", "lambda", "yield",
    ],
    ContentCategory.ERROR_MESSAGE: [
        "Traceback", "Exception", "raised", "errno", "fatal", "stacktrace",
    ],
    ContentCategory.CONFIG: [
        "version:", "enabled:", "true", "false", "timeout=30", "[section]",
    ],
    ContentCategory.COMMAND_LINE: [
        "sudo", "apt-get", "install", "--verbose", "-rf", "$HOME", "cd",
    ],
    ContentCategory.OTHERS: [
        "lorem", "ipsum", "0xdeadbeef", "zzz", "qqq", "misc", "blob",
    ],
}


def synthetic_codeblock_corpus(
    n_per_class: int = 14, seed: int = 7
) -> list[CodeBlockRecord]:
    rng = np.random.default_rng(seed)
    records = []
    for category, pool in _CATEGORY_TOKENS.items():
        for _ in range(n_per_class):
            words = rng.choice(pool, size=8)
            records.append(
                CodeBlockRecord(
                    text=" ".join(words), categories=frozenset({category})
                )
            )
    order = rng.permutation(len(records))
    return [records[i] for i in order]


@pytest.fixture(scope="session")
def content_model():
    classifier, _ = train_codeblock_classifier(synthetic_codeblock_corpus(), seed=0)
    return classifier


@pytest.fixture(scope="session")
def lexicon():
    return load_default_lexicon()


# Token pools per intention for learnable synthetic posts. Disjoint
# vocabularies make the task separable through hashed embeddings.
_INTENTION_TOKENS = {
    Intention.DISCREPANCY: ["expected", "instead", "actual", "differs", "mismatch"],
    Intention.HOW_TO: ["how", "steps", "achieve", "procedure", "accomplish"],
    Intention.EXPLICIT_ERROR: ["crash", "failure", "broken", "exception", "abort"],
    Intention.CONCEPTUAL: ["why", "concept", "meaning", "theory", "semantics"],
}


def make_posts(
    n: int,
    seed: int = 0,
    intentions: tuple[Intention, ...] = (Intention.DISCREPANCY, Intention.HOW_TO),
) -> list[AnnotatedPost]:
    """n synthetic posts cycling through the given intentions, each with
    vocabulary indicative of its label."""

    rng = np.random.default_rng(seed)
    records = []
    for i in range(n):
        intention = intentions[i % len(intentions)]
        pool = _INTENTION_TOKENS[intention]
        title = " ".join(rng.choice(pool, size=4))
        sentences = [
            " ".join(rng.choice(pool, size=6)) + "." for _ in range(3)
        ]
        records.append(
            AnnotatedPost(
                post=Post(
                    id=f"p{i}",
                    source="stackexchange",
                    title=title,
                    body_html="<p>" + " ".join(sentences) + "</p>",
                ),
                labels=frozenset({intention}),
            )
        )
    return records


def dataset_path() -> Path:
    """The annotated dump to evaluate against: the env override if set,
    else the committed replica fixture."""

    override = os.environ.get("INTENT_MINER_DATASET")
    if override:
        return Path(override)
    return REPO_ROOT / "data" / "replication.jsonl"


def codeblock_corpus_path() -> Path:
    override = os.environ.get("INTENT_MINER_CODEBLOCK_CORPUS")
    if override:
        return Path(override)
    return REPO_ROOT / "data" / "codeblocks.jsonl"


@pytest.fixture(scope="session")
def replication_dataset():
    path = dataset_path()
    if not path.exists():
        pytest.skip(f"no dataset at {path}")
    from intent_miner.core import load_dataset

    return load_dataset(path)
