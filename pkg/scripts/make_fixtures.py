#!/usr/bin/env python3
"""Generate the committed fixture data under data/.

Two artifacts:
  replication.jsonl  784 annotated posts whose summary statistics equal
                     the reference corpus exactly: label counts
                     149/150/86/159/23/273/86, cardinality histogram
                     650/126/8, description tokens mean 112.0 /
                     median 83 / max 1168.
  codeblocks.jsonl   600 code blocks labeled with content categories,
                     vocabulary-aligned with the blocks embedded in the
                     dataset posts.

Post text is synthetic but label-indicative: each intention owns a
vocabulary pool, multi-label posts mix pools, and code-block content
correlates with intention. That makes the dataset learnable end to end
while keeping every audited statistic exact. Regenerate with:

    python3 scripts/make_fixtures.py --out-dir data
"""

from __future__ import annotations

import argparse
import html
import json
import sys
from pathlib import Path

import numpy as np

LABEL_TOTALS = {
    "discrepancy": 149,
    "explicit-error": 150,
    "review": 86,
    "conceptual": 159,
    "learning": 23,
    "how-to": 273,
    "other": 86,
}
N_POSTS = 784
N_SINGLE, N_DOUBLE, N_TRIPLE = 650, 126, 8
TOKEN_TOTAL = 112 * N_POSTS  # mean exactly 112.0
TOKEN_MEDIAN = 83
TOKEN_MAX = 1168

INTENTION_VOCAB = {
    "discrepancy": [
        "expected", "actually", "instead", "observed", "differs", "mismatch",
        "unexpected", "produces", "contradicts", "supposed", "outcome",
        "deviates", "differently", "compares", "shows", "returns", "odd",
        "weird", "inconsistent", "surprising",
    ],
    "explicit-error": [
        "error", "exception", "crash", "traceback", "fails", "failure",
        "aborted", "segfault", "fatal", "thrown", "raised", "stacktrace",
        "errno", "broken", "terminated", "panic", "refused", "denied",
        "timeout", "corrupted",
    ],
    "review": [
        "review", "feedback", "improve", "refactor", "cleaner", "elegant",
        "critique", "better", "advice", "opinions", "suggestions",
        "rewrite", "optimize", "idiomatic", "readable", "tidy", "assess",
        "evaluate", "polish", "style",
    ],
    "conceptual": [
        "why", "concept", "meaning", "understand", "theory", "semantics",
        "difference", "explain", "internals", "architecture", "rationale",
        "purpose", "definition", "principle", "relationship", "underlying",
        "fundamentally", "distinction", "clarify", "conceptually",
    ],
    "learning": [
        "learn", "tutorial", "beginner", "course", "documentation", "guide",
        "study", "resources", "book", "introduction", "basics", "practice",
        "lessons", "material", "reference", "starting", "recommend",
        "curriculum", "fundamentals", "exercises",
    ],
    "how-to": [
        "how", "steps", "configure", "install", "setup", "achieve",
        "accomplish", "procedure", "enable", "integrate", "deploy",
        "migrate", "convert", "implement", "automate", "schedule",
        "connect", "export", "trigger", "provision",
    ],
    "other": [
        "announcement", "discussion", "community", "unrelated",
        "miscellaneous", "general", "offtopic", "poll", "meta", "random",
        "chatter", "lounge", "informal", "aside", "tangent", "banter",
        "sundry", "notice", "remark", "various",
    ],
}

FILLER = (
    "the a to in of and is it for on with this that as at by from or an be "
    "have was are my our your when then also just some more can will would "
    "using project system service data file version application team issue "
    "question post forum value output input case example time work run test "
    "build server client user page table field list item part way thing "
    "same new old two one need want tried looked found seems here there "
    "now still after before while during under over between against"
).split()

CATEGORY_POOLS = {
    "natural-language": [
        "please", "note", "that", "the", "following", "explanation",
        "describes", "behaviour", "carefully", "section", "paragraph",
        "quoted", "from", "manual",
    ],
    "code": [
        "def", "return", "import", "class", "self", "lambda", "yield",
        "print(x)", "for", "while", "if", "else:", "x=1", "y==2", "foo()",
        "bar[i]", "try:", "except:",
    ],
    "error-message": [
        "Traceback", "(most", "recent", "call", "last):", "Exception:",
        "ValueError:", "errno=2", "FATAL", "segfault", "at", "0x0042",
        "stack", "overflow", "panic:", "SIGKILL",
    ],
    "config": [
        "[server]", "port=8080", "enabled=true", "timeout:", "30s",
        "retries:", "5", "host:", "localhost", "debug=false", "level=info",
        "max_connections=100", "pool_size:", "16",
    ],
    "command-line": [
        "$", "sudo", "apt-get", "install", "--verbose", "git", "clone",
        "cd", "make", "-j4", "./configure", "docker", "run", "-it", "pip",
        "upgrade",
    ],
    "others": [
        "q3", "fy2021", "n/a", "42%", "$3.50", "misc", "0xdeadbeef", "...",
        "(see", "above)", "lorem", "ipsum", "tbd", "xxx",
    ],
}

# Which code-block categories tend to accompany each intention, and how
# often a post carries a block at all.
BLOCK_TENDENCY = {
    "discrepancy": (0.70, ["code", "config"]),
    "explicit-error": (0.85, ["error-message", "code"]),
    "review": (0.90, ["code"]),
    "conceptual": (0.30, ["code", "natural-language"]),
    "learning": (0.20, ["natural-language"]),
    "how-to": (0.70, ["command-line", "config"]),
    "other": (0.25, ["others"]),
}

SOURCES = ["stackexchange", "lithium", "discourse"]
SOURCE_WEIGHTS = [0.6, 0.2, 0.2]


def build_label_sets(rng: np.random.Generator) -> list[tuple[str, ...]]:
    """650 singletons + 126 pairs + 8 triples hitting LABEL_TOTALS exactly.

    ``other`` appears only as a singleton; the remaining six labels fill
    the multi-label groups, sampled proportionally to remaining quota.
    """

    quota = {k: v for k, v in LABEL_TOTALS.items() if k != "other"}
    labels = list(quota)

    def draw_group(size: int) -> tuple[str, ...]:
        picked: list[str] = []
        for _ in range(size):
            pool = [lab for lab in labels if quota[lab] > 0 and lab not in picked]
            if not pool:
                raise RuntimeError("quota exhausted while drawing a group")
            weights = np.array([quota[lab] for lab in pool], dtype=float)
            choice = rng.choice(len(pool), p=weights / weights.sum())
            picked.append(pool[int(choice)])
            quota[picked[-1]] -= 1
        return tuple(sorted(picked))

    groups = [draw_group(3) for _ in range(N_TRIPLE)]
    groups += [draw_group(2) for _ in range(N_DOUBLE)]
    for lab in labels:
        groups += [(lab,)] * quota[lab]
        quota[lab] = 0
    groups += [("other",)] * LABEL_TOTALS["other"]

    assert len(groups) == N_POSTS
    rng.shuffle(groups)
    return groups


def build_lengths() -> list[int]:
    """784 description token counts with exact mean/median/max."""

    low = [20 + round(i * 62 / 390) for i in range(391)]  # 20 .. 82
    low += [TOKEN_MEDIAN, TOKEN_MEDIAN]  # both middle order statistics
    high_target = TOKEN_TOTAL - sum(low)

    # long tail: mostly near 84, one maximum, quadratic ramp in between
    high = [84 + int((i / 389) ** 2 * 300) for i in range(390)]
    high.append(TOKEN_MAX)
    slack = high_target - sum(high)
    j = 0
    while slack != 0:
        idx = j % 390  # never touch the maximum
        if slack > 0 and high[idx] < TOKEN_MAX - 1:
            high[idx] += 1
            slack -= 1
        elif slack < 0 and high[idx] > 84:
            high[idx] -= 1
            slack += 1
        j += 1

    lengths = low + high
    assert len(lengths) == N_POSTS
    assert sum(lengths) == TOKEN_TOTAL
    ordered = sorted(lengths)
    assert ordered[391] == ordered[392] == TOKEN_MEDIAN
    assert max(lengths) == TOKEN_MAX and lengths.count(TOKEN_MAX) == 1
    return lengths


def make_tokens(labels: tuple[str, ...], n: int, rng: np.random.Generator) -> list[str]:
    own = [w for lab in labels for w in INTENTION_VOCAB[lab]]
    tokens = []
    for _ in range(n):
        pool = own if rng.random() < 0.55 else FILLER
        tokens.append(pool[int(rng.integers(len(pool)))])
    return tokens


def to_sentences(tokens: list[str], rng: np.random.Generator) -> list[str]:
    sentences = []
    i = 0
    while i < len(tokens):
        size = int(rng.integers(8, 15))
        chunk = tokens[i : i + size]
        i += size
        sentences.append(" ".join(chunk) + ".")
    return sentences


def make_block(category: str, rng: np.random.Generator) -> str:
    pool = CATEGORY_POOLS[category]
    n = int(rng.integers(6, 20))
    words = [pool[int(rng.integers(len(pool)))] for _ in range(n)]
    lines = []
    while words:
        take = int(rng.integers(3, 7))
        lines.append(" ".join(words[:take]))
        words = words[take:]
    return "\n".join(lines)


def make_post(
    index: int, labels: tuple[str, ...], n_tokens: int, rng: np.random.Generator
) -> dict:
    title_tokens = make_tokens(labels, 5 + index % 4, rng)
    title = " ".join(title_tokens)
    if rng.random() < 0.4:
        title += "?"

    sentences = to_sentences(make_tokens(labels, n_tokens, rng), rng)
    # split sentences into 1-3 paragraphs
    n_paras = 1 + int(rng.integers(0, min(3, len(sentences))))
    cut_points = sorted(rng.choice(range(1, len(sentences)), size=n_paras - 1, replace=False)) if n_paras > 1 else []
    paragraphs = []
    prev = 0
    for cut in list(cut_points) + [len(sentences)]:
        paragraphs.append("<p>" + " ".join(sentences[prev:cut]) + "</p>")
        prev = cut

    # category-correlated code blocks between paragraphs
    blocks = []
    prob, categories = BLOCK_TENDENCY[labels[0]]
    if rng.random() < prob:
        blocks.append(make_block(categories[int(rng.integers(len(categories)))], rng))
        if len(categories) > 1 and rng.random() < 0.3:
            blocks.append(make_block(categories[1], rng))

    body_parts = [paragraphs[0]]
    for block in blocks:
        body_parts.append("<pre><code>" + html.escape(block) + "</code></pre>")
    body_parts.extend(paragraphs[1:])

    record = {
        "id": f"q{index:04d}",
        "source": SOURCES[int(rng.choice(len(SOURCES), p=SOURCE_WEIGHTS))],
        "title": title,
        "body_html": "".join(body_parts),
        "labels": sorted(labels),
    }
    if rng.random() < 0.5:
        record["url"] = f"https://forum.example.com/q/{index}"
    return record


def make_dataset(seed: int) -> list[dict]:
    rng = np.random.default_rng(seed)
    label_sets = build_label_sets(rng)
    lengths = build_lengths()
    rng.shuffle(lengths)
    return [
        make_post(i, labels, n, rng)
        for i, (labels, n) in enumerate(zip(label_sets, lengths))
    ]


def make_corpus(seed: int) -> list[dict]:
    rng = np.random.default_rng(seed)
    categories = list(CATEGORY_POOLS)
    records = []
    for category in categories:
        for _ in range(80):
            records.append(
                {"text": make_block(category, rng), "categories": [category]}
            )
    for _ in range(120):
        pair = rng.choice(len(categories), size=2, replace=False)
        a, b = categories[int(pair[0])], categories[int(pair[1])]
        text = make_block(a, rng) + "\n" + make_block(b, rng)
        records.append({"text": text, "categories": sorted([a, b])})
    order = rng.permutation(len(records))
    return [records[i] for i in order]


def verify(dataset_path: Path) -> dict:
    from intent_miner.core import dataset_stats, load_dataset

    stats = dataset_stats(load_dataset(dataset_path)).to_dict()
    assert stats["n_posts"] == N_POSTS
    assert stats["label_counts"] == LABEL_TOTALS
    assert stats["cardinality_counts"]["1"] == N_SINGLE
    assert stats["cardinality_counts"]["2"] == N_DOUBLE
    assert stats["cardinality_counts"]["3"] == N_TRIPLE
    tokens = stats["description_tokens"]
    assert tokens["mean"] == 112.0, tokens
    assert tokens["median"] == 83.0, tokens
    assert tokens["max"] == 1168, tokens
    return stats


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out-dir", default="data")
    parser.add_argument("--seed", type=int, default=20240625)
    args = parser.parse_args()

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    dataset = make_dataset(args.seed)
    dataset_path = out / "replication.jsonl"
    with open(dataset_path, "w", encoding="utf-8") as handle:
        for record in dataset:
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")

    corpus = make_corpus(args.seed + 1)
    corpus_path = out / "codeblocks.jsonl"
    with open(corpus_path, "w", encoding="utf-8") as handle:
        for record in corpus:
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")

    stats = verify(dataset_path)
    print(json.dumps(stats, indent=2, sort_keys=True))
    print(f"wrote {dataset_path} ({len(dataset)} posts) and "
          f"{corpus_path} ({len(corpus)} blocks)", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
