"""Command-line entry point binding every stage of the pipeline.

Subcommands: preprocess, codeblock-train, codeblock-eval, train,
predict, crossval, evaluate, agreement, stats. Exit codes: 0 success,
1 validation error (including usage errors), 2 I/O or transport error.
Reports are JSON on stdout with the resolved settings echoed back;
reruns with identical inputs are byte-identical (no timestamps).

A JSON config file (--config) supplies defaults for any long flag,
keyed by the flag's destination name; explicit flags win.
"""

from __future__ import annotations

import argparse
import importlib.metadata
import json
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from .codeblock import (
    DEFAULT_ALPHA_GRID,
    CodeBlockClassifier,
    lex_code,
    load_codeblock_corpus,
    threshold_accuracy,
    train_codeblock_classifier,
    transform,
)
from .core import (
    DatasetError,
    Post,
    dataset_stats,
    label_set,
    load_dataset,
)
from .crossval import load_predictions, make_folds, run_cv
from .embedding import (
    DEFAULT_DIMENSION,
    DEFAULT_MAX_TOKENS,
    EmbeddingProvider,
    EmbeddingProviderSpec,
    ProtocolError,
    SidecarClient,
    TransportError,
    make_provider,
)
from .features import load_default_lexicon, load_lexicon
from .head import HeadConfig
from .metrics import full_report, intention_agreement
from .pipeline import PipelineModel, train_head_on_posts
from .preprocess import clean

DEFAULT_SEED = 42


def _version() -> str:
    try:
        return "intent-miner " + importlib.metadata.version("intent-miner")
    except importlib.metadata.PackageNotFoundError:
        return "intent-miner unknown"


class _Parser(argparse.ArgumentParser):
    """argparse with usage errors mapped to exit status 1."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


# -- config-file merging ---------------------------------------------------


def _load_config(args: argparse.Namespace) -> dict:
    path = getattr(args, "config", None)
    if not path:
        return {}
    with open(path, encoding="utf-8") as handle:
        obj = json.load(handle)
    if not isinstance(obj, dict):
        raise ValueError(f"{path}: config must be a JSON object")
    return obj


def _resolve(args: argparse.Namespace, key: str, default):
    """Flag value if given, else config-file value, else the default."""

    value = getattr(args, key, None)
    if value is not None:
        return value
    return args._config_data.get(key, default)


def _provider_spec(args: argparse.Namespace) -> EmbeddingProviderSpec:
    return EmbeddingProviderSpec(
        kind=_resolve(args, "provider", "hashed"),
        dimension=int(_resolve(args, "dimension", DEFAULT_DIMENSION)),
        max_tokens=int(_resolve(args, "max_tokens", DEFAULT_MAX_TOKENS)),
        mode=_resolve(args, "embed_mode", "raw_cls"),
    )


def _head_config(args: argparse.Namespace, spec: EmbeddingProviderSpec, seed: int) -> HeadConfig:
    return HeadConfig(
        embedding_dim=spec.dimension,
        merge_dim=int(_resolve(args, "merge_dim", 256)),
        fusion_dim=int(_resolve(args, "fusion_dim", 64)),
        fine_tune_pooler=bool(_resolve(args, "fine_tune_pooler", False)),
        learning_rate_head=float(_resolve(args, "lr_head", 1e-3)),
        learning_rate_pooler=float(_resolve(args, "lr_pooler", 1e-4)),
        batch_size=int(_resolve(args, "batch_size", 16)),
        max_epochs=int(_resolve(args, "max_epochs", 50)),
        patience=int(_resolve(args, "patience", 10)),
        seed=seed,
        threshold=float(_resolve(args, "threshold", 0.5)),
    )


def _seed(args: argparse.Namespace) -> int:
    return int(_resolve(args, "seed", DEFAULT_SEED))


def _connect_provider(spec: EmbeddingProviderSpec, args: argparse.Namespace) -> EmbeddingProvider:
    """Build the provider and, for a sidecar, fail fast on connect."""

    provider = make_provider(spec, address=getattr(args, "sidecar", None))
    if isinstance(provider, SidecarClient):
        provider.connect()
    return provider


def _lexicon(args: argparse.Namespace) -> dict[str, float]:
    path = _resolve(args, "lexicon", None)
    return load_lexicon(path) if path else load_default_lexicon()


def _content_model(args: argparse.Namespace, seed: int) -> CodeBlockClassifier:
    model_path = _resolve(args, "codeblock_model", None)
    corpus_path = _resolve(args, "codeblock_corpus", None)
    if model_path and corpus_path:
        raise ValueError("give either --codeblock-model or --codeblock-corpus, not both")
    if model_path:
        return CodeBlockClassifier.load(model_path)
    if corpus_path:
        classifier, _ = train_codeblock_classifier(
            load_codeblock_corpus(corpus_path), seed=seed
        )
        return classifier
    raise ValueError("a code-block classifier is required "
                     "(--codeblock-model or --codeblock-corpus)")


def _print_report(command: str, settings: dict, payload: dict) -> None:
    report = {
        "command": command,
        "version": _version(),
        "settings": settings,
        "report": payload,
    }
    print(json.dumps(report, sort_keys=True, indent=2))


def _load_posts(path: str | Path) -> list[Post]:
    """Posts from JSONL; ``labels`` keys, if present, are ignored."""

    posts: list[Post] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"malformed JSON ({exc.msg})", line=lineno) from None
            try:
                post = Post(
                    id=str(obj["id"]),
                    source=str(obj["source"]),
                    title=str(obj["title"]),
                    body_html=str(obj["body_html"]),
                    url=obj.get("url"),
                )
            except KeyError as exc:
                raise DatasetError(f"missing key {exc}", line=lineno) from None
            except ValueError as exc:
                raise DatasetError(str(exc), line=lineno) from None
            if post.id in seen:
                raise DatasetError(f"duplicate post id {post.id!r}", line=lineno)
            seen.add(post.id)
            posts.append(post)
    return posts


def _open_output(args: argparse.Namespace):
    path = getattr(args, "output", None)
    if path:
        return open(path, "w", encoding="utf-8")
    return sys.stdout


# -- subcommand handlers ---------------------------------------------------


def cmd_preprocess(args: argparse.Namespace) -> None:
    posts = _load_posts(args.input)
    out = _open_output(args)
    try:
        for post in posts:
            cleaned = clean(post)
            record = {
                "id": cleaned.id,
                "title_text": cleaned.title_text,
                "description_text": cleaned.description_text,
                "code_blocks": list(cleaned.code_blocks),
            }
            out.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()


def cmd_codeblock_train(args: argparse.Namespace) -> None:
    seed = _seed(args)
    grid_text = _resolve(args, "alpha_grid", None)
    grid = (
        tuple(float(a) for a in str(grid_text).split(","))
        if grid_text
        else DEFAULT_ALPHA_GRID
    )
    records = load_codeblock_corpus(args.corpus)
    classifier, report = train_codeblock_classifier(records, seed=seed, alpha_grid=grid)
    classifier.save(args.output)
    settings = {
        "corpus": str(args.corpus),
        "output": str(args.output),
        "seed": seed,
        "alpha_grid": list(grid),
    }
    _print_report("codeblock-train", settings, report)


def cmd_codeblock_eval(args: argparse.Namespace) -> None:
    classifier = CodeBlockClassifier.load(args.model)
    records = load_codeblock_corpus(args.corpus)
    if not records:
        raise ValueError(f"{args.corpus}: empty corpus")
    vectors = [transform(classifier.tfidf, lex_code(r.text)) for r in records]
    labels = [frozenset(int(c) for c in r.categories) for r in records]
    payload = {
        "n_records": len(records),
        "accuracy": threshold_accuracy(classifier.nb, vectors, labels),
    }
    settings = {"model": str(args.model), "corpus": str(args.corpus)}
    _print_report("codeblock-eval", settings, payload)


def cmd_train(args: argparse.Namespace) -> None:
    seed = _seed(args)
    records = load_dataset(args.dataset)
    spec = _provider_spec(args)
    config = _head_config(args, spec, seed)
    provider = _connect_provider(spec, args)
    content_model = _content_model(args, seed)
    lexicon = _lexicon(args)

    n_val = len(records) // 5
    if n_val < 1 or len(records) - n_val < 1:
        raise ValueError(f"dataset too small to split off a validation set "
                         f"({len(records)} posts)")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(records))
    validation = [records[i] for i in order[:n_val]]
    training = [records[i] for i in order[n_val:]]

    result = train_head_on_posts(
        training, validation, config, provider, spec, content_model, lexicon
    )
    PipelineModel(
        head=result.model, content_model=content_model, lexicon=lexicon
    ).save(args.output)

    settings = {
        "dataset": str(args.dataset),
        "output": str(args.output),
        "seed": seed,
        "provider": spec.to_dict(),
        "head": config.to_dict(),
    }
    payload = {
        "n_training": len(training),
        "n_validation": len(validation),
        "best_epoch": result.best_epoch,
        "best_validation_loss": result.best_validation_loss,
        "epochs_run": len(result.log),
        "log": [dict(entry) for entry in result.log],
    }
    _print_report("train", settings, payload)


def cmd_predict(args: argparse.Namespace) -> None:
    model = PipelineModel.load(args.model)
    posts = _load_posts(args.input)
    provider = make_provider(
        model.head.provider_spec, address=getattr(args, "sidecar", None)
    )
    if isinstance(provider, SidecarClient):
        provider.connect()
    out = _open_output(args)
    try:
        for post in posts:
            scores, refined = model.predict(post, provider)
            record = {
                "id": post.id,
                "scores": [float(s) for s in scores.scores],
                "labels": sorted(i.code for i in refined),
            }
            out.write(json.dumps(record, sort_keys=True) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()


def cmd_crossval(args: argparse.Namespace) -> None:
    seed = _seed(args)
    records = load_dataset(args.dataset)
    spec = _provider_spec(args)
    config = _head_config(args, spec, seed)
    provider = _connect_provider(spec, args)
    lexicon = _lexicon(args)
    n_folds = int(_resolve(args, "folds", 5))

    per_fold = bool(_resolve(args, "codeblock_per_fold", False))
    content_trainer = None
    if per_fold:
        corpus_path = _resolve(args, "codeblock_corpus", None)
        if not corpus_path:
            raise ValueError("--codeblock-per-fold needs --codeblock-corpus")
        corpus = load_codeblock_corpus(corpus_path)

        def content_trainer(fold: int) -> CodeBlockClassifier:
            classifier, _ = train_codeblock_classifier(corpus, seed=seed + fold)
            return classifier

        content_model = content_trainer(0)
    else:
        content_model = _content_model(args, seed)

    plan = make_folds(records, seed=seed, n_folds=n_folds)
    result = run_cv(
        records,
        plan,
        config,
        provider,
        spec,
        content_model,
        lexicon,
        out_dir=getattr(args, "out_dir", None),
        content_trainer=content_trainer,
        only_fold=getattr(args, "fold", None),
    )
    settings = {
        "dataset": str(args.dataset),
        "seed": seed,
        "folds": n_folds,
        "codeblock_per_fold": per_fold,
        "provider": spec.to_dict(),
        "head": config.to_dict(),
    }
    _print_report("crossval", settings, result.report)


def cmd_evaluate(args: argparse.Namespace) -> None:
    rows = load_predictions(args.predictions)
    if not rows:
        raise ValueError(f"{args.predictions}: no predictions")
    threshold = float(_resolve(args, "threshold", 0.5))
    payload = full_report([pred for _, pred in rows], threshold=threshold)
    settings = {"predictions": str(args.predictions), "threshold": threshold}
    _print_report("evaluate", settings, payload)


def cmd_agreement(args: argparse.Namespace) -> None:
    labels_a: list[frozenset] = []
    labels_b: list[frozenset] = []
    with open(args.annotations, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                labels_a.append(label_set(obj["rater_a"]))
                labels_b.append(label_set(obj["rater_b"]))
            except (KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{args.annotations}: line {lineno}: {exc}") from None
    if len(labels_a) < 2:
        raise ValueError("agreement needs at least 2 annotated items")
    payload = {
        "n_items": len(labels_a),
        "alpha": intention_agreement(labels_a, labels_b),
    }
    _print_report("agreement", {"annotations": str(args.annotations)}, payload)


def cmd_stats(args: argparse.Namespace) -> None:
    records = load_dataset(args.dataset)
    payload = dataset_stats(records).to_dict()
    _print_report("stats", {"dataset": str(args.dataset)}, payload)


# -- parser ----------------------------------------------------------------


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="JSON file of default flag values")
    sub.add_argument("--seed", type=int, help="seed for all randomness (default 42)")


def _add_provider_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--provider", choices=["hashed", "sidecar"])
    sub.add_argument("--dimension", type=int, help="embedding dimension")
    sub.add_argument("--max-tokens", type=int, help="head-only truncation cap")
    sub.add_argument("--embed-mode", choices=["raw_cls", "pooled"])
    sub.add_argument("--sidecar", help="sidecar address host:port "
                                       "(or set INTENT_MINER_SIDECAR)")


def _add_head_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--merge-dim", type=int)
    sub.add_argument("--fusion-dim", type=int)
    sub.add_argument("--fine-tune-pooler", action="store_true", default=None)
    sub.add_argument("--lr-head", type=float)
    sub.add_argument("--lr-pooler", type=float)
    sub.add_argument("--batch-size", type=int)
    sub.add_argument("--max-epochs", type=int)
    sub.add_argument("--patience", type=int)
    sub.add_argument("--threshold", type=float)


def _add_content_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--codeblock-model", help="trained code-block classifier JSON")
    sub.add_argument("--codeblock-corpus", help="code-block corpus JSONL to train on")
    sub.add_argument("--lexicon", help="sentiment lexicon file (default: bundled)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="intent-miner", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=_version())
    subparsers = parser.add_subparsers(dest="subcommand", required=True)

    sub = subparsers.add_parser("preprocess", help="clean posts to text + code blocks")
    sub.add_argument("--input", required=True, help="posts JSONL")
    sub.add_argument("--output", help="cleaned JSONL (default: stdout)")
    _add_common(sub)
    sub.set_defaults(func=cmd_preprocess)

    sub = subparsers.add_parser("codeblock-train", help="train the code-block content classifier")
    sub.add_argument("--corpus", required=True, help="code-block corpus JSONL")
    sub.add_argument("--output", required=True, help="classifier JSON path")
    sub.add_argument("--alpha-grid", help="comma-separated smoothing grid")
    _add_common(sub)
    sub.set_defaults(func=cmd_codeblock_train)

    sub = subparsers.add_parser("codeblock-eval", help="evaluate a code-block classifier")
    sub.add_argument("--model", required=True)
    sub.add_argument("--corpus", required=True)
    _add_common(sub)
    sub.set_defaults(func=cmd_codeblock_eval)

    sub = subparsers.add_parser("train", help="train an intention model")
    sub.add_argument("--dataset", required=True, help="annotated posts JSONL")
    sub.add_argument("--output", required=True, help="model JSON path")
    _add_common(sub)
    _add_provider_flags(sub)
    _add_head_flags(sub)
    _add_content_flags(sub)
    sub.set_defaults(func=cmd_train)

    sub = subparsers.add_parser("predict", help="score posts with a trained model")
    sub.add_argument("--model", required=True)
    sub.add_argument("--input", required=True, help="posts JSONL")
    sub.add_argument("--output", help="predictions JSONL (default: stdout)")
    sub.add_argument("--sidecar", help="sidecar address override")
    _add_common(sub)
    sub.set_defaults(func=cmd_predict)

    sub = subparsers.add_parser("crossval", help="k-fold cross-validation experiment")
    sub.add_argument("--dataset", required=True)
    sub.add_argument("--out-dir", help="run directory for plan/models/predictions")
    sub.add_argument("--folds", type=int, help="number of folds (default 5)")
    sub.add_argument("--fold", type=int, help="run only this fold (debug)")
    sub.add_argument("--codeblock-per-fold", action="store_true", default=None,
                     help="retrain the code-block classifier per fold")
    _add_common(sub)
    _add_provider_flags(sub)
    _add_head_flags(sub)
    _add_content_flags(sub)
    sub.set_defaults(func=cmd_crossval)

    sub = subparsers.add_parser("evaluate", help="metrics report from predictions")
    sub.add_argument("--predictions", required=True, help="predictions JSONL")
    sub.add_argument("--threshold", type=float)
    _add_common(sub)
    sub.set_defaults(func=cmd_evaluate)

    sub = subparsers.add_parser("agreement", help="inter-rater agreement per intention")
    sub.add_argument("--annotations", required=True,
                     help="JSONL with rater_a / rater_b label arrays")
    _add_common(sub)
    sub.set_defaults(func=cmd_agreement)

    sub = subparsers.add_parser("stats", help="dataset label and length statistics")
    sub.add_argument("--dataset", required=True)
    _add_common(sub)
    sub.set_defaults(func=cmd_stats)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code
        return int(code) if code else 0
    try:
        args._config_data = _load_config(args)
        args.func(args)
        return 0
    except (TransportError, ProtocolError) as exc:
        print(f"intent-miner: transport error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"intent-miner: i/o error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"intent-miner: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
