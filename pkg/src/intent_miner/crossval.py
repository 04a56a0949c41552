"""Stratified-by-nothing, seeded k-fold cross-validation.

A fold plan is a shuffled id order plus contiguous test slices whose
sizes differ by at most one. Within each fold the non-test posts form
the training portion; the first fifth of that portion (in shuffled
order) is held out as the early-stopping validation set. Plans
serialize to JSON so a run can be audited or resumed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .codeblock import CodeBlockClassifier
from .core import AnnotatedPost, Intention, NUM_INTENTIONS, label_set
from .embedding import EmbeddingProvider, EmbeddingProviderSpec
from .features import Standardizer
from .head import EncodedDataset, HeadConfig, score_batch, targets_from_labels, train
from .metrics import RankedPrediction, full_report
from .pipeline import PipelineModel, embed_posts, encode_dataset, raw_feature_matrix
from .preprocess import clean

PLAN_FORMAT_VERSION = 1
REPORT_FORMAT_VERSION = 1

# Validation set = first 1/VALIDATION_DIVISOR of the shuffled training
# portion, rounded down.
VALIDATION_DIVISOR = 5


@dataclass(frozen=True)
class FoldPlan:
    """Shuffled post ids partitioned into contiguous test slices."""

    seed: int
    order: tuple[str, ...]
    fold_sizes: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.fold_sizes) < 2:
            raise ValueError("a plan needs at least 2 folds")
        if sum(self.fold_sizes) != len(self.order):
            raise ValueError("fold sizes do not partition the id order")
        if min(self.fold_sizes) < 1:
            raise ValueError("every fold must hold at least one post")
        if max(self.fold_sizes) - min(self.fold_sizes) > 1:
            raise ValueError("fold sizes may differ by at most one")
        if len(set(self.order)) != len(self.order):
            raise ValueError("duplicate post id in fold plan")

    @property
    def n_folds(self) -> int:
        return len(self.fold_sizes)

    def _bounds(self, fold: int) -> tuple[int, int]:
        if not 0 <= fold < self.n_folds:
            raise ValueError(f"fold {fold} out of range for {self.n_folds} folds")
        start = sum(self.fold_sizes[:fold])
        return start, start + self.fold_sizes[fold]

    def test_ids(self, fold: int) -> tuple[str, ...]:
        start, end = self._bounds(fold)
        return self.order[start:end]

    def training_ids(self, fold: int) -> tuple[str, ...]:
        """Everything outside the test slice, still in shuffled order."""

        start, end = self._bounds(fold)
        return self.order[:start] + self.order[end:]

    def validation_ids(self, fold: int) -> tuple[str, ...]:
        training = self.training_ids(fold)
        return training[: len(training) // VALIDATION_DIVISOR]

    def fit_ids(self, fold: int) -> tuple[str, ...]:
        """Training portion minus the validation prefix."""

        training = self.training_ids(fold)
        return training[len(training) // VALIDATION_DIVISOR :]

    def to_dict(self) -> dict:
        return {
            "format_version": PLAN_FORMAT_VERSION,
            "seed": self.seed,
            "n_folds": self.n_folds,
            "order": list(self.order),
            "fold_sizes": list(self.fold_sizes),
        }

    @classmethod
    def from_dict(cls, obj: Mapping) -> "FoldPlan":
        version = obj.get("format_version")
        if version != PLAN_FORMAT_VERSION:
            raise ValueError(f"unsupported plan format version: {version!r}")
        plan = cls(
            seed=int(obj["seed"]),
            order=tuple(str(i) for i in obj["order"]),
            fold_sizes=tuple(int(s) for s in obj["fold_sizes"]),
        )
        if plan.n_folds != int(obj["n_folds"]):
            raise ValueError("n_folds does not match fold_sizes")
        return plan

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(self.to_dict(), handle, sort_keys=True, indent=2)
            handle.write("\n")

    @classmethod
    def load(cls, path: str | Path) -> "FoldPlan":
        with open(path, encoding="utf-8") as handle:
            return cls.from_dict(json.load(handle))


def make_folds(
    records: Sequence[AnnotatedPost], seed: int, n_folds: int = 5
) -> FoldPlan:
    """Shuffle ids with the seed and cut contiguous test slices.

    The first (n mod k) folds get the extra post, so sizes differ by at
    most one. The dataset must be large enough that every fold leaves a
    non-empty validation prefix.
    """

    if n_folds < 2:
        raise ValueError("need at least 2 folds")
    n = len(records)
    if n < n_folds:
        raise ValueError(f"cannot split {n} posts into {n_folds} folds")
    smallest_training = n - (n // n_folds + 1)
    if smallest_training // VALIDATION_DIVISOR < 1:
        raise ValueError(
            f"{n} posts leave an empty validation set with {n_folds} folds"
        )
    ids = [r.post.id for r in records]
    rng = np.random.default_rng(seed)
    order = tuple(ids[i] for i in rng.permutation(n))
    base, extra = divmod(n, n_folds)
    sizes = tuple(base + 1 if f < extra else base for f in range(n_folds))
    return FoldPlan(seed=seed, order=order, fold_sizes=sizes)


def save_predictions(
    path: str | Path, rows: Sequence[tuple[str, RankedPrediction]]
) -> None:
    """One JSON object per line: id, the 7 scores, ground-truth codes."""

    with open(path, "w", encoding="utf-8") as handle:
        for post_id, pred in rows:
            record = {
                "id": post_id,
                "scores": [float(s) for s in pred.scores],
                "labels": sorted(i.code for i in pred.ground_truth),
            }
            handle.write(json.dumps(record, sort_keys=True) + "\n")


def load_predictions(path: str | Path) -> list[tuple[str, RankedPrediction]]:
    rows: list[tuple[str, RankedPrediction]] = []
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                scores = tuple(float(s) for s in obj["scores"])
                if len(scores) != NUM_INTENTIONS:
                    raise ValueError(f"need {NUM_INTENTIONS} scores")
                pred = RankedPrediction(
                    scores=scores, ground_truth=label_set(obj["labels"])
                )
                rows.append((str(obj["id"]), pred))
            except (KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"line {lineno}: {exc}") from exc
    return rows


@dataclass(frozen=True)
class CvResult:
    """Pooled report plus the raw per-post predictions and fold models."""

    report: dict
    predictions: tuple[tuple[str, RankedPrediction], ...]
    models: tuple[PipelineModel, ...]


def run_cv(
    records: Sequence[AnnotatedPost],
    plan: FoldPlan,
    config: HeadConfig,
    provider: EmbeddingProvider,
    provider_spec: EmbeddingProviderSpec,
    content_model: CodeBlockClassifier,
    lexicon: Mapping[str, float],
    out_dir: str | Path | None = None,
    content_trainer: Callable[[int], CodeBlockClassifier] | None = None,
    only_fold: int | None = None,
) -> CvResult:
    """Train and score every fold, pool the predictions, report once.

    Embeddings and (unless a per-fold content trainer is supplied) the
    raw feature matrix are computed once up front; each fold refits only
    the standardizer on its non-test rows. The head seed is offset by
    the fold index so folds start from different weights. `only_fold`
    restricts the run to a single fold for quick checks; the report then
    covers just that fold's test slice.
    """

    by_id = {r.post.id: r for r in records}
    missing = [i for i in plan.order if i not in by_id]
    if missing:
        raise ValueError(f"plan references unknown post id {missing[0]!r}")
    if len(plan.order) != len(records):
        raise ValueError("plan does not cover the dataset")

    ordered = [by_id[i] for i in plan.order]
    cleaned = [clean(r.post) for r in ordered]
    labels = [r.labels for r in ordered]
    titles, descs = embed_posts(cleaned, provider)
    targets = targets_from_labels(labels)
    shared_raw = (
        raw_feature_matrix(cleaned, content_model, lexicon)
        if content_trainer is None
        else None
    )
    row_of = {post_id: i for i, post_id in enumerate(plan.order)}

    folds = range(plan.n_folds) if only_fold is None else [only_fold]
    out_path = Path(out_dir) if out_dir is not None else None
    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)
        plan.save(out_path / "plan.json")

    pooled: list[tuple[str, RankedPrediction]] = []
    fold_summaries: list[dict] = []
    models: list[PipelineModel] = []
    for fold in folds:
        fold_content = content_model if content_trainer is None else content_trainer(fold)
        raw = (
            shared_raw
            if shared_raw is not None
            else raw_feature_matrix(cleaned, fold_content, lexicon)
        )
        fit_rows = np.array([row_of[i] for i in plan.fit_ids(fold)])
        val_rows = np.array([row_of[i] for i in plan.validation_ids(fold)])
        test_rows = np.array([row_of[i] for i in plan.test_ids(fold)])
        standardizer = Standardizer.fit(raw[np.concatenate([fit_rows, val_rows])])
        features = np.vstack([standardizer.transform(row) for row in raw])

        def take(rows: np.ndarray) -> EncodedDataset:
            return EncodedDataset(
                titles=titles[rows],
                descriptions=descs[rows],
                features=features[rows],
                targets=targets[rows],
            )

        fold_config = replace(config, seed=config.seed + fold)
        try:
            result = train(
                fold_config, take(fit_rows), take(val_rows), standardizer, provider_spec
            )
        except ValueError as exc:
            raise ValueError(f"fold {fold}: {exc}") from exc
        scores = score_batch(result.model, take(test_rows))
        fold_preds = [
            (
                plan.order[row],
                RankedPrediction(
                    scores=tuple(float(s) for s in scores[j]),
                    ground_truth=labels[row],
                ),
            )
            for j, row in enumerate(test_rows)
        ]
        pooled.extend(fold_preds)
        bundle = PipelineModel(
            head=result.model, content_model=fold_content, lexicon=dict(lexicon)
        )
        models.append(bundle)
        fold_summaries.append(
            {
                "fold": fold,
                "n_train": len(fit_rows),
                "n_validation": len(val_rows),
                "n_test": len(test_rows),
                "best_epoch": result.best_epoch,
                "best_validation_loss": result.best_validation_loss,
                "epochs_run": len(result.log),
                "log": [dict(entry) for entry in result.log],
            }
        )
        if out_path is not None:
            fold_dir = out_path / f"fold-{fold}"
            fold_dir.mkdir(exist_ok=True)
            bundle.save(fold_dir / "model.json")
            save_predictions(fold_dir / "predictions.jsonl", fold_preds)

    report = {
        "format_version": REPORT_FORMAT_VERSION,
        "seed": plan.seed,
        "n_folds": plan.n_folds,
        "folds_run": list(folds),
        "fold_sizes": list(plan.fold_sizes),
        "config": config.to_dict(),
        "provider": provider_spec.to_dict(),
        "folds": fold_summaries,
        "metrics": full_report(
            [pred for _, pred in pooled], threshold=config.threshold
        ),
    }
    if out_path is not None:
        with open(out_path / "report.json", "w", encoding="utf-8") as handle:
            json.dump(report, handle, sort_keys=True, indent=2)
            handle.write("\n")
    return CvResult(
        report=report, predictions=tuple(pooled), models=tuple(models)
    )


def pooled_pairs(
    predictions: Sequence[tuple[str, RankedPrediction]], threshold: float = 0.5
) -> list[tuple[frozenset[Intention], frozenset[Intention]]]:
    """(refined, truth) pairs from pooled predictions, for micro metrics."""

    from .head import refine

    return [
        (refine(np.asarray(pred.scores), threshold), pred.ground_truth)
        for _, pred in predictions
    ]
