"""Evaluation metrics: ranked precision/recall/F1 at k, micro-averaged
PRF over pooled per-class decisions, one-vs-one AUC, top-k accuracy, and
Krippendorff's alpha for binary inter-rater agreement.

Macro averaging is deliberately absent; aggregation is micro-only.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .core import NUM_INTENTIONS, Intention


@dataclass(frozen=True)
class RankedPrediction:
    """Seven class scores paired with the ground-truth label set."""

    scores: tuple[float, ...]
    ground_truth: frozenset[Intention]

    def __post_init__(self) -> None:
        if len(self.scores) != NUM_INTENTIONS:
            raise ValueError(f"need {NUM_INTENTIONS} scores")
        if not all(math.isfinite(s) for s in self.scores):
            raise ValueError("scores must be finite")
        if not self.ground_truth:
            raise ValueError("ground truth must be non-empty")


@dataclass(frozen=True)
class ConfusionTotals:
    """Per-class decisions pooled over all classes and samples."""

    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self) -> None:
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def to_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn}


def top_k_indices(scores: Sequence[float], k: int) -> list[int]:
    """Indices of the k highest scores; ties go to the lower index."""

    order = np.argsort(-np.asarray(scores, dtype=float), kind="stable")
    return [int(i) for i in order[:k]]


def _check_k(k: int) -> None:
    if not 1 <= k <= NUM_INTENTIONS:
        raise ValueError(f"k must be in [1, {NUM_INTENTIONS}], got {k}")


def precision_recall_f1_at_k(
    preds: Sequence[RankedPrediction], k: int
) -> tuple[float, float, float]:
    """Mean P@k, R@k, and F1@k over samples.

    Per sample, P@k = |top_k intersect GT| / k. R@k divides by k when the
    ground truth is larger than k and by |GT| otherwise. F1@k is the
    harmonic mean, 0 when both components are 0.
    """

    _check_k(k)
    if not preds:
        raise ValueError("prediction list must be non-empty")
    p_sum = r_sum = f_sum = 0.0
    for pred in preds:
        top = set(top_k_indices(pred.scores, k))
        truth = {int(c) for c in pred.ground_truth}
        hits = len(top & truth)
        p_i = hits / k
        r_i = hits / k if len(truth) > k else hits / len(truth)
        f_i = 0.0 if p_i + r_i == 0 else 2 * p_i * r_i / (p_i + r_i)
        p_sum += p_i
        r_sum += r_i
        f_sum += f_i
    n = len(preds)
    return (p_sum / n, r_sum / n, f_sum / n)


def top_k_accuracy(preds: Sequence[RankedPrediction], k: int) -> float:
    """Fraction of samples whose top-k scores hit any true label."""

    _check_k(k)
    if not preds:
        raise ValueError("prediction list must be non-empty")
    hits = 0
    for pred in preds:
        top = set(top_k_indices(pred.scores, k))
        if top & {int(c) for c in pred.ground_truth}:
            hits += 1
    return hits / len(preds)


@dataclass(frozen=True)
class MicroResult:
    precision: float
    recall: float
    f1: float
    totals: ConfusionTotals

    def to_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "confusion": self.totals.to_dict(),
        }


def micro_prf(
    pairs: Sequence[tuple[frozenset[Intention], frozenset[Intention]]]
) -> MicroResult:
    """Micro precision/recall/F1 from (predicted, ground-truth) label sets.

    Every (sample, class) decision contributes to one pooled confusion
    cell, so the totals sum to 7 times the sample count. Zero
    denominators yield 0.
    """

    if not pairs:
        raise ValueError("need at least one (predicted, truth) pair")
    tp = fp = fn = tn = 0
    for predicted, truth in pairs:
        pred_idx = {int(c) for c in predicted}
        true_idx = {int(c) for c in truth}
        for c in range(NUM_INTENTIONS):
            if c in pred_idx and c in true_idx:
                tp += 1
            elif c in pred_idx:
                fp += 1
            elif c in true_idx:
                fn += 1
            else:
                tn += 1
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = (
        2 * precision * recall / (precision + recall)
        if precision + recall
        else 0.0
    )
    return MicroResult(
        precision=precision,
        recall=recall,
        f1=f1,
        totals=ConfusionTotals(tp=tp, fp=fp, fn=fn, tn=tn),
    )


@dataclass(frozen=True)
class OvoAucResult:
    average: float
    pair_aucs: Mapping[tuple[int, int], float]
    pair_counts: Mapping[tuple[int, int], tuple[int, int]]
    skipped_pairs: tuple[tuple[int, int], ...]

    def to_dict(self) -> dict:
        return {
            "average": self.average,
            "pairs": {f"{i}-{j}": auc for (i, j), auc in sorted(self.pair_aucs.items())},
            "pair_counts": {
                f"{i}-{j}": list(counts)
                for (i, j), counts in sorted(self.pair_counts.items())
            },
            "skipped_pairs": [f"{i}-{j}" for i, j in self.skipped_pairs],
        }


def _one_sided_auc(winner_scores: np.ndarray, loser_scores: np.ndarray) -> float:
    # P(random winner-sample outranks random loser-sample); ties count half.
    greater = (winner_scores[:, None] > loser_scores[None, :]).sum()
    ties = (winner_scores[:, None] == loser_scores[None, :]).sum()
    return float((greater + 0.5 * ties) / (len(winner_scores) * len(loser_scores)))


def ovo_auc(preds: Sequence[RankedPrediction]) -> OvoAucResult:
    """Average one-vs-one AUC over class pairs.

    For each unordered pair (i, j) only samples whose ground truth holds
    exactly one of the two classes participate. The pair's AUC averages
    the two directional separabilities (by score_i and by score_j); pairs
    with an empty side are skipped and reported.
    """

    if not preds:
        raise ValueError("prediction list must be non-empty")
    score_matrix = np.array([p.scores for p in preds])
    truth_matrix = np.zeros((len(preds), NUM_INTENTIONS), dtype=bool)
    for row, pred in enumerate(preds):
        for c in pred.ground_truth:
            truth_matrix[row, int(c)] = True

    pair_aucs: dict[tuple[int, int], float] = {}
    pair_counts: dict[tuple[int, int], tuple[int, int]] = {}
    skipped: list[tuple[int, int]] = []
    for i, j in itertools.combinations(range(NUM_INTENTIONS), 2):
        side_i = truth_matrix[:, i] & ~truth_matrix[:, j]
        side_j = truth_matrix[:, j] & ~truth_matrix[:, i]
        n_i, n_j = int(side_i.sum()), int(side_j.sum())
        if n_i == 0 or n_j == 0:
            skipped.append((i, j))
            continue
        a_ij = _one_sided_auc(score_matrix[side_i, i], score_matrix[side_j, i])
        a_ji = _one_sided_auc(score_matrix[side_j, j], score_matrix[side_i, j])
        pair_aucs[(i, j)] = (a_ij + a_ji) / 2
        pair_counts[(i, j)] = (n_i, n_j)
    if not pair_aucs:
        raise ValueError("no class pair has samples on both sides")
    return OvoAucResult(
        average=sum(pair_aucs.values()) / len(pair_aucs),
        pair_aucs=pair_aucs,
        pair_counts=pair_counts,
        skipped_pairs=tuple(skipped),
    )


# --- inter-rater agreement -----------------------------------------------


@dataclass(frozen=True)
class AgreementTable:
    """Two raters' binary codes over the same items, one category."""

    rater_a: tuple[int, ...]
    rater_b: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.rater_a) != len(self.rater_b):
            raise ValueError("raters must code the same number of items")
        if len(self.rater_a) < 2:
            raise ValueError("agreement needs at least 2 items")
        for value in self.rater_a + self.rater_b:
            if value not in (0, 1):
                raise ValueError("codes must be binary (0 or 1)")


def krippendorff_alpha(table: AgreementTable) -> float | None:
    """Nominal-metric alpha = 1 - D_o/D_e from the coincidence matrix.

    Each item contributes its two codes as a coincidence pair in both
    orders. Returns None when expected disagreement is zero (every code
    identical), where alpha is undefined.
    """

    coincidence = np.zeros((2, 2))
    for a, b in zip(table.rater_a, table.rater_b):
        coincidence[a, b] += 1
        coincidence[b, a] += 1
    n_c = coincidence.sum(axis=1)
    n = n_c.sum()
    observed = coincidence[0, 1] + coincidence[1, 0]
    expected = 2 * n_c[0] * n_c[1] / (n - 1)
    if expected == 0:
        return None
    return float(1.0 - observed / expected)


def intention_agreement(
    labels_a: Sequence[frozenset[Intention]],
    labels_b: Sequence[frozenset[Intention]],
) -> dict[str, float | None]:
    """Per-intention alpha from two raters' label sets over shared items."""

    if len(labels_a) != len(labels_b):
        raise ValueError("raters must annotate the same items")
    out: dict[str, float | None] = {}
    for intention in Intention:
        table = AgreementTable(
            rater_a=tuple(int(intention in labels) for labels in labels_a),
            rater_b=tuple(int(intention in labels) for labels in labels_b),
        )
        out[intention.code] = krippendorff_alpha(table)
    return out


# --- the combined report used by `evaluate` and the CV runner ------------

REPORT_KS = (1, 2, 3)


def full_report(
    preds: Sequence[RankedPrediction], threshold: float = 0.5
) -> dict:
    """Every metric over one prediction pool, as a JSON-ready dict."""

    from .head import refine  # local import; head depends on nothing here

    refined_pairs = [
        (refine(np.asarray(p.scores), threshold), p.ground_truth) for p in preds
    ]
    micro = micro_prf(refined_pairs)
    report: dict = {
        "n_samples": len(preds),
        "threshold": threshold,
        "micro": micro.to_dict(),
        "at_k": {},
    }
    for k in REPORT_KS:
        p, r, f1 = precision_recall_f1_at_k(preds, k)
        report["at_k"][str(k)] = {
            "precision": p,
            "recall": r,
            "f1": f1,
            "accuracy": top_k_accuracy(preds, k),
        }
    try:
        report["ovo_auc"] = ovo_auc(preds).to_dict()
    except ValueError:
        report["ovo_auc"] = None
    return report
