"""Evaluation harness: confusion matrices, metrics, threshold search.

The positive class is ``branch`` everywhere. Metric subterms that would
divide by zero are defined as 0 and flagged instead of raising, so
degenerate splits still evaluate.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .dataset_builder import LABEL_BRANCH, LABELS, LabeledExample
from .errors import ChadpodError
from .scorer import Scorer, ScoreRequest, classify


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def as_dict(self) -> dict[str, int]:
        return {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn}


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    balanced_accuracy: float
    f1: float
    flags: tuple[str, ...] = ()

    def as_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "balanced_accuracy": self.balanced_accuracy,
            "f1": self.f1,
            "flags": list(self.flags),
        }


def confusion(predictions: Sequence[str], golds: Sequence[str]) -> ConfusionMatrix:
    if len(predictions) != len(golds):
        raise ChadpodError(
            f"length mismatch: {len(predictions)} predictions vs {len(golds)} golds"
        )
    if not predictions:
        raise ChadpodError("cannot build a confusion matrix from no examples")
    for value in (*predictions, *golds):
        if value not in LABELS:
            raise ChadpodError(f"unknown label {value!r}")
    tp = fp = tn = fn = 0
    for pred, gold in zip(predictions, golds):
        if gold == LABEL_BRANCH:
            if pred == LABEL_BRANCH:
                tp += 1
            else:
                fn += 1
        else:
            if pred == LABEL_BRANCH:
                fp += 1
            else:
                tn += 1
    return ConfusionMatrix(tp=tp, fp=fp, tn=tn, fn=fn)


def compute_metrics(m: ConfusionMatrix) -> Metrics:
    total = m.total()
    if total == 0:
        raise ChadpodError("empty confusion matrix")
    flags: list[str] = []

    def safe_div(num: int, den: int, flag: str) -> float:
        if den == 0:
            flags.append(flag)
            return 0.0
        return num / den

    accuracy = (m.tp + m.tn) / total
    tpr = safe_div(m.tp, m.tp + m.fn, "tpr_zero_division")
    tnr = safe_div(m.tn, m.tn + m.fp, "tnr_zero_division")
    balanced = 0.5 * (tpr + tnr)
    f1 = safe_div(2 * m.tp, 2 * m.tp + m.fp + m.fn, "f1_zero_division")
    return Metrics(accuracy=accuracy, balanced_accuracy=balanced, f1=f1, flags=tuple(flags))


@dataclass
class EvalReport:
    threshold: float
    matrix: ConfusionMatrix
    metrics: Metrics
    records: list[dict]  # per-example: {id, gold, p, pred}

    def as_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "examples": self.matrix.total(),
            "matrix": self.matrix.as_dict(),
            "metrics": self.metrics.as_dict(),
            "records": self.records,
        }


def requests_for(examples: Sequence[LabeledExample]) -> list[ScoreRequest]:
    return [ScoreRequest(id=e.id, prefix=e.prefix, postfix=e.postfix) for e in examples]


def evaluate(scorer: Scorer, dataset: Sequence[LabeledExample], threshold: float = 0.5) -> EvalReport:
    """Score a dataset, classify at ``threshold``, and report the matrix,
    the metrics, and per-example records for audit."""
    if not dataset:
        raise ChadpodError("cannot evaluate an empty dataset")
    probs = scorer.score_batch(requests_for(dataset))
    preds = [classify(p, threshold) for p in probs]
    golds = [e.label for e in dataset]
    matrix = confusion(preds, golds)
    records = [
        {"id": e.id, "gold": e.label, "p": p, "pred": pred}
        for e, p, pred in zip(dataset, probs, preds)
    ]
    return EvalReport(
        threshold=threshold,
        matrix=matrix,
        metrics=compute_metrics(matrix),
        records=records,
    )


def grid_search_threshold(
    scorer: Scorer, dev: Sequence[LabeledExample], grid: Sequence[float]
) -> tuple[float, Metrics]:
    """Pick the grid threshold maximizing dev accuracy (ties go to the
    lowest threshold). Scores each example once."""
    if not dev:
        raise ChadpodError("cannot grid-search on an empty dev set")
    if not grid:
        raise ChadpodError("threshold grid is empty")
    for t in grid:
        if not 0.0 < t < 1.0:
            raise ChadpodError(f"grid threshold {t} outside (0, 1)")
    probs = scorer.score_batch(requests_for(dev))
    golds = [e.label for e in dev]

    best: tuple[float, Metrics] | None = None
    for t in sorted(grid):
        preds = [classify(p, t) for p in probs]
        m = compute_metrics(confusion(preds, golds))
        if best is None or m.accuracy > best[1].accuracy:
            best = (t, m)
    return best
