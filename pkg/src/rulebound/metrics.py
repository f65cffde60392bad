"""Per-class threshold tuning, multi-label metrics, and report assembly."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .asp import ViolationReport, audit_violations, render_violation_report
from .corpus import LabelVocab
from .rules import RuleSet

logger = logging.getLogger(__name__)

THRESHOLD_MIN = 0.05
THRESHOLD_MAX = 0.95


@dataclass(frozen=True)
class Thresholds:
    """Per-label decision thresholds, each within [0.05, 0.95]."""

    t: np.ndarray

    def __post_init__(self):
        if np.any(self.t < THRESHOLD_MIN) or np.any(self.t > THRESHOLD_MAX):
            raise ValueError("thresholds must lie in [0.05, 0.95]")


@dataclass(frozen=True)
class PredictionBatch:
    """Probabilities and thresholded binary decisions for a set of documents."""

    probs: np.ndarray  # (N, m)
    decisions: np.ndarray  # (N, m) in {0, 1}
    vocab: LabelVocab
    doc_ids: tuple[str, ...]

    def __post_init__(self):
        n, m = self.probs.shape
        if self.decisions.shape != (n, m) or m != len(self.vocab) or len(self.doc_ids) != n:
            raise ValueError("prediction batch shapes are inconsistent")

    @property
    def num_docs(self) -> int:
        return self.probs.shape[0]


@dataclass(frozen=True)
class PerLabelStats:
    label: str
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class MetricsReport:
    micro_f1: float
    macro_f1: float
    hamming: float
    per_label: tuple[PerLabelStats, ...]
    consistency: ViolationReport


def _binary_f1(preds: np.ndarray, targets: np.ndarray) -> float:
    tp = int(np.sum((preds == 1) & (targets == 1)))
    fp = int(np.sum((preds == 1) & (targets == 0)))
    fn = int(np.sum((preds == 0) & (targets == 1)))
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom else 0.0


def tune_thresholds(probs: np.ndarray, targets: np.ndarray) -> Thresholds:
    """Per-label threshold sweep maximizing that label's F1 on validation.

    Candidates are the midpoints of consecutive sorted unique probabilities
    plus 0.5, clamped into [0.05, 0.95] before scoring so the guarantee
    "tuned F1 >= F1 at 0.5" survives clamping. Ties prefer the candidate
    closest to 0.5, then the smaller one. Labels without positive targets
    keep the default threshold 0.5.
    """
    if probs.shape != targets.shape or probs.ndim != 2:
        raise ValueError("probs and targets must share shape (N, m)")
    n, m = probs.shape
    out = np.full(m, 0.5)
    for j in range(m):
        y = targets[:, j]
        if y.sum() == 0:
            logger.info("label %d has no positive targets; threshold fixed at 0.5", j)
            continue
        uniq = np.unique(probs[:, j])
        candidates = {0.5}
        candidates.update(
            float(np.clip((lo + hi) / 2.0, THRESHOLD_MIN, THRESHOLD_MAX))
            for lo, hi in zip(uniq[:-1], uniq[1:])
        )
        best = None
        for cand in sorted(candidates):
            score = (
                _binary_f1((probs[:, j] >= cand).astype(np.int8), y),
                -abs(cand - 0.5),
                -cand,
            )
            if best is None or score > best[0]:
                best = (score, cand)
        out[j] = best[1]
    return Thresholds(t=out)


def apply_thresholds(
    probs: np.ndarray,
    thresholds: Thresholds,
    vocab: LabelVocab,
    doc_ids: tuple[str, ...],
) -> PredictionBatch:
    """Binary decisions with the inclusive convention: active iff prob >= t."""
    if probs.shape[1] != len(thresholds.t):
        raise ValueError("probability matrix and thresholds disagree on label count")
    return PredictionBatch(
        probs=probs,
        decisions=(probs >= thresholds.t).astype(np.int8),
        vocab=vocab,
        doc_ids=doc_ids,
    )


def micro_f1(decisions: np.ndarray, targets: np.ndarray) -> float:
    """F1 from globally pooled true/false positive and negative counts."""
    return _binary_f1(np.asarray(decisions).ravel(), np.asarray(targets).ravel())


def per_label_stats(
    decisions: np.ndarray,
    targets: np.ndarray,
    vocab: LabelVocab,
    zero_support: str = "one",
) -> tuple[PerLabelStats, ...]:
    """Per-label precision/recall/F1.

    A label with no positives and no predictions is vacuously perfect under
    the default "one" convention; the "zero" convention scores it 0 instead.
    """
    if zero_support not in ("one", "zero"):
        raise ValueError("zero_support must be 'one' or 'zero'")
    stats = []
    for j, name in enumerate(vocab.labels):
        pred = np.asarray(decisions)[:, j]
        y = np.asarray(targets)[:, j]
        tp = int(np.sum((pred == 1) & (y == 1)))
        fp = int(np.sum((pred == 1) & (y == 0)))
        fn = int(np.sum((pred == 0) & (y == 1)))
        if tp + fp + fn == 0:
            value = 1.0 if zero_support == "one" else 0.0
            stats.append(PerLabelStats(name, value, value, value, support=0))
            continue
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * tp / (2 * tp + fp + fn)
        stats.append(PerLabelStats(name, precision, recall, f1, support=int(y.sum())))
    return tuple(stats)


def macro_f1(
    decisions: np.ndarray,
    targets: np.ndarray,
    vocab: LabelVocab,
    zero_support: str = "one",
) -> float:
    """Unweighted mean of per-label F1 scores."""
    stats = per_label_stats(decisions, targets, vocab, zero_support)
    return float(np.mean([s.f1 for s in stats]))


def hamming_loss(decisions: np.ndarray, targets: np.ndarray) -> float:
    """Fraction of label cells where prediction and target disagree."""
    return float(np.mean(np.asarray(decisions) != np.asarray(targets)))


def compute_metrics(
    batch: PredictionBatch,
    targets: np.ndarray,
    rules: RuleSet,
    zero_support: str = "one",
) -> MetricsReport:
    """Classification metrics plus the consistency audit for one batch."""
    if np.asarray(targets).shape != batch.decisions.shape:
        raise ValueError("targets must match the decision matrix shape")
    stats = per_label_stats(batch.decisions, targets, batch.vocab, zero_support)
    return MetricsReport(
        micro_f1=micro_f1(batch.decisions, targets),
        macro_f1=float(np.mean([s.f1 for s in stats])),
        hamming=hamming_loss(batch.decisions, targets),
        per_label=stats,
        consistency=audit_violations(batch, rules),
    )


def render_metrics_report(report: MetricsReport) -> dict:
    """JSON-ready view with the standard result columns."""
    return {
        "micro_f1": round(report.micro_f1, 6),
        "macro_f1": round(report.macro_f1, 6),
        "hamming": round(report.hamming, 6),
        "violations": report.consistency.total,
        "viol_per_doc": round(report.consistency.per_doc, 4),
        "viol_per_1k": round(report.consistency.per_1k, 1),
        "per_label": [
            {
                "label": s.label,
                "precision": round(s.precision, 6),
                "recall": round(s.recall, 6),
                "f1": round(s.f1, 6),
                "support": s.support,
            }
            for s in report.per_label
        ],
        "consistency": render_violation_report(report.consistency),
    }
