"""Per-class precision/recall/F1 and confusion counts."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .errors import ContractError


@dataclass
class ClassMetrics:
    label: str
    support: int
    precision: float
    recall: float
    f1: float


def score(gold: Sequence[str], pred: Sequence[str], labels: Sequence[str]
          ) -> tuple[list[ClassMetrics], float]:
    """One-vs-rest P/R/F1 per label plus the support-weighted F1 average.

    Zero-support labels keep a metrics row but are excluded from the average.
    """
    if len(gold) != len(pred):
        raise ContractError(f"score: {len(gold)} gold labels vs {len(pred)} predictions")
    tp = {label: 0 for label in labels}
    fp = dict(tp)
    fn = dict(tp)
    for g, p in zip(gold, pred):
        if g == p:
            tp[g] += 1
        else:
            fn[g] += 1
            fp[p] += 1
    rows = []
    weighted = 0.0
    total_support = 0
    for label in labels:
        support = tp[label] + fn[label]
        prec = tp[label] / (tp[label] + fp[label]) if tp[label] + fp[label] else 0.0
        rec = tp[label] / support if support else 0.0
        f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
        rows.append(ClassMetrics(label, support, prec, rec, f1))
        if support:
            weighted += support * f1
            total_support += support
    return rows, (weighted / total_support if total_support else 0.0)


def weighted_f1(gold: Sequence[str], pred: Sequence[str], labels: Sequence[str]) -> float:
    return score(gold, pred, labels)[1]


def confusion(gold: Sequence[str], pred: Sequence[str], labels: Sequence[str]
              ) -> list[list[int]]:
    """matrix[g][p] counts, indexed by position in ``labels``."""
    if len(gold) != len(pred):
        raise ContractError(f"confusion: {len(gold)} gold labels vs {len(pred)} predictions")
    index = {label: i for i, label in enumerate(labels)}
    matrix = [[0] * len(labels) for _ in labels]
    for g, p in zip(gold, pred):
        matrix[index[g]][index[p]] += 1
    return matrix
