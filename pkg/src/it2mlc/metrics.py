"""Multi-label evaluation metrics on binary predictions."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import InputError, ShapeError

METRIC_NAMES = ("example_f1", "micro_f1", "macro_f1", "ha")


def _pair(preds, trues):
    p = np.atleast_2d(np.asarray(preds))
    t = np.atleast_2d(np.asarray(trues))
    if p.shape != t.shape:
        raise ShapeError(f"predictions {p.shape} and groundtruth {t.shape} differ in shape")
    return p.astype(bool), t.astype(bool)


@dataclass(frozen=True)
class ConfusionCounts:
    tp: np.ndarray
    fp: np.ndarray
    fn: np.ndarray
    tn: np.ndarray

    @classmethod
    def from_predictions(cls, preds, trues) -> "ConfusionCounts":
        p, t = _pair(preds, trues)
        return cls((p & t).sum(0), (p & ~t).sum(0), (~p & t).sum(0), (~p & ~t).sum(0))

    @property
    def n_instances(self) -> int:
        return int((self.tp + self.fp + self.fn + self.tn)[0])

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp,
                               self.fn + other.fn, self.tn + other.tn)


def _mean(values) -> float:
    # correctly rounded sum, so the result does not depend on instance or label order
    values = np.ravel(values)
    return math.fsum(values.tolist()) / values.size


def hamming_accuracy(preds, trues) -> float:
    p, t = _pair(preds, trues)
    return _mean(p == t)


def example_f1(preds, trues) -> float:
    """Mean over instances of ``2|p & t| / (|p| + |t|)``; an empty-empty row scores 1."""
    p, t = _pair(preds, trues)
    inter = (p & t).sum(1)
    total = p.sum(1) + t.sum(1)
    per = np.where(total == 0, 1.0, 2.0 * inter / np.maximum(total, 1))
    return _mean(per)


def micro_f1(counts: ConfusionCounts, literal: bool = False) -> float:
    """Pooled F1, ``2 tp / (2 tp + fp + fn)``.

    ``literal=True`` drops the factor 2 from the numerator, a form that tops
    out at 0.5; it exists only for auditing published numbers.
    """
    tp, fp, fn = counts.tp.sum(), counts.fp.sum(), counts.fn.sum()
    den = 2 * tp + fp + fn
    if den == 0:
        return 1.0
    return float((tp if literal else 2 * tp) / den)


def macro_f1(counts: ConfusionCounts, empty_label: float = 1.0) -> float:
    """Per-label F1 averaged over labels; labels never predicted nor present score ``empty_label``."""
    den = 2 * counts.tp + counts.fp + counts.fn
    per = np.where(den == 0, empty_label, 2 * counts.tp / np.maximum(den, 1))
    return _mean(per)


@dataclass(frozen=True)
class MetricsReport:
    ha: float
    example_f1: float
    micro_f1: float
    macro_f1: float
    n_instances: int
    seed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        return cls(float(d["ha"]), float(d["example_f1"]), float(d["micro_f1"]),
                   float(d["macro_f1"]), int(d["n_instances"]), int(d.get("seed", 0)))

    def get(self, name: str) -> float:
        return float(getattr(self, name))


def evaluate(preds, trues, seed: int = 0, literal_micro: bool = False,
             macro_empty: float = 1.0) -> MetricsReport:
    counts = ConfusionCounts.from_predictions(preds, trues)
    return MetricsReport(
        ha=hamming_accuracy(preds, trues),
        example_f1=example_f1(preds, trues),
        micro_f1=micro_f1(counts, literal=literal_micro),
        macro_f1=macro_f1(counts, empty_label=macro_empty),
        n_instances=counts.n_instances,
        seed=seed,
    )


def delta_m(values: dict) -> dict:
    """``M(lam) - max M`` for every entry, so the best setting maps to 0 and the rest are negative."""
    if not values:
        raise InputError("delta_m needs at least one entry")
    best = max(values.values())
    return {k: v - best for k, v in values.items()}
