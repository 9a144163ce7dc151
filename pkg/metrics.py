"""Evaluation scores with the theft class (1) as positive."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np  # type: ignore
import pandas as pd  # type: ignore
from sklearn.metrics import auc, average_precision_score, confusion_matrix, precision_recall_curve, roc_curve  # type: ignore

from exceptions import InvalidInputError

CSV_FORMAT = "%.17g"


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def swapped(self) -> ConfusionCounts:
        """The same counts with class 0 taken as positive."""
        return ConfusionCounts(tp=self.tn, fp=self.fn, tn=self.tp, fn=self.fp)

    def to_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn}


@dataclass(frozen=True)
class RateScores:
    precision: float
    recall: float
    fpr: float
    f1: float
    degenerate: frozenset = frozenset()

    def __iter__(self):
        return iter((self.precision, self.recall, self.fpr, self.f1))


@dataclass(frozen=True)
class CurvePoints:
    """(threshold, x, y) triples with strictly decreasing thresholds.

    ROC curves hold (FPR, TPR), PR curves (recall, precision).
    """

    kind: str
    thresholds: np.ndarray
    x: np.ndarray
    y: np.ndarray

    def __len__(self) -> int:
        return len(self.thresholds)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"threshold": self.thresholds, "x": self.x, "y": self.y})

    def save_csv(self, path: str) -> None:
        self.to_frame().to_csv(path, index=False, float_format=CSV_FORMAT, lineterminator="\n")

    @classmethod
    def load_csv(cls, path: str, kind: str) -> CurvePoints:
        frame = pd.read_csv(path, dtype=np.float64, float_precision="round_trip")
        return cls(kind, frame["threshold"].to_numpy(), frame["x"].to_numpy(), frame["y"].to_numpy())


def _binary(name: str, values) -> np.ndarray:
    values = np.asarray(values)
    if values.ndim != 1:
        raise InvalidInputError(f"{name} must be one-dimensional")
    if not np.isin(values, (0, 1)).all():
        raise InvalidInputError(f"{name} holds labels outside {{0, 1}}")
    return values.astype(np.int64)


def confusion(y_true, y_pred) -> ConfusionCounts:
    y_true, y_pred = _binary("y_true", y_true), _binary("y_pred", y_pred)
    if len(y_true) != len(y_pred):
        raise InvalidInputError(f"{len(y_true)} labels but {len(y_pred)} predictions")
    tn, fp, fn, tp = confusion_matrix(y_true, y_pred, labels=[0, 1]).ravel()
    return ConfusionCounts(tp=int(tp), fp=int(fp), tn=int(tn), fn=int(fn))


def _ratio(numerator: float, denominator: float) -> Optional[float]:
    return numerator / denominator if denominator else None


def prf1(c: ConfusionCounts) -> RateScores:
    """Precision, recall, false-positive rate and F1; a zero denominator gives 0 and is flagged."""
    flags = set()
    values = {}
    for name, numerator, denominator in (
            ("precision", c.tp, c.tp + c.fp),
            ("recall", c.tp, c.tp + c.fn),
            ("fpr", c.fp, c.tn + c.fp),
    ):
        value = _ratio(numerator, denominator)
        if value is None:
            flags.add(name)
        values[name] = value or 0.0
    f1 = _ratio(2 * values["precision"] * values["recall"], values["precision"] + values["recall"])
    if f1 is None:
        flags.add("f1")
    return RateScores(values["precision"], values["recall"], values["fpr"], f1 or 0.0, frozenset(flags))


def mcc_is_degenerate(c: ConfusionCounts) -> bool:
    return 0 in (c.tp + c.fp, c.tp + c.fn, c.tn + c.fp, c.tn + c.fn)


def mcc(c: ConfusionCounts) -> float:
    if mcc_is_degenerate(c):
        return 0.0
    denominator = math.sqrt(float(c.tp + c.fp) * (c.tp + c.fn) * (c.tn + c.fp) * (c.tn + c.fn))
    return (c.tp * c.tn - c.fp * c.fn) / denominator


def _scored(y_true, scores) -> tuple[np.ndarray, np.ndarray]:
    y_true = _binary("y_true", y_true)
    scores = np.asarray(scores, dtype=np.float64)
    if scores.shape != y_true.shape:
        raise InvalidInputError(f"{len(y_true)} labels but scores of shape {scores.shape}")
    if not np.isfinite(scores).all():
        raise InvalidInputError("scores must be finite")
    return y_true, scores


def roc_auc(y_true, scores) -> tuple[float, CurvePoints]:
    """Trapezoidal area under the ROC curve over every distinct score.

    The first point sits at threshold +inf, (0, 0).
    """
    y_true, scores = _scored(y_true, scores)
    if len(np.unique(y_true)) < 2:
        raise InvalidInputError("ROC needs both classes")
    fpr, tpr, thresholds = roc_curve(y_true, scores, drop_intermediate=False)
    thresholds = thresholds.astype(np.float64)
    thresholds[0] = np.inf
    return float(auc(fpr, tpr)), CurvePoints("roc", thresholds, fpr, tpr)


def pr_auc(y_true, scores) -> tuple[float, CurvePoints]:
    """Step-wise area under the precision-recall curve.

    The curve starts at recall 0 with the precision of the highest threshold.
    """
    y_true, scores = _scored(y_true, scores)
    if not y_true.any():
        raise InvalidInputError("PR needs at least one positive")
    precision, recall, thresholds = precision_recall_curve(y_true, scores)
    # ascending thresholds; the trailing (recall 0, precision 1) point has no threshold
    precision, recall, thresholds = precision[-2::-1], recall[-2::-1], thresholds[::-1].astype(np.float64)
    curve = CurvePoints(
        "pr",
        np.concatenate([[np.inf], thresholds]),
        np.concatenate([[0.0], recall]),
        np.concatenate([[precision[0]], precision]),
    )
    return float(average_precision_score(y_true, scores)), curve


@dataclass
class MetricsReport:
    confusion: ConfusionCounts
    precision: float
    recall: float
    f1: float
    fpr: float
    auc_roc: float
    pr_auc: float
    mcc: float
    flags: list[str] = field(default_factory=list)
    macro: dict[str, float] = field(default_factory=dict)
    roc: Optional[CurvePoints] = None
    pr: Optional[CurvePoints] = None

    def scores(self) -> dict[str, float]:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "fpr": self.fpr,
            "auc_roc": self.auc_roc,
            "pr_auc": self.pr_auc,
            "mcc": self.mcc,
            **{f"macro_{name}": value for name, value in self.macro.items()},
        }

    def to_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "fpr": self.fpr,
            "auc_roc": self.auc_roc,
            "pr_auc": self.pr_auc,
            "mcc": self.mcc,
            "confusion": self.confusion.to_dict(),
            "flags": list(self.flags),
            "macro": dict(self.macro),
        }


def macro_scores(c: ConfusionCounts) -> dict[str, float]:
    """Unweighted means over both classes taken in turn as positive."""
    theft, genuine = prf1(c), prf1(c.swapped())
    return {
        "precision": (theft.precision + genuine.precision) / 2,
        "recall": (theft.recall + genuine.recall) / 2,
        "f1": (theft.f1 + genuine.f1) / 2,
    }


def evaluate_scores(y_true, scores, y_pred=None) -> MetricsReport:
    """Every score of a labelled test set.

    `y_pred` defaults to scores above one half.
    """
    y_true, scores = _scored(y_true, scores)
    if y_pred is None:
        y_pred = (scores > 0.5).astype(np.int64)
    counts = confusion(y_true, y_pred)
    rates = prf1(counts)
    area, roc = roc_auc(y_true, scores)
    pr_area, pr = pr_auc(y_true, scores)
    flags = sorted(rates.degenerate)
    if mcc_is_degenerate(counts):
        flags.append("mcc")
    return MetricsReport(
        confusion=counts,
        precision=rates.precision,
        recall=rates.recall,
        f1=rates.f1,
        fpr=rates.fpr,
        auc_roc=area,
        pr_auc=pr_area,
        mcc=mcc(counts),
        flags=flags,
        macro=macro_scores(counts),
        roc=roc,
        pr=pr,
    )
