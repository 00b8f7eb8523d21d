"""Classification metrics and the paired t-test.

F1 follows the percent convention 2*P*R/(P+R)*100.  The two-sided t-test
p-value is computed from the regularized incomplete beta function
I_x(df/2, 1/2) at x = df/(df + t^2), evaluated by a Lentz-style continued
fraction to well below 1e-8 absolute error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

__all__ = [
    "ConfusionCounts",
    "PrecisionRecall",
    "PairedTestResult",
    "precision_recall",
    "f1_score",
    "temporal_iou",
    "paired_t_test",
    "regularized_incomplete_beta",
    "student_t_two_sided_p",
]


@dataclass
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def add(self, predicted_positive: bool, actual_positive: bool) -> None:
        if predicted_positive and actual_positive:
            self.tp += 1
        elif predicted_positive:
            self.fp += 1
        elif actual_positive:
            self.fn += 1
        else:
            self.tn += 1

    def to_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn}


class PrecisionRecall(NamedTuple):
    precision: float
    recall: float
    degenerate: bool  # true when a zero denominator forced a 0


def precision_recall(counts: ConfusionCounts) -> PrecisionRecall:
    """tp/(tp+fp) and tp/(tp+fn); zero denominators yield 0 with a flag."""
    degenerate = False
    if counts.tp + counts.fp > 0:
        precision = counts.tp / (counts.tp + counts.fp)
    else:
        precision, degenerate = 0.0, True
    if counts.tp + counts.fn > 0:
        recall = counts.tp / (counts.tp + counts.fn)
    else:
        recall, degenerate = 0.0, True
    return PrecisionRecall(precision, recall, degenerate)


def f1_score(precision: float, recall: float) -> float:
    """Harmonic mean of precision and recall, in percent."""
    if not (0.0 <= precision <= 1.0 and 0.0 <= recall <= 1.0):
        raise ValueError("precision and recall must be in [0, 1]")
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall) * 100.0


def temporal_iou(pred_frames: Iterable[int], gt_frames: Iterable[int]) -> float:
    """|pred & gt| / |pred | gt|.  Both empty -> 1.0, one empty -> 0.0."""
    pred = set(int(i) for i in pred_frames)
    gt = set(int(i) for i in gt_frames)
    if not pred and not gt:
        return 1.0
    union = pred | gt
    return len(pred & gt) / len(union)


def _beta_continued_fraction(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (Lentz's method)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, 400):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-15:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction failed for a={a}, b={b}, x={x}")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) for a, b > 0 and x in [0, 1]."""
    if a <= 0 or b <= 0:
        raise ValueError("shape parameters must be positive")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_continued_fraction(a, b, x) / a
    return 1.0 - front * _beta_continued_fraction(b, a, 1.0 - x) / b


def student_t_two_sided_p(t: float, df: int) -> float:
    """P(|T| >= |t|) for T ~ Student-t with df degrees of freedom."""
    if df < 1:
        raise ValueError("degrees of freedom must be >= 1")
    if not math.isfinite(t):
        return 0.0
    x = df / (df + t * t)
    return min(1.0, max(0.0, regularized_incomplete_beta(df / 2.0, 0.5, x)))


@dataclass
class PairedTestResult:
    t_statistic: float
    degrees_of_freedom: int
    p_value_two_sided: float
    mean_difference: float

    def to_dict(self) -> dict:
        return {
            "t_statistic": self.t_statistic,
            "degrees_of_freedom": self.degrees_of_freedom,
            "p_value_two_sided": self.p_value_two_sided,
            "mean_difference": self.mean_difference,
        }


def paired_t_test(xs: Sequence[float], ys: Sequence[float]) -> PairedTestResult:
    """Two-sided paired t-test on matched score sequences.

    Raises ValueError for n < 2, mismatched lengths, or zero-variance
    differences (the statistic is undefined there).
    """
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise ValueError("xs and ys must be 1-D sequences of equal length")
    n = xs.size
    if n < 2:
        raise ValueError("paired t-test needs at least 2 pairs")
    d = xs - ys
    mean = float(d.mean())
    sd = float(d.std(ddof=1))
    if sd == 0.0:
        raise ValueError("zero-variance differences: paired t statistic undefined")
    t = mean / (sd / math.sqrt(n))
    return PairedTestResult(
        t_statistic=t,
        degrees_of_freedom=n - 1,
        p_value_two_sided=student_t_two_sided_p(t, n - 1),
        mean_difference=mean,
    )
