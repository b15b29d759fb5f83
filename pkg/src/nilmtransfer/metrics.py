"""Classification and regression accuracy metrics for disaggregation output.

Classification metrics work on ON/OFF state sequences with ON as the positive
class. Regression metrics compare estimated and ground-truth power. Missing
positions (``State.MISSING`` or ``NaN``) are dropped pairwise everywhere, so
``T`` in the averages counts valid pairs only.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import AlignmentError, DegenerateError, EmptyInputError
from .timeseries import PowerSeries, State


class MetricKind(str, enum.Enum):
    CLASSIFICATION = "CLASSIFICATION"
    REGRESSION = "REGRESSION"


CLASSIFICATION_METRICS = ("F1", "PRECISION", "RECALL", "ACCURACY")
REGRESSION_METRICS = ("MAE", "RMSE", "NEP", "NDE")
METRIC_IDS = CLASSIFICATION_METRICS + REGRESSION_METRICS


def metric_kind(metric_id: str) -> MetricKind:
    metric_id = metric_id.upper()
    if metric_id in CLASSIFICATION_METRICS:
        return MetricKind.CLASSIFICATION
    if metric_id in REGRESSION_METRICS:
        return MetricKind.REGRESSION
    raise KeyError(f"unknown metric {metric_id!r}")


@dataclass(frozen=True)
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


@dataclass(frozen=True)
class MetricValue:
    metric_id: str
    value: float
    kind: MetricKind
    degenerate: bool = False

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ValueError(f"{self.metric_id}: metric value must be finite")
        if self.kind is MetricKind.CLASSIFICATION and not 0.0 <= self.value <= 1.0:
            raise ValueError(f"{self.metric_id}: classification value {self.value} outside [0, 1]")
        if self.kind is MetricKind.REGRESSION and self.value < 0:
            raise ValueError(f"{self.metric_id}: regression value {self.value} is negative")

    def __float__(self) -> float:
        return self.value


# --------------------------------------------------------------------------
# classification


def confusion(pred_states, true_states) -> ConfusionCounts:
    pred = np.asarray(pred_states)
    true = np.asarray(true_states)
    if pred.shape != true.shape:
        raise AlignmentError(f"state sequences differ in length: {pred.shape} vs {true.shape}")
    valid = (pred != State.MISSING) & (true != State.MISSING)
    p = pred[valid] == State.ON
    t = true[valid] == State.ON
    tp = int(np.count_nonzero(p & t))
    fp = int(np.count_nonzero(p & ~t))
    fn = int(np.count_nonzero(~p & t))
    tn = int(valid.sum()) - tp - fp - fn
    return ConfusionCounts(tp=tp, fp=fp, tn=tn, fn=fn)


def _ratio(num: int, den: int, metric_id: str) -> MetricValue:
    if den == 0:
        return MetricValue(metric_id, 0.0, MetricKind.CLASSIFICATION, degenerate=True)
    return MetricValue(metric_id, num / den, MetricKind.CLASSIFICATION)


def precision(c: ConfusionCounts) -> MetricValue:
    return _ratio(c.tp, c.tp + c.fp, "PRECISION")


def recall(c: ConfusionCounts) -> MetricValue:
    return _ratio(c.tp, c.tp + c.fn, "RECALL")


def f1(c: ConfusionCounts) -> MetricValue:
    """Harmonic mean of precision and recall.

    Returns 0 flagged ``degenerate`` when precision or recall is undefined or
    both are zero.
    """
    p, r = precision(c), recall(c)
    if p.degenerate or r.degenerate or p.value + r.value == 0:
        return MetricValue("F1", 0.0, MetricKind.CLASSIFICATION, degenerate=True)
    # same value as 2pr/(p+r), with one rounding step
    value = 2 * c.tp / (2 * c.tp + c.fp + c.fn)
    return MetricValue("F1", value, MetricKind.CLASSIFICATION)


def accuracy(c: ConfusionCounts) -> MetricValue:
    return _ratio(c.tp + c.tn, c.total, "ACCURACY")


# --------------------------------------------------------------------------
# regression


def _pairs(pred, truth) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(pred, PowerSeries) and isinstance(truth, PowerSeries):
        if (pred.start, pred.interval) != (truth.start, truth.interval):
            raise AlignmentError("series are not aligned; call align() first")
    p = np.asarray(pred.values if isinstance(pred, PowerSeries) else pred, dtype=float)
    t = np.asarray(truth.values if isinstance(truth, PowerSeries) else truth, dtype=float)
    if p.shape != t.shape:
        raise AlignmentError(f"series differ in length: {p.shape} vs {t.shape}")
    valid = ~(np.isnan(p) | np.isnan(t))
    if not valid.any():
        raise EmptyInputError("no non-missing sample pairs")
    return p[valid], t[valid]


def mae(pred, truth) -> MetricValue:
    p, t = _pairs(pred, truth)
    return MetricValue("MAE", float(np.mean(np.abs(p - t))), MetricKind.REGRESSION)


def rmse(pred, truth) -> MetricValue:
    p, t = _pairs(pred, truth)
    return MetricValue("RMSE", math.sqrt(float(np.mean((p - t) ** 2))), MetricKind.REGRESSION)


def nep(pred, truth) -> MetricValue:
    """Normalised error in assigned power: sum |est - true| / sum true."""
    p, t = _pairs(pred, truth)
    den = float(np.sum(t))
    if den <= 0:
        raise DegenerateError("NEP undefined: ground truth is all zero")
    return MetricValue("NEP", float(np.sum(np.abs(p - t))) / den, MetricKind.REGRESSION)


def nde(pred, truth) -> MetricValue:
    p, t = _pairs(pred, truth)
    den = float(np.sum(t**2))
    if den <= 0:
        raise DegenerateError("NDE undefined: ground truth is all zero")
    return MetricValue("NDE", math.sqrt(float(np.sum((p - t) ** 2)) / den), MetricKind.REGRESSION)


_CLASSIFIERS = {"F1": f1, "PRECISION": precision, "RECALL": recall, "ACCURACY": accuracy}
_REGRESSORS = {"MAE": mae, "RMSE": rmse, "NEP": nep, "NDE": nde}


def compute(metric_id: str, *, counts: ConfusionCounts | None = None, pred=None, truth=None) -> MetricValue:
    """Dispatch by metric id; classification needs ``counts``, regression ``pred``/``truth``."""
    metric_id = metric_id.upper()
    if metric_id in _CLASSIFIERS:
        return _CLASSIFIERS[metric_id](counts)
    if metric_id in _REGRESSORS:
        return _REGRESSORS[metric_id](pred, truth)
    raise KeyError(f"unknown metric {metric_id!r}")
