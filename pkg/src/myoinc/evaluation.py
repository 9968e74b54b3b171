"""Online performance metrics: motion completion, proportional speed,
motion efficacy, and confusion matrices."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from myoinc.errors import CalibrationError, DataError
from myoinc.labels import MotionLabel

EFFICACY_MODES = ("literal", "speed_weighted")


@dataclass(frozen=True)
class WindowOutcome:
    predicted: MotionLabel
    target: MotionLabel
    prop: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.prop <= 1.0:
            raise ValueError(f"prop must lie in [0, 1], got {self.prop}")

    @property
    def est(self) -> int:
        return int(self.predicted == self.target)


def _require(outcomes) -> Sequence[WindowOutcome]:
    if len(outcomes) == 0:
        raise DataError("no outcomes to score")
    return outcomes


def motion_completion(outcomes: Sequence[WindowOutcome]) -> float:
    """Percentage of windows whose prediction hit the target."""
    _require(outcomes)
    return 100.0 * sum(o.est for o in outcomes) / len(outcomes)


def mean_abs(window_samples) -> float:
    return float(np.mean(np.abs(np.asarray(window_samples, dtype=np.float64))))


def proportional_speed(window_samples, reference: float) -> float:
    """Speed command in [0, 1]: window mean |x| over a calibration reference."""
    if not reference > 0:
        raise CalibrationError(f"reference amplitude must be positive, got {reference}")
    return float(min(max(mean_abs(window_samples) / reference, 0.0), 1.0))


def calibrate_reference(train_mean_abs, percentile: float = 95.0) -> float:
    """Reference amplitude for one class: percentile of training-window mean |x|."""
    values = np.asarray(train_mean_abs, dtype=np.float64)
    if values.size == 0:
        raise CalibrationError("no training windows to calibrate from")
    return float(np.percentile(values, percentile))


def motion_efficacy(outcomes: Sequence[WindowOutcome], mode: str = "literal") -> float:
    """Efficacy percentage.

    ``literal``: the per-window ratio ``(prop * est) / prop`` reduces to
    ``est``; windows with ``prop == 0`` are skipped (0/0), the rest averaged.
    ``speed_weighted``: mean of ``est * prop`` over all windows.
    """
    _require(outcomes)
    mode = mode.replace("-", "_")
    if mode == "literal":
        moving = [o for o in outcomes if o.prop > 0]
        if not moving:
            return 0.0
        return 100.0 * sum(o.est for o in moving) / len(moving)
    if mode == "speed_weighted":
        return 100.0 * sum(o.est * o.prop for o in outcomes) / len(outcomes)
    raise ValueError(f"unknown efficacy mode {mode!r}; use one of {EFFICACY_MODES}")


@dataclass
class TrialReport:
    outcomes: list[WindowOutcome]
    mc_percent: float
    efficacy_percent: float
    mode: str = "literal"

    @classmethod
    def from_outcomes(cls, outcomes, mode: str = "literal") -> "TrialReport":
        outcomes = list(outcomes)
        return cls(outcomes, motion_completion(outcomes), motion_efficacy(outcomes, mode),
                   mode.replace("-", "_"))


@dataclass
class ConfusionMatrix:
    labels: list[MotionLabel]
    counts: np.ndarray = field(repr=False)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def per_class_accuracy(self) -> np.ndarray:
        rows = self.counts.sum(axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(rows > 0, np.diag(self.counts) / np.maximum(rows, 1), np.nan)

    def accuracy(self) -> float:
        return float(np.trace(self.counts)) / self.total if self.total else float("nan")

    def to_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["true\\pred"] + [lab.name for lab in self.labels])
        for lab, row in zip(self.labels, self.counts):
            w.writerow([lab.name] + [int(v) for v in row])
        return out.getvalue()

    def to_dict(self) -> dict:
        return {
            "labels": [lab.name for lab in self.labels],
            "counts": self.counts.astype(int).tolist(),
        }


def confusion(outcomes=None, *, targets=None, predictions=None,
              labels: Sequence[MotionLabel] | None = None) -> ConfusionMatrix:
    """Rows are true labels, columns predicted.

    Pass either ``outcomes`` or both ``targets`` and ``predictions``. When
    ``labels`` is given, any label outside it is an error; otherwise the label
    set is every label seen, ordered by id.
    """
    if outcomes is not None:
        targets = [o.target for o in outcomes]
        predictions = [o.predicted for o in outcomes]
    if targets is None or predictions is None:
        raise ValueError("need outcomes or targets + predictions")
    if len(targets) != len(predictions):
        raise DataError(f"{len(targets)} targets vs {len(predictions)} predictions")
    if labels is None:
        labels = sorted(set(targets) | set(predictions))
    labels = list(labels)
    index = {lab: i for i, lab in enumerate(labels)}
    counts = np.zeros((len(labels), len(labels)), dtype=np.int64)
    for t, p in zip(targets, predictions):
        try:
            counts[index[t], index[p]] += 1
        except KeyError as exc:
            raise DataError(f"unknown label {exc.args[0]!r}") from None
    return ConfusionMatrix(labels, counts)
