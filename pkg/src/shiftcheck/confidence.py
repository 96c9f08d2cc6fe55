"""Confidence-based accuracy estimators: ATC threshold fitting and DoC.

The ATC threshold is calibrated so that the fraction of validation samples
at or below it matches the validation error rate; at test time the estimate
is the fraction of samples whose confidence strictly exceeds the threshold.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .calibration import ConfidenceVector, TemperatureModel


@dataclass(frozen=True)
class AtcModel:
    global_threshold: float
    per_class_threshold: Optional[np.ndarray] = None
    per_class_valid: Optional[np.ndarray] = None
    temperature: Optional[TemperatureModel] = None

    @property
    def classwise(self) -> bool:
        return self.per_class_threshold is not None


def _threshold(conf: np.ndarray, correct: np.ndarray) -> float:
    """k-th smallest confidence with k = round(error_rate * N); 0.0 when k = 0
    so every positive confidence passes the strict > check."""
    n = len(conf)
    err = 1.0 - float(correct.mean())
    k = int(round(err * n))
    if k == 0:
        return 0.0
    return float(np.sort(conf)[k - 1])


def fit_atc(
    val_conf: ConfidenceVector,
    val_labels: np.ndarray,
    classwise: bool = False,
    min_samples: int = 20,
    n_classes: Optional[int] = None,
    temperature: Optional[TemperatureModel] = None,
) -> AtcModel:
    """Calibrate the confidence threshold on the validation set.

    In class-wise mode the rule is applied per predicted class, falling back
    to the global threshold for classes with fewer than ``min_samples``
    predicted validation samples.
    """
    if len(val_conf) == 0:
        raise ValueError("empty validation set")
    labels = np.asarray(val_labels)
    correct = val_conf.pred == labels
    global_threshold = _threshold(val_conf.conf, correct)
    if not classwise:
        return AtcModel(global_threshold=global_threshold, temperature=temperature)

    if n_classes is None:
        n_classes = int(val_conf.pred.max()) + 1
    per_class = np.full(n_classes, global_threshold, dtype=np.float64)
    valid = np.zeros(n_classes, dtype=bool)
    for c in range(n_classes):
        mask = val_conf.pred == c
        if int(mask.sum()) >= min_samples:
            per_class[c] = _threshold(val_conf.conf[mask], correct[mask])
            valid[c] = True
    return AtcModel(
        global_threshold=global_threshold,
        per_class_threshold=per_class,
        per_class_valid=valid,
        temperature=temperature,
    )


def thresholds_for(model: AtcModel, pred: np.ndarray) -> np.ndarray:
    """Per-sample threshold keyed by predicted class (global when not classwise)."""
    if not model.classwise:
        return np.full(len(pred), model.global_threshold)
    per_class = np.where(
        model.per_class_valid, model.per_class_threshold, model.global_threshold
    )
    return per_class[np.asarray(pred)]


def atc_estimate(test_conf: ConfidenceVector, model: AtcModel) -> Tuple[float, np.ndarray]:
    """Fraction of test samples whose confidence strictly exceeds the threshold.

    Returns (estimate, kept mask) so the mask can be intersected with a
    distance-check mask downstream.
    """
    if len(test_conf) == 0:
        raise ValueError("empty test set")
    kept = test_conf.conf > thresholds_for(model, test_conf.pred)
    return float(kept.mean()), kept


def doc_estimate(
    val_conf: ConfidenceVector,
    val_labels: np.ndarray,
    test_conf: ConfidenceVector,
) -> float:
    """Difference-of-confidence estimate: validation accuracy corrected by the
    drop in mean confidence, clamped to [0, 1]."""
    if len(val_conf) == 0 or len(test_conf) == 0:
        raise ValueError("empty input")
    acc_val = float((val_conf.pred == np.asarray(val_labels)).mean())
    raw = acc_val - (float(val_conf.conf.mean()) - float(test_conf.conf.mean()))
    return float(np.clip(raw, 0.0, 1.0))
