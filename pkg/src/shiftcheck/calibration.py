"""Temperature scaling of logits and softmax-confidence computation.

Temperatures are fitted by minimizing validation negative log-likelihood
over T in [0.01, 100], either with one global scalar or one scalar per
predicted class (with a fallback to the global value for thin classes).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import optimize

TEMP_MIN = 0.01
TEMP_MAX = 100.0
GRID_POINTS = 50
LOG_TOL = 1e-4


@dataclass(frozen=True)
class TemperatureModel:
    """Fitted temperature(s). ``per_class_t`` is present iff fitted class-wise;
    classes flagged invalid fall back to ``global_t``."""

    global_t: float
    per_class_t: Optional[np.ndarray] = None
    per_class_valid: Optional[np.ndarray] = None

    @property
    def classwise(self) -> bool:
        return self.per_class_t is not None


@dataclass(frozen=True)
class ConfidenceVector:
    """Max temperature-scaled softmax probability and the argmax class per row."""

    conf: np.ndarray
    pred: np.ndarray

    def __len__(self) -> int:
        return len(self.conf)


def softmax(logits: np.ndarray, temperature: float = 1.0) -> np.ndarray:
    """Row-wise stable softmax of logits / temperature."""
    z = np.asarray(logits, dtype=np.float64) / float(temperature)
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def nll(logits: np.ndarray, labels: np.ndarray, temperature: float) -> float:
    """Mean negative log-likelihood of softmax(logits / T) against labels."""
    z = np.asarray(logits, dtype=np.float64) / float(temperature)
    z = z - z.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=1))
    picked = z[np.arange(len(labels)), np.asarray(labels)]
    return float(np.mean(log_norm - picked))


def _fit_scalar(logits: np.ndarray, labels: np.ndarray) -> float:
    """1-D NLL minimization: coarse log-grid bracket, then golden-section."""
    log_grid = np.linspace(np.log(TEMP_MIN), np.log(TEMP_MAX), GRID_POINTS)
    vals = np.array([nll(logits, labels, np.exp(t)) for t in log_grid])

    # flat objective (e.g. all-zero logit rows): temperature has no effect
    if vals.max() - vals.min() <= 1e-12:
        return 1.0

    best = int(np.argmin(vals))
    if best == 0 or best == GRID_POINTS - 1:
        candidate = float(np.exp(log_grid[best]))
    else:
        try:
            res = optimize.minimize_scalar(
                lambda lt: nll(logits, labels, np.exp(lt)),
                bracket=(log_grid[best - 1], log_grid[best], log_grid[best + 1]),
                method="golden",
                options={"xtol": LOG_TOL},
            )
            candidate = float(np.clip(np.exp(res.x), TEMP_MIN, TEMP_MAX))
        except ValueError:  # degenerate bracket (plateau at the grid minimum)
            candidate = float(np.exp(log_grid[best]))
        if nll(logits, labels, candidate) > vals[best]:
            candidate = float(np.exp(log_grid[best]))

    # never do worse than the identity temperature; prefer 1.0 on ties
    if nll(logits, labels, 1.0) <= nll(logits, labels, candidate) + 1e-12:
        return 1.0
    return candidate


def fit_temperature_global(logits: np.ndarray, labels: np.ndarray) -> TemperatureModel:
    """Fit one temperature on the whole validation set."""
    logits = np.asarray(logits)
    labels = np.asarray(labels)
    if logits.ndim != 2 or len(logits) == 0:
        raise ValueError("logits must be a nonempty N x C matrix")
    if len(labels) != len(logits):
        raise ValueError("labels length must match logits rows")
    return TemperatureModel(global_t=_fit_scalar(logits, labels))


def fit_temperature_classwise(
    logits: np.ndarray,
    labels: np.ndarray,
    min_samples: int = 20,
) -> TemperatureModel:
    """Fit one temperature per *predicted* class.

    Classes with fewer than ``min_samples`` predicted validation samples are
    flagged invalid and use the global temperature instead.
    """
    logits = np.asarray(logits)
    labels = np.asarray(labels)
    global_model = fit_temperature_global(logits, labels)
    n_classes = logits.shape[1]
    pred = logits.argmax(axis=1)

    per_class_t = np.full(n_classes, global_model.global_t, dtype=np.float64)
    valid = np.zeros(n_classes, dtype=bool)
    for c in range(n_classes):
        mask = pred == c
        if int(mask.sum()) >= min_samples:
            per_class_t[c] = _fit_scalar(logits[mask], labels[mask])
            valid[c] = True
    return TemperatureModel(
        global_t=global_model.global_t, per_class_t=per_class_t, per_class_valid=valid
    )


def confidences(logits: np.ndarray, tm: TemperatureModel) -> ConfidenceVector:
    """Max softmax probability per row under the model's temperature.

    Predictions are the raw-logit argmax; a positive temperature never
    changes the argmax. In class-wise mode each row is scaled by the
    temperature of its predicted class.
    """
    logits = np.asarray(logits)
    pred = logits.argmax(axis=1)
    if tm.classwise:
        temps = np.where(tm.per_class_valid, tm.per_class_t, tm.global_t)[pred]
    else:
        temps = np.full(len(logits), tm.global_t)

    conf = np.empty(len(logits), dtype=np.float64)
    for t in np.unique(temps):
        rows = temps == t
        conf[rows] = softmax(logits[rows], float(t)).max(axis=1)
    return ConfidenceVector(conf=conf, pred=pred)
