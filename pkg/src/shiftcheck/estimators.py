"""Composition of confidence/agreement masks with distance-check masks.

Each estimator counts the test samples passing every check; intersecting an
extra mask can only lower the estimate, which is what makes the distance
variants more conservative than their base estimators.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .calibration import ConfidenceVector
from .confidence import AtcModel, atc_estimate
from .distance import distance_kept_mask


@dataclass(frozen=True)
class EstimateReport:
    method: str
    accuracy_estimate: float
    n_test: int
    kept_confidence_fraction: Optional[float] = None
    kept_distance_fraction: Optional[float] = None
    kept_joint_fraction: Optional[float] = None
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "accuracy_estimate": self.accuracy_estimate,
            "n_test": self.n_test,
            "kept_confidence_fraction": self.kept_confidence_fraction,
            "kept_distance_fraction": self.kept_distance_fraction,
            "kept_joint_fraction": self.kept_joint_fraction,
            "config": self.config,
        }


def _require_nonempty(n: int) -> None:
    if n == 0:
        raise ValueError("empty test set")


def atc_dist_estimate(
    test_conf: ConfidenceVector,
    atc: AtcModel,
    checker,
    test_features: np.ndarray,
    method: str = "atc-dist",
    config: Optional[dict] = None,
) -> EstimateReport:
    """Fraction of test samples passing both the confidence check and the
    distance check. ``checker`` may be a K-NN or Mahalanobis checker."""
    _require_nonempty(len(test_conf))
    if len(test_conf) != len(test_features):
        raise ValueError("confidences and features disagree on test size")
    _, kept_conf = atc_estimate(test_conf, atc)
    kept_dist = distance_kept_mask(checker, test_features, test_conf.pred)
    joint = kept_conf & kept_dist
    return EstimateReport(
        method=method,
        accuracy_estimate=float(joint.mean()),
        n_test=len(test_conf),
        kept_confidence_fraction=float(kept_conf.mean()),
        kept_distance_fraction=float(kept_dist.mean()),
        kept_joint_fraction=float(joint.mean()),
        config=config or {},
    )


def gde_estimate(
    pred_a: np.ndarray,
    pred_b: np.ndarray,
    method: str = "gde",
    config: Optional[dict] = None,
) -> EstimateReport:
    """Agreement rate between two sibling models' predictions."""
    pred_a = np.asarray(pred_a)
    pred_b = np.asarray(pred_b)
    if len(pred_a) != len(pred_b):
        raise ValueError("prediction vectors differ in length")
    _require_nonempty(len(pred_a))
    agree = pred_a == pred_b
    return EstimateReport(
        method=method,
        accuracy_estimate=float(agree.mean()),
        n_test=len(pred_a),
        kept_confidence_fraction=float(agree.mean()),
        config=config or {},
    )


def gde_dist_estimate(
    pred_a: np.ndarray,
    pred_b: np.ndarray,
    checker,
    test_features: np.ndarray,
    method: str = "gde-dist",
    config: Optional[dict] = None,
) -> EstimateReport:
    """Fraction of test samples where the sibling models agree AND the first
    model's embedding passes the distance check.

    The checker must have been fitted in the first model's embedding space and
    ``test_features`` must come from that same model.
    """
    pred_a = np.asarray(pred_a)
    pred_b = np.asarray(pred_b)
    if len(pred_a) != len(pred_b):
        raise ValueError("prediction vectors differ in length")
    _require_nonempty(len(pred_a))
    if len(pred_a) != len(test_features):
        raise ValueError("predictions and features disagree on test size")
    agree = pred_a == pred_b
    kept_dist = distance_kept_mask(checker, test_features, pred_a)
    joint = agree & kept_dist
    return EstimateReport(
        method=method,
        accuracy_estimate=float(joint.mean()),
        n_test=len(pred_a),
        kept_confidence_fraction=float(agree.mean()),
        kept_distance_fraction=float(kept_dist.mean()),
        kept_joint_fraction=float(joint.mean()),
        config=config or {},
    )
