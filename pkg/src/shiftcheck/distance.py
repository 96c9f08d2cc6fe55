"""Distance checkers: average K-NN distance and the Mahalanobis variant.

A fitted checker holds a reference embedding set (or class Gaussians) and a
validation-calibrated quantile threshold; test samples whose distance score
is at or above the threshold are rejected as too far from the training
distribution to be trusted.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy import linalg

DEFAULT_K = 25
DEFAULT_QUANTILE = 0.99
DEFAULT_MAX_REF = 50_000
QUERY_BLOCK = 1024


@dataclass(frozen=True)
class DistanceChecker:
    reference: np.ndarray
    k: int
    global_threshold: float
    per_class_threshold: Optional[np.ndarray] = None
    per_class_valid: Optional[np.ndarray] = None
    normalize: bool = False
    quantile: float = DEFAULT_QUANTILE
    self_exclude: bool = False

    @property
    def classwise(self) -> bool:
        return self.per_class_threshold is not None


@dataclass(frozen=True)
class MahalanobisChecker:
    class_means: np.ndarray
    covariance: np.ndarray  # tied covariance, ridge already added
    ridge: float
    global_threshold: float
    per_class_threshold: Optional[np.ndarray] = None
    per_class_valid: Optional[np.ndarray] = None
    quantile: float = DEFAULT_QUANTILE

    @property
    def classwise(self) -> bool:
        return self.per_class_threshold is not None


def _normalize_rows(x: np.ndarray) -> np.ndarray:
    # zero-norm rows are degenerate embeddings; pass them through unscaled
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    safe = np.where(norms == 0.0, 1.0, norms)
    return x / safe


def average_knn_distance(checker: DistanceChecker, queries: np.ndarray) -> np.ndarray:
    """Mean Euclidean distance from each query to its K nearest reference rows.

    Brute-force and exact; distances are accumulated in float64. With
    ``self_exclude`` a single exact-duplicate (zero-distance) match per query
    is dropped before the K smallest are taken.
    """
    ref = np.asarray(checker.reference, dtype=np.float64)
    q = np.asarray(queries, dtype=np.float64)
    if q.ndim != 2 or ref.ndim != 2 or q.shape[1] != ref.shape[1]:
        raise ValueError(
            f"dimension mismatch: queries {q.shape} vs reference {ref.shape}"
        )
    need = checker.k + (1 if checker.self_exclude else 0)
    if need > ref.shape[0]:
        raise ValueError(f"k={checker.k} exceeds reference size {ref.shape[0]}")
    if checker.normalize:
        ref = _normalize_rows(ref)
        q = _normalize_rows(q)

    ref_sq = (ref * ref).sum(axis=1)
    out = np.empty(len(q), dtype=np.float64)
    for start in range(0, len(q), QUERY_BLOCK):
        block = q[start : start + QUERY_BLOCK]
        d2 = (block * block).sum(axis=1)[:, None] + ref_sq[None, :] - 2.0 * block @ ref.T
        np.maximum(d2, 0.0, out=d2)
        if checker.self_exclude:
            small = np.sort(np.partition(d2, need - 1, axis=1)[:, :need], axis=1)
            # drop the nearest match only if it is an exact duplicate row
            nearest = np.argmin(d2, axis=1)
            exact_dup = np.array(
                [
                    float(np.sum((block[i] - ref[nearest[i]]) ** 2)) == 0.0
                    for i in range(len(block))
                ]
            )
            dists = np.sqrt(small)
            picked = np.where(
                exact_dup[:, None],
                dists[:, 1 : checker.k + 1],
                dists[:, : checker.k],
            )
            out[start : start + QUERY_BLOCK] = picked.mean(axis=1)
        else:
            small = np.partition(d2, checker.k - 1, axis=1)[:, : checker.k]
            out[start : start + QUERY_BLOCK] = np.sqrt(small).mean(axis=1)
    return out


def _quantile_thresholds(
    scores: np.ndarray,
    groups: Optional[np.ndarray],
    quantile: float,
    classwise: bool,
    min_samples: int,
    n_classes: Optional[int],
):
    global_threshold = float(np.quantile(scores, quantile))
    if not classwise:
        return global_threshold, None, None
    if groups is None:
        raise ValueError("class-wise thresholds require validation predicted classes")
    groups = np.asarray(groups)
    if n_classes is None:
        n_classes = int(groups.max()) + 1
    per_class = np.full(n_classes, global_threshold, dtype=np.float64)
    valid = np.zeros(n_classes, dtype=bool)
    for c in range(n_classes):
        sub = scores[groups == c]
        if len(sub) >= min_samples:
            per_class[c] = float(np.quantile(sub, quantile))
            valid[c] = True
    return global_threshold, per_class, valid


def fit_distance_checker(
    train: np.ndarray,
    val: np.ndarray,
    val_pred: Optional[np.ndarray] = None,
    k: int = DEFAULT_K,
    quantile: float = DEFAULT_QUANTILE,
    classwise: bool = False,
    min_samples: int = 20,
    max_ref: int = DEFAULT_MAX_REF,
    seed: int = 0,
    normalize: bool = False,
    self_exclude: bool = False,
    n_classes: Optional[int] = None,
) -> DistanceChecker:
    """Fit the K-NN checker: subsample the reference set, compute validation
    average distances, and take their quantile as the rejection threshold.

    With ``self_exclude`` the validation set itself is the reference and each
    validation sample discards its own zero-distance match.
    """
    train = np.asarray(train)
    val = np.asarray(val)
    if len(val) == 0:
        raise ValueError("empty validation set")
    reference = val if self_exclude else train
    if len(reference) > max_ref:
        rng = np.random.default_rng(seed)
        idx = np.sort(rng.choice(len(reference), size=max_ref, replace=False))
        reference = reference[idx]
    if k + (1 if self_exclude else 0) > len(reference):
        raise ValueError(f"k={k} exceeds reference size {len(reference)}")

    checker = DistanceChecker(
        reference=reference,
        k=k,
        global_threshold=0.0,
        normalize=normalize,
        quantile=quantile,
        self_exclude=self_exclude,
    )
    ad_val = average_knn_distance(checker, val)
    global_t, per_class, valid = _quantile_thresholds(
        ad_val, val_pred, quantile, classwise, min_samples, n_classes
    )
    return replace(
        checker,
        global_threshold=global_t,
        per_class_threshold=per_class,
        per_class_valid=valid,
    )


def _checker_thresholds(checker, pred: Optional[np.ndarray], n: int) -> np.ndarray:
    if checker.classwise:
        if pred is None:
            raise ValueError("class-wise checker requires predicted classes")
        per_class = np.where(
            checker.per_class_valid, checker.per_class_threshold, checker.global_threshold
        )
        return per_class[np.asarray(pred)]
    return np.full(n, checker.global_threshold)


def distance_kept_mask(
    checker,
    test: np.ndarray,
    test_pred: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Boolean mask: score strictly below the (per-predicted-class) threshold.

    Accepts either a DistanceChecker or a MahalanobisChecker.
    """
    scores = checker_scores(checker, test)
    return scores < _checker_thresholds(checker, test_pred, len(scores))


def checker_scores(checker, test: np.ndarray) -> np.ndarray:
    if isinstance(checker, MahalanobisChecker):
        return mahalanobis_scores(checker.class_means, checker.covariance, test)
    return average_knn_distance(checker, test)


def mahalanobis_scores(
    class_means: np.ndarray, covariance: np.ndarray, x: np.ndarray
) -> np.ndarray:
    """Min over classes of the Mahalanobis distance to the class mean,
    under one tied covariance (solved via Cholesky, never an explicit inverse)."""
    x = np.asarray(x, dtype=np.float64)
    means = np.asarray(class_means, dtype=np.float64)
    if x.shape[1] != means.shape[1]:
        raise ValueError(f"dimension mismatch: {x.shape[1]} vs {means.shape[1]}")
    chol = linalg.cholesky(np.asarray(covariance, dtype=np.float64), lower=True)
    best = np.full(len(x), np.inf)
    for mu in means:
        y = linalg.solve_triangular(chol, (x - mu).T, lower=True)
        best = np.minimum(best, np.sqrt((y * y).sum(axis=0)))
    return best


def fit_mahalanobis_checker(
    train: np.ndarray,
    train_labels: np.ndarray,
    val: np.ndarray,
    val_pred: Optional[np.ndarray] = None,
    quantile: float = DEFAULT_QUANTILE,
    classwise: bool = False,
    min_samples: int = 20,
    n_classes: Optional[int] = None,
) -> MahalanobisChecker:
    """Per-class means, tied (pooled within-class) covariance with an escalating
    ridge until the Cholesky factorization succeeds, thresholds as in the
    K-NN checker."""
    train = np.asarray(train, dtype=np.float64)
    labels = np.asarray(train_labels)
    if len(val) == 0:
        raise ValueError("empty validation set")
    if n_classes is None:
        n_classes = int(labels.max()) + 1
    d = train.shape[1]

    means = np.zeros((n_classes, d))
    pooled = np.zeros((d, d))
    total = 0
    for c in range(n_classes):
        xc = train[labels == c]
        if len(xc) == 0:
            continue
        means[c] = xc.mean(axis=0)
        if len(xc) >= 2:
            centered = xc - means[c]
            pooled += centered.T @ centered
            total += len(xc)
    if total == 0:
        raise ValueError("no class has >= 2 training samples")
    pooled /= total

    ridge = 1e-6 * np.trace(pooled) / d
    if ridge <= 0.0:
        ridge = 1e-12
    cov = None
    for _ in range(7):
        candidate = pooled + ridge * np.eye(d)
        try:
            linalg.cholesky(candidate, lower=True)
            cov = candidate
            break
        except linalg.LinAlgError:
            ridge *= 10.0
    if cov is None:
        raise ValueError("covariance singular even after ridge escalation")

    scores = mahalanobis_scores(means, cov, np.asarray(val, dtype=np.float64))
    global_t, per_class, valid = _quantile_thresholds(
        scores, val_pred, quantile, classwise, min_samples, n_classes
    )
    return MahalanobisChecker(
        class_means=means,
        covariance=cov,
        ridge=ridge,
        global_threshold=global_t,
        per_class_threshold=per_class,
        per_class_valid=valid,
        quantile=quantile,
    )


def save_checker(checker: DistanceChecker, path: str) -> None:
    """Serialize as .npy arrays plus a JSON sidecar so fitting and estimation
    can run as separate CLI invocations."""
    os.makedirs(path, exist_ok=True)
    np.save(os.path.join(path, "reference.npy"), np.asarray(checker.reference))
    if checker.classwise:
        np.save(os.path.join(path, "per_class_threshold.npy"), checker.per_class_threshold)
        np.save(os.path.join(path, "per_class_valid.npy"), checker.per_class_valid)
    sidecar = {
        "k": checker.k,
        "global_threshold": checker.global_threshold,
        "normalize": checker.normalize,
        "quantile": checker.quantile,
        "self_exclude": checker.self_exclude,
        "classwise": checker.classwise,
    }
    with open(os.path.join(path, "checker.json"), "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_checker(path: str) -> DistanceChecker:
    with open(os.path.join(path, "checker.json"), "r", encoding="utf-8") as fh:
        sidecar = json.load(fh)
    reference = np.load(os.path.join(path, "reference.npy"), allow_pickle=False)
    per_class = valid = None
    if sidecar["classwise"]:
        per_class = np.load(os.path.join(path, "per_class_threshold.npy"), allow_pickle=False)
        valid = np.load(os.path.join(path, "per_class_valid.npy"), allow_pickle=False)
    return DistanceChecker(
        reference=reference,
        k=int(sidecar["k"]),
        global_threshold=float(sidecar["global_threshold"]),
        per_class_threshold=per_class,
        per_class_valid=valid,
        normalize=bool(sidecar["normalize"]),
        quantile=float(sidecar["quantile"]),
        self_exclude=bool(sidecar["self_exclude"]),
    )
