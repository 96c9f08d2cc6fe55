"""End-to-end orchestration: fit estimators on a bundle, produce reports,
and sweep bundles for the evaluation protocol."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .bundle import SplitBundle, load_bundle
from .calibration import (
    TemperatureModel,
    confidences,
    fit_temperature_classwise,
    fit_temperature_global,
    softmax,
)
from .confidence import AtcModel, atc_estimate, doc_estimate, fit_atc
from .cot import CotConfig, cot_estimate
from .distance import (
    DistanceChecker,
    fit_distance_checker,
    fit_mahalanobis_checker,
    load_checker,
    save_checker,
)
from .estimators import (
    EstimateReport,
    atc_dist_estimate,
    gde_dist_estimate,
    gde_estimate,
)
from .evaluation import ErrorRecord, MethodComparison, compare_methods, emit_report

METHODS = (
    "atc",
    "atc-dist",
    "atc-distcs",
    "atc-maha",
    "doc",
    "cot",
    "gde",
    "gde-dist",
    "gde-distcs",
)
GDE_METHODS = ("gde", "gde-dist", "gde-distcs")


@dataclass(frozen=True)
class EstimatorConfig:
    """Resolved run configuration; defaults follow the reference protocol
    (K=25 neighbours, 0.99 quantile, 50k reference cap, 20-sample fallback,
    COT batches of 2500 over at most 25000 samples)."""

    k: int = 25
    quantile: float = 0.99
    classwise: bool = False
    normalize: bool = False
    max_ref: int = 50_000
    min_samples: int = 20
    seed: int = 0
    self_exclude: bool = False
    cot_batch_size: int = 2500
    cot_max_samples: int = 25_000

    def to_dict(self) -> dict:
        return asdict(self)


class _FittedCache:
    """Per-bundle lazily fitted components, so one estimate call fits each
    temperature model / checker at most once."""

    def __init__(self, bundle: SplitBundle, cfg: EstimatorConfig):
        self.bundle = bundle
        self.cfg = cfg
        self._store: Dict[str, object] = {}

    def temperature(self, classwise: bool) -> TemperatureModel:
        key = f"tm:{classwise}"
        if key not in self._store:
            if classwise:
                self._store[key] = fit_temperature_classwise(
                    self.bundle.val_logits, self.bundle.val_labels, self.cfg.min_samples
                )
            else:
                self._store[key] = fit_temperature_global(
                    self.bundle.val_logits, self.bundle.val_labels
                )
        return self._store[key]

    def val_conf(self, classwise: bool):
        key = f"vc:{classwise}"
        if key not in self._store:
            self._store[key] = confidences(self.bundle.val_logits, self.temperature(classwise))
        return self._store[key]

    def test_conf(self, classwise: bool):
        key = f"tc:{classwise}"
        if key not in self._store:
            self._store[key] = confidences(self.bundle.test_logits, self.temperature(classwise))
        return self._store[key]

    def atc(self, classwise: bool) -> AtcModel:
        key = f"atc:{classwise}"
        if key not in self._store:
            self._store[key] = fit_atc(
                self.val_conf(classwise),
                self.bundle.val_labels,
                classwise=classwise,
                min_samples=self.cfg.min_samples,
                n_classes=self.bundle.num_classes,
                temperature=self.temperature(classwise),
            )
        return self._store[key]

    def checker(self, classwise: bool) -> DistanceChecker:
        key = f"knn:{classwise}"
        if key not in self._store:
            val_pred = self.bundle.val_logits.argmax(axis=1)
            self._store[key] = fit_distance_checker(
                self.bundle.train_features,
                self.bundle.val_features,
                val_pred=val_pred,
                k=self.cfg.k,
                quantile=self.cfg.quantile,
                classwise=classwise,
                min_samples=self.cfg.min_samples,
                max_ref=self.cfg.max_ref,
                seed=self.cfg.seed,
                normalize=self.cfg.normalize,
                self_exclude=self.cfg.self_exclude,
                n_classes=self.bundle.num_classes,
            )
        return self._store[key]

    def maha_checker(self, classwise: bool):
        key = f"maha:{classwise}"
        if key not in self._store:
            val_pred = self.bundle.val_logits.argmax(axis=1)
            self._store[key] = fit_mahalanobis_checker(
                self.bundle.train_features,
                self.bundle.train_labels,
                self.bundle.val_features,
                val_pred=val_pred,
                quantile=self.cfg.quantile,
                classwise=classwise,
                min_samples=self.cfg.min_samples,
                n_classes=self.bundle.num_classes,
            )
        return self._store[key]


def _config_echo(cfg: EstimatorConfig, tm: Optional[TemperatureModel] = None) -> dict:
    echo = cfg.to_dict()
    if tm is not None:
        echo["global_temperature"] = tm.global_t
        if tm.classwise:
            echo["per_class_temperature"] = [float(t) for t in tm.per_class_t]
    return echo


def run_estimate(
    bundle: SplitBundle,
    methods: Sequence[str],
    cfg: EstimatorConfig = EstimatorConfig(),
    bundle_b: Optional[SplitBundle] = None,
    fitted_checker: Optional[DistanceChecker] = None,
) -> List[EstimateReport]:
    """Run each named method on one bundle (pair of bundles for GDE methods)."""
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}; valid: {', '.join(METHODS)}")
        if m in GDE_METHODS and bundle_b is None:
            raise ValueError(f"method {m!r} requires a second bundle")

    cache = _FittedCache(bundle, cfg)
    cw = cfg.classwise
    reports = []
    for m in methods:
        if m == "atc":
            tm = cache.temperature(cw)
            est, kept = atc_estimate(cache.test_conf(cw), cache.atc(cw))
            reports.append(
                EstimateReport(
                    method=m,
                    accuracy_estimate=est,
                    n_test=len(kept),
                    kept_confidence_fraction=float(kept.mean()),
                    config=_config_echo(cfg, tm),
                )
            )
        elif m in ("atc-dist", "atc-distcs", "atc-maha"):
            dist_cw = cw if m != "atc-distcs" else True
            conf_cw = cw if m != "atc-distcs" else True
            if m == "atc-maha":
                checker = cache.maha_checker(dist_cw)
            elif fitted_checker is not None and dist_cw == (
                fitted_checker.per_class_threshold is not None
            ):
                checker = fitted_checker
            else:
                checker = cache.checker(dist_cw)
            reports.append(
                atc_dist_estimate(
                    cache.test_conf(conf_cw),
                    cache.atc(conf_cw),
                    checker,
                    bundle.test_features,
                    method=m,
                    config=_config_echo(cfg, cache.temperature(conf_cw)),
                )
            )
        elif m == "doc":
            est = doc_estimate(cache.val_conf(cw), bundle.val_labels, cache.test_conf(cw))
            reports.append(
                EstimateReport(
                    method=m,
                    accuracy_estimate=est,
                    n_test=len(bundle.test_logits),
                    config=_config_echo(cfg, cache.temperature(cw)),
                )
            )
        elif m == "cot":
            cot_cfg = CotConfig(
                batch_size=cfg.cot_batch_size,
                max_samples=cfg.cot_max_samples,
                seed=cfg.seed,
            )
            est = cot_estimate(bundle.val_labels, softmax(bundle.test_logits), cot_cfg)
            reports.append(
                EstimateReport(
                    method=m,
                    accuracy_estimate=est,
                    n_test=len(bundle.test_logits),
                    config=_config_echo(cfg),
                )
            )
        elif m == "gde":
            reports.append(
                gde_estimate(
                    bundle.test_logits.argmax(axis=1),
                    bundle_b.test_logits.argmax(axis=1),
                    method=m,
                    config=_config_echo(cfg),
                )
            )
        else:  # gde-dist / gde-distcs: checker lives in the first model's space
            dist_cw = cw if m == "gde-dist" else True
            reports.append(
                gde_dist_estimate(
                    bundle.test_logits.argmax(axis=1),
                    bundle_b.test_logits.argmax(axis=1),
                    cache.checker(dist_cw),
                    bundle.test_features,
                    method=m,
                    config=_config_echo(cfg),
                )
            )
    return reports


def true_test_accuracy(bundle: SplitBundle) -> float:
    if bundle.test_labels is None:
        raise ValueError("bundle has no test labels; true accuracy unavailable")
    pred = bundle.test_logits.argmax(axis=1)
    return float((pred == bundle.test_labels).mean())


def run_evaluate(
    bundle_paths: Sequence[str],
    methods: Sequence[str],
    cfg: EstimatorConfig = EstimatorConfig(),
    bundle_b_paths: Optional[Sequence[str]] = None,
    out_dir: Optional[str] = None,
    dataset_family: str = "all",
) -> Tuple[List[ErrorRecord], Optional[MethodComparison], List[str]]:
    """Sweep bundles x methods, compute absolute errors against the true test
    accuracy, run the best-vs-rest significance protocol and emit CSVs."""
    if not bundle_paths:
        raise ValueError("no bundles given")
    if bundle_b_paths is not None and len(bundle_b_paths) != len(bundle_paths):
        raise ValueError("bundle/bundle-b lists differ in length")

    records: List[ErrorRecord] = []
    for i, path in enumerate(bundle_paths):
        bundle = load_bundle(path)
        bundle_b = load_bundle(bundle_b_paths[i]) if bundle_b_paths is not None else None
        truth = true_test_accuracy(bundle)
        for report in run_estimate(bundle, methods, cfg, bundle_b=bundle_b):
            records.append(
                ErrorRecord(
                    model_id=bundle.manifest.model_id,
                    dataset_id=bundle.manifest.name,
                    method=report.method,
                    predicted_accuracy=report.accuracy_estimate,
                    true_accuracy=truth,
                )
            )

    comparison = compare_methods(records) if len(set(methods)) >= 2 else None
    written: List[str] = []
    if out_dir is not None:
        written = emit_report(records, comparison, out_dir, dataset_family=dataset_family)
    return records, comparison, written


def save_fitted(bundle: SplitBundle, cfg: EstimatorConfig, out_dir: str) -> List[str]:
    """Fit the distance checker and ATC model on a bundle and serialize both,
    so estimation can run as a separate invocation."""
    os.makedirs(out_dir, exist_ok=True)
    cache = _FittedCache(bundle, cfg)
    checker = cache.checker(cfg.classwise)
    checker_dir = os.path.join(out_dir, "checker")
    save_checker(checker, checker_dir)

    atc = cache.atc(cfg.classwise)
    tm = atc.temperature
    payload = {
        "global_threshold": atc.global_threshold,
        "per_class_threshold": None
        if atc.per_class_threshold is None
        else [float(t) for t in atc.per_class_threshold],
        "per_class_valid": None
        if atc.per_class_valid is None
        else [bool(v) for v in atc.per_class_valid],
        "temperature": {
            "global_t": tm.global_t,
            "per_class_t": None if tm.per_class_t is None else [float(t) for t in tm.per_class_t],
            "per_class_valid": None
            if tm.per_class_valid is None
            else [bool(v) for v in tm.per_class_valid],
        },
        "config": cfg.to_dict(),
    }
    atc_path = os.path.join(out_dir, "atc.json")
    with open(atc_path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return [checker_dir, atc_path]


def load_fitted(fitted_dir: str) -> Tuple[DistanceChecker, AtcModel]:
    checker = load_checker(os.path.join(fitted_dir, "checker"))
    with open(os.path.join(fitted_dir, "atc.json"), "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    t = payload["temperature"]
    tm = TemperatureModel(
        global_t=float(t["global_t"]),
        per_class_t=None if t["per_class_t"] is None else np.asarray(t["per_class_t"]),
        per_class_valid=None
        if t["per_class_valid"] is None
        else np.asarray(t["per_class_valid"], dtype=bool),
    )
    atc = AtcModel(
        global_threshold=float(payload["global_threshold"]),
        per_class_threshold=None
        if payload["per_class_threshold"] is None
        else np.asarray(payload["per_class_threshold"]),
        per_class_valid=None
        if payload["per_class_valid"] is None
        else np.asarray(payload["per_class_valid"], dtype=bool),
        temperature=tm,
    )
    return checker, atc
