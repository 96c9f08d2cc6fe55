"""Synthetic covariate-shift scenarios with an analytically known classifier.

Samples come from isotropic Gaussian class clusters; the classifier is the
fixed nearest-mean discriminant z_c = -||x - mu_c||^2 / (2 * scale^2), which
is Bayes-optimal for equal priors and, usefully, stays highly confident far
from all clusters. That over-confidence far from the data is exactly the
failure mode the distance check is designed to catch.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

import numpy as np

from .bundle import Manifest, SplitBundle, validate_bundle


@dataclass(frozen=True)
class ShiftSpec:
    """Test-time shift. kind is one of 'identity', 'translation',
    'unseen-cluster', 'prior-shift'."""

    kind: str = "identity"
    translation: Optional[Tuple[float, ...]] = None
    cluster_location: Optional[Tuple[float, ...]] = None
    cluster_scale: float = 1.0
    cluster_fraction: float = 0.0
    flip_rate: float = 1.0
    test_priors: Optional[Tuple[float, ...]] = None

    def validate(self, n_classes: int, dim: int) -> None:
        kinds = {"identity", "translation", "unseen-cluster", "prior-shift"}
        if self.kind not in kinds:
            raise ValueError(f"unknown shift kind {self.kind!r}")
        if self.kind == "translation" and (
            self.translation is None or len(self.translation) != dim
        ):
            raise ValueError("translation shift needs a dim-length vector")
        if self.kind == "unseen-cluster":
            if self.cluster_location is None or len(self.cluster_location) != dim:
                raise ValueError("unseen-cluster shift needs a dim-length location")
            if not 0.0 <= self.cluster_fraction <= 1.0 or not 0.0 <= self.flip_rate <= 1.0:
                raise ValueError("cluster fraction and flip rate must lie in [0, 1]")
            if self.cluster_scale <= 0.0:
                raise ValueError("cluster scale must be positive")
        if self.kind == "prior-shift":
            if self.test_priors is None or len(self.test_priors) != n_classes:
                raise ValueError("prior shift needs one prior per class")
            p = np.asarray(self.test_priors, dtype=np.float64)
            if (p < 0).any() or abs(p.sum() - 1.0) > 1e-8:
                raise ValueError("test priors must be a probability vector")


@dataclass(frozen=True)
class SyntheticScenario:
    name: str = "identity"
    n_classes: int = 3
    dim: int = 8
    class_scale: float = 1.0
    class_means: Optional[np.ndarray] = None  # default: 4*scale along axes
    shift: ShiftSpec = field(default_factory=ShiftSpec)
    n_train: int = 2000
    n_val: int = 1000
    n_test: int = 1000
    seed: int = 0
    # scorer jitter yields a "sibling model": same data, perturbed class means
    # in the logit computation only (for agreement-based estimators)
    scorer_jitter: float = 0.0
    scorer_seed: int = 0

    def resolved_means(self) -> np.ndarray:
        if self.class_means is not None:
            means = np.asarray(self.class_means, dtype=np.float64)
            if means.shape != (self.n_classes, self.dim):
                raise ValueError(f"class_means must be {self.n_classes} x {self.dim}")
            return means
        means = np.zeros((self.n_classes, self.dim))
        for c in range(self.n_classes):
            means[c, c % self.dim] = 4.0 * self.class_scale * (1 + c // self.dim)
        return means

    def validate(self) -> None:
        if self.n_classes < 2 or self.dim < 1:
            raise ValueError("need n_classes >= 2 and dim >= 1")
        if min(self.n_train, self.n_val, self.n_test) < 1:
            raise ValueError("split sizes must be >= 1")
        if self.class_scale <= 0.0:
            raise ValueError("class_scale must be positive")
        self.shift.validate(self.n_classes, self.dim)
        self.resolved_means()


def nearest_mean_logits(x: np.ndarray, means: np.ndarray, scale: float) -> np.ndarray:
    """Fixed scorer z_c = -||x - mu_c||^2 / (2 scale^2)."""
    x = np.asarray(x, dtype=np.float64)
    d2 = ((x[:, None, :] - means[None, :, :]) ** 2).sum(axis=2)
    return -d2 / (2.0 * scale * scale)


def _sample_cluster(
    rng: np.random.Generator,
    n: int,
    means: np.ndarray,
    scale: float,
    priors: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    n_classes = len(means)
    if priors is None:
        labels = rng.integers(0, n_classes, size=n)
    else:
        labels = rng.choice(n_classes, size=n, p=priors)
    x = means[labels] + scale * rng.standard_normal((n, means.shape[1]))
    return x, labels


def generate(scenario: SyntheticScenario) -> SplitBundle:
    """Generate a validated bundle; test labels are included (ground truth)."""
    scenario.validate()
    rng = np.random.default_rng(scenario.seed)
    means = scenario.resolved_means()
    scale = scenario.class_scale
    shift = scenario.shift

    scorer_means = means
    if scenario.scorer_jitter > 0.0:
        scorer_rng = np.random.default_rng((scenario.scorer_seed, scenario.seed))
        scorer_means = means + scenario.scorer_jitter * scale * scorer_rng.standard_normal(
            means.shape
        )

    train_x, train_y = _sample_cluster(rng, scenario.n_train, means, scale)
    val_x, val_y = _sample_cluster(rng, scenario.n_val, means, scale)

    if shift.kind == "prior-shift":
        priors = np.asarray(shift.test_priors, dtype=np.float64)
        test_x, test_y = _sample_cluster(rng, scenario.n_test, means, scale, priors)
    elif shift.kind == "unseen-cluster":
        test_x, test_y = _sample_cluster(rng, scenario.n_test, means, scale)
        in_cluster = rng.random(scenario.n_test) < shift.cluster_fraction
        n_c = int(in_cluster.sum())
        loc = np.asarray(shift.cluster_location, dtype=np.float64)
        test_x[in_cluster] = loc + shift.cluster_scale * rng.standard_normal(
            (n_c, scenario.dim)
        )
        # label cluster points so the unjittered scorer is wrong at flip_rate;
        # using the base means keeps labels identical across sibling bundles
        pred = nearest_mean_logits(test_x[in_cluster], means, scale).argmax(axis=1)
        flip = rng.random(n_c) < shift.flip_rate
        offsets = rng.integers(1, scenario.n_classes, size=n_c)
        flipped = (pred + offsets) % scenario.n_classes
        test_y[in_cluster] = np.where(flip, flipped, pred)
    else:
        test_x, test_y = _sample_cluster(rng, scenario.n_test, means, scale)
        if shift.kind == "translation":
            test_x = test_x + np.asarray(shift.translation, dtype=np.float64)

    model_id = "nearest-mean-scorer"
    if scenario.scorer_jitter > 0.0:
        model_id = f"nearest-mean-scorer-j{scenario.scorer_seed}"
    bundle = SplitBundle(
        manifest=Manifest(
            name=scenario.name,
            model_id=model_id,
            seed=scenario.seed,
            num_classes=scenario.n_classes,
            dim=scenario.dim,
        ),
        train_features=train_x.astype(np.float32),
        train_labels=train_y.astype(np.int64),
        val_features=val_x.astype(np.float32),
        val_logits=nearest_mean_logits(val_x, scorer_means, scale).astype(np.float32),
        val_labels=val_y.astype(np.int64),
        test_features=test_x.astype(np.float32),
        test_logits=nearest_mean_logits(test_x, scorer_means, scale).astype(np.float32),
        test_labels=test_y.astype(np.int64),
    )
    validate_bundle(bundle)
    return bundle


PRESETS = {
    "identity": SyntheticScenario(name="identity"),
    "mild-shift": SyntheticScenario(
        name="mild-shift",
        shift=ShiftSpec(kind="translation", translation=(0.5,) + (0.0,) * 7),
    ),
    "unseen-cluster": SyntheticScenario(
        name="unseen-cluster",
        shift=ShiftSpec(
            kind="unseen-cluster",
            cluster_location=(50.0,) * 8,
            cluster_scale=1.0,
            cluster_fraction=0.3,
            flip_rate=1.0,
        ),
    ),
    "prior-shift": SyntheticScenario(
        name="prior-shift",
        shift=ShiftSpec(kind="prior-shift", test_priors=(0.7, 0.2, 0.1)),
    ),
}


def sibling_scenario(
    scenario: SyntheticScenario, jitter: float = 0.15, scorer_seed: int = 1
) -> SyntheticScenario:
    """Same data, a perturbed scorer: the 'second model' for agreement-based
    estimation."""
    return replace(scenario, scorer_jitter=jitter, scorer_seed=scorer_seed)


def scenario_suite(seeds: Tuple[int, ...] = (0, 1, 2)) -> List[SyntheticScenario]:
    """The fixed verification suite: each named preset at every seed."""
    suite = []
    for name in ("identity", "mild-shift", "unseen-cluster", "prior-shift"):
        for seed in seeds:
            suite.append(replace(PRESETS[name], name=f"{name}-s{seed}", seed=seed))
    return suite


def scenario_from_dict(d: dict) -> SyntheticScenario:
    """Build a scenario from a JSON-style dict (CLI scenario files)."""
    shift_d = dict(d.get("shift", {}))
    for key in ("translation", "cluster_location", "test_priors"):
        if shift_d.get(key) is not None:
            shift_d[key] = tuple(shift_d[key])
    shift = ShiftSpec(**shift_d)
    means = d.get("class_means")
    scenario = SyntheticScenario(
        name=d.get("name", "custom"),
        n_classes=int(d.get("n_classes", 3)),
        dim=int(d.get("dim", 8)),
        class_scale=float(d.get("class_scale", 1.0)),
        class_means=None if means is None else np.asarray(means, dtype=np.float64),
        shift=shift,
        n_train=int(d.get("n_train", 2000)),
        n_val=int(d.get("n_val", 1000)),
        n_test=int(d.get("n_test", 1000)),
        seed=int(d.get("seed", 0)),
    )
    scenario.validate()
    return scenario
