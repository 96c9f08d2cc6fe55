"""On-disk dataset bundles: embeddings, logits and labels for one model/dataset pair.

A bundle directory holds one ``.npy`` file per array plus a ``manifest.json``
describing shapes. Features are stored as float32, labels as int64.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

MANIFEST_NAME = "manifest.json"

FILES_REQUIRED = (
    "train_features.npy",
    "train_labels.npy",
    "val_features.npy",
    "val_logits.npy",
    "val_labels.npy",
    "test_features.npy",
    "test_logits.npy",
)
FILE_TEST_LABELS = "test_labels.npy"


class BundleError(ValueError):
    """Raised when a bundle directory or in-memory bundle is invalid."""


@dataclass(frozen=True)
class Manifest:
    name: str
    model_id: str
    seed: int
    num_classes: int
    dim: int

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "model_id": self.model_id,
            "seed": self.seed,
            "num_classes": self.num_classes,
            "dim": self.dim,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Manifest":
        missing = [k for k in ("name", "model_id", "seed", "num_classes", "dim") if k not in d]
        if missing:
            raise BundleError(f"manifest.json: missing keys {missing}")
        # unknown keys are ignored by design
        return cls(
            name=str(d["name"]),
            model_id=str(d["model_id"]),
            seed=int(d["seed"]),
            num_classes=int(d["num_classes"]),
            dim=int(d["dim"]),
        )


@dataclass(frozen=True)
class SplitBundle:
    """Immutable train/val/test triple for one (model, dataset) pair.

    All feature matrices share the embedding dimension D; logits share the
    class count C. Test labels are optional (unlabeled shifted test set).
    """

    manifest: Manifest
    train_features: np.ndarray
    train_labels: np.ndarray
    val_features: np.ndarray
    val_logits: np.ndarray
    val_labels: np.ndarray
    test_features: np.ndarray
    test_logits: np.ndarray
    test_labels: Optional[np.ndarray] = field(default=None)

    @property
    def num_classes(self) -> int:
        return self.manifest.num_classes

    @property
    def dim(self) -> int:
        return self.manifest.dim


def _check_finite(name: str, arr: np.ndarray) -> None:
    finite = np.isfinite(arr)
    if not finite.all():
        idx = int(np.flatnonzero(~finite.reshape(-1))[0] // max(arr.shape[-1], 1))
        raise BundleError(f"{name}: non-finite value, first offending row index {idx}")


def _check_labels(name: str, labels: np.ndarray, n_rows: int, num_classes: int) -> None:
    if labels.ndim != 1:
        raise BundleError(f"{name}: labels must be 1-D, got shape {labels.shape}")
    if labels.shape[0] != n_rows:
        raise BundleError(
            f"{name}: length {labels.shape[0]} does not match paired matrix rows {n_rows}"
        )
    bad = (labels < 0) | (labels >= num_classes)
    if bad.any():
        idx = int(np.flatnonzero(bad)[0])
        raise BundleError(
            f"{name}: label out of range [0, {num_classes}) at index {idx} "
            f"(value {int(labels[idx])})"
        )


def validate_bundle(b: SplitBundle) -> None:
    """Check every bundle invariant; raise BundleError with a precise message."""
    m = b.manifest
    if m.num_classes < 2:
        raise BundleError(f"manifest: num_classes must be >= 2, got {m.num_classes}")
    if m.dim < 1:
        raise BundleError(f"manifest: dim must be >= 1, got {m.dim}")

    feats = {
        "train_features.npy": b.train_features,
        "val_features.npy": b.val_features,
        "test_features.npy": b.test_features,
    }
    for name, arr in feats.items():
        if arr.ndim != 2 or arr.shape[0] < 1:
            raise BundleError(f"{name}: expected nonempty 2-D array, got shape {arr.shape}")
        if arr.shape[1] != m.dim:
            raise BundleError(
                f"{name}: dimension mismatch, manifest dim {m.dim} vs array dim {arr.shape[1]}"
            )
        _check_finite(name, arr)

    logits = {
        "val_logits.npy": (b.val_logits, b.val_features),
        "test_logits.npy": (b.test_logits, b.test_features),
    }
    for name, (arr, paired) in logits.items():
        if arr.ndim != 2:
            raise BundleError(f"{name}: expected 2-D array, got shape {arr.shape}")
        if arr.shape[0] != paired.shape[0]:
            raise BundleError(
                f"{name}: row count {arr.shape[0]} does not match features {paired.shape[0]}"
            )
        if arr.shape[1] != m.num_classes:
            raise BundleError(
                f"{name}: class-count mismatch, manifest num_classes {m.num_classes} "
                f"vs array columns {arr.shape[1]}"
            )
        _check_finite(name, arr)

    _check_labels("train_labels.npy", b.train_labels, b.train_features.shape[0], m.num_classes)
    _check_labels("val_labels.npy", b.val_labels, b.val_features.shape[0], m.num_classes)
    if b.test_labels is not None:
        _check_labels("test_labels.npy", b.test_labels, b.test_features.shape[0], m.num_classes)


def _load_array(path: str, name: str) -> np.ndarray:
    full = os.path.join(path, name)
    if not os.path.isfile(full):
        raise BundleError(f"missing file: {name}")
    return np.load(full, allow_pickle=False)


def load_bundle(path: str) -> SplitBundle:
    """Load and validate a bundle directory. Row i of every file is sample i."""
    manifest_path = os.path.join(path, MANIFEST_NAME)
    if not os.path.isfile(manifest_path):
        raise BundleError(f"missing file: {MANIFEST_NAME}")
    with open(manifest_path, "r", encoding="utf-8") as fh:
        manifest = Manifest.from_dict(json.load(fh))

    arrays = {name: _load_array(path, name) for name in FILES_REQUIRED}
    test_labels = None
    if os.path.isfile(os.path.join(path, FILE_TEST_LABELS)):
        test_labels = _load_array(path, FILE_TEST_LABELS)

    bundle = SplitBundle(
        manifest=manifest,
        train_features=arrays["train_features.npy"],
        train_labels=arrays["train_labels.npy"],
        val_features=arrays["val_features.npy"],
        val_logits=arrays["val_logits.npy"],
        val_labels=arrays["val_labels.npy"],
        test_features=arrays["test_features.npy"],
        test_logits=arrays["test_logits.npy"],
        test_labels=test_labels,
    )
    validate_bundle(bundle)
    return bundle


def save_bundle(bundle: SplitBundle, path: str) -> None:
    """Write a validated bundle to ``path`` (created if needed).

    Arrays are stored little-endian C-order in the .npy v1 container;
    features/logits as float32, labels as int64, so load(save(b)) round-trips
    bit-exactly for bundles already in those dtypes.
    """
    validate_bundle(bundle)
    os.makedirs(path, exist_ok=True)

    def _save(name: str, arr: np.ndarray, dtype) -> None:
        np.save(os.path.join(path, name), np.ascontiguousarray(arr, dtype=dtype))

    _save("train_features.npy", bundle.train_features, np.float32)
    _save("train_labels.npy", bundle.train_labels, np.int64)
    _save("val_features.npy", bundle.val_features, np.float32)
    _save("val_logits.npy", bundle.val_logits, np.float32)
    _save("val_labels.npy", bundle.val_labels, np.int64)
    _save("test_features.npy", bundle.test_features, np.float32)
    _save("test_logits.npy", bundle.test_logits, np.float32)
    if bundle.test_labels is not None:
        _save("test_labels.npy", bundle.test_labels, np.int64)

    with open(os.path.join(path, MANIFEST_NAME), "w", encoding="utf-8") as fh:
        json.dump(bundle.manifest.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
