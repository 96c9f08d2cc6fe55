import dataclasses
import os

import numpy as np
import pytest

from shiftcheck.bundle import BundleError, load_bundle, save_bundle


def test_round_trip_is_identity(small_bundle, tmp_path):
    path = str(tmp_path / "bundle")
    save_bundle(small_bundle, path)
    loaded = load_bundle(path)
    assert loaded.manifest == small_bundle.manifest
    np.testing.assert_array_equal(loaded.train_features, small_bundle.train_features)
    np.testing.assert_array_equal(loaded.train_labels, small_bundle.train_labels)
    np.testing.assert_array_equal(loaded.val_features, small_bundle.val_features)
    np.testing.assert_array_equal(loaded.val_logits, small_bundle.val_logits)
    np.testing.assert_array_equal(loaded.val_labels, small_bundle.val_labels)
    np.testing.assert_array_equal(loaded.test_features, small_bundle.test_features)
    np.testing.assert_array_equal(loaded.test_logits, small_bundle.test_logits)
    assert loaded.test_labels is None


def test_round_trip_with_test_labels(small_bundle, tmp_path):
    bundle = dataclasses.replace(
        small_bundle, test_labels=np.zeros(40, dtype=np.int64)
    )
    path = str(tmp_path / "bundle")
    save_bundle(bundle, path)
    loaded = load_bundle(path)
    np.testing.assert_array_equal(loaded.test_labels, bundle.test_labels)


def test_shapes_pass_through(small_bundle, tmp_path):
    path = str(tmp_path / "bundle")
    save_bundle(small_bundle, path)
    loaded = load_bundle(path)
    assert loaded.train_features.shape == (100, 8)
    assert loaded.val_logits.shape == (50, 3)
    assert loaded.dim == 8 and loaded.num_classes == 3


def test_label_out_of_range(small_bundle, tmp_path):
    labels = small_bundle.val_labels.copy()
    labels[7] = 3
    bad = dataclasses.replace(small_bundle, val_labels=labels)
    with pytest.raises(BundleError, match="label out of range"):
        save_bundle(bad, str(tmp_path / "bundle"))


def test_dimension_mismatch(small_bundle, tmp_path):
    bad = dataclasses.replace(
        small_bundle, test_features=np.zeros((40, 16), dtype=np.float32)
    )
    with pytest.raises(BundleError, match="dimension mismatch"):
        save_bundle(bad, str(tmp_path / "bundle"))


def test_missing_file(small_bundle, tmp_path):
    path = str(tmp_path / "bundle")
    save_bundle(small_bundle, path)
    os.remove(os.path.join(path, "val_logits.npy"))
    with pytest.raises(BundleError, match="missing file: val_logits.npy"):
        load_bundle(path)


def test_non_finite_rejected(small_bundle, tmp_path):
    feats = small_bundle.train_features.copy()
    feats[3, 2] = np.nan
    bad = dataclasses.replace(small_bundle, train_features=feats)
    with pytest.raises(BundleError, match="train_features.npy: non-finite"):
        save_bundle(bad, str(tmp_path / "bundle"))


def test_creates_target_directory(small_bundle, tmp_path):
    path = str(tmp_path / "deep" / "nested" / "bundle")
    save_bundle(small_bundle, path)
    assert os.path.isfile(os.path.join(path, "manifest.json"))


def test_unwritable_path(small_bundle):
    with pytest.raises(OSError):
        save_bundle(small_bundle, "/proc/definitely/not/writable")


def test_unknown_manifest_keys_ignored(small_bundle, tmp_path):
    import json

    path = str(tmp_path / "bundle")
    save_bundle(small_bundle, path)
    manifest_path = os.path.join(path, "manifest.json")
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    manifest["extra_key"] = "ignored"
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh)
    assert load_bundle(path).manifest.name == "toy"
