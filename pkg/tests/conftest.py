import numpy as np
import pytest

from shiftcheck.bundle import Manifest, SplitBundle


@pytest.fixture
def small_bundle() -> SplitBundle:
    rng = np.random.default_rng(0)
    return SplitBundle(
        manifest=Manifest(name="toy", model_id="m0", seed=0, num_classes=3, dim=8),
        train_features=rng.normal(size=(100, 8)).astype(np.float32),
        train_labels=rng.integers(0, 3, size=100).astype(np.int64),
        val_features=rng.normal(size=(50, 8)).astype(np.float32),
        val_logits=rng.normal(size=(50, 3)).astype(np.float32),
        val_labels=rng.integers(0, 3, size=50).astype(np.int64),
        test_features=rng.normal(size=(40, 8)).astype(np.float32),
        test_logits=rng.normal(size=(40, 3)).astype(np.float32),
    )
