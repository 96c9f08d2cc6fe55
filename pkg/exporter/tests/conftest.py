import os

import numpy as np
import pytest
import torch
from PIL import Image

from shiftexport.models import TinyCnn

CLASSES = ("cat", "dog", "fox")
SPLIT_SIZES = {"train": 5, "val": 3, "test": 3}  # per class; 33 images total


@pytest.fixture(scope="session")
def image_root(tmp_path_factory):
    root = tmp_path_factory.mktemp("images")
    rng = np.random.default_rng(0)
    for split, per_class in SPLIT_SIZES.items():
        for c, cls in enumerate(CLASSES):
            cls_dir = root / split / cls
            cls_dir.mkdir(parents=True)
            for i in range(per_class):
                # class-dependent mean so the classes are visually distinct
                pixels = rng.integers(0, 80, size=(32, 32, 3)) + 60 * c
                Image.fromarray(pixels.astype(np.uint8)).save(cls_dir / f"img{i:02d}.png")
    return str(root)


@pytest.fixture(scope="session")
def checkpoint_path(tmp_path_factory):
    torch.manual_seed(7)
    model = TinyCnn(num_classes=len(CLASSES))
    path = tmp_path_factory.mktemp("ckpt") / "tiny.pt"
    torch.save(model.state_dict(), path)
    return str(path)


@pytest.fixture()
def out_dir(tmp_path):
    return str(tmp_path / "bundle")
