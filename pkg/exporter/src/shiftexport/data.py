"""Deterministic image-folder datasets.

A split directory holds one subdirectory per class; files are enumerated in
sorted order so row i of every exported array always maps to the same image.
The class-to-index mapping comes from the train split and is shared by all
splits, so label indices are consistent even when a split is missing a class.
"""

from __future__ import annotations

import os
from typing import Dict, List, Tuple

import torch
from PIL import Image
from torch.utils.data import Dataset
from torchvision import transforms

from .models import ExportError

IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg", ".bmp", ".gif", ".webp", ".tiff")


def list_classes(split_dir: str) -> List[str]:
    if not os.path.isdir(split_dir):
        raise ExportError(f"missing split directory: {split_dir}")
    classes = sorted(
        entry for entry in os.listdir(split_dir) if os.path.isdir(os.path.join(split_dir, entry))
    )
    if not classes:
        raise ExportError(f"no class subdirectories in {split_dir}")
    return classes


def list_samples(split_dir: str, class_to_idx: Dict[str, int]) -> List[Tuple[str, int]]:
    samples: List[Tuple[str, int]] = []
    for cls in sorted(class_to_idx):
        cls_dir = os.path.join(split_dir, cls)
        if not os.path.isdir(cls_dir):
            continue
        for fname in sorted(os.listdir(cls_dir)):
            if fname.lower().endswith(IMAGE_EXTENSIONS):
                samples.append((os.path.join(cls_dir, fname), class_to_idx[cls]))
    if not samples:
        raise ExportError(f"no images found under {split_dir}")
    return samples


class FolderSplit(Dataset):
    """Images of one split, in sorted (class, filename) order."""

    def __init__(self, split_dir: str, class_to_idx: Dict[str, int], image_size: int):
        for cls in list_classes(split_dir):
            if cls not in class_to_idx:
                raise ExportError(
                    f"class {cls!r} in {split_dir} is not present in the train split"
                )
        self.samples = list_samples(split_dir, class_to_idx)
        self.transform = transforms.Compose(
            [
                transforms.Resize((image_size, image_size)),
                transforms.ToTensor(),
                transforms.Normalize(mean=[0.5, 0.5, 0.5], std=[0.5, 0.5, 0.5]),
            ]
        )

    def __len__(self) -> int:
        return len(self.samples)

    def __getitem__(self, idx: int) -> Tuple[torch.Tensor, int]:
        path, label = self.samples[idx]
        with Image.open(path) as img:
            tensor = self.transform(img.convert("RGB"))
        return tensor, label
