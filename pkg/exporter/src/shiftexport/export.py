"""Export penultimate-layer embeddings and logits to a bundle directory.

The output layout is the bundle format consumed by the ``shiftcheck`` CLI:
one little-endian C-order ``.npy`` file per array plus ``manifest.json``.
Features and logits are float32, labels int64; row i of every file is sample
i in the dataset's sorted iteration order (no shuffling anywhere).
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
import torch
from torch.utils.data import DataLoader

from .data import FolderSplit, list_classes
from .models import ExportError, build_model, load_checkpoint, resolve_head

SPLITS = ("train", "val", "test")


@dataclass(frozen=True)
class ExportSpec:
    model: str
    data_root: str
    out_dir: str
    checkpoint: Optional[str] = None
    head: Optional[str] = None
    num_classes: Optional[int] = None
    batch_size: int = 32
    image_size: int = 32
    device: str = "cpu"
    name: str = field(default="")
    seed: int = 0

    def validate(self) -> None:
        if self.batch_size < 1:
            raise ExportError("batch_size must be >= 1")
        if self.image_size < 1:
            raise ExportError("image_size must be >= 1")


def extract_split(
    model: torch.nn.Module,
    head: torch.nn.Linear,
    dataset: FolderSplit,
    batch_size: int,
    device: torch.device,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Run batched inference over one split; return (features, logits, labels).

    Features are the inputs to the classification head, captured by a forward
    pre-hook, flattened to N x D.
    """
    captured: List[torch.Tensor] = []

    def grab_input(_module, args):
        captured.append(torch.flatten(args[0].detach(), 1).cpu())

    handle = head.register_forward_pre_hook(grab_input)
    loader = DataLoader(dataset, batch_size=batch_size, shuffle=False, num_workers=0)
    feats: List[np.ndarray] = []
    logits: List[np.ndarray] = []
    labels: List[np.ndarray] = []
    try:
        model.eval()
        with torch.no_grad():
            for batch, batch_labels in loader:
                captured.clear()
                out = model(batch.to(device))
                if not captured:
                    raise ExportError("head hook never fired; check the head name")
                feats.append(captured[-1].numpy())
                logits.append(out.detach().cpu().numpy())
                labels.append(batch_labels.numpy())
    finally:
        handle.remove()

    features = np.concatenate(feats).astype(np.float32)
    logit_arr = np.concatenate(logits).astype(np.float32)
    label_arr = np.concatenate(labels).astype(np.int64)
    if not np.isfinite(features).all() or not np.isfinite(logit_arr).all():
        raise ExportError("model produced non-finite features or logits")
    return features, logit_arr, label_arr


def export(spec: ExportSpec) -> str:
    """Export all three splits under ``spec.data_root`` to ``spec.out_dir``.

    Returns the output directory path. Raises ExportError on missing splits,
    unloadable models/checkpoints, or dimension inference failure.
    """
    spec.validate()
    device = torch.device(spec.device)
    torch.manual_seed(spec.seed)

    train_dir = os.path.join(spec.data_root, "train")
    classes = list_classes(train_dir)
    class_to_idx = {cls: i for i, cls in enumerate(classes)}

    model = build_model(spec.model, num_classes=spec.num_classes or len(classes))
    if spec.checkpoint is not None:
        load_checkpoint(model, spec.checkpoint, device)
    model.to(device)
    head_name, head = resolve_head(model, spec.head)
    if head.out_features < 2:
        raise ExportError(f"head {head_name!r} has {head.out_features} outputs; need >= 2")

    arrays: Dict[str, np.ndarray] = {}
    dim: Optional[int] = None
    for split in SPLITS:
        split_dir = os.path.join(spec.data_root, split)
        dataset = FolderSplit(split_dir, class_to_idx, spec.image_size)
        features, logit_arr, label_arr = extract_split(
            model, head, dataset, spec.batch_size, device
        )
        if dim is None:
            dim = features.shape[1]
        elif features.shape[1] != dim:
            raise ExportError(f"{split}: feature dim {features.shape[1]} != {dim}")
        arrays[f"{split}_features.npy"] = features
        arrays[f"{split}_logits.npy"] = logit_arr
        arrays[f"{split}_labels.npy"] = label_arr

    num_classes = int(head.out_features)
    for split in SPLITS:
        labels = arrays[f"{split}_labels.npy"]
        if labels.max(initial=0) >= num_classes:
            raise ExportError(f"{split}: label {int(labels.max())} >= head outputs {num_classes}")

    os.makedirs(spec.out_dir, exist_ok=True)
    for fname, arr in arrays.items():
        np.save(os.path.join(spec.out_dir, fname), np.ascontiguousarray(arr))

    manifest = {
        "name": spec.name or os.path.basename(os.path.normpath(spec.data_root)),
        "model_id": spec.model if spec.checkpoint is None else f"{spec.model}@{spec.checkpoint}",
        "seed": spec.seed,
        "num_classes": num_classes,
        "dim": int(dim),
        "classes": classes,
        "head": head_name,
    }
    with open(os.path.join(spec.out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return spec.out_dir
