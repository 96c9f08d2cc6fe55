"""Export penultimate-layer embeddings and logits from vision classifiers
into bundle directories consumed by the shiftcheck CLI."""

from .data import FolderSplit, list_classes, list_samples
from .export import ExportSpec, export, extract_split
from .models import (
    BUILTIN_MODELS,
    ExportError,
    TinyCnn,
    build_model,
    load_checkpoint,
    resolve_head,
)

__version__ = "0.1.0"
