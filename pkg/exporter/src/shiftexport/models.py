"""Model construction and penultimate-layer head resolution.

The penultimate layer is defined as the input to the final linear
classification head. The head is resolved automatically as the last
``nn.Linear`` module in registration order; a manual ``head`` override
(dotted module path) covers architectures where that heuristic fails.
"""

from __future__ import annotations

from typing import Optional, Tuple

import torch
from torch import nn


class ExportError(RuntimeError):
    """Raised when a model or dataset cannot be loaded or resolved."""


class TinyCnn(nn.Module):
    """A small test-scale image classifier: conv stem, pooled embedding,
    linear head. Useful for exercising the export pipeline without large
    pretrained weights."""

    def __init__(self, num_classes: int = 3, embed_dim: int = 16, in_channels: int = 3):
        super().__init__()
        self.stem = nn.Sequential(
            nn.Conv2d(in_channels, 8, kernel_size=3, padding=1),
            nn.ReLU(),
            nn.AdaptiveAvgPool2d(4),
        )
        self.embed = nn.Linear(8 * 4 * 4, embed_dim)
        self.act = nn.ReLU()
        self.head = nn.Linear(embed_dim, num_classes)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        z = self.stem(x)
        z = torch.flatten(z, 1)
        z = self.act(self.embed(z))
        return self.head(z)


BUILTIN_MODELS = {
    "tiny-cnn": TinyCnn,
}


def build_model(name: str, num_classes: Optional[int] = None) -> nn.Module:
    """Build a model by name: a builtin test model or a torchvision
    architecture (random weights unless a checkpoint is loaded on top)."""
    if name in BUILTIN_MODELS:
        kwargs = {} if num_classes is None else {"num_classes": num_classes}
        return BUILTIN_MODELS[name](**kwargs)
    try:
        from torchvision import models as tv_models

        kwargs = {} if num_classes is None else {"num_classes": num_classes}
        return tv_models.get_model(name, weights=None, **kwargs)
    except Exception as exc:
        raise ExportError(f"cannot build model {name!r}: {exc}") from exc


def load_checkpoint(model: nn.Module, path: str, device: torch.device) -> nn.Module:
    """Load a state-dict checkpoint into ``model``."""
    try:
        state = torch.load(path, map_location=device, weights_only=True)
    except FileNotFoundError:
        raise
    except Exception as exc:
        raise ExportError(f"cannot load checkpoint {path!r}: {exc}") from exc
    if isinstance(state, dict) and "state_dict" in state:
        state = state["state_dict"]
    try:
        model.load_state_dict(state)
    except Exception as exc:
        raise ExportError(f"checkpoint {path!r} does not match model: {exc}") from exc
    return model


def resolve_head(model: nn.Module, head: Optional[str] = None) -> Tuple[str, nn.Linear]:
    """Return (name, module) of the final linear classification head.

    With ``head`` given, look that named module up directly; otherwise pick
    the last ``nn.Linear`` in the module registration order.
    """
    if head is not None:
        named = dict(model.named_modules())
        if head not in named:
            raise ExportError(f"no module named {head!r} in model")
        module = named[head]
        if not isinstance(module, nn.Linear):
            raise ExportError(f"module {head!r} is {type(module).__name__}, not Linear")
        return head, module
    last: Optional[Tuple[str, nn.Linear]] = None
    for name, module in model.named_modules():
        if isinstance(module, nn.Linear):
            last = (name, module)
    if last is None:
        raise ExportError("model has no Linear layer; pass an explicit head name")
    return last
