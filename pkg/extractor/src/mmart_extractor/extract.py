"""Deterministic ResNet50 feature extraction.

Preprocessing is fixed: resize the shorter side to 256, center-crop
224 x 224, and normalize with the standard pre-trained-model statistics.
The ``logits_1000`` layer is the full network output; ``pool_2048`` is the
global-average-pooled output with the final fully connected layer removed.
"""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
import torch
from PIL import Image, UnidentifiedImageError
from torch import nn
from torchvision import transforms
from torchvision.models import resnet50

from .mmaf import read_mmaf, write_mmaf

log = logging.getLogger(__name__)

LAYERS = ("logits_1000", "pool_2048")
LAYER_DIMS = {"logits_1000": 1000, "pool_2048": 2048}

PREPROCESS = transforms.Compose(
    [
        transforms.Resize(256),
        transforms.CenterCrop(224),
        transforms.ToTensor(),
        transforms.Normalize(
            mean=[0.485, 0.456, 0.406], std=[0.229, 0.224, 0.225]
        ),
    ]
)


def build_model(
    layer: str, weights_path: str | None = None, untrained_seed: int | None = None
) -> nn.Module:
    """A ResNet50 truncated per ``layer``; eval mode, CPU.

    Weights come from ``weights_path`` (a state_dict file) when given, from
    a seeded random initialization when ``untrained_seed`` is set, and from
    the standard pre-trained download otherwise.
    """
    if layer not in LAYERS:
        raise ValueError(f"unknown layer {layer!r}")
    if weights_path is not None:
        backbone = resnet50(weights=None)
        state = torch.load(weights_path, map_location="cpu", weights_only=True)
        backbone.load_state_dict(state)
    elif untrained_seed is not None:
        torch.manual_seed(untrained_seed)
        backbone = resnet50(weights=None)
    else:
        from torchvision.models import ResNet50_Weights

        backbone = resnet50(weights=ResNet50_Weights.IMAGENET1K_V1)
    if layer == "pool_2048":
        backbone = nn.Sequential(*list(backbone.children())[:-1], nn.Flatten(1))
    backbone.eval()
    return backbone


def load_image(path: Path) -> torch.Tensor | None:
    """Preprocessed tensor, or None (with a warning) if undecodable."""
    try:
        with Image.open(path) as img:
            return PREPROCESS(img.convert("RGB"))
    except (UnidentifiedImageError, OSError) as exc:
        log.warning("skipping undecodable image %s: %s", path.name, exc)
        return None


def extract(
    image_dir: str | Path,
    output_path: str | Path,
    layer: str = "logits_1000",
    batch: int = 16,
    weights_path: str | None = None,
    untrained_seed: int | None = None,
) -> int:
    """Extract features for every decodable file in ``image_dir``.

    Record id is the filename stem.  If the output file already exists the
    new records are appended; a dimension mismatch or duplicate id on
    append is an error.  Returns the number of records written.
    """
    dim = LAYER_DIMS[layer]
    model = build_model(layer, weights_path, untrained_seed)

    records: dict[str, np.ndarray] = {}
    out = Path(output_path)
    if out.exists():
        existing_dim, records = read_mmaf(out)
        if existing_dim != dim:
            raise ValueError(
                f"append dim mismatch: {out} has dim {existing_dim}, layer {layer} "
                f"produces {dim}"
            )

    paths = sorted(p for p in Path(image_dir).iterdir() if p.is_file())
    pending: list[tuple[str, torch.Tensor]] = []
    written = 0

    def flush() -> None:
        nonlocal written
        if not pending:
            return
        stack = torch.stack([tensor for _, tensor in pending])
        with torch.no_grad():
            features = model(stack).numpy().astype(np.float32)
        for (stem, _), vec in zip(pending, features):
            records[stem] = vec
        written += len(pending)
        pending.clear()

    for path in paths:
        tensor = load_image(path)
        if tensor is None:
            continue
        if path.stem in records:
            raise ValueError(f"duplicate record id {path.stem!r} on append")
        pending.append((path.stem, tensor))
        if len(pending) >= batch:
            flush()
    flush()
    write_mmaf(out, dim, records)
    log.info("wrote %d records (dim %d) to %s", written, dim, out)
    return written
