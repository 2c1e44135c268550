from __future__ import annotations

import gzip
import logging
from pathlib import Path

import numpy as np

from ..errors import IdxFormatError
from .datasets import Dataset

logger = logging.getLogger(__name__)

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801
NUM_CLASSES = 10


def _read_bytes(path: str | Path) -> bytes:
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rb") as fh:
        return fh.read()


def _header(raw: bytes, ndims: int, what: str) -> tuple[int, list[int]]:
    need = 4 + 4 * ndims
    if len(raw) < need:
        raise IdxFormatError(f"{what}.header", f"expected at least {need} header bytes, got {len(raw)}")
    magic = int.from_bytes(raw[0:4], "big")
    dims = [int.from_bytes(raw[4 + 4 * i: 8 + 4 * i], "big") for i in range(ndims)]
    return magic, dims


def load_idx(images_path: str | Path, labels_path: str | Path) -> Dataset:
    """Load an IDX image/label pair (the MNIST container) with pixels scaled to [0, 1]."""
    image_raw = _read_bytes(images_path)
    label_raw = _read_bytes(labels_path)

    magic, (count, rows, cols) = _header(image_raw, 3, "images")
    if magic != IMAGES_MAGIC:
        raise IdxFormatError("images.magic", f"expected 0x{IMAGES_MAGIC:08x}, got 0x{magic:08x}")
    label_magic, (label_count,) = _header(label_raw, 1, "labels")
    if label_magic != LABELS_MAGIC:
        raise IdxFormatError("labels.magic", f"expected 0x{LABELS_MAGIC:08x}, got 0x{label_magic:08x}")
    if count != label_count:
        raise IdxFormatError("labels.count", f"{label_count} labels for {count} images")

    pixels = np.frombuffer(image_raw, dtype=np.uint8, offset=16)
    if pixels.size != count * rows * cols:
        raise IdxFormatError("images.data", f"expected {count * rows * cols} pixel bytes, got {pixels.size}")
    labels = np.frombuffer(label_raw, dtype=np.uint8, offset=8)
    if labels.size != count:
        raise IdxFormatError("labels.data", f"expected {count} label bytes, got {labels.size}")
    if labels.size and labels.max() >= NUM_CLASSES:
        raise IdxFormatError("labels.data", f"label {int(labels.max())} outside [0, {NUM_CLASSES})")

    features = pixels.reshape(count, rows * cols).astype(np.float64) / 255.0
    logger.info(f"Loaded IDX dataset: {count} samples, {rows}x{cols} pixels")
    return Dataset(features=features, labels=labels.astype(np.int64), num_classes=NUM_CLASSES)
