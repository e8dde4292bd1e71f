"""Image buffers: 8-bit RGB square arrays plus lossless load/save."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image


def validate_image(pixels: np.ndarray, side: int | None = None) -> np.ndarray:
    """Check an H×W×3 uint8 buffer; optionally enforce a square side length."""
    arr = np.asarray(pixels)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"expected H×W×3 array, got shape {arr.shape}")
    if arr.dtype != np.uint8:
        raise ValueError(f"expected uint8 pixels, got {arr.dtype}")
    if side is not None and arr.shape[:2] != (side, side):
        raise ValueError(f"expected {side}×{side} image, got {arr.shape[:2]}")
    return arr


def clamp_to_image(values: np.ndarray) -> np.ndarray:
    """Round and clamp float pixel values into a valid uint8 buffer."""
    return np.clip(np.rint(values), 0, 255).astype(np.uint8)


def load_image(path: str | Path) -> np.ndarray:
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.uint8)
    return arr


def save_image(pixels: np.ndarray, path: str | Path) -> None:
    arr = validate_image(pixels)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(arr, mode="RGB").save(path, format="PNG")


def to_gray(pixels: np.ndarray) -> np.ndarray:
    """Rec. 601 luma, float64 in [0, 255]."""
    arr = np.asarray(pixels, dtype=np.float64)
    if arr.ndim == 2:
        return arr
    return 0.299 * arr[..., 0] + 0.587 * arr[..., 1] + 0.114 * arr[..., 2]
