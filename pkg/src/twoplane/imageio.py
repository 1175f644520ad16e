"""8-bit PNG <-> float32 [0, 1] images."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from .warp import Image


def read_png(path: str | Path) -> Image:
    with PILImage.open(path) as im:
        if im.mode not in ("L", "RGB"):
            im = im.convert("L" if im.mode in ("1", "I", "I;16", "LA") else "RGB")
        arr = np.asarray(im, dtype=np.uint8)
    return Image(arr.astype(np.float32) / np.float32(255.0))


def to_uint8(img: Image) -> np.ndarray:
    """Round half up after scaling by 255."""
    scaled = np.floor(img.data.astype(np.float64) * 255.0 + 0.5)
    return np.clip(scaled, 0, 255).astype(np.uint8)


def write_png(img: Image, path: str | Path) -> None:
    arr = to_uint8(img)
    PILImage.fromarray(arr[:, :, 0] if arr.shape[2] == 1 else arr).save(path, format="PNG")


def write_heatmap(grid: np.ndarray, path: str | Path) -> None:
    """Grayscale PNG of a positive map scaled so its maximum becomes 255."""
    g = np.asarray(grid, dtype=np.float64)
    write_png(Image((g / g.max()).astype(np.float32)), path)
