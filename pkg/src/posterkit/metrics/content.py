"""Background-aware metrics: saliency occlusion, space utility, text readability.

Pixel sets are computed on rasterized boxes (snapped with the same rounding
as rendering) because saliency arrives as a raster; there is no analytic
shortcut here by design.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from PIL import Image

from ..core import Canvas, LayoutRecord, denormalize

DEFAULT_SALIENCY_THRESHOLD = 0.5

# ITU-R 601 luma weights, also what PIL's "L" conversion uses.
GRAY_WEIGHTS = (0.299, 0.587, 0.114)


class DimensionMismatchError(Exception):
    """Mask or background raster does not match the layout canvas."""


@dataclass(frozen=True)
class SaliencyMask:
    """Grayscale importance raster, row-major float values clamped to [0,1]."""

    values: np.ndarray  # (H, W) float64

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"mask must be 2-D, got shape {arr.shape}")
        object.__setattr__(self, "values", np.clip(arr, 0.0, 1.0))
        self.values.setflags(write=False)

    @property
    def width_px(self) -> int:
        return self.values.shape[1]

    @property
    def height_px(self) -> int:
        return self.values.shape[0]

    @classmethod
    def load(cls, path: str | Path) -> "SaliencyMask":
        with Image.open(path) as img:
            gray = img.convert("L")
            return cls(np.asarray(gray, dtype=np.float64) / 255.0)


@dataclass(frozen=True)
class BackgroundImage:
    """8-bit RGB raster of the poster background."""

    pixels: np.ndarray  # (H, W, 3) uint8

    def __post_init__(self):
        arr = np.asarray(self.pixels, dtype=np.uint8)
        if arr.ndim != 3 or arr.shape[2] != 3 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"background must be (H, W, 3), got shape {arr.shape}")
        object.__setattr__(self, "pixels", arr)
        self.pixels.setflags(write=False)

    @property
    def width_px(self) -> int:
        return self.pixels.shape[1]

    @property
    def height_px(self) -> int:
        return self.pixels.shape[0]

    @classmethod
    def load(cls, path: str | Path) -> "BackgroundImage":
        with Image.open(path) as img:
            return cls(np.asarray(img.convert("RGB")))


def _check_dims(record: LayoutRecord, width_px: int, height_px: int, what: str) -> None:
    if (record.canvas.width_px, record.canvas.height_px) != (width_px, height_px):
        raise DimensionMismatchError(
            f"{what} is {width_px}x{height_px} but canvas is "
            f"{record.canvas.width_px}x{record.canvas.height_px}"
        )


def box_union_raster(record: LayoutRecord, width_px: int, height_px: int) -> np.ndarray:
    """Boolean (H, W) raster of the union of all element boxes."""
    union = np.zeros((height_px, width_px), dtype=bool)
    canvas = Canvas(width_px, height_px)
    for elem in record.elements:
        left, top, right, bottom = denormalize(elem.box, canvas)
        left, right = max(0, left), min(width_px, right)
        top, bottom = max(0, top), min(height_px, bottom)
        if right > left and bottom > top:
            union[top:bottom, left:right] = True
    return union


def occlusion(
    record: LayoutRecord,
    mask: SaliencyMask,
    threshold: float = DEFAULT_SALIENCY_THRESHOLD,
) -> float:
    """Fraction of salient pixels (mask >= threshold) covered by element boxes."""
    _check_dims(record, mask.width_px, mask.height_px, "saliency mask")
    salient = mask.values >= threshold
    total = int(salient.sum())
    if total == 0:
        return 0.0
    union = box_union_raster(record, mask.width_px, mask.height_px)
    return int(np.logical_and(union, salient).sum()) / total


def utility(
    record: LayoutRecord,
    mask: SaliencyMask,
    threshold: float = DEFAULT_SALIENCY_THRESHOLD,
) -> float:
    """Fraction of non-salient pixels (mask < threshold) covered by element boxes."""
    _check_dims(record, mask.width_px, mask.height_px, "saliency mask")
    nonsalient = mask.values < threshold
    total = int(nonsalient.sum())
    if total == 0:
        return 0.0
    union = box_union_raster(record, mask.width_px, mask.height_px)
    return int(np.logical_and(union, nonsalient).sum()) / total


def gradient_magnitude(background: BackgroundImage) -> np.ndarray:
    """Normalized per-pixel gradient magnitude of the grayscale background.

    Central differences on an edge-replicated image, so every pixel (borders
    included) uses the same stencil; dividing by the largest possible
    central-difference magnitude maps the result into [0, 1].
    """
    rgb = background.pixels.astype(np.float64) / 255.0
    gray = rgb[..., 0] * GRAY_WEIGHTS[0] + rgb[..., 1] * GRAY_WEIGHTS[1] + rgb[..., 2] * GRAY_WEIGHTS[2]
    padded = np.pad(gray, 1, mode="edge")
    gx = (padded[1:-1, 2:] - padded[1:-1, :-2]) / 2.0
    gy = (padded[2:, 1:-1] - padded[:-2, 1:-1]) / 2.0
    return np.hypot(gx, gy) / np.sqrt(0.5)


def readability(
    record: LayoutRecord,
    background: BackgroundImage,
    text_categories: set[str] | frozenset[str],
) -> float:
    """Mean background gradient under text-element pixels; 0 with no text pixels.

    High values mean text sits on busy regions and will be hard to read.
    """
    if not text_categories:
        raise ValueError("text_categories must be nonempty")
    _check_dims(record, background.width_px, background.height_px, "background")
    text_elements = [e for e in record.elements if e.category in text_categories]
    if not text_elements:
        return 0.0
    text_only = replace(record, elements=tuple(text_elements))
    union = box_union_raster(text_only, background.width_px, background.height_px)
    count = int(union.sum())
    if count == 0:
        return 0.0
    return float(gradient_magnitude(background)[union].sum()) / count
