"""Image carriers and pixel-level operations.

All analysis code works on :class:`GrayImage`, a float64 intensity field in
[0, 1] with an optional physical scale (pixels per millimetre). Colour input
is converted once on entry with :func:`to_grayscale`.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import OutOfBounds

#: Photometric luma weights for RGB to grayscale conversion.
LUMA_WEIGHTS = (0.2126, 0.7152, 0.0722)

_RANGE_EPS = 1e-9


def _check_scale(scale: float | None) -> None:
    if scale is not None and not (np.isfinite(scale) and scale > 0):
        raise ValueError(f"scale must be positive and finite, got {scale!r}")


@dataclass(frozen=True, eq=False)
class GrayImage:
    """2D intensity field with values in [0, 1].

    ``data`` has shape (height, width), row-major. ``scale`` is the optional
    sampling density in pixels per millimetre.
    """

    data: np.ndarray
    scale: float | None = None

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2 or data.size == 0:
            raise ValueError("GrayImage needs a non-empty 2D array")
        if data.min() < -_RANGE_EPS or data.max() > 1.0 + _RANGE_EPS:
            raise ValueError("GrayImage intensities must lie in [0, 1]")
        object.__setattr__(self, "data", np.clip(data, 0.0, 1.0))
        _check_scale(self.scale)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def with_scale(self, scale: float | None) -> "GrayImage":
        return GrayImage(self.data, scale)


@dataclass(frozen=True, eq=False)
class RgbImage:
    """Colour image; ``data`` has shape (height, width, 3), values in [0, 1]."""

    data: np.ndarray
    scale: float | None = None

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 3 or data.shape[2] != 3 or data.size == 0:
            raise ValueError("RgbImage needs an array of shape (h, w, 3)")
        if data.min() < -_RANGE_EPS or data.max() > 1.0 + _RANGE_EPS:
            raise ValueError("RgbImage intensities must lie in [0, 1]")
        object.__setattr__(self, "data", np.clip(data, 0.0, 1.0))
        _check_scale(self.scale)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True, eq=False)
class EdgeMask:
    """Boolean per-pixel edge map, dimensions matching its source image."""

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=bool)
        if data.ndim != 2 or data.size == 0:
            raise ValueError("EdgeMask needs a non-empty 2D boolean array")
        object.__setattr__(self, "data", data)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


class CalibrationMethod(Enum):
    RULER = "ruler"
    PAPER_SIZE = "paper_size"
    EXPLICIT = "explicit"


@dataclass(frozen=True)
class Calibration:
    """Physical pixel size estimate: pixels per millimetre plus provenance."""

    pixels_per_mm: float
    method: CalibrationMethod
    confidence_note: str = ""

    def __post_init__(self):
        if not (np.isfinite(self.pixels_per_mm) and self.pixels_per_mm > 0):
            raise ValueError("pixels_per_mm must be positive and finite")


def to_grayscale(img: RgbImage) -> GrayImage:
    """Convert RGB to grayscale using photometric luma weights.

    An image with equal channels maps to that channel exactly (weights sum
    to one); the scale tag is carried over.
    """
    r, g, b = img.data[..., 0], img.data[..., 1], img.data[..., 2]
    luma = LUMA_WEIGHTS[0] * r + LUMA_WEIGHTS[1] * g + LUMA_WEIGHTS[2] * b
    return GrayImage(np.clip(luma, 0.0, 1.0), img.scale)


def invert(img: GrayImage) -> GrayImage:
    """Flip intensity polarity (dark lines become bright)."""
    return GrayImage(1.0 - img.data, img.scale)


def crop_patch(img: GrayImage, x0: int, y0: int, w: int, h: int) -> GrayImage:
    """Crop a w-by-h rectangle with top-left corner (x0, y0).

    Raises OutOfBounds when the rectangle is not fully inside the image.
    """
    if w <= 0 or h <= 0:
        raise OutOfBounds(f"patch dimensions must be positive, got {w}x{h}")
    if x0 < 0 or y0 < 0 or x0 + w > img.width or y0 + h > img.height:
        raise OutOfBounds(
            f"patch {w}x{h}+{x0}+{y0} exceeds image {img.width}x{img.height}"
        )
    return GrayImage(img.data[y0 : y0 + h, x0 : x0 + w].copy(), img.scale)
