"""Canny edge detection and pixel-size calibration.

Calibration turns pixel measurements into millimetres, either from ruler
tick spacing or from a known physical page height found in the metadata.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .errors import EdgesNotFound, InsufficientTicks, InvalidThreshold
from .image import Calibration, CalibrationMethod, EdgeMask, GrayImage
from .transforms import Orientation

#: Default Canny parameters for ruler and page-edge detection.
DEFAULT_CANNY_SIGMA = 2.0
DEFAULT_CANNY_LOW = 0.1
DEFAULT_CANNY_HIGH = 0.2


def canny_edges(
    img: GrayImage,
    sigma: float = DEFAULT_CANNY_SIGMA,
    low: float = DEFAULT_CANNY_LOW,
    high: float = DEFAULT_CANNY_HIGH,
) -> EdgeMask:
    """Canny edge detector: Gaussian smoothing, gradient magnitude,
    non-maximum suppression, hysteresis thresholding.

    low/high are fractions of the maximum gradient magnitude. A constant
    image yields an empty mask for any thresholds.
    """
    if low > high:
        raise InvalidThreshold(f"low ({low}) must not exceed high ({high})")
    if low < 0:
        raise InvalidThreshold("thresholds must be non-negative")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    smooth = ndimage.gaussian_filter(img.data, sigma, mode="nearest")
    gy, gx = np.gradient(smooth)
    mag = np.hypot(gx, gy)
    peak = float(mag.max())
    if peak <= 0:
        return EdgeMask(np.zeros_like(mag, dtype=bool))

    # quantize gradient direction into 4 bins and suppress non-maxima;
    # strict comparison toward the lower-index neighbour keeps symmetric
    # ridges one pixel wide
    angle = np.rad2deg(np.arctan2(gy, gx)) % 180.0
    padded = np.pad(mag, 1, mode="constant")
    core = padded[1:-1, 1:-1]
    neighbours = {
        0: (padded[1:-1, :-2], padded[1:-1, 2:]),    # left, right
        45: (padded[:-2, 2:], padded[2:, :-2]),       # up-right, down-left
        90: (padded[:-2, 1:-1], padded[2:, 1:-1]),    # up, down
        135: (padded[:-2, :-2], padded[2:, 2:]),      # up-left, down-right
    }
    nms = np.zeros_like(mag, dtype=bool)
    bins = ((angle + 22.5) // 45.0).astype(int) % 4
    for b, key in enumerate((0, 45, 90, 135)):
        prev_n, next_n = neighbours[key]
        sel = (bins == b) & (core > prev_n) & (core >= next_n)
        nms |= sel
    # the gradient is one-sided on the frame border; suppress it there
    nms[0, :] = nms[-1, :] = False
    nms[:, 0] = nms[:, -1] = False

    strong = nms & (mag >= high * peak)
    weak = nms & (mag >= low * peak)
    if not strong.any():
        return EdgeMask(np.zeros_like(mag, dtype=bool))
    labels, n = ndimage.label(weak, structure=np.ones((3, 3), dtype=int))
    keep = np.zeros(n + 1, dtype=bool)
    keep[np.unique(labels[strong])] = True
    keep[0] = False
    return EdgeMask(keep[labels])


def _cluster_positions(columns: np.ndarray, weights: np.ndarray, merge_gap: float) -> list[float]:
    """Group sorted positions whose consecutive gap is <= merge_gap and
    return weighted centroids."""
    clusters: list[float] = []
    start = 0
    for i in range(1, len(columns) + 1):
        if i == len(columns) or columns[i] - columns[i - 1] > merge_gap:
            cols = columns[start:i]
            wts = weights[start:i]
            clusters.append(float(np.average(cols, weights=wts)))
            start = i
    return clusters


def find_tick_positions(
    edges: EdgeMask,
    axis: Orientation,
    min_count_fraction: float = 0.5,
    min_run_fraction: float = 0.3,
    merge_gap: float = 5.0,
) -> list[float]:
    """Positions of tick lines along the given axis.

    A smoothed tick produces an edge pair straddling it; both sides fall in
    one cluster and the weighted centroid recovers the tick centre. A
    candidate line must cover at least min_run_fraction of the cross
    dimension, which keeps noise edges from masquerading as ticks.
    """
    counts = edges.data.sum(axis=0 if axis is Orientation.HORIZONTAL else 1).astype(np.float64)
    cross_extent = edges.data.shape[0] if axis is Orientation.HORIZONTAL else edges.data.shape[1]
    floor = max(min_count_fraction * counts.max(), min_run_fraction * cross_extent)
    candidates = np.nonzero(counts >= floor)[0] if counts.max() > 0 else np.array([], dtype=int)
    if candidates.size == 0:
        return []
    return _cluster_positions(candidates.astype(np.float64), counts[candidates], merge_gap)


def calibrate_from_ruler(
    edges: EdgeMask,
    tick_spacing_mm: float,
    axis: Orientation = Orientation.HORIZONTAL,
) -> Calibration:
    """Pixels per millimetre from ruler ticks.

    The median of consecutive tick gaps is used rather than a single pair,
    so one missed tick does not skew the estimate.
    """
    if tick_spacing_mm <= 0:
        raise ValueError("tick_spacing_mm must be positive")
    ticks = find_tick_positions(edges, axis)
    if len(ticks) < 2:
        raise InsufficientTicks(f"found {len(ticks)} tick lines, need at least 2")
    gaps = np.diff(sorted(ticks))
    px_per_mm = float(np.median(gaps)) / tick_spacing_mm
    return Calibration(
        pixels_per_mm=px_per_mm,
        method=CalibrationMethod.RULER,
        confidence_note=f"median of {len(gaps)} tick gaps",
    )


def calibrate_from_paper_size(edges: EdgeMask, paper_height_mm: float) -> Calibration:
    """Pixels per millimetre from the page's top and bottom edges.

    Uses the longest near-horizontal edge runs; platen warp shifts these by
    at most a pixel or two, which stays well under a percent on full pages.
    """
    if paper_height_mm <= 0:
        raise ValueError("paper_height_mm must be positive")
    rows = find_tick_positions(edges, Orientation.VERTICAL)
    if len(rows) < 2:
        raise EdgesNotFound(f"found {len(rows)} horizontal edge runs, need at least 2")
    top, bottom = min(rows), max(rows)
    px_per_mm = (bottom - top) / paper_height_mm
    return Calibration(
        pixels_per_mm=px_per_mm,
        method=CalibrationMethod.PAPER_SIZE,
        confidence_note=f"page spans rows {top:.1f} to {bottom:.1f}",
    )
