"""End-to-end chain and laid line extraction.

Chain lines: scale band -> frequency rectangle filter -> axis projection ->
peak detection -> gap distances in millimetres.

Laid lines: scale band -> Radon transform -> dominant angle cross-section ->
peak detection -> line count inside a 1 cm window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import NoLinesFound, PatchTooSmall, PositionOutOfBounds
from .image import Calibration, GrayImage, RgbImage
from .spectral import ScaleSpaceStack, TvFlowConfig, TvVariant, band_from_stack, tv_flow
from .transforms import (
    Orientation,
    RectFilterSpec,
    Sinogram,
    dominant_angle,
    project,
    radon,
    rect_fourier_filter,
)

#: Typical chain line spacing in millimetres; outside it a warning is set.
CHAIN_DISTANCE_RANGE_MM = (15.0, 50.0)
#: Typical laid line density per centimetre; outside it a warning is set.
LAID_DENSITY_RANGE = (5, 15)


@dataclass(frozen=True)
class PeakConfig:
    """Peak detection knobs for the projected 1D signal.

    threshold is an absolute level on the smoothed signal; None means half
    of its maximum (the resolved value is echoed in reports). Peaks closer
    than min_separation are thinned, keeping the larger.
    """

    smooth_sigma: float = 2.0
    threshold: float | None = None
    min_separation: int = 5

    def __post_init__(self):
        if self.smooth_sigma < 0:
            raise ValueError("smooth_sigma must be >= 0")
        if self.threshold is not None and not math.isfinite(self.threshold):
            raise ValueError("threshold must be finite")
        if self.min_separation < 1:
            raise ValueError("min_separation must be >= 1")


DEFAULT_CHAIN_PEAKS = PeakConfig(smooth_sigma=2.0, threshold=None, min_separation=5)
DEFAULT_LAID_PEAKS = PeakConfig(smooth_sigma=2.0, threshold=None, min_separation=2)


def smooth_1d(signal: np.ndarray, sigma: float) -> np.ndarray:
    """Gaussian smoothing, kernel truncated at 4 sigma and renormalized,
    replicate boundary. sigma = 0 is the identity."""
    signal = np.asarray(signal, dtype=np.float64)
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0:
        return signal.copy()
    radius = max(1, int(round(4.0 * sigma)))
    k = np.exp(-0.5 * (np.arange(-radius, radius + 1) / sigma) ** 2)
    k /= k.sum()
    padded = np.pad(signal, radius, mode="edge")
    return np.convolve(padded, k, mode="valid")


def _resolve_threshold(smoothed: np.ndarray, cfg: PeakConfig) -> float:
    if cfg.threshold is not None:
        return float(cfg.threshold)
    return 0.5 * float(smoothed.max())


def detect_peaks(signal: np.ndarray, cfg: PeakConfig) -> np.ndarray:
    """Indices of local maxima of the smoothed signal at or above threshold.

    A peak rises strictly from the left and at least matches its right
    neighbour, so a flat plateau yields its leftmost sample. Among peaks
    closer than min_separation the larger survives (leftmost on ties).
    Returns a sorted integer array; empty is a valid result.
    """
    signal = np.asarray(signal, dtype=np.float64)
    if signal.size < 3:
        raise ValueError("signal must have at least 3 samples")
    s = smooth_1d(signal, cfg.smooth_sigma)
    thr = _resolve_threshold(s, cfg)
    mask = (s[1:-1] > s[:-2]) & (s[1:-1] >= s[2:]) & (s[1:-1] >= thr)
    candidates = np.nonzero(mask)[0] + 1
    if candidates.size <= 1 or cfg.min_separation == 1:
        return candidates
    order = np.lexsort((candidates, -s[candidates]))
    kept: list[int] = []
    for idx in order:
        c = int(candidates[idx])
        if all(abs(c - k) >= cfg.min_separation for k in kept):
            kept.append(c)
    return np.array(sorted(kept), dtype=np.int64)


# --- reports ----------------------------------------------------------------


@dataclass(frozen=True)
class ChainLineReport:
    orientation: Orientation
    positions_px: tuple[float, ...]
    omitted_indices: tuple[int, ...]
    pixels_per_mm: float | None
    distances_mm: tuple[float, ...] | None
    mean_distance_mm: float | None
    plausibility_warning: bool
    params: dict
    provenance: dict

    @property
    def kept_positions(self) -> tuple[float, ...]:
        return tuple(p for i, p in enumerate(self.positions_px) if i not in self.omitted_indices)


@dataclass(frozen=True)
class LaidLineReport:
    angle_deg: float
    positions_px: tuple[float, ...]
    density_per_cm: int | None
    window_anchor_px: float
    window_length_px: float | None
    pixels_per_mm: float | None
    spacings_mm: tuple[float, ...] | None
    low_confidence: bool
    plausibility_warning: bool
    params: dict
    provenance: dict


def build_chain_report(
    positions: "list[float] | tuple[float, ...]",
    orientation: Orientation,
    pixels_per_mm: float | None,
    params: dict,
    provenance: dict,
    omitted: tuple[int, ...] = (),
) -> ChainLineReport:
    positions = tuple(float(p) for p in positions)
    omitted = tuple(sorted(set(int(i) for i in omitted)))
    for i in omitted:
        if i < 0 or i >= len(positions):
            raise PositionOutOfBounds(f"omitted index {i} outside 0..{len(positions) - 1}")
    kept = [p for i, p in enumerate(positions) if i not in omitted]
    distances = mean = None
    warning = False
    if pixels_per_mm is not None and len(kept) >= 2:
        distances = tuple(
            (b - a) / pixels_per_mm for a, b in zip(kept, kept[1:])
        )
        mean = float(np.mean(distances))
        lo, hi = CHAIN_DISTANCE_RANGE_MM
        warning = any(d < lo or d > hi for d in distances)
    elif pixels_per_mm is not None:
        distances = ()
    return ChainLineReport(
        orientation=orientation,
        positions_px=positions,
        omitted_indices=omitted,
        pixels_per_mm=pixels_per_mm,
        distances_mm=distances,
        mean_distance_mm=mean,
        plausibility_warning=warning,
        params=params,
        provenance=provenance,
    )


def with_omissions(report: ChainLineReport, omitted) -> ChainLineReport:
    """Re-derive distances with the given line indices excluded.

    A report edit, not a re-detection: the full position list stays."""
    return build_chain_report(
        report.positions_px,
        report.orientation,
        report.pixels_per_mm,
        report.params,
        report.provenance,
        omitted=tuple(omitted),
    )


def chain_report_to_dict(report: ChainLineReport) -> dict:
    return {
        "schema": 1,
        "kind": "chain",
        "orientation": report.orientation.value,
        "position_basis": "projection",
        "positions_px": list(report.positions_px),
        "omitted_indices": list(report.omitted_indices),
        "pixels_per_mm": report.pixels_per_mm,
        "distances_mm": None if report.distances_mm is None else list(report.distances_mm),
        "mean_distance_mm": report.mean_distance_mm,
        "plausible_range_mm": list(CHAIN_DISTANCE_RANGE_MM),
        "plausibility_warning": report.plausibility_warning,
        "params": report.params,
        "provenance": report.provenance,
    }


def laid_report_to_dict(report: LaidLineReport) -> dict:
    return {
        "schema": 1,
        "kind": "laid",
        "angle_deg": report.angle_deg,
        "positions_px": list(report.positions_px),
        "density_per_cm": report.density_per_cm,
        "window_anchor_px": report.window_anchor_px,
        "window_length_px": report.window_length_px,
        "pixels_per_mm": report.pixels_per_mm,
        "spacings_mm": None if report.spacings_mm is None else list(report.spacings_mm),
        "spacings_approximate": True,
        "low_confidence": report.low_confidence,
        "plausible_range_per_cm": list(LAID_DENSITY_RANGE),
        "plausibility_warning": report.plausibility_warning,
        "params": report.params,
        "provenance": report.provenance,
    }


def _flow_params(cfg: TvFlowConfig) -> dict:
    return {
        "dt": cfg.dt,
        "t_max": cfg.t_max,
        "inner_tol": cfg.inner_tol,
        "inner_max_iter": cfg.inner_max_iter,
    }


def _peak_params(cfg: PeakConfig, resolved_threshold: float) -> dict:
    return {
        "smooth_sigma": cfg.smooth_sigma,
        "threshold": resolved_threshold,
        "threshold_mode": "absolute" if cfg.threshold is not None else "auto-half-max",
        "min_separation": cfg.min_separation,
    }


def _calibration_params(cal: Calibration | None) -> dict | None:
    if cal is None:
        return None
    return {"pixels_per_mm": cal.pixels_per_mm, "method": cal.method.value}


# --- pipelines --------------------------------------------------------------


@dataclass(frozen=True)
class ChainDetection:
    """Report plus the intermediate signals, for plotting and inspection."""

    report: ChainLineReport
    signal: np.ndarray
    smoothed: np.ndarray
    threshold: float
    band_image: np.ndarray
    stack: ScaleSpaceStack


@dataclass(frozen=True)
class LaidDetection:
    report: LaidLineReport
    signal: np.ndarray
    smoothed: np.ndarray
    threshold: float
    band_image: np.ndarray
    sinogram: Sinogram
    stack: ScaleSpaceStack


def detect_chain_lines(
    patch: GrayImage,
    band: tuple[float, float] = (0.026, 1.0),
    filter_spec: RectFilterSpec | None = None,
    peaks: PeakConfig | None = None,
    calibration: Calibration | None = None,
    *,
    flow: TvFlowConfig | None = None,
    stack: ScaleSpaceStack | None = None,
    provenance: dict | None = None,
) -> ChainDetection:
    """Locate chain lines in a patch and measure their gaps.

    The patch must contain every chain line at least partially. Without a
    calibration the positions are still returned, millimetre fields stay
    None. Raises NoLinesFound when no peak clears the threshold.
    """
    filter_spec = filter_spec or RectFilterSpec()
    peaks = peaks or DEFAULT_CHAIN_PEAKS
    flow = flow or TvFlowConfig()
    if stack is None:
        stack = tv_flow(patch, flow)
    band_img = band_from_stack(stack, band[0], band[1])
    filtered = rect_fourier_filter(band_img, filter_spec)
    signal = project(filtered, filter_spec.orientation)
    smoothed = smooth_1d(signal, peaks.smooth_sigma)
    threshold = _resolve_threshold(smoothed, peaks)
    idx = detect_peaks(signal, replace(peaks, threshold=threshold))
    ppmm = calibration.pixels_per_mm if calibration else None
    params = {
        "band": [band[0], band[1]],
        "variant": stack.variant.value,
        "flow": _flow_params(flow),
        "filter": {
            "width_px": filter_spec.width_px,
            "height_fraction": filter_spec.height_fraction,
        },
        "peaks": _peak_params(peaks, threshold),
        "calibration": _calibration_params(calibration),
    }
    report = build_chain_report(
        [float(i) for i in idx],
        filter_spec.orientation,
        ppmm,
        params,
        provenance or {},
    )
    detection = ChainDetection(
        report=report, signal=signal, smoothed=smoothed, threshold=threshold,
        band_image=band_img, stack=stack,
    )
    if idx.size == 0:
        err = NoLinesFound("no projection peaks at or above the threshold")
        err.detection = detection
        raise err
    return detection


def count_in_window(positions, anchor: float, length: float) -> int:
    """Peaks inside the half-open window [anchor - length/2, anchor + length/2)."""
    lo = anchor - length / 2.0
    hi = anchor + length / 2.0
    return int(sum(1 for p in positions if lo <= p < hi))


def detect_laid_lines(
    patch: GrayImage,
    band: tuple[float, float] = (0.026, 1.0),
    variant: TvVariant = TvVariant.ISOTROPIC,
    peaks: PeakConfig | None = None,
    calibration: Calibration | None = None,
    *,
    flow: TvFlowConfig | None = None,
    stack: ScaleSpaceStack | None = None,
    angle_step_deg: float = 0.5,
    window_anchor_px: float = 0.0,
    provenance: dict | None = None,
) -> LaidDetection:
    """Measure laid line density: lines per centimetre at the dominant angle.

    The patch must span at least 1 cm at the given calibration (raises
    PatchTooSmall otherwise). The isotropic variant is the default; the
    anisotropic one recovers lines from noisy or degraded patches where the
    isotropic decomposition fails.
    """
    peaks = peaks or DEFAULT_LAID_PEAKS
    flow = (flow or TvFlowConfig()).with_variant(variant)
    ppmm = calibration.pixels_per_mm if calibration else None
    window_length = None
    if ppmm is not None:
        window_length = 10.0 * ppmm
        if min(patch.width, patch.height) < window_length:
            raise PatchTooSmall(
                f"patch {patch.width}x{patch.height} px spans less than 1 cm "
                f"({window_length:.0f} px) at {ppmm} px/mm"
            )
    if stack is None:
        stack = tv_flow(patch, flow)
    band_img = band_from_stack(stack, band[0], band[1])
    sino = radon(band_img, np.arange(0.0, 180.0, angle_step_deg))
    dom = dominant_angle(sino)
    signal = sino.column(dom.angle_deg)
    smoothed = smooth_1d(signal, peaks.smooth_sigma)
    threshold = _resolve_threshold(smoothed, peaks)
    idx = detect_peaks(signal, replace(peaks, threshold=threshold))
    positions = tuple(float(sino.offsets[i]) for i in idx)
    density = None
    spacings = None
    if ppmm is not None:
        density = count_in_window(positions, window_anchor_px, window_length)
        if len(positions) >= 2:
            spacings = tuple((b - a) / ppmm for a, b in zip(positions, positions[1:]))
    lo, hi = LAID_DENSITY_RANGE
    warning = density is not None and not (lo <= density <= hi)
    params = {
        "band": [band[0], band[1]],
        "variant": variant.value,
        "flow": _flow_params(flow),
        "angle_step_deg": angle_step_deg,
        "window": {"anchor_px": window_anchor_px, "length_px": window_length},
        "peaks": _peak_params(peaks, threshold),
        "calibration": _calibration_params(calibration),
    }
    report = LaidLineReport(
        angle_deg=dom.angle_deg,
        positions_px=positions,
        density_per_cm=density,
        window_anchor_px=window_anchor_px,
        window_length_px=window_length,
        pixels_per_mm=ppmm,
        spacings_mm=spacings,
        low_confidence=dom.low_confidence,
        plausibility_warning=warning,
        params=params,
        provenance=provenance or {},
    )
    return LaidDetection(
        report=report, signal=signal, smoothed=smoothed, threshold=threshold,
        band_image=band_img, sinogram=sino, stack=stack,
    )


# --- overlay rendering ------------------------------------------------------

_LINE_RGB = (220, 38, 38)
_OMITTED_RGB = (245, 158, 11)
_WINDOW_RGB = (37, 99, 235)
_LEGEND_H = 22


def _to_pil(img: GrayImage | RgbImage):
    from PIL import Image

    if isinstance(img, GrayImage):
        arr = np.round(img.data * 255.0).astype(np.uint8)
        return Image.fromarray(arr, mode="L").convert("RGB")
    return Image.fromarray(np.round(img.data * 255.0).astype(np.uint8), mode="RGB")


def _dashed(draw, p0, p1, colour, dash=6, gap=4):
    x0, y0 = p0
    x1, y1 = p1
    length = math.hypot(x1 - x0, y1 - y0)
    if length == 0:
        return
    ux, uy = (x1 - x0) / length, (y1 - y0) / length
    pos = 0.0
    while pos < length:
        end = min(pos + dash, length)
        draw.line(
            [(x0 + ux * pos, y0 + uy * pos), (x0 + ux * end, y0 + uy * end)],
            fill=colour,
            width=1,
        )
        pos = end + gap


def render_overlay(img: GrayImage | RgbImage, report: ChainLineReport | LaidLineReport) -> RgbImage:
    """Draw detected lines on the image, with a legend strip appended.

    Detected lines run at full length in a saturated colour; omitted lines
    are dashed; laid reports get their 1 cm counting window marked along the
    line normal.
    """
    from PIL import Image, ImageDraw

    base = _to_pil(img)
    w, h = base.size
    canvas = Image.new("RGB", (w, h + _LEGEND_H), (16, 16, 16))
    canvas.paste(base, (0, 0))
    draw = ImageDraw.Draw(canvas)

    if isinstance(report, ChainLineReport):
        for i, p in enumerate(report.positions_px):
            if not (0 <= p < (w if report.orientation is Orientation.VERTICAL else h)):
                raise PositionOutOfBounds(f"line position {p} outside the image")
            if report.orientation is Orientation.VERTICAL:
                p0, p1 = (p, 0), (p, h - 1)
            else:
                p0, p1 = (0, p), (w - 1, p)
            if i in report.omitted_indices:
                _dashed(draw, p0, p1, _OMITTED_RGB)
            else:
                draw.line([p0, p1], fill=_LINE_RGB, width=1)
        if report.mean_distance_mm is not None:
            text = f"{len(report.kept_positions)} lines, mean gap {report.mean_distance_mm:.2f} mm"
        else:
            text = f"{len(report.positions_px)} lines (no calibration)"
        if report.plausibility_warning:
            text += "  [gap outside 15-50 mm]"
    else:
        cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
        theta = math.radians(report.angle_deg)
        nx, ny = math.cos(theta), math.sin(theta)
        dx, dy = -math.sin(theta), math.cos(theta)
        reach = math.hypot(w, h)
        for p in report.positions_px:
            if abs(p) > reach / 2.0:
                raise PositionOutOfBounds(f"offset {p} outside the image")
            mx, my = cx + p * nx, cy + p * ny
            draw.line(
                [(mx - dx * reach, my - dy * reach), (mx + dx * reach, my + dy * reach)],
                fill=_LINE_RGB,
                width=1,
            )
        if report.window_length_px is not None:
            half = report.window_length_px / 2.0
            a = report.window_anchor_px
            draw.line(
                [(cx + (a - half) * nx, cy + (a - half) * ny),
                 (cx + (a + half) * nx, cy + (a + half) * ny)],
                fill=_WINDOW_RGB,
                width=3,
            )
        if report.density_per_cm is not None:
            text = f"{report.density_per_cm} lines/cm at {report.angle_deg:.1f} deg"
            if report.plausibility_warning:
                text += "  [outside 5-15 /cm]"
        else:
            text = f"angle {report.angle_deg:.1f} deg (no calibration)"
        if report.low_confidence:
            text += "  [low confidence]"

    draw.text((4, h + 5), text, fill=(235, 235, 235))
    arr = np.asarray(canvas, dtype=np.float64) / 255.0
    return RgbImage(arr)
