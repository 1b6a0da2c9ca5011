"""Chain and laid line measurement for reflected light images of handmade paper.

The mould used to form a sheet of handmade paper leaves a grid of widely
spaced chain lines and densely spaced laid lines. This package isolates
those faint imprints from ink, noise and degradation with a total variation
scale-space decomposition, then measures line positions, gap distances and
densities with frequency and Radon domain analysis.
"""

from .image import (
    Calibration,
    CalibrationMethod,
    EdgeMask,
    GrayImage,
    RgbImage,
    crop_patch,
    invert,
    to_grayscale,
)
from .spectral import (
    ScaleSpaceStack,
    SpectralDecomposition,
    TvFlowConfig,
    TvVariant,
    band_pass,
    band_from_stack,
    decompose,
    decompose_stack,
    spectral_response,
    tv_flow,
    tv_functional,
)
from .transforms import (
    Orientation,
    RectFilterSpec,
    Sinogram,
    dominant_angle,
    johnson_filter,
    project,
    radon,
    rect_fourier_filter,
)
from .detect import (
    ChainLineReport,
    LaidLineReport,
    PeakConfig,
    detect_chain_lines,
    detect_laid_lines,
    detect_peaks,
    render_overlay,
    smooth_1d,
    with_omissions,
)
from .edges import calibrate_from_paper_size, calibrate_from_ruler, canny_edges

__version__ = "0.1.0"

__all__ = [
    "Calibration",
    "CalibrationMethod",
    "ChainLineReport",
    "EdgeMask",
    "GrayImage",
    "LaidLineReport",
    "Orientation",
    "PeakConfig",
    "RectFilterSpec",
    "RgbImage",
    "ScaleSpaceStack",
    "Sinogram",
    "SpectralDecomposition",
    "TvFlowConfig",
    "TvVariant",
    "band_from_stack",
    "band_pass",
    "calibrate_from_paper_size",
    "calibrate_from_ruler",
    "canny_edges",
    "crop_patch",
    "decompose",
    "decompose_stack",
    "detect_chain_lines",
    "detect_laid_lines",
    "detect_peaks",
    "dominant_angle",
    "invert",
    "johnson_filter",
    "project",
    "radon",
    "rect_fourier_filter",
    "render_overlay",
    "smooth_1d",
    "spectral_response",
    "to_grayscale",
    "tv_flow",
    "tv_functional",
    "with_omissions",
]
