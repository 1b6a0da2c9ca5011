"""Synthetic ground-truth images: the oracle behind every quantitative test.

Elements are composited additively in declaration order, then clamped to
[0, 1]; Gaussian noise is added last. All randomness (ink blob shapes,
noise) comes from the spec seed, so a spec generates bit-identical output
every time.

Lines are rendered with a half-pixel antialiased edge so their scale-space
behaviour resembles soft mould imprints rather than ideal indicators.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidSpec
from .image import GrayImage
from .transforms import Orientation


@dataclass(frozen=True)
class Disk:
    cx: float
    cy: float
    r: float
    contrast: float

    @property
    def scale(self) -> float:
        """Extinction scale of an isolated disk: contrast * r / 2."""
        return abs(self.contrast) * self.r / 2.0


@dataclass(frozen=True)
class Rect:
    x0: int
    y0: int
    w: int
    h: int
    contrast: float


@dataclass(frozen=True)
class LineSet:
    """Parallel straight lines.

    Axis-aligned sets give `orientation` plus absolute `positions_px`
    (columns for vertical, rows for horizontal). Tilted sets give
    `angle_deg` (rotation mapping the lines to vertical, so 90 is
    horizontal) plus signed centre `offsets_px` along the line normal.

    dash_on_px/dash_off_px render eroded, interrupted imprints; each line
    gets a random dash phase drawn from the generator seed.
    """

    contrast: float
    line_width_px: float = 2.0
    orientation: Orientation | None = None
    positions_px: tuple[float, ...] | None = None
    angle_deg: float | None = None
    offsets_px: tuple[float, ...] | None = None
    dash_on_px: float | None = None
    dash_off_px: float | None = None

    def __post_init__(self):
        axis_aligned = self.orientation is not None
        if axis_aligned == (self.angle_deg is not None):
            raise InvalidSpec("LineSet needs exactly one of orientation or angle_deg")
        if axis_aligned and self.positions_px is None:
            raise InvalidSpec("axis-aligned LineSet needs positions_px")
        if not axis_aligned and self.offsets_px is None:
            raise InvalidSpec("angled LineSet needs offsets_px")
        if (self.dash_on_px is None) != (self.dash_off_px is None):
            raise InvalidSpec("dash_on_px and dash_off_px go together")


@dataclass(frozen=True)
class InkBlob:
    """Irregular dark blotch; the polygon shape is drawn from the spec seed."""

    cx: float
    cy: float
    r: float
    contrast: float
    n_vertices: int = 12


@dataclass(frozen=True)
class Fold:
    """A single straight crease; length_px None runs it across the canvas."""

    angle_deg: float
    width_px: float
    contrast: float
    offset_px: float = 0.0
    length_px: float | None = None


@dataclass(frozen=True)
class RulerTicks:
    """Evenly spaced tick lines; axis is the direction positions run along."""

    axis: Orientation
    spacing_px: float
    start_px: float
    count: int
    contrast: float = -0.5
    tick_width_px: float = 1.0


Element = Disk | Rect | LineSet | InkBlob | Fold | RulerTicks


@dataclass(frozen=True)
class PhantomSpec:
    width: int
    height: int
    background: float = 0.5
    scale: float | None = None
    elements: tuple[Element, ...] = ()
    noise_sigma: float = 0.0
    seed: int = 0


@dataclass(frozen=True)
class GroundTruth:
    """Whatever the generated elements pin down, recorded by construction."""

    line_positions_px: tuple[float, ...] | None = None
    line_offsets_px: tuple[float, ...] | None = None
    line_angle_deg: float | None = None
    density_per_cm: int | None = None
    disk_scales: tuple[float, ...] | None = None
    tick_columns: tuple[float, ...] | None = None
    page_edge_rows: tuple[int, int] | None = None

    def to_dict(self) -> dict:
        out: dict = {}
        for key, value in self.__dict__.items():
            if value is not None:
                out[key] = list(value) if isinstance(value, tuple) else value
        return out


def _grid(spec: PhantomSpec) -> tuple[np.ndarray, np.ndarray]:
    yy, xx = np.meshgrid(
        np.arange(spec.height, dtype=np.float64),
        np.arange(spec.width, dtype=np.float64),
        indexing="ij",
    )
    return xx, yy


def _line_coverage(dist: np.ndarray, width: float) -> np.ndarray:
    return np.clip(width / 2.0 + 0.5 - np.abs(dist), 0.0, 1.0)


def _render_lines(
    canvas: np.ndarray,
    spec: PhantomSpec,
    angle_deg: float,
    offsets: tuple[float, ...],
    width: float,
    contrast: float,
    rng: np.random.Generator | None = None,
    dash: tuple[float, float] | None = None,
) -> None:
    xx, yy = _grid(spec)
    cx, cy = (spec.width - 1) / 2.0, (spec.height - 1) / 2.0
    theta = np.deg2rad(angle_deg)
    proj = (xx - cx) * np.cos(theta) + (yy - cy) * np.sin(theta)
    along = -(xx - cx) * np.sin(theta) + (yy - cy) * np.cos(theta)
    for p in offsets:
        coverage = _line_coverage(proj - p, width)
        if dash is not None:
            on, off = dash
            period = on + off
            phase = float(rng.uniform(0.0, period)) if rng is not None else 0.0
            m = np.mod(along + phase, period)
            circ = np.minimum(np.abs(m - on / 2.0), period - np.abs(m - on / 2.0))
            coverage = coverage * np.clip(on / 2.0 + 0.5 - circ, 0.0, 1.0)
        canvas += contrast * coverage


def _polygon_mask(shape: tuple[int, int], xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    h, w = shape
    X, Y = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    inside = np.zeros(shape, dtype=bool)
    n = len(xs)
    for i in range(n):
        x1, y1 = xs[i], ys[i]
        x2, y2 = xs[(i + 1) % n], ys[(i + 1) % n]
        if y1 == y2:
            continue
        crosses = ((y1 > Y) != (y2 > Y)) & (X < (x2 - x1) * (Y - y1) / (y2 - y1) + x1)
        inside ^= crosses
    return inside


def _check_inside(spec: PhantomSpec, x_lo: float, x_hi: float, y_lo: float, y_hi: float, what: str) -> None:
    if x_lo < 0 or y_lo < 0 or x_hi > spec.width or y_hi > spec.height:
        raise InvalidSpec(f"{what} exceeds the {spec.width}x{spec.height} canvas")


def _render_element(canvas: np.ndarray, spec: PhantomSpec, el: Element, rng: np.random.Generator) -> None:
    if isinstance(el, Disk):
        _check_inside(spec, el.cx - el.r, el.cx + el.r + 1, el.cy - el.r, el.cy + el.r + 1, "disk")
        xx, yy = _grid(spec)
        dist = np.hypot(xx - el.cx, yy - el.cy)
        canvas += el.contrast * np.clip(el.r + 0.5 - dist, 0.0, 1.0)
    elif isinstance(el, Rect):
        _check_inside(spec, el.x0, el.x0 + el.w, el.y0, el.y0 + el.h, "rect")
        canvas[el.y0 : el.y0 + el.h, el.x0 : el.x0 + el.w] += el.contrast
    elif isinstance(el, LineSet):
        dash = (el.dash_on_px, el.dash_off_px) if el.dash_on_px is not None else None
        if el.orientation is Orientation.VERTICAL:
            for p in el.positions_px:
                _check_inside(spec, p - el.line_width_px, p + el.line_width_px, 0, 0, "line")
            cx = (spec.width - 1) / 2.0
            offsets = tuple(p - cx for p in el.positions_px)
            _render_lines(canvas, spec, 0.0, offsets, el.line_width_px, el.contrast, rng, dash)
        elif el.orientation is Orientation.HORIZONTAL:
            for p in el.positions_px:
                _check_inside(spec, 0, 0, p - el.line_width_px, p + el.line_width_px, "line")
            cy = (spec.height - 1) / 2.0
            offsets = tuple(p - cy for p in el.positions_px)
            _render_lines(canvas, spec, 90.0, offsets, el.line_width_px, el.contrast, rng, dash)
        else:
            _render_lines(canvas, spec, el.angle_deg, el.offsets_px, el.line_width_px, el.contrast, rng, dash)
    elif isinstance(el, InkBlob):
        _check_inside(spec, el.cx - 1.5 * el.r, el.cx + 1.5 * el.r, el.cy - 1.5 * el.r, el.cy + 1.5 * el.r, "ink blob")
        angles = np.sort(rng.uniform(0.0, 2 * np.pi, el.n_vertices))
        radii = el.r * rng.uniform(0.55, 1.45, el.n_vertices)
        xs = el.cx + radii * np.cos(angles)
        ys = el.cy + radii * np.sin(angles)
        canvas += el.contrast * _polygon_mask(canvas.shape, xs, ys)
    elif isinstance(el, Fold):
        if el.length_px is None:
            _render_lines(canvas, spec, el.angle_deg, (el.offset_px,), el.width_px, el.contrast)
        else:
            xx, yy = _grid(spec)
            cx, cy = (spec.width - 1) / 2.0, (spec.height - 1) / 2.0
            theta = np.deg2rad(el.angle_deg)
            across = (xx - cx) * np.cos(theta) + (yy - cy) * np.sin(theta) - el.offset_px
            along = -(xx - cx) * np.sin(theta) + (yy - cy) * np.cos(theta)
            coverage = _line_coverage(across, el.width_px)
            coverage *= np.clip(el.length_px / 2.0 + 0.5 - np.abs(along), 0.0, 1.0)
            canvas += el.contrast * coverage
    elif isinstance(el, RulerTicks):
        positions = tuple(el.start_px + k * el.spacing_px for k in range(el.count))
        lim = spec.width if el.axis is Orientation.HORIZONTAL else spec.height
        if positions[0] < 1 or positions[-1] > lim - 2:
            raise InvalidSpec("ruler ticks exceed the canvas")
        # ticks perpendicular to the axis they are spaced along
        line_orient = Orientation.VERTICAL if el.axis is Orientation.HORIZONTAL else Orientation.HORIZONTAL
        _render_element(
            canvas,
            spec,
            LineSet(
                contrast=el.contrast,
                line_width_px=el.tick_width_px,
                orientation=line_orient,
                positions_px=positions,
            ),
            rng,
        )
    else:
        raise InvalidSpec(f"unknown element {el!r}")


def _collect_truth(spec: PhantomSpec) -> GroundTruth:
    line_positions = None
    line_offsets = None
    line_angle = None
    density = None
    disk_scales: list[float] = []
    tick_columns = None
    page_rows = None
    for el in spec.elements:
        if isinstance(el, Disk):
            disk_scales.append(el.scale)
        elif isinstance(el, LineSet):
            if el.orientation is not None:
                line_positions = tuple(float(p) for p in el.positions_px)
                line_angle = 0.0 if el.orientation is Orientation.VERTICAL else 90.0
            else:
                line_offsets = tuple(float(p) for p in el.offsets_px)
                line_angle = float(el.angle_deg)
            if spec.scale is not None and line_offsets is not None and len(line_offsets) > 1:
                gaps = np.diff(sorted(line_offsets))
                period = float(np.median(gaps))
                density = int(round(10.0 * spec.scale / period))
        elif isinstance(el, RulerTicks):
            tick_columns = tuple(el.start_px + k * el.spacing_px for k in range(el.count))
        elif isinstance(el, Rect) and el.h > spec.height // 2:
            page_rows = (el.y0, el.y0 + el.h)
    return GroundTruth(
        line_positions_px=line_positions,
        line_offsets_px=line_offsets,
        line_angle_deg=line_angle,
        density_per_cm=density,
        disk_scales=tuple(disk_scales) or None,
        tick_columns=tick_columns,
        page_edge_rows=page_rows,
    )


def generate(spec: PhantomSpec) -> tuple[GrayImage, GroundTruth]:
    """Render a phantom; deterministic for a fixed seed."""
    if spec.width < 2 or spec.height < 2:
        raise InvalidSpec("canvas must be at least 2x2")
    rng = np.random.default_rng(spec.seed)
    canvas = np.full((spec.height, spec.width), spec.background, dtype=np.float64)
    for el in spec.elements:
        _render_element(canvas, spec, el, rng)
    np.clip(canvas, 0.0, 1.0, out=canvas)
    if spec.noise_sigma > 0:
        canvas += rng.normal(0.0, spec.noise_sigma, canvas.shape)
        np.clip(canvas, 0.0, 1.0, out=canvas)
    return GrayImage(canvas, spec.scale), _collect_truth(spec)


# --- JSON round trip --------------------------------------------------------

_ELEMENT_TYPES = {cls.__name__: cls for cls in (Disk, Rect, LineSet, InkBlob, Fold, RulerTicks)}


def spec_to_dict(spec: PhantomSpec) -> dict:
    elements = []
    for el in spec.elements:
        entry = {"type": type(el).__name__}
        for key, value in el.__dict__.items():
            if isinstance(value, Orientation):
                value = value.value
            elif isinstance(value, tuple):
                value = list(value)
            entry[key] = value
        elements.append(entry)
    return {
        "width": spec.width,
        "height": spec.height,
        "background": spec.background,
        "scale": spec.scale,
        "elements": elements,
        "noise_sigma": spec.noise_sigma,
        "seed": spec.seed,
    }


def spec_from_dict(data: dict) -> PhantomSpec:
    elements = []
    for entry in data.get("elements", []):
        entry = dict(entry)
        name = entry.pop("type")
        if name not in _ELEMENT_TYPES:
            raise InvalidSpec(f"unknown element type {name!r}")
        if "orientation" in entry and entry["orientation"] is not None:
            entry["orientation"] = Orientation(entry["orientation"])
        if "axis" in entry and entry["axis"] is not None:
            entry["axis"] = Orientation(entry["axis"])
        for key, value in entry.items():
            if isinstance(value, list):
                entry[key] = tuple(value)
        elements.append(_ELEMENT_TYPES[name](**entry))
    return PhantomSpec(
        width=int(data["width"]),
        height=int(data["height"]),
        background=float(data.get("background", 0.5)),
        scale=data.get("scale"),
        elements=tuple(elements),
        noise_sigma=float(data.get("noise_sigma", 0.0)),
        seed=int(data.get("seed", 0)),
    )


def load_spec(path: str | Path) -> PhantomSpec:
    return spec_from_dict(json.loads(Path(path).read_text()))


def save_spec(spec: PhantomSpec, path: str | Path) -> None:
    Path(path).write_text(json.dumps(spec_to_dict(spec), indent=2, sort_keys=True) + "\n")


# --- presets used by the CLI and the acceptance suite -----------------------


def chain_basic() -> PhantomSpec:
    """Vertical chain lines with dark ink blotches and mild noise."""
    return PhantomSpec(
        width=320,
        height=160,
        background=0.55,
        scale=10.0,
        elements=(
            LineSet(contrast=0.02, line_width_px=6.0, orientation=Orientation.VERTICAL,
                    positions_px=(50.0, 150.0, 250.0)),
            InkBlob(cx=90.0, cy=50.0, r=14.0, contrast=-0.5),
            InkBlob(cx=210.0, cy=110.0, r=16.0, contrast=-0.5),
            InkBlob(cx=150.0, cy=40.0, r=12.0, contrast=-0.5),
        ),
        noise_sigma=0.005,
        seed=7,
    )


def chain_wide_gap() -> PhantomSpec:
    """Two chain lines 6 cm apart, to exercise the plausibility warning."""
    return PhantomSpec(
        width=680,
        height=120,
        background=0.55,
        scale=10.0,
        elements=(
            LineSet(contrast=0.02, line_width_px=6.0, orientation=Orientation.VERTICAL,
                    positions_px=(40.0, 640.0)),
        ),
        noise_sigma=0.003,
        seed=3,
    )


def chain_blank() -> PhantomSpec:
    """Noise-only canvas; detection at an explicit threshold must come up empty."""
    return PhantomSpec(width=320, height=160, background=0.55, scale=10.0,
                       elements=(), noise_sigma=0.005, seed=5)


_LAID_OFFSETS = tuple(np.arange(-52.5, 53.0, 15.0))


def laid_basic() -> PhantomSpec:
    """8 lines/cm grating tilted 2 degrees past horizontal at 12 px/mm."""
    return PhantomSpec(
        width=191,
        height=191,
        background=0.55,
        scale=12.0,
        elements=(
            LineSet(contrast=0.02, line_width_px=4.0, angle_deg=92.0, offsets_px=_LAID_OFFSETS),
        ),
        noise_sigma=0.002,
        seed=11,
    )


def laid_fold() -> PhantomSpec:
    """The basic grating crossed by a dark oblique fold (22 degrees off)."""
    base = laid_basic()
    return PhantomSpec(
        width=base.width,
        height=base.height,
        background=base.background,
        scale=base.scale,
        elements=base.elements + (Fold(angle_deg=70.0, width_px=16.0, contrast=-0.3),),
        noise_sigma=base.noise_sigma,
        seed=base.seed,
    )


def laid_degraded() -> PhantomSpec:
    """The basic grating under heavy degradation: pixel noise at the line
    contrast plus faint rectangular stains.

    The stains outlive the analysis band, but the isotropic flow rounds
    their corners and that rounding leaks into the band, hiding a line;
    under the anisotropic flow they are stable rectangles that cancel
    exactly, so the anisotropic run still finds every line.
    """
    base = laid_basic()
    stains = (
        Rect(x0=25, y0=35, w=56, h=50, contrast=-0.06),
        Rect(x0=100, y0=95, w=60, h=54, contrast=0.06),
        Rect(x0=100, y0=25, w=54, h=48, contrast=-0.055),
    )
    return PhantomSpec(
        width=base.width,
        height=base.height,
        background=base.background,
        scale=base.scale,
        elements=base.elements + stains,
        noise_sigma=0.02,
        seed=1,
    )


def disk_single() -> PhantomSpec:
    """One centred disk, radius 10, contrast 0.5: extinction scale 2.5."""
    return PhantomSpec(
        width=64, height=64, background=0.0,
        elements=(Disk(cx=31.5, cy=31.5, r=10.0, contrast=0.5),),
    )


def disks_four() -> PhantomSpec:
    """Four disks with well separated extinction scales 0.5, 1.4, 2.75, 4.55."""
    return PhantomSpec(
        width=160, height=160, background=0.0,
        elements=(
            Disk(cx=40.0, cy=40.0, r=5.0, contrast=0.2),
            Disk(cx=120.0, cy=40.0, r=8.0, contrast=0.35),
            Disk(cx=40.0, cy=120.0, r=11.0, contrast=0.5),
            Disk(cx=120.0, cy=120.0, r=14.0, contrast=0.65),
        ),
    )


def rectangle() -> PhantomSpec:
    """A single centred 20x12 rectangle, contrast 0.5."""
    return PhantomSpec(
        width=96, height=96, background=0.0,
        elements=(Rect(x0=38, y0=42, w=20, h=12, contrast=0.5),),
    )


def ruler() -> PhantomSpec:
    """Dark millimetre ticks every 20 px: 20 px/mm ground truth."""
    return PhantomSpec(
        width=240, height=120, background=0.85,
        elements=(RulerTicks(axis=Orientation.HORIZONTAL, spacing_px=20.0, start_px=20.0, count=11),),
    )


#: Physical height (mm) of the page rendered by the page() preset.
PAGE_HEIGHT_MM = 30.0


def page() -> PhantomSpec:
    """A bright page on a dark platen; page height 200 px = 30 mm."""
    return PhantomSpec(
        width=400, height=300, background=0.08,
        elements=(Rect(x0=40, y0=50, w=320, h=200, contrast=0.67),),
    )


PRESETS: dict[str, "type(chain_basic)"] = {
    "chain-basic": chain_basic,
    "chain-wide-gap": chain_wide_gap,
    "chain-blank": chain_blank,
    "laid-basic": laid_basic,
    "laid-fold": laid_fold,
    "laid-degraded": laid_degraded,
    "disk-single": disk_single,
    "disks-four": disks_four,
    "rectangle": rectangle,
    "ruler": ruler,
    "page": page,
}
