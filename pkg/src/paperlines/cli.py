"""Command-line front door.

Subcommands: calibrate, decompose, chains, laids, phantom. Exit codes:
0 ok, 2 usage, 3 calibration failure, 4 solver failure under --strict (or a
failed --verify), 5 no lines found, 6 patch too small.

Detection runs write report.json plus a CSV of the measurements, the
overlay PNG, and a matplotlib plot of the projected signal.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import figures, imgio, phantom
from .detect import (
    DEFAULT_CHAIN_PEAKS,
    DEFAULT_LAID_PEAKS,
    PeakConfig,
    chain_report_to_dict,
    detect_chain_lines,
    detect_laid_lines,
    laid_report_to_dict,
    with_omissions,
)
from .edges import (
    DEFAULT_CANNY_HIGH,
    DEFAULT_CANNY_LOW,
    DEFAULT_CANNY_SIGMA,
    calibrate_from_paper_size,
    calibrate_from_ruler,
    canny_edges,
)
from .errors import (
    EdgesNotFound,
    InsufficientTicks,
    InvalidSpec,
    NoLinesFound,
    PaperlinesError,
    PatchTooSmall,
)
from .image import Calibration, CalibrationMethod, GrayImage, RgbImage, crop_patch, invert, to_grayscale
from .spectral import TvFlowConfig, TvVariant, decompose_stack, spectral_response, tv_flow
from .transforms import Orientation, RectFilterSpec

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CALIBRATION = 3
EXIT_SOLVER = 4
EXIT_NO_LINES = 5
EXIT_PATCH_TOO_SMALL = 6

_CONFIG_KEYS = {
    "input", "patch", "band", "variant", "flow", "filter", "peaks",
    "pixels_per_mm", "output_dir", "orientation", "angle_step_deg",
    "window_anchor_px", "invert",
}


class UsageError(Exception):
    pass


def dumps(obj) -> str:
    """Canonical JSON: sorted keys, two-space indent, trailing newline."""
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        cfg = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    unknown = set(cfg) - _CONFIG_KEYS
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    return cfg


def _pick(flag, cfg: dict, key: str, default):
    if flag is not None:
        return flag
    if key in cfg and cfg[key] is not None:
        return cfg[key]
    return default


def _pick_nested(flag, cfg: dict, group: str, key: str, default):
    return _pick(flag, cfg.get(group, {}) or {}, key, default)


def _parse_patch(text) -> tuple[int, int, int, int] | None:
    if text is None:
        return None
    if isinstance(text, (list, tuple)):
        parts = [int(v) for v in text]
    else:
        parts = [int(v) for v in str(text).split(",")]
    if len(parts) != 4:
        raise UsageError("patch must be x0,y0,w,h")
    return tuple(parts)  # type: ignore[return-value]


def _parse_band(text) -> tuple[float, float]:
    if isinstance(text, (list, tuple)):
        parts = [float(v) for v in text]
    else:
        parts = [float(v) for v in str(text).split(",")]
    if len(parts) != 2:
        raise UsageError("band must be t_lo,t_hi")
    return parts[0], parts[1]


def _load_gray(path: str, do_invert: bool) -> GrayImage:
    p = Path(path)
    if not p.exists():
        raise UsageError(f"no such file: {path}")
    img = imgio.read_image(p)
    if isinstance(img, RgbImage):
        img = to_grayscale(img)
    return invert(img) if do_invert else img


def _flow_from_args(args, cfg: dict, variant: TvVariant) -> TvFlowConfig:
    return TvFlowConfig(
        dt=float(_pick_nested(args.dt, cfg, "flow", "dt", 0.013)),
        t_max=float(_pick_nested(args.t_max, cfg, "flow", "t_max", 1.3)),
        variant=variant,
        inner_tol=float(_pick_nested(args.inner_tol, cfg, "flow", "inner_tol", 1e-5)),
        inner_max_iter=int(_pick_nested(args.inner_max_iter, cfg, "flow", "inner_max_iter", 500)),
    )


def _variant_from_args(args, cfg: dict) -> TvVariant:
    name = _pick(args.variant, cfg, "variant", "isotropic")
    try:
        return TvVariant(name)
    except ValueError as exc:
        raise UsageError(f"unknown variant {name!r}") from exc


def _calibration_from_args(args, cfg: dict) -> Calibration | None:
    if getattr(args, "calibration", None):
        try:
            data = json.loads(Path(args.calibration).read_text())
            return Calibration(
                pixels_per_mm=float(data["pixels_per_mm"]),
                method=CalibrationMethod(data.get("method", "explicit")),
                confidence_note=data.get("confidence_note", ""),
            )
        except (OSError, KeyError, ValueError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read calibration file: {exc}") from exc
    ppmm = _pick(getattr(args, "px_per_mm", None), cfg, "pixels_per_mm", None)
    if ppmm is None:
        return None
    return Calibration(pixels_per_mm=float(ppmm), method=CalibrationMethod.EXPLICIT)


def _peaks_from_args(args, cfg: dict, defaults: PeakConfig) -> PeakConfig:
    return PeakConfig(
        smooth_sigma=float(_pick_nested(args.smooth_sigma, cfg, "peaks", "smooth_sigma", defaults.smooth_sigma)),
        threshold=_pick_nested(args.threshold, cfg, "peaks", "threshold", defaults.threshold),
        min_separation=int(_pick_nested(args.min_separation, cfg, "peaks", "min_separation", defaults.min_separation)),
    )


def _prepare_patch(img: GrayImage, patch) -> GrayImage:
    if patch is None:
        return img
    x0, y0, w, h = patch
    return crop_patch(img, x0, y0, w, h)


def _provenance(image_path: str, patch) -> dict:
    return {
        "source": Path(image_path).name,
        "patch": list(patch) if patch else None,
    }


def _write_report_files(out_dir: Path, report_dict: dict, rows: list[dict], det, overlay, kind: str) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(dumps(report_dict))
    with (out_dir / "report.csv").open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()) if rows else ["index"])
        writer.writeheader()
        writer.writerows(rows)
    imgio.write_png(overlay, out_dir / "overlay.png")
    if kind == "chain":
        figures.save_chain_signal_plot(det, out_dir / "signal.png")
    else:
        figures.save_laid_signal_plot(det, out_dir / "signal.png")


# --- subcommands -------------------------------------------------------------


def cmd_calibrate(args) -> int:
    cfg = _load_config(args.config)
    img = _load_gray(_pick(args.image, cfg, "input", None) or _usage("missing --image"), False)
    edges = canny_edges(img, sigma=args.canny_sigma, low=args.canny_low, high=args.canny_high)
    try:
        if args.method == "ruler":
            axis = Orientation(args.axis)
            cal = calibrate_from_ruler(edges, args.tick_spacing_mm, axis)
        else:
            if args.paper_height_mm is None:
                raise UsageError("--paper-height-mm required for method paper-size")
            cal = calibrate_from_paper_size(edges, args.paper_height_mm)
    except (InsufficientTicks, EdgesNotFound) as exc:
        print(f"calibration failed: {exc}", file=sys.stderr)
        return EXIT_CALIBRATION
    sys.stdout.write(dumps({
        "pixels_per_mm": cal.pixels_per_mm,
        "method": cal.method.value,
        "confidence_note": cal.confidence_note,
    }))
    return EXIT_OK


def _usage(msg: str):
    raise UsageError(msg)


def cmd_decompose(args) -> int:
    cfg = _load_config(args.config)
    image_path = _pick(args.image, cfg, "input", None) or _usage("missing --image")
    img = _load_gray(image_path, bool(_pick(args.invert, cfg, "invert", False)))
    patch = _parse_patch(_pick(args.patch, cfg, "patch", None))
    img = _prepare_patch(img, patch)
    variant = _variant_from_args(args, cfg)
    flow = _flow_from_args(args, cfg, variant)
    if args.edges is not None:
        edges = [float(v) for v in str(args.edges).split(",")]
    else:
        t_lo = args.t_lo if args.t_lo is not None else 0.0
        t_hi = args.t_hi if args.t_hi is not None else flow.t_max
        edges = [t_hi] if t_lo <= 0 else [t_lo, t_hi]
    out_dir = Path(_pick(args.out, cfg, "output_dir", None) or _usage("missing --out"))
    out_dir.mkdir(parents=True, exist_ok=True)

    stack = tv_flow(img, flow)
    if args.strict and not stack.all_converged:
        print("inner solver did not converge within the iteration cap", file=sys.stderr)
        return EXIT_SOLVER
    dec = decompose_stack(stack, edges)
    resp = spectral_response(stack)

    band_files = []
    for k in range(dec.bands.shape[0]):
        name = f"band_{k:02d}.png"
        vmin, vmax = imgio.write_field_png(dec.bands[k], out_dir / name)
        lo = 0.0 if k == 0 else dec.band_edges[k - 1]
        band_files.append({
            "file": name, "t_lo": lo, "t_hi": dec.band_edges[k],
            "vmin": vmin, "vmax": vmax,
        })
    res_vmin, res_vmax = imgio.write_field_png(dec.residual, out_dir / "residual.png")
    figures.save_spectrum_plot(resp.times, resp.amplitude, dec.band_edges, out_dir / "spectrum.png")

    manifest = {
        "schema": 1,
        "band_edges": list(dec.band_edges),
        "flow": {"dt": flow.dt, "t_max": flow.t_max, "inner_tol": flow.inner_tol,
                 "inner_max_iter": flow.inner_max_iter},
        "variant": variant.value,
        "mean": dec.mean,
        "bands": band_files,
        "residual": {"file": "residual.png", "vmin": res_vmin, "vmax": res_vmax},
        "spectrum": {"times": [float(t) for t in resp.times],
                     "amplitude": [float(a) for a in resp.amplitude]},
        "diagnostics": [
            {"t": d.t, "iterations": d.iterations, "converged": d.converged}
            for d in stack.diagnostics
        ],
        "converged": stack.all_converged,
        "source": Path(image_path).name,
        "patch": list(patch) if patch else None,
    }
    if args.verify:
        err = float(np.max(np.abs(dec.reconstruct() - img.data)))
        manifest["reconstruction_error"] = err
        if err > 1e-6:
            (out_dir / "manifest.json").write_text(dumps(manifest))
            print(f"verification failed: reconstruction error {err:.3e} > 1e-6", file=sys.stderr)
            return EXIT_SOLVER
    (out_dir / "manifest.json").write_text(dumps(manifest))
    sys.stdout.write(dumps({"output_dir": str(out_dir), "bands": len(band_files),
                            "converged": stack.all_converged}))
    return EXIT_OK


def cmd_chains(args) -> int:
    cfg = _load_config(args.config)
    image_path = _pick(args.image, cfg, "input", None) or _usage("missing --image")
    img = _load_gray(image_path, bool(_pick(args.invert, cfg, "invert", False)))
    patch = _parse_patch(_pick(args.patch, cfg, "patch", None))
    patch_img = _prepare_patch(img, patch)
    band = _parse_band(_pick(args.band, cfg, "band", [0.026, 1.0]))
    variant = _variant_from_args(args, cfg)
    flow = _flow_from_args(args, cfg, variant)
    orientation = Orientation(_pick(args.orientation, cfg, "orientation", "vertical"))
    filter_spec = RectFilterSpec(
        width_px=int(_pick_nested(args.filter_width, cfg, "filter", "width_px", 1)),
        height_fraction=float(_pick_nested(args.filter_height_fraction, cfg, "filter", "height_fraction", 2.0 / 3.0)),
        orientation=orientation,
    )
    peaks = _peaks_from_args(args, cfg, DEFAULT_CHAIN_PEAKS)
    cal = _calibration_from_args(args, cfg)

    try:
        det = detect_chain_lines(
            patch_img, band, filter_spec, peaks, cal,
            flow=flow, provenance=_provenance_with_cal(image_path, patch, cal),
        )
    except NoLinesFound as exc:
        print(f"no chain lines: {exc}", file=sys.stderr)
        return EXIT_NO_LINES
    report = det.report
    if args.omit:
        omit = [int(v) for v in str(args.omit).split(",")]
        report = with_omissions(report, omit)
        det = type(det)(report=report, signal=det.signal, smoothed=det.smoothed,
                        threshold=det.threshold, band_image=det.band_image, stack=det.stack)
    report_dict = chain_report_to_dict(report)
    rows = _chain_rows(report)
    if args.out:
        from .detect import render_overlay

        overlay = render_overlay(patch_img, report)
        _write_report_files(Path(args.out), report_dict, rows, det, overlay, "chain")
    sys.stdout.write(dumps(report_dict))
    return EXIT_OK


def _chain_rows(report) -> list[dict]:
    rows = []
    kept = [p for i, p in enumerate(report.positions_px) if i not in report.omitted_indices]
    kept_dist = dict(zip(kept, list(report.distances_mm or [])))
    for i, p in enumerate(report.positions_px):
        rows.append({
            "index": i,
            "position_px": p,
            "omitted": i in report.omitted_indices,
            "gap_to_next_mm": kept_dist.get(p, ""),
        })
    return rows


def _laid_rows(report) -> list[dict]:
    rows = []
    half = (report.window_length_px or 0) / 2.0
    for i, p in enumerate(report.positions_px):
        in_window = (
            report.window_length_px is not None
            and report.window_anchor_px - half <= p < report.window_anchor_px + half
        )
        rows.append({"index": i, "offset_px": p, "in_window": in_window})
    return rows


def _provenance_with_cal(image_path: str, patch, cal) -> dict:
    prov = _provenance(image_path, patch)
    prov["calibration_method"] = cal.method.value if cal else None
    return prov


def cmd_laids(args) -> int:
    cfg = _load_config(args.config)
    image_path = _pick(args.image, cfg, "input", None) or _usage("missing --image")
    img = _load_gray(image_path, bool(_pick(args.invert, cfg, "invert", False)))
    patch = _parse_patch(_pick(args.patch, cfg, "patch", None))
    patch_img = _prepare_patch(img, patch)
    band = _parse_band(_pick(args.band, cfg, "band", [0.026, 1.0]))
    variant = _variant_from_args(args, cfg)
    flow = _flow_from_args(args, cfg, variant)
    peaks = _peaks_from_args(args, cfg, DEFAULT_LAID_PEAKS)
    cal = _calibration_from_args(args, cfg)
    angle_step = float(_pick(args.angle_step, cfg, "angle_step_deg", 0.5))
    anchor = float(_pick(args.window_anchor, cfg, "window_anchor_px", 0.0))

    try:
        det = detect_laid_lines(
            patch_img, band, variant, peaks, cal,
            flow=flow, angle_step_deg=angle_step, window_anchor_px=anchor,
            provenance=_provenance_with_cal(image_path, patch, cal),
        )
    except PatchTooSmall as exc:
        print(f"patch too small: {exc}", file=sys.stderr)
        return EXIT_PATCH_TOO_SMALL
    if not det.report.positions_px:
        print("no laid lines detected", file=sys.stderr)
        return EXIT_NO_LINES
    report_dict = laid_report_to_dict(det.report)
    if args.out:
        from .detect import render_overlay

        overlay = render_overlay(patch_img, det.report)
        _write_report_files(Path(args.out), report_dict, _laid_rows(det.report), det, overlay, "laid")
        if args.export_sinogram:
            _export_sinogram(det.sinogram, Path(args.out))
    sys.stdout.write(dumps(report_dict))
    return EXIT_OK


def _export_sinogram(sino, out_dir: Path) -> None:
    from .image import GrayImage as _G

    span = sino.data.max() - sino.data.min()
    norm = (sino.data - sino.data.min()) / span if span else np.zeros_like(sino.data)
    imgio.write_pgm(_G(norm), out_dir / "sinogram.pgm")
    (out_dir / "sinogram.json").write_text(dumps({
        "angles_deg": [float(a) for a in sino.angles],
        "offset_min": float(sino.offsets[0]),
        "offset_max": float(sino.offsets[-1]),
        "vmin": float(sino.data.min()),
        "vmax": float(sino.data.max()),
    }))


def cmd_phantom(args) -> int:
    if (args.preset is None) == (args.spec is None):
        raise UsageError("give exactly one of --preset or --spec")
    if args.preset is not None:
        if args.preset not in phantom.PRESETS:
            raise UsageError(f"unknown preset {args.preset!r}; available: {sorted(phantom.PRESETS)}")
        spec = phantom.PRESETS[args.preset]()
    else:
        try:
            spec = phantom.load_spec(args.spec)
        except (OSError, json.JSONDecodeError, KeyError) as exc:
            raise UsageError(f"cannot read spec: {exc}") from exc
    if args.seed is not None:
        spec = phantom.PhantomSpec(
            width=spec.width, height=spec.height, background=spec.background,
            scale=spec.scale, elements=spec.elements,
            noise_sigma=spec.noise_sigma, seed=args.seed,
        )
    try:
        img, truth = phantom.generate(spec)
    except InvalidSpec as exc:
        raise UsageError(str(exc)) from exc
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = args.preset or Path(args.spec).stem
    if args.format == "pgm":
        image_path = out_dir / f"{stem}.pgm"
        imgio.write_pgm(img, image_path, maxval=65535)
    else:
        image_path = out_dir / f"{stem}.png"
        imgio.write_png(img, image_path, bit_depth=16)
    phantom.save_spec(spec, out_dir / f"{stem}.spec.json")
    truth_dict = truth.to_dict()
    if spec.scale is not None:
        truth_dict["pixels_per_mm"] = spec.scale
    (out_dir / f"{stem}.truth.json").write_text(dumps(truth_dict))
    sys.stdout.write(dumps({"image": str(image_path), "truth": str(out_dir / f"{stem}.truth.json")}))
    return EXIT_OK


# --- argument wiring ---------------------------------------------------------


def _add_common_flow(p: argparse.ArgumentParser) -> None:
    p.add_argument("--variant", choices=["isotropic", "anisotropic"], default=None)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--t-max", type=float, default=None)
    p.add_argument("--inner-tol", type=float, default=None)
    p.add_argument("--inner-max-iter", type=int, default=None)


def _add_common_io(p: argparse.ArgumentParser) -> None:
    p.add_argument("--image", default=None, help="input image (PNG/JPEG/PGM/PPM)")
    p.add_argument("--patch", default=None, help="x0,y0,w,h crop rectangle")
    p.add_argument("--config", default=None, help="JSON run config (flags win)")
    p.add_argument("--invert", action="store_true", default=None,
                   help="invert intensities (for dark-line imagery)")


def _add_detection_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--band", default=None, help="t_lo,t_hi band interval")
    p.add_argument("--smooth-sigma", type=float, default=None)
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--min-separation", type=int, default=None)
    p.add_argument("--px-per-mm", type=float, default=None)
    p.add_argument("--calibration", default=None, help="calibration JSON from `calibrate`")
    p.add_argument("--out", default=None, help="directory for report files")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="paperlines",
        description="Chain and laid line measurement for reflected light images of handmade paper",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("calibrate", help="estimate pixels per millimetre")
    p.add_argument("--image", default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--method", choices=["ruler", "paper-size"], required=True)
    p.add_argument("--tick-spacing-mm", type=float, default=1.0)
    p.add_argument("--paper-height-mm", type=float, default=None)
    p.add_argument("--axis", choices=["horizontal", "vertical"], default="horizontal")
    p.add_argument("--canny-sigma", type=float, default=DEFAULT_CANNY_SIGMA)
    p.add_argument("--canny-low", type=float, default=DEFAULT_CANNY_LOW)
    p.add_argument("--canny-high", type=float, default=DEFAULT_CANNY_HIGH)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("decompose", help="spectral decomposition to band images")
    _add_common_io(p)
    _add_common_flow(p)
    p.add_argument("--edges", default=None, help="comma-separated band edges")
    p.add_argument("--t-lo", type=float, default=None)
    p.add_argument("--t-hi", type=float, default=None)
    p.add_argument("--out", default=None, required=False)
    p.add_argument("--strict", action="store_true")
    p.add_argument("--verify", action="store_true",
                   help="check that bands + residual reconstruct the input")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("chains", help="detect chain lines and measure gaps")
    _add_common_io(p)
    _add_common_flow(p)
    _add_detection_args(p)
    p.add_argument("--orientation", choices=["vertical", "horizontal"], default=None)
    p.add_argument("--filter-width", type=int, default=None)
    p.add_argument("--filter-height-fraction", type=float, default=None)
    p.add_argument("--omit", default=None, help="comma-separated line indices to omit")
    p.set_defaults(func=cmd_chains)

    p = sub.add_parser("laids", help="detect laid lines and measure density")
    _add_common_io(p)
    _add_common_flow(p)
    _add_detection_args(p)
    p.add_argument("--angle-step", type=float, default=None)
    p.add_argument("--window-anchor", type=float, default=None)
    p.add_argument("--export-sinogram", action="store_true")
    p.set_defaults(func=cmd_laids)

    p = sub.add_parser("phantom", help="generate a synthetic test image")
    p.add_argument("--preset", default=None, help=f"one of {sorted(phantom.PRESETS)}")
    p.add_argument("--spec", default=None, help="phantom spec JSON")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--format", choices=["png", "pgm"], default="png")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_phantom)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PaperlinesError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
