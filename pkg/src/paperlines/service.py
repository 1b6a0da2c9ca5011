"""HTTP facade for the interactive tuning loop.

A session holds one uploaded image plus a cache of flow stacks keyed by the
exact (patch, variant, flow) parameters, so sweeping thresholds or band
edges only pays for the expensive scale-space solve once. Detection
payloads match the CLI's report JSON field for field.

Configuration comes from environment variables:
PAPERLINES_MAX_UPLOAD_MB (default 100), PAPERLINES_SESSION_TTL seconds
(default 3600), PAPERLINES_PORT and PAPERLINES_WORKERS for `serve`.
"""

from __future__ import annotations

import os
import tempfile
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from fastapi import FastAPI, HTTPException, UploadFile
from fastapi.responses import FileResponse
from pydantic import BaseModel, Field

from . import imgio
from .detect import (
    DEFAULT_CHAIN_PEAKS,
    DEFAULT_LAID_PEAKS,
    PeakConfig,
    chain_report_to_dict,
    detect_chain_lines,
    detect_laid_lines,
    laid_report_to_dict,
    render_overlay,
    with_omissions,
)
from .errors import NoLinesFound, PaperlinesError, PatchTooSmall, UnsupportedFormat
from .image import Calibration, CalibrationMethod, GrayImage, RgbImage, crop_patch, to_grayscale
from .spectral import (
    ScaleSpaceStack,
    TvFlowConfig,
    TvVariant,
    decompose_stack,
    spectral_response,
    tv_flow,
)
from .transforms import Orientation, RectFilterSpec
from .edges import calibrate_from_paper_size, calibrate_from_ruler, canny_edges


@dataclass
class ServiceConfig:
    max_upload_bytes: int = 100 * 1024 * 1024
    session_ttl_s: float = 3600.0

    @classmethod
    def from_env(cls) -> "ServiceConfig":
        return cls(
            max_upload_bytes=int(float(os.environ.get("PAPERLINES_MAX_UPLOAD_MB", "100")) * 1024 * 1024),
            session_ttl_s=float(os.environ.get("PAPERLINES_SESSION_TTL", "3600")),
        )


@dataclass
class Session:
    session_id: str
    image: GrayImage
    source_name: str
    artifacts: Path
    calibration: Calibration | None = None
    stacks: dict[tuple, ScaleSpaceStack] = field(default_factory=dict)
    manifests: dict[tuple, dict] = field(default_factory=dict)
    reports: dict[str, Any] = field(default_factory=dict)
    last_access: float = field(default_factory=time.monotonic)
    lock: threading.Lock = field(default_factory=threading.Lock)
    report_counter: int = 0


class FlowParams(BaseModel):
    dt: float = 0.013
    t_max: float = 1.3
    inner_tol: float = 1e-5
    inner_max_iter: int = 500


class CalibrateRequest(BaseModel):
    method: str
    pixels_per_mm: float | None = None
    tick_spacing_mm: float = 1.0
    axis: str = "horizontal"
    paper_height_mm: float | None = None


class DecomposeRequest(BaseModel):
    patch: list[int] | None = None
    band_edges: list[float] = Field(default_factory=lambda: [0.026, 1.0])
    variant: str = "isotropic"
    flow: FlowParams = Field(default_factory=FlowParams)


class PeaksParams(BaseModel):
    smooth_sigma: float = 2.0
    threshold: float | None = None
    min_separation: int | None = None


class DetectRequest(BaseModel):
    patch: list[int] | None = None
    band: list[float] = Field(default_factory=lambda: [0.026, 1.0])
    variant: str = "isotropic"
    flow: FlowParams = Field(default_factory=FlowParams)
    peaks: PeaksParams = Field(default_factory=PeaksParams)
    orientation: str = "vertical"
    filter_width_px: int = 1
    filter_height_fraction: float = 2.0 / 3.0
    angle_step_deg: float = 0.5
    window_anchor_px: float = 0.0


class OmitRequest(BaseModel):
    omit: list[int]


def _flow_config(params: FlowParams, variant: str) -> TvFlowConfig:
    try:
        v = TvVariant(variant)
    except ValueError:
        raise HTTPException(422, f"unknown variant {variant!r}")
    try:
        return TvFlowConfig(
            dt=params.dt, t_max=params.t_max, variant=v,
            inner_tol=params.inner_tol, inner_max_iter=params.inner_max_iter,
        )
    except ValueError as exc:
        raise HTTPException(422, str(exc))


def create_app(config: ServiceConfig | None = None) -> FastAPI:
    config = config or ServiceConfig.from_env()
    app = FastAPI(title="paperlines service")
    sessions: dict[str, Session] = {}
    registry_lock = threading.Lock()

    def _sweep_expired() -> None:
        now = time.monotonic()
        with registry_lock:
            dead = [sid for sid, s in sessions.items() if now - s.last_access > config.session_ttl_s]
            for sid in dead:
                sessions.pop(sid, None)

    def _get_session(session_id: str) -> Session:
        _sweep_expired()
        with registry_lock:
            session = sessions.get(session_id)
        if session is None:
            raise HTTPException(404, "unknown session")
        session.last_access = time.monotonic()
        return session

    def _patch_image(session: Session, patch: list[int] | None) -> GrayImage:
        if patch is None:
            return session.image
        if len(patch) != 4:
            raise HTTPException(422, "patch must be [x0, y0, w, h]")
        try:
            return crop_patch(session.image, *patch)
        except PaperlinesError as exc:
            raise HTTPException(422, str(exc))

    def _stack_for(session: Session, patch: list[int] | None, flow: TvFlowConfig) -> tuple[ScaleSpaceStack, bool]:
        key = (
            tuple(patch) if patch else None,
            flow.variant.value, flow.dt, flow.t_max, flow.inner_tol, flow.inner_max_iter,
        )
        # serialize per session so identical sweeps never solve twice
        with session.lock:
            if key in session.stacks:
                return session.stacks[key], True
            stack = tv_flow(_patch_image(session, patch), flow)
            session.stacks[key] = stack
            return stack, False

    @app.post("/sessions", status_code=201)
    async def create_session(file: UploadFile) -> dict:
        raw = await file.read()
        if len(raw) > config.max_upload_bytes:
            raise HTTPException(413, "upload exceeds the configured size limit")
        try:
            img = imgio.decode_image(raw)
        except UnsupportedFormat as exc:
            raise HTTPException(415, str(exc))
        if isinstance(img, RgbImage):
            img = to_grayscale(img)
        session_id = uuid.uuid4().hex
        session = Session(
            session_id=session_id,
            image=img,
            source_name=file.filename or "upload",
            artifacts=Path(tempfile.mkdtemp(prefix="paperlines_")),
        )
        with registry_lock:
            sessions[session_id] = session
        return {"session_id": session_id, "width": img.width, "height": img.height}

    @app.post("/sessions/{session_id}/calibrate")
    def calibrate(session_id: str, req: CalibrateRequest) -> dict:
        session = _get_session(session_id)
        if req.method == "explicit":
            if req.pixels_per_mm is None or req.pixels_per_mm <= 0:
                raise HTTPException(422, "explicit calibration needs a positive pixels_per_mm")
            cal = Calibration(req.pixels_per_mm, CalibrationMethod.EXPLICIT)
        elif req.method in ("ruler", "paper_size"):
            edges = canny_edges(session.image)
            try:
                if req.method == "ruler":
                    cal = calibrate_from_ruler(edges, req.tick_spacing_mm, Orientation(req.axis))
                else:
                    if req.paper_height_mm is None:
                        raise HTTPException(422, "paper_size calibration needs paper_height_mm")
                    cal = calibrate_from_paper_size(edges, req.paper_height_mm)
            except PaperlinesError as exc:
                raise HTTPException(422, str(exc))
        else:
            raise HTTPException(422, f"unknown calibration method {req.method!r}")
        session.calibration = cal
        return {
            "pixels_per_mm": cal.pixels_per_mm,
            "method": cal.method.value,
            "confidence_note": cal.confidence_note,
        }

    @app.post("/sessions/{session_id}/decompose")
    def decompose_endpoint(session_id: str, req: DecomposeRequest) -> dict:
        session = _get_session(session_id)
        flow = _flow_config(req.flow, req.variant)
        if not req.band_edges:
            raise HTTPException(422, "band_edges must not be empty")
        if any(b <= a for a, b in zip(req.band_edges, req.band_edges[1:])) or req.band_edges[0] <= 0:
            raise HTTPException(422, "band_edges must be positive and ascending")
        if req.band_edges[-1] > flow.t_max + 1e-12:
            raise HTTPException(422, "band edge beyond t_max")
        key = (
            tuple(req.patch) if req.patch else None,
            req.variant, flow.dt, flow.t_max, flow.inner_tol, flow.inner_max_iter,
            tuple(req.band_edges),
        )
        if key in session.manifests:
            return {"cached": True, "manifest": session.manifests[key]}
        stack, _ = _stack_for(session, req.patch, flow)
        try:
            dec = decompose_stack(stack, req.band_edges)
        except PaperlinesError as exc:
            raise HTTPException(422, str(exc))
        resp = spectral_response(stack)
        run_id = f"d{len(session.manifests)}"
        band_urls = []
        for k in range(dec.bands.shape[0]):
            name = f"{run_id}_band_{k:02d}.png"
            vmin, vmax = imgio.write_field_png(dec.bands[k], session.artifacts / name)
            lo = 0.0 if k == 0 else dec.band_edges[k - 1]
            band_urls.append({
                "url": f"/sessions/{session_id}/artifacts/{name}",
                "t_lo": lo, "t_hi": dec.band_edges[k], "vmin": vmin, "vmax": vmax,
            })
        manifest = {
            "schema": 1,
            "band_edges": list(dec.band_edges),
            "variant": req.variant,
            "flow": req.flow.model_dump(),
            "mean": dec.mean,
            "bands": band_urls,
            "spectrum": {
                "times": [float(t) for t in resp.times],
                "amplitude": [float(a) for a in resp.amplitude],
            },
            "converged": stack.all_converged,
            "patch": list(req.patch) if req.patch else None,
        }
        session.manifests[key] = manifest
        return {"cached": False, "manifest": manifest}

    def _detect_common(session: Session, req: DetectRequest):
        flow = _flow_config(req.flow, req.variant)
        if len(req.band) != 2 or not (0 <= req.band[0] < req.band[1]):
            raise HTTPException(422, "band must be [t_lo, t_hi] with t_lo < t_hi")
        if req.band[1] > flow.t_max + 1e-12:
            raise HTTPException(422, "t_hi beyond t_max")
        stack, cached = _stack_for(session, req.patch, flow)
        patch_img = _patch_image(session, req.patch)
        provenance = {
            "source": session.source_name,
            "patch": list(req.patch) if req.patch else None,
            "calibration_method": session.calibration.method.value if session.calibration else None,
        }
        return flow, stack, cached, patch_img, provenance

    def _signal_payload(det, offset0: float = 0.0) -> dict:
        # the projected signal behind the report, so the UI can plot it
        # without doing any analysis of its own
        return {
            "values": [float(v) for v in det.smoothed],
            "threshold": det.threshold,
            "offset0": offset0,
        }

    def _store_report(session: Session, report, kind: str, payload: dict, patch_img) -> dict:
        session.report_counter += 1
        report_id = f"r{session.report_counter}"
        overlay_name = f"{report_id}_overlay.png"
        overlay = render_overlay(patch_img, report) if report is not None else None
        if overlay is not None:
            imgio.write_png(overlay, session.artifacts / overlay_name)
        session.reports[report_id] = (kind, report, patch_img)
        out = {
            "report_id": report_id,
            "report": payload,
            "overlay_url": (
                f"/sessions/{session.session_id}/artifacts/{overlay_name}" if overlay else None
            ),
        }
        return out

    @app.post("/sessions/{session_id}/detect/chains")
    def detect_chains_endpoint(session_id: str, req: DetectRequest) -> dict:
        session = _get_session(session_id)
        flow, stack, cached, patch_img, provenance = _detect_common(session, req)
        spec = RectFilterSpec(
            width_px=req.filter_width_px,
            height_fraction=req.filter_height_fraction,
            orientation=Orientation(req.orientation),
        )
        min_sep = req.peaks.min_separation
        peaks = PeakConfig(
            smooth_sigma=req.peaks.smooth_sigma,
            threshold=req.peaks.threshold,
            min_separation=DEFAULT_CHAIN_PEAKS.min_separation if min_sep is None else min_sep,
        )
        warnings = [] if session.calibration else ["no calibration; millimetre fields omitted"]
        try:
            det = detect_chain_lines(
                patch_img, (req.band[0], req.band[1]), spec, peaks, session.calibration,
                flow=flow, stack=stack, provenance=provenance,
            )
        except NoLinesFound as exc:
            return {"report_id": None, "report": None, "overlay_url": None,
                    "cached_stack": cached, "warnings": warnings + ["no lines found"],
                    "signal": _signal_payload(exc.detection)}
        out = _store_report(session, det.report, "chain", chain_report_to_dict(det.report), patch_img)
        out["cached_stack"] = cached
        out["warnings"] = warnings
        out["signal"] = _signal_payload(det)
        return out

    @app.post("/sessions/{session_id}/detect/laids")
    def detect_laids_endpoint(session_id: str, req: DetectRequest) -> dict:
        session = _get_session(session_id)
        flow, stack, cached, patch_img, provenance = _detect_common(session, req)
        min_sep = req.peaks.min_separation
        peaks = PeakConfig(
            smooth_sigma=req.peaks.smooth_sigma,
            threshold=req.peaks.threshold,
            min_separation=DEFAULT_LAID_PEAKS.min_separation if min_sep is None else min_sep,
        )
        warnings = [] if session.calibration else ["no calibration; density omitted"]
        try:
            det = detect_laid_lines(
                patch_img, (req.band[0], req.band[1]), flow.variant, peaks, session.calibration,
                flow=flow, stack=stack,
                angle_step_deg=req.angle_step_deg, window_anchor_px=req.window_anchor_px,
                provenance=provenance,
            )
        except PatchTooSmall as exc:
            raise HTTPException(422, detail={"code": "patch_too_small", "message": str(exc)})
        signal = _signal_payload(det, offset0=float(det.sinogram.offsets[0]))
        if not det.report.positions_px:
            return {"report_id": None, "report": None, "overlay_url": None,
                    "cached_stack": cached, "warnings": warnings + ["no lines found"],
                    "signal": signal}
        out = _store_report(session, det.report, "laid", laid_report_to_dict(det.report), patch_img)
        out["cached_stack"] = cached
        out["warnings"] = warnings
        out["signal"] = signal
        return out

    @app.patch("/sessions/{session_id}/reports/{report_id}")
    def patch_report(session_id: str, report_id: str, req: OmitRequest) -> dict:
        session = _get_session(session_id)
        entry = session.reports.get(report_id)
        if entry is None:
            raise HTTPException(404, "unknown report")
        kind, report, patch_img = entry
        if kind != "chain":
            raise HTTPException(422, "only chain reports support line omission")
        try:
            updated = with_omissions(report, req.omit)
        except PaperlinesError as exc:
            raise HTTPException(422, str(exc))
        session.reports[report_id] = (kind, updated, patch_img)
        overlay_name = f"{report_id}_overlay.png"
        imgio.write_png(render_overlay(patch_img, updated), session.artifacts / overlay_name)
        return {
            "report_id": report_id,
            "report": chain_report_to_dict(updated),
            "overlay_url": f"/sessions/{session_id}/artifacts/{overlay_name}",
        }

    @app.get("/sessions/{session_id}/reports/{report_id}")
    def get_report(session_id: str, report_id: str) -> dict:
        session = _get_session(session_id)
        entry = session.reports.get(report_id)
        if entry is None:
            raise HTTPException(404, "unknown report")
        kind, report, _ = entry
        payload = chain_report_to_dict(report) if kind == "chain" else laid_report_to_dict(report)
        return {"report_id": report_id, "report": payload}

    @app.get("/sessions/{session_id}/artifacts/{name}")
    def artifact(session_id: str, name: str):
        session = _get_session(session_id)
        path = (session.artifacts / name).resolve()
        if session.artifacts.resolve() not in path.parents or not path.exists():
            raise HTTPException(404, "unknown artifact")
        return FileResponse(path, media_type="image/png")

    ui_dir = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    if ui_dir.is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app


def main() -> None:
    """Run the service with uvicorn (`python -m paperlines.service`)."""
    import uvicorn

    uvicorn.run(
        create_app(),
        host=os.environ.get("PAPERLINES_HOST", "127.0.0.1"),
        port=int(os.environ.get("PAPERLINES_PORT", "8077")),
        workers=int(os.environ.get("PAPERLINES_WORKERS", "1")),
        log_level="warning",
    )


if __name__ == "__main__":
    main()
