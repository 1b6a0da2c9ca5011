"""Shared fixtures; the expensive scale-space solves run once per session."""

import numpy as np
import pytest

from paperlines import TvFlowConfig, TvVariant, tv_flow
from paperlines.detect import detect_chain_lines, detect_laid_lines
from paperlines.image import Calibration, CalibrationMethod
from paperlines import phantom

#: Band used by every laid-line analysis in the suite.
LAID_BAND = (0.026, 0.5)
CHAIN_BAND = (0.026, 1.0)


@pytest.fixture(scope="session")
def chain_cal():
    return Calibration(10.0, CalibrationMethod.EXPLICIT)


@pytest.fixture(scope="session")
def laid_cal():
    return Calibration(12.0, CalibrationMethod.EXPLICIT)


@pytest.fixture(scope="session")
def chain_phantom():
    return phantom.generate(phantom.chain_basic())


@pytest.fixture(scope="session")
def chain_detection(chain_phantom, chain_cal):
    img, _ = chain_phantom
    return detect_chain_lines(img, CHAIN_BAND, calibration=chain_cal)


@pytest.fixture(scope="session")
def laid_phantom():
    return phantom.generate(phantom.laid_basic())


@pytest.fixture(scope="session")
def laid_detection(laid_phantom, laid_cal):
    img, _ = laid_phantom
    return detect_laid_lines(img, LAID_BAND, calibration=laid_cal)


@pytest.fixture(scope="session")
def laid_fold_detection(laid_cal):
    img, _ = phantom.generate(phantom.laid_fold())
    return detect_laid_lines(img, LAID_BAND, calibration=laid_cal)


@pytest.fixture(scope="session")
def laid_degraded_detections(laid_cal):
    img, _ = phantom.generate(phantom.laid_degraded())
    return {
        variant: detect_laid_lines(img, LAID_BAND, variant=variant, calibration=laid_cal)
        for variant in (TvVariant.ISOTROPIC, TvVariant.ANISOTROPIC)
    }


@pytest.fixture(scope="session")
def disk_stack():
    img, _ = phantom.generate(phantom.disk_single())
    return tv_flow(img, TvFlowConfig(dt=0.013, t_max=3.25))


@pytest.fixture(scope="session")
def disk_stack_fine():
    img, _ = phantom.generate(phantom.disk_single())
    return tv_flow(img, TvFlowConfig(dt=0.0065, t_max=3.25))


@pytest.fixture(scope="session")
def four_disk_stack():
    img, _ = phantom.generate(phantom.disks_four())
    return tv_flow(img, TvFlowConfig(dt=0.026, t_max=5.2))


@pytest.fixture(scope="session")
def rect_stacks():
    img, _ = phantom.generate(phantom.rectangle())
    out = {}
    for variant in (TvVariant.ANISOTROPIC, TvVariant.ISOTROPIC):
        out[variant] = tv_flow(img, TvFlowConfig(dt=0.013, t_max=2.9, variant=variant))
    return out


@pytest.fixture(scope="session")
def phantom_files(tmp_path_factory):
    """Phantom images written to disk for the CLI and service tests."""
    from paperlines import imgio

    root = tmp_path_factory.mktemp("phantoms")
    paths = {}
    for name in ("chain-basic", "chain-blank", "laid-basic", "ruler", "page"):
        img, truth = phantom.generate(phantom.PRESETS[name]())
        path = root / f"{name}.png"
        imgio.write_png(img, path, bit_depth=16)
        paths[name] = path
    return paths


def run_cli(argv):
    """Invoke the CLI in-process, capturing exit code and both streams."""
    import io
    from contextlib import redirect_stderr, redirect_stdout

    from paperlines import cli

    out, err = io.StringIO(), io.StringIO()
    with redirect_stdout(out), redirect_stderr(err):
        code = cli.main(argv)
    return code, out.getvalue(), err.getvalue()


LAID_CLI_ARGS = ["--px-per-mm", "12", "--band", "0.026,0.5", "--t-max", "0.52"]


@pytest.fixture(scope="session")
def cli_chain_run(phantom_files, tmp_path_factory):
    import json

    out_dir = tmp_path_factory.mktemp("chains_a")
    code, stdout, err = run_cli([
        "chains", "--image", str(phantom_files["chain-basic"]),
        "--px-per-mm", "10", "--out", str(out_dir),
    ])
    assert code == 0, err
    return out_dir, json.loads(stdout)


@pytest.fixture(scope="session")
def cli_laid_run(phantom_files, tmp_path_factory):
    import json

    out_dir = tmp_path_factory.mktemp("laids_a")
    code, stdout, err = run_cli([
        "laids", "--image", str(phantom_files["laid-basic"]),
        *LAID_CLI_ARGS, "--out", str(out_dir),
    ])
    assert code == 0, err
    return out_dir, json.loads(stdout)


@pytest.fixture(scope="session")
def client():
    from fastapi.testclient import TestClient

    from paperlines.service import ServiceConfig, create_app

    return TestClient(create_app(ServiceConfig(max_upload_bytes=50 * 1024 * 1024, session_ttl_s=3600)))


@pytest.fixture(scope="session")
def chain_session(client, phantom_files):
    with open(phantom_files["chain-basic"], "rb") as fh:
        resp = client.post("/sessions", files={"file": ("chain-basic.png", fh, "image/png")})
    assert resp.status_code == 201
    payload = resp.json()
    assert payload["width"] == 320 and payload["height"] == 160
    sid = payload["session_id"]
    cal = client.post(f"/sessions/{sid}/calibrate", json={"method": "explicit", "pixels_per_mm": 10.0})
    assert cal.status_code == 200
    return sid


@pytest.fixture(scope="session")
def chain_detect_response(client, chain_session):
    resp = client.post(f"/sessions/{chain_session}/detect/chains", json={})
    assert resp.status_code == 200
    return resp.json()


@pytest.fixture(scope="session")
def laid_detect_response(client, phantom_files):
    with open(phantom_files["laid-basic"], "rb") as fh:
        resp = client.post("/sessions", files={"file": ("laid-basic.png", fh, "image/png")})
    sid = resp.json()["session_id"]
    client.post(f"/sessions/{sid}/calibrate", json={"method": "explicit", "pixels_per_mm": 12.0})
    resp = client.post(
        f"/sessions/{sid}/detect/laids",
        json={"band": [0.026, 0.5], "flow": {"dt": 0.013, "t_max": 0.52,
                                             "inner_tol": 1e-5, "inner_max_iter": 500}},
    )
    assert resp.status_code == 200
    return resp.json()
