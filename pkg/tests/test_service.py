import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from paperlines.service import ServiceConfig, create_app


def test_upload_rejects_oversize(phantom_files):
    tiny = TestClient(create_app(ServiceConfig(max_upload_bytes=128)))
    with open(phantom_files["chain-basic"], "rb") as fh:
        resp = tiny.post("/sessions", files={"file": ("big.png", fh, "image/png")})
    assert resp.status_code == 413


def test_upload_rejects_text(client):
    resp = client.post("/sessions", files={"file": ("notes.txt", b"hello", "text/plain")})
    assert resp.status_code == 415


def test_unknown_session_404(client):
    assert client.post("/sessions/nope/calibrate", json={"method": "explicit", "pixels_per_mm": 1.0}).status_code == 404
    assert client.post("/sessions/nope/decompose", json={}).status_code == 404


def test_calibrate_explicit_echo(client, chain_session):
    resp = client.post(f"/sessions/{chain_session}/calibrate",
                       json={"method": "explicit", "pixels_per_mm": 10.0})
    assert resp.status_code == 200
    assert resp.json()["pixels_per_mm"] == 10.0
    assert resp.json()["method"] == "explicit"


def test_calibrate_ruler_via_service(client, phantom_files):
    with open(phantom_files["ruler"], "rb") as fh:
        sid = client.post("/sessions", files={"file": ("ruler.png", fh, "image/png")}).json()["session_id"]
    resp = client.post(f"/sessions/{sid}/calibrate", json={"method": "ruler", "tick_spacing_mm": 1.0})
    assert resp.status_code == 200
    assert resp.json()["pixels_per_mm"] == 20.0


def test_decompose_cache_contract(client, chain_session):
    body = {"patch": [0, 0, 96, 96], "band_edges": [0.052, 0.2],
            "flow": {"dt": 0.013, "t_max": 0.2, "inner_tol": 1e-5, "inner_max_iter": 500}}
    first = client.post(f"/sessions/{chain_session}/decompose", json=body)
    assert first.status_code == 200
    assert first.json()["cached"] is False
    second = client.post(f"/sessions/{chain_session}/decompose", json=body)
    assert second.json()["cached"] is True
    assert json.dumps(first.json()["manifest"], sort_keys=True) == json.dumps(
        second.json()["manifest"], sort_keys=True
    )
    # band image artifact is served
    url = first.json()["manifest"]["bands"][0]["url"]
    art = client.get(url)
    assert art.status_code == 200
    assert art.headers["content-type"] == "image/png"


def test_decompose_invalid_band(client, chain_session):
    resp = client.post(f"/sessions/{chain_session}/decompose",
                       json={"band_edges": [0.4, 0.2]})
    assert resp.status_code == 422


def test_detect_chains_payload(chain_detect_response):
    report = chain_detect_response["report"]
    assert report["positions_px"] == [50.0, 150.0, 250.0]
    assert report["distances_mm"] == [10.0, 10.0]
    assert chain_detect_response["overlay_url"]


def test_detect_reuses_cached_stack(client, chain_session, chain_detect_response):
    resp = client.post(f"/sessions/{chain_session}/detect/chains",
                       json={"peaks": {"threshold": 0.4}})
    assert resp.status_code == 200
    assert resp.json()["cached_stack"] is True


def test_cli_service_equivalence(cli_chain_run, chain_detect_response):
    _, cli_report = cli_chain_run
    service_report = chain_detect_response["report"]
    assert service_report == cli_report


def test_patch_omission_recompute(client, chain_session, chain_detect_response):
    rid = chain_detect_response["report_id"]
    resp = client.patch(f"/sessions/{chain_session}/reports/{rid}", json={"omit": [0]})
    assert resp.status_code == 200
    report = resp.json()["report"]
    assert report["omitted_indices"] == [0]
    assert len(report["distances_mm"]) == 1
    # involution: clearing the omission restores the original distances
    back = client.patch(f"/sessions/{chain_session}/reports/{rid}", json={"omit": []})
    assert back.json()["report"]["distances_mm"] == [10.0, 10.0]


def test_detect_chains_no_lines(client, phantom_files):
    with open(phantom_files["chain-blank"], "rb") as fh:
        sid = client.post("/sessions", files={"file": ("blank.png", fh, "image/png")}).json()["session_id"]
    client.post(f"/sessions/{sid}/calibrate", json={"method": "explicit", "pixels_per_mm": 10.0})
    resp = client.post(f"/sessions/{sid}/detect/chains", json={"peaks": {"threshold": 5.0}})
    assert resp.status_code == 200
    assert resp.json()["report"] is None
    assert "no lines found" in resp.json()["warnings"]


def test_detect_laids_patch_too_small(client, phantom_files):
    with open(phantom_files["laid-basic"], "rb") as fh:
        sid = client.post("/sessions", files={"file": ("laid.png", fh, "image/png")}).json()["session_id"]
    client.post(f"/sessions/{sid}/calibrate", json={"method": "explicit", "pixels_per_mm": 12.0})
    resp = client.post(f"/sessions/{sid}/detect/laids", json={"patch": [0, 0, 90, 90]})
    assert resp.status_code == 422
    assert resp.json()["detail"]["code"] == "patch_too_small"


def test_session_isolation(client, phantom_files):
    with open(phantom_files["chain-basic"], "rb") as fh:
        sid_a = client.post("/sessions", files={"file": ("a.png", fh, "image/png")}).json()["session_id"]
    with open(phantom_files["chain-basic"], "rb") as fh:
        sid_b = client.post("/sessions", files={"file": ("b.png", fh, "image/png")}).json()["session_id"]
    client.post(f"/sessions/{sid_a}/calibrate", json={"method": "explicit", "pixels_per_mm": 7.0})
    resp = client.post(f"/sessions/{sid_b}/detect/chains", json={"peaks": {"threshold": 5.0}})
    # session b never got a calibration, so its run carries the warning
    assert any("no calibration" in w for w in resp.json()["warnings"])


def test_session_expiry(phantom_files):
    app = create_app(ServiceConfig(max_upload_bytes=50 * 1024 * 1024, session_ttl_s=0.0))
    c = TestClient(app)
    with open(phantom_files["ruler"], "rb") as fh:
        sid = c.post("/sessions", files={"file": ("r.png", fh, "image/png")}).json()["session_id"]
    import time

    time.sleep(0.01)
    resp = c.post(f"/sessions/{sid}/calibrate", json={"method": "explicit", "pixels_per_mm": 1.0})
    assert resp.status_code == 404
