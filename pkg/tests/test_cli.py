import json

import numpy as np
import pytest

from paperlines import cli

from conftest import run_cli


def test_calibrate_ruler(phantom_files):
    code, stdout, _ = run_cli([
        "calibrate", "--image", str(phantom_files["ruler"]),
        "--method", "ruler", "--tick-spacing-mm", "1",
    ])
    assert code == 0
    payload = json.loads(stdout)
    assert payload["pixels_per_mm"] == 20.0
    assert payload["method"] == "ruler"


def test_calibrate_paper_size(phantom_files):
    code, stdout, _ = run_cli([
        "calibrate", "--image", str(phantom_files["page"]),
        "--method", "paper-size", "--paper-height-mm", "30",
    ])
    assert code == 0
    got = json.loads(stdout)["pixels_per_mm"]
    assert abs(got - 200.0 / 30.0) / (200.0 / 30.0) < 0.01


def test_calibrate_missing_file():
    code, _, err = run_cli(["calibrate", "--image", "/no/such/file.png", "--method", "ruler"])
    assert code == 2
    assert "no such file" in err


def test_calibrate_failure_exit_3(phantom_files):
    code, _, _ = run_cli([
        "calibrate", "--image", str(phantom_files["chain-blank"]),
        "--method", "ruler",
    ])
    assert code == 3


def test_phantom_preset_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        code, _, _ = run_cli(["phantom", "--preset", "chain-basic", "--out", str(out)])
        assert code == 0
    assert (a / "chain-basic.png").read_bytes() == (b / "chain-basic.png").read_bytes()
    truth = json.loads((a / "chain-basic.truth.json").read_text())
    assert truth["line_positions_px"] == [50.0, 150.0, 250.0]
    assert truth["pixels_per_mm"] == 10.0


def test_phantom_unknown_preset(tmp_path):
    code, _, err = run_cli(["phantom", "--preset", "nope", "--out", str(tmp_path)])
    assert code == 2


def test_phantom_invalid_spec(tmp_path):
    spec = {
        "width": 32, "height": 32, "background": 0.5,
        "elements": [{"type": "Disk", "cx": 31, "cy": 16, "r": 9, "contrast": 0.4}],
        "noise_sigma": 0.0, "seed": 1,
    }
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(spec))
    code, _, err = run_cli(["phantom", "--spec", str(path), "--out", str(tmp_path)])
    assert code == 2
    assert "canvas" in err


def test_decompose_verify(tmp_path, phantom_files):
    out = tmp_path / "dec"
    code, stdout, err = run_cli([
        "decompose", "--image", str(phantom_files["chain-basic"]),
        "--patch", "0,0,96,96", "--t-max", "0.2", "--edges", "0.052,0.2",
        "--out", str(out), "--verify",
    ])
    assert code == 0, err
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["reconstruction_error"] <= 1e-6
    assert (out / "band_00.png").exists()
    assert (out / "band_01.png").exists()
    assert (out / "residual.png").exists()
    assert (out / "spectrum.png").exists()
    assert len(manifest["spectrum"]["times"]) == len(manifest["spectrum"]["amplitude"])


def test_chains_report(cli_chain_run):
    out_dir, report = cli_chain_run
    assert report["schema"] == 1
    assert report["positions_px"] == [50.0, 150.0, 250.0]
    assert report["distances_mm"] == [10.0, 10.0]
    assert report["provenance"]["source"] == "chain-basic.png"
    assert (out_dir / "report.json").exists()
    assert (out_dir / "report.csv").exists()
    assert (out_dir / "overlay.png").exists()
    assert (out_dir / "signal.png").exists()
    csv_text = (out_dir / "report.csv").read_text()
    assert csv_text.splitlines()[0] == "index,position_px,omitted,gap_to_next_mm"


def test_chains_deterministic(cli_chain_run, phantom_files, tmp_path):
    out_dir, _ = cli_chain_run
    second = tmp_path / "chains_b"
    code, _, _ = run_cli([
        "chains", "--image", str(phantom_files["chain-basic"]),
        "--px-per-mm", "10", "--out", str(second),
    ])
    assert code == 0
    assert (out_dir / "report.json").read_bytes() == (second / "report.json").read_bytes()
    assert (out_dir / "overlay.png").read_bytes() == (second / "overlay.png").read_bytes()


def test_chains_report_roundtrip(cli_chain_run):
    out_dir, _ = cli_chain_run
    raw = (out_dir / "report.json").read_bytes()
    again = cli.dumps(json.loads(raw)).encode()
    assert raw == again


def test_chains_omit(phantom_files):
    code, stdout, _ = run_cli([
        "chains", "--image", str(phantom_files["chain-basic"]),
        "--px-per-mm", "10", "--omit", "0",
    ])
    assert code == 0
    report = json.loads(stdout)
    assert report["omitted_indices"] == [0]
    assert len(report["distances_mm"]) == 1


def test_chains_blank_exit_5(phantom_files):
    code, _, _ = run_cli([
        "chains", "--image", str(phantom_files["chain-blank"]),
        "--px-per-mm", "10", "--threshold", "5.0",
    ])
    assert code == 5


def test_config_precedence(phantom_files, tmp_path):
    config = {
        "input": str(phantom_files["chain-blank"]),
        "pixels_per_mm": 10.0,
        "peaks": {"threshold": 5.0},
    }
    cfg_path = tmp_path / "run.json"
    cfg_path.write_text(json.dumps(config))
    code, _, _ = run_cli(["chains", "--config", str(cfg_path)])
    assert code == 5
    # flag overrides the config input
    code2, stdout, _ = run_cli([
        "chains", "--config", str(cfg_path),
        "--image", str(phantom_files["chain-basic"]), "--threshold", "0.5",
    ])
    assert code2 == 0
    assert json.loads(stdout)["params"]["peaks"]["threshold"] == 0.5


def test_config_unknown_key(tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"inputt": "x.png"}))
    code, _, err = run_cli(["chains", "--config", str(cfg)])
    assert code == 2
    assert "unknown config keys" in err


def test_laids_report(phantom_files, tmp_path):
    out = tmp_path / "laids"
    code, stdout, err = run_cli([
        "laids", "--image", str(phantom_files["laid-basic"]),
        "--px-per-mm", "12", "--band", "0.026,0.5", "--t-max", "0.52",
        "--out", str(out), "--export-sinogram",
    ])
    assert code == 0, err
    report = json.loads(stdout)
    assert report["density_per_cm"] == 8
    assert abs(report["angle_deg"] - 92.0) <= 0.5
    assert (out / "sinogram.pgm").exists()
    assert (out / "sinogram.json").exists()
    assert (out / "signal.png").exists()


def test_laids_patch_too_small_exit_6(phantom_files):
    code, _, _ = run_cli([
        "laids", "--image", str(phantom_files["laid-basic"]),
        "--patch", "0,0,96,96", "--px-per-mm", "12",
    ])
    assert code == 6


def test_usage_error_exit_2():
    with pytest.raises(SystemExit) as exc:
        cli.main(["chains", "--not-a-flag"])
    assert exc.value.code == 2
