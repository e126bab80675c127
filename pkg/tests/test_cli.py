from __future__ import annotations

import json
from dataclasses import replace
import subprocess
import sys

import pytest

from resetsg.cli import EXIT_CONFIG, EXIT_FALSE, EXIT_OK, EXIT_ZENO, load_config, main
from resetsg.model import save_system
from resetsg.region import load_region, save_region
from resetsg.simulator import SAMPLE_COLUMNS

from conftest import first_order_lag, zeno_system


def _config(tmp_path, system, name="run.json", **over):
    save_system(system, tmp_path / f"{name}.system.json")
    cfg = {
        "system": f"{name}.system.json",
        "partition_n": 1,
        "interior_centers": {"start": 0.0, "step": 0.5, "count": 2},
        "exterior_centers": {"start": -1.0, "step": 1.0, "count": 2},
        "battery": {"multisine": 3, "sigmoid_a": 2, "sigmoid_nu": 1},
        "window": [-1.5, 1.5, -1.5, 1.5],
        "raster": 61,
        "seed": 3,
        **over,
    }
    (tmp_path / name).write_text(json.dumps(cfg))
    return tmp_path / name


@pytest.fixture(scope="module")
def lag_run(tmp_path_factory):
    base = tmp_path_factory.mktemp("lag")
    cfg = _config(base, first_order_lag())
    runs = []
    for k in range(2):
        out = base / f"out{k}"
        assert main(["bound", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
        assert main(["sample", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
        runs.append(out)
    return cfg, runs


def test_outputs_written(lag_run):
    _, (out, _) = lag_run
    for name in ("region.json", "sweep_report.json", "region.svg", "samples.csv", "sample_report.json"):
        assert (out / name).exists()
    report = json.loads((out / "sweep_report.json").read_text())
    assert len(report["tasks"]) == 4 and report["statuses"] == {"optimal": 4}


def test_runs_are_byte_identical(lag_run):
    _, (a, b) = lag_run
    for name in ("region.json", "sweep_report.json", "region.svg", "samples.csv", "sample_report.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_config_hash_ignores_out_and_threads(lag_run):
    cfg_path, (out, _) = lag_run
    cfg = load_config(cfg_path)
    region = json.loads((out / "region.json").read_text())
    assert region["config_hash"] == cfg.hash()
    assert replace(cfg, out="elsewhere", threads=4).hash() == cfg.hash()
    assert replace(cfg, seed=4).hash() != cfg.hash()
    assert f"config_hash {cfg.hash()}" in (out / "region.svg").read_text()
    assert (out / "samples.csv").read_text().startswith(f"# config_hash: {cfg.hash()}")


def test_lag_bound_matches_gain(lag_run):
    _, (out, _) = lag_run
    reg = load_region(out / "region.json")
    interior = {c.center: c.radius for c in reg.constraints if c.sigma == -1}
    assert interior[0.0] == pytest.approx(1.0, abs=1e-3)


def test_hull_and_check(lag_run, tmp_path):
    cfg, (out, _) = lag_run
    assert main(["hull", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    assert json.loads((out / "hull.json").read_text())["samples"] > 0
    assert main(["check", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    cert = json.loads((out / "certificate.json").read_text())
    assert cert["verdict"] is True and cert["gap_metric"] is not None
    assert (out / "overlay.svg").exists()
    tampered = tmp_path / "tampered.json"
    save_region(load_region(out / "region.json").scaled(0.3), tampered)
    code = main(["check", "--config", str(cfg), "--out", str(tmp_path), "--samples", str(out / "samples.csv"),
                 "--region", str(tampered)])
    assert code == EXIT_FALSE
    cert = json.loads((tmp_path / "certificate.json").read_text())
    assert cert["verdict"] is False and cert["violating_samples"]


def test_empty_samples_is_config_error(tmp_path, capsys):
    (tmp_path / "samples.csv").write_text("# config_hash: x\n" + ",".join(SAMPLE_COLUMNS) + "\n")
    (tmp_path / "region.json").write_text(json.dumps({"constraints": []}))
    assert main(["hull", "--out", str(tmp_path)]) == EXIT_CONFIG
    assert main(["check", "--out", str(tmp_path)]) == EXIT_CONFIG
    assert "no samples" in capsys.readouterr().err


@pytest.mark.parametrize("bad", [
    "{not json",
    json.dumps({"partition_n": 8}),
    json.dumps({"system": "missing.json"}),
])
def test_bad_config_is_config_error(tmp_path, bad):
    (tmp_path / "bad.json").write_text(bad)
    assert main(["bound", "--config", str(tmp_path / "bad.json"), "--out", str(tmp_path)]) == EXIT_CONFIG


def test_invalid_values_are_config_errors(tmp_path):
    for over in ({"partition_n": 5}, {"window": [1, 0, 0, 1]}, {"colour": "red"}):
        cfg = _config(tmp_path, first_order_lag(), **over)
        assert main(["bound", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_CONFIG
    cfg = _config(tmp_path, first_order_lag())
    assert main(["sample", "--config", str(cfg), "--out", str(tmp_path), "--threads", "0"]) == EXIT_CONFIG


def test_zeno_battery_exit_code(tmp_path):
    cfg = _config(tmp_path, zeno_system(), battery={"multisine": 2, "sigmoid_a": 0, "sigmoid_nu": 0})
    assert main(["sample", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_ZENO
    assert json.loads((tmp_path / "error.json").read_text())["exit_code"] == EXIT_ZENO


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "resetsg", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "bound" in out.stdout
