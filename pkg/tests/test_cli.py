import json
import shutil
import subprocess
import sys

import numpy as np
import pytest

import oracles
from tacshear.cli import EXIT_DATA, EXIT_DEGENERATE, EXIT_OK, EXIT_USAGE, main
from tacshear.core import MarkerField, TactileGrid
from tacshear.io import read_field, write_field, write_params
from tacshear.core import HydroParams

from conftest import FIXTURES

CASE = FIXTURES / "press_slide"


def simulate(tmp_path, *extra, traj=CASE / "trajectory.traj"):
    out = tmp_path / "out"
    rc = main(["simulate", "--config", str(CASE / "config.json"), "--trajectory", str(traj), "--out", str(out), *extra])
    return rc, out


def test_golden_fixture(tmp_path):
    rc, out = simulate(tmp_path)
    assert rc == EXIT_OK
    golden = sorted((CASE / "golden").iterdir())
    produced = sorted(out.iterdir())
    assert [p.name for p in produced] == [p.name for p in golden]
    for a, b in zip(produced, golden):
        np.testing.assert_allclose(read_field(a).vectors, read_field(b).vectors, rtol=0, atol=1e-9)


def test_rerun_is_byte_identical(tmp_path):
    _, a = simulate(tmp_path / "a")
    _, b = simulate(tmp_path / "b")
    for p in sorted(a.iterdir()):
        assert p.read_bytes() == (b / p.name).read_bytes()


def test_no_contact_gives_zero_fields(tmp_path):
    t = tmp_path / "t.traj"
    t.write_text("# tacshear-trajectory v1\n0.0 1 0 0 0 0 0 0.05\n0.1 1 0 0 0 0.001 0 0.05\n")
    rc, out = simulate(tmp_path, "--final-only", traj=t)
    assert rc == EXIT_OK
    assert not read_field(out).vectors.any()


def test_binary_and_units(tmp_path):
    rc, out = simulate(tmp_path, "--final-only", "--unit", "m")
    assert rc == EXIT_OK
    f = read_field(out)
    assert f.unit == "m"
    last = read_field(sorted((CASE / "golden").iterdir())[-1])
    np.testing.assert_allclose(f.to_pixels().vectors, last.vectors, atol=1e-9)
    out_b = tmp_path / "all.tsfb"
    assert main(["simulate", "--config", str(CASE / "config.json"), "--trajectory", str(CASE / "trajectory.traj"),
                 "--out", str(out_b), "--binary"]) == EXIT_OK
    assert out_b.read_bytes()[:4] == b"TSFB"


def test_parse_error_exit_code(tmp_path, capsys):
    t = tmp_path / "t.traj"
    t.write_text("# tacshear-trajectory v1\n0.0 1 0 0 0 0 0 0.05\n0.1 1 0 0\n")
    rc, _ = simulate(tmp_path, traj=t)
    assert rc == EXIT_DATA
    assert "t.traj:3:" in capsys.readouterr().err


def test_usage_errors():
    assert main([]) == EXIT_USAGE
    with pytest.raises(SystemExit) as e:
        main(["simulate"])
    assert e.value.code == EXIT_USAGE


def test_config_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("TACSHEAR_CONFIG", str(CASE / "config.json"))
    out = tmp_path / "f.field"
    assert main(["simulate", "--trajectory", str(CASE / "trajectory.traj"), "--out", str(out), "--final-only"]) == 0
    assert out.exists()


def test_calibrate_empty_directory(tmp_path):
    (tmp_path / "ds").mkdir()
    out = tmp_path / "p.json"
    assert main(["calibrate", "--config", str(CASE / "config.json"), "--dataset", str(tmp_path / "ds"),
                 "--out", str(out)]) == EXIT_DATA
    assert not out.exists()


def test_calibrate_missing_kind_names_stage(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    shutil.copy(CASE / "samples.txt", tmp_path / "samples.txt")
    cfg.write_text(json.dumps({"samples_path": "samples.txt"}))
    write_params(tmp_path / "truth.json", HydroParams(3e4, 2e4, 2e6, 0.5))
    ds = tmp_path / "ds"
    assert main(["make-dataset", "--config", str(cfg), "--truth", str(tmp_path / "truth.json"), "--out", str(ds)]) == 0
    manifest = json.loads((ds / "manifest.json").read_text())
    manifest["samples"] = [e for e in manifest["samples"] if e["kind"] != "slip"]
    (ds / "manifest.json").write_text(json.dumps(manifest))
    out = tmp_path / "p.json"
    assert main(["calibrate", "--config", str(cfg), "--dataset", str(ds), "--out", str(out)]) == EXIT_DATA
    assert "'mu'" in capsys.readouterr().err
    assert not out.exists()


def test_calibrate_degenerate_exit(tmp_path):
    cfg = tmp_path / "cfg.json"
    shutil.copy(CASE / "samples.txt", tmp_path / "samples.txt")
    cfg.write_text(json.dumps({"samples_path": "samples.txt"}))
    write_params(tmp_path / "truth.json", HydroParams(3e4, 2e4, 2e6, 0.5))
    ds = tmp_path / "ds"
    main(["make-dataset", "--config", str(cfg), "--truth", str(tmp_path / "truth.json"), "--out", str(ds)])
    manifest = json.loads((ds / "manifest.json").read_text())
    # relabelling shear data as slip leaves the friction stage without any saturation
    for e in manifest["samples"]:
        if e["kind"] == "slip":
            e["kind"] = "roll"
    for e in manifest["samples"]:
        if e["kind"] == "shear":
            e["kind"] = "slip"
            break
    (ds / "manifest.json").write_text(json.dumps(manifest))
    rc = main(["calibrate", "--config", str(cfg), "--dataset", str(ds), "--out", str(tmp_path / "p.json")])
    assert rc == EXIT_DEGENERATE


def test_compare_identical_and_oracle(tmp_path, grid, rng, capsys):
    a = MarkerField(grid, rng.normal(size=(grid.rows, grid.cols, 2)), "px")
    b = MarkerField(grid, rng.normal(size=(grid.rows, grid.cols, 2)), "px")
    write_field(tmp_path / "a.field", a)
    write_field(tmp_path / "b.field", b)
    js = tmp_path / "r.json"
    assert main(["compare", "--pred", str(tmp_path / "a.field"), "--truth", str(tmp_path / "a.field"),
                 "--json", str(js)]) == 0
    rep = json.loads(js.read_text())
    assert rep["overall"]["rmse_px"] == 0.0 and rep["overall"]["cs"] == 1.0
    assert main(["compare", "--pred", str(tmp_path / "a.field"), "--truth", str(tmp_path / "b.field"),
                 "--json", str(js), "--plot", str(tmp_path / "plots")]) == 0
    rep = json.loads(js.read_text())
    la, lb = [tuple(v) for v in a.flat()], [tuple(v) for v in b.flat()]
    assert abs(rep["pairs"][0]["rmse_px"] - oracles.rmse(la, lb)) <= 1e-12
    assert abs(rep["pairs"][0]["cs"] - oracles.cosine(la, lb, 0.3)) <= 1e-12
    assert (tmp_path / "plots" / "b.png").exists() and (tmp_path / "plots" / "b.txt").exists()


def test_compare_mixed_units(tmp_path, grid, rng):
    a = MarkerField(grid, rng.normal(size=(grid.rows, grid.cols, 2)), "px")
    b = MarkerField(grid, rng.normal(size=(grid.rows, grid.cols, 2)), "px")
    write_field(tmp_path / "a_px.field", a)
    write_field(tmp_path / "a_m.field", a.to_meters())
    write_field(tmp_path / "b.field", b)
    reps = []
    for name in ("a_px.field", "a_m.field"):
        js = tmp_path / f"{name}.json"
        main(["compare", "--pred", str(tmp_path / name), "--truth", str(tmp_path / "b.field"), "--json", str(js)])
        reps.append(json.loads(js.read_text())["overall"])
    assert reps[0]["rmse_px"] == pytest.approx(reps[1]["rmse_px"], rel=1e-12)
    assert reps[0]["cs"] == pytest.approx(reps[1]["cs"], rel=1e-12)


def test_compare_groups_and_mismatch(tmp_path, grid, rng):
    for d in ("pred", "truth"):
        (tmp_path / d).mkdir()
        for n in ("shear_000", "shear_001", "twist_000"):
            write_field(tmp_path / d / f"{n}.field",
                        MarkerField(grid, rng.normal(size=(grid.rows, grid.cols, 2)), "px"))
    js = tmp_path / "r.json"
    assert main(["compare", "--pred", str(tmp_path / "pred"), "--truth", str(tmp_path / "truth"),
                 "--json", str(js)]) == 0
    rep = json.loads(js.read_text())
    assert set(rep["groups"]) == {"shear", "twist"} and rep["groups"]["shear"]["pairs"] == 2
    write_field(tmp_path / "small.field", MarkerField.zeros(TactileGrid.centered(3, 3), "px"))
    assert main(["compare", "--pred", str(tmp_path / "small.field"),
                 "--truth", str(tmp_path / "truth" / "twist_000.field")]) == EXIT_DATA


def test_bench_and_sample_surface(tmp_path, capsys):
    rec = tmp_path / "bench.json"
    cfg = json.loads((CASE / "config.json").read_text())
    cfg.update(samples_path=str(CASE / "samples.txt"), params_path=str(CASE / "params.json"),
               fots={"lambda_d": 3e4, "lambda_s": 1.5e4, "lambda_t": 1e4, "shear_max": 1e-3, "twist_max": 0.1})
    (tmp_path / "cfg.json").write_text(json.dumps(cfg))
    assert main(["bench", "--config", str(tmp_path / "cfg.json"), "--env-counts", "1", "2", "--steps", "3",
                 "--warmup", "1", "--models", "hydroshear", "fots_reimpl", "--records", str(rec)]) == 0
    doc = json.loads(rec.read_text())
    assert set(doc["beta"]) == {"hydroshear", "fots_reimpl"}
    assert "scaling exponent" in capsys.readouterr().out
    out = tmp_path / "s.txt"
    assert main(["sample-surface", "--shape", '{"shape": "box", "half_extents": [0.01, 0.01, 0.005]}',
                 "--count", "50", "--out", str(out)]) == 0
    assert out.read_text().startswith("# tacshear-surface-samples v1")
    assert main(["sample-surface", "--shape", "{bad", "--out", str(out)]) == EXIT_DATA


def test_console_entry_point():
    r = subprocess.run([sys.executable, "-m", "tacshear.cli", "--help"], capture_output=True, text=True)
    assert r.returncode == 0
    for cmd in ("simulate", "calibrate", "compare", "bench", "sample-surface"):
        assert cmd in r.stdout
