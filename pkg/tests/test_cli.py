import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spectral_lab.cli import ENV_OUT, main
from spectral_lab.config import EXPERIMENT_NAMES, config_digest, load_config, validate_config
from spectral_lab.errors import ConfigError
from spectral_lab.reports import csv_text, emit_report, read_csv

ROOT = Path(__file__).resolve().parents[1]
GOLDEN_CONFIG = ROOT / "configs" / "golden.json"
GOLDEN_DIR = Path(__file__).parent / "golden"

BASE = {"manifold": {"n": 1, "N": 8}, "operator": {"symbol": "shifted-laplacian"}, "experiments": []}


def write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return p


def test_list_experiments(capsys):
    assert main(["list-experiments"]) == 0
    assert capsys.readouterr().out.split() == list(EXPERIMENT_NAMES)


def test_empty_experiment_list(tmp_path):
    out = tmp_path / "out"
    assert main(["run", str(write(tmp_path, BASE)), "--out", str(out)]) == 0
    assert [p.name for p in out.iterdir()] == ["run_manifest.json"]
    manifest = json.loads((out / "run_manifest.json").read_text())
    assert manifest["experiments"] == [] and manifest["passed"]


def test_unknown_experiment_name(tmp_path, capsys):
    cfg = dict(BASE, experiments=[{"name": "bogus"}])
    assert main(["run", str(write(tmp_path, cfg)), "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert "experiments/0/name" in err and "bogus" in err
    assert not (tmp_path / "o").exists()


def test_unknown_keys_rejected(tmp_path, capsys):
    cfg = dict(BASE, experiments=[{"name": "spectra", "lambda": 3}])
    assert main(["validate", str(write(tmp_path, cfg))]) == 2
    assert "'lambda'" in capsys.readouterr().err
    with pytest.raises(ConfigError) as info:
        validate_config(dict(BASE, extra=1))
    assert "extra" in str(info.value)


def test_syntax_error_reports_line(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text('{\n  "manifold": {"n": 1,,}\n}')
    assert main(["validate", str(p)]) == 2
    assert "line 2" in capsys.readouterr().err


def test_box_errors_name_field():
    bad = dict(BASE, sensor={"boxes": [[[0.5, 0.2]]]})
    with pytest.raises(ConfigError) as info:
        validate_config(bad)
    assert info.value.where == "sensor/boxes/0/0"
    with pytest.raises(ConfigError):
        validate_config(dict(BASE, manifold={"n": 2, "N": 3}, sensor={"boxes": [[[0, 0.5]]]}))


def test_missing_config_file(tmp_path):
    assert main(["validate", str(tmp_path / "nope.json")]) == 2


@given(st.permutations(["manifold", "operator", "experiments", "seed"]))
def test_digest_stable_under_reordering(order):
    cfg = dict(BASE, seed=3)
    shuffled = {k: cfg[k] for k in order}
    assert config_digest(shuffled) == config_digest(cfg)


def test_failure_isolation(tmp_path):
    cfg = dict(BASE, experiments=[{"name": "control", "modes": 500}, {"name": "spectra", "lambda_max": 10}])
    out = tmp_path / "out"
    assert main(["run", str(write(tmp_path, cfg)), "--out", str(out)]) == 1
    manifest = json.loads((out / "run_manifest.json").read_text())
    first, second = manifest["experiments"]
    assert not first["passed"] and "error" in first
    assert second["passed"]
    assert not (out / "00_control.csv").exists()
    assert (out / "01_spectra.csv").exists()


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["run", str(write(tmp_path, BASE)), "--out", str(blocker / "sub")]) == 3


def test_env_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv(ENV_OUT, str(tmp_path / "env"))
    assert main(["run", str(write(tmp_path, BASE))]) == 0
    assert (tmp_path / "env" / "run_manifest.json").exists()


def test_seed_determinism_and_jobs(tmp_path):
    cfg = dict(BASE, manifold={"n": 1, "N": 16}, seed=5, experiments=[
        {"name": "doubling", "lambdas": [5, 10, 15], "random_packets": 3},
        {"name": "interpolation", "lambda": 15, "packets": 3, "panels": 16},
        {"name": "control", "modes": 6}])
    p = write(tmp_path, cfg)
    outs = [tmp_path / "a", tmp_path / "b", tmp_path / "c"]
    main(["run", str(p), "--out", str(outs[0])])
    main(["run", str(p), "--out", str(outs[1])])
    main(["run", str(p), "--out", str(outs[2]), "--jobs", "3"])
    for name in ("00_doubling.csv", "01_interpolation.csv", "02_control.csv"):
        bodies = {(o / name).read_bytes() for o in outs}
        assert len(bodies) == 1
    reseeded = tmp_path / "d"
    main(["run", str(p), "--out", str(reseeded), "--seed", "6"])
    assert (reseeded / "02_control.csv").read_bytes() != (outs[0] / "02_control.csv").read_bytes()


def test_manifest_fields(tmp_path):
    cfg = dict(BASE, experiments=[{"name": "spectra", "lambda_max": 10}])
    out = tmp_path / "out"
    main(["run", str(write(tmp_path, cfg)), "--out", str(out)])
    manifest = json.loads((out / "run_manifest.json").read_text())
    assert manifest["config_digest"] == load_config(tmp_path / "cfg.json").digest
    entry = manifest["experiments"][0]
    assert entry["wall_clock"] >= 0 and entry["passed"] is True
    side = json.loads((out / "00_spectra.json").read_text())
    assert side["tolerances"]["residual"] == 1e-8 and side["passed"] is True


def test_golden_csvs_byte_identical(tmp_path):
    out = tmp_path / "golden"
    assert main(["run", str(GOLDEN_CONFIG), "--out", str(out)]) == 0
    goldens = sorted(GOLDEN_DIR.glob("*.csv"))
    assert len(goldens) == 9
    for g in goldens:
        assert (out / g.name).read_bytes() == g.read_bytes(), g.name


@given(st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64), min_size=1, max_size=20))
def test_csv_roundtrip_exact(values):
    text = csv_text(["v"], [[v] for v in values])
    parsed = [float(line) for line in text.splitlines()[1:]]
    assert parsed == values


def test_emit_report_schemas(tmp_path, heat_basis, sensor):
    from spectral_lab.control import ControlProblem, cost_curve
    from spectral_lab.inequality import observability_report

    rep = observability_report(heat_basis, sensor, [5, 10, 15])
    csv_path, json_path = emit_report(rep, tmp_path / "obs", {"tolerance": 0.9})
    cols, data = read_csv(csv_path)
    assert cols == ["lambda", "C", "sigma_min"]
    assert np.array_equal(data[:, 1], rep.C)
    assert json.loads(json_path.read_text())["tolerance"] == 0.9
    b = heat_basis.first(5)
    curve = cost_curve(ControlProblem(b, 1.0, 1.0, sensor, np.zeros(5)), [0.2, 0.5, 1.0])
    cols, data = read_csv(emit_report(curve, tmp_path / "cost")[0])
    assert cols == ["T", "C_T", "flag"]
    assert np.array_equal(data[:, 1], curve.C_T)
