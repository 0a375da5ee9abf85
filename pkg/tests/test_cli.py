import csv
import json

import numpy as np
import pytest

from ghostsim import ConfigError, SamplingError
from ghostsim.cli import main
from ghostsim.config import config_from_dict, parse_config

BASE = {
    "wavelength": 5e-7,
    "z_object": 0.0064,
    "source_grid": {"n_points": 16, "pitch": 1e-5},
    "object_grid": {"n_points": 16, "pitch": 1e-5},
    "object": {"builtin": "double-slit", "width": 2e-5, "separation": 8e-5},
}


@pytest.fixture
def cfg_file(tmp_path):
    def make(**changes):
        d = {**BASE, **changes}
        d = {k: v for k, v in d.items() if v is not None}
        p = tmp_path / "config.json"
        p.write_text(json.dumps(d, indent=2))
        return p

    return make


def read_rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_defaults_filled(cfg_file):
    cfg = parse_config(cfg_file(mode="pgi"))
    assert cfg.geometry.z_ccd == cfg.geometry.z_object
    assert cfg.geometry.ccd_grid == cfg.geometry.object_grid
    assert cfg.geometry.symmetric_arms
    assert cfg.source.kind.value == "gaussian" and cfg.source.mean_intensity == 1.0
    assert cfg.mu == 0.1 and cfg.seed == 0


def test_mode_required(cfg_file):
    with pytest.raises(ConfigError, match="mode"):
        parse_config(cfg_file())
    assert parse_config(cfg_file(), {"mode": "psf"}).mode == "psf"


def test_negative_wavelength(cfg_file):
    with pytest.raises(ConfigError, match="wavelength"):
        parse_config(cfg_file(mode="pgi", wavelength=-5e-7))


def test_malformed_json_reports_line(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{\n  "mode": "pgi",\n  "wavelength": ,\n}')
    with pytest.raises(ConfigError, match="line 3"):
        parse_config(p)


@pytest.mark.parametrize("change,field", [
    ({"source_grid": {"n_points": 0, "pitch": 1e-5}}, "source_grid"),
    ({"object_grid": {"n_points": 16}}, "pitch"),
    ({"mu": 1.5}, "mu"),
    ({"shots": 0}, "shots"),
    ({"source": {"kind": "laser"}}, "source.kind"),
    ({"colour": "red"}, "colour"),
    ({"object": None}, "object"),
])
def test_validation_names_field(cfg_file, change, field):
    with pytest.raises(ConfigError, match=field):
        parse_config(cfg_file(mode="pgi", **change))


def test_sampling_guard_rejected_at_parse(cfg_file):
    with pytest.raises(SamplingError):
        parse_config(cfg_file(mode="pgi", z_object=0.001))


def test_missing_object_file(cfg_file):
    with pytest.raises(ConfigError, match="not found"):
        parse_config(cfg_file(mode="pgi", object={"path": "nope.csv"}))


def test_flags_override_json(cfg_file, tmp_path):
    cfg = parse_config(cfg_file(mode="pgi", seed=1, shots=10), {"seed": 5, "shots": None})
    assert cfg.seed == 5 and cfg.shots == 10


def test_manifest_is_accepted_as_config(cfg_file, tmp_path):
    cfg = parse_config(cfg_file(mode="psf"))
    again = config_from_dict({"ghostsim_manifest": 1, "config": cfg.to_dict()})
    assert again.to_dict() == cfg.to_dict()


def test_exit_codes(cfg_file, tmp_path, capsys):
    out = str(tmp_path / "o")
    assert main(["pgi", "--config", str(cfg_file()), "--shots", "1", "--out", out]) == 4
    assert "at least 2 shots" in capsys.readouterr().err
    assert main(["pgi", "--config", str(cfg_file(wavelength=-1)), "--out", out]) == 2
    assert main(["pgi", "--config", str(cfg_file(z_object=0.001)), "--out", out]) == 3
    assert main(["pgi", "--config", str(tmp_path / "missing.json"), "--out", out]) == 2
    err = capsys.readouterr().err.strip().splitlines()
    assert all(line.startswith("ghostsim: error:") for line in err)


def test_verify_eq1_mode(cfg_file, tmp_path):
    out = tmp_path / "v"
    assert main(["verify-eq1", "--config", str(cfg_file()), "--out", str(out)]) == 0
    report = json.loads((out / "eq1_report.json").read_text())
    assert report["instances"] == 100 and report["passed"]
    assert report["max_relative_error"] <= 1e-10
    assert len(read_rows(out / "eq1_instances.csv")) == 100


def test_psf_mode_argmax(tmp_path, cfg_file):
    out = tmp_path / "p"
    p = cfg_file(source_grid={"n_points": 32, "pitch": 1e-5}, object_grid={"n_points": 32, "pitch": 1e-5},
                 z_object=0.0128)
    assert main(["psf", "--config", str(p), "--out", str(out)]) == 0
    rows = read_rows(out / "psf.csv")
    for r in rows[4:-4]:
        assert int(r["argmax_y"]) == int(r["x_index"])
    assert (out / "kernel.pgm").exists() and (out / "kernel.pgm.json").exists()
    m = json.loads((out / "manifest.json").read_text())
    assert m["mode"] == "psf" and len(m["geometry_hash"]) == 64
    assert set(m["artifacts"]) == {"psf.csv", "kernel.pgm"}


@pytest.mark.parametrize("mode,files", [
    ("pgi", ["image.csv"]),
    ("cgi", ["image.csv"]),
    ("cgi-photon", ["image.csv"]),
    ("pair-mc", ["histogram.csv", "pair_image.csv"]),
    ("verify-eq1", ["eq1_instances.csv"]),
    ("psf", ["psf.csv"]),
])
def test_rerun_from_manifest_is_byte_identical(cfg_file, tmp_path, mode, files):
    first, second = tmp_path / "a", tmp_path / "b"
    p = cfg_file(shots=3000, pairs=20000, instances=10, seed=11)
    assert main([mode, "--config", str(p), "--out", str(first)]) == 0
    manifest = json.loads((first / "manifest.json").read_text())
    assert manifest["seed"] == 11 and manifest["config"]["mode"] == mode
    assert {"ghostsim", "numpy", "python"} <= set(manifest["versions"])
    assert main(["rerun", "--config", str(first / "manifest.json"), "--out", str(second), "--threads", "2"]) == 0
    for f in files:
        assert (first / f).read_bytes() == (second / f).read_bytes()
        assert manifest["artifacts"][f] == json.loads((second / "manifest.json").read_text())["artifacts"][f]


def test_cgi_pattern_export_and_import(cfg_file, tmp_path):
    out = tmp_path / "e"
    p = cfg_file(shots=500, export_patterns=True)
    assert main(["cgi", "--config", str(p), "--out", str(out)]) == 0
    assert (out / "patterns.bin").exists() and (out / "patterns.bin.json").exists()
    q = cfg_file(shots=500, patterns=str(out / "patterns.bin"))
    assert main(["cgi", "--config", str(q), "--out", str(tmp_path / "i")]) == 0
    a = np.array([float(r["covariance"]) for r in read_rows(out / "image.csv")])
    b = np.array([float(r["covariance"]) for r in read_rows(tmp_path / "i" / "image.csv")])
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12 * np.abs(a).max())


def test_csv_object_through_cli(cfg_file, tmp_path):
    obj = tmp_path / "obj.csv"
    xs = (np.arange(16) - 7.5) * 1e-5
    obj.write_text("x_m,re_t,im_t\n" + "".join(f"{float(x)!r},{1.0 if abs(x) < 3e-5 else 0.0},0\n" for x in xs))
    p = cfg_file(object={"path": "obj.csv"}, shots=2000)
    assert main(["pgi", "--config", str(p), "--out", str(tmp_path / "o")]) == 0
    m = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert m["config"]["object"]["path"] == str(obj.resolve())
