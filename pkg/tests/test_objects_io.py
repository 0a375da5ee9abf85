import json

import numpy as np
import pytest

from ghostsim import ConfigError, FormatError, PlaneGrid
from ghostsim.correlation import CorrelationAccumulator, ObjectSpec, finalize
from ghostsim.io import read_pgm, write_histogram_csv, write_image_csv, write_pgm
from ghostsim.objects import double_slit, grating, load_object, single_slit, write_object_csv
from ghostsim.photon import CoincidenceHistogram


def test_double_slit_intervals():
    grid = PlaneGrid(64, 1e-5)
    obj = double_slit(grid, 8e-5, 2.4e-4)
    x = grid.coordinates
    want = (np.abs(x - 1.2e-4) <= 4e-5 + 1e-14) | (np.abs(x + 1.2e-4) <= 4e-5 + 1e-14)
    np.testing.assert_array_equal(obj.transmittance, want.astype(complex))
    assert obj.power_transmission.sum() == 16


def test_single_slit_and_grating():
    grid = PlaneGrid(21, 1.0)
    s = single_slit(grid, 4.0, center=2.0)
    np.testing.assert_array_equal(np.flatnonzero(s.transmittance), [10, 11, 12, 13, 14])
    gr = grating(grid, 5.0, 0.0, extent=12.0)
    np.testing.assert_array_equal(grid.coordinates[np.flatnonzero(gr.transmittance)], [-5.0, 0.0, 5.0])


def test_load_builtin_validation():
    grid = PlaneGrid(8, 1.0)
    with pytest.raises(ConfigError, match="unknown object"):
        load_object({"builtin": "triple-slit"}, grid)
    with pytest.raises(ConfigError, match="separation"):
        load_object({"builtin": "double-slit", "width": 1.0}, grid)
    with pytest.raises(ConfigError, match="unknown parameters"):
        load_object({"builtin": "single-slit", "width": 1.0, "height": 2.0}, grid)
    with pytest.raises(ConfigError):
        load_object({}, grid)


def test_csv_uniform_object(tmp_path):
    p = tmp_path / "o.csv"
    p.write_text("x_m,re_t,im_t\n-1.0,1,0\n0.0,1,0\n1.0,1,0\n")
    obj = load_object({"path": str(p)}, PlaneGrid(10, 0.25))
    np.testing.assert_array_equal(obj.transmittance, np.ones(10))


def test_csv_nearest_neighbour_and_idempotence(tmp_path):
    p = tmp_path / "o.csv"
    xs = np.linspace(-1.03, 0.97, 37)
    rows = "".join(f"{float(x)!r},{float(np.cos(3 * x) * 0.5)!r},{float(np.sin(x) * 0.3)!r}\n" for x in xs)
    p.write_text("x_m,re_t,im_t\n" + rows)
    grid = PlaneGrid(16, 0.12)
    first = load_object({"path": "o.csv"}, grid, base_dir=tmp_path)
    for i, x in enumerate(grid.coordinates):
        k = np.argmin(np.abs(xs - x))
        assert first.transmittance[i] == complex(np.cos(3 * xs[k]) * 0.5, np.sin(xs[k]) * 0.3)
    write_object_csv(first, tmp_path / "round.csv")
    second = load_object({"path": str(tmp_path / "round.csv")}, grid)
    np.testing.assert_array_equal(second.transmittance, first.transmittance)


def test_csv_clamps_with_warning(tmp_path):
    p = tmp_path / "o.csv"
    p.write_text("x_m,re_t,im_t\n0.0,3,4\n1.0,0.5,0\n")
    with pytest.warns(UserWarning, match="clamped"):
        obj = load_object({"path": str(p)}, PlaneGrid(2, 1.0, 0.5))
    assert obj.transmittance[0] == pytest.approx(0.6 + 0.8j)
    assert obj.transmittance[1] == 0.5


def test_csv_format_errors(tmp_path):
    p = tmp_path / "o.csv"
    p.write_text("x,re,im\n0,1,0\n")
    with pytest.raises(FormatError, match="expected columns"):
        load_object({"path": str(p)}, PlaneGrid(2, 1.0))
    p.write_text("x_m,re_t,im_t\n0,1\n")
    with pytest.raises(FormatError, match=":2"):
        load_object({"path": str(p)}, PlaneGrid(2, 1.0))


def test_opaque_object_warns(tmp_path):
    p = tmp_path / "o.csv"
    p.write_text("x_m,re_t,im_t\n0,0,0\n")
    with pytest.warns(UserWarning, match="opaque"):
        load_object({"path": str(p)}, PlaneGrid(3, 1.0))


def test_image_csv_layout(tmp_path):
    acc = CorrelationAccumulator(2)
    acc.add(1.0, [1.0, 0.0]).add(3.0, [2.0, 0.0])
    res = finalize(acc, PlaneGrid(2, 0.5))
    text = write_image_csv(tmp_path / "i.csv", res).read_text().splitlines()
    assert text[0] == "y_coordinate_m,covariance,g2,background"
    assert text[1].split(",") == ["-0.25", "0.5", repr(3.5 / 3.0), "3.0"]
    assert text[2].split(",")[2] == "nan"


def test_histogram_csv(tmp_path):
    h = CoincidenceHistogram(np.array([[1, 0], [2, 3]]), 6)
    lines = write_histogram_csv(tmp_path / "h.csv", h).read_text().splitlines()
    assert lines == ["x_index,y_index,count", "0,0,1", "0,1,0", "1,0,2", "1,1,3"]


def test_pgm_round_trip(tmp_path):
    m = np.array([[0.0, 1.0, 2.0], [4.0, 3.0, 0.5]])
    path = write_pgm(tmp_path / "k.pgm", m, quantity="test")
    raw = path.read_bytes()
    assert raw.startswith(b"P5\n3 2\n65535\n")
    pix = read_pgm(path)
    assert pix.max() == 65535 and pix.shape == (2, 3)
    side = json.loads((tmp_path / "k.pgm.json").read_text())
    np.testing.assert_allclose(pix * side["scale"], m, atol=side["scale"])
    # big-endian 16-bit samples, row-major
    assert raw[-6:-4] == (65535).to_bytes(2, "big")
