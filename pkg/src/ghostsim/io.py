"""Result writers: CSV tables, 16-bit PGM matrices and run manifests."""

from __future__ import annotations

import csv
import hashlib
import json
import platform
from pathlib import Path

import numpy as np

from .correlation import ImageResult
from .photon import CoincidenceHistogram

__all__ = [
    "fmt",
    "write_csv",
    "write_image_csv",
    "write_histogram_csv",
    "write_pgm",
    "read_pgm",
    "sha256_file",
    "geometry_hash",
    "write_manifest",
]

IMAGE_COLUMNS = ("y_coordinate_m", "covariance", "g2", "background")


def fmt(v) -> str:
    """Shortest round-trip decimal form; stable across runs."""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def write_image_csv(path, result: ImageResult) -> Path:
    rows = zip(result.grid.coordinates, result.covariance, result.g2, result.background)
    return write_csv(path, IMAGE_COLUMNS, rows)


def write_histogram_csv(path, h: CoincidenceHistogram) -> Path:
    nx, ny = h.counts.shape
    rows = ((x, y, h.counts[x, y]) for x in range(nx) for y in range(ny))
    return write_csv(path, ("x_index", "y_index", "count"), rows)


def write_pgm(path, matrix, quantity: str = "") -> Path:
    """Write a non-negative matrix as binary 16-bit PGM (P5), row-major.

    Values are normalised so the maximum maps to 65535. The JSON sidecar
    ``<path>.json`` records ``scale`` such that ``value = pixel * scale``.
    """
    path = Path(path)
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2:
        raise ValueError("PGM export needs a 2-D matrix")
    if np.any(m < 0):
        raise ValueError("PGM export needs non-negative values")
    peak = float(m.max()) if m.size else 0.0
    pixels = np.zeros(m.shape, dtype=">u2") if peak == 0 else np.rint(m / peak * 65535).astype(">u2")
    rows, cols = m.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{cols} {rows}\n65535\n".encode("ascii"))
        fh.write(pixels.tobytes())
    sidecar = {
        "format": "pgm-p5-16bit",
        "rows": rows,
        "cols": cols,
        "max_value": 65535,
        "scale": peak / 65535,
        "quantity": quantity,
    }
    path.with_name(path.name + ".json").write_text(json.dumps(sidecar, indent=2) + "\n")
    return path


def read_pgm(path) -> np.ndarray:
    """Read a 16-bit P5 PGM written by :func:`write_pgm` as raw pixel values."""
    data = Path(path).read_bytes()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        start = pos
        while not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos].decode("ascii"))
    pos += 1
    magic, cols, rows, maxval = tokens[0], int(tokens[1]), int(tokens[2]), int(tokens[3])
    if magic != "P5" or maxval != 65535:
        raise ValueError(f"unsupported PGM header {tokens}")
    return np.frombuffer(data, dtype=">u2", count=rows * cols, offset=pos).reshape(rows, cols)


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def geometry_hash(geometry_dict: dict) -> str:
    blob = json.dumps(geometry_dict, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def write_manifest(out_dir, mode: str, config: dict, geometry: dict, artifacts: list[Path],
                   extra: dict | None = None) -> Path:
    from . import __version__

    manifest = {
        "ghostsim_manifest": 1,
        "mode": mode,
        "seed": config.get("seed"),
        "config": config,
        "geometry_hash": geometry_hash(geometry),
        "versions": {
            "ghostsim": __version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
        },
        "artifacts": {p.name: sha256_file(p) for p in artifacts},
    }
    if extra:
        manifest["results"] = extra
    path = Path(out_dir) / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path
