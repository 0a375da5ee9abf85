"""Built-in transmittance masks and CSV object ingestion."""

from __future__ import annotations

import csv
import warnings
from pathlib import Path

import numpy as np

from .correlation import ObjectSpec
from .errors import ConfigError, FormatError
from .optics import PlaneGrid

__all__ = ["single_slit", "double_slit", "grating", "load_object", "read_object_csv", "write_object_csv"]

CSV_COLUMNS = ("x_m", "re_t", "im_t")


def _inside(x: np.ndarray, center: float, width: float, tol: float) -> np.ndarray:
    return np.abs(x - center) <= width / 2.0 + tol


def single_slit(grid: PlaneGrid, width: float, center: float = 0.0) -> ObjectSpec:
    x = grid.coordinates
    return ObjectSpec(grid, _inside(x, center, width, 1e-9 * grid.pitch).astype(complex))


def double_slit(grid: PlaneGrid, width: float, separation: float, center: float = 0.0) -> ObjectSpec:
    """Two open intervals of ``width`` centred at ``center -/+ separation / 2``."""
    x = grid.coordinates
    tol = 1e-9 * grid.pitch
    open_ = _inside(x, center - separation / 2, width, tol) | _inside(x, center + separation / 2, width, tol)
    return ObjectSpec(grid, open_.astype(complex))


def grating(grid: PlaneGrid, period: float, width: float, extent: float | None = None,
            center: float = 0.0) -> ObjectSpec:
    """Slits of ``width`` at every multiple of ``period`` from ``center``, within ``extent``."""
    x = grid.coordinates - center
    phase = np.mod(x + period / 2.0, period) - period / 2.0
    open_ = np.abs(phase) <= width / 2.0 + 1e-9 * grid.pitch
    if extent is not None:
        open_ &= np.abs(x) <= extent / 2.0 + 1e-9 * grid.pitch
    return ObjectSpec(grid, open_.astype(complex))


_BUILTINS = {
    "single-slit": (single_slit, {"width"}, {"center"}),
    "double-slit": (double_slit, {"width", "separation"}, {"center"}),
    "grating": (grating, {"period", "width"}, {"extent", "center"}),
}


def read_object_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Read ``(x_m, t)`` samples from a CSV with header ``x_m,re_t,im_t``."""
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != CSV_COLUMNS:
            raise FormatError(f"{path}: expected columns {','.join(CSV_COLUMNS)}, got {header}")
        xs, ts = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise FormatError(f"{path}:{lineno}: expected 3 columns, got {len(row)}")
            try:
                xs.append(float(row[0]))
                ts.append(complex(float(row[1]), float(row[2])))
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from exc
    if not xs:
        raise FormatError(f"{path}: no samples")
    return np.array(xs), np.array(ts)


def write_object_csv(obj: ObjectSpec, path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for x, t in zip(obj.grid.coordinates, obj.transmittance):
            w.writerow([repr(float(x)), repr(float(t.real)), repr(float(t.imag))])
    return path


def _nearest_resample(xs: np.ndarray, ts: np.ndarray, grid: PlaneGrid) -> np.ndarray:
    order = np.argsort(xs, kind="stable")
    xs, ts = xs[order], ts[order]
    target = grid.coordinates
    hi = np.clip(np.searchsorted(xs, target), 1, max(xs.size - 1, 1))
    lo = hi - 1
    if xs.size == 1:
        return np.full(target.size, ts[0])
    pick = np.where(np.abs(target - xs[lo]) <= np.abs(xs[hi] - target), lo, hi)
    return ts[pick]


def load_object(spec: dict, grid: PlaneGrid, base_dir=None) -> ObjectSpec:
    """Build an :class:`ObjectSpec` on ``grid`` from a config entry.

    ``spec`` is either ``{"builtin": name, ...parameters in meters}`` or
    ``{"path": csv_file}``. CSV samples are resampled to the grid by nearest
    neighbour; moduli above 1 are clamped with a warning.
    """
    if "builtin" in spec:
        name = spec["builtin"]
        if name not in _BUILTINS:
            raise ConfigError(f"object.builtin: unknown object {name!r}; choose from {sorted(_BUILTINS)}")
        fn, required, optional = _BUILTINS[name]
        params = {k: v for k, v in spec.items() if k != "builtin"}
        missing = required - params.keys()
        if missing:
            raise ConfigError(f"object: {name} requires {sorted(missing)}")
        unknown = params.keys() - required - optional
        if unknown:
            raise ConfigError(f"object: unknown parameters {sorted(unknown)} for {name}")
        try:
            obj = fn(grid, **{k: float(v) for k, v in params.items()})
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"object: {exc}") from exc
    elif "path" in spec:
        path = Path(spec["path"])
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        if not path.exists():
            raise ConfigError(f"object.path: file not found: {path}")
        xs, ts = read_object_csv(path)
        t = _nearest_resample(xs, ts, grid)
        mod = np.abs(t)
        if np.any(mod > 1):
            warnings.warn(f"object transmittance clamped to |t| <= 1 at {int(np.sum(mod > 1))} samples",
                          stacklevel=2)
            t = np.where(mod > 1, t / np.where(mod > 0, mod, 1), t)
        obj = ObjectSpec(grid, t)
    else:
        raise ConfigError("object: needs either 'builtin' or 'path'")
    if not np.any(obj.transmittance):
        warnings.warn("object is completely opaque; correlation images will be empty", stacklevel=2)
    return obj
