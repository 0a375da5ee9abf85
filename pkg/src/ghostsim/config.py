"""Run configuration: JSON parsing, defaults and validation."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError, GhostsimError
from .optics import Geometry, PlaneGrid
from .sources import SourceKind, SourceModel

__all__ = ["MODES", "RunConfig", "parse_config", "config_from_dict"]

MODES = ("pgi", "cgi", "cgi-photon", "pair-mc", "verify-eq1", "psf")
OBJECT_MODES = {"pgi", "cgi", "cgi-photon", "pair-mc"}

_KNOWN_KEYS = {
    "mode", "wavelength", "z_object", "z_ccd", "source_grid", "object_grid", "ccd_grid",
    "source", "object", "shots", "seed", "mu", "instances", "max_size", "tolerance",
    "pairs", "shards", "threads", "output_dir", "patterns", "export_patterns",
}


@dataclass
class RunConfig:
    mode: str
    geometry: Geometry
    source: SourceModel
    object: dict | None = None
    shots: int = 10_000
    seed: int = 0
    mu: float = 0.1
    instances: int = 100
    max_size: int = 16
    tolerance: float = 1e-10
    pairs: int = 1_000_000
    shards: int = 1
    threads: int | None = None
    output_dir: Path = Path("ghostsim-out")
    patterns: Path | None = None
    export_patterns: bool = False
    base_dir: Path = field(default_factory=Path.cwd)

    def to_dict(self) -> dict:
        """Fully resolved configuration, sufficient to repeat the run."""
        g = self.geometry
        obj = dict(self.object) if self.object is not None else None
        if obj is not None and "path" in obj:
            obj["path"] = str((self.base_dir / obj["path"]).resolve())
        return {
            "mode": self.mode,
            "wavelength": g.wavelength,
            "z_object": g.z_object,
            "z_ccd": g.z_ccd,
            "source_grid": g.source_grid.to_dict(),
            "object_grid": g.object_grid.to_dict(),
            "ccd_grid": g.ccd_grid.to_dict(),
            "source": {"kind": self.source.kind.value, "mean_intensity": self.source.mean_intensity},
            "object": obj,
            "shots": self.shots,
            "seed": self.seed,
            "mu": self.mu,
            "instances": self.instances,
            "max_size": self.max_size,
            "tolerance": self.tolerance,
            "pairs": self.pairs,
            "shards": self.shards,
            "threads": self.threads,
            "output_dir": str(self.output_dir),
            "patterns": str(self.patterns) if self.patterns is not None else None,
            "export_patterns": self.export_patterns,
        }


def _number(d: dict, key: str, *, positive: bool = False, default=None) -> float:
    if key not in d or d[key] is None:
        if default is None:
            raise ConfigError(f"{key}: required field missing")
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"{key}: expected a finite number, got {v!r}")
    if positive and v <= 0:
        raise ConfigError(f"{key}: must be positive, got {v!r}")
    return float(v)


def _integer(d: dict, key: str, default: int | None, *, minimum: int = 0) -> int | None:
    v = d.get(key, default)
    if v is None:
        return None
    if isinstance(v, bool) or not isinstance(v, int) and not (isinstance(v, float) and v.is_integer()):
        raise ConfigError(f"{key}: expected an integer, got {v!r}")
    v = int(v)
    if v < minimum:
        raise ConfigError(f"{key}: must be >= {minimum}, got {v}")
    return v


def _grid(d: dict, key: str, default: PlaneGrid | None = None) -> PlaneGrid:
    spec = d.get(key)
    if spec is None:
        if default is None:
            raise ConfigError(f"{key}: required field missing")
        return default
    if not isinstance(spec, dict):
        raise ConfigError(f"{key}: expected an object with n_points and pitch")
    unknown = spec.keys() - {"n_points", "pitch", "center_offset"}
    if unknown:
        raise ConfigError(f"{key}: unknown fields {sorted(unknown)}")
    try:
        n = _integer(spec, "n_points", None, minimum=1)
        if n is None:
            raise ConfigError("n_points: required field missing")
        return PlaneGrid(n, _number(spec, "pitch", positive=True),
                         _number(spec, "center_offset", default=0.0))
    except (ConfigError, GhostsimError) as exc:
        raise ConfigError(f"{key}.{exc}") from exc


def config_from_dict(d: dict, base_dir=None, overrides: dict | None = None) -> RunConfig:
    """Validate a config mapping. ``overrides`` (CLI flags) win over ``d``."""
    if not isinstance(d, dict):
        raise ConfigError("config must be a JSON object")
    if d.get("ghostsim_manifest"):
        d = d["config"]
    d = dict(d)
    for k, v in (overrides or {}).items():
        if v is not None:
            d[k] = v
    unknown = d.keys() - _KNOWN_KEYS
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")

    mode = d.get("mode")
    if mode is None:
        raise ConfigError("mode: required field missing")
    if mode not in MODES:
        raise ConfigError(f"mode: unknown mode {mode!r}; choose from {list(MODES)}")

    wavelength = _number(d, "wavelength", positive=True)
    z_object = _number(d, "z_object", positive=True)
    z_ccd = _number(d, "z_ccd", positive=True, default=z_object)
    source_grid = _grid(d, "source_grid")
    object_grid = _grid(d, "object_grid")
    ccd_grid = _grid(d, "ccd_grid", default=object_grid)
    geometry = Geometry(source_grid, object_grid, ccd_grid, wavelength, z_object, z_ccd)

    src = d.get("source") or {}
    if not isinstance(src, dict):
        raise ConfigError("source: expected an object")
    unknown = src.keys() - {"kind", "mean_intensity"}
    if unknown:
        raise ConfigError(f"source: unknown fields {sorted(unknown)}")
    try:
        kind = SourceKind(src.get("kind", "gaussian"))
    except ValueError:
        raise ConfigError(f"source.kind: expected one of {[k.value for k in SourceKind]}") from None
    mean_intensity = _number(src, "mean_intensity", default=1.0)
    if mean_intensity < 0:
        raise ConfigError("source.mean_intensity: must be non-negative")
    source = SourceModel(source_grid, kind, mean_intensity)

    obj = d.get("object")
    if mode in OBJECT_MODES and obj is None:
        raise ConfigError(f"object: required for mode {mode}")
    if obj is not None and not isinstance(obj, dict):
        raise ConfigError("object: expected an object")

    mu = _number(d, "mu", default=0.1)
    if not 0 < mu <= 1:
        raise ConfigError(f"mu: must lie in (0, 1], got {mu}")
    seed = _integer(d, "seed", 0)
    if seed >= 1 << 64:
        raise ConfigError("seed: must fit in 64 bits")

    base = Path(base_dir) if base_dir is not None else Path.cwd()
    patterns = d.get("patterns")
    if patterns is not None:
        patterns = Path(patterns)
        if not patterns.is_absolute():
            patterns = base / patterns
        if not patterns.exists():
            raise ConfigError(f"patterns: file not found: {patterns}")
    if obj is not None and "path" in obj:
        p = Path(obj["path"])
        if not (p if p.is_absolute() else base / p).exists():
            raise ConfigError(f"object.path: file not found: {p}")

    cfg = RunConfig(
        mode=mode,
        geometry=geometry,
        source=source,
        object=obj,
        shots=_integer(d, "shots", 10_000, minimum=1),
        seed=seed,
        mu=mu,
        instances=_integer(d, "instances", 100, minimum=1),
        max_size=_integer(d, "max_size", 16, minimum=1),
        tolerance=_number(d, "tolerance", positive=True, default=1e-10),
        pairs=_integer(d, "pairs", 1_000_000, minimum=1),
        shards=_integer(d, "shards", 1, minimum=1),
        threads=_integer(d, "threads", None, minimum=1),
        output_dir=Path(d.get("output_dir") or "ghostsim-out"),
        patterns=patterns,
        export_patterns=bool(d.get("export_patterns", False)),
        base_dir=base,
    )
    # reject undersampled geometries before any computation starts
    geometry.check_sampling()
    return cfg


def parse_config(path, overrides: dict | None = None) -> RunConfig:
    """Read and validate a JSON config file (or a run manifest)."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return config_from_dict(d, base_dir=path.parent, overrides=overrides)
