"""Pseudothermal source realizations and a replayable pattern store for computational imaging.

Every pattern is addressed by ``(seed, shot_index)``. Generation is
counter-based: shot ``r`` draws from a Philox stream keyed by the seed whose
counter starts at ``r`` in its most significant word, so any shot can be
regenerated in O(1) without touching its predecessors. That addressability
is what a computational ghost imaging source needs; its statistics are the
same as the pseudothermal source.
"""

from __future__ import annotations

import enum
import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, NamedTuple

import numpy as np

from .errors import DimensionError, FormatError, ParameterError
from .optics import ComplexField, PlaneGrid, PropagatorMatrix

__all__ = [
    "SourceKind",
    "SourceModel",
    "PatternId",
    "SourceRealization",
    "sample_realization",
    "replay_pattern",
    "pattern_block",
    "mutual_coherence",
    "write_pattern_library",
    "read_pattern_library",
]

_U64 = 1 << 64

# Independent Philox keys per purpose: key = seed + (stream << 64).
PATTERN_STREAM = 0
CLICK_STREAM = 1


class SourceKind(str, enum.Enum):
    GAUSSIAN = "gaussian"
    PHASE_ONLY = "phase-only"


@dataclass(frozen=True)
class SourceModel:
    """Statistical model of the source plane.

    ``GAUSSIAN``: independent circular complex Gaussian amplitudes with
    ``<|E|^2> = mean_intensity``. ``PHASE_ONLY``: modulus ``sqrt(mean_intensity)``
    with independent uniform phases.
    """

    grid: PlaneGrid
    kind: SourceKind = SourceKind.GAUSSIAN
    mean_intensity: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", SourceKind(self.kind))
        if not (self.mean_intensity >= 0 and math.isfinite(self.mean_intensity)):
            raise ParameterError(f"mean_intensity must be non-negative, got {self.mean_intensity!r}")

    @property
    def n_points(self) -> int:
        return self.grid.n_points

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "mean_intensity": self.mean_intensity, "grid": self.grid.to_dict()}


class PatternId(NamedTuple):
    seed: int
    shot_index: int


@dataclass(frozen=True, eq=False)
class SourceRealization:
    field: ComplexField
    pattern_id: PatternId

    def __eq__(self, other):
        if not isinstance(other, SourceRealization):
            return NotImplemented
        return self.pattern_id == other.pattern_id and self.field == other.field

    __hash__ = None


def _check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed < _U64:
        raise ParameterError(f"seed must fit in an unsigned 64-bit integer, got {seed}")
    return seed


def shot_generator(seed: int, shot_index: int, stream: int = PATTERN_STREAM) -> np.random.Generator:
    """Generator for one shot; a pure function of its arguments."""
    seed = _check_seed(seed)
    if shot_index < 0:
        raise ParameterError(f"shot_index must be non-negative, got {shot_index}")
    bitgen = np.random.Philox(key=seed + (stream << 64), counter=[0, 0, 0, int(shot_index)])
    return np.random.Generator(bitgen)


def _draw(model: SourceModel, rng: np.random.Generator) -> np.ndarray:
    n = model.n_points
    if model.kind is SourceKind.GAUSSIAN:
        z = rng.standard_normal((n, 2))
        amps = (z[:, 0] + 1j * z[:, 1]) * math.sqrt(model.mean_intensity / 2.0)
    else:
        phase = rng.random(n) * (2.0 * math.pi)
        amps = math.sqrt(model.mean_intensity) * np.exp(1j * phase)
    return amps


def sample_realization(model: SourceModel, seed: int, shot_index: int) -> SourceRealization:
    rng = shot_generator(seed, shot_index)
    field = ComplexField(model.grid, _draw(model, rng))
    return SourceRealization(field, PatternId(int(seed), int(shot_index)))


def replay_pattern(model: SourceModel, pattern_id: PatternId) -> SourceRealization:
    """Regenerate the realization identified by ``pattern_id`` bit-for-bit."""
    seed, shot_index = pattern_id
    return sample_realization(model, seed, shot_index)


def pattern_block(model: SourceModel, seed: int, start: int, count: int) -> np.ndarray:
    """Amplitudes of shots ``start .. start + count - 1`` stacked as rows.

    Row ``k`` is identical to ``sample_realization(model, seed, start + k)``.
    """
    out = np.empty((count, model.n_points), dtype=complex)
    for k in range(count):
        out[k] = _draw(model, shot_generator(seed, start + k))
    return out


def mutual_coherence(model: SourceModel, g_obj: PropagatorMatrix, g_ccd: PropagatorMatrix) -> np.ndarray:
    """Cross-plane coherence ``Gamma[x, y] = <E_obj(x) conj(E_ccd(y))>``.

    For independent source points this is ``mean_intensity * sum_j G[x, j] conj(g[y, j])``.
    """
    if g_obj.src != g_ccd.src or g_obj.src.n_points != model.n_points:
        raise DimensionError("object and CCD propagators must share the source grid")
    return model.mean_intensity * (g_obj.entries @ g_ccd.entries.conj().T)


# --- pattern library file format -------------------------------------------

_RECORD_HEADER = struct.Struct("<QI")


def _sidecar_path(path: Path) -> Path:
    return path.with_name(path.name + ".json")


def write_pattern_library(path, model: SourceModel, realizations: Iterable[SourceRealization],
                          seed: int | None = None) -> Path:
    """Write patterns as binary records plus a JSON sidecar.

    Record layout: ``shot_index`` (u64 LE), ``n_points`` (u32 LE), then
    ``n_points`` pairs of float64 LE (re, im). The sidecar holds the seed (if
    the patterns are regenerable), model kind, mean intensity and grid.
    """
    path = Path(path)
    count = 0
    with open(path, "wb") as fh:
        for r in realizations:
            amps = r.field.amplitudes
            fh.write(_RECORD_HEADER.pack(r.pattern_id.shot_index, amps.size))
            pairs = np.empty((amps.size, 2), dtype="<f8")
            pairs[:, 0] = amps.real
            pairs[:, 1] = amps.imag
            fh.write(pairs.tobytes())
            count += 1
    meta = {
        "format": "ghostsim-patterns",
        "version": 1,
        "seed": seed,
        "kind": model.kind.value,
        "mean_intensity": model.mean_intensity,
        "grid": model.grid.to_dict(),
        "records": count,
    }
    _sidecar_path(path).write_text(json.dumps(meta, indent=2) + "\n")
    return path


def read_pattern_library(path) -> tuple[SourceModel, list[SourceRealization], int | None]:
    """Load a pattern library; returns ``(model, realizations, seed)``.

    When the sidecar carries a seed, every record is checked against its
    regeneration and any mismatch raises :class:`FormatError`.
    """
    path = Path(path)
    sidecar = _sidecar_path(path)
    if not sidecar.exists():
        raise FormatError(f"pattern library sidecar not found: {sidecar}")
    try:
        meta = json.loads(sidecar.read_text())
        model = SourceModel(PlaneGrid.from_dict(meta["grid"]), SourceKind(meta["kind"]),
                            float(meta["mean_intensity"]))
    except (KeyError, ValueError, TypeError) as exc:
        raise FormatError(f"invalid pattern library sidecar {sidecar}: {exc}") from exc
    seed = meta.get("seed")

    data = path.read_bytes()
    pos = 0
    out = []
    while pos < len(data):
        if pos + _RECORD_HEADER.size > len(data):
            raise FormatError(f"truncated record header at byte {pos} in {path}")
        shot, n = _RECORD_HEADER.unpack_from(data, pos)
        pos += _RECORD_HEADER.size
        if n != model.n_points:
            raise FormatError(f"record for shot {shot} has {n} points, grid has {model.n_points}")
        nbytes = 16 * n
        if pos + nbytes > len(data):
            raise FormatError(f"truncated record body for shot {shot} in {path}")
        pairs = np.frombuffer(data, dtype="<f8", count=2 * n, offset=pos).reshape(n, 2)
        pos += nbytes
        amps = pairs[:, 0] + 1j * pairs[:, 1]
        r = SourceRealization(ComplexField(model.grid, amps), PatternId(seed if seed is not None else 0, shot))
        if seed is not None and r != replay_pattern(model, r.pattern_id):
            raise FormatError(f"pattern for shot {shot} does not match regeneration from seed {seed}")
        out.append(r)
    if "records" in meta and meta["records"] != len(out):
        raise FormatError(f"sidecar declares {meta['records']} records, file holds {len(out)}")
    return model, out, seed
