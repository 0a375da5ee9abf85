"""Plane grids, complex fields and dense Fresnel propagators for 1-D planes.

Propagators are explicit matrices rather than FFT convolutions: the
correlation evaluators need individual entries G[x, j] and g[y, j], and the
grids involved are small (a few hundred points at most).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ParameterError, SamplingError

__all__ = [
    "PlaneGrid",
    "ComplexField",
    "PropagatorMatrix",
    "Geometry",
    "fresnel_propagator",
    "check_fresnel_sampling",
    "propagator_from_matrix",
    "identity_propagator",
    "apply_propagator",
    "intensity",
]


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class PlaneGrid:
    """Uniform 1-D sample grid, symmetric about ``center_offset``.

    Sample ``i`` sits at ``center_offset + (i - (n_points - 1) / 2) * pitch``.
    """

    n_points: int
    pitch: float
    center_offset: float = 0.0

    def __post_init__(self):
        if int(self.n_points) != self.n_points or self.n_points < 1:
            raise ParameterError(f"n_points must be a positive integer, got {self.n_points!r}")
        if not (self.pitch > 0 and math.isfinite(self.pitch)):
            raise ParameterError(f"pitch must be positive and finite, got {self.pitch!r}")
        if not math.isfinite(self.center_offset):
            raise ParameterError("center_offset must be finite")
        object.__setattr__(self, "n_points", int(self.n_points))
        object.__setattr__(self, "pitch", float(self.pitch))
        object.__setattr__(self, "center_offset", float(self.center_offset))

    @property
    def coordinates(self) -> np.ndarray:
        i = np.arange(self.n_points, dtype=float)
        return self.center_offset + (i - (self.n_points - 1) / 2.0) * self.pitch

    @property
    def half_width(self) -> float:
        """Distance from the center to the outermost sample."""
        return (self.n_points - 1) / 2.0 * self.pitch

    @property
    def width(self) -> float:
        """Aperture width ``n_points * pitch``."""
        return self.n_points * self.pitch

    def to_dict(self) -> dict:
        return {"n_points": self.n_points, "pitch": self.pitch, "center_offset": self.center_offset}

    @classmethod
    def from_dict(cls, d: dict) -> "PlaneGrid":
        return cls(int(d["n_points"]), float(d["pitch"]), float(d.get("center_offset", 0.0)))


@dataclass(frozen=True, eq=False)
class ComplexField:
    grid: PlaneGrid
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (self.grid.n_points,):
            raise DimensionError(
                f"field has {amps.shape} samples, grid expects ({self.grid.n_points},)"
            )
        object.__setattr__(self, "amplitudes", _frozen(amps))

    @property
    def power(self) -> float:
        """Total power ``sum |E|^2 * pitch``."""
        return float(np.sum(np.abs(self.amplitudes) ** 2) * self.grid.pitch)

    def __eq__(self, other):
        if not isinstance(other, ComplexField):
            return NotImplemented
        return self.grid == other.grid and np.array_equal(self.amplitudes, other.amplitudes)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class PropagatorMatrix:
    """Dense map from source-plane amplitudes to destination-plane amplitudes.

    ``entries`` has shape ``(dst.n_points, src.n_points)``. ``wavelength`` and
    ``distance`` are ``None`` for user-supplied matrices.
    """

    src: PlaneGrid
    dst: PlaneGrid
    entries: np.ndarray
    wavelength: float | None = None
    distance: float | None = None

    def __post_init__(self):
        m = np.asarray(self.entries, dtype=complex)
        if m.shape != (self.dst.n_points, self.src.n_points):
            raise DimensionError(
                f"propagator entries have shape {m.shape}, "
                f"expected ({self.dst.n_points}, {self.src.n_points})"
            )
        object.__setattr__(self, "entries", _frozen(m))


@dataclass(frozen=True)
class Geometry:
    """Two-arm ghost imaging layout: one source feeding an object arm and a CCD arm."""

    source_grid: PlaneGrid
    object_grid: PlaneGrid
    ccd_grid: PlaneGrid
    wavelength: float
    z_object: float
    z_ccd: float

    def __post_init__(self):
        for name in ("wavelength", "z_object", "z_ccd"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ParameterError(f"{name} must be positive and finite, got {v!r}")

    @classmethod
    def symmetric(cls, source_grid: PlaneGrid, image_grid: PlaneGrid,
                  wavelength: float, z: float) -> "Geometry":
        """Both detectors at the same distance on identical grids."""
        return cls(source_grid, image_grid, image_grid, wavelength, z, z)

    @property
    def symmetric_arms(self) -> bool:
        return self.z_object == self.z_ccd and self.object_grid == self.ccd_grid

    def object_propagator(self) -> PropagatorMatrix:
        return fresnel_propagator(self.source_grid, self.object_grid, self.wavelength, self.z_object)

    def ccd_propagator(self) -> PropagatorMatrix:
        return fresnel_propagator(self.source_grid, self.ccd_grid, self.wavelength, self.z_ccd)

    def check_sampling(self) -> None:
        check_fresnel_sampling(self.source_grid, self.object_grid, self.wavelength, self.z_object)
        check_fresnel_sampling(self.source_grid, self.ccd_grid, self.wavelength, self.z_ccd)

    def to_dict(self) -> dict:
        return {
            "source_grid": self.source_grid.to_dict(),
            "object_grid": self.object_grid.to_dict(),
            "ccd_grid": self.ccd_grid.to_dict(),
            "wavelength": self.wavelength,
            "z_object": self.z_object,
            "z_ccd": self.z_ccd,
        }


def check_fresnel_sampling(src: PlaneGrid, dst: PlaneGrid, wavelength: float, distance: float) -> None:
    """Raise :class:`SamplingError` if the quadratic phase is undersampled.

    The chirp ``pi (x - xi)^2 / (lambda z)`` may advance by at most ``pi``
    between neighbouring samples on either grid, at the largest separation
    ``|x - xi|`` the two grids produce.
    """
    lz = wavelength * distance
    max_sep = abs(dst.center_offset - src.center_offset) + src.half_width + dst.half_width
    pitch = max(src.pitch, dst.pitch)
    step = 2.0 * math.pi * max_sep * pitch / lz
    if step > math.pi * (1.0 + 1e-12):
        admissible = lz / (2.0 * pitch)
        raise SamplingError(
            f"Fresnel sampling violated: phase step {step / math.pi:.4g}*pi per sample "
            f"(max |x - xi| = {max_sep:.6g} m, pitch = {pitch:.6g} m, lambda*z = {lz:.6g} m^2); "
            f"maximum admissible |x - xi| is {admissible:.6g} m"
        )


def fresnel_propagator(src: PlaneGrid, dst: PlaneGrid, wavelength: float, distance: float) -> PropagatorMatrix:
    """Paraxial free-space propagator between two 1-D planes.

    Entry ``[y, j]`` is ``(pitch_src / sqrt(lambda z)) * exp(i pi (x_y - xi_j)^2 / (lambda z) - i pi / 4)``,
    the discretised 1-D Fresnel kernel. Every entry has the same modulus.

    Raises:
        ParameterError: non-positive wavelength or distance.
        SamplingError: the grids undersample the chirp.
    """
    if not (wavelength > 0 and math.isfinite(wavelength)):
        raise ParameterError(f"wavelength must be positive, got {wavelength!r}")
    if not (distance > 0 and math.isfinite(distance)):
        raise ParameterError(f"distance must be positive, got {distance!r}")
    check_fresnel_sampling(src, dst, wavelength, distance)

    lz = wavelength * distance
    sep = dst.coordinates[:, None] - src.coordinates[None, :]
    phase = math.pi / lz * sep**2 - math.pi / 4.0
    entries = (src.pitch / math.sqrt(lz)) * np.exp(1j * phase)
    return PropagatorMatrix(src, dst, entries, float(wavelength), float(distance))


def propagator_from_matrix(entries, src: PlaneGrid, dst: PlaneGrid) -> PropagatorMatrix:
    """Wrap a user-supplied matrix (no sampling guard applies)."""
    return PropagatorMatrix(src, dst, np.asarray(entries, dtype=complex))


def identity_propagator(grid: PlaneGrid) -> PropagatorMatrix:
    return PropagatorMatrix(grid, grid, np.eye(grid.n_points, dtype=complex))


def apply_propagator(field: ComplexField, p: PropagatorMatrix) -> ComplexField:
    if field.grid != p.src:
        raise DimensionError(f"field grid {field.grid} does not match propagator source grid {p.src}")
    return ComplexField(p.dst, p.entries @ field.amplitudes)


def intensity(field: ComplexField) -> np.ndarray:
    a = field.amplitudes
    return a.real**2 + a.imag**2
