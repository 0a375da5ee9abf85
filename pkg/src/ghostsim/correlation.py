"""Intensity-correlation imaging: the two-photon identity, the advanced-wave
PSF, and streaming ensemble estimators for PGI and CGI.

Throughout, the object transmittance is folded into the object arm,
``Gt[x, j] = t(x) * G[x, j]``, since the bucket only sees transmitted light.
With ``t == 1`` the formulas reduce to the bare propagators.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionError, InsufficientDataError, ParameterError
from .optics import ComplexField, PlaneGrid, PropagatorMatrix
from .sources import SourceModel, SourceRealization, pattern_block

__all__ = [
    "ObjectSpec",
    "bucket_signal",
    "eq1_bruteforce",
    "eq1_factored",
    "eq1_profile",
    "image_term",
    "coincidence_kernel",
    "klyshko_psf",
    "CorrelationAccumulator",
    "ImageResult",
    "accumulate",
    "merge",
    "finalize",
    "cgi_expected_image",
    "ensemble_image",
    "gaussian_covariance_profile",
]

DEFAULT_CHUNK = 1024


@dataclass(frozen=True, eq=False)
class ObjectSpec:
    """Complex amplitude transmittance on the object grid, ``|t| <= 1``."""

    grid: PlaneGrid
    transmittance: np.ndarray

    def __post_init__(self):
        t = np.array(self.transmittance, dtype=complex)
        if t.shape != (self.grid.n_points,):
            raise DimensionError(f"transmittance has shape {t.shape}, grid has {self.grid.n_points} points")
        if np.any(np.abs(t) > 1 + 1e-12):
            raise ParameterError(f"|t| must be <= 1, max is {np.abs(t).max():.6g}")
        t.setflags(write=False)
        object.__setattr__(self, "transmittance", t)

    @property
    def power_transmission(self) -> np.ndarray:
        """``|t(x)|^2``, the ideal image."""
        t = self.transmittance
        return t.real**2 + t.imag**2

    @classmethod
    def uniform(cls, grid: PlaneGrid, value: complex = 1.0) -> "ObjectSpec":
        return cls(grid, np.full(grid.n_points, value, dtype=complex))


def bucket_signal(field_at_object: ComplexField, obj: ObjectSpec) -> float:
    """Bucket detector reading ``sum_x |t(x)|^2 |E(x)|^2 * pitch``."""
    if field_at_object.grid != obj.grid:
        raise DimensionError("field grid does not match object grid")
    e = field_at_object.amplitudes
    return float(np.sum(obj.power_transmission * (e.real**2 + e.imag**2)) * obj.grid.pitch)


def _check_arms(g_obj: PropagatorMatrix, g_ccd: PropagatorMatrix, obj: ObjectSpec | None = None):
    if g_obj.src != g_ccd.src:
        raise DimensionError("object and CCD propagators must share the source grid")
    if obj is not None and obj.grid.n_points != g_obj.dst.n_points:
        raise DimensionError(
            f"object has {obj.grid.n_points} points, object propagator maps to {g_obj.dst.n_points}"
        )


def _folded(g_obj: PropagatorMatrix, obj: ObjectSpec) -> np.ndarray:
    return obj.transmittance[:, None] * g_obj.entries


def _check_index(i: int, n: int, name: str) -> int:
    if not 0 <= i < n:
        raise IndexError(f"{name} index {i} out of range [0, {n})")
    return int(i)


def eq1_bruteforce(g_obj: PropagatorMatrix, g_ccd: PropagatorMatrix, obj: ObjectSpec, y: int) -> float:
    """Symmetrised two-photon sum ``(1/2) sum_{j,k,x} |Gt[x,j] g[y,k] + Gt[x,k] g[y,j]|^2``.

    Direct O(n_s^2 n_x) evaluation; meant as an oracle for small instances.
    """
    _check_arms(g_obj, g_ccd, obj)
    y = _check_index(y, g_ccd.dst.n_points, "ccd")
    a = _folded(g_obj, obj)
    b = g_ccd.entries[y]
    amp = a[:, :, None] * b[None, None, :] + a[:, None, :] * b[None, :, None]
    return 0.5 * float(np.sum(amp.real**2 + amp.imag**2))


def eq1_factored(g_obj: PropagatorMatrix, g_ccd: PropagatorMatrix, obj: ObjectSpec, y: int) -> float:
    """``<I_b><I_y> + sum_x |sum_j Gt[x,j] conj(g[y,j])|^2`` at one CCD pixel.

    The sum over object points sits outside the modulus: the bucket adds
    object points incoherently, source points add coherently.
    """
    _check_arms(g_obj, g_ccd, obj)
    y = _check_index(y, g_ccd.dst.n_points, "ccd")
    a = _folded(g_obj, obj)
    b = g_ccd.entries[y]
    mean_b = np.sum(np.abs(a) ** 2)
    mean_y = np.sum(np.abs(b) ** 2)
    cross = a @ b.conj()
    return float(mean_b * mean_y + np.sum(np.abs(cross) ** 2))


def coincidence_kernel(g_obj: PropagatorMatrix, g_ccd: PropagatorMatrix) -> np.ndarray:
    """``K[x, y] = |sum_j G[x,j] conj(g[y,j])|^2``, the point-object image kernel."""
    _check_arms(g_obj, g_ccd)
    c = g_obj.entries @ g_ccd.entries.conj().T
    return c.real**2 + c.imag**2


def image_term(g_obj: PropagatorMatrix, g_ccd: PropagatorMatrix, obj: ObjectSpec) -> np.ndarray:
    """Correlation term beyond the background, for every CCD pixel."""
    _check_arms(g_obj, g_ccd, obj)
    return obj.power_transmission @ coincidence_kernel(g_obj, g_ccd)


def eq1_profile(g_obj: PropagatorMatrix, g_ccd: PropagatorMatrix, obj: ObjectSpec) -> np.ndarray:
    """:func:`eq1_factored` evaluated at every CCD pixel at once."""
    _check_arms(g_obj, g_ccd, obj)
    mean_b = np.sum(np.abs(_folded(g_obj, obj)) ** 2)
    mean_y = np.sum(np.abs(g_ccd.entries) ** 2, axis=1)
    return mean_b * mean_y + image_term(g_obj, g_ccd, obj)


def klyshko_psf(g_obj: PropagatorMatrix, g_ccd: PropagatorMatrix, x: int) -> ComplexField:
    """Advanced-wave point spread function for object point ``x``.

    Light leaving ``x`` runs backwards to the source through ``conj(G[x, :])``
    and forwards to the CCD through ``g``: ``out[y] = sum_j conj(G[x,j]) g[y,j]``.
    The transmittance is not included.
    """
    _check_arms(g_obj, g_ccd)
    x = _check_index(x, g_obj.dst.n_points, "object")
    return ComplexField(g_ccd.dst, g_ccd.entries @ g_obj.entries[x].conj())


def gaussian_covariance_profile(model: SourceModel, g_obj: PropagatorMatrix, g_ccd: PropagatorMatrix,
                                obj: ObjectSpec) -> np.ndarray:
    """Expected ``Cov(B, I_y)`` for a circular Gaussian source.

    By the Gaussian moment theorem ``Cov(I_x, I_y) = |Gamma[x, y]|^2``, so the
    bucket covariance is ``pitch * sum_x |t(x)|^2 |Gamma[x, y]|^2``.
    """
    return model.mean_intensity**2 * obj.grid.pitch * image_term(g_obj, g_ccd, obj)


# --- streaming estimator ----------------------------------------------------


class _CompSum:
    """Neumaier-compensated running sum over arrays of fixed shape."""

    __slots__ = ("s", "c")

    def __init__(self, shape=()):
        self.s = np.zeros(shape)
        self.c = np.zeros(shape)

    def add(self, x) -> None:
        s = self.s
        t = s + x
        self.c = self.c + np.where(np.abs(s) >= np.abs(x), (s - t) + x, (x - t) + s)
        self.s = t

    def value(self) -> np.ndarray:
        return self.s + self.c

    def copy(self) -> "_CompSum":
        out = _CompSum()
        out.s = np.array(self.s, copy=True)
        out.c = np.array(self.c, copy=True)
        return out


class CorrelationAccumulator:
    """Running sums for ``<B I_y>``, ``<B>``, ``<I_y>`` and second moments.

    Single-writer. Shard work across several accumulators and :meth:`merge` them.
    """

    def __init__(self, n_ccd: int):
        self.n_ccd = int(n_ccd)
        self.shots = 0
        self._b = _CompSum()
        self._b2 = _CompSum()
        self._iy = _CompSum(self.n_ccd)
        self._iy2 = _CompSum(self.n_ccd)
        self._b_iy = _CompSum(self.n_ccd)

    sum_b = property(lambda self: float(self._b.value()))
    sum_b2 = property(lambda self: float(self._b2.value()))
    sum_iy = property(lambda self: self._iy.value())
    sum_iy2 = property(lambda self: self._iy2.value())
    sum_b_iy = property(lambda self: self._b_iy.value())

    def _check_width(self, n: int) -> None:
        if n != self.n_ccd:
            raise DimensionError(f"CCD vector has {n} entries, accumulator expects {self.n_ccd}")

    def add(self, b: float, i_ccd) -> "CorrelationAccumulator":
        i_ccd = np.asarray(i_ccd, dtype=float)
        self._check_width(i_ccd.shape[-1] if i_ccd.ndim else 1)
        b = float(b)
        self._b.add(b)
        self._b2.add(b * b)
        self._iy.add(i_ccd)
        self._iy2.add(i_ccd * i_ccd)
        self._b_iy.add(b * i_ccd)
        self.shots += 1
        return self

    def add_batch(self, b, i_ccd) -> "CorrelationAccumulator":
        """Add many shots: ``b`` has shape (R,), ``i_ccd`` shape (R, n_ccd)."""
        b = np.asarray(b, dtype=float)
        i_ccd = np.asarray(i_ccd, dtype=float)
        if i_ccd.ndim != 2 or i_ccd.shape[0] != b.shape[0]:
            raise DimensionError(f"batch shapes {b.shape} and {i_ccd.shape} do not line up")
        self._check_width(i_ccd.shape[1])
        if b.size == 0:
            return self
        self._b.add(b.sum())
        self._b2.add((b * b).sum())
        self._iy.add(i_ccd.sum(axis=0))
        self._iy2.add((i_ccd * i_ccd).sum(axis=0))
        self._b_iy.add(b @ i_ccd)
        self.shots += b.shape[0]
        return self

    def merge(self, other: "CorrelationAccumulator") -> "CorrelationAccumulator":
        """Return a new accumulator holding the shots of both."""
        self._check_width(other.n_ccd)
        out = self.copy()
        for name in ("_b", "_b2", "_iy", "_iy2", "_b_iy"):
            mine, theirs = getattr(out, name), getattr(other, name)
            mine.add(theirs.s)
            mine.add(theirs.c)
        out.shots += other.shots
        return out

    def copy(self) -> "CorrelationAccumulator":
        out = CorrelationAccumulator(self.n_ccd)
        for name in ("_b", "_b2", "_iy", "_iy2", "_b_iy"):
            setattr(out, name, getattr(self, name).copy())
        out.shots = self.shots
        return out


def accumulate(acc: CorrelationAccumulator, b: float, i_ccd) -> CorrelationAccumulator:
    return acc.add(b, i_ccd)


def merge(a: CorrelationAccumulator, b: CorrelationAccumulator) -> CorrelationAccumulator:
    return a.merge(b)


@dataclass(frozen=True, eq=False)
class ImageResult:
    """Ghost image estimated from an ensemble of shots.

    ``covariance[y] = <B I_y> - <B><I_y>`` is the image. ``g2`` is NaN where
    ``<B><I_y>`` vanishes.
    """

    grid: PlaneGrid
    covariance: np.ndarray
    g2: np.ndarray
    background: np.ndarray
    shots: int
    mean_bucket: float = 0.0

    @property
    def g2_defined(self) -> np.ndarray:
        return np.isfinite(self.g2)


def finalize(acc: CorrelationAccumulator, grid: PlaneGrid | None = None) -> ImageResult:
    if acc.shots < 2:
        raise InsufficientDataError(f"need at least 2 shots to form an image, have {acc.shots}")
    if grid is None:
        grid = PlaneGrid(acc.n_ccd, 1.0)
    n = acc.shots
    mean_b = acc.sum_b / n
    mean_iy = acc.sum_iy / n
    background = mean_b * mean_iy
    covariance = acc.sum_b_iy / n - background
    g2 = np.full(acc.n_ccd, np.nan)
    ok = background != 0
    g2[ok] = (acc.sum_b_iy[ok] / n) / background[ok]
    return ImageResult(grid, covariance, g2, background, n, mean_b)


# --- ensemble drivers -------------------------------------------------------


def _accumulate_rows(acc: CorrelationAccumulator, rows: np.ndarray, g_obj: PropagatorMatrix,
                     g_ccd: PropagatorMatrix, obj: ObjectSpec) -> CorrelationAccumulator:
    e_obj = rows @ g_obj.entries.T
    e_ccd = rows @ g_ccd.entries.T
    b = (e_obj.real**2 + e_obj.imag**2) @ obj.power_transmission * obj.grid.pitch
    return acc.add_batch(b, e_ccd.real**2 + e_ccd.imag**2)


def _as_rows(patterns, n_src: int) -> np.ndarray:
    if isinstance(patterns, np.ndarray):
        rows = np.asarray(patterns, dtype=complex)
    else:
        rows = np.array([p.field.amplitudes for p in patterns], dtype=complex)
    if rows.size == 0:
        raise InsufficientDataError("empty pattern set")
    if rows.ndim != 2 or rows.shape[1] != n_src:
        raise DimensionError(f"patterns have shape {rows.shape}, source grid has {n_src} points")
    return rows


def cgi_expected_image(patterns: Sequence[SourceRealization] | np.ndarray, g_obj: PropagatorMatrix,
                       g_ccd: PropagatorMatrix, obj: ObjectSpec) -> ImageResult:
    """Deterministic full pass over a fixed pattern set.

    For each pattern the bucket reading and the computed CCD intensities are
    accumulated; the only noise is the finiteness of the set. ``patterns`` may
    be realizations or a 2-D array with one pattern per row.
    """
    _check_arms(g_obj, g_ccd, obj)
    rows = _as_rows(patterns, g_obj.src.n_points)
    acc = CorrelationAccumulator(g_ccd.dst.n_points)
    for start in range(0, rows.shape[0], DEFAULT_CHUNK):
        _accumulate_rows(acc, rows[start:start + DEFAULT_CHUNK], g_obj, g_ccd, obj)
    return finalize(acc, g_ccd.dst)


def ensemble_image(model: SourceModel, seed: int, shots: int, g_obj: PropagatorMatrix,
                   g_ccd: PropagatorMatrix, obj: ObjectSpec, *, start: int = 0,
                   threads: int | None = None, chunk: int = DEFAULT_CHUNK) -> ImageResult:
    """Stream ``shots`` source realizations through both arms.

    Shots are split into fixed chunks, each with its own accumulator; chunks
    are merged in shot order, so the result does not depend on ``threads``.
    """
    _check_arms(g_obj, g_ccd, obj)
    if shots < 2:
        raise InsufficientDataError(f"need at least 2 shots to form an image, have {shots}")

    def work(lo: int) -> CorrelationAccumulator:
        count = min(chunk, start + shots - lo)
        rows = pattern_block(model, seed, lo, count)
        return _accumulate_rows(CorrelationAccumulator(g_ccd.dst.n_points), rows, g_obj, g_ccd, obj)

    starts = range(start, start + shots, chunk)
    workers = threads or os.cpu_count() or 1
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(work, starts))
    else:
        parts = [work(lo) for lo in starts]
    acc = CorrelationAccumulator(g_ccd.dst.n_points)
    for part in parts:
        acc = acc.merge(part)
    return finalize(acc, g_ccd.dst)
