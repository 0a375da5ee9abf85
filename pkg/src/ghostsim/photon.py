"""Photon-level Monte Carlo.

Two routes to an image at vanishing intensity:

* pair sampling: coincidences drawn one photon pair at a time from the
  normalised two-photon table (pseudothermal ghost imaging with two photons
  in the apparatus);
* single-photon CGI: the bucket sees at most one real photon per pattern,
  and its CCD partner is computed from the replayed pattern.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .correlation import (
    DEFAULT_CHUNK,
    CorrelationAccumulator,
    ImageResult,
    ObjectSpec,
    _check_arms,
    coincidence_kernel,
    finalize,
)
from .errors import DegenerateDistributionError, DimensionError, InsufficientDataError, ParameterError
from .optics import PlaneGrid, PropagatorMatrix
from .sources import CLICK_STREAM, SourceModel, pattern_block

__all__ = [
    "JointDetectionTable",
    "CoincidenceHistogram",
    "PhotonRunConfig",
    "PairImage",
    "joint_table",
    "sample_pairs",
    "image_from_histogram",
    "bucket_calibration",
    "single_photon_cgi",
    "tv_distance",
]


@dataclass(frozen=True, eq=False)
class JointDetectionTable:
    """Normalised joint detection probabilities ``probs[x, y]``.

    Besides ``probs`` the table keeps what is needed to separate the
    accidental background from the correlated term: the singles profiles
    ``singles_x`` and ``singles_y`` (each summing to 1), the fraction
    ``background_fraction`` of all pairs that are accidentals, and ``norm``,
    the unnormalised total.
    """

    probs: np.ndarray
    x_grid: PlaneGrid
    y_grid: PlaneGrid
    singles_x: np.ndarray
    singles_y: np.ndarray
    background_fraction: float
    norm: float


@dataclass(frozen=True, eq=False)
class CoincidenceHistogram:
    counts: np.ndarray
    total: int

    def __post_init__(self):
        if int(np.sum(self.counts)) != self.total:
            raise ValueError("histogram total does not equal the sum of its counts")

    def __add__(self, other: "CoincidenceHistogram") -> "CoincidenceHistogram":
        if self.counts.shape != other.counts.shape:
            raise DimensionError("cannot merge histograms of different shapes")
        return CoincidenceHistogram(self.counts + other.counts, self.total + other.total)


@dataclass(frozen=True)
class PhotonRunConfig:
    shots: int
    mu: float
    seed: int = 0

    def __post_init__(self):
        if not (0 < self.mu <= 1) or not math.isfinite(self.mu):
            raise ParameterError(f"detection rate mu must lie in (0, 1], got {self.mu!r}")
        if self.shots < 1:
            raise ParameterError(f"shots must be positive, got {self.shots}")


@dataclass(frozen=True, eq=False)
class PairImage:
    grid: PlaneGrid
    image: np.ndarray
    total: int


def joint_table(g_obj: PropagatorMatrix, g_ccd: PropagatorMatrix, obj: ObjectSpec) -> JointDetectionTable:
    """Two-photon detection table ``probs[x, y]``.

    ``probs[x, y]`` is proportional to the symmetrised two-photon sum restricted
    to object point ``x``, which factors as ``A[x] B[y] + |sum_j Gt[x,j] conj(g[y,j])|^2``
    with ``A[x] = sum_j |Gt[x,j]|^2`` and ``B[y] = sum_j |g[y,j]|^2``.

    Raises:
        DegenerateDistributionError: the table is identically zero, e.g. an opaque object.
    """
    _check_arms(g_obj, g_ccd, obj)
    folded = obj.transmittance[:, None] * g_obj.entries
    a = np.sum(folded.real**2 + folded.imag**2, axis=1)
    b = np.sum(g_ccd.entries.real**2 + g_ccd.entries.imag**2, axis=1)
    raw = np.outer(a, b) + obj.power_transmission[:, None] * coincidence_kernel(g_obj, g_ccd)
    norm = float(raw.sum())
    if not norm > 0:
        raise DegenerateDistributionError("joint detection table is identically zero (opaque object?)")
    return JointDetectionTable(
        probs=raw / norm,
        x_grid=obj.grid,
        y_grid=g_ccd.dst,
        singles_x=a / a.sum(),
        singles_y=b / b.sum(),
        background_fraction=float(a.sum() * b.sum() / norm),
        norm=norm,
    )


def sample_pairs(table: JointDetectionTable, n: int, seed: int, *, shards: int = 1,
                 threads: int | None = None) -> CoincidenceHistogram:
    """Histogram of ``n`` i.i.d. photon pairs drawn from ``table``.

    The draws are split into ``shards`` near-equal blocks, each with a
    generator seeded from ``(seed, shard_index)``; the result depends on
    ``seed`` and ``shards`` but not on ``threads``.
    """
    if n < 1:
        raise ParameterError(f"need at least one pair, got n={n}")
    if shards < 1:
        raise ParameterError("shards must be positive")
    p = table.probs.ravel()
    p = p / p.sum()
    sizes = [n // shards + (1 if k < n % shards else 0) for k in range(shards)]

    def draw(k: int) -> np.ndarray:
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), k])))
        return rng.multinomial(sizes[k], p)

    workers = min(shards, threads or os.cpu_count() or 1)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(draw, range(shards)))
    else:
        parts = [draw(k) for k in range(shards)]
    counts = np.sum(parts, axis=0).reshape(table.probs.shape).astype(np.int64)
    return CoincidenceHistogram(counts, int(n))


def tv_distance(p, q) -> float:
    """Total-variation distance, half the L1 difference of two distributions."""
    p = np.asarray(p, dtype=float).ravel()
    q = np.asarray(q, dtype=float).ravel()
    return 0.5 * float(np.abs(p / p.sum() - q / q.sum()).sum())


def image_from_histogram(h: CoincidenceHistogram, table: JointDetectionTable) -> PairImage:
    """Coincidence profile over ``y`` minus the accidental background.

    Accidentals follow the product of the singles profiles and make up
    ``table.background_fraction`` of all pairs. The remainder is rescaled by
    ``table.norm`` so that a histogram equal to ``n * probs`` returns the
    analytic correlation term ``sum_x |t(x)|^2 K[x, y]`` exactly.
    """
    if h.total < 1:
        raise InsufficientDataError("histogram holds no coincidences")
    if h.counts.shape != table.probs.shape:
        raise DimensionError(f"histogram shape {h.counts.shape} does not match table {table.probs.shape}")
    column = np.sum(h.counts, axis=0) / h.total
    image = table.norm * (column - table.background_fraction * table.singles_y)
    return PairImage(table.y_grid, image, h.total)


def _bucket_rows(rows: np.ndarray, g_obj: PropagatorMatrix, obj: ObjectSpec) -> np.ndarray:
    e = rows @ g_obj.entries.T
    return (e.real**2 + e.imag**2) @ obj.power_transmission * obj.grid.pitch


def _chunked(shots: int, chunk: int, threads: int | None, fn) -> list:
    starts = range(0, shots, chunk)
    workers = threads or os.cpu_count() or 1
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, starts))
    return [fn(lo) for lo in starts]


def bucket_calibration(model: SourceModel, seed: int, shots: int, g_obj: PropagatorMatrix,
                       obj: ObjectSpec, *, threads: int | None = None,
                       chunk: int = DEFAULT_CHUNK) -> np.ndarray:
    """Full-intensity bucket reading ``B_r`` for every pattern ``r < shots``."""
    def work(lo: int) -> np.ndarray:
        return _bucket_rows(pattern_block(model, seed, lo, min(chunk, shots - lo)), g_obj, obj)

    return np.concatenate(_chunked(shots, chunk, threads, work))


def single_photon_cgi(model: SourceModel, g_obj: PropagatorMatrix, g_ccd: PropagatorMatrix,
                      obj: ObjectSpec, cfg: PhotonRunConfig, *, threads: int | None = None,
                      chunk: int = DEFAULT_CHUNK) -> ImageResult:
    """Computational ghost imaging with at most one real photon per pattern.

    A calibration pass over the pattern sequence finds ``B_max``. Pattern
    ``r`` then yields a bucket click with probability ``mu * B_r / B_max``;
    the CCD intensity paired with it is computed from the replayed pattern.
    In expectation the covariance equals ``mu / B_max`` times the
    full-intensity CGI covariance on the same patterns.
    """
    _check_arms(g_obj, g_ccd, obj)
    if cfg.shots < 2:
        raise InsufficientDataError(f"need at least 2 shots to form an image, have {cfg.shots}")
    buckets = bucket_calibration(model, cfg.seed, cfg.shots, g_obj, obj, threads=threads, chunk=chunk)
    b_max = float(buckets.max())
    p_click = cfg.mu * buckets / b_max if b_max > 0 else np.zeros_like(buckets)

    rng = np.random.Generator(np.random.Philox(key=int(cfg.seed) + (CLICK_STREAM << 64)))
    clicks = (rng.random(cfg.shots) < p_click).astype(float)

    def work(lo: int) -> CorrelationAccumulator:
        count = min(chunk, cfg.shots - lo)
        # simulated partner: the CCD field is recomputed from the pattern id alone
        e = pattern_block(model, cfg.seed, lo, count) @ g_ccd.entries.T
        acc = CorrelationAccumulator(g_ccd.dst.n_points)
        return acc.add_batch(clicks[lo:lo + count], e.real**2 + e.imag**2)

    acc = CorrelationAccumulator(g_ccd.dst.n_points)
    for part in _chunked(cfg.shots, chunk, threads, work):
        acc = acc.merge(part)
    return finalize(acc, g_ccd.dst)
