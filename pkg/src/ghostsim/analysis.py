"""Figures of merit for reconstructed 1-D images and PSFs."""

from __future__ import annotations

import numpy as np

__all__ = ["fwhm", "peak_centers", "contrast_to_noise", "pearson"]


def fwhm(profile, coords, peak: int | None = None) -> float:
    """Full width at half maximum around ``peak`` (default: the global maximum).

    Half-maximum crossings are located by linear interpolation between samples.
    Returns NaN if the profile does not fall below half maximum on both sides.
    """
    profile = np.asarray(profile, dtype=float)
    coords = np.asarray(coords, dtype=float)
    if peak is None:
        peak = int(np.argmax(profile))
    half = profile[peak] / 2.0

    def crossing(step: int) -> float:
        i = peak
        while 0 <= i + step < profile.size:
            j = i + step
            if profile[j] < half:
                frac = (profile[i] - half) / (profile[i] - profile[j])
                return coords[i] + frac * (coords[j] - coords[i])
            i = j
        return np.nan

    return float(abs(crossing(1) - crossing(-1)))


def peak_centers(profile, n_peaks: int = 2, threshold: float = 0.5) -> np.ndarray:
    """Centroids (fractional indices) of the ``n_peaks`` strongest lobes.

    A lobe is a contiguous run of samples above ``threshold * max(profile)``;
    lobes are ranked by their summed weight. Returned in ascending order.
    """
    profile = np.asarray(profile, dtype=float)
    above = profile > threshold * profile.max()
    lobes = []
    i = 0
    while i < profile.size:
        if above[i]:
            j = i
            while j + 1 < profile.size and above[j + 1]:
                j += 1
            idx = np.arange(i, j + 1)
            w = profile[idx]
            lobes.append((w.sum(), float(np.sum(idx * w) / w.sum())))
            i = j + 1
        else:
            i += 1
    lobes.sort(key=lambda t: -t[0])
    return np.sort(np.array([c for _, c in lobes[:n_peaks]]))


def contrast_to_noise(image, signal_mask, background_mask) -> float:
    image = np.asarray(image, dtype=float)
    sig = image[np.asarray(signal_mask, dtype=bool)]
    bg = image[np.asarray(background_mask, dtype=bool)]
    return float((sig.mean() - bg.mean()) / bg.std())


def pearson(a, b) -> float:
    """Normalised (mean-removed) correlation of two profiles."""
    a = np.asarray(a, dtype=float) - np.mean(a)
    b = np.asarray(b, dtype=float) - np.mean(b)
    return float(a @ b / np.sqrt((a @ a) * (b @ b)))
