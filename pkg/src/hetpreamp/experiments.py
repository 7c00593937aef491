"""Photon-number comb experiment: tabulation and peak analysis."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import argrelmax
from scipy.stats import poisson

from .amplifiers import preamp_number_density, required_h_points
from .fock import DensityOperator, StateVector

FIG1_GAINS = (1, 100, 1000)
FIG1_MEAN = 12.0


@dataclass(frozen=True)
class CombTable:
    h: np.ndarray
    gains: tuple[int, ...]
    columns: dict[int, np.ndarray]

    def mass(self, g: int) -> float:
        return float(np.trapezoid(self.columns[g], self.h)) if hasattr(np, "trapezoid") else float(np.trapz(self.columns[g], self.h))


def comb_table(state: StateVector | DensityOperator, gains=FIG1_GAINS, h_max: float = 30.0, h_points: int | None = None) -> CombTable:
    """Preamplified number densities for several gains on one shared uniform ``h`` grid."""
    gains = tuple(int(g) for g in gains)
    if h_points is None:
        h_points = max(required_h_points(state, g, h_max) for g in gains)
    h = np.linspace(0.0, h_max, int(h_points))
    cols = {g: preamp_number_density(state, g, 1.0, h).values for g in gains}
    return CombTable(h, gains, cols)


@dataclass(frozen=True)
class PeakCheck:
    n: int
    peak: float | None
    offset: float | None
    mass: float
    poisson_weight: float
    mass_rel_error: float


def comb_peaks(h: np.ndarray, p: np.ndarray, mean: float, n_range=(4, 20)) -> list[PeakCheck]:
    """Locate the maximum nearest each integer ``n`` and integrate ``[n-1/2, n+1/2]``.

    Peaks are refined by a parabola through the top three nodes.
    """
    idx = argrelmax(p)[0]
    peaks = []
    for i in idx:
        a, b, c = p[i - 1], p[i], p[i + 1]
        denom = a - 2 * b + c
        shift = 0.5 * (a - c) / denom if denom != 0 else 0.0
        peaks.append(h[i] + shift * (h[1] - h[0]))
    peaks = np.asarray(peaks)
    out = []
    for n in range(n_range[0], n_range[1] + 1):
        near = peaks[np.abs(peaks - n) < 0.5] if peaks.size else peaks
        pk = float(near[np.argmax([np.interp(x, h, p) for x in near])]) if near.size else None
        sel = (h >= n - 0.5) & (h <= n + 0.5)
        hs, ps = h[sel], p[sel]
        mass = float(np.sum(0.5 * (ps[1:] + ps[:-1]) * np.diff(hs)))
        w = float(poisson.pmf(n, mean))
        out.append(PeakCheck(n, pk, None if pk is None else abs(pk - n), mass, w, abs(mass / w - 1.0)))
    return out


def is_unimodal(p: np.ndarray) -> bool:
    """One interior local maximum (or a monotone profile) and no other."""
    return len(argrelmax(p)[0]) <= 1


def smoothness(h: np.ndarray, p: np.ndarray) -> float:
    """Largest second difference relative to the peak height (small for smooth curves)."""
    return float(np.max(np.abs(np.diff(p, 2))) / np.max(p))
