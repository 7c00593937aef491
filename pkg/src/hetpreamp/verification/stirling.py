"""Signed Stirling numbers of the first kind and the comb-density bounds."""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np

from ..amplifiers import TINY, log_gamma_envelope
from ..errors import ConfigError

STIRLING_LMAX = 30


@dataclass(frozen=True)
class StirlingTable:
    """``rows[l][k] = s_l^(k)`` for ``0 <= k <= l <= l_max`` as Python ints."""

    rows: tuple[tuple[int, ...], ...]

    @property
    def l_max(self) -> int:
        return len(self.rows) - 1

    def __call__(self, l: int, k: int) -> int:
        if not 0 <= l <= self.l_max:
            raise ConfigError(f"row {l} outside table (l_max={self.l_max})")
        return self.rows[l][k] if 0 <= k <= l else 0


def stirling_first_kind(l_max: int) -> StirlingTable:
    """Exact table from ``s_{l+1}^(k) = s_l^(k-1) - l s_l^(k)``."""
    if int(l_max) != l_max or l_max < 0:
        raise ConfigError("l_max must be a nonnegative integer")
    if l_max > STIRLING_LMAX:
        raise ConfigError(f"l_max={l_max} exceeds the supported maximum {STIRLING_LMAX}")
    rows = [[1]]
    for l in range(int(l_max)):
        prev = rows[-1] + [0]
        nxt = [0] * (l + 2)
        for k in range(1, l + 2):
            nxt[k] = prev[k - 1] - l * prev[k]
        rows.append(nxt)
    return StirlingTable(tuple(tuple(r) for r in rows))


def falling_factorial_coefficients(table: StirlingTable, l: int) -> list[int]:
    """Coefficients of ``x(x-1)...(x-l+1)`` in powers of ``x``, lowest first."""
    return [table(l, k) for k in range(l + 1)]


def rising_factorial(N: int, l: int) -> int:
    """``(N+l)!/N!`` in integer arithmetic."""
    return factorial(N + l) // factorial(N)


def rising_factorial_from_stirling(table: StirlingTable, N: int, l: int) -> int:
    """``(-1)^l sum_k s_{l+1}^(k+1) (-N)^k``, the Stirling route to ``(N+l)!/N!``."""
    total = sum(table(l + 1, k + 1) * (-N) ** k for k in range(l + 1))
    return (-1) ** l * total


def stirling_density_bounds(n: int, g: int, h) -> tuple[np.ndarray, np.ndarray]:
    """``(gamma / (1 + 1/(12 g n - 1)), gamma)``, which bracket ``p_n^(g)(h)``."""
    if int(n) != n or n < 1:
        raise ConfigError("the bounds hold for photon index n >= 1 only")
    if int(g) != g or g < 1:
        raise ConfigError("gain must be a positive integer")
    h = np.asarray(h, dtype=float)
    if np.any(h < 0):
        raise ConfigError("h must be nonnegative")
    upper = np.atleast_1d(np.exp(log_gamma_envelope(n, g, h)))
    lower = upper / (1.0 + 1.0 / (12.0 * g * n - 1.0))
    upper[upper < TINY] = 0.0
    lower[lower < TINY] = 0.0
    if h.ndim == 0:
        return float(lower[0]), float(upper[0])
    return lower.reshape(h.shape), upper.reshape(h.shape)
