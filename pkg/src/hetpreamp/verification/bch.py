"""Disentangling ``exp(A- k-) exp(2 A3 k3) exp(A+ k+) = exp(2 B3 k3 + B+ k+ + B- k-)``.

With ``k+ = a^dag^2/2``, ``k- = a^2/2``, ``k3 = (a^dag a + 1/2)/2`` the
coefficients follow from the faithful 2x2 representation
``k+ -> i sigma+``, ``k- -> i sigma-``, ``2 k3 -> sigma3``:

    cosh G = [(1 - A+ A-) e^{A3} + e^{-A3}] / 2
    B3     = (G / sinh G) [(1 + A+ A-) e^{A3} - e^{-A3}] / 2
    B+-    = (G / sinh G) A+- e^{A3}

with ``G^2 = B3^2 - B+ B-``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import BranchError

SERIES_CUTOFF = 1e-4


@dataclass(frozen=True)
class BchInput:
    A_plus: complex
    A_minus: complex
    A_3: complex


@dataclass(frozen=True)
class BchOutput:
    B_plus: complex
    B_minus: complex
    B_3: complex
    Gamma: complex


def _g_over_sinh(G: complex) -> complex:
    if abs(G) < SERIES_CUTOFF:
        G2 = G * G
        return 1.0 - G2 / 6.0 + 7.0 * G2 * G2 / 360.0
    return G / np.sinh(G)


def bch_coefficients(inp: BchInput) -> BchOutput:
    """Closed-form ``B+-, B3, Gamma`` (principal arcsinh branch for ``Gamma``)."""
    ap, am, a3 = complex(inp.A_plus), complex(inp.A_minus), complex(inp.A_3)
    e, ei = np.exp(a3), np.exp(-a3)
    ch = 0.5 * ((1.0 - ap * am) * e + ei)
    sh = np.sqrt(ch * ch - 1.0 + 0j)
    G = complex(np.arcsinh(sh))
    if abs(np.cosh(G) - ch) > 1e-8 * max(1.0, abs(ch)):
        # arcsinh returned the partner with cosh of opposite sign
        G = 1j * np.pi - G
    if abs(np.sinh(G)) < 1e-300 and abs(G) >= SERIES_CUTOFF:
        raise BranchError("sinh(Gamma) vanishes at nonzero Gamma; the decomposition is singular")
    r = _g_over_sinh(G)
    b3 = 0.5 * r * ((1.0 + ap * am) * e - ei)
    return BchOutput(complex(r * ap * e), complex(r * am * e), complex(b3), G)


def _lhs(inp: BchInput) -> np.ndarray:
    lower = np.array([[1.0, 0.0], [1j * inp.A_minus, 1.0]], dtype=complex)
    diag = np.diag([np.exp(inp.A_3), np.exp(-inp.A_3)]).astype(complex)
    upper = np.array([[1.0, 1j * inp.A_plus], [0.0, 1.0]], dtype=complex)
    return lower @ diag @ upper


def _rhs(out: BchOutput) -> np.ndarray:
    G = out.Gamma
    s = 1.0 / _g_over_sinh(G)
    gen = np.array([[out.B_3, 1j * out.B_plus], [1j * out.B_minus, -out.B_3]], dtype=complex)
    return np.cosh(G) * np.eye(2) + s * gen


def bch_matrix_check(inp: BchInput, out: BchOutput) -> float:
    """Max-entry difference between the two sides of the 2x2 identity."""
    return float(np.max(np.abs(_lhs(inp) - _rhs(out))))


def gamma_consistency(out: BchOutput) -> float:
    """``|Gamma^2 - (B3^2 - B+ B-)|``."""
    return float(abs(out.Gamma**2 - (out.B_3**2 - out.B_plus * out.B_minus)))


def random_inputs(count: int, radius: float, seed: int) -> list[BchInput]:
    """Inputs with each modulus uniform in ``[0, radius]`` and uniform phases."""
    rng = np.random.default_rng(seed)
    mod = rng.uniform(0.0, radius, size=(count, 3))
    ph = np.exp(2j * np.pi * rng.uniform(size=(count, 3)))
    a = mod * ph
    return [BchInput(complex(x[0]), complex(x[1]), complex(x[2])) for x in a]


def asymptotic_input(lam: float, c: float, g: float) -> BchInput:
    """``A+- = -+ lam/g``, ``A3 = -log(1 - i lam c/(2 g))``."""
    return BchInput(-lam / g, lam / g, complex(-np.log(1.0 - 1j * lam * c / (2.0 * g))))


def asymptotic_values(lam: float, c: float, g: float) -> tuple[complex, complex, complex]:
    """Leading large-``g`` values ``(B+, B-, B3)``."""
    b3 = 0.5j * lam * c / g - 0.5 * lam**2 * (1.0 + c * c / 4.0) / g**2
    return -lam / g, lam / g, b3


def remainder_exponents(lam: float, c: float, gains=(1e2, 1e3, 1e4)) -> dict[str, float]:
    """Fitted ``p`` in ``|B - B_asym| ~ g^{-p}`` for ``B+``, ``B-`` and ``B3``."""
    logs = np.log(np.asarray(gains, dtype=float))
    rem = {"B_plus": [], "B_minus": [], "B_3": []}
    for g in gains:
        out = bch_coefficients(asymptotic_input(lam, c, g))
        bp, bm, b3 = asymptotic_values(lam, c, g)
        rem["B_plus"].append(abs(out.B_plus - bp))
        rem["B_minus"].append(abs(out.B_minus - bm))
        rem["B_3"].append(abs(out.B_3 - b3))
    fits = {}
    for key, vals in rem.items():
        vals = np.asarray(vals)
        fits[key] = float("inf") if np.all(vals == 0) else float(-np.polyfit(logs, np.log(vals), 1)[0])
    return fits


def residual_summary(count: int = 1000, radius: float = 0.5, seed: int = 1) -> dict:
    """Worst matrix residual and ``Gamma`` consistency over seeded random inputs."""
    worst = 0.0
    worst_gamma = 0.0
    for inp in random_inputs(count, radius, seed):
        out = bch_coefficients(inp)
        worst = max(worst, bch_matrix_check(inp, out))
        worst_gamma = max(worst_gamma, gamma_consistency(out))
    return {"trials": count, "radius": radius, "seed": seed, "max_residual": worst, "max_gamma_error": worst_gamma}
