"""Ideal coherence-preserving amplifiers and preamplified heterodyne outcomes.

Three amplifiers are modeled, each realizing ``W -> g W`` for one observable:

* number: the isometry ``|n> -> |g n>`` (integer gain only);
* quadrature: a dilation of ``X_phi`` (``U^dag X_phi U = g X_phi``);
* K: the dilation ``psi(x) -> sqrt(g) |x|^{(g-1)/2} psi(x^{*g})`` of
  ``K = XY + YX`` (``U^dag K U = g K``).

A preamplified measurement amplifies, heterodynes, evaluates ``f`` and divides
the outcome by ``g``.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np
from scipy.special import gammaln

from .errors import ConfigError, GridResolutionError, TruncationError, UnsupportedObservableError
from .fock import (
    DensityOperator,
    PhaseSpacePolynomial,
    StateVector,
    anti_normal_operator,
    gaussian_smear,
)
from .grid import (
    GridSpec,
    GridWavefunction,
    OutcomeDensity,
    default_grid,
    fock_to_grid,
    gaussian_convolve,
    grid_density,
    hermite_functions,
    x_star_power,
)
from .heterodyne import (
    Efficiency,
    _as_rho,
    _eff,
    _sample,
    histogram_density,
    quadrature_kernel_variance,
    trapezoid_weights,
)

MAX_DENSE_DIM = 8192
K_DRIFT_FAIL = 1e-4
K_DRIFT_WARN = 1e-6
DEFAULT_K_GMAX = 16.0
COMB_RESOLUTION = 0.2
COMB_POPULATION_FLOOR = 1e-6
# subnormal results carry no relative precision and are flushed to zero
TINY = np.finfo(float).tiny
NEGLIGIBLE_POPULATION = 1e-30


# ----------------------------------------------------------------------------
# specs
# ----------------------------------------------------------------------------


def _integer_gain(g) -> int:
    if isinstance(g, (bool, np.bool_)):
        raise ConfigError("gain must be a number")
    if float(g) != int(round(float(g))) or float(g) < 1:
        raise ConfigError(
            f"number-amplifier gain must be a positive integer (got {g!r}): "
            "g*n must be a photon number for every n, so g*N must map into N"
        )
    return int(round(float(g)))


@dataclass(frozen=True)
class AmplifierSpec:
    """``kind`` is ``"number"``, ``"quadrature"`` or ``"k"``."""

    kind: str
    gain: float
    phi: float = 0.0

    def __post_init__(self):
        if self.kind == "number":
            object.__setattr__(self, "gain", _integer_gain(self.gain))
        elif self.kind in ("quadrature", "k"):
            if not float(self.gain) > 1.0:
                raise ConfigError(f"{self.kind} amplifier gain must exceed 1, got {self.gain!r}")
            object.__setattr__(self, "gain", float(self.gain))
        else:
            raise ConfigError(f"unknown amplifier kind {self.kind!r}")

    @classmethod
    def number(cls, g: int) -> "AmplifierSpec":
        return cls("number", g)

    @classmethod
    def quadrature(cls, phi: float, g: float) -> "AmplifierSpec":
        return cls("quadrature", g, float(phi))

    @classmethod
    def k(cls, g: float) -> "AmplifierSpec":
        return cls("k", g)

    def with_gain(self, g) -> "AmplifierSpec":
        return AmplifierSpec(self.kind, g, self.phi)


@dataclass(frozen=True)
class PreampDensity:
    """Outcome density of ``f/g`` after amplification (support already divided by ``g``)."""

    density: OutcomeDensity
    gain: float
    observable: str
    eta: float = 1.0
    rescaled: bool = True

    @property
    def support(self) -> np.ndarray:
        return self.density.support

    @property
    def values(self) -> np.ndarray:
        return self.density.density

    def mass(self) -> float:
        return self.density.mass()

    def metadata(self) -> dict:
        return {"gain": self.gain, "observable": self.observable, "eta": self.eta}


# ----------------------------------------------------------------------------
# number amplifier
# ----------------------------------------------------------------------------


def number_amplify(rho, g, dim_out: int | None = None) -> DensityOperator:
    """``V rho V^dag`` with ``V = sum_n |g n><n|``, as a dense matrix."""
    g = _integer_gain(g)
    rho = _as_rho(rho)
    need = g * (rho.dim - 1) + 1
    dim_out = need if dim_out is None else int(dim_out)
    if dim_out < need:
        raise TruncationError(f"output dimension {dim_out} cannot hold level {need - 1}")
    if dim_out > MAX_DENSE_DIM:
        raise ConfigError(
            f"dense output of dimension {dim_out} exceeds {MAX_DENSE_DIM}; "
            "use the level-restricted routines (preamp_moment, preamp_number_density) instead"
        )
    out = np.zeros((dim_out, dim_out), dtype=complex)
    idx = g * np.arange(rho.dim)
    out[np.ix_(idx, idx)] = rho.matrix
    return DensityOperator(out)


def stirlerr(m) -> np.ndarray:
    """``log m! - log(sqrt(2 pi m) (m/e)^m)`` for ``m >= 1``, without cancellation."""
    m = np.asarray(m, dtype=float)
    out = np.empty(m.shape)
    big = m >= 15
    mb = m[big]
    inv2 = 1.0 / (mb * mb)
    out[big] = (1.0 / 12 - inv2 * (1.0 / 360 - inv2 * (1.0 / 1260 - inv2 * (1.0 / 1680 - inv2 / 1188)))) / mb
    ms = m[~big]
    out[~big] = gammaln(ms + 1.0) - (ms + 0.5) * np.log(ms) + ms - 0.5 * np.log(2.0 * np.pi)
    return out


def log_gamma_envelope(n, g, h) -> np.ndarray:
    """``log gamma_n^(g)(h) = -log sqrt(2 pi n/g) + g n (1 - h/n + log(h/n))`` for ``n >= 1``."""
    n = np.asarray(n, dtype=float)
    u = np.asarray(h, dtype=float) / n - 1.0
    with np.errstate(divide="ignore"):
        shape = np.log1p(u) - u
    return -0.5 * np.log(2.0 * np.pi * n / g) + g * n * shape


def preamp_number_weight(n, g, h) -> np.ndarray:
    """``p_n^(g)(h) = g e^{-g h} (g h)^{g n} / (g n)!``.

    Evaluated as ``gamma_n^(g)(h) exp(-stirlerr(g n))``, which keeps full
    relative precision near the peak even for ``g n`` in the tens of thousands.
    """
    g = _integer_gain(g)
    h = np.asarray(h, dtype=float)
    if np.any(h < 0):
        raise ConfigError("h must be nonnegative")
    n = np.asarray(n)
    if np.any(n < 0) or np.any(n != np.floor(n)):
        raise ConfigError("photon index must be a nonnegative integer")
    n, h = np.broadcast_arrays(n.astype(float), h)
    out = np.empty(h.shape)
    zero = n == 0
    out[zero] = g * np.exp(-g * h[zero])
    pos = ~zero
    if np.any(pos):
        uniq, inv = np.unique(n[pos], return_inverse=True)
        corr = stirlerr(g * uniq)[inv.ravel()]
        out[pos] = np.exp(log_gamma_envelope(n[pos], g, h[pos]) - corr)
    out[out < TINY] = 0.0
    return out if out.ndim else float(out)


def comb_peak_width(rho, g) -> float:
    """Smallest standard deviation ``sqrt(g n + 1)/g`` among populated levels."""
    pops = _as_rho(rho).populations
    n = np.flatnonzero(pops >= COMB_POPULATION_FLOOR * pops.max())
    return float(np.sqrt(g * n.min() + 1.0) / g)


def required_h_points(rho, g, h_max: float) -> int:
    """Uniform node count on ``[0, h_max]`` that resolves the narrowest comb tooth."""
    return int(np.ceil(h_max / (COMB_RESOLUTION * comb_peak_width(rho, g)))) + 2


def check_comb_resolution(rho, g, h_grid) -> None:
    h = np.asarray(h_grid, dtype=float)
    width = comb_peak_width(rho, g)
    step = float(np.max(np.diff(h))) if h.size > 1 else np.inf
    if step >= COMB_RESOLUTION * width:
        raise GridResolutionError(
            f"h spacing {step:.3g} does not resolve comb peaks of width {width:.3g} "
            f"(need < {COMB_RESOLUTION * width:.3g})"
        )


def preamp_number_density(
    rho,
    g,
    eta=1.0,
    h_grid=None,
    samples: int = 1_000_000,
    seed: int = 0,
) -> PreampDensity:
    """Density of ``|alpha|^2 / g`` after number amplification by ``g``.

    At ``eta = 1`` it is ``sum_n rho_nn p_n^(g)(h)``. At ``eta < 1`` it is a
    Monte Carlo histogram: the amplified state (supported on levels ``g n``)
    is sampled and ``|alpha|^2/g`` binned around the nodes of ``h_grid``.
    """
    g = _integer_gain(g)
    rho = _as_rho(rho)
    eff = _eff(eta)
    if h_grid is None:
        h_grid = np.linspace(0.0, 30.0, required_h_points(rho, g, 30.0))
    h = np.asarray(h_grid, dtype=float)
    if np.any(h < 0):
        raise ConfigError("h grid must be nonnegative")
    if eff.eta == 1.0:
        check_comb_resolution(rho, g, h)
        pops = rho.populations
        p = np.zeros(h.size)
        for n in np.flatnonzero(pops > NEGLIGIBLE_POPULATION):
            p += pops[n] * preamp_number_weight(n, g, h)
        dens = OutcomeDensity(h, p, trapezoid_weights(h), "analytic")
    else:
        edges = np.concatenate([[h[0]], 0.5 * (h[1:] + h[:-1]), [h[-1]]])
        sample = _sample(rho.matrix, g * np.arange(rho.dim), samples, eff, seed)
        dens = histogram_density(np.abs(sample.values) ** 2 / g, bins=edges, samples=samples, seed=seed)
    return PreampDensity(dens, g, "number", eff.eta)


# ----------------------------------------------------------------------------
# quadrature amplifier
# ----------------------------------------------------------------------------


def rotate_fock(c: np.ndarray, phi: float) -> np.ndarray:
    """Coefficients of ``e^{-i phi N} psi``, whose ``X_0`` statistics are the ``X_phi`` statistics of ``psi``."""
    return c * np.exp(-1j * phi * np.arange(c.size))


def quadrature_amplifier_apply(psi, phi: float, g: float) -> GridWavefunction:
    """Amplify ``X_phi`` by ``g``; the result is returned in the ``phi``-rotated frame.

    The output lives on the input grid scaled by ``g`` and has values
    ``g^{-1/2} psi_rot(x/g)``, so node values are exact and the norm is
    preserved identically.
    """
    if not float(g) >= 1.0:
        raise ConfigError("quadrature gain must be >= 1")
    if isinstance(psi, StateVector):
        psi = fock_to_grid(psi)
    if psi.fock is not None:
        c = rotate_fock(psi.fock, phi)
        vals = c @ hermite_functions(c.size - 1, psi.spec.nodes)
    elif phi == 0.0:
        vals = psi.values
    else:
        raise ConfigError("rotation of a grid-only wavefunction is not supported; pass Fock coefficients")
    g = float(g)
    if g == 1.0:
        return GridWavefunction(psi.spec, vals, fock=None if psi.fock is None else c)
    return GridWavefunction(psi.spec.scaled(g), vals / np.sqrt(g))


def preamp_quadrature_kernel_variance(eta, g) -> float:
    """``(2 - eta) / (4 eta g^2)``."""
    return quadrature_kernel_variance(eta) / float(g) ** 2


def preamp_quadrature_density(rho, phi: float, g: float, eta=1.0, x_grid: GridSpec | None = None) -> PreampDensity:
    """Density of ``Re(alpha e^{-i phi})/g`` after quadrature amplification by ``g``."""
    if not float(g) >= 1.0:
        raise ConfigError("quadrature gain must be >= 1")
    spec = default_grid() if x_grid is None else x_grid
    base = grid_density(_as_rho(rho), phi, spec)
    dens = gaussian_convolve(base, preamp_quadrature_kernel_variance(eta, g))
    return PreampDensity(dens, float(g), f"quadrature(phi={phi!r})", _eff(eta).eta)


# ----------------------------------------------------------------------------
# K amplifier
# ----------------------------------------------------------------------------


def k_amplifier_apply(psi, g: float, g_max: float = DEFAULT_K_GMAX, drift_fail: float = K_DRIFT_FAIL) -> GridWavefunction:
    """``(U_g psi)(x) = sqrt(g) |x|^{(g-1)/2} psi(x^{*g})`` on the same grid.

    ``norm_drift`` of the result is ``|<out|out> - <in|in>|``. Drift beyond
    ``drift_fail`` means the grid no longer resolves the dilated state and
    raises GridResolutionError.
    """
    g = float(g)
    if not g >= 1.0:
        raise ConfigError("K gain must be >= 1")
    if g > g_max:
        raise ConfigError(f"K gain {g} exceeds g_max={g_max}; validate a larger g_max with k_gain_limit")
    if isinstance(psi, StateVector):
        psi = fock_to_grid(psi)
    if g == 1.0:
        return psi
    x = psi.spec.nodes
    ax = np.abs(x)
    pulled = psi.evaluate(x_star_power(x, g))
    with np.errstate(divide="ignore"):
        jac = np.where(ax > 0, np.exp(0.5 * np.log(g) + 0.5 * (g - 1.0) * np.log(np.where(ax > 0, ax, 1.0))), 0.0)
    out = jac * pulled
    drift = abs(float(psi.spec.integrate(np.abs(out) ** 2)) - psi.norm2())
    if drift > drift_fail:
        raise GridResolutionError(f"K amplification by {g} loses norm {drift:.3e}; the grid cannot hold the dilated state")
    return GridWavefunction(psi.spec, out, norm_drift=drift)


def k_gain_limit(psi, gains=(2.0, 4.0, 8.0, 16.0, 32.0, 64.0), tol: float = K_DRIFT_WARN) -> float:
    """Largest gain in ``gains`` (ascending) whose norm drift stays below ``tol``."""
    if isinstance(psi, StateVector):
        psi = fock_to_grid(psi)
    best = 1.0
    for g in gains:
        try:
            out = k_amplifier_apply(psi, g, g_max=np.inf)
        except GridResolutionError:
            break
        if out.norm_drift >= tol:
            break
        best = float(g)
    return best


# ----------------------------------------------------------------------------
# preamplified moments
# ----------------------------------------------------------------------------

# anti-normal forms of the operators a grid wavefunction can evaluate
_GRID_BASIS: dict[str, dict[tuple[int, int], complex]] = {
    "1": {(0, 0): 1.0},
    "X": {(1, 0): 0.5, (0, 1): 0.5},
    "Y": {(1, 0): -0.5j, (0, 1): 0.5j},
    "X2": {(2, 0): 0.25, (0, 2): 0.25, (1, 1): 0.5, (0, 0): -0.25},
    "Y2": {(2, 0): -0.25, (0, 2): -0.25, (1, 1): 0.5, (0, 0): -0.25},
    "K": {(2, 0): -0.5j, (0, 2): 0.5j},
    "K2": {(4, 0): -0.25, (0, 4): -0.25, (2, 2): 0.5, (1, 1): -1.0, (0, 0): 0.5},
}


def grid_decomposition(poly: PhaseSpacePolynomial, tol: float = 1e-12) -> dict[str, float]:
    """Write the operator ``:poly:_A`` as a real combination of 1, X, Y, X^2, Y^2, K, K^2."""
    names = list(_GRID_BASIS)
    keys = sorted(set(poly.terms).union(*(_GRID_BASIS[b] for b in names)))
    mat = np.array([[_GRID_BASIS[b].get(k, 0.0) for b in names] for k in keys], dtype=complex)
    rhs = np.array([poly.terms.get(k, 0.0) for k in keys], dtype=complex)
    coef, *_ = np.linalg.lstsq(mat, rhs, rcond=None)
    scale = max(1.0, float(np.max(np.abs(rhs))) if rhs.size else 1.0)
    if np.max(np.abs(mat @ coef - rhs), initial=0.0) > tol * scale or np.max(np.abs(coef.imag), initial=0.0) > tol * scale:
        raise UnsupportedObservableError(
            f"the anti-normal operator of {poly.name or 'f^l'} is not a combination of 1, X, Y, X^2, Y^2, K, K^2; "
            "grid states support f = |alpha|^2 (l<=1), Re(alpha e^{-i phi}) (l<=2), Im(alpha^2) + (c/2)|alpha|^2 (l<=1, or l=2 with c=0)"
        )
    return {b: float(c.real) for b, c in zip(names, coef) if abs(c) > tol * scale}


def grid_expectations(psi: GridWavefunction) -> dict[str, float]:
    """Normalized expectations of the grid basis operators."""
    n2 = psi.norm2()
    d = psi.derivative()
    y = float(np.real(psi.spec.integrate(psi.values.conj() * (-0.5j) * d)))
    return {
        "1": 1.0,
        "X": psi.x_moment(1) / n2,
        "Y": y / n2,
        "X2": psi.x_moment(2) / n2,
        "Y2": psi.y2_expectation() / n2,
        "K": psi.k_expectation() / n2,
        "K2": psi.k2_expectation() / n2,
    }


def grid_operator_expectation(poly: PhaseSpacePolynomial, psi: GridWavefunction) -> float:
    coefs = grid_decomposition(poly)
    ev = grid_expectations(psi)
    return float(sum(c * ev[b] for b, c in coefs.items()))


def _apply_ladder(v: np.ndarray, dagger: bool) -> np.ndarray:
    """``a v`` or ``a^dag v`` on a vector whose top entry is zero when raising."""
    n = np.arange(v.size)
    out = np.zeros_like(v)
    if dagger:
        out[1:] = np.sqrt(n[1:]) * v[:-1]
    else:
        out[:-1] = np.sqrt(n[1:]) * v[1:]
    return out


def _squeezed_ladder(v: np.ndarray, mu: float, nu: complex, dagger: bool) -> np.ndarray:
    """``U^dag a U = mu a + nu a^dag`` (or its adjoint) applied to ``v``."""
    if dagger:
        return mu * _apply_ladder(v, True) + np.conj(nu) * _apply_ladder(v, False)
    return mu * _apply_ladder(v, False) + nu * _apply_ladder(v, True)


def _heisenberg_quadrature_expectation(poly: PhaseSpacePolynomial, rho: DensityOperator, phi: float, g: float) -> float:
    """``Tr[rho U^dag :poly:_A U]`` for the quadrature amplifier, exactly.

    Each monomial ``a^m a^dag^n`` becomes ``A^m A^dag^n`` with
    ``A = mu a + nu a^dag``, ``mu = (g + 1/g)/2``, ``nu = e^{2 i phi}(g - 1/g)/2``,
    applied to padded state vectors so no truncation enters.
    """
    mu = 0.5 * (g + 1.0 / g)
    nu = 0.5 * (g - 1.0 / g) * np.exp(2j * phi)
    pad = rho.dim + poly.degree + 2
    w, vecs = rho.eigenstates()
    total = 0.0 + 0.0j
    for weight, col in zip(w, vecs.T):
        psi = np.zeros(pad, dtype=complex)
        psi[: rho.dim] = col
        for (m, n), c in poly.terms.items():
            v = psi
            for _ in range(n):
                v = _squeezed_ladder(v, mu, nu, True)
            for _ in range(m):
                v = _squeezed_ladder(v, mu, nu, False)
            total += weight * c * np.vdot(psi, v)
    return float(total.real)


def _grid_states(state, grid: GridSpec | None = None) -> list[tuple[float, GridWavefunction]]:
    if isinstance(state, GridWavefunction):
        return [(1.0, state)]
    if isinstance(state, StateVector):
        return [(1.0, fock_to_grid(state, grid))]
    if isinstance(state, DensityOperator):
        w, v = state.eigenstates()
        return [(float(wi), fock_to_grid(StateVector.normalized(col), grid)) for wi, col in zip(w, v.T)]
    raise ConfigError(f"unsupported state type {type(state).__name__}")


def preamp_moment(spec: AmplifierSpec, f: PhaseSpacePolynomial, l: int, state, eta=1.0, grid: GridSpec | None = None) -> float:
    """``l``-th moment of the preamplified outcome ``f/g``.

    Equals ``g^{-l} <U^dag Gamma[:f^l:_A] U>`` with ``Gamma`` the efficiency
    smearing. Number: exact on the level set ``g n``. Quadrature: exact
    Heisenberg-picture evaluation. K: evaluation of the amplified state on
    ``grid`` (default grid when omitted).
    """
    if not f.is_real():
        raise ConfigError("the phase-space function must be real-valued")
    if int(l) != l or l < 0:
        raise ConfigError("moment order must be a nonnegative integer")
    l = int(l)
    eff = _eff(eta)
    if l == 0:
        return 1.0
    poly = gaussian_smear(f**l, eff.variance)
    g = spec.gain
    if spec.kind == "number":
        rho = _as_rho(state)
        levels = g * np.arange(rho.dim)
        op = anti_normal_operator(poly, max(rho.dim, poly.max_index + 2), levels=levels).matrix
        return float(np.real(np.sum(rho.matrix.T * op))) / g**l
    if spec.kind == "quadrature":
        return _heisenberg_quadrature_expectation(poly, _as_rho(state), spec.phi, g) / g**l
    coefs = grid_decomposition(poly)
    total = 0.0
    for weight, psi in _grid_states(state, grid):
        out = k_amplifier_apply(psi, g)
        ev = grid_expectations(out)
        total += weight * sum(c * ev[b] for b, c in coefs.items())
    return total / g**l


def gaussian_moment(l: int, variance: float) -> float:
    """``E[xi^l]`` for ``xi ~ N(0, variance)``."""
    if l % 2:
        return 0.0
    return float(np.prod(np.arange(l - 1, 0, -2, dtype=float)) * variance ** (l // 2))


def preamp_quadrature_moment_series(moments: list[float], l: int, eta, g) -> float:
    """``E[(X + xi)^l]`` from bare moments ``moments[j] = <X^j>`` and the narrowed kernel."""
    var = preamp_quadrature_kernel_variance(eta, g)
    return float(sum(comb(l, k) * moments[l - k] * gaussian_moment(k, var) for k in range(l + 1)))


__all__ = [
    "AmplifierSpec",
    "Efficiency",
    "PreampDensity",
    "check_comb_resolution",
    "comb_peak_width",
    "gaussian_moment",
    "grid_decomposition",
    "grid_expectations",
    "grid_operator_expectation",
    "k_amplifier_apply",
    "k_gain_limit",
    "number_amplify",
    "preamp_moment",
    "preamp_number_density",
    "preamp_number_weight",
    "stirlerr",
    "log_gamma_envelope",
    "preamp_quadrature_density",
    "preamp_quadrature_kernel_variance",
    "preamp_quadrature_moment_series",
    "quadrature_amplifier_apply",
    "required_h_points",
    "rotate_fock",
]
