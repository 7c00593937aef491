"""Position-representation machinery on a symmetric log-spaced grid.

The grid is log-spaced in ``|x|`` on ``[log_floor, half_width]`` on both sides
of the origin, with a short uniform patch across ``(-log_floor, log_floor)``.
On the log parts the natural coordinate is ``t = ln|x|``: there
``x d/dx = d/dt``, so ``K = -i(d/dt + 1/2)`` is a plain derivative and the
K-amplifier ``x -> x^{*g}`` is the dilation ``t -> g t``. Integration weights
are the trapezoid rule in ``t`` (i.e. ``w = x dt``), which is spectrally
accurate for the smooth, decaying integrands met here.

Wavefunctions follow the quadrature convention with vacuum
``<x|0> = (2/pi)^{1/4} exp(-x^2)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.interpolate import make_interp_spline
from scipy.special import roots_hermite

from .errors import ConfigError, GridResolutionError
from .fock import DensityOperator, StateVector

DEFAULT_HALF_WIDTH = 32.0
DEFAULT_POINTS_PER_SIDE = 4000
DEFAULT_LOG_FLOOR = 1e-8
DEFAULT_CENTER_POINTS = 8
MAX_LOG_STEP = 0.05
SPLINE_ORDER = 5


@dataclass(frozen=True)
class GridSpec:
    """Nodes and weights; ``nodes[i] == -nodes[-1-i]`` exactly."""

    nodes: np.ndarray
    weights: np.ndarray
    log_floor: float
    half_width: float
    points_per_side: int
    center_points: int

    @property
    def size(self) -> int:
        return self.nodes.size

    @property
    def log_step(self) -> float:
        return float(np.log(self.half_width / self.log_floor) / (self.points_per_side - 1))

    @property
    def t(self) -> np.ndarray:
        """Log coordinates of the positive branch, uniform and increasing."""
        return np.log(self.nodes[self.positive])

    @property
    def positive(self) -> slice:
        return slice(self.size - self.points_per_side, self.size)

    @property
    def negative(self) -> slice:
        """Negative branch ordered by increasing ``|x|`` is ``nodes[negative][::-1]``."""
        return slice(0, self.points_per_side)

    @property
    def center(self) -> slice:
        return slice(self.points_per_side, self.size - self.points_per_side)

    def integrate(self, values) -> complex | float:
        return np.sum(self.weights * values)

    def scaled(self, factor: float) -> "GridSpec":
        """Grid with every node multiplied by ``factor`` (weights follow)."""
        if factor <= 0:
            raise ConfigError("grid scale factor must be positive")
        return GridSpec(
            self.nodes * factor,
            self.weights * factor,
            self.log_floor * factor,
            self.half_width * factor,
            self.points_per_side,
            self.center_points,
        )


def make_grid(
    half_width: float = DEFAULT_HALF_WIDTH,
    points_per_side: int = DEFAULT_POINTS_PER_SIDE,
    log_floor: float = DEFAULT_LOG_FLOOR,
    center_points: int = DEFAULT_CENTER_POINTS,
) -> GridSpec:
    """Symmetric grid: log-spaced ``|x|`` in ``[log_floor, half_width]`` plus a center patch.

    The center patch holds ``2*center_points - 1`` uniformly spaced nodes
    strictly inside ``(-log_floor, log_floor)``, including 0.
    """
    if not 0 < log_floor < half_width:
        raise ConfigError("need 0 < log_floor < half_width")
    if points_per_side < 2 or center_points < 1:
        raise ConfigError("need points_per_side >= 2 and center_points >= 1")
    dt = np.log(half_width / log_floor) / (points_per_side - 1)
    if dt > MAX_LOG_STEP:
        raise GridResolutionError(
            f"{points_per_side} points per side give log step {dt:.3g} > {MAX_LOG_STEP}; "
            f"need at least {int(np.ceil(np.log(half_width / log_floor) / MAX_LOG_STEP)) + 1}"
        )
    pos = log_floor * np.exp(dt * np.arange(points_per_side))
    pos[-1] = half_width
    hc = log_floor / center_points
    center = hc * np.arange(-(center_points - 1), center_points)
    nodes = np.concatenate([-pos[::-1], center, pos])

    wpos = pos * dt
    wpos[0] *= 0.5
    wpos[-1] *= 0.5
    wpos[0] += 0.5 * hc
    wcenter = np.full(center.size, hc)
    weights = np.concatenate([wpos[::-1], wcenter, wpos])
    return GridSpec(nodes, weights, float(log_floor), float(half_width), int(points_per_side), int(center_points))


@lru_cache(maxsize=8)
def default_grid(
    half_width: float = DEFAULT_HALF_WIDTH,
    points_per_side: int = DEFAULT_POINTS_PER_SIDE,
    log_floor: float = DEFAULT_LOG_FLOOR,
) -> GridSpec:
    return make_grid(half_width, points_per_side, log_floor)


def hermite_functions(nmax: int, x) -> np.ndarray:
    """Orthonormal oscillator eigenfunctions ``<x|n>`` for ``n = 0..nmax``.

    Three-term recurrence on the normalized functions,
    ``h_{n+1} = (2x h_n - sqrt(n) h_{n-1}) / sqrt(n+1)``.
    """
    x = np.asarray(x, dtype=float)
    out = np.empty((nmax + 1,) + x.shape)
    out[0] = (2.0 / np.pi) ** 0.25 * np.exp(-(x**2))
    if nmax >= 1:
        out[1] = 2.0 * x * out[0]
    for n in range(1, nmax):
        out[n + 1] = (2.0 * x * out[n] - np.sqrt(n) * out[n - 1]) / np.sqrt(n + 1.0)
    return out


def _derivative_coefficients(c: np.ndarray) -> np.ndarray:
    """Fock coefficients of ``d psi/dx``, using ``d/dx = a - a^dag``."""
    d = np.zeros(c.size + 1, dtype=complex)
    n = np.arange(c.size)
    d[:-2] += np.sqrt(n[1:]) * c[1:]
    d[1:] -= np.sqrt(n + 1.0) * c
    return d


@dataclass(frozen=True)
class GridWavefunction:
    """Pure state sampled on a :class:`GridSpec`.

    ``fock`` keeps the Fock coefficients when the wavefunction was built from
    a Fock state, so it can be evaluated exactly off the nodes; otherwise
    off-node values come from splines in ``ln|x|``.
    """

    spec: GridSpec
    values: np.ndarray
    fock: np.ndarray | None = None
    norm_drift: float = 0.0
    _splines: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        if vals.shape != self.spec.nodes.shape:
            raise ConfigError("values must match the grid nodes")
        object.__setattr__(self, "values", vals)

    # basic quantities -------------------------------------------------------
    def norm2(self) -> float:
        return float(self.spec.integrate(np.abs(self.values) ** 2))

    def inner(self, other: "GridWavefunction") -> complex:
        if other.spec is not self.spec and not np.array_equal(other.spec.nodes, self.spec.nodes):
            raise ConfigError("wavefunctions live on different grids")
        return complex(self.spec.integrate(self.values.conj() * other.values))

    def density(self) -> np.ndarray:
        return np.abs(self.values) ** 2

    # off-node evaluation ----------------------------------------------------
    def _branch(self, sign: int) -> np.ndarray:
        v = self.values[self.spec.positive] if sign > 0 else self.values[self.spec.negative][::-1]
        return v

    def _spline(self, sign: int):
        if sign not in self._splines:
            self._splines[sign] = make_interp_spline(self.spec.t, self._branch(sign), k=SPLINE_ORDER)
        return self._splines[sign]

    def evaluate(self, points) -> np.ndarray:
        """Wavefunction at arbitrary real points (zero beyond the grid span)."""
        pts = np.asarray(points, dtype=float)
        if self.fock is not None:
            return self.fock @ hermite_functions(self.fock.size - 1, pts.ravel()).reshape((self.fock.size,) + pts.shape)
        spec = self.spec
        out = np.zeros(pts.shape, dtype=complex)
        ax = np.abs(pts)
        inner = ax < spec.log_floor
        if np.any(inner):
            cs = slice(spec.points_per_side - 1, spec.size - spec.points_per_side + 1)
            xc = spec.nodes[cs]
            vc = self.values[cs]
            out[inner] = np.interp(pts[inner], xc, vc.real) + 1j * np.interp(pts[inner], xc, vc.imag)
        for sign in (1, -1):
            sel = (~inner) & (ax <= spec.half_width) & (np.sign(pts) == sign)
            if np.any(sel):
                out[sel] = self._spline(sign)(np.log(ax[sel]))
        return out

    # derivatives ------------------------------------------------------------
    def log_derivative(self) -> np.ndarray:
        """``x d psi/dx`` at every node (``= d psi/dt`` on the log branches)."""
        spec = self.spec
        if self.fock is not None:
            d = _derivative_coefficients(self.fock)
            return spec.nodes * (d @ hermite_functions(d.size - 1, spec.nodes))
        out = np.zeros(spec.size, dtype=complex)
        out[spec.positive] = self._spline(1).derivative()(spec.t)
        out[spec.negative] = self._spline(-1).derivative()(spec.t)[::-1]
        cs = spec.center
        xc = spec.nodes[spec.points_per_side - 1 : spec.size - spec.points_per_side + 1]
        vc = self.values[spec.points_per_side - 1 : spec.size - spec.points_per_side + 1]
        out[cs] = spec.nodes[cs] * np.gradient(vc, xc)[1:-1]
        return out

    def derivative(self) -> np.ndarray:
        """``d psi/dx`` at every node; at x=0 from the center patch."""
        spec = self.spec
        if self.fock is not None:
            d = _derivative_coefficients(self.fock)
            return d @ hermite_functions(d.size - 1, spec.nodes)
        out = np.empty(spec.size, dtype=complex)
        logd = self.log_derivative()
        nz = spec.nodes != 0
        out[nz] = logd[nz] / spec.nodes[nz]
        zc = ~nz
        if np.any(zc):
            xc = spec.nodes[spec.points_per_side - 1 : spec.size - spec.points_per_side + 1]
            vc = self.values[spec.points_per_side - 1 : spec.size - spec.points_per_side + 1]
            out[zc] = np.interp(0.0, xc, np.gradient(vc.real, xc)) + 1j * np.interp(0.0, xc, np.gradient(vc.imag, xc))
        return out

    # operator expectations --------------------------------------------------
    def apply_k(self) -> np.ndarray:
        """``K psi = -i (x psi' + psi/2)``."""
        return -1j * (self.log_derivative() + 0.5 * self.values)

    def x_moment(self, power: int) -> float:
        return float(np.real(self.spec.integrate(self.spec.nodes**power * np.abs(self.values) ** 2)))

    def k_expectation(self) -> float:
        return float(np.real(self.spec.integrate(self.values.conj() * self.apply_k())))

    def k2_expectation(self) -> float:
        return float(np.real(self.spec.integrate(np.abs(self.apply_k()) ** 2)))

    def y2_expectation(self) -> float:
        """``<Y^2> = |psi'|^2 / 4`` integrated; on log branches uses ``|d psi/dt|^2 / |x|``."""
        spec = self.spec
        logd = self.log_derivative()
        dens = np.empty(spec.size)
        nz = spec.nodes != 0
        dens[nz] = np.abs(logd[nz]) ** 2 / spec.nodes[nz] ** 2
        if np.any(~nz):
            dens[~nz] = np.abs(self.derivative()[~nz]) ** 2
        return float(0.25 * spec.integrate(dens))

    def number_expectation(self) -> float:
        """``<N> = <X^2> + <Y^2> - 1/2``."""
        return self.x_moment(2) + self.y2_expectation() - 0.5


def fock_to_grid(psi: StateVector, spec: GridSpec | None = None, drift_tol: float = 1e-6) -> GridWavefunction:
    """Sample ``sum_n c_n <x|n>`` on the grid and renormalize; drift is reported."""
    spec = default_grid() if spec is None else spec
    c = psi.amplitudes
    vals = c @ hermite_functions(c.size - 1, spec.nodes)
    n2 = float(spec.integrate(np.abs(vals) ** 2))
    drift = abs(np.sqrt(n2) - 1.0)
    if drift > drift_tol:
        raise GridResolutionError(f"grid loses norm {drift:.3e} for this state; widen or refine the grid")
    scale = 1.0 / np.sqrt(n2)
    return GridWavefunction(spec, vals * scale, fock=c * scale, norm_drift=drift)


def grid_to_fock(psi: GridWavefunction, dim: int) -> StateVector:
    """Project onto ``|0> .. |dim-1>`` by quadrature; the discarded weight is the tail mass."""
    h = hermite_functions(dim - 1, psi.spec.nodes)
    c = h @ (psi.spec.weights * psi.values)
    tail = max(0.0, psi.norm2() - float(np.sum(np.abs(c) ** 2)))
    return StateVector(c / np.linalg.norm(c), tail)


def grid_from_function(func, spec: GridSpec | None = None) -> GridWavefunction:
    """Wavefunction from a callable, normalized on the grid."""
    spec = default_grid() if spec is None else spec
    vals = np.asarray(func(spec.nodes), dtype=complex)
    n2 = float(spec.integrate(np.abs(vals) ** 2))
    return GridWavefunction(spec, vals / np.sqrt(n2))


# ----------------------------------------------------------------------------
# densities
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class OutcomeDensity:
    """Tabulated density ``p(u)`` with integration weights.

    ``method`` is one of ``analytic``, ``quadrature2d`` or ``monte-carlo``.
    """

    support: np.ndarray
    density: np.ndarray
    weights: np.ndarray
    method: str = "analytic"
    samples: int | None = None
    seed: int | None = None

    def __post_init__(self):
        s = np.asarray(self.support, dtype=float)
        d = np.asarray(self.density, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if not (s.shape == d.shape == w.shape) or s.ndim != 1:
            raise ConfigError("support, density and weights must be 1-d arrays of equal length")
        if self.method not in ("analytic", "quadrature2d", "monte-carlo"):
            raise ConfigError(f"unknown density method {self.method!r}")
        object.__setattr__(self, "support", s)
        object.__setattr__(self, "density", d)
        object.__setattr__(self, "weights", w)

    def mass(self) -> float:
        return float(np.sum(self.density * self.weights))

    def moment(self, power: int, center: float = 0.0) -> float:
        return float(np.sum(self.weights * self.density * (self.support - center) ** power))

    def mean(self) -> float:
        return self.moment(1) / self.mass()

    def variance(self) -> float:
        m = self.mean()
        return self.moment(2, m) / self.mass()

    def tolerance(self) -> float:
        """Normalization tolerance implied by the method."""
        if self.method == "monte-carlo" and self.samples:
            return 3.0 / np.sqrt(self.samples)
        return 1e-6


def grid_density(psi_or_rho, phi: float = 0.0, spec: GridSpec | None = None) -> OutcomeDensity:
    """Probability density of ``X_phi`` on the grid for a Fock state or density matrix."""
    spec = default_grid() if spec is None else spec
    if isinstance(psi_or_rho, GridWavefunction):
        if phi != 0.0:
            raise ConfigError("rotating a grid-only wavefunction is not supported; pass a Fock state")
        return quadrature_density(psi_or_rho)
    rho = psi_or_rho.density() if isinstance(psi_or_rho, StateVector) else psi_or_rho
    if not isinstance(rho, DensityOperator):
        raise ConfigError("expected a StateVector, DensityOperator or GridWavefunction")
    if phi:
        rho = rho.rotated(phi)
    h = hermite_functions(rho.dim - 1, spec.nodes)
    p = np.real(np.sum((rho.matrix.T @ h).conj() * h, axis=0))
    p = np.clip(p, 0.0, None)
    return OutcomeDensity(spec.nodes, p, spec.weights, "analytic")


def quadrature_density(psi: GridWavefunction) -> OutcomeDensity:
    """``|psi(x)|^2`` on the nodes."""
    return OutcomeDensity(psi.spec.nodes, psi.density(), psi.spec.weights, "analytic")


# Gauss-Hermite nodes for the narrow-kernel branch of gaussian_convolve
_GH_NODES, _GH_WEIGHTS = roots_hermite(48)


def _local_spacing(nodes: np.ndarray) -> np.ndarray:
    gaps = np.diff(nodes)
    sp = np.empty(nodes.size)
    sp[0] = gaps[0]
    sp[-1] = gaps[-1]
    sp[1:-1] = np.maximum(gaps[:-1], gaps[1:])
    return sp


def gaussian_convolve(p: OutcomeDensity, variance: float, resolve_ratio: float = 3.0, chunk: int = 512) -> OutcomeDensity:
    """Convolve a tabulated density with a centered normal kernel.

    Where the kernel is resolved by the grid (standard deviation at least
    ``resolve_ratio`` local spacings over the kernel's support) the output is
    the direct weighted sum over input nodes. Elsewhere the kernel is
    narrower than the grid and the output comes from Gauss-Hermite
    quadrature against a spline interpolant of the input.
    """
    if variance <= 0:
        raise ConfigError("kernel variance must be positive")
    x = p.support
    sigma = float(np.sqrt(variance))
    span = x[-1] - x[0]
    if 2.0 * 8.0 * sigma > span:
        raise GridResolutionError(f"kernel std {sigma:.3g} too wide for grid span {span:.3g}")

    spacing = _local_spacing(x)
    # worst spacing within +-6 sigma of each node
    lo = np.searchsorted(x, x - 6 * sigma)
    hi = np.searchsorted(x, x + 6 * sigma, side="right")
    worst = np.array([spacing[a:b].max() if b > a else spacing[min(a, x.size - 1)] for a, b in zip(lo, hi)])
    direct = sigma >= resolve_ratio * worst

    out = np.empty_like(p.density)
    wp = p.weights * p.density
    norm = 1.0 / np.sqrt(2.0 * np.pi * variance)
    idx = np.flatnonzero(direct)
    for start in range(0, idx.size, chunk):
        rows = idx[start : start + chunk]
        kern = np.exp(-((x[rows, None] - x[None, :]) ** 2) / (2.0 * variance))
        out[rows] = norm * (kern @ wp)

    rest = np.flatnonzero(~direct)
    if rest.size:
        interp = _density_interpolant(p)
        shifts = np.sqrt(2.0) * sigma * _GH_NODES
        vals = interp(x[rest, None] - shifts[None, :])
        out[rest] = vals @ _GH_WEIGHTS / np.sqrt(np.pi)
    out = np.clip(out, 0.0, None)
    return OutcomeDensity(x, out, p.weights, p.method, p.samples, p.seed)


def _density_interpolant(p: OutcomeDensity):
    x = p.support
    spline = make_interp_spline(x, p.density, k=3)

    def f(u):
        u = np.asarray(u, dtype=float)
        v = spline(np.clip(u, x[0], x[-1]))
        v[(u < x[0]) | (u > x[-1])] = 0.0
        return v

    return f


# ----------------------------------------------------------------------------
# sign-preserving powers
# ----------------------------------------------------------------------------


def x_star_power(x, g: float):
    """``x^{*g} = sgn(x) |x|^g``.

    Results below the normal float range flush to a signed zero.
    """
    x = np.asarray(x, dtype=float)
    if g <= 0:
        raise ConfigError("exponent g must be positive")
    ax = np.abs(x)
    with np.errstate(over="ignore", under="ignore"):
        mag = ax**g
    mag = np.where(mag < np.finfo(float).tiny, 0.0, mag)
    out = np.copysign(mag, x)
    return out if out.ndim else float(out)
