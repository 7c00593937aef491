"""Heterodyne detection: Q-function, sampling, marginal densities and moments.

Heterodyne outcomes ``alpha`` are distributed by the Husimi function
``Q(alpha) = <alpha|rho|alpha>/pi``. A detector of efficiency ``eta`` adds
complex Gaussian noise with ``E|noise|^2 = (1-eta)/eta`` to each outcome.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve
from scipy.special import gammaln, xlogy
from scipy.stats import poisson

from .errors import ConfigError, EnvelopeError, GridResolutionError, TruncationError
from .fock import (
    DensityOperator,
    PhaseSpacePolynomial,
    StateVector,
    anti_normal_operator,
    gaussian_smear,
)
from .grid import GridSpec, OutcomeDensity, default_grid, gaussian_convolve, grid_density

BLOCK_SIZE = 1 << 16
ACCEPTANCE_FLOOR = 0.05
MAX_BINS = 4096
SUBCELLS = 6


@dataclass(frozen=True)
class Efficiency:
    eta: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.eta <= 1.0:
            raise ConfigError(f"quantum efficiency must lie in (0, 1], got {self.eta!r}")

    @property
    def variance(self) -> float:
        """Complex-plane smearing variance ``(1 - eta)/eta``."""
        return (1.0 - self.eta) / self.eta


def _eff(eta) -> Efficiency:
    return eta if isinstance(eta, Efficiency) else Efficiency(float(eta))


def _as_rho(state) -> DensityOperator:
    if isinstance(state, StateVector):
        return state.density()
    if isinstance(state, DensityOperator):
        return state
    raise ConfigError(f"expected a StateVector or DensityOperator, got {type(state).__name__}")


@dataclass(frozen=True)
class ComplexOutcomeSample:
    values: np.ndarray
    eta: float
    seed: int
    acceptance_rate: float

    def __len__(self) -> int:
        return self.values.size


# ----------------------------------------------------------------------------
# Q-function
# ----------------------------------------------------------------------------


def _coherent_overlaps(alpha: np.ndarray, levels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Magnitude and phase of ``<alpha|n>`` for each alpha (rows) and level n (columns)."""
    r2 = np.abs(alpha) ** 2
    lv = levels.astype(float)
    mag = np.exp(0.5 * xlogy(lv[None, :], r2[:, None]) - 0.5 * gammaln(lv + 1)[None, :] - 0.5 * r2[:, None])
    z = np.exp(-1j * np.angle(alpha))
    steps = np.diff(levels)
    if levels.size > 1 and np.all(steps == steps[0]):
        # arithmetic level set: phases by running product
        phase = np.empty(mag.shape, dtype=complex)
        phase[:, 0] = z ** levels[0]
        phase[:, 1:] = (z ** steps[0])[:, None]
        phase = np.cumprod(phase, axis=1)
    else:
        phase = np.exp(-1j * np.angle(alpha)[:, None] * lv[None, :])
    return mag, phase


def _q_values(amp: np.ndarray, levels: np.ndarray, alpha: np.ndarray, chunk: int = 1 << 14) -> np.ndarray:
    out = np.empty(alpha.size)
    for s in range(0, alpha.size, chunk):
        mag, phase = _coherent_overlaps(alpha[s : s + chunk], levels)
        out[s : s + chunk] = np.sum(np.abs((mag * phase) @ amp) ** 2, axis=1) / np.pi
    return out


def _check_alpha_range(alpha: np.ndarray, top_level: int, tol: float = 1e-10) -> None:
    rmax = float(np.max(np.abs(alpha))) if alpha.size else 0.0
    if rmax > 0 and poisson.sf(top_level, rmax**2) > tol:
        raise TruncationError(f"|alpha|={rmax:.3g} needs more Fock levels than {top_level + 1}")


def _amplitudes(rho: DensityOperator) -> np.ndarray:
    w, v = rho.eigenstates()
    return v * np.sqrt(w)[None, :]


def q_function(rho, alpha) -> np.ndarray:
    """Husimi function ``<alpha|rho|alpha>/pi`` (vectorized over ``alpha``).

    Raises TruncationError when a coherent state at ``|alpha|`` would not fit
    in the truncation, since such points probe beyond the represented state.
    """
    rho = _as_rho(rho)
    alpha = np.asarray(alpha, dtype=complex)
    flat = alpha.ravel()
    _check_alpha_range(flat, rho.dim - 1)
    return _q_values(_amplitudes(rho), np.arange(rho.dim), flat).reshape(alpha.shape)


# ----------------------------------------------------------------------------
# sampling
# ----------------------------------------------------------------------------


class _QSampler:
    """Rejection sampler for the Q-function of ``rho`` supported on ``levels``.

    Envelope: since ``|rho_mn| <= sqrt(rho_mm rho_nn)``, Cauchy-Schwarz gives
    ``Q(alpha) <= S^2 sum_n q_n Q_n(alpha)`` with ``q_n = sqrt(rho_nn)/S``,
    ``S = sum_n sqrt(rho_nn)`` and ``Q_n`` the Q-function of ``|n>``. Each
    ``Q_n`` is sampled exactly (``|alpha|^2 ~ Gamma(n+1)``, uniform phase), and
    the acceptance rate is ``1/S^2``.
    """

    def __init__(self, matrix: np.ndarray, levels: np.ndarray, acceptance_floor: float = ACCEPTANCE_FLOOR):
        pops = np.clip(np.diag(matrix).real, 0.0, None)
        if not np.any(pops > 0):
            raise EnvelopeError("state has no Fock population")
        sq = np.sqrt(pops)
        self.levels = np.asarray(levels)
        self.bound = float(sq.sum() ** 2)
        self.q = sq / sq.sum()
        self.acceptance = 1.0 / self.bound
        if self.acceptance < acceptance_floor:
            raise EnvelopeError(
                f"envelope acceptance rate {self.acceptance:.3%} is below the floor {acceptance_floor:.0%}"
            )
        w, v = np.linalg.eigh(0.5 * (matrix + matrix.conj().T))
        good = w > 1e-14 * w.max()
        self.amp = v[:, good] * np.sqrt(w[good])[None, :]

    def _ratio(self, alpha: np.ndarray) -> np.ndarray:
        mag, phase = _coherent_overlaps(alpha, self.levels)
        q = np.sum(np.abs((mag * phase) @ self.amp) ** 2, axis=1)
        env = (mag * mag) @ self.q
        return q / (self.bound * env)

    def block(self, rng: np.random.Generator, count: int, batch: int = 1 << 14) -> np.ndarray:
        out = []
        have = 0
        while have < count:
            n = max(batch, int(1.2 * (count - have) * self.bound))
            n = min(n, 1 << 18)
            comp = rng.choice(self.levels.size, size=n, p=self.q)
            rad2 = rng.gamma(self.levels[comp] + 1.0, 1.0)
            theta = rng.uniform(0.0, 2.0 * np.pi, size=n)
            alpha = np.sqrt(rad2) * np.exp(1j * theta)
            acc = rng.uniform(size=n) < self._ratio(alpha)
            out.append(alpha[acc])
            have += int(acc.sum())
        return np.concatenate(out)[:count]


def _block(sampler: _QSampler, eff: Efficiency, seed: int, count: int, b: int) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(b,)))
    need = min(BLOCK_SIZE, count - b * BLOCK_SIZE)
    alpha = sampler.block(rng, need)
    if eff.variance > 0:
        s = np.sqrt(eff.variance / 2.0)
        alpha = alpha + s * (rng.standard_normal(need) + 1j * rng.standard_normal(need))
    return alpha


def _sample(matrix, levels, count, eta, seed, acceptance_floor=ACCEPTANCE_FLOOR, shards: int = 1) -> ComplexOutcomeSample:
    if int(count) != count or count < 1:
        raise ConfigError("sample count must be a positive integer")
    if shards < 1:
        raise ConfigError("shards must be >= 1")
    count = int(count)
    eff = _eff(eta)
    sampler = _QSampler(np.asarray(matrix), np.asarray(levels), acceptance_floor)
    nblocks = -(-count // BLOCK_SIZE)
    if shards == 1 or nblocks == 1:
        parts = [_block(sampler, eff, seed, count, b) for b in range(nblocks)]
    else:
        with ThreadPoolExecutor(max_workers=shards) as pool:
            parts = list(pool.map(lambda b: _block(sampler, eff, seed, count, b), range(nblocks)))
    return ComplexOutcomeSample(np.concatenate(parts), eff.eta, int(seed), sampler.acceptance)


def heterodyne_sample(
    rho, count: int, eta=1.0, seed: int = 0, acceptance_floor: float = ACCEPTANCE_FLOOR, shards: int = 1
) -> ComplexOutcomeSample:
    """I.i.d. heterodyne outcomes (Q-function convolved with the efficiency noise).

    Samples are generated in fixed blocks of ``BLOCK_SIZE`` with a per-block
    seed ``SeedSequence(seed, spawn_key=(block,))``, so the output depends
    only on ``seed`` and ``count``; ``shards`` threads produce blocks in
    parallel with identical results.
    """
    rho = _as_rho(rho)
    return _sample(rho.matrix, np.arange(rho.dim), count, eta, seed, acceptance_floor, shards)


# ----------------------------------------------------------------------------
# marginal densities
# ----------------------------------------------------------------------------


def trapezoid_weights(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.size < 2 or np.any(np.diff(x) <= 0):
        raise ConfigError("integration nodes must be strictly increasing with at least two points")
    d = np.diff(x)
    w = np.zeros(x.size)
    w[:-1] += d / 2
    w[1:] += d / 2
    return w


def number_state_weights(levels, h) -> np.ndarray:
    """``e^{-h} h^n / n!`` for each level (rows) and outcome ``h`` (columns)."""
    lv = np.asarray(levels, dtype=float)[:, None]
    h = np.asarray(h, dtype=float)[None, :]
    return np.exp(xlogy(lv, h) - h - gammaln(lv + 1.0))


def histogram_density(values, bins="fd", range_=None, weights=None, method="monte-carlo", samples=None, seed=None) -> OutcomeDensity:
    """Histogram estimate; ``bins`` may be ``"fd"``, a bin count or explicit edges."""
    values = np.asarray(values, dtype=float)
    if isinstance(bins, str):
        if bins != "fd":
            raise ConfigError(f"unknown binning rule {bins!r}")
        edges = np.histogram_bin_edges(values, bins="fd", range=range_)
        if edges.size - 1 > MAX_BINS:
            edges = np.linspace(edges[0], edges[-1], MAX_BINS + 1)
    elif np.ndim(bins) == 0:
        nb = int(bins)
        if not 1 <= nb <= MAX_BINS:
            raise ConfigError(f"bin count must be in [1, {MAX_BINS}]")
        lo, hi = (values.min(), values.max()) if range_ is None else range_
        edges = np.linspace(lo, hi, nb + 1)
    else:
        edges = np.asarray(bins, dtype=float)
    counts, edges = np.histogram(values, bins=edges, weights=weights)
    widths = np.diff(edges)
    total = values.size if weights is None else float(np.sum(weights))
    dens = counts / (total * widths)
    return OutcomeDensity(0.5 * (edges[1:] + edges[:-1]), dens, widths, method, samples, seed)


def number_marginal_density(
    rho, eta=1.0, h_grid=None, samples: int = 1_000_000, seed: int = 0
) -> OutcomeDensity:
    """Density of ``|alpha|^2``: ``sum_n rho_nn e^{-h} h^n/n!`` at ``eta = 1``.

    For ``eta < 1`` no closed form is used; the density is a Monte Carlo
    histogram with bins centered on ``h_grid``.
    """
    rho = _as_rho(rho)
    eff = _eff(eta)
    h = np.linspace(0.0, 4.0 * rho.dim, 4001) if h_grid is None else np.asarray(h_grid, dtype=float)
    if np.any(h < 0):
        raise ConfigError("h grid must be nonnegative")
    if eff.eta == 1.0:
        p = rho.populations @ number_state_weights(np.arange(rho.dim), h)
        return OutcomeDensity(h, p, trapezoid_weights(h), "analytic")
    edges = np.concatenate([[h[0]], 0.5 * (h[1:] + h[:-1]), [h[-1]]])
    sample = heterodyne_sample(rho, samples, eff, seed)
    return histogram_density(np.abs(sample.values) ** 2, bins=edges, samples=samples, seed=seed)


def quadrature_kernel_variance(eta) -> float:
    """Excess variance of heterodyne ``Re(alpha e^{-i phi})``: ``(2 - eta)/(4 eta)``."""
    eff = _eff(eta)
    return (2.0 - eff.eta) / (4.0 * eff.eta)


def quadrature_marginal_density(rho, phi: float = 0.0, eta=1.0, x_grid: GridSpec | None = None) -> OutcomeDensity:
    """Density of ``Re(alpha e^{-i phi})``: the ``X_phi`` density convolved with the heterodyne kernel."""
    rho = _as_rho(rho)
    spec = default_grid() if x_grid is None else x_grid
    return gaussian_convolve(grid_density(rho, phi, spec), quadrature_kernel_variance(eta))


def _plane_grid(rho: DensityOperator, variance: float, points: int):
    pops = rho.populations
    nz = np.flatnonzero(pops > 1e-14)
    top = int(nz[-1]) if nz.size else 0
    radius = np.sqrt(top + 1.0) + 6.0 + 5.0 * np.sqrt(variance)
    axis = np.linspace(-radius, radius, points)
    return axis, axis[1] - axis[0]


def smeared_q_grid(rho, eta=1.0, points: int = 601):
    """Q-function convolved with the efficiency noise on a square grid.

    Returns ``(alpha_grid, values, cell_area)``.
    """
    rho = _as_rho(rho)
    var = _eff(eta).variance
    axis, h = _plane_grid(rho, var, points)
    re, im = np.meshgrid(axis, axis, indexing="xy")
    alpha = re + 1j * im
    q = _q_values(_amplitudes(rho), np.arange(rho.dim), alpha.ravel()).reshape(alpha.shape)
    if var > 0:
        half = int(np.ceil(7.0 * np.sqrt(var) / h))
        k = h * np.arange(-half, half + 1)
        kr, ki = np.meshgrid(k, k)
        kern = np.exp(-(kr**2 + ki**2) / var) / (np.pi * var) * h * h
        q = fftconvolve(q, kern, mode="same")
    mass = float(q.sum() * h * h)
    if abs(mass - 1.0) > 1e-4:
        raise GridResolutionError(f"phase-space grid captures mass {mass:.6f}; widen the grid")
    return alpha, np.clip(q, 0.0, None), h * h


def generic_marginal_density(
    rho,
    f: PhaseSpacePolynomial,
    eta=1.0,
    bins="fd",
    method: str = "monte-carlo",
    samples: int = 1_000_000,
    seed: int = 0,
    points: int = 601,
) -> OutcomeDensity:
    """Distribution of ``w = f(alpha, conj(alpha))`` for heterodyne outcomes ``alpha``."""
    if not f.is_real():
        raise ConfigError("the phase-space function must be real-valued")
    rho = _as_rho(rho)
    if method == "monte-carlo":
        sample = heterodyne_sample(rho, samples, eta, seed)
        w = f(sample.values).real
        return histogram_density(w, bins, samples=samples, seed=seed)
    if method == "quadrature2d":
        alpha, q, area = smeared_q_grid(rho, eta, points)
        mass = q.ravel() * area
        keep = mass > 1e-14 * mass.max()
        alpha, mass = alpha.ravel()[keep], mass[keep]
        # each cell's mass is spread over SUBCELLS^2 stratified jittered points
        # (fixed seed) so bins narrower than a few cells do not alias
        h = np.sqrt(area)
        jitter = np.random.default_rng(0)
        corners = h * (np.arange(SUBCELLS) / SUBCELLS - 0.5)
        shifts = (corners[:, None] + 1j * corners[None, :]).ravel()
        if isinstance(bins, str) or np.ndim(bins) == 0:
            w0 = f(alpha).real
            pad = np.max(np.abs(f(alpha + h / 2 * (1 + 1j)).real - w0))
            nb = 256 if isinstance(bins, str) else int(bins)
            if not 1 <= nb <= MAX_BINS:
                raise ConfigError(f"bin count must be in [1, {MAX_BINS}]")
            edges = np.linspace(w0.min() - pad, w0.max() + pad, nb + 1)
        else:
            edges = np.asarray(bins, dtype=float)
        counts = np.zeros(edges.size - 1)
        for d in shifts:
            u = jitter.random((2, alpha.size)) * (h / SUBCELLS)
            counts += np.histogram(f(alpha + d + u[0] + 1j * u[1]).real, bins=edges, weights=mass)[0]
        counts /= shifts.size
        widths = np.diff(edges)
        return OutcomeDensity(0.5 * (edges[1:] + edges[:-1]), counts / widths, widths, "quadrature2d")
    raise ConfigError(f"unknown method {method!r}; use 'monte-carlo' or 'quadrature2d'")


# ----------------------------------------------------------------------------
# moments
# ----------------------------------------------------------------------------


def smeared_moment_polynomial(f: PhaseSpacePolynomial, l: int, eta=1.0) -> PhaseSpacePolynomial:
    """Anti-normal polynomial whose expectation is the ``l``-th outcome moment."""
    return gaussian_smear(f**l, _eff(eta).variance)


def heterodyne_moment(f: PhaseSpacePolynomial, l: int, rho, eta=1.0, levels=None) -> float:
    """``int p(w) w^l dw`` from ``Tr[rho Gamma[:f^l:_A]]`` (no sampling).

    ``levels`` gives the Fock index of each row of ``rho`` when the state is
    supported on a subset of levels (e.g. after number amplification).
    """
    if not f.is_real():
        raise ConfigError("the phase-space function must be real-valued")
    if int(l) != l or l < 0:
        raise ConfigError("moment order must be a nonnegative integer")
    rho = _as_rho(rho)
    if l == 0:
        return 1.0
    poly = smeared_moment_polynomial(f, l, eta)
    if levels is None:
        op = anti_normal_operator(poly, max(rho.dim, poly.max_index + 2)).matrix[: rho.dim, : rho.dim]
    else:
        levels = np.asarray(levels)
        op = anti_normal_operator(poly, max(levels.size, poly.max_index + 2), levels=levels).matrix
    return float(np.real(np.sum(rho.matrix.T * op)))
