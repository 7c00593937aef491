"""Truncated Fock-space states and operators for a single bosonic mode.

Everything is dense numpy. The quadrature convention is
``X_phi = (a^dag e^{i phi} + a e^{-i phi}) / 2`` so the vacuum variance is 1/4.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb, factorial
from typing import Iterable, Mapping

import numpy as np
from scipy.special import gammaln, xlogy
from scipy.stats import poisson

from .errors import ConfigError, TruncationError

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-10
PSD_TOL = 1e-10
NORM_TOL = 1e-12
DEFAULT_TAIL_TOL = 1e-10


def _check_dim(dim: int) -> int:
    if int(dim) != dim or dim < 2:
        raise ConfigError(f"Fock dimension must be an integer >= 2, got {dim!r}")
    return int(dim)


@dataclass(frozen=True)
class StateVector:
    """Pure state ``sum_n c_n |n>`` on the levels ``0 .. dim-1``.

    ``tail_mass`` records the probability discarded by the truncation.
    """

    amplitudes: np.ndarray
    tail_mass: float = 0.0

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.ndim != 1 or amps.size < 2:
            raise ConfigError("amplitudes must be a 1-d array with at least two levels")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > NORM_TOL:
            raise ConfigError(f"state vector is not normalized (norm={norm!r})")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def normalized(cls, amplitudes, tail_mass: float = 0.0) -> "StateVector":
        amps = np.asarray(amplitudes, dtype=complex)
        norm = np.linalg.norm(amps)
        if norm == 0.0:
            raise ConfigError("cannot normalize the zero vector")
        return cls(amps / norm, tail_mass)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def density(self) -> "DensityOperator":
        return DensityOperator(np.outer(self.amplitudes, self.amplitudes.conj()))

    def padded(self, dim: int) -> "StateVector":
        """Same state embedded in a larger truncation."""
        if dim < self.dim:
            raise ConfigError("padded() can only enlarge the truncation")
        amps = np.zeros(dim, dtype=complex)
        amps[: self.dim] = self.amplitudes
        return StateVector(amps, self.tail_mass)


@dataclass(frozen=True)
class DensityOperator:
    """Mixed state in the truncated Fock basis (validated on construction)."""

    matrix: np.ndarray

    def __post_init__(self):
        rho = np.array(self.matrix, dtype=complex)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1] or rho.shape[0] < 2:
            raise ConfigError("density matrix must be square with dim >= 2")
        herm = np.max(np.abs(rho - rho.conj().T))
        if herm > HERMITIAN_TOL:
            raise ConfigError(f"density matrix is not Hermitian (residual {herm:.3e})")
        rho = 0.5 * (rho + rho.conj().T)
        tr = np.trace(rho).real
        if abs(tr - 1.0) > TRACE_TOL:
            raise ConfigError(f"density matrix trace is {tr!r}, expected 1")
        lo = np.linalg.eigvalsh(rho)[0]
        if lo < -PSD_TOL:
            raise ConfigError(f"density matrix is not positive semidefinite (min eigenvalue {lo:.3e})")
        rho.setflags(write=False)
        object.__setattr__(self, "matrix", rho)

    @classmethod
    def mixture(cls, weights: Iterable[float], states: Iterable[StateVector]) -> "DensityOperator":
        weights = list(weights)
        states = list(states)
        dim = max(s.dim for s in states)
        rho = np.zeros((dim, dim), dtype=complex)
        for w, s in zip(weights, states):
            v = s.padded(dim).amplitudes
            rho += w * np.outer(v, v.conj())
        return cls(rho / sum(weights))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def populations(self) -> np.ndarray:
        """Fock-diagonal ``rho_nn`` (clipped at zero)."""
        return np.clip(np.diag(self.matrix).real, 0.0, None)

    def eigenstates(self, cutoff: float = 1e-14) -> tuple[np.ndarray, np.ndarray]:
        """Weights and orthonormal vectors (as columns) of the nonnegligible eigenspaces."""
        w, v = np.linalg.eigh(self.matrix)
        keep = w > cutoff
        w = w[keep]
        return w / w.sum(), v[:, keep]

    def rotated(self, phi: float) -> "DensityOperator":
        """``e^{-i phi N} rho e^{i phi N}``: maps X_phi statistics onto X_0."""
        ph = np.exp(-1j * phi * np.arange(self.dim))
        return DensityOperator(ph[:, None] * self.matrix * ph.conj()[None, :])


@dataclass(frozen=True)
class FockOperator:
    matrix: np.ndarray
    label: str = "custom"

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __matmul__(self, other: "FockOperator") -> "FockOperator":
        return FockOperator(self.matrix @ other.matrix, f"({self.label})({other.label})")

    @property
    def dag(self) -> "FockOperator":
        return FockOperator(self.matrix.conj().T, f"({self.label})^dag")


# ----------------------------------------------------------------------------
# phase-space polynomials
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class PhaseSpacePolynomial:
    """``f(alpha, conj(alpha)) = sum_{m,n} c_mn alpha^m conj(alpha)^n``."""

    terms: Mapping[tuple[int, int], complex] = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        clean = {}
        for (m, n), c in dict(self.terms).items():
            if m < 0 or n < 0 or int(m) != m or int(n) != n:
                raise ConfigError(f"invalid monomial exponents {(m, n)}")
            c = complex(c)
            if c != 0:
                clean[(int(m), int(n))] = clean.get((int(m), int(n)), 0) + c
        object.__setattr__(self, "terms", clean)

    # constructors -----------------------------------------------------------
    @classmethod
    def constant(cls, value: complex = 1.0) -> "PhaseSpacePolynomial":
        return cls({(0, 0): value}, name=f"{value}")

    @classmethod
    def number(cls) -> "PhaseSpacePolynomial":
        """``|alpha|^2``."""
        return cls({(1, 1): 1.0}, name="abs_alpha2")

    @classmethod
    def quadrature(cls, phi: float = 0.0) -> "PhaseSpacePolynomial":
        """``Re(alpha e^{-i phi})``."""
        e = np.exp(-1j * phi)
        return cls({(1, 0): e / 2, (0, 1): np.conj(e) / 2}, name=f"re_alpha_phi={phi!r}")

    @classmethod
    def im_alpha2(cls) -> "PhaseSpacePolynomial":
        """``Im(alpha^2)``, whose anti-normal ordering is K."""
        return cls({(2, 0): -0.5j, (0, 2): 0.5j}, name="im_alpha2")

    @classmethod
    def k_family(cls, c: float = 0.0) -> "PhaseSpacePolynomial":
        """``-i(alpha^2 - conj(alpha)^2 + i c |alpha|^2)/2 = Im(alpha^2) + (c/2)|alpha|^2``."""
        terms = {(2, 0): -0.5j, (0, 2): 0.5j}
        if c:
            terms[(1, 1)] = c / 2
        return cls(terms, name=f"k_family_c={c!r}")

    # algebra ----------------------------------------------------------------
    def __add__(self, other: "PhaseSpacePolynomial") -> "PhaseSpacePolynomial":
        terms = dict(self.terms)
        for k, c in other.terms.items():
            terms[k] = terms.get(k, 0) + c
        return PhaseSpacePolynomial(terms)

    def __mul__(self, other) -> "PhaseSpacePolynomial":
        if not isinstance(other, PhaseSpacePolynomial):
            return PhaseSpacePolynomial({k: c * other for k, c in self.terms.items()}, self.name)
        terms: dict[tuple[int, int], complex] = {}
        for (m, n), c in self.terms.items():
            for (p, q), d in other.terms.items():
                key = (m + p, n + q)
                terms[key] = terms.get(key, 0) + c * d
        return PhaseSpacePolynomial(terms)

    __rmul__ = __mul__

    def __pow__(self, l: int) -> "PhaseSpacePolynomial":
        if int(l) != l or l < 0:
            raise ConfigError("polynomial powers must be nonnegative integers")
        out = PhaseSpacePolynomial.constant(1.0)
        for _ in range(int(l)):
            out = out * self
        return PhaseSpacePolynomial(out.terms, f"({self.name})^{l}" if l != 1 else self.name)

    def is_real(self, tol: float = 1e-14) -> bool:
        return all(abs(c - np.conj(self.terms.get((n, m), 0))) <= tol for (m, n), c in self.terms.items())

    @property
    def degree(self) -> int:
        return max((m + n for m, n in self.terms), default=0)

    @property
    def max_index(self) -> int:
        return max((max(m, n) for m, n in self.terms), default=0)

    def __call__(self, alpha):
        alpha = np.asarray(alpha, dtype=complex)
        out = np.zeros(alpha.shape, dtype=complex)
        ab = alpha.conj()
        for (m, n), c in self.terms.items():
            out += c * alpha**m * ab**n
        return out

    def evaluate_real(self, alpha) -> np.ndarray:
        if not self.is_real():
            raise ConfigError("polynomial is not real-valued")
        return self(alpha).real


def gaussian_smear(f: PhaseSpacePolynomial, variance: float) -> PhaseSpacePolynomial:
    """Average of the anti-normal monomials under ``a -> a - beta`` with Gaussian ``beta``.

    ``beta`` is complex Gaussian with ``E|beta|^2 = variance``; since only
    ``E[beta^j conj(beta)^j] = j! variance^j`` survive, the result stays
    anti-normally ordered.
    """
    if variance < 0:
        raise ConfigError("smearing variance must be nonnegative")
    if variance == 0:
        return f
    terms: dict[tuple[int, int], complex] = {}
    for (m, n), c in f.terms.items():
        for j in range(min(m, n) + 1):
            key = (m - j, n - j)
            terms[key] = terms.get(key, 0) + c * comb(m, j) * comb(n, j) * factorial(j) * variance**j
    return PhaseSpacePolynomial(terms, f.name)


# ----------------------------------------------------------------------------
# states
# ----------------------------------------------------------------------------


def fock_state(n: int, dim: int) -> StateVector:
    dim = _check_dim(dim)
    if not 0 <= n < dim:
        raise TruncationError(f"|{n}> does not fit in dim={dim}")
    amps = np.zeros(dim, dtype=complex)
    amps[n] = 1.0
    return StateVector(amps)


def vacuum(dim: int) -> StateVector:
    return fock_state(0, dim)


def coherent_state(beta: complex, dim: int, tail_tol: float = DEFAULT_TAIL_TOL) -> StateVector:
    """Coherent state ``|beta>`` truncated to ``dim`` levels and renormalized.

    Raises :class:`TruncationError` when the discarded Poisson tail exceeds
    ``tail_tol``.
    """
    dim = _check_dim(dim)
    beta = complex(beta)
    mean = abs(beta) ** 2
    tail = float(poisson.sf(dim - 1, mean)) if mean > 0 else 0.0
    if tail > tail_tol:
        raise TruncationError(f"coherent state with |beta|^2={mean:g} loses tail mass {tail:.3e} at dim={dim}")
    n = np.arange(dim)
    logmag = xlogy(n, abs(beta)) - 0.5 * gammaln(n + 1) - mean / 2
    amps = np.exp(logmag) * np.exp(1j * n * np.angle(beta))
    return StateVector(amps / np.linalg.norm(amps), tail)


def squeezed_vacuum(r: float, theta: float, dim: int, tail_tol: float = DEFAULT_TAIL_TOL) -> StateVector:
    """``exp[(conj(xi) a^2 - xi a^dag^2)/2]|0>`` with ``xi = r e^{i theta}``.

    With this convention ``<a^2> = -e^{i theta} sinh r cosh r``, so
    ``theta = -pi/2`` gives ``<K> = sinh r cosh r > 0``.
    """
    dim = _check_dim(dim)
    if r < 0:
        raise ConfigError("squeezing parameter r must be nonnegative")
    amps = np.zeros(dim, dtype=complex)
    m = np.arange((dim + 1) // 2)
    if r == 0:
        amps[0] = 1.0
        return StateVector(amps)
    logmag = m * np.log(np.tanh(r)) + 0.5 * gammaln(2 * m + 1) - m * np.log(2) - gammaln(m + 1) - 0.5 * np.log(np.cosh(r))
    amps[2 * m] = np.exp(logmag) * (-np.exp(1j * theta)) ** m
    tail = max(0.0, 1.0 - float(np.sum(np.abs(amps) ** 2)))
    if tail > tail_tol:
        raise TruncationError(f"squeezed vacuum r={r:g} loses tail mass {tail:.3e} at dim={dim}")
    return StateVector(amps / np.linalg.norm(amps), tail)


def cat_state(beta: complex, dim: int, parity: int = 1, tail_tol: float = DEFAULT_TAIL_TOL) -> StateVector:
    """Even (``parity=+1``) or odd (``parity=-1``) superposition of ``|beta>`` and ``|-beta>``."""
    if parity not in (1, -1):
        raise ConfigError("cat parity must be +1 or -1")
    plus = coherent_state(beta, dim, tail_tol)
    minus = coherent_state(-beta, dim, tail_tol)
    return StateVector.normalized(plus.amplitudes + parity * minus.amplitudes, plus.tail_mass)


# ----------------------------------------------------------------------------
# operators
# ----------------------------------------------------------------------------


def ladder_operators(dim: int) -> tuple[FockOperator, FockOperator]:
    """Annihilation and creation operators; ``[a, a^dag] = 1`` except on the top level."""
    dim = _check_dim(dim)
    a = np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1).astype(complex)
    return FockOperator(a, "a"), FockOperator(a.T.copy(), "a^dag")


def number_operator(dim: int) -> FockOperator:
    dim = _check_dim(dim)
    return FockOperator(np.diag(np.arange(dim, dtype=float)).astype(complex), "N")


def identity(dim: int) -> FockOperator:
    return FockOperator(np.eye(_check_dim(dim), dtype=complex), "1")


def quadrature_operator(phi: float, dim: int) -> FockOperator:
    a, ad = ladder_operators(dim)
    m = 0.5 * (ad.matrix * np.exp(1j * phi) + a.matrix * np.exp(-1j * phi))
    return FockOperator(m, f"X_{phi:g}")


def k_operator(dim: int) -> FockOperator:
    """``K = -(i/2)(a^2 - a^dag^2) = XY + YX``, built from exact ``n -> n +- 2`` elements."""
    dim = _check_dim(dim)
    k = np.zeros((dim, dim), dtype=complex)
    n = np.arange(dim - 2)
    el = np.sqrt((n + 1.0) * (n + 2.0))
    # <n|a^2|n+2> = sqrt((n+1)(n+2))
    k[n, n + 2] = -0.5j * el
    k[n + 2, n] = 0.5j * el
    return FockOperator(k, "K")


def _rising(levels: np.ndarray, count: int) -> np.ndarray:
    """``prod_{i=1}^{count} (levels + i)`` as floats."""
    out = np.ones(levels.shape, dtype=float)
    for i in range(1, count + 1):
        out *= levels + i
    return out


def anti_normal_operator(f: PhaseSpacePolynomial, dim: int, levels: np.ndarray | None = None) -> FockOperator:
    """Anti-normally ordered operator ``sum c_mn a^m a^dag^n``.

    Matrix elements are evaluated in closed form,
    ``<j|a^m a^dag^n|k> = delta_{j,k+n-m} sqrt[(k+1)...(k+n) (j+1)...(j+m)]``,
    so they are exact for every retained pair of levels (no top-level damage).
    ``levels`` selects an arbitrary set of Fock indices for rows/columns, which
    is how operators are restricted to the image of the number amplifier.
    """
    dim = _check_dim(dim)
    if f.max_index + 2 > dim:
        raise TruncationError(f"polynomial degree {f.max_index} too high for dim={dim}")
    lv = np.arange(dim) if levels is None else np.asarray(levels, dtype=np.int64)
    size = lv.size
    out = np.zeros((size, size), dtype=complex)
    pos = {int(v): i for i, v in enumerate(lv)}
    lvf = lv.astype(float)
    for (m, n), c in f.terms.items():
        shift = n - m
        if shift == 0:
            out[np.arange(size), np.arange(size)] += c * _rising(lvf, n)
            continue
        cols = []
        rows = []
        for col, k in enumerate(lv):
            row = pos.get(int(k) + shift)
            if row is not None:
                rows.append(row)
                cols.append(col)
        if not rows:
            continue
        rows = np.array(rows)
        cols = np.array(cols)
        out[rows, cols] += c * np.sqrt(_rising(lvf[cols], n) * _rising(lvf[rows], m))
    return FockOperator(out, f"anti-normal[{f.name}]")


def expectation(op: FockOperator, rho: DensityOperator) -> complex:
    """``Tr[rho op]``."""
    if op.dim != rho.dim:
        raise ConfigError(f"dimension mismatch: operator {op.dim}, state {rho.dim}")
    return complex(np.sum(rho.matrix.T * op.matrix))


def state_expectation(op: FockOperator, psi: StateVector) -> complex:
    if op.dim != psi.dim:
        raise ConfigError(f"dimension mismatch: operator {op.dim}, state {psi.dim}")
    return complex(np.vdot(psi.amplitudes, op.matrix @ psi.amplitudes))
