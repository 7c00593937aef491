import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hetpreamp.errors import ConfigError, TruncationError
from hetpreamp.fock import (
    DensityOperator,
    PhaseSpacePolynomial,
    StateVector,
    anti_normal_operator,
    cat_state,
    coherent_state,
    expectation,
    fock_state,
    gaussian_smear,
    identity,
    k_operator,
    ladder_operators,
    number_operator,
    quadrature_operator,
    squeezed_vacuum,
    state_expectation,
    vacuum,
)


def brute_anti_normal(f: PhaseSpacePolynomial, dim: int) -> np.ndarray:
    """Oracle: plain matrix powers in a padded space, then cropped."""
    big = dim + 2 * f.max_index + 2
    a = np.diag(np.sqrt(np.arange(1, big, dtype=float)), 1)
    out = np.zeros((big, big), dtype=complex)
    for (m, n), c in f.terms.items():
        out += c * np.linalg.matrix_power(a, m) @ np.linalg.matrix_power(a.T, n)
    return out[:dim, :dim]


def test_coherent_zero_is_vacuum():
    assert np.array_equal(coherent_state(0, 16).amplitudes, vacuum(16).amplitudes)


def test_coherent_poisson_weight():
    psi = coherent_state(np.sqrt(12), 64)
    oracle = math.exp(-12) * 12**12 / math.factorial(12)
    assert abs(abs(psi.amplitudes[12]) ** 2 - oracle) < 1e-12
    assert abs(oracle - 0.11437) < 1e-5


def test_coherent_mean():
    psi = coherent_state(np.sqrt(12), 64)
    assert abs(np.sum(np.abs(psi.amplitudes) ** 2 * np.arange(64)) - 12) < 1e-8
    assert psi.tail_mass < 1e-10


def test_coherent_truncation_error():
    with pytest.raises(TruncationError):
        coherent_state(np.sqrt(12), 20)


def test_ladder_two_level():
    a, ad = ladder_operators(2)
    assert np.array_equal(a.matrix, np.array([[0, 1], [0, 0]], dtype=complex))
    assert np.array_equal(ad.matrix, a.matrix.conj().T)


def test_number_eigenvalue():
    n = number_operator(32)
    assert state_expectation(n, fock_state(5, 32)) == 5
    a, ad = ladder_operators(32)
    assert np.max(np.abs((ad @ a).matrix - n.matrix)) < 1e-13


def test_commutator_interior():
    a, ad = ladder_operators(32)
    comm = a.matrix @ ad.matrix - ad.matrix @ a.matrix
    assert np.allclose(comm[:31, :31], np.eye(31), atol=1e-13)
    assert comm[31, 31] != 1


def test_quadrature_examples():
    x0 = quadrature_operator(0, 16)
    assert abs(state_expectation(x0 @ x0, vacuum(16)) - 0.25) < 1e-14
    assert abs(state_expectation(quadrature_operator(np.pi / 2, 48), coherent_state(2, 48))) < 1e-12
    assert abs(state_expectation(x0.__class__(quadrature_operator(0, 48).matrix), coherent_state(1 + 1j, 48)) - 1) < 1e-10
    a, ad = ladder_operators(16)
    assert np.allclose(x0.matrix, (a.matrix + ad.matrix) / 2)


@given(st.floats(-np.pi, np.pi), st.complex_numbers(max_magnitude=2.5))
def test_quadrature_mean_law(phi, beta):
    psi = coherent_state(beta, 64)
    x = quadrature_operator(phi, 64)
    assert np.allclose(x.matrix, x.matrix.conj().T)
    assert abs(state_expectation(x, psi) - (beta * np.exp(-1j * phi)).real) < 1e-9


def test_k_examples():
    k = k_operator(40)
    assert np.max(np.abs(k.matrix - k.matrix.conj().T)) <= 1e-14
    assert np.all(np.diag(k.matrix) == 0)
    assert abs(state_expectation(k, coherent_state(np.exp(1j * np.pi / 4), 40)) - 1) < 1e-10


def test_k_equals_xy_plus_yx():
    dim = 40
    x = quadrature_operator(0, dim).matrix
    y = quadrature_operator(np.pi / 2, dim).matrix
    k = k_operator(dim).matrix
    inner = dim - 2
    assert np.max(np.abs((x @ y + y @ x)[:inner, :inner] - k[:inner, :inner])) < 1e-12


def test_x0_xpi2_commutator():
    dim = 30
    x = quadrature_operator(0, dim).matrix
    y = quadrature_operator(np.pi / 2, dim).matrix
    c = (x @ y - y @ x)[: dim - 1, : dim - 1]
    assert np.allclose(c, 0.5j * np.eye(dim - 1), atol=1e-13)


def test_anti_normal_examples():
    f = PhaseSpacePolynomial.number()
    assert state_expectation(anti_normal_operator(f, 16), vacuum(16)) == 1
    assert state_expectation(anti_normal_operator(f * f, 16), vacuum(16)) == 2
    op = anti_normal_operator(f, 16)
    for n in range(16):
        assert op.matrix[n, n] == n + 1


def test_anti_normal_truncation_error():
    with pytest.raises(TruncationError):
        anti_normal_operator(PhaseSpacePolynomial.number() ** 3, 4)


@pytest.mark.parametrize("l", [1, 2, 3])
def test_rising_factorial_identity(l):
    op = anti_normal_operator(PhaseSpacePolynomial.number() ** l, 40)
    for n in range(40):
        assert round(op.matrix[n, n].real) == math.factorial(n + l) // math.factorial(n)
        assert op.matrix[n, n].real == math.factorial(n + l) // math.factorial(n)


monomial = st.tuples(st.integers(0, 3), st.integers(0, 3))


@given(monomial, monomial, st.complex_numbers(max_magnitude=3), st.complex_numbers(max_magnitude=3))
def test_monomial_merge_two_orders(mn, pq, c, d):
    f = PhaseSpacePolynomial({mn: c})
    g = PhaseSpacePolynomial({pq: d})
    merged = PhaseSpacePolynomial({(mn[0] + pq[0], mn[1] + pq[1]): c * d})
    dim = 14
    a = anti_normal_operator(f * g, dim).matrix
    b = anti_normal_operator(g * f, dim).matrix
    assert np.allclose(a, b, atol=1e-9)
    assert np.allclose(a, anti_normal_operator(merged, dim).matrix, atol=1e-9)


@given(st.dictionaries(monomial, st.complex_numbers(max_magnitude=2), min_size=1, max_size=4))
def test_anti_normal_matches_matrix_products(terms):
    f = PhaseSpacePolynomial(terms)
    dim = 12
    assert np.allclose(anti_normal_operator(f, dim).matrix, brute_anti_normal(f, dim), atol=1e-9)


def test_real_polynomial_gives_hermitian_operator():
    for f in (PhaseSpacePolynomial.im_alpha2(), PhaseSpacePolynomial.k_family(0.7), PhaseSpacePolynomial.quadrature(0.3)):
        assert f.is_real()
        m = anti_normal_operator(f**2, 20).matrix
        assert np.max(np.abs(m - m.conj().T)) < 1e-12
    assert not PhaseSpacePolynomial({(2, 0): 1.0}).is_real()


def test_im_alpha2_maps_to_k():
    m = anti_normal_operator(PhaseSpacePolynomial.im_alpha2(), 20).matrix
    assert np.allclose(m, k_operator(20).matrix, atol=1e-14)


def test_expectation_examples():
    rho = coherent_state(np.sqrt(12), 64).density()
    assert abs(expectation(identity(64), rho) - 1) < 1e-12
    assert abs(expectation(number_operator(64), rho) - 12) < 1e-8
    x = quadrature_operator(0, 8)
    assert abs(expectation(x @ x, vacuum(8).density()) - 0.25) < 1e-14
    with pytest.raises(ConfigError):
        expectation(identity(8), rho)


@given(
    st.lists(st.floats(0.01, 1.0), min_size=1, max_size=4),
    st.lists(st.complex_numbers(max_magnitude=2), min_size=4, max_size=4),
)
def test_density_operator_invariants(weights, betas):
    states = [coherent_state(b, 40) for b in betas[: len(weights)]]
    rho = DensityOperator.mixture(weights, states)
    assert abs(np.trace(rho.matrix).real - 1) < 1e-10
    assert np.max(np.abs(rho.matrix - rho.matrix.conj().T)) < 1e-12
    assert np.linalg.eigvalsh(rho.matrix)[0] > -1e-10


def test_density_operator_validation():
    with pytest.raises(ConfigError):
        DensityOperator(np.array([[1, 1], [0, 0]]))
    with pytest.raises(ConfigError):
        DensityOperator(np.eye(2))
    with pytest.raises(ConfigError):
        DensityOperator(np.diag([1.5, -0.5]))
    with pytest.raises(ConfigError):
        StateVector(np.array([1.0, 1.0]))
    with pytest.raises(ConfigError):
        fock_state(1, 1)


@pytest.mark.parametrize("r,theta", [(0.3, 0.0), (0.5, -np.pi / 2), (0.8, 1.1)])
def test_squeezed_vacuum_moments(r, theta):
    psi = squeezed_vacuum(r, theta, 80)
    a, _ = ladder_operators(80)
    assert abs(state_expectation(a @ a, psi) + np.exp(1j * theta) * np.sinh(r) * np.cosh(r)) < 1e-9
    assert abs(state_expectation(number_operator(80), psi) - np.sinh(r) ** 2) < 1e-9


def test_cat_parity():
    even = cat_state(1.5, 40, 1).amplitudes
    odd = cat_state(1.5, 40, -1).amplitudes
    assert np.all(np.abs(even[1::2]) < 1e-15)
    assert np.all(np.abs(odd[::2]) < 1e-15)


@given(st.complex_numbers(max_magnitude=2), st.floats(0, 2), st.sampled_from([1, 2, 3]))
def test_gaussian_smear_matches_quadrature_average(beta, variance, l):
    """E_b[f(beta + b)] over complex Gaussian b with E|b|^2 = variance, by Gauss-Hermite."""
    f = PhaseSpacePolynomial.number() ** l + PhaseSpacePolynomial.im_alpha2()
    sm = gaussian_smear(f, variance)
    x, w = np.polynomial.hermite.hermgauss(20)
    s = np.sqrt(variance)
    pts = beta + s * (x[:, None] + 1j * x[None, :])
    oracle = np.sum(w[:, None] * w[None, :] * f(pts)) / np.pi
    assert abs(sm(beta) - oracle) < 1e-8 * max(1.0, abs(oracle))
