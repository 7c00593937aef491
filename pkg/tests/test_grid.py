import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import eval_hermite, factorial

from hetpreamp.errors import ConfigError, GridResolutionError
from hetpreamp.fock import StateVector, coherent_state, fock_state, squeezed_vacuum
from hetpreamp.grid import (
    OutcomeDensity,
    default_grid,
    fock_to_grid,
    gaussian_convolve,
    grid_density,
    grid_from_function,
    grid_to_fock,
    hermite_functions,
    make_grid,
    quadrature_density,
    x_star_power,
)


def hermite_oracle(n: int, x: np.ndarray) -> np.ndarray:
    """Closed-form eigenfunction for X = (a + a^dag)/2: sqrt(2) * standard h_n(sqrt(2) x)."""
    y = np.sqrt(2.0) * x
    return 2**0.25 * eval_hermite(n, y) * np.exp(-(y**2) / 2) / np.sqrt(2.0**n * factorial(n) * np.sqrt(np.pi))


@pytest.fixture(scope="module")
def small_grid():
    return make_grid(8, 2000, 1e-6)


def test_make_grid_counts(small_grid):
    center = 2 * small_grid.center_points - 1
    assert small_grid.size == 4000 + center
    assert np.all(np.abs(small_grid.nodes[small_grid.center]) < 1e-6)
    assert np.all(np.diff(small_grid.nodes) > 0)


def test_make_grid_vacuum_norm(small_grid):
    vac = (2 / np.pi) ** 0.5 * np.exp(-2 * small_grid.nodes**2)
    assert abs(small_grid.integrate(vac) - 1) < 1e-8


def test_make_grid_symmetry(small_grid):
    assert np.array_equal(small_grid.nodes, -small_grid.nodes[::-1])
    assert np.array_equal(small_grid.weights, small_grid.weights[::-1])


def test_make_grid_errors():
    with pytest.raises(GridResolutionError):
        make_grid(8, 50, 1e-8)
    with pytest.raises(ConfigError):
        make_grid(1, 2000, 2)


def test_vacuum_value():
    psi = fock_to_grid(fock_state(0, 4))
    i0 = np.flatnonzero(psi.spec.nodes == 0)[0]
    assert abs(psi.values[i0] - (2 / np.pi) ** 0.25) < 1e-12
    assert abs((2 / np.pi) ** 0.25 - 0.8932) < 1e-4


def test_one_photon_odd():
    psi = fock_to_grid(fock_state(1, 4))
    i0 = np.flatnonzero(psi.spec.nodes == 0)[0]
    assert psi.values[i0] == 0
    assert np.allclose(psi.values, -psi.values[::-1], atol=0)


def test_hermite_functions_match_closed_form():
    x = np.linspace(-5, 5, 101)
    h = hermite_functions(12, x)
    for n in range(13):
        assert np.allclose(h[n], hermite_oracle(n, x), atol=1e-12)


def test_roundtrip_n20():
    psi = fock_to_grid(fock_state(20, 32))
    back = fock_to_grid(grid_to_fock(psi, 32))
    err = np.sqrt(psi.spec.integrate(np.abs(psi.values - back.values) ** 2))
    assert err < 1e-8


def test_orthonormality():
    spec = default_grid()
    h = hermite_functions(32, spec.nodes)
    gram = (h * spec.weights) @ h.T
    assert np.max(np.abs(gram - np.eye(33))) < 1e-8


@given(st.integers(0, 40))
def test_parity(n):
    psi = fock_to_grid(fock_state(n, 48))
    sign = (-1) ** n
    assert np.array_equal(psi.values[::-1], sign * psi.values)


def test_norm_drift_error():
    with pytest.raises(GridResolutionError):
        fock_to_grid(fock_state(30, 32), make_grid(2, 200, 1e-3))


def test_quadrature_density_examples():
    vac = quadrature_density(fock_to_grid(fock_state(0, 4)))
    assert abs(vac.mass() - 1) < 1e-8
    assert abs(vac.variance() - 0.25) < 1e-8
    coh = quadrature_density(fock_to_grid(coherent_state(2, 40)))
    assert abs(coh.mean() - 2) < 1e-6
    one = quadrature_density(fock_to_grid(fock_state(1, 4)))
    assert one.density[one.support == 0][0] == 0


def test_grid_density_rotation():
    beta = 1.0 + 0.5j
    p = grid_density(coherent_state(beta, 40), np.pi / 2)
    assert abs(p.mean() - beta.imag) < 1e-8


def narrow_density(spec, var):
    p = np.exp(-spec.nodes**2 / (2 * var)) / np.sqrt(2 * np.pi * var)
    return OutcomeDensity(spec.nodes, p, spec.weights)


def test_convolve_variance_additivity():
    spec = default_grid()
    p = narrow_density(spec, 1e-4)
    out = gaussian_convolve(p, 1 / 8)
    assert abs(out.variance() - (1 / 8 + p.variance())) < 1e-6


def test_convolve_tiny_kernel_is_identity():
    p = quadrature_density(fock_to_grid(coherent_state(1.3, 40)))
    out = gaussian_convolve(p, 1e-12)
    assert np.max(np.abs(out.density - p.density)) < 1e-6


def test_convolve_vacuum():
    p = quadrature_density(fock_to_grid(fock_state(0, 4)))
    out = gaussian_convolve(p, 0.25)
    assert abs(out.variance() - 0.5) < 1e-8


@pytest.mark.parametrize("var", [1e-3, 0.05, 0.3])
def test_convolve_preserves_mass_and_mean(var):
    p = quadrature_density(fock_to_grid(coherent_state(2, 40)))
    out = gaussian_convolve(p, var)
    assert abs(out.mass() - p.mass()) < 1e-8
    assert abs(out.mean() - p.mean()) < 1e-8


def test_convolve_reflection():
    p = quadrature_density(fock_to_grid(squeezed_vacuum(0.4, 0.0, 40)))
    out = gaussian_convolve(p, 0.1)
    assert np.max(np.abs(out.density - out.density[::-1])) < 1e-12


def test_convolve_errors():
    p = quadrature_density(fock_to_grid(fock_state(0, 4)))
    with pytest.raises(ConfigError):
        gaussian_convolve(p, 0)
    with pytest.raises(GridResolutionError):
        gaussian_convolve(p, 100.0)


def test_x_star_power_examples():
    assert x_star_power(-2, 3) == -8
    assert x_star_power(0.5, 2) == 0.25
    assert x_star_power(0.0, 0.5) == 0.0
    assert x_star_power(-1e-200, 4) == 0.0
    with pytest.raises(ConfigError):
        x_star_power(1.0, 0)


@given(st.floats(1e-3, 1e3), st.booleans(), st.floats(0.2, 8))
def test_x_star_power_inverse(ax, neg, g):
    x = -ax if neg else ax
    back = x_star_power(x_star_power(x, g), 1 / g)
    assert abs(back - x) <= 1e-12 * abs(x)


def test_grid_expectations_against_fock():
    beta = 0.8 * np.exp(0.3j)
    psi = fock_to_grid(coherent_state(beta, 40))
    # normal-ordered oracles for a coherent state
    k = (beta**2).imag
    y = beta.imag
    assert abs(psi.k_expectation() - k) < 1e-10
    assert abs(psi.k2_expectation() - (k**2 + abs(beta) ** 2 + 0.5)) < 1e-8
    assert abs(psi.y2_expectation() - (y**2 + 0.25)) < 1e-10
    assert abs(psi.number_expectation() - abs(beta) ** 2) < 1e-10


def test_spline_route_matches_fock_route():
    psi = fock_to_grid(squeezed_vacuum(0.5, -np.pi / 2, 60))
    bare = grid_from_function(lambda x: psi.values, psi.spec)
    assert abs(bare.k_expectation() - psi.k_expectation()) < 1e-7
    assert abs(bare.k2_expectation() - psi.k2_expectation()) < 1e-6
