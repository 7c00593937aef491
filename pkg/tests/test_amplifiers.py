import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, stats

from hetpreamp.amplifiers import (
    AmplifierSpec,
    _GRID_BASIS,
    grid_decomposition,
    k_amplifier_apply,
    k_gain_limit,
    number_amplify,
    preamp_moment,
    preamp_number_density,
    preamp_number_weight,
    preamp_quadrature_density,
    preamp_quadrature_kernel_variance,
    quadrature_amplifier_apply,
)
from hetpreamp.errors import ConfigError, GridResolutionError, TruncationError, UnsupportedObservableError
from hetpreamp.fock import (
    DensityOperator,
    PhaseSpacePolynomial,
    anti_normal_operator,
    coherent_state,
    fock_state,
    k_operator,
    number_operator,
    quadrature_operator,
    squeezed_vacuum,
    state_expectation,
    vacuum,
    expectation,
)
from hetpreamp.grid import fock_to_grid, grid_density, x_star_power

NUMBER = PhaseSpacePolynomial.number()
RE = PhaseSpacePolynomial.quadrature
IM2 = PhaseSpacePolynomial.im_alpha2()


def test_spec_validation():
    assert AmplifierSpec.number(3.0).gain == 3
    with pytest.raises(ConfigError, match="photon number"):
        AmplifierSpec.number(2.5)
    with pytest.raises(ConfigError):
        AmplifierSpec.number(0)
    with pytest.raises(ConfigError):
        AmplifierSpec.quadrature(0.0, 1.0)
    with pytest.raises(ConfigError):
        AmplifierSpec.k(0.5)
    with pytest.raises(ConfigError):
        AmplifierSpec("phase", 2)


def test_number_amplify_examples():
    out = number_amplify(fock_state(1, 4), 3)
    assert out.matrix[3, 3] == 1 and np.sum(np.abs(out.matrix)) == 1
    coh = coherent_state(np.sqrt(2), 24)
    amp = number_amplify(coh, 4)
    assert abs(expectation(number_operator(amp.dim), amp).real - 8) < 1e-9
    rho = coh.density()
    assert np.array_equal(number_amplify(rho, 1).matrix, rho.matrix)


def test_number_amplify_errors():
    with pytest.raises(TruncationError):
        number_amplify(fock_state(1, 4), 3, dim_out=5)
    with pytest.raises(ConfigError):
        number_amplify(fock_state(1, 4), 1.5)


@given(st.integers(1, 6), st.lists(st.complex_numbers(max_magnitude=1.5), min_size=2, max_size=3), st.lists(st.floats(0.05, 1), min_size=3, max_size=3))
def test_number_amplify_trace_and_positivity(g, betas, w):
    rho = DensityOperator.mixture(w[: len(betas)], [coherent_state(b, 24) for b in betas])
    out = number_amplify(rho, g)
    assert abs(np.trace(out.matrix).real - 1) < 1e-12
    assert np.linalg.eigvalsh(out.matrix)[0] > -1e-12
    assert np.allclose(np.linalg.eigvalsh(out.matrix)[-3:], np.linalg.eigvalsh(rho.matrix)[-3:], atol=1e-12)


@given(st.integers(0, 40), st.sampled_from([1, 2, 10, 100, 1000]), st.floats(0.0, 50.0))
def test_weight_is_gamma_pdf(n, g, h):
    oracle = stats.gamma(g * n + 1, scale=1.0 / g).pdf(h)
    got = preamp_number_weight(n, g, h)
    assert abs(got - oracle) <= 1e-9 * oracle + 1e-300


def test_weight_g1_is_poisson_shape():
    h = np.linspace(0, 20, 201)
    for n in range(8):
        assert np.allclose(preamp_number_weight(n, 1, h), np.exp(-h) * h**n / math.factorial(n), rtol=1e-12, atol=1e-300)


def test_weight_mean_std_n2_g100():
    f = lambda h: preamp_number_weight(2, 100, h)
    m0 = integrate.quad(f, 0, 10, points=[2.0], limit=200)[0]
    m1 = integrate.quad(lambda h: h * f(h), 0, 10, points=[2.0], limit=200)[0]
    m2 = integrate.quad(lambda h: h * h * f(h), 0, 10, points=[2.0], limit=200)[0]
    assert abs(m0 - 1) < 1e-10
    assert abs(m1 - 2.01) < 1e-9
    assert abs(np.sqrt(m2 - m1**2) - np.sqrt(201) / 100) < 1e-8
    assert abs(np.sqrt(m2 - m1**2) - 0.141) < 1e-3


@pytest.mark.parametrize("g", [1, 10, 100, 1000])
def test_weight_normalization(g):
    for n in range(31):
        peak = n
        width = np.sqrt(g * n + 1) / g
        lo, hi = max(0.0, peak - 40 * width), peak + 40 * width + 40.0 / g
        val = integrate.quad(lambda h: preamp_number_weight(n, g, h), lo, hi, points=[peak] if lo < peak < hi else None, limit=400, epsabs=1e-13, epsrel=1e-13)[0]
        assert abs(val - 1) < 1e-10, (n, g, val)


@pytest.mark.parametrize("g", [1, 7, 100])
def test_vacuum_density(g):
    h = np.linspace(0, 5, 200_001)
    d = preamp_number_density(vacuum(4), g, 1.0, h)
    assert np.allclose(d.values, g * np.exp(-g * h), rtol=1e-12)
    assert d.density.method == "analytic" and d.gain == g


def test_comb_resolution_error():
    with pytest.raises(GridResolutionError):
        preamp_number_density(coherent_state(np.sqrt(12), 64), 1000, 1.0, np.linspace(0, 30, 3001))


def test_default_grid_resolves_comb():
    d = preamp_number_density(coherent_state(np.sqrt(12), 64), 100)
    assert abs(d.mass() - 1) < 1e-4


def test_number_density_eta_below_one():
    rho = coherent_state(1.0, 24)
    g, eta = 4, 0.8
    d = preamp_number_density(rho, g, eta, np.linspace(0, 12, 1201), samples=200_000, seed=2)
    assert d.density.method == "monte-carlo"
    expected = (g * 1.0 + 1 + 0.25) / g
    assert abs(d.density.moment(1) / d.mass() - expected) < 0.01


def test_number_density_moments_match_preamp_moment():
    rho = coherent_state(1.2, 24)
    g = 4
    h = np.linspace(0, 40, 400_001)
    d = preamp_number_density(rho, g, 1.0, h)
    for l in (1, 2, 3):
        assert abs(integrate.simpson(h**l * d.values, x=h) - preamp_moment(AmplifierSpec.number(g), NUMBER, l, rho)) < 1e-7


def test_quadrature_apply_examples():
    out = quadrature_amplifier_apply(fock_to_grid(vacuum(4)), 0.7, 2)
    assert abs(out.x_moment(2) - 1) < 1e-8
    assert abs(out.norm2() - 1) < 1e-8
    psi = fock_to_grid(coherent_state(1.2 - 0.4j, 40))
    same = quadrature_amplifier_apply(psi, 0.0, 1.0)
    assert np.allclose(same.values, psi.values, atol=1e-14)
    beta, phi, g = 1.2 - 0.4j, 0.9, 3.0
    amp = quadrature_amplifier_apply(psi, phi, g)
    assert abs(amp.x_moment(1) - g * (beta * np.exp(-1j * phi)).real) < 1e-8


def test_preamp_quadrature_density_examples():
    d = preamp_quadrature_density(vacuum(4), 0.0, 10)
    assert abs(d.density.variance() - 0.2525) < 1e-8
    bare = grid_density(vacuum(4))
    big = preamp_quadrature_density(vacuum(4), 0.0, 1e4)
    assert np.sum(bare.weights * np.abs(big.values - bare.density)) < 1e-6
    assert abs(preamp_quadrature_kernel_variance(0.8, 2) - 0.09375) < 1e-15


def test_k_apply_identity_and_errors():
    psi = fock_to_grid(squeezed_vacuum(0.5, -np.pi / 2, 60))
    assert k_amplifier_apply(psi, 1.0) is psi
    with pytest.raises(ConfigError):
        k_amplifier_apply(psi, 20.0)
    with pytest.raises(ConfigError):
        k_amplifier_apply(psi, 0.5)
    assert k_gain_limit(psi) >= 8


@pytest.mark.parametrize("state", [coherent_state(np.exp(1j * np.pi / 4), 40), squeezed_vacuum(0.5, -np.pi / 2, 60), fock_state(3, 8)], ids=["coherent", "squeezed", "fock3"])
def test_k_apply_heisenberg(state):
    psi = fock_to_grid(state)
    out = k_amplifier_apply(psi, 4.0)
    assert out.norm_drift < 1e-6
    k_in = state_expectation(k_operator(state.dim), state).real
    if abs(k_in) > 1e-12:
        assert abs(out.k_expectation() / k_in - 4) < 4e-6
    conserved = psi.spec.integrate(x_star_power(psi.spec.nodes, 0.25) * psi.density())
    assert abs(out.x_moment(1) - conserved) < 1e-6


@pytest.mark.parametrize("g", [2.0, 4.0, 8.0])
def test_k_apply_vacuum_closed_form(g):
    """<X^2> after amplifying the vacuum equals <|X|^{2/g}> of the vacuum."""
    out = k_amplifier_apply(fock_to_grid(vacuum(4)), g)
    oracle = integrate.quad(lambda x: 2 * x ** (2 / g) * np.sqrt(2 / np.pi) * np.exp(-2 * x * x), 0, np.inf)[0]
    assert abs(out.x_moment(2) - oracle) < 1e-8


def test_k_apply_composition():
    psi = fock_to_grid(squeezed_vacuum(0.5, -np.pi / 2, 60))
    two = k_amplifier_apply(k_amplifier_apply(psi, 2.0), 4.0)
    one = k_amplifier_apply(psi, 8.0)
    err = np.sqrt(psi.spec.integrate(np.abs(two.values - one.values) ** 2))
    assert err < 1e-6


def test_preamp_moment_examples():
    coh = coherent_state(2, 40)
    assert abs(preamp_moment(AmplifierSpec.number(8), NUMBER, 1, coh) - 4.125) < 1e-10
    assert abs(preamp_moment(AmplifierSpec.quadrature(0, 10), RE(0), 2, vacuum(8)) - 0.2525) < 1e-12
    for state in (coherent_state(np.exp(1j * np.pi / 4), 40), squeezed_vacuum(0.5, -np.pi / 2, 60)):
        k = state_expectation(k_operator(state.dim), state).real
        for g in (2.0, 8.0):
            assert abs(preamp_moment(AmplifierSpec.k(g), IM2, 1, state) - k) < 1e-6


specs = st.sampled_from([AmplifierSpec.number(3), AmplifierSpec.quadrature(0.3, 5.0), AmplifierSpec.k(4.0)])


@given(specs, st.sampled_from([NUMBER, RE(0.2), IM2, PhaseSpacePolynomial.k_family(2.0)]), st.floats(0.2, 1.0))
def test_zeroth_preamp_moment(spec, f, eta):
    assert preamp_moment(spec, f, 0, vacuum(8), eta) == 1


def brute_quadrature_moment(state, phi, g, eta, l):
    """E[(X_phi + xi)^l] with bare moments from Fock matrix powers and normal xi."""
    dim = state.dim + 2 * l + 4
    psi = state.padded(dim)
    x = quadrature_operator(phi, dim).matrix
    bare = [state_expectation(type(k_operator(2))(np.linalg.matrix_power(x, j)), psi).real for j in range(l + 1)]
    var = (2 - eta) / (4 * eta * g * g)
    gm = [stats.norm(scale=np.sqrt(var)).moment(k) if k else 1.0 for k in range(l + 1)]
    return sum(math.comb(l, k) * bare[l - k] * gm[k] for k in range(l + 1))


@pytest.mark.parametrize("l", [1, 2, 3, 4])
@pytest.mark.parametrize("eta", [1.0, 0.8])
def test_quadrature_preamp_moment_vs_brute_force(l, eta):
    state = squeezed_vacuum(0.4, 0.5, 60)
    for g in (2.0, 10.0):
        for phi in (0.0, 0.9):
            got = preamp_moment(AmplifierSpec.quadrature(phi, g), RE(phi), l, state, eta)
            assert abs(got - brute_quadrature_moment(state, phi, g, eta, l)) < 1e-10


def test_quadrature_preamp_moment_vs_density():
    state = coherent_state(0.7 + 0.3j, 40)
    d = preamp_quadrature_density(state, 0.4, 3.0, 0.9)
    for l in (1, 2, 3):
        got = preamp_moment(AmplifierSpec.quadrature(0.4, 3.0), RE(0.4), l, state, 0.9)
        assert abs(d.density.moment(l) - got) < 1e-7


def test_quadrature_preamp_number_moment():
    """<|alpha|^2>/g under quadrature gain: Heisenberg map a -> mu a + nu a^dag, brute force."""
    g, phi = 3.0, 0.6
    state = coherent_state(0.5 + 0.2j, 40)
    mu = (g + 1 / g) / 2
    nu = np.exp(2j * phi) * (g - 1 / g) / 2
    dim = 60
    a = np.diag(np.sqrt(np.arange(1, dim)), 1)
    b = mu * a + nu * a.T
    op = b @ b.conj().T
    v = state.padded(dim).amplitudes
    oracle = np.vdot(v, op @ v).real / g
    assert abs(preamp_moment(AmplifierSpec.quadrature(phi, g), NUMBER, 1, state) - oracle) < 1e-10


def test_unsupported_grid_observable():
    with pytest.raises(UnsupportedObservableError):
        preamp_moment(AmplifierSpec.k(4.0), NUMBER, 2, vacuum(8))
    with pytest.raises(UnsupportedObservableError):
        preamp_moment(AmplifierSpec.k(4.0), PhaseSpacePolynomial.k_family(1.0), 2, vacuum(8))
    with pytest.raises(ConfigError):
        preamp_moment(AmplifierSpec.k(4.0), PhaseSpacePolynomial({(1, 0): 1.0}), 1, vacuum(8))


def test_grid_basis_forms():
    """Each anti-normal form maps to the corresponding operator built from Fock matrices."""
    dim = 40
    x = quadrature_operator(0, dim).matrix
    y = quadrature_operator(np.pi / 2, dim).matrix
    k = k_operator(dim).matrix
    ops = {"1": np.eye(dim), "X": x, "Y": y, "X2": x @ x, "Y2": y @ y, "K": k, "K2": k @ k}
    inner = dim - 4
    for name, terms in _GRID_BASIS.items():
        got = anti_normal_operator(PhaseSpacePolynomial(terms), dim).matrix
        assert np.max(np.abs(got - ops[name])[:inner, :inner]) < 1e-10, name


def test_im_alpha2_squared_decomposition():
    dec = grid_decomposition(IM2**2)
    assert dec == pytest.approx({"K2": 1.0, "X2": 1.0, "Y2": 1.0})
