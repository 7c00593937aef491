"""Preamplified heterodyne detection: Fock and grid numerics, ideal amplifiers, verification."""

from .amplifiers import (
    AmplifierSpec,
    PreampDensity,
    k_amplifier_apply,
    number_amplify,
    preamp_moment,
    preamp_number_density,
    preamp_number_weight,
    preamp_quadrature_density,
    quadrature_amplifier_apply,
)
from .errors import (
    BranchError,
    ConfigError,
    EnvelopeError,
    GridResolutionError,
    HetPreampError,
    TruncationError,
    UnsupportedObservableError,
)
from .fock import (
    DensityOperator,
    FockOperator,
    PhaseSpacePolynomial,
    StateVector,
    anti_normal_operator,
    cat_state,
    coherent_state,
    fock_state,
    gaussian_smear,
    squeezed_vacuum,
    vacuum,
)
from .grid import GridSpec, GridWavefunction, OutcomeDensity, default_grid, fock_to_grid, make_grid
from .heterodyne import (
    ComplexOutcomeSample,
    Efficiency,
    generic_marginal_density,
    heterodyne_moment,
    heterodyne_sample,
    number_marginal_density,
    q_function,
    quadrature_marginal_density,
)

__all__ = [name for name in dir() if not name.startswith("_")]
