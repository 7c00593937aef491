"""Executable checks: Stirling identities, su(1,1) disentangling, moment criteria."""

from .bch import BchInput, BchOutput, bch_coefficients, bch_matrix_check
from .moments import MomentReport, k_counterexample_report, moment_condition_report
from .stirling import StirlingTable, stirling_density_bounds, stirling_first_kind

__all__ = [
    "BchInput",
    "BchOutput",
    "MomentReport",
    "StirlingTable",
    "bch_coefficients",
    "bch_matrix_check",
    "k_counterexample_report",
    "moment_condition_report",
    "stirling_density_bounds",
    "stirling_first_kind",
]
