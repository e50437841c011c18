"""Exact and Monte Carlo B_k / jackknife variance decompositions for
functions of independent variables, with LCS variance experiments."""

from .exact import (
    CorrelationTable, DecompositionReport, IdentityReport, b_and_derivatives,
    correlation_table, covariance_b, decompose, interpolation_check, jackknife_from_table,
    t_family, verify_identities, weak_talagrand_check,
)
from .model import (
    CoordFunction, FiniteDistribution, InvalidMaskError, ProductSpace, RandomSource, SizeError,
    delta_eval, draw_config, resample,
)
from .montecarlo import Estimate, EstimatorConfig, estimate_b_k, estimate_variance, paired_square_mean

__all__ = [
    "CoordFunction", "CorrelationTable", "DecompositionReport", "Estimate", "EstimatorConfig",
    "FiniteDistribution", "IdentityReport", "InvalidMaskError", "ProductSpace", "RandomSource",
    "SizeError", "b_and_derivatives", "correlation_table", "covariance_b", "decompose",
    "delta_eval", "draw_config", "estimate_b_k", "estimate_variance", "interpolation_check",
    "jackknife_from_table", "paired_square_mean", "resample", "t_family", "verify_identities",
    "weak_talagrand_check",
]
