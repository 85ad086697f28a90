"""Simulation and verification of fractional Lévy processes, fractional Lévy
Ornstein–Uhlenbeck processes with Gamma-mixed rates, and their aggregation limit."""

__version__ = "0.1.0"

from .errors import (CouplingError, DomainError, FitError, GmflouError, ParameterError,
                     QuadratureError, StatisticsError)
from .levy import CompensatedGamma, CompoundPoisson, ExponentialJumps, LevySpec, NormalJumps, SeedLineage, levy_from_dict
from .scheme import SampleGrid
from .ensemble import PathEnsemble
from .flp import FlpParams, cd_constant, flp_covariance, increment_covariance_delta, kernel_f, simulate_flp, vd_squared
from .flou import (LambdaSample, MixingParams, mixture_kernel, sample_lambda, simulate_aggregated,
                   simulate_flou_fixed, variance_aggregated, variance_flou)
from .limit import (GmflouParams, char_function_Z, covariance_Z, kernel_g, limit_residual_alpha_inf,
                    limit_residual_alpha_zero, simulate_Y, simulate_Z, tail_exponent, variance_Y, variance_Z)
from .stats import (ConvergenceTable, MomentReport, coupled_l2_error, empirical_autocovariance,
                    empirical_char_function, ensemble_moment, fit_tail_exponent, increment_bound_check)
