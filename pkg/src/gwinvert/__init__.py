"""Ensemble-based inversion of contaminant source and conductivity parameters
for 2-D steady groundwater flow and transport."""

from .config import RunConfig, load_config, preset, save_config
from .ensemble import Ensemble, draw_prior, es_update, kalman_gain, perturb_measurements
from .flow import darcy_velocity, dispersion_tensor, solve_steady_flow
from .grid import (
    ConcentrationField,
    ConductivityField,
    ConfigurationError,
    FlowGrid,
    HeadField,
    SolverError,
    SourceSpec,
)
from .inference import IISConfig, IISResult, InverseProblem, run_iis, stopping_check
from .likelihood import log_likelihood, log_likelihoods
from .mcmc import MCMCConfig, MCMCResult, gelman_rubin, run_chain
from .observation import MeasurementSet, NoiseModel, WellNetwork, observe
from .parameters import ParameterSchema, ParameterSlot
from .random_field import CovarianceSpec, KLBasis, build_kl_basis, synthesize_field, variance_fraction
from .surrogate import GPModel, SurrogateConfig, fit_inverse_gp, predict_parameters, refine_ensemble
from .transport import simulate_transport

__version__ = "0.1.0"

__all__ = [
    "ConcentrationField",
    "ConductivityField",
    "ConfigurationError",
    "CovarianceSpec",
    "Ensemble",
    "FlowGrid",
    "GPModel",
    "HeadField",
    "IISConfig",
    "IISResult",
    "InverseProblem",
    "KLBasis",
    "MCMCConfig",
    "MCMCResult",
    "MeasurementSet",
    "NoiseModel",
    "ParameterSchema",
    "ParameterSlot",
    "RunConfig",
    "SolverError",
    "SourceSpec",
    "SurrogateConfig",
    "WellNetwork",
    "build_kl_basis",
    "darcy_velocity",
    "dispersion_tensor",
    "draw_prior",
    "es_update",
    "fit_inverse_gp",
    "gelman_rubin",
    "kalman_gain",
    "load_config",
    "log_likelihood",
    "log_likelihoods",
    "observe",
    "perturb_measurements",
    "predict_parameters",
    "preset",
    "refine_ensemble",
    "run_chain",
    "run_iis",
    "save_config",
    "simulate_transport",
    "solve_steady_flow",
    "stopping_check",
    "synthesize_field",
    "variance_fraction",
]
