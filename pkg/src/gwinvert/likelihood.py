"""Gaussian measurement likelihood shared by the inversion drivers."""

from __future__ import annotations

import numpy as np

from .grid import ConfigurationError
from .observation import MeasurementSet


def log_likelihood(values: np.ndarray, measurements: MeasurementSet) -> float:
    """Log of the independent-Gaussian likelihood of one output vector."""
    values = np.asarray(values, dtype=float)
    if values.shape != measurements.values.shape:
        raise ConfigurationError(
            f"output length {values.shape} does not match the {measurements.n_obs} measurements"
        )
    sigma = measurements.sigma
    resid = values - measurements.values
    return float(np.sum(-0.5 * np.log(2.0 * np.pi * sigma**2) - resid**2 / (2.0 * sigma**2)))


def log_likelihoods(outputs: np.ndarray, measurements: MeasurementSet) -> np.ndarray:
    """Column-wise log likelihood of an output matrix (n_obs, N)."""
    outputs = np.asarray(outputs, dtype=float)
    if outputs.shape[0] != measurements.n_obs:
        raise ConfigurationError(
            f"output matrix has {outputs.shape[0]} rows, expected {measurements.n_obs}"
        )
    sigma = measurements.sigma[:, None]
    resid = outputs - measurements.values[:, None]
    terms = -0.5 * np.log(2.0 * np.pi * sigma**2) - resid**2 / (2.0 * sigma**2)
    return terms.sum(axis=0)
