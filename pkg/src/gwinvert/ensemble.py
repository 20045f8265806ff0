"""Ensemble-smoother building blocks: prior sampling, measurement
perturbation, Kalman gain and the parameter update.

Parameter matrices hold one sample per column (shape ``(n_params, N)``) and
output matrices are column-aligned with them.  Cross- and auto-covariances
use the ``N - 1`` divisor, and ``(P_F + R)`` is solved with a symmetric
positive-definite factorization rather than inverted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .grid import ConfigurationError
from .observation import MeasurementSet
from .parameters import ParameterSchema


@dataclass(frozen=True)
class Ensemble:
    """Column-aligned parameter and output matrices.

    Construct through :meth:`evaluate` (or :meth:`with_member`) so that
    ``outputs[:, j]`` is always the forward response of ``params[:, j]``.
    """

    schema: ParameterSchema
    params: np.ndarray
    outputs: np.ndarray

    def __post_init__(self):
        params = np.asarray(self.params, dtype=float)
        outputs = np.asarray(self.outputs, dtype=float)
        if params.ndim != 2 or outputs.ndim != 2:
            raise ConfigurationError("ensemble matrices must be 2-D")
        if params.shape[0] != self.schema.n_params:
            raise ConfigurationError("parameter matrix rows do not match the schema")
        if params.shape[1] != outputs.shape[1]:
            raise ConfigurationError("parameter and output matrices are not column-aligned")
        object.__setattr__(self, "params", params)
        object.__setattr__(self, "outputs", outputs)

    @classmethod
    def evaluate(cls, schema: ParameterSchema, params: np.ndarray, forward) -> "Ensemble":
        """Run the forward model on every column and bundle the result.

        ``forward`` is either a plain callable applied per column or an
        object with an ``evaluate_matrix`` method (a pooled evaluator).
        """
        params = np.asarray(params, dtype=float)
        if hasattr(forward, "evaluate_matrix"):
            outputs = forward.evaluate_matrix(params)
        else:
            outputs = np.column_stack([np.asarray(forward(params[:, j]), dtype=float)
                                       for j in range(params.shape[1])])
        return cls(schema=schema, params=params, outputs=outputs)

    @property
    def size(self) -> int:
        return self.params.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.outputs.shape[0]

    def with_member(self, index: int, m: np.ndarray, f: np.ndarray) -> "Ensemble":
        """Copy of the ensemble with one member replaced."""
        params = self.params.copy()
        outputs = self.outputs.copy()
        params[:, index] = m
        outputs[:, index] = f
        return Ensemble(self.schema, params, outputs)


def draw_prior(schema: ParameterSchema, n: int, seed) -> np.ndarray:
    """Sample the prior: uniform for bounded slots, standard normal otherwise.

    ``seed`` may be anything accepted by ``np.random.default_rng`` (including
    a Generator, which is consumed in place).
    """
    if n < 2:
        raise ConfigurationError("ensemble size must be at least 2")
    rng = np.random.default_rng(seed)
    m = np.empty((schema.n_params, n))
    for i, slot in enumerate(schema.slots):
        if slot.kind == "uniform":
            m[i] = rng.uniform(slot.low, slot.high, size=n)
        else:
            m[i] = rng.standard_normal(n)
    return m


def perturb_measurements(measurements: MeasurementSet, n: int, seed) -> np.ndarray:
    """Ensemble of noisy measurement replicas, one column per member."""
    if n < 2:
        raise ConfigurationError("perturbation ensemble size must be at least 2")
    rng = np.random.default_rng(seed)
    d = measurements.values[:, None]
    sigma = measurements.sigma[:, None]
    return d + sigma * rng.standard_normal((measurements.n_obs, n))


def _as_noise_matrix(r, n_obs: int) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    if r.ndim == 1:
        if r.size != n_obs:
            raise ConfigurationError("noise variance vector length mismatch")
        return np.diag(r)
    if r.shape != (n_obs, n_obs):
        raise ConfigurationError("noise covariance shape mismatch")
    return r


def anomalies(matrix: np.ndarray) -> np.ndarray:
    """Deviations from the ensemble mean; exactly zero for constant rows."""
    matrix = np.asarray(matrix, dtype=float)
    out = matrix - matrix.mean(axis=1, keepdims=True)
    constant = matrix.min(axis=1) == matrix.max(axis=1)
    if constant.any():
        out[constant] = 0.0
    return out


def kalman_gain(params: np.ndarray, outputs: np.ndarray, r) -> np.ndarray:
    """Sample Kalman gain mapping output residuals to parameter corrections.

    Parameters
    ----------
    params, outputs : ndarray
        Column-aligned ensemble matrices, shapes (n_params, N), (n_obs, N).
    r : ndarray
        Measurement-error covariance: a diagonal-variance vector or a full
        symmetric positive-definite matrix.
    """
    params = np.asarray(params, dtype=float)
    outputs = np.asarray(outputs, dtype=float)
    n = params.shape[1]
    if n < 2:
        raise ConfigurationError("Kalman gain needs at least two ensemble members")
    if outputs.shape[1] != n:
        raise ConfigurationError("parameter and output ensembles are not column-aligned")
    dm = anomalies(params)
    df = anomalies(outputs)
    p_mf = dm @ df.T / (n - 1)
    p_ff = df @ df.T / (n - 1)
    p_ff = 0.5 * (p_ff + p_ff.T)
    system = p_ff + _as_noise_matrix(r, outputs.shape[0])
    try:
        gain_t = scipy.linalg.solve(system, p_mf.T, assume_a="pos")
    except np.linalg.LinAlgError as exc:
        raise ConfigurationError(f"(P_F + R) is not positive definite: {exc}") from exc
    return gain_t.T


def es_update(params: np.ndarray, outputs: np.ndarray, perturbed: np.ndarray, r,
              schema: ParameterSchema | None = None) -> np.ndarray:
    """One ensemble-smoother update of the parameter matrix.

    Each column moves by the Kalman gain applied to its own perturbed-data
    residual.  When a schema is given, bounded slots are clipped back into
    their prior range afterwards.
    """
    params = np.asarray(params, dtype=float)
    outputs = np.asarray(outputs, dtype=float)
    perturbed = np.asarray(perturbed, dtype=float)
    if perturbed.shape != outputs.shape:
        raise ConfigurationError(
            f"perturbed-measurement matrix {perturbed.shape} does not match outputs {outputs.shape}"
        )
    gain = kalman_gain(params, outputs, r)
    updated = params + gain @ (perturbed - outputs)
    if schema is not None:
        updated = schema.clip(updated)
    return updated
