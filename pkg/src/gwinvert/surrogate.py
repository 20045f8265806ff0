"""Inverse Gaussian-process surrogate: regress parameters on model outputs.

One independent GP per parameter slot, all sharing the same standardized
input set (the ensemble's output vectors).  The kernel is squared
exponential with a single isotropic length scale and a small relative
nugget; the signal variance is profiled out analytically, so hyperparameter
selection reduces to a bounded one-dimensional marginal-likelihood search
per slot (log-spaced multi-start grid plus a local parabolic refinement).
Cholesky factors are cached per length scale and shared across slots.

Querying the surrogate at the real measurements proposes a parameter
estimate directly; :func:`refine_ensemble` uses such estimates to replace
the lowest-likelihood ensemble members one at a time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .ensemble import Ensemble
from .evaluator import ForwardEvaluator
from .grid import ConfigurationError, SolverError
from .likelihood import log_likelihood, log_likelihoods
from .observation import MeasurementSet

_STD_FLOOR = 1e-12


@dataclass(frozen=True)
class SurrogateConfig:
    """Knobs for the inverse-GP fit and the member-replacement loop."""

    nugget: float = 1e-6
    n_starts: int = 16
    length_scale_span: tuple[float, float] = (0.05, 20.0)
    refine_subdivisions: int = 8
    pca_ratio: float = 0.5
    pca_variance: float = 0.999
    refit_every: int = 1
    guard_replacement: bool = True

    def __post_init__(self):
        if self.nugget <= 0:
            raise ConfigurationError("nugget must be positive")
        if self.refit_every < 0:
            raise ConfigurationError("refit_every must be non-negative")


@dataclass(frozen=True)
class _InputTransform:
    mean: np.ndarray
    std: np.ndarray
    components: np.ndarray | None  # (n_raw, k) PCA projection, or None

    def apply(self, raw: np.ndarray) -> np.ndarray:
        z = (raw - self.mean) / self.std
        if self.components is not None:
            z = z @ self.components
        return z


@dataclass(frozen=True)
class _SlotModel:
    length_scale: float
    alpha: np.ndarray | None  # (K + nugget I)^{-1} y_standardized; None if constant
    y_mean: float
    y_std: float


@dataclass(frozen=True)
class GPModel:
    """Fitted inverse surrogate: standardized inputs plus per-slot regressors."""

    inputs: np.ndarray  # (N, k) transformed training inputs
    transform: _InputTransform
    slots: tuple[_SlotModel, ...]
    schema: object
    config: SurrogateConfig

    @property
    def n_training(self) -> int:
        return self.inputs.shape[0]

    def predict(self, observed: np.ndarray) -> np.ndarray:
        """Posterior-mean parameter estimate at an observation vector."""
        observed = np.asarray(observed, dtype=float)
        if observed.shape != (self.transform.mean.size,):
            raise ConfigurationError(
                f"observation vector length {observed.size} does not match training inputs"
            )
        z = self.transform.apply(observed)
        d2 = ((self.inputs - z) ** 2).sum(axis=1)
        estimate = np.empty(len(self.slots))
        for i, slot in enumerate(self.slots):
            if slot.alpha is None:
                estimate[i] = slot.y_mean
                continue
            k_star = np.exp(-0.5 * d2 / slot.length_scale**2)
            estimate[i] = slot.y_mean + slot.y_std * float(k_star @ slot.alpha)
        return self.schema.clip(estimate)

    def training_residuals(self, targets: np.ndarray) -> np.ndarray:
        """Standardized residuals of the GP at its own training points."""
        d2 = _sq_distances(self.inputs)
        out = np.zeros((len(self.slots), self.n_training))
        for i, slot in enumerate(self.slots):
            if slot.alpha is None:
                continue
            k = np.exp(-0.5 * d2 / slot.length_scale**2)
            pred = k @ slot.alpha
            y_std = (targets[i] - slot.y_mean) / slot.y_std
            out[i] = y_std - pred
        return out


def _sq_distances(x: np.ndarray) -> np.ndarray:
    sq = (x**2).sum(axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.maximum(d2, 0.0, out=d2)
    return d2


class _CholCache:
    """Cholesky factors of exp(-d2 / 2 l^2) + nugget*I, keyed by length scale."""

    def __init__(self, d2: np.ndarray, nugget: float):
        self.d2 = d2
        self.nugget = nugget
        self.n = d2.shape[0]
        self._store: dict[float, tuple] = {}

    def get(self, length_scale: float):
        key = round(math.log(length_scale), 9)
        hit = self._store.get(key)
        if hit is None:
            k = np.exp(-0.5 * self.d2 / length_scale**2)
            k[np.diag_indices_from(k)] += self.nugget
            chol = cho_factor(k, lower=True, check_finite=False)
            logdet = 2.0 * float(np.log(np.diag(chol[0])).sum())
            hit = (chol, logdet)
            self._store[key] = hit
        return hit


def _profile_loglik(cache: _CholCache, length_scale: float, y: np.ndarray) -> np.ndarray:
    """Marginal log likelihood per target column, signal variance profiled out."""
    chol, logdet = cache.get(length_scale)
    alpha = cho_solve(chol, y, check_finite=False)
    n = y.shape[0]
    s2 = np.maximum((y * alpha).sum(axis=0) / n, _STD_FLOOR)
    return -0.5 * n * np.log(s2) - 0.5 * logdet - 0.5 * n


def fit_inverse_gp(ensemble: Ensemble, config: SurrogateConfig = SurrogateConfig()) -> GPModel:
    """Fit the output-to-parameter surrogate on the current ensemble.

    Raises a configuration error when the ensemble outputs have no spread
    (nothing to regress on).
    """
    raw = ensemble.outputs.T  # (N, n_obs)
    n, n_obs = raw.shape
    mean = raw.mean(axis=0)
    std = raw.std(axis=0)
    if float(std.max(initial=0.0)) <= _STD_FLOOR:
        raise ConfigurationError(
            "ensemble outputs are degenerate (zero spread); widen the ensemble before fitting"
        )
    std = np.where(std > _STD_FLOOR, std, 1.0)
    z = (raw - mean) / std

    components = None
    if n_obs > config.pca_ratio * n:
        # Keep the kernel matrix well conditioned when outputs outnumber
        # useful directions: project onto leading principal components.
        _, svals, vt = np.linalg.svd(z, full_matrices=False)
        energy = np.cumsum(svals**2) / np.sum(svals**2)
        k = int(np.searchsorted(energy, config.pca_variance) + 1)
        components = vt[:k].T
        z = z @ components
    transform = _InputTransform(mean=mean, std=std, components=components)

    d2 = _sq_distances(z)
    positive = d2[d2 > 0]
    median_dist = math.sqrt(float(np.median(positive))) if positive.size else 1.0
    lo = median_dist * config.length_scale_span[0]
    hi = median_dist * config.length_scale_span[1]
    grid = np.exp(np.linspace(math.log(lo), math.log(hi), config.n_starts))
    cache = _CholCache(d2, config.nugget)

    targets = ensemble.params
    y_mean = targets.mean(axis=1)
    y_std = targets.std(axis=1)
    active = y_std > _STD_FLOOR
    y_norm = np.zeros_like(targets)
    y_norm[active] = (targets[active] - y_mean[active, None]) / y_std[active, None]

    scores = np.full((config.n_starts, targets.shape[0]), -np.inf)
    if active.any():
        y_cols = y_norm[active].T  # (N, n_active)
        for gi, ell in enumerate(grid):
            scores[gi, active] = _profile_loglik(cache, ell, y_cols)

    log_grid = np.log(grid)
    step = log_grid[1] - log_grid[0] if len(grid) > 1 else 1.0
    lattice = step / config.refine_subdivisions
    slots = []
    for si in range(targets.shape[0]):
        if not active[si]:
            slots.append(_SlotModel(1.0, None, float(y_mean[si]), 1.0))
            continue
        best = int(np.argmax(scores[:, si]))
        log_ell = log_grid[best]
        if 0 < best < len(grid) - 1:
            # Parabolic vertex through the best grid point and its neighbors,
            # snapped onto a shared lattice so Cholesky factors are reused
            # across slots.
            f_m, f_0, f_p = scores[best - 1, si], scores[best, si], scores[best + 1, si]
            denom = f_m - 2.0 * f_0 + f_p
            if denom < 0:
                shift = 0.5 * (f_m - f_p) / denom
                shift = float(np.clip(shift, -1.0, 1.0))
                log_ell = log_grid[best] + lattice * round(shift * step / lattice)
        ell = math.exp(log_ell)
        y = y_norm[si]
        if not np.isclose(log_ell, log_grid[best]):
            refined = float(_profile_loglik(cache, ell, y[:, None])[0])
            if refined < scores[best, si]:
                ell = grid[best]
        chol, _ = cache.get(ell)
        alpha = cho_solve(chol, y, check_finite=False)
        slots.append(_SlotModel(float(ell), alpha, float(y_mean[si]), float(y_std[si])))

    return GPModel(inputs=z, transform=transform, slots=tuple(slots),
                   schema=ensemble.schema, config=config)


def predict_parameters(gp: GPModel, measurements: MeasurementSet) -> np.ndarray:
    """Parameter estimate obtained by feeding the data to the inverse surrogate."""
    return gp.predict(measurements.values)


@dataclass(frozen=True)
class ReplacementEvent:
    step: int
    action: str  # "replaced" | "kept" | "failed"
    member: int
    old_loglik: float
    new_loglik: float


@dataclass(frozen=True)
class RefinementResult:
    ensemble: Ensemble
    events: tuple[ReplacementEvent, ...]
    n_evaluations: int

    @property
    def n_replaced(self) -> int:
        return sum(1 for e in self.events if e.action == "replaced")

    @property
    def n_kept(self) -> int:
        return sum(1 for e in self.events if e.action == "kept")


def refine_ensemble(ensemble: Ensemble, measurements: MeasurementSet,
                    evaluator: ForwardEvaluator, n_replace: int = 50,
                    config: SurrogateConfig = SurrogateConfig()) -> RefinementResult:
    """Sequentially replace the worst ensemble members with surrogate estimates.

    Each step fits (or reuses, per ``refit_every``) the inverse GP, predicts
    a parameter estimate from the real measurements, runs the forward model
    on it and swaps it in for the member with the smallest likelihood.  With
    the replacement guard on, candidates that would lower the ensemble's
    minimum likelihood are kept out (the member survives, the evaluation
    still counts).
    """
    if n_replace < 0 or n_replace >= ensemble.size:
        raise ConfigurationError(
            f"n_replace must lie in [0, ensemble size), got {n_replace} of {ensemble.size}"
        )
    if n_replace == 0:
        return RefinementResult(ensemble=ensemble, events=(), n_evaluations=0)

    logliks = log_likelihoods(ensemble.outputs, measurements)
    events = []
    gp = None
    stale = True
    n_evals = 0
    for step in range(n_replace):
        # refit_every = 0 means fit once; k > 0 refits at every k-th step
        # (only when a replacement actually changed the training set).
        due = config.refit_every > 0 and step % config.refit_every == 0
        if gp is None or (stale and due):
            gp = fit_inverse_gp(ensemble, config)
            stale = False
        candidate = gp.predict(measurements.values)
        worst = int(np.argmin(logliks))
        old_ll = float(logliks[worst])
        n_evals += 1
        try:
            f_candidate = evaluator.evaluate_one(candidate)
        except (SolverError, ConfigurationError):
            events.append(ReplacementEvent(step, "failed", -1, old_ll, float("nan")))
            continue
        new_ll = log_likelihood(f_candidate, measurements)
        if config.guard_replacement and new_ll <= old_ll:
            events.append(ReplacementEvent(step, "kept", worst, old_ll, new_ll))
            continue
        ensemble = ensemble.with_member(worst, candidate, f_candidate)
        logliks[worst] = new_ll
        stale = True
        events.append(ReplacementEvent(step, "replaced", worst, old_ll, new_ll))
    return RefinementResult(ensemble=ensemble, events=tuple(events), n_evaluations=n_evals)
