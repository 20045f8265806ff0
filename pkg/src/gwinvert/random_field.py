"""Karhunen-Loeve representation of the log-conductivity random field.

The field has a separable exponential covariance
``C(p, q) = variance * exp(-|dx|/corr_x - |dy|/corr_y)``.  Eigenpairs are
obtained from a dense symmetric eigendecomposition of the covariance matrix
assembled on the cell centers with cell-area quadrature weights; the basis is
truncated to the leading modes and can be cached on disk because the
decomposition is the only expensive step.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg

from .grid import ConductivityField, ConfigurationError, FlowGrid

ORTHONORMALITY_TOL = 1e-8


@dataclass(frozen=True)
class CovarianceSpec:
    """Separable exponential covariance of the log-conductivity field."""

    variance: float = 1.0
    corr_x: float = 20.0
    corr_y: float = 10.0
    mean: float = 2.0

    def __post_init__(self):
        if self.variance <= 0:
            raise ConfigurationError("field variance must be positive")
        if self.corr_x <= 0 or self.corr_y <= 0:
            raise ConfigurationError("correlation lengths must be positive")


@dataclass(frozen=True)
class KLBasis:
    """Truncated eigenbasis of the log-conductivity covariance.

    ``functions[i]`` is the i-th eigenfunction sampled on the grid (shape
    ``(ny, nx)``), orthonormal under the cell-area quadrature weight.
    ``modes`` holds the synthesis matrix with columns ``sqrt(lambda_i) *
    f_i`` over flattened cells.
    """

    grid: FlowGrid
    cov: CovarianceSpec
    eigenvalues: np.ndarray
    functions: np.ndarray
    trace: float

    @property
    def n_modes(self) -> int:
        return self.eigenvalues.size

    @property
    def modes(self) -> np.ndarray:
        flat = self.functions.reshape(self.n_modes, -1).T
        return flat * np.sqrt(self.eigenvalues)

    def pointwise_variance(self) -> np.ndarray:
        """Truncated-field variance per cell, sum of lambda_i * f_i^2."""
        m = self.modes
        return (m * m).sum(axis=1).reshape(self.grid.ny, self.grid.nx)


def _covariance_matrix(grid: FlowGrid, cov: CovarianceSpec) -> np.ndarray:
    xs, ys = grid.cell_centers()
    x = xs.ravel()
    y = ys.ravel()
    d = np.abs(x[:, None] - x[None, :]) / cov.corr_x
    d += np.abs(y[:, None] - y[None, :]) / cov.corr_y
    np.multiply(d, -1.0, out=d)
    np.exp(d, out=d)
    d *= cov.variance
    return d


def _cache_key(grid: FlowGrid, cov: CovarianceSpec, n_kl: int) -> str:
    blob = "|".join(
        repr(v)
        for v in (grid.nx, grid.ny, grid.Lx, grid.Ly, cov.variance, cov.corr_x, cov.corr_y, n_kl)
    )
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def default_cache_dir() -> Path:
    env = os.environ.get("GWINVERT_CACHE")
    if env:
        return Path(env)
    return Path.home() / ".cache" / "gwinvert"


def build_kl_basis(grid: FlowGrid, cov: CovarianceSpec | None = None, n_kl: int = 100,
                   cache_dir: Path | str | None = None) -> KLBasis:
    """Compute (or load) the truncated KL basis for a grid.

    Parameters
    ----------
    grid : FlowGrid
        Discretization; eigenfunctions are sampled at the cell centers.
    cov : CovarianceSpec, optional
        Covariance parameters (defaults match the standard field setup).
    n_kl : int
        Number of retained modes; must not exceed the cell count.
    cache_dir : path-like, optional
        Directory for the npz cache.  ``None`` uses ``$GWINVERT_CACHE`` or
        ``~/.cache/gwinvert``; pass ``False`` to disable caching.

    Returns
    -------
    KLBasis
        Eigenvalues descending and strictly positive, eigenfunctions
        orthonormal under the cell-area quadrature weight.
    """
    cov = cov or CovarianceSpec()
    if n_kl < 1 or n_kl > grid.n_cells:
        raise ConfigurationError(f"n_kl must lie in [1, {grid.n_cells}], got {n_kl}")

    cache_path = None
    if cache_dir is not False:
        base = Path(cache_dir) if cache_dir is not None else default_cache_dir()
        cache_path = base / f"kl_{_cache_key(grid, cov, n_kl)}.npz"
        if cache_path.exists():
            data = np.load(cache_path)
            return KLBasis(
                grid=grid,
                cov=cov,
                eigenvalues=data["eigenvalues"],
                functions=data["functions"],
                trace=float(data["trace"]),
            )

    weight = grid.cell_area
    matrix = _covariance_matrix(grid, cov)
    trace = float(np.trace(matrix)) * weight
    matrix *= weight
    n = grid.n_cells
    values, vectors = scipy.linalg.eigh(
        matrix, subset_by_index=[n - n_kl, n - 1], driver="evr"
    )
    del matrix
    order = np.argsort(values)[::-1]
    values = values[order]
    vectors = vectors[:, order]

    negative = values < 0
    if negative.any():
        worst = values[negative].min()
        if worst < -1e-10 * max(values.max(), 1.0):
            raise ConfigurationError(
                f"assembled covariance is not positive semidefinite (eigenvalue {worst:.3e})"
            )
        values = values.copy()
        values[negative] = 0.0
    keep = values > 0
    values = values[keep]
    vectors = vectors[:, keep]

    # Fix eigenvector signs so cached and fresh bases are bit-identical.
    flips = np.sign(vectors[np.argmax(np.abs(vectors), axis=0), np.arange(vectors.shape[1])])
    vectors = vectors * flips

    functions = (vectors / np.sqrt(weight)).T.reshape(-1, grid.ny, grid.nx)
    basis = KLBasis(grid=grid, cov=cov, eigenvalues=values, functions=functions, trace=trace)

    gram = vectors.T @ vectors
    if np.abs(gram - np.eye(gram.shape[0])).max() > ORTHONORMALITY_TOL:
        raise ConfigurationError("eigenfunctions failed the orthonormality check")

    if cache_path is not None:
        cache_path.parent.mkdir(parents=True, exist_ok=True)
        tmp = cache_path.with_suffix(".tmp.npz")
        np.savez_compressed(
            tmp, eigenvalues=values, functions=functions, trace=np.float64(trace)
        )
        os.replace(tmp, cache_path)
    return basis


def synthesize_field(basis: KLBasis, xi: np.ndarray) -> ConductivityField:
    """Realize a conductivity field from standard-normal mode coefficients."""
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (basis.n_modes,):
        raise ConfigurationError(
            f"expected {basis.n_modes} coefficients, got shape {xi.shape}"
        )
    log_k = basis.cov.mean + (basis.modes @ xi).reshape(basis.grid.ny, basis.grid.nx)
    return ConductivityField(log_k, provenance="kl")


def variance_fraction(basis: KLBasis) -> float:
    """Fraction of the total field variance carried by the retained modes."""
    return float(basis.eigenvalues.sum() / basis.trace)
