"""Steady heterogeneous groundwater flow on the cell-centered grid.

Flux balance per cell with harmonic-mean face transmissibilities (unit
thickness).  The left/right Dirichlet heads enter through half-cell
conductances; top and bottom faces carry no flow.  The linear system is small
enough (a few thousand unknowns) that a direct sparse factorization is used.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import ConductivityField, ConfigurationError, FlowGrid, HeadField, SolverError

FLOW_RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class VelocityField:
    """Cell-centered pore velocities plus the face specific discharges.

    ``qx`` has shape (ny, nx+1) and ``qy`` (ny+1, nx); entry [iy, ix] is the
    specific discharge [L/T] through the face left of / below cell (iy, ix),
    positive toward increasing x / y.
    """

    vx: np.ndarray
    vy: np.ndarray
    qx: np.ndarray
    qy: np.ndarray

    @property
    def speed(self) -> np.ndarray:
        return np.hypot(self.vx, self.vy)


def _harmonic(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return 2.0 * a * b / (a + b)


def solve_steady_flow(grid: FlowGrid, field: ConductivityField) -> HeadField:
    """Solve the steady flow equation for the heads.

    Parameters
    ----------
    grid : FlowGrid
        Domain, discretization and boundary heads.
    field : ConductivityField
        Per-cell hydraulic conductivity (positive everywhere).

    Returns
    -------
    HeadField
        Heads at cell centers; the relative residual of the assembled linear
        system is checked against ``FLOW_RESIDUAL_TOL``.
    """
    k = field.k
    if k.shape != (grid.ny, grid.nx):
        raise ConfigurationError("conductivity shape does not match the grid")
    nx, ny = grid.nx, grid.ny
    dx, dy = grid.dx, grid.dy
    n = grid.n_cells

    idx = np.arange(n).reshape(ny, nx)
    rows, cols, vals = [], [], []
    diag = np.zeros(n)
    rhs = np.zeros(n)

    # Internal x faces.
    tx = _harmonic(k[:, :-1], k[:, 1:]) * dy / dx
    left, right = idx[:, :-1].ravel(), idx[:, 1:].ravel()
    txf = tx.ravel()
    rows += [left, right]
    cols += [right, left]
    vals += [-txf, -txf]
    np.add.at(diag, left, txf)
    np.add.at(diag, right, txf)

    # Internal y faces.
    ty = _harmonic(k[:-1, :], k[1:, :]) * dx / dy
    low, high = idx[:-1, :].ravel(), idx[1:, :].ravel()
    tyf = ty.ravel()
    rows += [low, high]
    cols += [high, low]
    vals += [-tyf, -tyf]
    np.add.at(diag, low, tyf)
    np.add.at(diag, high, tyf)

    # Dirichlet boundaries through half-cell conductances.
    tl = k[:, 0] * dy / (dx / 2.0)
    tr = k[:, -1] * dy / (dx / 2.0)
    diag[idx[:, 0]] += tl
    diag[idx[:, -1]] += tr
    rhs[idx[:, 0]] += tl * grid.h_left
    rhs[idx[:, -1]] += tr * grid.h_right

    dead = np.flatnonzero(diag == 0.0)
    if dead.size:
        iy, ix = divmod(int(dead[0]), nx)
        raise SolverError(f"flow system is singular: cell (ix={ix}, iy={iy}) has zero conductance")

    rows.append(np.arange(n))
    cols.append(np.arange(n))
    vals.append(diag)
    a = sp.csc_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )
    try:
        h = spla.spsolve(a, rhs)
    except RuntimeError as exc:  # pragma: no cover - superlu failure path
        raise SolverError(f"flow solve failed: {exc}") from exc

    residual = np.linalg.norm(a @ h - rhs) / max(np.linalg.norm(rhs), 1e-300)
    if not np.isfinite(residual) or residual > FLOW_RESIDUAL_TOL:
        raise SolverError(f"flow solve residual {residual:.3e} exceeds {FLOW_RESIDUAL_TOL:.1e}")
    return HeadField(h.reshape(ny, nx))


def face_discharges(grid: FlowGrid, field: ConductivityField, heads: HeadField):
    """Specific discharge through every face, Darcy's law with harmonic K."""
    k = field.k
    h = heads.values
    dx, dy = grid.dx, grid.dy

    qx = np.zeros((grid.ny, grid.nx + 1))
    qx[:, 1:-1] = _harmonic(k[:, :-1], k[:, 1:]) * (h[:, :-1] - h[:, 1:]) / dx
    qx[:, 0] = k[:, 0] * (grid.h_left - h[:, 0]) / (dx / 2.0)
    qx[:, -1] = k[:, -1] * (h[:, -1] - grid.h_right) / (dx / 2.0)

    qy = np.zeros((grid.ny + 1, grid.nx))  # top/bottom rows stay zero: no-flow
    qy[1:-1, :] = _harmonic(k[:-1, :], k[1:, :]) * (h[:-1, :] - h[1:, :]) / dy
    return qx, qy


def darcy_velocity(grid: FlowGrid, field: ConductivityField, heads: HeadField,
                   porosity: float = 0.25) -> VelocityField:
    """Pore-water velocity from a solved head field.

    Cell-centered components are face averages of the specific discharge
    divided by the porosity; normal velocities on no-flow faces are zero.
    """
    if porosity <= 0:
        raise ConfigurationError("porosity must be positive")
    qx, qy = face_discharges(grid, field, heads)
    vx = 0.5 * (qx[:, :-1] + qx[:, 1:]) / porosity
    vy = 0.5 * (qy[:-1, :] + qy[1:, :]) / porosity
    return VelocityField(vx=vx, vy=vy, qx=qx, qy=qy)


def dispersion_tensor(velocity: VelocityField, alpha_l: float, alpha_t: float):
    """Hydrodynamic dispersion tensor per cell.

    Returns ``(d_xx, d_yy, d_xy)`` arrays.  Cells with zero velocity get a
    zero tensor (molecular diffusion is not modeled).
    """
    if alpha_l < 0 or alpha_t < 0:
        raise ConfigurationError("dispersivities must be non-negative")
    vx, vy = velocity.vx, velocity.vy
    speed = np.hypot(vx, vy)
    with np.errstate(divide="ignore", invalid="ignore"):
        d_xx = np.where(speed > 0, (alpha_l * vx**2 + alpha_t * vy**2) / speed, 0.0)
        d_yy = np.where(speed > 0, (alpha_l * vy**2 + alpha_t * vx**2) / speed, 0.0)
        d_xy = np.where(speed > 0, (alpha_l - alpha_t) * vx * vy / speed, 0.0)
    return d_xx, d_yy, d_xy


def cell_flux_imbalance(grid: FlowGrid, field: ConductivityField, heads: HeadField) -> np.ndarray:
    """Net volumetric in-minus-out flux per cell, for conservation checks."""
    qx, qy = face_discharges(grid, field, heads)
    dx, dy = grid.dx, grid.dy
    return (qx[:, :-1] - qx[:, 1:]) * dy + (qy[:-1, :] - qy[1:, :]) * dx


def boundary_throughflow(grid: FlowGrid, field: ConductivityField, heads: HeadField) -> float:
    """Total volumetric flow entering through the left boundary."""
    qx, _ = face_discharges(grid, field, heads)
    return float(np.sum(qx[:, 0]) * grid.dy)
