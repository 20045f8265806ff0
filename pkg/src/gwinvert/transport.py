"""Nonreactive solute transport in the steady flow field.

Finite-volume discretization on the flow grid: first-order upwind advection,
central-difference dispersion, backward-Euler time stepping.  The spatial
operator does not change over time (the flow is steady), so it is factorized
once and reused for every step.  Cross-dispersion (D_xy) face fluxes are
omitted, which keeps the operator an M-matrix and concentrations
non-negative; the full tensor is still available via
:func:`gwinvert.flow.dispersion_tensor` for diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .flow import VelocityField, darcy_velocity, dispersion_tensor, solve_steady_flow
from .grid import (
    ConcentrationField,
    ConductivityField,
    ConfigurationError,
    FlowGrid,
    SolverError,
    SourceSpec,
)

DEFAULT_DT = 0.05
DEFAULT_MAX_COURANT = 4.0
MASS_BALANCE_TOL = 0.01


@dataclass(frozen=True)
class MassBalanceRecord:
    time: float
    injected: float
    stored: float
    outflowed: float

    @property
    def relative_error(self) -> float:
        if self.injected <= 0.0:
            return abs(self.stored + self.outflowed)
        return abs(self.injected - self.stored - self.outflowed) / self.injected


@dataclass(frozen=True)
class TransportResult:
    snapshots: tuple[ConcentrationField, ...]
    mass_balance: tuple[MassBalanceRecord, ...]

    def at(self, time: float) -> ConcentrationField:
        for snap in self.snapshots:
            if abs(snap.time - time) < 1e-9:
                return snap
        raise KeyError(f"no snapshot stored at t={time}")


def _integrated_strength(source: SourceSpec, a: float, b: float) -> float:
    """Mass released on the interval [a, b]."""
    total = 0.0
    for i, s in enumerate(source.strengths):
        lo, hi = float(i + 1), float(i + 2)
        overlap = min(b, hi) - max(a, lo)
        if overlap > 0:
            total += s * overlap
    return total


def assemble_transport_operator(grid: FlowGrid, velocity: VelocityField,
                                d_xx: np.ndarray, d_yy: np.ndarray, porosity: float):
    """Build the spatial outflux operator L and the boundary-outflow row.

    ``(L @ c)[cell]`` is the net mass outflow rate of that cell for
    concentrations ``c``; ``bout @ c`` is the rate leaving the domain through
    the constant-head boundaries.
    """
    nx, ny = grid.nx, grid.ny
    dx, dy = grid.dx, grid.dy
    n = grid.n_cells
    idx = np.arange(n).reshape(ny, nx)
    qx, qy = velocity.qx, velocity.qy

    rows, cols, vals = [], [], []
    diag = np.zeros(n)
    bout = np.zeros(n)

    def add(r, c, v):
        rows.append(r)
        cols.append(c)
        vals.append(v)

    # Advection, internal x faces: flux = qx * dy * C_upwind.
    q = qx[:, 1:-1]
    left, right = idx[:, :-1].ravel(), idx[:, 1:].ravel()
    up = np.where(q.ravel() >= 0, left, right)
    f = (q * dy).ravel()
    np.add.at(diag, left, np.where(up == left, f, 0.0))
    add(left[up != left], up[up != left], f[up != left])
    np.add.at(diag, right, np.where(up == right, -f, 0.0))
    add(right[up != right], up[up != right], -f[up != right])

    # Advection, internal y faces.
    q = qy[1:-1, :]
    low, high = idx[:-1, :].ravel(), idx[1:, :].ravel()
    up = np.where(q.ravel() >= 0, low, high)
    f = (q * dx).ravel()
    np.add.at(diag, low, np.where(up == low, f, 0.0))
    add(low[up != low], up[up != low], f[up != low])
    np.add.at(diag, high, np.where(up == high, -f, 0.0))
    add(high[up != high], up[up != high], -f[up != high])

    # Advection through the left/right boundaries: inflow carries zero
    # concentration, outflow takes the adjacent cell value.
    q = qx[:, 0]
    cells = idx[:, 0]
    outflow = np.maximum(-q, 0.0) * dy
    np.add.at(diag, cells, outflow)
    np.add.at(bout, cells, outflow)
    q = qx[:, -1]
    cells = idx[:, -1]
    outflow = np.maximum(q, 0.0) * dy
    np.add.at(diag, cells, outflow)
    np.add.at(bout, cells, outflow)

    # Dispersion, internal faces (arithmetic face mean, zero-flux boundaries).
    g = porosity * 0.5 * (d_xx[:, :-1] + d_xx[:, 1:]) * dy / dx
    gf = g.ravel()
    np.add.at(diag, left, gf)
    np.add.at(diag, right, gf)
    add(left, right, -gf)
    add(right, left, -gf)

    g = porosity * 0.5 * (d_yy[:-1, :] + d_yy[1:, :]) * dx / dy
    gf = g.ravel()
    np.add.at(diag, low, gf)
    np.add.at(diag, high, gf)
    add(low, high, -gf)
    add(high, low, -gf)

    rows.append(np.arange(n))
    cols.append(np.arange(n))
    vals.append(diag)
    matrix = sp.csc_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )
    return matrix, bout


def simulate_transport(grid: FlowGrid, field: ConductivityField, source: SourceSpec,
                       t_end: float, dt: float = DEFAULT_DT,
                       output_times=None, velocity: VelocityField | None = None,
                       max_courant: float = DEFAULT_MAX_COURANT) -> TransportResult:
    """Integrate the transport equation from a zero initial condition.

    Parameters
    ----------
    grid, field : FlowGrid, ConductivityField
        Domain and conductivity; the steady flow problem is solved internally
        unless a precomputed ``velocity`` is supplied.
    source : SourceSpec
        Point source location, release history, porosity and dispersivities.
    t_end, dt : float
        End of simulation and fixed step size.  Output times must coincide
        with step boundaries.
    output_times : sequence of float, optional
        Times at which snapshots are stored (default: t_end only).

    Returns
    -------
    TransportResult
        Snapshots at the requested times plus mass-balance records.
    """
    if dt <= 0:
        raise ConfigurationError(f"time step must be positive, got dt={dt}")
    if not grid.contains(source.x, source.y):
        raise ConfigurationError(
            f"source at ({source.x}, {source.y}) lies outside the {grid.Lx} x {grid.Ly} domain"
        )
    if output_times is None:
        output_times = [t_end]
    output_times = sorted(float(t) for t in output_times)
    if output_times and output_times[-1] > t_end + 1e-9:
        raise ConfigurationError("output times extend beyond t_end")
    n_steps = int(round(t_end / dt))
    if abs(n_steps * dt - t_end) > 1e-9:
        raise ConfigurationError(f"dt={dt} does not divide t_end={t_end}")
    out_steps = {}
    for t in output_times:
        k = int(round(t / dt))
        if abs(k * dt - t) > 1e-9 or k < 1:
            raise ConfigurationError(f"output time {t} is not a positive multiple of dt={dt}")
        out_steps.setdefault(k, t)

    if velocity is None:
        heads = solve_steady_flow(grid, field)
        velocity = darcy_velocity(grid, field, heads, porosity=source.porosity)

    theta = source.porosity
    courant = dt * max(
        np.abs(velocity.qx).max() / (theta * grid.dx),
        np.abs(velocity.qy).max() / (theta * grid.dy),
    )
    if courant > max_courant:
        raise SolverError(
            f"dt={dt} violates the accuracy guard: Courant number {courant:.2f} > {max_courant}"
        )

    d_xx, d_yy, _ = dispersion_tensor(velocity, source.alpha_l, source.alpha_t)
    operator, bout = assemble_transport_operator(grid, velocity, d_xx, d_yy, theta)
    n = grid.n_cells
    vol_theta = grid.cell_area * theta
    system = (sp.identity(n, format="csc") * (vol_theta / dt) + operator).tocsc()
    try:
        lu = spla.splu(system)
    except RuntimeError as exc:  # pragma: no cover
        raise SolverError(f"transport factorization failed: {exc}") from exc

    iy, ix = grid.cell_of(source.x, source.y)
    src_cell = iy * grid.nx + ix

    conc = np.zeros(n)
    injected = 0.0
    outflowed = 0.0
    snapshots = []
    balance = []
    for step in range(1, n_steps + 1):
        t0, t1 = (step - 1) * dt, step * dt
        released = _integrated_strength(source, t0, t1)
        rhs = conc * (vol_theta / dt)
        if released:
            rhs[src_cell] += released / dt
        conc = lu.solve(rhs)
        injected += released
        outflowed += dt * float(bout @ conc)
        if step in out_steps:
            t = out_steps[step]
            snapshots.append(ConcentrationField(conc.reshape(grid.ny, grid.nx).copy(), t))
            balance.append(
                MassBalanceRecord(
                    time=t,
                    injected=injected,
                    stored=float(conc.sum()) * vol_theta,
                    outflowed=outflowed,
                )
            )
    return TransportResult(snapshots=tuple(snapshots), mass_balance=tuple(balance))
