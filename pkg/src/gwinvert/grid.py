"""Rectangular cell-centered grid and the field containers used by the forward model.

The domain is a box of size ``Lx`` by ``Ly`` discretized into ``nx`` by ``ny``
cells (spacing derived from the domain size, so ``nx * dx == Lx`` holds
exactly).  Flow is driven by constant-head boundaries on the left and right
edges; the top and bottom edges are no-flow.  All per-cell arrays are stored
with shape ``(ny, nx)``, row ``iy`` corresponding to the strip
``y in [iy*dy, (iy+1)*dy)``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

# Default setup: 20 x 10 domain, 81 x 41 = 3321 cells, heads 12 -> 11.
DEFAULT_NX = 81
DEFAULT_NY = 41
DEFAULT_LX = 20.0
DEFAULT_LY = 10.0
DEFAULT_H_LEFT = 12.0
DEFAULT_H_RIGHT = 11.0


class ConfigurationError(ValueError):
    """Invalid grid, physics or run configuration."""


class SolverError(RuntimeError):
    """Numerical failure inside a linear solve or time integration."""


@dataclass(frozen=True)
class FlowGrid:
    """Cell-centered grid with Dirichlet heads left/right and no-flow top/bottom."""

    nx: int = DEFAULT_NX
    ny: int = DEFAULT_NY
    Lx: float = DEFAULT_LX
    Ly: float = DEFAULT_LY
    h_left: float = DEFAULT_H_LEFT
    h_right: float = DEFAULT_H_RIGHT

    def __post_init__(self):
        if self.nx < 2 or self.ny < 1:
            raise ConfigurationError(f"grid needs nx >= 2 and ny >= 1, got {self.nx} x {self.ny}")
        if self.Lx <= 0 or self.Ly <= 0:
            raise ConfigurationError("domain size must be positive")

    @property
    def dx(self) -> float:
        return self.Lx / self.nx

    @property
    def dy(self) -> float:
        return self.Ly / self.ny

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny

    @property
    def cell_area(self) -> float:
        return self.dx * self.dy

    @property
    def xc(self) -> np.ndarray:
        """Cell-center x coordinates, length nx."""
        return (np.arange(self.nx) + 0.5) * self.dx

    @property
    def yc(self) -> np.ndarray:
        """Cell-center y coordinates, length ny."""
        return (np.arange(self.ny) + 0.5) * self.dy

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Meshgrid of cell centers, both arrays shaped (ny, nx)."""
        return np.meshgrid(self.xc, self.yc)

    def contains(self, x: float, y: float) -> bool:
        return 0.0 <= x <= self.Lx and 0.0 <= y <= self.Ly

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        """(iy, ix) of the cell containing the point; raises if outside."""
        if not self.contains(x, y):
            raise ConfigurationError(f"point ({x}, {y}) outside the {self.Lx} x {self.Ly} domain")
        ix = min(int(x / self.dx), self.nx - 1)
        iy = min(int(y / self.dy), self.ny - 1)
        return iy, ix

    def interpolate(self, values: np.ndarray, x: float, y: float) -> float:
        """Bilinear interpolation of a cell-centered field to an arbitrary point.

        Points closer than half a cell to the boundary are clamped onto the
        outermost cell centers, which matches constant extrapolation.
        """
        if not self.contains(x, y):
            raise ConfigurationError(f"point ({x}, {y}) outside the {self.Lx} x {self.Ly} domain")
        gx = np.clip(x / self.dx - 0.5, 0.0, self.nx - 1.0)
        gy = np.clip(y / self.dy - 0.5, 0.0, self.ny - 1.0)
        ix0 = min(int(gx), self.nx - 2) if self.nx > 1 else 0
        iy0 = min(int(gy), self.ny - 2) if self.ny > 1 else 0
        fx = gx - ix0
        fy = gy - iy0
        v = values
        return float(
            v[iy0, ix0] * (1 - fx) * (1 - fy)
            + v[iy0, min(ix0 + 1, self.nx - 1)] * fx * (1 - fy)
            + v[min(iy0 + 1, self.ny - 1), ix0] * (1 - fx) * fy
            + v[min(iy0 + 1, self.ny - 1), min(ix0 + 1, self.nx - 1)] * fx * fy
        )


@dataclass(frozen=True)
class ConductivityField:
    """Per-cell hydraulic conductivity, stored as log-values Y = log K."""

    log_k: np.ndarray  # shape (ny, nx)
    provenance: str = "constant"  # "zonated" | "kl" | "constant"

    def __post_init__(self):
        log_k = np.asarray(self.log_k, dtype=float)
        if not np.all(np.isfinite(log_k)):
            raise ConfigurationError("log-conductivity must be finite")
        object.__setattr__(self, "log_k", log_k)

    @property
    def k(self) -> np.ndarray:
        return np.exp(self.log_k)

    @staticmethod
    def constant(grid: FlowGrid, log_k: float) -> "ConductivityField":
        return ConductivityField(np.full((grid.ny, grid.nx), float(log_k)), provenance="constant")

    @staticmethod
    def zonated(grid: FlowGrid, zone_map: np.ndarray, zone_log_k) -> "ConductivityField":
        """Piecewise-constant field: zone_map holds per-cell zone indices."""
        zone_map = np.asarray(zone_map)
        if zone_map.shape != (grid.ny, grid.nx):
            raise ConfigurationError("zone map shape does not match the grid")
        values = np.asarray(zone_log_k, dtype=float)
        if zone_map.min() < 0 or zone_map.max() >= values.size:
            raise ConfigurationError("zone map references an unconfigured zone")
        return ConductivityField(values[zone_map], provenance="zonated")


@dataclass(frozen=True)
class HeadField:
    """Steady-state hydraulic head per cell."""

    values: np.ndarray  # shape (ny, nx)


@dataclass(frozen=True)
class ConcentrationField:
    """Solute concentration per cell at one simulation time."""

    values: np.ndarray  # shape (ny, nx)
    time: float


@dataclass(frozen=True)
class SourceSpec:
    """Point contaminant source with piecewise-constant release strengths.

    Strength ``strengths[i]`` [mass/time] is active on t in [i+1, i+2), so a
    six-entry history covers the release window t in [1, 7).  Porosity and
    dispersivities ride along because transport needs them wherever a source
    is simulated.
    """

    x: float
    y: float
    strengths: tuple[float, ...] = (0.0,) * 6
    porosity: float = 0.25
    alpha_l: float = 0.3
    alpha_t: float = 0.03

    def __post_init__(self):
        object.__setattr__(self, "strengths", tuple(float(s) for s in self.strengths))
        if any(s < 0 for s in self.strengths):
            raise ConfigurationError("source strengths must be non-negative")
        if not 0 < self.porosity <= 1:
            raise ConfigurationError("porosity must lie in (0, 1]")
        if self.alpha_l < 0 or self.alpha_t < 0:
            raise ConfigurationError("dispersivities must be non-negative")

    def strength_at(self, t: float) -> float:
        """Release rate at time t (windows [i, i+1) for i = 1..len)."""
        i = int(np.floor(t)) - 1
        if 0 <= i < len(self.strengths):
            return self.strengths[i]
        return 0.0

    @property
    def t_release_end(self) -> float:
        return 1.0 + len(self.strengths)


def field_to_csv(grid: FlowGrid, values: np.ndarray, path) -> None:
    """Dump a per-cell field as (x, y, value) rows for plotting."""
    values = np.asarray(values)
    if values.shape != (grid.ny, grid.nx):
        raise ConfigurationError("field shape does not match the grid")
    xs, ys = grid.cell_centers()
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["x", "y", "value"])
        for iy in range(grid.ny):
            for ix in range(grid.nx):
                writer.writerow([repr(float(xs[iy, ix])), repr(float(ys[iy, ix])), repr(float(values[iy, ix]))])
