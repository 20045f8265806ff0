"""Observation extraction and the measurement model.

A monitoring network is a set of wells plus a concentration sampling
schedule.  Observation vectors are ordered with all head values first (one
per well, the flow is steady) followed by concentrations grouped per well in
time order.  Values are interpolated bilinearly to the well coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import ConfigurationError, FlowGrid, HeadField

KIND_HEAD = "head"
KIND_CONC = "conc"


@dataclass(frozen=True)
class WellNetwork:
    """Well coordinates and the shared concentration sampling times."""

    xs: tuple[float, ...]
    ys: tuple[float, ...]
    sample_times: tuple[float, ...]

    def __post_init__(self):
        if len(self.xs) != len(self.ys):
            raise ConfigurationError("well x and y coordinate lists differ in length")
        object.__setattr__(self, "xs", tuple(float(v) for v in self.xs))
        object.__setattr__(self, "ys", tuple(float(v) for v in self.ys))
        object.__setattr__(self, "sample_times", tuple(float(t) for t in self.sample_times))

    @property
    def n_wells(self) -> int:
        return len(self.xs)

    @property
    def n_obs(self) -> int:
        return self.n_wells * (1 + len(self.sample_times))

    def validate(self, grid: FlowGrid) -> None:
        for x, y in zip(self.xs, self.ys):
            if not grid.contains(x, y):
                raise ConfigurationError(f"well at ({x}, {y}) lies outside the domain")


@dataclass(frozen=True)
class NoiseModel:
    """Independent Gaussian measurement noise, one sigma per datum kind."""

    sigma_conc: float = 0.05
    sigma_head: float = 0.01

    def __post_init__(self):
        if self.sigma_conc <= 0 or self.sigma_head <= 0:
            raise ConfigurationError("noise standard deviations must be positive")

    def sigma_for(self, kind: str) -> float:
        if kind == KIND_HEAD:
            return self.sigma_head
        if kind == KIND_CONC:
            return self.sigma_conc
        raise ConfigurationError(f"unknown measurement kind {kind!r}")


@dataclass(frozen=True)
class MeasurementSet:
    """Observation vector with per-datum noise and space/time metadata."""

    values: np.ndarray
    sigma: np.ndarray
    kinds: tuple[str, ...]
    wells: tuple[int, ...]
    times: tuple[float, ...]  # nan for steady head measurements

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        sigma = np.asarray(self.sigma, dtype=float)
        n = values.size
        if sigma.size != n or len(self.kinds) != n or len(self.wells) != n or len(self.times) != n:
            raise ConfigurationError("measurement metadata lengths are inconsistent")
        if np.any(sigma <= 0):
            raise ConfigurationError("measurement sigmas must be positive")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "sigma", sigma)

    @property
    def n_obs(self) -> int:
        return self.values.size

    def with_values(self, values: np.ndarray) -> "MeasurementSet":
        values = np.asarray(values, dtype=float)
        if values.size != self.n_obs:
            raise ConfigurationError("replacement value vector has the wrong length")
        return MeasurementSet(values, self.sigma, self.kinds, self.wells, self.times)


def observation_layout(network: WellNetwork, noise: NoiseModel) -> MeasurementSet:
    """MeasurementSet skeleton (zero values) fixing ordering, sigma, metadata."""
    kinds, wells, times, sigmas = [], [], [], []
    for w in range(network.n_wells):
        kinds.append(KIND_HEAD)
        wells.append(w)
        times.append(float("nan"))
        sigmas.append(noise.sigma_head)
    for w in range(network.n_wells):
        for t in network.sample_times:
            kinds.append(KIND_CONC)
            wells.append(w)
            times.append(t)
            sigmas.append(noise.sigma_conc)
    return MeasurementSet(
        values=np.zeros(len(kinds)),
        sigma=np.array(sigmas),
        kinds=tuple(kinds),
        wells=tuple(wells),
        times=tuple(times),
    )


def observe(grid: FlowGrid, heads: HeadField, transport_result, network: WellNetwork,
            noise: NoiseModel) -> MeasurementSet:
    """Extract the noise-free observation vector for a forward run.

    ``transport_result`` must hold snapshots at every ``network.sample_times``
    entry.  Heads come first (well order), then per-well concentration series.
    """
    network.validate(grid)
    layout = observation_layout(network, noise)
    values = np.empty(layout.n_obs)
    i = 0
    for w in range(network.n_wells):
        values[i] = grid.interpolate(heads.values, network.xs[w], network.ys[w])
        i += 1
    conc_at = {t: transport_result.at(t).values for t in network.sample_times}
    for w in range(network.n_wells):
        for t in network.sample_times:
            values[i] = grid.interpolate(conc_at[t], network.xs[w], network.ys[w])
            i += 1
    return layout.with_values(values)
