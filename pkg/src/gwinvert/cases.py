"""Assemble runnable experiments from a RunConfig.

Builds the grid, parameter schema, monitoring network and the picklable
forward model for either conductivity parameterization, draws or loads the
truth vector, and synthesizes measurements.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import FieldModelConfig, RunConfig
from .flow import darcy_velocity, solve_steady_flow
from .grid import ConductivityField, ConfigurationError, FlowGrid, SourceSpec
from .inference import InverseProblem
from .observation import MeasurementSet, NoiseModel, WellNetwork, observation_layout, observe
from .parameters import NORMAL, UNIFORM, ParameterSchema, ParameterSlot
from .random_field import CovarianceSpec, KLBasis, build_kl_basis
from .transport import simulate_transport

N_SOURCE_SLOTS = 8  # x_s, y_s and six release strengths


def build_grid(cfg: RunConfig) -> FlowGrid:
    g = cfg.grid
    return FlowGrid(nx=g.nx, ny=g.ny, Lx=g.lx, Ly=g.ly, h_left=g.h_left, h_right=g.h_right)


def build_network(cfg: RunConfig) -> WellNetwork:
    w = cfg.wells
    return WellNetwork(xs=w.xs, ys=w.ys, sample_times=w.sample_times)


def build_noise(cfg: RunConfig) -> NoiseModel:
    return NoiseModel(sigma_conc=cfg.noise.sigma_conc, sigma_head=cfg.noise.sigma_head)


def build_schema(cfg: RunConfig) -> ParameterSchema:
    sp = cfg.source_prior
    slots = [
        ParameterSlot("x_s", UNIFORM, sp.x_low, sp.x_high),
        ParameterSlot("y_s", UNIFORM, sp.y_low, sp.y_high),
    ]
    slots += [
        ParameterSlot(f"S_s{i}", UNIFORM, sp.strength_low, sp.strength_high)
        for i in range(1, sp.n_strengths + 1)
    ]
    fm = cfg.field_model
    if fm.kind == "zoned":
        slots += [
            ParameterSlot(f"Y_{i}", UNIFORM, fm.log_k_low, fm.log_k_high)
            for i in range(1, len(fm.zone_breaks) + 2)
        ]
    else:
        slots += [ParameterSlot(f"xi_{i}", NORMAL) for i in range(1, fm.n_modes + 1)]
    return ParameterSchema(tuple(slots))


def zone_map_for(grid: FlowGrid, breaks) -> np.ndarray:
    """Zone index per cell for vertical-strip zonation."""
    zones = np.searchsorted(np.asarray(breaks, dtype=float), grid.xc)
    return np.tile(zones, (grid.ny, 1))


@dataclass(frozen=True)
class _ForwardBase:
    grid: FlowGrid
    network: WellNetwork
    noise: NoiseModel
    porosity: float
    alpha_l: float
    alpha_t: float
    dt: float

    def _respond(self, field: ConductivityField, m: np.ndarray) -> np.ndarray:
        n_strengths = self.n_strengths
        source = SourceSpec(
            x=float(m[0]),
            y=float(m[1]),
            strengths=tuple(m[2:2 + n_strengths]),
            porosity=self.porosity,
            alpha_l=self.alpha_l,
            alpha_t=self.alpha_t,
        )
        heads = solve_steady_flow(self.grid, field)
        velocity = darcy_velocity(self.grid, field, heads, porosity=self.porosity)
        times = self.network.sample_times
        result = simulate_transport(
            self.grid, field, source, t_end=max(times), dt=self.dt,
            output_times=times, velocity=velocity,
        )
        return observe(self.grid, heads, result, self.network, self.noise).values

    @property
    def n_strengths(self) -> int:
        return 6


@dataclass(frozen=True)
class ZonedForwardModel(_ForwardBase):
    """Forward map for the three-zone conductivity parameterization."""

    zone_breaks: tuple[float, ...] = (20.0 / 3.0, 40.0 / 3.0)

    def conductivity(self, zone_log_k: np.ndarray) -> ConductivityField:
        zones = zone_map_for(self.grid, self.zone_breaks)
        return ConductivityField.zonated(self.grid, zones, zone_log_k)

    def __call__(self, m: np.ndarray) -> np.ndarray:
        m = np.asarray(m, dtype=float)
        return self._respond(self.conductivity(m[N_SOURCE_SLOTS:]), m)


@dataclass(frozen=True)
class KLForwardModel(_ForwardBase):
    """Forward map with the conductivity synthesized from mode coefficients."""

    modes: np.ndarray = None  # (n_cells, n_modes), columns sqrt(lambda_i) * f_i
    mean_log_k: float = 2.0

    def conductivity(self, xi: np.ndarray) -> ConductivityField:
        log_k = self.mean_log_k + (self.modes @ xi).reshape(self.grid.ny, self.grid.nx)
        return ConductivityField(log_k, provenance="kl")

    def __call__(self, m: np.ndarray) -> np.ndarray:
        m = np.asarray(m, dtype=float)
        return self._respond(self.conductivity(m[N_SOURCE_SLOTS:]), m)


@dataclass(frozen=True)
class CaseBundle:
    """Everything a run needs, derived from one RunConfig."""

    config: RunConfig
    grid: FlowGrid
    schema: ParameterSchema
    network: WellNetwork
    noise: NoiseModel
    forward: object
    truth_params: np.ndarray
    kl_basis: KLBasis | None

    def measurement_layout(self) -> MeasurementSet:
        return observation_layout(self.network, self.noise)

    def true_log_k(self) -> np.ndarray:
        field = self.forward.conductivity(self.truth_params[N_SOURCE_SLOTS:])
        return field.log_k


def truth_vector(cfg: RunConfig, schema: ParameterSchema) -> np.ndarray:
    """Resolve the truth: explicit leading slots, the rest drawn from seeds.

    ``cfg.truth = None`` draws the whole vector from the prior with the
    truth seed (the randomized-truth scenario); a partial vector is padded
    with standard-normal mode coefficients drawn from the field seed.
    """
    from .ensemble import draw_prior

    n = schema.n_params
    if cfg.truth is None:
        return draw_prior(schema, 2, np.random.default_rng(cfg.seeds.truth))[:, 0]
    truth = np.asarray(cfg.truth, dtype=float)
    if truth.size == n:
        return truth
    if truth.size > n:
        raise ConfigurationError(f"truth vector has {truth.size} entries for {n} slots")
    rng = np.random.default_rng(cfg.seeds.field)
    pad = rng.standard_normal(n - truth.size)
    return np.concatenate([truth, pad])


def build_case(cfg: RunConfig, cache_dir=None) -> CaseBundle:
    """Materialize a RunConfig into grid, schema, forward model and truth."""
    grid = build_grid(cfg)
    schema = build_schema(cfg)
    network = build_network(cfg)
    network.validate(grid)
    noise = build_noise(cfg)
    p = cfg.physics
    common = dict(
        grid=grid, network=network, noise=noise,
        porosity=p.porosity, alpha_l=p.alpha_l, alpha_t=p.alpha_t, dt=p.dt,
    )
    fm = cfg.field_model
    basis = None
    if fm.kind == "zoned":
        forward = ZonedForwardModel(zone_breaks=tuple(fm.zone_breaks), **common)
    else:
        cov = CovarianceSpec(
            variance=fm.variance, corr_x=fm.corr_x, corr_y=fm.corr_y, mean=fm.mean_log_k
        )
        basis = build_kl_basis(grid, cov, fm.n_modes, cache_dir=cache_dir)
        forward = KLForwardModel(modes=basis.modes, mean_log_k=fm.mean_log_k, **common)
    truth = truth_vector(cfg, schema)
    return CaseBundle(
        config=cfg, grid=grid, schema=schema, network=network, noise=noise,
        forward=forward, truth_params=truth, kl_basis=basis,
    )


@dataclass(frozen=True)
class TruthRecord:
    """True parameters and the synthetic measurements generated from them."""

    names: tuple[str, ...]
    params: np.ndarray
    noise_free: np.ndarray
    noise_draws: np.ndarray
    noisy: np.ndarray

    def __post_init__(self):
        if not np.allclose(self.noisy, self.noise_free + self.noise_draws, rtol=0, atol=0):
            raise ConfigurationError("noisy observations must equal noise-free plus draws")


def generate_truth(bundle: CaseBundle, zero_noise: bool = False) -> TruthRecord:
    """Forward-run the truth and add seeded measurement noise."""
    layout = bundle.measurement_layout()
    noise_free = np.asarray(bundle.forward(bundle.truth_params), dtype=float)
    rng = np.random.default_rng(bundle.config.seeds.noise)
    draws = rng.standard_normal(layout.n_obs) * layout.sigma
    if zero_noise:
        draws = np.zeros(layout.n_obs)
    return TruthRecord(
        names=bundle.schema.names,
        params=bundle.truth_params.copy(),
        noise_free=noise_free,
        noise_draws=draws,
        noisy=noise_free + draws,
    )


def make_problem(bundle: CaseBundle, record: TruthRecord) -> InverseProblem:
    layout = bundle.measurement_layout()
    return InverseProblem(
        forward=bundle.forward,
        schema=bundle.schema,
        measurements=layout.with_values(record.noisy),
    )
