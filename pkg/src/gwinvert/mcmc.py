"""Differential-evolution MCMC baseline with archive sampling.

A small population of chains proposes jumps along difference vectors of
states drawn from a growing archive of past states, scaled by the standard
``2.38 / sqrt(2 n_params)`` factor plus a little jitter.  The archive starts
from prior draws and is appended with the chain states every few
generations, which keeps the proposal distribution adapted to the posterior
scale without per-chain tuning.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .evaluator import ForwardEvaluator
from .grid import ConfigurationError
from .inference import InverseProblem
from .likelihood import log_likelihood


@dataclass(frozen=True)
class MCMCConfig:
    chains: int = 3
    archive_thin: int = 10
    jitter: float = 1e-6
    burn_in_fraction: float = 2.0 / 3.0
    seed: int = 0

    def __post_init__(self):
        if self.chains < 3:
            raise ConfigurationError("need at least 3 chains")
        if not 0.0 <= self.burn_in_fraction < 1.0:
            raise ConfigurationError("burn-in fraction must lie in [0, 1)")


@dataclass
class ChainState:
    """Current chain positions, their cached log posteriors and the archive."""

    params: np.ndarray  # (chains, n_params)
    log_post: np.ndarray  # (chains,)
    archive: np.ndarray  # (n_archive, n_params)
    generation: int = 0


@dataclass(frozen=True)
class MCMCResult:
    samples: np.ndarray  # (chains, generations, n_params) full history
    burn_in: int
    rhat: np.ndarray
    acceptance_rate: float
    evaluations: int

    @property
    def posterior_samples(self) -> np.ndarray:
        """Post burn-in samples flattened across chains, (n, n_params)."""
        kept = self.samples[:, self.burn_in:, :]
        return kept.reshape(-1, kept.shape[-1])

    def posterior_mean(self) -> np.ndarray:
        return self.posterior_samples.mean(axis=0)

    def posterior_sd(self) -> np.ndarray:
        return self.posterior_samples.std(axis=0, ddof=1)


def log_posterior(m: np.ndarray, problem: InverseProblem, evaluator=None) -> float:
    """Log posterior density; -inf outside the prior support (no forward run)."""
    lp = problem.schema.log_prior(np.asarray(m, dtype=float))
    if not np.isfinite(lp):
        return -np.inf
    forward = evaluator if evaluator is not None else problem.forward
    f = forward.evaluate_one(m) if hasattr(forward, "evaluate_one") else forward(m)
    return lp + log_likelihood(np.asarray(f, dtype=float), problem.measurements)


def _gamma(n_params: int) -> float:
    return 2.38 / np.sqrt(2.0 * n_params)


def demc_step(state: ChainState, problem: InverseProblem, rng: np.random.Generator,
              evaluator: ForwardEvaluator, config: MCMCConfig = MCMCConfig()) -> int:
    """Advance every chain one generation in place; returns acceptances."""
    n_chains, n_params = state.params.shape
    if state.archive.shape[0] < 2 * n_chains:
        raise ConfigurationError("archive must hold at least two states per chain")
    gamma = _gamma(n_params)
    scale = problem.schema.ranges
    accepted = 0
    proposals = np.empty_like(state.params)
    for c in range(n_chains):
        a, b = rng.choice(state.archive.shape[0], size=2, replace=False)
        jump = gamma * (state.archive[a] - state.archive[b])
        jitter = config.jitter * scale * rng.standard_normal(n_params)
        proposals[c] = state.params[c] + jump + jitter
    log_u = np.log(rng.uniform(size=n_chains))

    # Proposals outside the prior support are rejected without spending a
    # forward evaluation; the rest are evaluated as one batch per generation.
    log_prior = np.array([problem.schema.log_prior(proposals[c]) for c in range(n_chains)])
    viable = np.flatnonzero(np.isfinite(log_prior))
    log_post = np.full(n_chains, -np.inf)
    if viable.size:
        outputs = evaluator.evaluate_matrix(proposals[viable].T)
        for j, c in enumerate(viable):
            log_post[c] = log_prior[c] + log_likelihood(outputs[:, j], problem.measurements)

    for c in range(n_chains):
        if log_u[c] < log_post[c] - state.log_post[c]:
            state.params[c] = proposals[c]
            state.log_post[c] = log_post[c]
            accepted += 1
    state.generation += 1
    if state.generation % config.archive_thin == 0:
        state.archive = np.vstack([state.archive, state.params])
    return accepted


def gelman_rubin(samples: np.ndarray) -> np.ndarray:
    """Potential scale reduction factor per parameter.

    ``samples`` has shape (chains, draws, n_params); the standard
    between/within variance estimator is returned for each parameter.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 3 or samples.shape[0] < 2 or samples.shape[1] < 2:
        raise ConfigurationError("need at least 2 chains with 2 draws each")
    m, n, _ = samples.shape
    chain_means = samples.mean(axis=1)
    within = samples.var(axis=1, ddof=1).mean(axis=0)
    between_over_n = chain_means.var(axis=0, ddof=1)
    var_plus = (n - 1) / n * within + between_over_n
    with np.errstate(divide="ignore", invalid="ignore"):
        rhat = np.sqrt(var_plus / within)
    return np.where(within > 0, rhat, 1.0)


def run_chain(problem: InverseProblem, n_evals: int, config: MCMCConfig = MCMCConfig(),
              workers: int | None = 1) -> MCMCResult:
    """Sample the posterior until the forward-evaluation budget is spent.

    The first ``burn_in_fraction`` of the generations is discarded before
    computing summary statistics and the convergence diagnostic; the full
    history stays available on the result.
    """
    n_chains = config.chains
    if n_evals < n_chains * 100:
        raise ConfigurationError("evaluation budget too small for the chain count")
    rng = np.random.default_rng(config.seed)
    schema = problem.schema
    n_params = schema.n_params

    archive_size = max(10 * n_params, 2 * n_chains, 20)
    from .ensemble import draw_prior  # local import to avoid a cycle at module load

    archive = draw_prior(schema, archive_size, rng).T
    init = draw_prior(schema, n_chains, rng).T

    history = []
    accepted = 0
    with ForwardEvaluator(problem.forward, workers) as evaluator:
        log_post = np.array([log_posterior(init[c], problem, evaluator) for c in range(n_chains)])
        state = ChainState(params=init.copy(), log_post=log_post, archive=archive)
        while evaluator.calls < n_evals:
            accepted += demc_step(state, problem, rng, evaluator, config)
            history.append(state.params.copy())
        evaluations = evaluator.calls

    samples = np.transpose(np.asarray(history), (1, 0, 2))  # (chains, gens, n_params)
    generations = samples.shape[1]
    burn_in = int(config.burn_in_fraction * generations)
    rhat = gelman_rubin(samples[:, burn_in:, :])
    return MCMCResult(
        samples=samples,
        burn_in=burn_in,
        rhat=rhat,
        acceptance_rate=accepted / (generations * n_chains),
        evaluations=evaluations,
    )
