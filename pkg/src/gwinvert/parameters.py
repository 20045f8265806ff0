"""Parameter vector schema: named slots with their prior distributions.

Bounded slots carry uniform priors and are clipped back into range after
ensemble updates; unbounded slots are standard normal (used for the
random-field mode coefficients).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import ConfigurationError

UNIFORM = "uniform"
NORMAL = "normal"


@dataclass(frozen=True)
class ParameterSlot:
    name: str
    kind: str = UNIFORM
    low: float = 0.0
    high: float = 1.0

    def __post_init__(self):
        if self.kind not in (UNIFORM, NORMAL):
            raise ConfigurationError(f"unknown prior kind {self.kind!r} for slot {self.name!r}")
        if self.kind == UNIFORM and self.low > self.high:
            raise ConfigurationError(
                f"slot {self.name!r} has an invalid range [{self.low}, {self.high}]"
            )


@dataclass(frozen=True)
class ParameterSchema:
    slots: tuple[ParameterSlot, ...]

    def __post_init__(self):
        if not self.slots:
            raise ConfigurationError("parameter schema needs at least one slot")
        names = [s.name for s in self.slots]
        if len(set(names)) != len(names):
            raise ConfigurationError("parameter slot names must be unique")
        object.__setattr__(self, "slots", tuple(self.slots))

    @property
    def n_params(self) -> int:
        return len(self.slots)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.slots)

    @property
    def bounded(self) -> np.ndarray:
        return np.array([s.kind == UNIFORM for s in self.slots])

    @property
    def lower(self) -> np.ndarray:
        return np.array([s.low if s.kind == UNIFORM else -np.inf for s in self.slots])

    @property
    def upper(self) -> np.ndarray:
        return np.array([s.high if s.kind == UNIFORM else np.inf for s in self.slots])

    @property
    def ranges(self) -> np.ndarray:
        """Prior range per slot; unbounded (normal) slots report 1."""
        return np.where(self.bounded, self.upper - self.lower, 1.0)

    def index_of(self, name: str) -> int:
        for i, s in enumerate(self.slots):
            if s.name == name:
                return i
        raise KeyError(name)

    def clip(self, m: np.ndarray) -> np.ndarray:
        """Clip bounded slots back into their prior range (columns = samples)."""
        m = np.asarray(m, dtype=float)
        lo = self.lower
        hi = self.upper
        if m.ndim == 1:
            return np.clip(m, lo, hi)
        return np.clip(m, lo[:, None], hi[:, None])

    def out_of_bounds_counts(self, m: np.ndarray) -> np.ndarray:
        """Per-slot count of entries outside the prior range."""
        m = np.atleast_2d(np.asarray(m, dtype=float).T).T
        lo = self.lower[:, None]
        hi = self.upper[:, None]
        return ((m < lo) | (m > hi)).sum(axis=1)

    def log_prior(self, m: np.ndarray) -> float:
        """Log prior density of one parameter vector (-inf outside support)."""
        m = np.asarray(m, dtype=float)
        if m.shape != (self.n_params,):
            raise ConfigurationError(f"expected {self.n_params} parameters, got {m.shape}")
        total = 0.0
        for value, slot in zip(m, self.slots):
            if slot.kind == UNIFORM:
                if value < slot.low or value > slot.high:
                    return -np.inf
                width = slot.high - slot.low
                total += -math.log(width) if width > 0 else 0.0
            else:
                total += -0.5 * math.log(2.0 * math.pi) - 0.5 * value * value
        return total

    def contains(self, m: np.ndarray) -> bool:
        return np.isfinite(self.log_prior(m))


def source_slots(strength_high: float = 8.0) -> list[ParameterSlot]:
    """Slots for the contaminant source: location box plus six strengths."""
    slots = [
        ParameterSlot("x_s", UNIFORM, 3.0, 5.0),
        ParameterSlot("y_s", UNIFORM, 4.0, 6.0),
    ]
    slots += [ParameterSlot(f"S_s{i}", UNIFORM, 0.0, strength_high) for i in range(1, 7)]
    return slots


def zoned_schema() -> ParameterSchema:
    """Source parameters plus three zone log-conductivities."""
    slots = source_slots()
    slots += [ParameterSlot(f"Y_{i}", UNIFORM, 1.0, 3.0) for i in range(1, 4)]
    return ParameterSchema(tuple(slots))


def kl_schema(n_modes: int = 100) -> ParameterSchema:
    """Source parameters plus standard-normal mode coefficients."""
    slots = source_slots()
    slots += [ParameterSlot(f"xi_{i}", NORMAL) for i in range(1, n_modes + 1)]
    return ParameterSchema(tuple(slots))
