"""Simulation configuration and the (tau, d) -> G_d correlation table."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace

import numpy as np


@dataclass(frozen=True)
class SimulationConfig:
    gamma: float
    delta: float = 0.05
    n_max: int = 5
    eps: float = 1e-10
    chi_max: int = 512
    tau_end: float = 1.0
    d_max: int = 50
    output_dt: float = 0.05

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if self.n_max < 1:
            raise ValueError("n_max must be >= 1")
        if not 0 <= self.eps < 1:
            raise ValueError("eps must lie in [0, 1)")
        if self.chi_max < 1:
            raise ValueError("chi_max must be >= 1")
        if self.tau_end < 0:
            raise ValueError("tau_end must be >= 0")
        if self.d_max < 1:
            raise ValueError("d_max must be >= 1")
        if self.output_dt < self.delta * (1 - 1e-9):
            raise ValueError("output_dt must be at least one time step")

    @property
    def steps_per_output(self) -> int:
        return max(1, int(round(self.output_dt / self.delta)))

    @property
    def n_steps(self) -> int:
        return int(round(self.tau_end / self.delta))

    def to_dict(self) -> dict:
        return asdict(self)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def with_(self, **changes) -> "SimulationConfig":
        return replace(self, **changes)


@dataclass
class CorrelationTable:
    """G_d(tau) for d = 1..d_max on an increasing tau grid.

    `G` has shape ``(len(tau), d_max)``; column ``d - 1`` holds distance d.
    CTD and norm are always derived from `G`, never stored separately.
    """

    tau: np.ndarray
    G: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.tau = np.asarray(self.tau, dtype=float)
        self.G = np.atleast_2d(np.asarray(self.G, dtype=float))
        if self.G.shape[0] != self.tau.shape[0]:
            raise ValueError("G rows must match the tau grid")
        if self.tau.size > 1 and np.any(np.diff(self.tau) <= 0):
            raise ValueError("tau grid must be strictly increasing")
        if np.any(self.G < 0):
            raise ValueError("G_d must be non-negative")

    @property
    def d_max(self) -> int:
        return self.G.shape[1]

    @property
    def distances(self) -> np.ndarray:
        return np.arange(1, self.d_max + 1)

    def column(self, d: int) -> np.ndarray:
        if not 1 <= d <= self.d_max:
            raise IndexError(f"distance {d} outside 1..{self.d_max}")
        return self.G[:, d - 1]

    @property
    def ctd(self) -> np.ndarray:
        return self.G @ self.distances

    @property
    def norm(self) -> np.ndarray:
        return self.G.sum(axis=1)

    def window(self, t0: float, t1: float) -> "CorrelationTable":
        """Rows with ``t0 <= tau <= t1`` (inclusive, with float slack)."""
        sel = (self.tau >= t0 - 1e-9) & (self.tau <= t1 + 1e-9)
        return CorrelationTable(self.tau[sel], self.G[sel], dict(self.meta))

    def truncate_distance(self, d_max: int) -> "CorrelationTable":
        return CorrelationTable(self.tau, self.G[:, :d_max], dict(self.meta))


def table_from_grid(tau, G, **meta) -> CorrelationTable:
    return CorrelationTable(np.asarray(tau), np.abs(np.asarray(G)), meta)
