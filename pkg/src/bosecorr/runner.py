"""Drive an iTEBD run from a `SimulationConfig` to a `CorrelationTable`.

Runs are deterministic, so finished tables may be cached on disk when the
``BOSECORR_CACHE_DIR`` environment variable names a directory. The cache key
is the config hash plus the stopping rule.
"""

from __future__ import annotations

import logging
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .itebd import EngineLog, evolve_step, init_unit_filling, measure_correlations, measure_density
from .model import ModelParams, build_trotter_gates
from .table import CorrelationTable, SimulationConfig
from .tensor import NumericError

log = logging.getLogger(__name__)

CACHE_ENV = "BOSECORR_CACHE_DIR"


class RunAborted(NumericError):
    """Numeric blow-up mid-run; `partial` holds the rows measured so far."""

    def __init__(self, msg, partial: CorrelationTable):
        super().__init__(msg)
        self.partial = partial


@dataclass
class RunResult:
    table: CorrelationTable
    log: EngineLog = field(default_factory=EngineLog)
    wall_time: float = 0.0


def _table(config, taus, rows, diag, extra):
    meta = {
        "source": "itebd",
        "config": config.to_dict(),
        "config_hash": config.config_hash(),
        "diagnostics": {k: np.asarray(v) for k, v in diag.items()},
    }
    meta.update(extra)
    G = np.array(rows) if rows else np.zeros((0, config.d_max))
    return CorrelationTable(np.array(taus), G, meta)


def run_simulation(
    config: SimulationConfig,
    stop_on_q: float | None = None,
    probe_d: int | None = None,
    progress=None,
) -> RunResult:
    """Evolve the unit-filling state and tabulate G_d on the output grid.

    Parameters
    ----------
    config : SimulationConfig
    stop_on_q : float, optional
        Stop at the first output time where ``G_probe / max_d G_d`` exceeds
        this value (the row that crosses is kept).
    probe_d : int, optional
        Noise-floor probe distance, default ``config.d_max``.
    progress : callable, optional
        Called as ``progress(tau, G, report)`` after every output row.

    Returns
    -------
    RunResult
        Table with a ``tau = 0`` row first; per-row bond dimensions,
        discarded weights and site densities live in ``meta["diagnostics"]``.
    """
    params = ModelParams(config.gamma, config.n_max)
    gates = build_trotter_gates(params, config.delta)
    state = init_unit_filling(params)
    probe = config.d_max if probe_d is None else probe_d
    every = config.steps_per_output

    taus = [0.0]
    rows = [measure_correlations(state, config.d_max)]
    diag = {"chi": [state.bond_dims], "discarded": [0.0], "density": [measure_density(state)]}
    elog = EngineLog()
    disc = 0.0
    t0 = time.perf_counter()
    stopped = None
    for k in range(config.n_steps):
        try:
            state, rep = evolve_step(state, gates, config.eps, config.chi_max)
        except NumericError as exc:
            raise RunAborted(str(exc), _table(config, taus, rows, diag, {"aborted": True})) from exc
        elog.reports.append(rep)
        disc = max(disc, *rep.discarded)
        if (k + 1) % every and k + 1 != config.n_steps:
            continue
        G = measure_correlations(state, config.d_max)
        if not np.all(np.isfinite(G)):
            raise RunAborted(
                f"non-finite correlations at tau={state.tau:.6g}",
                _table(config, taus, rows, diag, {"aborted": True}),
            )
        taus.append(state.tau)
        rows.append(G)
        diag["chi"].append(rep.bond_dims)
        diag["discarded"].append(disc)
        diag["density"].append(measure_density(state))
        disc = 0.0
        if progress is not None:
            progress(state.tau, G, rep)
        log.debug("tau=%.4f chi=%s ell=%.6e", state.tau, rep.bond_dims, G @ np.arange(1, len(G) + 1))
        if stop_on_q is not None and G.max() > 0 and G[probe - 1] / G.max() > stop_on_q:
            stopped = state.tau
            break
    extra = {"stopped_on_q": stopped}
    return RunResult(_table(config, taus, rows, diag, extra), elog, time.perf_counter() - t0)


def _cache_path(config, stop_on_q):
    root = os.environ.get(CACHE_ENV)
    if not root:
        return None
    tag = "full" if stop_on_q is None else f"q{stop_on_q:g}"
    return Path(root) / f"{config.config_hash()}-{tag}.npz"


_memo: dict = {}


def cached_table(config: SimulationConfig, stop_on_q: float | None = None, progress=None) -> CorrelationTable:
    """`run_simulation` memoized in-process and, optionally, on disk.

    `progress` is only called when the run actually executes.
    """
    key = (config, stop_on_q)
    if key in _memo:
        return _memo[key]
    path = _cache_path(config, stop_on_q)
    if path is not None and path.exists():
        z = np.load(path, allow_pickle=False)
        tau = z["tau"]
        # a Q stop is the only way a run ends before tau_end
        stopped = float(tau[-1]) if stop_on_q is not None and tau[-1] < config.tau_end - 1e-9 else None
        diag = {"chi": z["chi"], "discarded": z["discarded"], "density": z["density"]}
        table = _table(config, list(tau), list(z["G"]), diag, {"stopped_on_q": stopped})
    else:
        table = run_simulation(config, stop_on_q=stop_on_q, progress=progress).table
        if path is not None:
            path.parent.mkdir(parents=True, exist_ok=True)
            d = table.meta["diagnostics"]
            np.savez(path, tau=table.tau, G=table.G, chi=d["chi"], discarded=d["discarded"], density=d["density"])
    _memo[key] = table
    return table
