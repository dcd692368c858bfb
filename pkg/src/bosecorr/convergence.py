"""Noise floor, the Q(tau) convergence ratio, paired-run checks, per-gamma defaults."""

from __future__ import annotations

import configparser
import logging
import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .table import CorrelationTable, SimulationConfig

log = logging.getLogger(__name__)

Q_THRESHOLD = 2e-4
REL_TOLERANCE = 0.005
DEFAULT_PROBE_D = 50
#: Largest front speed in the model; the probe must sit beyond v tau + margin.
LIGHT_CONE_V = 6.0
LIGHT_CONE_MARGIN = 5

Q_TRIGGER = "q_threshold"
END_TRIGGER = "window_end"


class LightConeError(ValueError):
    """The noise-floor probe lies inside the light cone."""


class AlignmentError(ValueError):
    """Two runs do not share a common time grid."""


def probe_admissible(probe_d: int, tau: float) -> bool:
    return probe_d >= math.ceil(LIGHT_CONE_V * tau - 1e-9) + LIGHT_CONE_MARGIN


def noise_floor(G_row, tau: float, probe_d: int = DEFAULT_PROBE_D) -> float:
    """sigma_G(tau) = G_probe_d(tau) from one table row.

    Raises
    ------
    LightConeError
        If ``probe_d < ceil(6 tau) + 5``.
    """
    if not probe_admissible(probe_d, tau):
        raise LightConeError(f"probe d={probe_d} is inside the light cone at tau={tau:g}")
    G_row = np.asarray(G_row)
    if probe_d > G_row.size:
        raise ValueError(f"table stops at d={G_row.size}, probe is d={probe_d}")
    return float(G_row[probe_d - 1])


@dataclass
class ConvergenceReport:
    tau: np.ndarray
    sigma: np.ndarray
    Q: np.ndarray
    tau_max: float
    trigger: str
    threshold: float = Q_THRESHOLD
    probe_d: int = DEFAULT_PROBE_D
    params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "tau": self.tau.tolist(),
            "sigma_G": self.sigma.tolist(),
            "Q": self.Q.tolist(),
            "tau_max": self.tau_max,
            "trigger": self.trigger,
            "threshold": self.threshold,
            "probe_d": self.probe_d,
            "params": self.params,
        }


def q_ratio(table: CorrelationTable, probe_d: int | None = None, threshold: float = Q_THRESHOLD) -> ConvergenceReport:
    """Q(tau) = sigma_G / max_d G_d and the first time it exceeds `threshold`.

    Rows where the probe has entered the light cone end the evaluated range.
    Q is zero wherever every G_d vanishes.
    """
    probe = min(DEFAULT_PROBE_D, table.d_max) if probe_d is None else probe_d
    if probe > table.d_max:
        raise ValueError(f"table stops at d={table.d_max}, probe is d={probe}")
    ok = np.array([probe_admissible(probe, t) for t in table.tau], dtype=bool)
    n = int(np.argmin(ok)) if not ok.all() else len(ok)
    tau = table.tau[:n]
    sigma = table.G[:n, probe - 1].copy()
    peak = table.G[:n].max(axis=1) if n else np.zeros(0)
    Q = np.zeros(n)
    nz = peak > 0
    Q[nz] = sigma[nz] / peak[nz]
    over = np.flatnonzero(Q > threshold)
    if over.size:
        tau_max, trigger = float(tau[over[0]]), Q_TRIGGER
    else:
        tau_max, trigger = (float(tau[-1]) if n else 0.0), END_TRIGGER
    return ConvergenceReport(tau, sigma, Q, tau_max, trigger, threshold, probe, dict(table.meta.get("config", {})))


def relative_error_check(tau_a, ell_a, tau_b, ell_b, threshold: float = REL_TOLERANCE, t_max=None):
    """First tau where ``|ell_a - ell_b| / ell_b > threshold``, or None.

    `b` is the higher-fidelity reference. The grids must agree on their
    common prefix; rows with ``tau = 0`` (where both ell vanish) are skipped.

    Raises
    ------
    AlignmentError
        If the grids disagree on their overlap.
    ValueError
        If ell_b is not positive on the compared range.
    """
    tau_a, tau_b = np.asarray(tau_a, float), np.asarray(tau_b, float)
    ell_a, ell_b = np.asarray(ell_a, float), np.asarray(ell_b, float)
    n = min(tau_a.size, tau_b.size)
    if n == 0 or not np.allclose(tau_a[:n], tau_b[:n], rtol=0, atol=1e-9):
        raise AlignmentError("runs do not share a common tau grid")
    t = tau_a[:n]
    sel = t > 0
    if t_max is not None:
        sel &= t <= t_max + 1e-9
    if np.any(ell_b[:n][sel] <= 0):
        raise ValueError("reference ell must be positive on the compared range")
    rel = np.abs(ell_a[:n] - ell_b[:n]) / np.where(sel, ell_b[:n], 1.0)
    bad = np.flatnonzero(sel & (rel > threshold))
    return float(t[bad[0]]) if bad.size else None


def compare_tables(run_a: CorrelationTable, run_b: CorrelationTable, threshold=REL_TOLERANCE, t_max=None):
    return relative_error_check(run_a.tau, run_a.ctd, run_b.tau, run_b.ctd, threshold, t_max)


def check_tau_max_monotone(reports: dict) -> list[str]:
    """Warn when a larger chi_max gives an earlier tau_max; returns the warnings."""
    warnings = []
    chis = sorted(reports)
    for lo, hi in zip(chis, chis[1:]):
        if reports[hi].tau_max < reports[lo].tau_max:
            msg = f"tau_max(chi={hi})={reports[hi].tau_max:g} < tau_max(chi={lo})={reports[lo].tau_max:g}"
            log.warning(msg)
            warnings.append(msg)
    return warnings


def _load_parameter_file(text: str | None = None) -> configparser.ConfigParser:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    if text is None:
        text = resources.files("bosecorr").joinpath("data/parameters.ini").read_text()
    cp.read_string(text)
    return cp


def aligned_delta(delta: float, output_dt: float) -> float:
    """Largest step ``<= delta`` that divides `output_dt` an integer number of times."""
    return output_dt / math.ceil(output_dt / delta - 1e-9)


def parameter_table(gamma: float, text: str | None = None, **overrides) -> SimulationConfig:
    """Desk-scale default `SimulationConfig` for `gamma` from the shipped table.

    Parameters
    ----------
    gamma : float
    text : str, optional
        INI contents replacing the shipped file (for custom calibrations).
    **overrides
        Fields set on the returned config, e.g. ``tau_end``.
    """
    if not gamma > 0 or not math.isfinite(gamma):
        raise ValueError(f"gamma must be positive and finite, got {gamma}")
    cp = _load_parameter_file(text)
    base = cp["defaults"]
    for name in cp.sections():
        if name == "defaults":
            continue
        sec = cp[name]
        if float(sec["gamma_min"]) <= gamma < float(sec["gamma_max"]):
            break
    else:
        raise ValueError(f"no parameter range covers gamma={gamma}")
    output_dt = base.getfloat("output_dt")
    delta = sec.getfloat("delta")
    if "delta_over_gamma" in sec:
        delta = min(delta, sec.getfloat("delta_over_gamma") * gamma)
    cfg = SimulationConfig(
        gamma=gamma,
        delta=aligned_delta(delta, output_dt),
        n_max=sec.getint("n_max"),
        eps=sec.getfloat("eps"),
        chi_max=base.getint("chi_max"),
        tau_end=base.getfloat("tau_end"),
        d_max=base.getint("d_max"),
        output_dt=output_dt,
    )
    return cfg.with_(**overrides) if overrides else cfg


def calibrate(config: SimulationConfig, run, threshold=REL_TOLERANCE) -> dict:
    """Check `config` against its delta-halved and n_max+2 variants.

    `run` maps a config to a `CorrelationTable`. Returns the first violating
    tau (or None) for each variant.
    """
    ref = run(config)
    out = {}
    for name, variant in (
        ("delta_half", config.with_(delta=config.delta / 2)),
        ("n_max_plus_2", config.with_(n_max=config.n_max + 2)),
    ):
        out[name] = compare_tables(ref, run(variant), threshold)
    return out
