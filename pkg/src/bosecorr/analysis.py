"""CTD, norm, front detection, power-law and linear fits, saturation values."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .convergence import LIGHT_CONE_MARGIN, LIGHT_CONE_V
from .table import CorrelationTable

POWER_LAW = "power_law"
LINEAR = "linear"
POWER_DECAY = "power_decay"

#: A front must exceed this multiple of the noise floor to count as visible.
VISIBILITY_FACTOR = 5.0


class InsufficientDataError(ValueError):
    pass


class FitDomainError(ValueError):
    pass


@dataclass
class FitResult:
    model: str
    params: dict
    stderr: dict
    window: tuple
    residual_rms: float
    n_points: int
    flags: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "params": dict(self.params),
            "stderr": dict(self.stderr),
            "window": list(self.window),
            "residual_rms": self.residual_rms,
            "n_points": self.n_points,
            "flags": list(self.flags),
        }


@dataclass
class FrontTrace:
    """Visible correlation fronts, one entry per distance (sorted by d)."""

    d: np.ndarray
    tau: np.ndarray
    g_max: np.ndarray
    fwhm: np.ndarray
    excluded: dict = field(default_factory=dict)  # d -> reason

    def __len__(self):
        return len(self.d)

    def at(self, d: int) -> int:
        idx = np.flatnonzero(self.d == d)
        if idx.size == 0:
            raise KeyError(f"no visible front at d={d}")
        return int(idx[0])

    def to_dict(self) -> dict:
        return {
            "d": self.d.tolist(),
            "tau_d": self.tau.tolist(),
            "g_max": self.g_max.tolist(),
            "fwhm": [None if np.isnan(x) else float(x) for x in self.fwhm],
            "excluded": {str(k): v for k, v in self.excluded.items()},
        }


def compute_ctd(table: CorrelationTable) -> np.ndarray:
    """ell(tau) = sum_d d G_d(tau) over the stored distances."""
    return table.ctd


def compute_norm_and_normalized_ctd(table: CorrelationTable, noise_floor=0.0):
    """Return ``(N, ell_N)``; ell_N is NaN wherever N does not exceed the floor."""
    N = table.norm
    ell = table.ctd
    floor = np.broadcast_to(np.asarray(noise_floor, dtype=float), N.shape)
    ok = N > floor
    ell_n = np.full_like(N, np.nan)
    ell_n[ok] = ell[ok] / N[ok]
    return N, ell_n


def normalized_profiles(table: CorrelationTable) -> np.ndarray:
    """G_d(tau) / max_tau G_d(tau); all-zero columns stay zero."""
    peak = table.G.max(axis=0)
    out = np.zeros_like(table.G)
    nz = peak > 0
    out[:, nz] = table.G[:, nz] / peak[nz]
    return out


def _refine_peak(t, y, i):
    """Vertex of the parabola through samples i-1, i, i+1."""
    c = np.polyfit(t[i - 1:i + 2] - t[i], y[i - 1:i + 2], 2)
    if c[0] >= 0:
        return t[i], y[i]
    x = -c[1] / (2 * c[0])
    x = min(max(x, t[i - 1] - t[i]), t[i + 1] - t[i])
    return t[i] + x, float(np.polyval(c, x))


def _crossing(t, y, level, start, step):
    """Linear-interpolated time where y falls below `level` walking from `start`."""
    j = start
    while 0 <= j + step < len(y):
        k = j + step
        if y[k] < level:
            return t[j] + (level - y[j]) * (t[k] - t[j]) / (y[k] - y[j])
        j = k
    return None


def detect_front(table: CorrelationTable, noise_floor=0.0, visibility=VISIBILITY_FACTOR) -> FrontTrace:
    """Locate the global maximum of every G_d(tau) inside the time window.

    The discrete maximum is refined by a parabola through its neighbours.
    The FWHM comes from linearly interpolated half-maximum crossings; when
    the signal never falls to half maximum after the peak, twice the rising
    half-width is used instead. Distances whose maximum sits on the window
    edge, does not exceed ``visibility * noise_floor``, or lies outside the
    light cone ``d <= 6 tau_d + 5`` (a noise wiggle, not a front) are excluded.
    """
    t = table.tau
    floor = float(np.max(noise_floor)) if np.size(noise_floor) else 0.0
    ds, taus, gs, ws, excl = [], [], [], [], {}
    for d in table.distances:
        y = table.column(d)
        i = int(np.argmax(y))
        if y[i] <= 0 or y[i] <= visibility * floor:
            excl[int(d)] = "below_noise"
            continue
        if i == 0 or i == len(y) - 1:
            excl[int(d)] = "boundary"
            continue
        tp, gp = _refine_peak(t, y, i)
        if d > LIGHT_CONE_V * tp + LIGHT_CONE_MARGIN:
            excl[int(d)] = "outside_light_cone"
            continue
        half = 0.5 * gp
        left = _crossing(t, y, half, i, -1)
        right = _crossing(t, y, half, i, +1)
        if left is not None and right is not None:
            w = right - left
        elif left is not None:
            w = 2.0 * (tp - left)
        else:
            w = np.nan
        ds.append(int(d))
        taus.append(tp)
        gs.append(gp)
        ws.append(w)
    return FrontTrace(np.array(ds, dtype=int), np.array(taus), np.array(gs), np.array(ws), excl)


def _ols(x, y):
    """Slope, intercept, their standard errors and the residual RMS."""
    n = len(x)
    X = np.column_stack([x, np.ones(n)])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    r = y - X @ coef
    rms = float(np.sqrt(np.mean(r ** 2)))
    if n > 2:
        s2 = float(r @ r) / (n - 2)
        cov = s2 * np.linalg.inv(X.T @ X)
        se = np.sqrt(np.maximum(np.diag(cov), 0.0))
    else:
        se = np.array([np.nan, np.nan])
    return coef[0], coef[1], se[0], se[1], rms


def fit_power_law(tau, ell, window=None, min_points=5) -> FitResult:
    """Fit ``ell = alpha tau^beta`` by least squares on (log tau, log ell).

    Parameters
    ----------
    tau, ell : array_like
    window : (float, float), optional
        Inclusive fit window; defaults to the full range.
    """
    tau = np.asarray(tau, dtype=float)
    ell = np.asarray(ell, dtype=float)
    if window is None:
        window = (float(tau[0]), float(tau[-1]))
    t0, t1 = window
    sel = (tau >= t0 - 1e-9) & (tau <= t1 + 1e-9)
    if sel.sum() < min_points:
        raise InsufficientDataError(f"{sel.sum()} points in window {window}, need {min_points}")
    x, y = tau[sel], ell[sel]
    if np.any(x <= 0) or np.any(y <= 0):
        raise FitDomainError("power-law fit needs positive tau and ell")
    beta, loga, se_b, se_la, rms = _ols(np.log(x), np.log(y))
    alpha = float(np.exp(loga))
    return FitResult(
        POWER_LAW,
        {"alpha": alpha, "beta": float(beta)},
        {"alpha": float(alpha * se_la), "beta": float(se_b)},
        (float(x[0]), float(x[-1])),
        rms,
        int(sel.sum()),
    )


def _largest(front: FrontTrace, n_points: int, mask=None):
    idx = np.arange(len(front))
    if mask is not None:
        idx = idx[mask]
    if idx.size < 3:
        raise InsufficientDataError(f"{idx.size} visible fronts, need at least 3")
    sel = idx[np.argsort(front.d[idx])][-n_points:]
    flags = [] if sel.size == n_points else [f"only_{sel.size}_points"]
    return sel, flags


def fit_front_velocity(front: FrontTrace, n_points: int = 9) -> FitResult:
    """Fit ``d = v tau_d + d0`` over the `n_points` largest visible distances."""
    sel, flags = _largest(front, n_points)
    d = front.d[sel].astype(float)
    v, d0, se_v, se_d0, rms = _ols(front.tau[sel], d)
    return FitResult(
        LINEAR,
        {"v": float(v), "d0": float(d0)},
        {"v": float(se_v), "d0": float(se_d0)},
        (int(d.min()), int(d.max())),
        rms,
        int(sel.size),
        flags,
    )


def fit_front_decay(front: FrontTrace, n_points: int = 9) -> FitResult:
    """Fit ``G_max ~ c d^-eta`` over the `n_points` largest visible distances."""
    sel, flags = _largest(front, n_points)
    d = front.d[sel].astype(float)
    g = front.g_max[sel]
    if np.any(g <= 0):
        raise FitDomainError("front amplitudes must be positive")
    slope, logc, se_s, se_c, rms = _ols(np.log(d), np.log(g))
    c = float(np.exp(logc))
    return FitResult(
        POWER_DECAY,
        {"eta": float(-slope), "c": c},
        {"eta": float(se_s), "c": float(c * se_c)},
        (int(d.min()), int(d.max())),
        rms,
        int(sel.size),
        flags,
    )


def front_residuals(front: FrontTrace, fit: FitResult) -> np.ndarray:
    """tau_d minus the linear light-cone fit, for every visible d."""
    v, d0 = fit.params["v"], fit.params["d0"]
    return front.tau - (front.d - d0) / v


def saturation_value(table: CorrelationTable, front: FrontTrace, d: int, tau_max=None, min_samples=5):
    """Mean of G_d over ``[tau_d + FWHM_d, tau_max]``, or None when undefined.

    Undefined when the front is not visible at `d`, its FWHM is unknown, or
    fewer than `min_samples` grid points fall inside the window.
    """
    try:
        k = front.at(d)
    except KeyError:
        return None
    w = front.fwhm[k]
    if not np.isfinite(w):
        return None
    t_end = table.tau[-1] if tau_max is None else tau_max
    start = front.tau[k] + w
    sel = (table.tau >= start) & (table.tau <= t_end + 1e-9)
    if sel.sum() < min_samples:
        return None
    return float(table.column(d)[sel].mean())
